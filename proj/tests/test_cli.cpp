#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "selfadj/cli.hpp"
#include "selfadj/errors.hpp"

using namespace selfadj;
using namespace selfadj::cli;
using nlohmann::json;

namespace {

const char* kBox = R"({
  "expression": {"kind": "schrodinger", "potential": {"kind": "zero"}},
  "interval": {"a": 0, "b": 1},
  "bc": {"preset": "dirichlet"},
  "spectrum": {"e_min": -1, "e_max": 100}
})";

const char* kHalfMomentum = R"({"expression": {"kind": "momentum"}, "interval": {"a": 0, "b": "inf"}})";

}  // namespace

TEST_CASE("config round trip") {
    const auto a = parse_config(kBox);
    const auto s1 = serialize_config(a);
    const auto s2 = serialize_config(parse_config(s1));
    CHECK(s1 == s2);
    CHECK(s1.back() == '\n');
    CHECK(s1.find('\r') == std::string::npos);
    // preset is stored expanded
    CHECK(json::parse(s1)["bc"]["kind"] == "matrix_pair");

    const auto h = parse_config(kHalfMomentum);
    CHECK(std::isinf(h.interval.b));
    CHECK(json::parse(serialize_config(h))["interval"]["b"] == "inf");
    const auto l = parse_config(R"({"expression": {"kind": "schrodinger"}, "interval": {"a": "-inf", "b": "+inf"}})");
    CHECK(l.interval.a == -kInf);

    const auto fc = parse_config(R"({
      "expression": {"kind": "schrodinger", "potential": {"kind": "inverse_square", "alpha": 1}},
      "interval": {"a": 0, "b": "inf"},
      "bc": {"kind": "singular_asymptotic", "vartheta": 0.5},
      "kappa": 2, "tau": 0.5
    })");
    const auto t = serialize_config(fc);
    CHECK(t == serialize_config(parse_config(t)));
    CHECK(json::parse(t)["bc"]["mu0"] == 1.0);

    const auto ex = parse_config(R"({
      "expression": {"kind": "custom_even", "terms": [{"k": 0, "f": {"kind": "power", "c": 2, "p": 2}},
                                                       {"k": 2, "f": {"kind": "constant", "c": 1}}]},
      "interval": {"a": 0, "b": 1},
      "bc": {"kind": "abv_unitary", "U": [[[0, 1], [0, 0]], [[0, 0], [0, 1]]], "tau": 2, "layout": "left"}
    })");
    CHECK(ex.expression.order == 4);
    CHECK(build_expression(ex).order() == 4);
    const auto e = serialize_config(ex);
    CHECK(e == serialize_config(parse_config(e)));
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse_config("{"), InvalidInput);
    CHECK_THROWS_AS(parse_config(R"({"expression": {"kind": "schrodinger"}, "interval": {"a": 1, "b": 0}})"),
                    InvalidInput);
    CHECK_THROWS_AS(
        parse_config(R"({"expression": {"kind": "schrodinger", "potential": {"kind": "cubic"}}, "interval": {"a": 0, "b": 1}})"),
        InvalidInput);
    CHECK_THROWS_AS(parse_config(R"({"expression": {"kind": "schrodinger"}, "interval": {"a": 0, "b": 1}, "extra": 1})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_config(R"({"expression": {"kind": "schrodinger", "potential": {"kind": "table", "path": "nope.txt"}},
                                    "interval": {"a": 0, "b": 1}})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_config(R"({"expression": {"kind": "schrodinger"}, "interval": {"a": 0, "b": "inf"},
                                    "bc": {"preset": "dirichlet"}})"),
                    InvalidInput);
    CHECK_THROWS_AS(parse_config(R"({"expression": {"kind": "schrodinger"}, "interval": {"a": 0, "b": 1},
                                    "bc": {"kind": "s_matrix", "S": [[[1, 0]], [[0, 0], [1, 0]]]}})"),
                    InvalidInput);
}

TEST_CASE("table potential") {
    const auto dir = std::filesystem::temp_directory_path() / "selfadj_cli_test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream t(dir / "v.txt");
        t << "# x v\n";
        for (int i = 0; i <= 20; ++i) t << i * 0.05 << ", 0\n";
    }
    {
        std::ofstream c(dir / "c.json");
        c << R"({"expression": {"kind": "schrodinger", "potential": {"kind": "table", "path": "v.txt"}},
                 "interval": {"a": 0, "b": 1}, "bc": {"preset": "dirichlet"},
                 "spectrum": {"e_min": 0, "e_max": 50}})";
    }
    const auto cfg = load_config((dir / "c.json").string());
    const auto r = run(cfg, "spectrum");
    CHECK(r.exit_code == 0);
    const auto rep = json::parse(r.report);
    REQUIRE(rep["spectrum"]["eigenvalues"].size() == 2);
    CHECK(rep["spectrum"]["eigenvalues"][0].get<double>() == doctest::Approx(9.8696044).epsilon(1e-8));
}

TEST_CASE("commands and exit codes") {
    SUBCASE("semiaxis momentum has no self-adjoint extension") {
        const auto cfg = parse_config(kHalfMomentum);
        const auto r = run(cfg, "extensions");
        CHECK(r.exit_code == NoSelfAdjointExtension);
        const auto rep = json::parse(r.report);
        CHECK(rep["deficiency"]["m_plus"] == 1);
        CHECK(rep["deficiency"]["m_minus"] == 0);
        CHECK(rep["extensions"]["exists"] == false);
        CHECK(run(cfg, "deficiency").exit_code == NoSelfAdjointExtension);
        CHECK(run(cfg, "classify").exit_code == Ok);
    }
    SUBCASE("free particle on a box") {
        const auto r = run(parse_config(kBox), "extensions");
        CHECK(r.exit_code == Ok);
        const auto rep = json::parse(r.report);
        CHECK(rep["extensions"]["family"] == "U(2)");
        CHECK(rep["extensions"]["parameters"] == 4);
        CHECK(rep["extensions"]["presets"].size() == 7);
        for (const auto& p : rep["extensions"]["presets"]) CHECK(p["valid"] == true);
        CHECK(rep["extensions"]["bc"]["valid"] == true);
        CHECK(rep["extensions"]["bc"]["conversions"].contains("abv_unitary"));
        CHECK(rep.contains("kappa"));
        CHECK(rep.contains("tau"));
        CHECK(rep.contains("tolerances"));
    }
    SUBCASE("spectrum table") {
        const auto r = run(parse_config(kBox), "spectrum");
        CHECK(r.exit_code == Ok);
        CHECK(r.csv.rfind("index,eigenvalue,residual\n", 0) == 0);
        CHECK(r.csv.find('\r') == std::string::npos);
        const auto rep = json::parse(r.report);
        CHECK(rep["spectrum"]["eigenvalues"].size() == 3);
        CHECK(rep["spectrum"]["method"] == "determinant");
    }
    SUBCASE("bc against endpoint kinds") {
        const auto cfg = parse_config(R"({
          "expression": {"kind": "schrodinger"}, "interval": {"a": 0, "b": 1},
          "bc": {"kind": "singular_asymptotic"}, "spectrum": {"e_min": 0, "e_max": 10}})");
        const auto r = run(cfg, "spectrum");
        CHECK(r.exit_code == ConfigError);
        CHECK(json::parse(r.report).contains("error"));
        CHECK(r.csv.empty());
        CHECK(run(parse_config(kHalfMomentum), "spectrum").exit_code == ConfigError);
        CHECK(run(parse_config(kBox), "nonsense").exit_code == ConfigError);
    }
    SUBCASE("invalid condition") {
        const auto cfg = parse_config(R"({
          "expression": {"kind": "schrodinger"}, "interval": {"a": 0, "b": 1},
          "bc": {"kind": "s_matrix", "S": [[[2, 0], [0, 0]], [[0, 0], [1, 0]]]}})");
        const auto r = run(cfg, "extensions");
        CHECK(r.exit_code == ConfigError);
        CHECK(json::parse(r.report)["extensions"]["bc"]["valid"] == false);
        const auto v = json::parse(run(cfg, "verify").report);
        CHECK(v["verify"]["symmetry"]["passed"] == false);
    }
    SUBCASE("verify is reproducible") {
        const auto cfg = parse_config(R"({
          "expression": {"kind": "schrodinger", "potential": {"kind": "harmonic"}},
          "interval": {"a": 0, "b": "inf"}, "bc": {"kind": "robin", "left": {"lambda": 0.5}}})");
        RunOptions o;
        o.seed = 11;
        const auto a = run(cfg, "verify", o), b = run(cfg, "verify", o);
        CHECK(a.exit_code == Ok);
        CHECK(a.report == b.report);
        CHECK(a.csv == b.csv);
        const auto rep = json::parse(a.report);
        CHECK(rep["verify"]["passed"] == true);
        CHECK(rep["seed"] == 11);
    }
}
