#include "selfadj/cli.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "selfadj/endpoints.hpp"
#include "selfadj/errors.hpp"
#include "selfadj/verify.hpp"

namespace selfadj::cli {

using json = nlohmann::json;

namespace {

constexpr cplx I{0.0, 1.0};

// ---------- numbers ----------

double num(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw InvalidInput(what + ": expected a number or \"inf\"/\"-inf\"");
}

json jnum(double x) {
    if (std::isnan(x)) return nullptr;
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x == 0.0 ? 0.0 : x;
}

int integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw InvalidInput(what + ": expected an integer");
    return j.get<int>();
}

std::string str(const json& j, const std::string& what) {
    if (!j.is_string()) throw InvalidInput(what + ": expected a string");
    return j.get<std::string>();
}

const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw InvalidInput(where + ": missing \"" + key + "\"");
    return obj.at(key);
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) throw InvalidInput(where + ": expected an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (const auto& [k, v] : obj.items())
        if (!ok.count(k)) throw InvalidInput(where + ": unknown key \"" + k + "\"");
}

std::string fmt(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
    return buf;
}

// ---------- matrices ----------

json mat_to_json(const MatrixXc& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back({jnum(m(i, j).real()), jnum(m(i, j).imag())});
        rows.push_back(row);
    }
    return rows;
}

MatrixXc mat_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw InvalidInput(what + ": expected rows of [re, im] pairs");
    const auto rows = static_cast<Eigen::Index>(j.size()), cols = static_cast<Eigen::Index>(j[0].size());
    MatrixXc m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw InvalidInput(what + ": ragged rows");
        for (Eigen::Index k = 0; k < cols; ++k) {
            const auto& e = row[static_cast<std::size_t>(k)];
            if (!e.is_array() || e.size() != 2) throw InvalidInput(what + ": entries must be [re, im]");
            m(i, k) = cplx(num(e[0], what), num(e[1], what));
        }
    }
    return m;
}

// ---------- boundary conditions ----------

json robin_end_json(const std::optional<RobinEnd>& e) {
    if (!e) return nullptr;
    return json{{"dirichlet", e->dirichlet}, {"lambda", jnum(e->dirichlet ? 0.0 : e->lambda)}};
}

std::optional<RobinEnd> robin_end_from(const json& j, const std::string& where) {
    if (j.is_null()) return std::nullopt;
    only_keys(j, {"dirichlet", "lambda"}, where);
    RobinEnd e;
    if (j.contains("dirichlet")) {
        if (!j["dirichlet"].is_boolean()) throw InvalidInput(where + ".dirichlet: expected a boolean");
        e.dirichlet = j["dirichlet"].get<bool>();
    }
    if (j.contains("lambda")) e.lambda = num(j["lambda"], where + ".lambda");
    if (e.dirichlet) e.lambda = 0.0;
    if (!e.dirichlet && std::isinf(e.lambda)) e = RobinEnd{true, 0.0};
    return e;
}

const char* layout_name(AbvLayout l) {
    switch (l) {
        case AbvLayout::Full: return "full";
        case AbvLayout::LeftOnly: return "left";
        case AbvLayout::RightOnly: return "right";
    }
    return "full";
}

json bc_to_json(const BoundaryCondition& bc) {
    json j;
    j["kind"] = to_string(kind_of(bc));
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, MatrixPair>) {
                j["A"] = mat_to_json(c.A);
                j["B"] = mat_to_json(c.B);
            } else if constexpr (std::is_same_v<T, SMatrix>) {
                j["S"] = mat_to_json(c.S);
            } else if constexpr (std::is_same_v<T, HalfMatrix>) {
                j["A"] = mat_to_json(c.A);
                j["at"] = to_string(c.at);
            } else if constexpr (std::is_same_v<T, AbvUnitary>) {
                j["U"] = mat_to_json(c.U);
                j["tau"] = jnum(c.tau);
                j["layout"] = layout_name(c.layout);
            } else if constexpr (std::is_same_v<T, Robin>) {
                j["left"] = robin_end_json(c.left);
                j["right"] = robin_end_json(c.right);
            } else if constexpr (std::is_same_v<T, QuasiPeriodic> || std::is_same_v<T, MomentumPhase>) {
                j["vartheta"] = jnum(c.vartheta);
            } else {
                j["alpha"] = jnum(c.alpha);
                j["vartheta"] = jnum(c.vartheta);
                j["mu0"] = jnum(c.mu0);
            }
        },
        bc);
    return j;
}

BoundaryCondition bc_from_json(const json& j, const Interval& iv) {
    const std::string w = "bc";
    if (!j.is_object()) throw InvalidInput("bc: expected an object");
    if (j.contains("preset")) {
        only_keys(j, {"preset"}, w);
        const auto name = str(j["preset"], "bc.preset");
        if (!iv.bounded()) throw InvalidInput("bc.preset: named presets need a bounded interval");
        for (auto& p : named_presets(iv.b - iv.a))
            if (p.name == name) return p.bc;
        throw InvalidInput("bc.preset: unknown preset \"" + name + "\"");
    }
    const auto kind_s = str(field(j, "kind", w), "bc.kind");
    const auto kind = bc_kind_from_string(kind_s);
    if (!kind) throw InvalidInput("bc.kind: unknown kind \"" + kind_s + "\"");
    switch (*kind) {
        case BcKind::MatrixPair:
            only_keys(j, {"kind", "A", "B"}, w);
            return MatrixPair{mat_from_json(field(j, "A", w), "bc.A"), mat_from_json(field(j, "B", w), "bc.B")};
        case BcKind::SMatrix:
            only_keys(j, {"kind", "S"}, w);
            return SMatrix{mat_from_json(field(j, "S", w), "bc.S")};
        case BcKind::HalfMatrix: {
            only_keys(j, {"kind", "A", "at"}, w);
            const auto at = j.contains("at") ? str(j["at"], "bc.at") : std::string("left");
            if (at != "left" && at != "right") throw InvalidInput("bc.at: expected \"left\" or \"right\"");
            return HalfMatrix{mat_from_json(field(j, "A", w), "bc.A"), at == "left" ? Side::Left : Side::Right};
        }
        case BcKind::AbvUnitary: {
            only_keys(j, {"kind", "U", "tau", "layout"}, w);
            AbvUnitary u{mat_from_json(field(j, "U", w), "bc.U"), 1.0, AbvLayout::Full};
            if (j.contains("tau")) u.tau = num(j["tau"], "bc.tau");
            if (!(u.tau > 0) || std::isinf(u.tau)) throw InvalidInput("bc.tau: must be positive and finite");
            const auto l = j.contains("layout") ? str(j["layout"], "bc.layout") : std::string("full");
            if (l == "full") u.layout = AbvLayout::Full;
            else if (l == "left") u.layout = AbvLayout::LeftOnly;
            else if (l == "right") u.layout = AbvLayout::RightOnly;
            else throw InvalidInput("bc.layout: expected full, left or right");
            return u;
        }
        case BcKind::Robin:
            only_keys(j, {"kind", "left", "right"}, w);
            return Robin{robin_end_from(j.value("left", json()), "bc.left"),
                         robin_end_from(j.value("right", json()), "bc.right")};
        case BcKind::QuasiPeriodic:
            only_keys(j, {"kind", "vartheta"}, w);
            return QuasiPeriodic{num(field(j, "vartheta", w), "bc.vartheta")};
        case BcKind::MomentumPhase:
            only_keys(j, {"kind", "vartheta"}, w);
            return MomentumPhase{num(field(j, "vartheta", w), "bc.vartheta")};
        case BcKind::SingularAsymptotic: {
            only_keys(j, {"kind", "alpha", "vartheta", "mu0"}, w);
            SingularAsymptotic s;
            if (j.contains("alpha")) s.alpha = num(j["alpha"], "bc.alpha");
            if (j.contains("vartheta")) s.vartheta = num(j["vartheta"], "bc.vartheta");
            if (j.contains("mu0")) s.mu0 = num(j["mu0"], "bc.mu0");
            return s;
        }
    }
    throw InvalidInput("bc: unhandled kind");
}

// ---------- expression ----------

const std::set<std::string> kCoefficientKinds{"zero", "constant", "power", "harmonic", "inverse_square", "table"};

CoefficientSpec coef_from_json(const json& j, const std::string& w, const std::string& base) {
    CoefficientSpec c;
    c.kind = str(field(j, "kind", w), w + ".kind");
    if (!kCoefficientKinds.count(c.kind)) throw InvalidInput(w + ".kind: unknown potential kind \"" + c.kind + "\"");
    if (c.kind == "zero" || c.kind == "harmonic") {
        only_keys(j, {"kind"}, w);
    } else if (c.kind == "constant") {
        only_keys(j, {"kind", "c"}, w);
        c.c = num(field(j, "c", w), w + ".c");
    } else if (c.kind == "power") {
        only_keys(j, {"kind", "c", "p"}, w);
        c.c = num(field(j, "c", w), w + ".c");
        c.p = num(field(j, "p", w), w + ".p");
    } else if (c.kind == "inverse_square") {
        only_keys(j, {"kind", "alpha"}, w);
        c.alpha = num(field(j, "alpha", w), w + ".alpha");
    } else {
        only_keys(j, {"kind", "path"}, w);
        c.path = str(field(j, "path", w), w + ".path");
        const auto full = std::filesystem::path(base) / c.path;
        if (!std::filesystem::exists(c.path) && !std::filesystem::exists(full))
            throw InvalidInput(w + ".path: table file not found: " + c.path);
    }
    return c;
}

json coef_to_json(const CoefficientSpec& c) {
    json j{{"kind", c.kind}};
    if (c.kind == "constant") j["c"] = jnum(c.c);
    if (c.kind == "power") {
        j["c"] = jnum(c.c);
        j["p"] = jnum(c.p);
    }
    if (c.kind == "inverse_square") j["alpha"] = jnum(c.alpha);
    if (c.kind == "table") j["path"] = c.path;
    return j;
}

Coefficient build_coefficient(const CoefficientSpec& c, const std::string& base) {
    if (c.kind == "zero") return Coefficient::zero();
    if (c.kind == "constant") return Coefficient::constant(c.c);
    if (c.kind == "power") return Coefficient::power(c.c, c.p);
    if (c.kind == "harmonic") return Coefficient::harmonic();
    if (c.kind == "inverse_square") return Coefficient::inverse_square(c.alpha);
    if (c.kind == "table") {
        std::filesystem::path p = c.path;
        if (!std::filesystem::exists(p)) p = std::filesystem::path(base) / c.path;
        std::ifstream in(p);
        if (!in) throw InvalidInput("cannot open table " + c.path);
        std::vector<double> xs, ys;
        std::string line;
        while (std::getline(in, line)) {
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            for (char& ch : line)
                if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
            std::istringstream ls(line);
            double x, y;
            if (ls >> x >> y) {
                xs.push_back(x);
                ys.push_back(y);
            }
        }
        return Coefficient::tabulated(std::move(xs), std::move(ys));
    }
    throw InvalidInput("unknown potential kind \"" + c.kind + "\"");
}

json expr_to_json(const ExpressionSpec& e) {
    json j{{"kind", e.kind}};
    if (e.kind == "custom_even") {
        j["order"] = e.order;
        json t = json::array();
        for (const auto& term : e.terms) t.push_back({{"k", term.k}, {"f", coef_to_json(term.f)}});
        j["terms"] = t;
    } else {
        j["potential"] = coef_to_json(e.potential);
    }
    return j;
}

ExpressionSpec expr_from_json(const json& j, const std::string& base) {
    const std::string w = "expression";
    ExpressionSpec e;
    e.kind = str(field(j, "kind", w), "expression.kind");
    if (e.kind == "momentum" || e.kind == "schrodinger") {
        only_keys(j, {"kind", "potential"}, w);
        if (j.contains("potential")) e.potential = coef_from_json(j["potential"], "expression.potential", base);
    } else if (e.kind == "custom_even") {
        only_keys(j, {"kind", "order", "terms"}, w);
        const auto& t = field(j, "terms", w);
        if (!t.is_array() || t.empty()) throw InvalidInput("expression.terms: expected a non-empty array");
        int kmax = 0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            const std::string tw = "expression.terms[" + std::to_string(i) + "]";
            only_keys(t[i], {"k", "f"}, tw);
            EvenSpec s{integer(field(t[i], "k", tw), tw + ".k"), coef_from_json(field(t[i], "f", tw), tw + ".f", base)};
            if (s.k < 0) throw InvalidInput(tw + ".k: must be non-negative");
            kmax = std::max(kmax, s.k);
            e.terms.push_back(std::move(s));
        }
        std::stable_sort(e.terms.begin(), e.terms.end(), [](const EvenSpec& a, const EvenSpec& b) { return a.k > b.k; });
        e.order = j.contains("order") ? integer(j["order"], "expression.order") : 2 * kmax;
        if (e.order != 2 * kmax || kmax == 0) throw InvalidInput("expression.order: must equal 2 max k > 0");
    } else {
        throw InvalidInput("expression.kind: expected momentum, schrodinger or custom_even");
    }
    return e;
}

// ---------- reports ----------

json endpoint_json(const EndpointInfo& e) {
    json j{{"side", to_string(e.side)},
           {"point", jnum(e.point)},
           {"kind", to_string(e.kind)},
           {"count_plus", e.count_plus},
           {"count_minus", e.count_minus},
           {"method", e.method},
           {"inconclusive", e.inconclusive}};
    j["fastpath"] = e.fastpath ? json(e.fastpath->criterion) : json(nullptr);
    return j;
}

json deficiency_json(const DeficiencyReport& r) {
    return json{{"left", endpoint_json(r.left)},   {"right", endpoint_json(r.right)}, {"kappa", jnum(r.kappa)},
                {"anchor", jnum(r.anchor)},        {"order", r.order},               {"m_plus", r.m_plus},
                {"m_minus", r.m_minus},            {"inconclusive", r.inconclusive}, {"notes", r.notes}};
}

json integration_json(const IntegrationOptions& o) {
    return json{{"rtol", o.rtol}, {"atol", o.atol}, {"max_steps", o.max_steps}};
}

struct Context {
    const ProblemConfig& cfg;
    const RunOptions& opt;
    DifferentialExpression expr;
    json report;
    std::string csv;
    int exit_code = Ok;
};

DeficiencyOptions deficiency_options(const ProblemConfig& cfg) {
    DeficiencyOptions o;
    o.kappa = cfg.kappa;
    return o;
}

SpectralOptions spectral_options(const RunOptions& opt) {
    SpectralOptions o;
    if (opt.max_x) o.max_x = *opt.max_x;
    return o;
}

const BoundaryCondition& require_bc(const ProblemConfig& cfg, const std::string& command) {
    if (!cfg.bc) throw InvalidInput("command \"" + command + "\" needs a bc");
    return *cfg.bc;
}

// A boundary condition must not constrain a limit-point end and SingularAsymptotic needs a singular left end.
void check_bc_against_ends(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc) {
    const bool reg_l = classify_endpoint(expr, iv, Side::Left) == EndpointKind::Regular;
    const bool reg_r = classify_endpoint(expr, iv, Side::Right) == EndpointKind::Regular;
    const auto k = kind_of(bc);
    const bool two_sided = k == BcKind::MatrixPair || k == BcKind::SMatrix || k == BcKind::QuasiPeriodic ||
                           k == BcKind::MomentumPhase ||
                           (k == BcKind::AbvUnitary && std::get<AbvUnitary>(bc).layout == AbvLayout::Full);
    if (two_sided && !(reg_l && reg_r)) throw InvalidInput("bc couples both ends but an end is singular");
    if (k == BcKind::SingularAsymptotic && reg_l) throw InvalidInput("SingularAsymptotic at a regular end");
    if (k == BcKind::Robin) {
        const auto& r = std::get<Robin>(bc);
        if (r.left.has_value() != reg_l || r.right.has_value() != reg_r)
            throw InvalidInput("Robin conditions must be given exactly at the regular ends");
    }
}

void cmd_classify(Context& c) {
    json ends = json::array();
    c.csv = "side,point,kind\n";
    for (Side s : {Side::Left, Side::Right}) {
        const auto k = classify_endpoint(c.expr, c.cfg.interval, s);
        ends.push_back({{"side", to_string(s)}, {"point", jnum(c.cfg.interval.endpoint(s))}, {"kind", to_string(k)}});
        c.csv += std::string(to_string(s)) + "," + fmt(c.cfg.interval.endpoint(s)) + "," + to_string(k) + "\n";
    }
    c.report["endpoints"] = ends;
}

DeficiencyReport run_deficiency(Context& c) {
    const auto r = deficiency_indices(c.expr, c.cfg.interval, deficiency_options(c.cfg));
    c.report["deficiency"] = deficiency_json(r);
    c.csv = "side,point,kind,count_plus,count_minus,method\n";
    for (const auto* e : {&r.left, &r.right})
        c.csv += std::string(to_string(e->side)) + "," + fmt(e->point) + "," + to_string(e->kind) + "," +
                 std::to_string(e->count_plus) + "," + std::to_string(e->count_minus) + "," + e->method + "\n";
    if (r.inconclusive) c.exit_code = NonConvergence;
    else if (!r.equal_indices()) c.exit_code = NoSelfAdjointExtension;
    return r;
}

void cmd_deficiency(Context& c) { run_deficiency(c); }

std::string end_type(const EndpointInfo& e, int n) {
    if (e.kind == EndpointKind::Regular) return "regular";
    if (e.count_plus == n && e.count_minus == n) return "limit_circle";
    if (2 * e.count_plus == n && 2 * e.count_minus == n) return "limit_point";
    return "mixed";
}

void cmd_extensions(Context& c) {
    const auto r = run_deficiency(c);
    const int n = c.expr.order();
    json ext;
    if (c.exit_code == NonConvergence) {
        c.report["extensions"] = nullptr;
        return;
    }
    if (!r.equal_indices()) {
        ext["exists"] = false;
        ext["reason"] = "deficiency indices differ (m_plus = " + std::to_string(r.m_plus) +
                        ", m_minus = " + std::to_string(r.m_minus) + ")";
        c.report["extensions"] = ext;
        c.csv = "name,kind,valid\n";
        return;
    }
    const int m = r.m_plus;
    ext["exists"] = true;
    ext["m"] = m;
    ext["family"] = "U(" + std::to_string(m) + ")";
    ext["parameters"] = m * m;
    ext["essentially_self_adjoint"] = m == 0;
    const std::string lt = end_type(r.left, n), rt = end_type(r.right, n);
    ext["end_types"] = {{"left", lt}, {"right", rt}};

    std::vector<std::string> kinds;
    if (lt == "regular" && rt == "regular") {
        if (n == 1) kinds = {"momentum_phase"};
        else kinds = {"matrix_pair", "s_matrix", "abv_unitary", "quasi_periodic"};
        if (n == 2) kinds.push_back("robin");
    } else if (lt == "regular" || rt == "regular") {
        kinds = {"half_matrix", "abv_unitary"};
        if (n == 2) kinds.push_back("robin");
    } else if (m == 0 && n == 2) {
        kinds = {"robin"};
    }
    if (lt == "limit_circle" && rt != "limit_circle" && c.expr.is_schrodinger() &&
        c.expr.potential().power_coefficient(-2.0) < 0)
        kinds.push_back("singular_asymptotic");
    ext["parametrizations"] = kinds;
    if (kinds.empty() && m > 0)
        ext["note"] = "no closed-form parametrization for these end types; conditions go through boundary-form limits";

    json presets = json::array();
    c.csv = "name,kind,valid\n";
    auto add = [&](const std::string& name, const BoundaryCondition& bc) {
        const auto v = validate(bc, n);
        presets.push_back({{"name", name}, {"bc", bc_to_json(bc)}, {"valid", v.ok}});
        c.csv += name + "," + to_string(kind_of(bc)) + "," + (v.ok ? "true" : "false") + "\n";
    };
    const auto& iv = c.cfg.interval;
    if (lt == "regular" && rt == "regular" && n == 2)
        for (const auto& p : named_presets(iv.b - iv.a)) add(p.name, p.bc);
    if (lt == "regular" && rt == "regular" && n == 1) {
        add("periodic", MomentumPhase{0.0});
        add("antiperiodic", MomentumPhase{std::numbers::pi});
    }
    if (n == 2 && m == 1 && (lt == "regular") != (rt == "regular")) {
        const std::optional<RobinEnd> d = RobinEnd{true, 0.0}, nn = RobinEnd{false, 0.0};
        add("dirichlet", lt == "regular" ? Robin{d, std::nullopt} : Robin{std::nullopt, d});
        add("neumann", lt == "regular" ? Robin{nn, std::nullopt} : Robin{std::nullopt, nn});
    }
    if (m == 0 && n == 2) add("unique", Robin{});
    ext["presets"] = presets;

    if (c.cfg.bc) {
        const auto& bc = *c.cfg.bc;
        check_bc_against_ends(c.expr, iv, bc);
        const auto v = validate(bc, n);
        json b{{"valid", v.ok}, {"violated", v.violated}, {"residual", jnum(v.residual)}};
        json conv = json::object();
        if (v.ok && kind_of(bc) != BcKind::SingularAsymptotic) {
            for (BcKind k : {BcKind::MatrixPair, BcKind::SMatrix, BcKind::HalfMatrix, BcKind::AbvUnitary,
                             BcKind::Robin}) {
                if (k == kind_of(bc)) continue;
                try {
                    conv[to_string(k)] = bc_to_json(convert(bc, k, n, c.cfg.tau));
                } catch (const Error&) {
                    // not representable in that form
                }
            }
        }
        b["conversions"] = conv;
        ext["bc"] = b;
        if (!v.ok) c.exit_code = ConfigError;
    }
    c.report["extensions"] = ext;
}

void cmd_spectrum(Context& c) {
    const auto& bc = require_bc(c.cfg, "spectrum");
    if (!c.cfg.spectrum) throw InvalidInput("command \"spectrum\" needs a spectrum section");
    check_bc_against_ends(c.expr, c.cfg.interval, bc);
    const auto& s = *c.cfg.spectrum;
    const auto sp = eigenvalues(c.expr, c.cfg.interval, bc, {s.e_min, s.e_max}, s.max_count, spectral_options(c.opt));
    json ev = json::array(), res = json::array();
    for (double e : sp.eigenvalues) ev.push_back(jnum(e));
    for (double r : sp.residuals) res.push_back(jnum(r));
    c.report["spectrum"] = {{"eigenvalues", ev},
                            {"residuals", res},
                            {"multiplicity", sp.multiplicity},
                            {"method", sp.method},
                            {"window", {{"e_min", jnum(s.e_min)}, {"e_max", jnum(s.e_max)}}},
                            {"max_count", s.max_count}};
    c.csv = "index,eigenvalue,residual\n";
    for (std::size_t i = 0; i < sp.eigenvalues.size(); ++i)
        c.csv += std::to_string(i) + "," + fmt(sp.eigenvalues[i]) + "," + fmt(sp.residuals[i]) + "\n";
}

Segment interior_segment(const Interval& iv) {
    if (iv.bounded()) {
        const double l = iv.b - iv.a;
        return {iv.a + 0.1 * l, iv.b - 0.1 * l};
    }
    if (std::isfinite(iv.a)) return {iv.a + 0.25, iv.a + 2.25};
    if (std::isfinite(iv.b)) return {iv.b - 2.25, iv.b - 0.25};
    return {-1.1, 0.9};
}

// Truncation for natural-domain trajectories: stop after a forbidden-region action of 80 or distance 64.
double far_point(const DifferentialExpression& expr, double x0, double dir, cplx lambda) {
    double x = x0, action = 0.0;
    const double h = 1.0 / 64.0;
    while (std::abs(x - x0) < 64.0 && action < 80.0) {
        action += h * std::sqrt(cplx(expr.potential()(x + 0.5 * dir * h)) - lambda).real();
        x += dir * h;
    }
    return x;
}

void cmd_verify(Context& c) {
    const auto& iv = c.cfg.interval;
    std::mt19937_64 rng(c.opt.seed);
    json v;
    bool all_passed = true, converged = true;
    c.csv = "check,side,x,re,im\n";

    // Lagrange identity on an interior segment.
    {
        const auto seg = interior_segment(iv);
        double worst = 0.0;
        bool ok = true;
        const int pairs = 10;
        for (int k = 0; k < pairs; ++k) {
            const auto a = random_smooth(rng), b = random_smooth(rng);
            const auto r = lagrange_check(c.expr, a.function(), b.function(), seg);
            worst = std::max(worst, r.discrepancy / (1.0 + std::abs(r.omega_boundary)));
            ok = ok && r.passed;
        }
        v["lagrange"] = {{"pairs", pairs},
                         {"segment", {jnum(seg.alpha), jnum(seg.beta)}},
                         {"max_relative_discrepancy", jnum(worst)},
                         {"tolerance", 1e-8},
                         {"passed", ok}};
        all_passed = all_passed && ok;
    }

    // Symmetry of the boundary condition.
    if (c.cfg.bc) {
        check_bc_against_ends(c.expr, iv, *c.cfg.bc);
        const auto p = symmetry_probe(c.expr, iv, *c.cfg.bc, 20, static_cast<unsigned>(rng()));
        const bool ok = p.max_delta <= 1e-8 && p.max_lagrange_discrepancy <= 1e-8;
        v["symmetry"] = {{"samples", p.samples},
                         {"max_delta", jnum(p.max_delta)},
                         {"max_lagrange_discrepancy", jnum(p.max_lagrange_discrepancy)},
                         {"tolerance", 1e-8},
                         {"passed", ok}};
        all_passed = all_passed && ok;
    } else {
        v["symmetry"] = nullptr;
    }

    // Boundary form at infinite ends along natural-domain trajectories.
    json limits = json::array();
    if (c.expr.is_schrodinger()) {
        const cplx lambda = I * c.cfg.kappa;
        std::normal_distribution<double> g;
        for (Side s : {Side::Left, Side::Right}) {
            if (iv.finite(s)) continue;
            const double dir = s == Side::Right ? 1.0 : -1.0;
            if (!weyl_fastpath(c.expr, dir * kInf)) {
                limits.push_back({{"side", to_string(s)}, {"skipped", "no limit-point certificate at this end"}});
                continue;
            }
            const double x0 = iv.anchor();
            const double xf = c.opt.max_x ? x0 + dir * std::abs(*c.opt.max_x) : far_point(c.expr, x0, dir, lambda);
            const cplx c1(g(rng), g(rng)), c2(g(rng), g(rng));
            const double xc = x0 + dir;
            const Forcing chi = [=](double x) {
                return c1 * std::exp(-(x - xc) * (x - xc)) + c2 / (1.0 + (x - x0) * (x - x0));
            };
            const auto t = natural_domain_trajectory(c.expr, lambda, chi, x0, xf);
            LimitOptions lo;
            lo.windows = 9;
            const double start = std::max(0.25, std::abs(x0) + 0.25);
            lo.ratio = std::pow(std::abs(xf) / start, 1.0 / (lo.windows - 1));
            lo.anchor = dir * start;
            const double endpoint = dir * kInf;
            BoundaryLimit r;
            if (std::abs(xf) > start && lo.ratio > 1.0) r = boundary_form_limit(c.expr, t, endpoint, lo);
            const bool ok = r.converged && std::abs(r.value) <= 1e-6;
            limits.push_back({{"side", to_string(s)},
                              {"lambda", {jnum(lambda.real()), jnum(lambda.imag())}},
                              {"x_far", jnum(xf)},
                              {"converged", r.converged},
                              {"value", {jnum(r.value.real()), jnum(r.value.imag())}},
                              {"tolerance", 1e-6},
                              {"passed", ok}});
            for (std::size_t i = 0; i < r.points.size(); ++i)
                c.csv += std::string("boundary_form,") + to_string(s) + "," + fmt(r.points[i]) + "," +
                         fmt(r.values[i].real()) + "," + fmt(r.values[i].imag()) + "\n";
            converged = converged && r.converged;
            all_passed = all_passed && ok;
        }
    }
    v["boundary_limits"] = limits;
    v["passed"] = all_passed;
    c.report["verify"] = v;
    if (!converged) c.exit_code = NonConvergence;
}

}  // namespace

// ---------- public ----------

ProblemConfig parse_config(const std::string& text, const std::string& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
    }
    only_keys(j, {"expression", "interval", "kappa", "tau", "bc", "spectrum"}, "config");
    ProblemConfig c;
    c.base_dir = base_dir;
    c.expression = expr_from_json(field(j, "expression", "config"), base_dir);
    const auto& iv = field(j, "interval", "config");
    only_keys(iv, {"a", "b"}, "interval");
    c.interval = {num(field(iv, "a", "interval"), "interval.a"), num(field(iv, "b", "interval"), "interval.b")};
    if (!c.interval.valid()) throw InvalidInput("interval: need a < b");
    if (j.contains("kappa")) c.kappa = num(j["kappa"], "kappa");
    if (!(c.kappa > 0) || std::isinf(c.kappa)) throw InvalidInput("kappa: must be positive and finite");
    if (j.contains("tau")) c.tau = num(j["tau"], "tau");
    if (!(c.tau > 0) || std::isinf(c.tau)) throw InvalidInput("tau: must be positive and finite");
    if (j.contains("bc") && !j["bc"].is_null()) c.bc = bc_from_json(j["bc"], c.interval);
    if (j.contains("spectrum") && !j["spectrum"].is_null()) {
        const auto& s = j["spectrum"];
        only_keys(s, {"e_min", "e_max", "max_count"}, "spectrum");
        SpectrumSpec sp;
        sp.e_min = num(field(s, "e_min", "spectrum"), "spectrum.e_min");
        sp.e_max = num(field(s, "e_max", "spectrum"), "spectrum.e_max");
        if (s.contains("max_count")) sp.max_count = integer(s["max_count"], "spectrum.max_count");
        if (!(sp.e_min < sp.e_max) || !std::isfinite(sp.e_min) || !std::isfinite(sp.e_max))
            throw InvalidInput("spectrum: need finite e_min < e_max");
        if (sp.max_count < 1) throw InvalidInput("spectrum.max_count: must be positive");
        c.spectrum = sp;
    }
    return c;
}

ProblemConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    auto dir = std::filesystem::path(path).parent_path().string();
    return parse_config(ss.str(), dir.empty() ? "." : dir);
}

namespace {
json config_json(const ProblemConfig& cfg) {
    json j;
    j["expression"] = expr_to_json(cfg.expression);
    j["interval"] = {{"a", jnum(cfg.interval.a)}, {"b", jnum(cfg.interval.b)}};
    j["kappa"] = jnum(cfg.kappa);
    j["tau"] = jnum(cfg.tau);
    j["bc"] = cfg.bc ? bc_to_json(*cfg.bc) : json(nullptr);
    if (cfg.spectrum)
        j["spectrum"] = {{"e_min", jnum(cfg.spectrum->e_min)},
                         {"e_max", jnum(cfg.spectrum->e_max)},
                         {"max_count", cfg.spectrum->max_count}};
    else
        j["spectrum"] = nullptr;
    return j;
}
}  // namespace

std::string serialize_config(const ProblemConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

std::string serialize_bc(const BoundaryCondition& bc) { return bc_to_json(bc).dump(2) + "\n"; }

DifferentialExpression build_expression(const ProblemConfig& cfg) {
    const auto& e = cfg.expression;
    if (e.kind == "schrodinger") return DifferentialExpression::schrodinger(build_coefficient(e.potential, cfg.base_dir));
    if (e.kind == "momentum") {
        auto v = build_coefficient(e.potential, cfg.base_dir);
        if (v.is_zero()) return DifferentialExpression::momentum();
        return DifferentialExpression::canonical({{0, std::move(v)}}, {{1, Coefficient::constant(1.0)}});
    }
    std::vector<EvenTerm> terms;
    for (const auto& t : e.terms) terms.push_back({t.k, build_coefficient(t.f, cfg.base_dir)});
    return DifferentialExpression::canonical(std::move(terms), {});
}

const std::vector<std::string>& commands() {
    static const std::vector<std::string> c{"classify", "deficiency", "extensions", "spectrum", "verify"};
    return c;
}

RunResult run(const ProblemConfig& cfg, const std::string& command, const RunOptions& opt) {
    json report;
    report["command"] = command;
    report["config"] = config_json(cfg);
    report["kappa"] = jnum(cfg.kappa);
    report["tau"] = jnum(cfg.tau);
    report["bc"] = cfg.bc ? bc_to_json(*cfg.bc) : json(nullptr);
    report["seed"] = opt.seed;
    const auto so = spectral_options(opt);
    const auto dop = deficiency_options(cfg);
    report["tolerances"] = {{"deficiency_integration", integration_json(dop.integration)},
                            {"spectral_integration", integration_json(so.integration)},
                            {"e_tol", so.e_tol},
                            {"scan_points", so.scan_points},
                            {"decay_action", so.decay_action},
                            {"max_x", opt.max_x ? jnum(*opt.max_x) : json(nullptr)}};

    RunResult out;
    auto fail = [&](int code, const char* type, const std::string& msg) {
        report["error"] = {{"type", type}, {"message", msg}};
        out.exit_code = code;
        out.csv.clear();
    };
    try {
        if (std::find(commands().begin(), commands().end(), command) == commands().end())
            throw InvalidInput("unknown command \"" + command + "\"");
        Context c{cfg, opt, build_expression(cfg), json::object(), {}, Ok};
        if (command == "classify") cmd_classify(c);
        else if (command == "deficiency") cmd_deficiency(c);
        else if (command == "extensions") cmd_extensions(c);
        else if (command == "spectrum") cmd_spectrum(c);
        else cmd_verify(c);
        for (auto& [k, v] : c.report.items()) report[k] = v;
        out.exit_code = c.exit_code;
        out.csv = std::move(c.csv);
    } catch (const InvalidInput& e) {
        fail(ConfigError, "invalid_input", e.what());
    } catch (const Unsupported& e) {
        fail(ConfigError, "unsupported", e.what());
    } catch (const NumericalFailure& e) {
        fail(NonConvergence, "numerical_failure", e.what());
    }
    report["exit_code"] = out.exit_code;
    out.report = report.dump(2) + "\n";
    return out;
}

}  // namespace selfadj::cli
