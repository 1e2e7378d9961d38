#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "selfadj/errors.hpp"
#include "selfadj/spectral.hpp"

using namespace selfadj;
using std::numbers::pi;

namespace {

const auto H0 = DifferentialExpression::schrodinger(Coefficient::zero());
const auto HO = DifferentialExpression::schrodinger(Coefficient::harmonic());

BoundaryCondition preset(const std::string& name, double l = 1.0) {
    for (auto& p : named_presets(l))
        if (p.name == name) return p.bc;
    throw InvalidInput(name);
}

cplx inner(const SolutionTrajectory& a, const SolutionTrajectory& b, double lo, double hi) {
    // composite Simpson on a fine grid
    const int m = 4000;
    const double h = (hi - lo) / m;
    cplx s = 0.0;
    for (int i = 0; i <= m; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * std::conj(a.value(x)) * b.value(x);
    }
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("free particle on [0,1]") {
    SUBCASE("Dirichlet") {
        const auto sp = eigenvalues(H0, {0, 1}, preset("dirichlet"), {-5, 260});
        REQUIRE(sp.eigenvalues.size() == 5);
        for (int k = 1; k <= 5; ++k) CHECK(std::abs(sp.eigenvalues[k - 1] - k * k * pi * pi) <= 1e-6);
        for (double r : sp.residuals) CHECK(r <= 1e-8);
        CHECK(sp.method == "determinant");
    }
    SUBCASE("Neumann includes 0") {
        const auto sp = eigenvalues(H0, {0, 1}, preset("neumann"), {-5, 170});
        REQUIRE(sp.eigenvalues.size() == 5);
        for (int k = 0; k < 5; ++k) CHECK(std::abs(sp.eigenvalues[k] - k * k * pi * pi) <= 1e-6);
    }
    SUBCASE("quasi-periodic") {
        for (double vt : {0.0, pi / 3, pi, 4.0}) {
            std::vector<double> want;
            for (int k = -6; k <= 6; ++k) want.push_back(std::pow(2 * pi * k + vt, 2));
            std::sort(want.begin(), want.end());
            want.erase(std::unique(want.begin(), want.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
                       want.end());
            const auto sp = eigenvalues(H0, {0, 1}, QuasiPeriodic{vt}, {-1, want[4] + 1});
            INFO(vt);
            REQUIRE(sp.eigenvalues.size() == 5);
            for (int k = 0; k < 5; ++k) CHECK(std::abs(sp.eigenvalues[k] - want[k]) <= 1e-6);
        }
        const auto per = eigenvalues(H0, {0, 1}, QuasiPeriodic{0.0}, {-1, 50});
        REQUIRE(per.eigenvalues.size() == 2);
        CHECK(per.multiplicity[0] == 1);
        CHECK(per.multiplicity[1] == 2);
    }
    SUBCASE("matrix pair and S-matrix agree") {
        const auto s = preset("exotic", 1.0);
        const auto mp = convert(s, BcKind::MatrixPair, 2);
        const auto a = eigenvalues(H0, {0, 1}, s, {-30, 300});
        const auto b = eigenvalues(H0, {0, 1}, mp, {-30, 300});
        const auto c = eigenvalues(H0, {0, 1}, preset("exotic_abv", 1.0), {-30, 300});
        REQUIRE(a.eigenvalues.size() == b.eigenvalues.size());
        REQUIRE(a.eigenvalues.size() == c.eigenvalues.size());
        CHECK(a.eigenvalues.size() >= 5);
        for (std::size_t i = 0; i < a.eigenvalues.size(); ++i) {
            CHECK(std::abs(a.eigenvalues[i] - b.eigenvalues[i]) <= 1e-8);
            CHECK(std::abs(a.eigenvalues[i] - c.eigenvalues[i]) <= 1e-6);
        }
    }
    SUBCASE("empty window") {
        const auto sp = eigenvalues(H0, {0, 1}, preset("dirichlet"), {1, 9});
        CHECK(sp.eigenvalues.empty());
    }
    SUBCASE("max_count") {
        const auto sp = eigenvalues(H0, {0, 1}, preset("dirichlet"), {0, 260}, 2);
        CHECK(sp.eigenvalues.size() == 2);
    }
}

TEST_CASE("momentum") {
    const auto p = DifferentialExpression::momentum();
    for (double vt : {0.0, pi / 2, pi}) {
        const auto sp = eigenvalues(p, {0, 1}, MomentumPhase{vt}, {vt - 10 * pi - 1, vt + 10 * pi + 1});
        REQUIRE(sp.eigenvalues.size() == 11);
        const auto cf = momentum_spectrum(1.0, vt, -5, 5);
        for (int k = 0; k < 11; ++k) CHECK(std::abs(sp.eigenvalues[k] - cf.eigenvalues[k]) <= 1e-8);
    }
    const auto a = momentum_spectrum(1.0, 0.0, -1, 1);
    CHECK(a.eigenvalues == std::vector<double>{-2 * pi, 0.0, 2 * pi});
    const auto b = momentum_spectrum(2.0, pi, 0, 3);
    for (std::size_t i = 1; i < b.eigenvalues.size(); ++i)
        CHECK(b.eigenvalues[i] - b.eigenvalues[i - 1] == doctest::Approx(pi));
    CHECK_THROWS_AS(momentum_spectrum(0.0, 0.0, 0, 1), InvalidInput);

    const auto f = eigenfunction(p, {0, 1}, MomentumPhase{0.0}, 2 * pi);
    for (double x : {0.0, 0.3, 0.8}) {
        const cplx ratio = f.value(x) / std::exp(cplx(0, 2 * pi * x));
        CHECK(std::abs(ratio - f.value(0.0)) <= 1e-7);
        CHECK(std::abs(f.value(x)) == doctest::Approx(1.0).epsilon(1e-7));
    }
}

TEST_CASE("harmonic oscillator") {
    const Robin dir{RobinEnd{true, 0.0}, std::nullopt}, neu{RobinEnd{false, 0.0}, std::nullopt};
    const auto d = eigenvalues(HO, {0, kInf}, dir, {0, 12.5});
    REQUIRE(d.eigenvalues.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(d.eigenvalues[k] - (3 + 4 * k)) <= 1e-6);
    CHECK(d.method == "matching");
    const auto n = eigenvalues(HO, {0, kInf}, neu, {0, 10.5});
    REQUIRE(n.eigenvalues.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(n.eigenvalues[k] - (1 + 4 * k)) <= 1e-6);
    const auto line = eigenvalues(HO, {-kInf, kInf}, Robin{}, {0, 8});
    REQUIRE(line.eigenvalues.size() == 4);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(line.eigenvalues[k] - (1 + 2 * k)) <= 1e-6);

    SUBCASE("Robin sweep is continuous") {
        double prev = -kInf;
        SpectralOptions o;
        o.scan_points = 60;
        for (int i = 0; i <= 20; ++i) {
            const double lam = -1.0 + 0.1 * i;
            const auto s = eigenvalues(HO, {0, kInf}, Robin{RobinEnd{false, lam}, std::nullopt}, {-5, 6}, 1, o);
            REQUIRE(s.eigenvalues.size() == 1);
            if (i > 0) {
                CHECK(s.eigenvalues[0] > prev);
                CHECK(s.eigenvalues[0] - prev < 0.3);
            }
            prev = s.eigenvalues[0];
        }
    }
    SUBCASE("ground state") {
        const auto f = eigenfunction(HO, {0, kInf}, neu, 1.0);
        const double c = std::sqrt(2.0 / std::sqrt(pi));
        for (double x : {0.0, 0.5, 1.3, 2.5}) CHECK(std::abs(f.value(x) - c * std::exp(-x * x / 2)) <= 1e-6);
    }
    CHECK_THROWS_AS(eigenfunction(HO, {0, kInf}, neu, 2.0), InvalidInput);
}

TEST_CASE("eigenfunctions") {
    const auto f = eigenfunction(H0, {0, 1}, preset("dirichlet"), pi * pi);
    for (double x : {0.1, 0.5, 0.77}) CHECK(std::abs(f.value(x) - std::sqrt(2.0) * std::sin(pi * x)) <= 1e-7);
    CHECK(f.norm_squared() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS_AS(eigenfunction(H0, {0, 1}, preset("dirichlet"), 10.0), InvalidInput);

    SpectralOptions o;
    o.with_eigenfunctions = true;
    const auto sp = eigenvalues(H0, {0, 1}, preset("exotic"), {-30, 200}, 1000, o);
    REQUIRE(sp.eigenfunctions.size() == sp.eigenvalues.size());
    for (std::size_t i = 0; i < sp.eigenfunctions.size(); ++i)
        for (std::size_t j = i + 1; j < sp.eigenfunctions.size(); ++j)
            CHECK(std::abs(inner(sp.eigenfunctions[i], sp.eigenfunctions[j], 0, 1)) <= 1e-5);
}

TEST_CASE("fall to the center") {
    const double alpha = 1.0, nu = std::sqrt(0.75);
    const auto fc = DifferentialExpression::schrodinger(Coefficient::inverse_square(alpha));
    const SingularAsymptotic bc{alpha, 0.0, 1.0};
    const auto sp = eigenvalues(fc, {0, kInf}, bc, {-1e4, -1e-6});
    REQUIRE(sp.eigenvalues.size() >= 3);
    const double want = std::exp(-2 * pi / nu);
    for (std::size_t i = 0; i + 1 < sp.eigenvalues.size(); ++i)
        CHECK(std::abs(sp.eigenvalues[i + 1] / sp.eigenvalues[i] / want - 1.0) <= 0.01);

    const auto f = eigenfunction(fc, {0, kInf}, bc, sp.eigenvalues[0]);
    const auto fit = singular_fit(f, alpha, 1.0, 1e-2 / std::sqrt(-sp.eigenvalues[0]));
    CHECK(std::abs(std::abs(fit.c_plus) - std::abs(fit.c_minus)) <= 1e-6);
    CHECK(std::abs(fit.c_minus / fit.c_plus - 1.0) <= 1e-5);

    // start data is real and solves the equation
    const auto s = singular_start(bc, -2.0, 1e-3);
    CHECK(std::abs(s[0].imag()) <= 1e-15);
    CHECK_THROWS_AS(eigenvalues(fc, {0, kInf}, SingularAsymptotic{2.0, 0.0, 1.0}, {-1, -0.1}), InvalidInput);
    CHECK_THROWS_AS(eigenvalues(fc, {0, kInf}, Robin{RobinEnd{true, 0}, std::nullopt}, {-1, -0.1}), InvalidInput);
}

TEST_CASE("mismatched inputs") {
    CHECK_THROWS_AS(eigenvalues(H0, {0, 1}, Robin{RobinEnd{true, 0}, std::nullopt}, {0, 10}), InvalidInput);
    CHECK_THROWS_AS(eigenvalues(H0, {0, 1}, SingularAsymptotic{}, {0, 10}), InvalidInput);
    CHECK_THROWS_AS(eigenvalues(HO, {0, kInf}, preset("dirichlet"), {0, 10}), InvalidInput);
    CHECK_THROWS_AS(eigenvalues(H0, {0, 1}, preset("dirichlet"), {10, 0}), InvalidInput);
}
