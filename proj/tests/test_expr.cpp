#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "selfadj/errors.hpp"
#include "selfadj/expr.hpp"

using namespace selfadj;
using std::numbers::pi;

namespace {

std::vector<double> probes(std::uint64_t seed, int count, double lo = 0.2, double hi = 3.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> p(count);
    for (auto& x : p) x = u(rng);
    return p;
}

RawExpression raw_single(int order, int j, cplx w, Coefficient f) {
    RawExpression r;
    r.coefficients.resize(order + 1);
    r.coefficients[j].terms.push_back({w, std::move(f), 0});
    return r;
}

}  // namespace

TEST_CASE("coefficient kinds and derivatives") {
    CHECK(Coefficient::zero().kind() == CoefficientKind::Zero);
    CHECK(Coefficient::constant(2.5).kind() == CoefficientKind::Constant);
    CHECK(Coefficient::harmonic().kind() == CoefficientKind::Harmonic);
    CHECK(Coefficient::inverse_square(1.0).kind() == CoefficientKind::InverseSquare);
    CHECK(Coefficient::power(3.0, 1.5).kind() == CoefficientKind::Power);
    const auto v = Coefficient::power(3.0, 1.5);
    CHECK(v.derivative(2, 4.0) == doctest::Approx(3.0 * 1.5 * 0.5 * std::pow(4.0, -0.5)));
    CHECK(Coefficient::harmonic().derivative(3, 2.0) == 0.0);
    CHECK(Coefficient::inverse_square(2.0)(2.0) == doctest::Approx(-0.5));
}

TEST_CASE("spline reproduces a cubic's low derivatives in the interior") {
    std::vector<double> xs, ys;
    for (int i = 0; i <= 400; ++i) {
        xs.push_back(i * 0.01);
        ys.push_back(std::sin(xs.back()));
    }
    const auto c = Coefficient::tabulated(xs, ys);
    CHECK(c.kind() == CoefficientKind::Tabulated);
    CHECK(c(1.234) == doctest::Approx(std::sin(1.234)).epsilon(1e-8));
    CHECK(c.derivative(1, 1.234) == doctest::Approx(std::cos(1.234)).epsilon(1e-5));
    CHECK(c.derivative(2, 1.234) == doctest::Approx(-std::sin(1.234)).epsilon(1e-3));
    CHECK_THROWS_AS((void)c.derivative(4, 1.0), InvalidInput);
}

TEST_CASE("build_canonical") {
    SUBCASE("momentum") {
        const auto p = DifferentialExpression::canonical({}, {{1, Coefficient::constant(1.0)}});
        CHECK(p.order() == 1);
        CHECK(p.is_momentum());
        const auto raw = p.raw();
        CHECK(raw.coefficients[1](0.7) == cplx(0.0, -1.0));
        CHECK(std::abs(raw.coefficients[0](0.7)) == 0.0);
    }
    SUBCASE("hamiltonian") {
        const auto h = DifferentialExpression::canonical(
            {{1, Coefficient::constant(1.0)}, {0, Coefficient::harmonic()}}, {});
        CHECK(h.order() == 2);
        CHECK(h.is_schrodinger());
        const auto raw = h.raw();
        CHECK(raw.coefficients[2](1.3) == cplx(-1.0, 0.0));
        CHECK(raw.coefficients[1](1.3) == cplx(0.0, 0.0));
        CHECK(raw.coefficients[0](1.3).real() == doctest::Approx(1.69));
    }
    SUBCASE("degenerate inputs") {
        CHECK_THROWS_AS(DifferentialExpression::canonical({{0, Coefficient::zero()}}, {}), InvalidInput);
        CHECK_THROWS_AS(DifferentialExpression::canonical({}, {}), InvalidInput);
        CHECK_THROWS_AS(DifferentialExpression::canonical({{1, Coefficient::power(1.0, 1.0)}}, {}, {0.0, 1.0}),
                        InvalidInput);
    }
}

TEST_CASE("Lagrange adjoint") {
    const auto pr = probes(7, 32);
    SUBCASE("d/dx is not symmetric") {
        const auto d = raw_single(1, 1, 1.0, Coefficient::constant(1.0));
        const auto a = adjoint_general(d);
        CHECK(a.coefficients[1](1.0) == cplx(-1.0, 0.0));
        CHECK_FALSE(is_self_adjoint(d, pr));
    }
    SUBCASE("-i d/dx is symmetric") {
        const auto p = raw_single(1, 1, cplx(0, -1), Coefficient::constant(1.0));
        CHECK(adjoint_general(p).coefficients[1](1.0) == cplx(0, -1));
        CHECK(is_self_adjoint(p, pr));
    }
    SUBCASE("-d2/dx2 + x2") {
        const auto h = DifferentialExpression::schrodinger(Coefficient::harmonic()).raw();
        CHECK(raw_equal(adjoint_general(h), h, pr, 1e-14));
    }
    SUBCASE("every canonical term is self-adjoint and the adjoint is an involution") {
        const auto e = DifferentialExpression::canonical(
            {{3, Coefficient::power(1.0, 2.0) + Coefficient::constant(2.0)},
             {2, Coefficient::power(0.3, 3.0)},
             {1, Coefficient::power(-1.2, 0.5)},
             {0, Coefficient::inverse_square(0.7)}},
            {{1, Coefficient::power(0.4, 1.5)}, {2, Coefficient::power(0.9, 2.0)}, {3, Coefficient::constant(0.2)}});
        const auto raw = e.raw();
        CHECK(raw.order() == 6);
        CHECK(is_self_adjoint(raw, pr));
        CHECK(raw_equal(adjoint_general(adjoint_general(raw)), raw, pr, 1e-12));
    }
    SUBCASE("tabulated coefficient without high derivatives") {
        std::vector<double> xs{0, 1, 2, 3, 4}, ys{0, 1, 4, 9, 16};
        const auto e = DifferentialExpression::canonical({{2, Coefficient::tabulated(xs, ys)}}, {}, {1.5});
        CHECK_THROWS_AS(adjoint_general(e.raw()), InvalidInput);
    }
}

TEST_CASE("raw form applies the expression") {
    // (-d/dx)(x^2)(d/dx) psi with psi = x^3: -(x^2 * 3x^2)' = -12 x^3
    const auto e = DifferentialExpression::canonical({{1, Coefficient::power(1.0, 2.0)}}, {}, {1.0});
    const double x = 1.7;
    std::vector<cplx> d{x * x * x, 3 * x * x, 6 * x};
    CHECK(e.raw().apply(d, x).real() == doctest::Approx(-12 * x * x * x));
    // odd term k=2 with f=1 is i d^3/dx^3: check on psi = e^{2x}
    const auto o = DifferentialExpression::canonical({}, {{2, Coefficient::constant(1.0)}});
    std::vector<cplx> d3{1.0, 2.0, 4.0, 8.0};
    const cplx v = o.raw().apply(d3, 0.0);
    CHECK(v.real() == doctest::Approx(0.0));
    CHECK(v.imag() == doctest::Approx(8.0));
}

TEST_CASE("quasi_stack") {
    const auto h0 = DifferentialExpression::schrodinger(Coefficient::zero());
    const double x = pi / 4;
    std::vector<cplx> d{std::sin(x), std::cos(x)};
    auto s = quasi_stack(h0, d, x);
    CHECK(s.size() == 2);
    CHECK(s[0].real() == doctest::Approx(std::sin(x)));
    CHECK(s[1].real() == doctest::Approx(std::cos(x)));

    const auto b = DifferentialExpression::canonical({{2, Coefficient::constant(1.0)}}, {});
    std::vector<cplx> d4{1.0, 3.0, 6.0, 6.0};
    s = quasi_stack(b, d4, 1.0);
    CHECK(s[0].real() == doctest::Approx(1));
    CHECK(s[1].real() == doctest::Approx(3));
    CHECK(s[2].real() == doctest::Approx(6));
    CHECK(s[3].real() == doctest::Approx(-6));

    std::vector<double> xs{0, 1, 2, 3}, ys{1, 0.5, 2, 1};
    const auto ht = DifferentialExpression::schrodinger(Coefficient::tabulated(xs, ys));
    std::vector<cplx> dc{2.5, 0.0};
    s = quasi_stack(ht, dc, 1.5);
    CHECK(s[0] == cplx(2.5));
    CHECK(s[1] == cplx(0.0));

    const auto odd3 = DifferentialExpression::canonical({}, {{2, Coefficient::constant(1.0)}});
    CHECK_THROWS_AS(quasi_stack(odd3, d4, 1.0), Unsupported);
}

TEST_CASE("quasi_stack round trip with variable coefficients") {
    const auto e = DifferentialExpression::canonical(
        {{2, Coefficient::power(1.0, 2.0) + Coefficient::constant(1.0)}, {1, Coefficient::power(0.5, 1.0)}}, {});
    std::vector<cplx> d{cplx(1, 2), cplx(-0.5, 1), cplx(3, 0), cplx(0.25, -4)};
    const auto st = quasi_stack(e, d, 1.3);
    const auto back = ordinary_from_stack(e, st);
    for (int k = 0; k < 4; ++k) {
        CHECK(back[k].real() == doctest::Approx(d[k].real()));
        CHECK(back[k].imag() == doctest::Approx(d[k].imag()));
    }
}

TEST_CASE("local_form") {
    const auto p = DifferentialExpression::momentum();
    const DerivativeStack one{0.3, {1.0}};
    CHECK(local_form(p, one, one) == cplx(0, -1));

    const auto h0 = DifferentialExpression::schrodinger(Coefficient::zero());
    for (double x : {0.0, 1.1, -3.7}) {
        const cplx e = std::exp(cplx(0, x));
        const DerivativeStack s{x, {e, cplx(0, 1) * e}};
        const cplx f = local_form(h0, s, s);
        CHECK(f.real() == doctest::Approx(0.0));
        CHECK(f.imag() == doctest::Approx(-2.0));
    }
    const DerivativeStack r{0.5, {0.7, -1.9}};
    CHECK(local_form(h0, r, r) == cplx(0.0));

    const DerivativeStack short_stack{0.5, {1.0}};
    CHECK_THROWS_AS(local_form(h0, short_stack, r), InvalidInput);
}

TEST_CASE("local_form properties on random stacks") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    const auto h = DifferentialExpression::schrodinger(Coefficient::harmonic());
    const auto b = DifferentialExpression::canonical({{2, Coefficient::constant(1.0)}, {0, Coefficient::harmonic()}}, {});
    for (int t = 0; t < 100; ++t) {
        for (const auto* e : {&h, &b}) {
            const int n = e->order();
            DerivativeStack a{0.4, {}}, c{0.4, {}};
            for (int k = 0; k < n; ++k) {
                a.values.emplace_back(g(rng), g(rng));
                c.values.emplace_back(g(rng), g(rng));
            }
            const cplx ac = local_form(*e, a, c), ca = local_form(*e, c, a);
            CHECK(std::abs(std::conj(ac) + ca) <= 1e-14);
            CHECK(std::abs(local_form(*e, a, a).real()) <= 1e-14);
            if (n == 2) {
                const cplx ref = -(std::conj(a[0]) * c[1] - std::conj(a[1]) * c[0]);
                CHECK(ac == ref);
            }
        }
    }
}

TEST_CASE("radial_reduce") {
    const auto v1 = radial_reduce(Coefficient::zero(), 1);
    CHECK(v1(2.0) == doctest::Approx(0.5));
    CHECK(v1.power_coefficient(-2.0) == 2.0);
    const auto v0 = radial_reduce(Coefficient::inverse_square(0.3), 0);
    CHECK(v0.kind() == CoefficientKind::InverseSquare);
    CHECK(v0.power_coefficient(-2.0) == -0.3);
    const auto v2 = radial_reduce(Coefficient::harmonic(), 2);
    CHECK(v2(2.0) == doctest::Approx(4.0 + 1.5));
    CHECK(v2.power_coefficient(-2.0) == 6.0);
    // inverse-square parts merge into one term
    const auto m = radial_reduce(Coefficient::inverse_square(1.0), 1);
    CHECK(m.powers().size() == 1);
    CHECK(m.power_coefficient(-2.0) == 1.0);
}
