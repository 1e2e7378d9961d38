#include "selfadj/expr.hpp"

#include <algorithm>
#include <cmath>

#include "selfadj/errors.hpp"

namespace selfadj {

namespace {

const cplx I{0.0, 1.0};

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int j = 1; j <= k; ++j) r = r * (n - k + j) / j;
    return r;
}

double sign_pow(int k) { return (k % 2 == 0) ? 1.0 : -1.0; }

const Coefficient& zero_coefficient() {
    static const Coefficient z;
    return z;
}

void add_term(RawExpression& raw, int j, cplx w, const Coefficient& f, int d) {
    if (w == cplx{}) return;
    if (static_cast<int>(raw.coefficients.size()) <= j) raw.coefficients.resize(j + 1);
    raw.coefficients[j].terms.push_back({w, f, d});
}

}  // namespace

cplx RawCoefficient::operator()(double x) const {
    cplx s{};
    for (const auto& t : terms) s += t.weight * t.f.derivative(t.derivative, x);
    return s;
}

cplx RawExpression::apply(std::span<const cplx> derivatives, double x) const {
    if (static_cast<int>(derivatives.size()) < order() + 1) throw InvalidInput("not enough derivatives supplied");
    cplx s{};
    for (std::size_t j = 0; j < coefficients.size(); ++j) s += coefficients[j](x) * derivatives[j];
    return s;
}

DifferentialExpression DifferentialExpression::canonical(std::vector<EvenTerm> even, std::vector<OddTerm> odd,
                                                         std::vector<double> probes) {
    if (even.empty() && odd.empty()) throw InvalidInput("expression has no terms");
    DifferentialExpression e;
    for (auto& t : even) {
        if (t.k < 0) throw InvalidInput("even term index must be nonnegative");
        if (static_cast<int>(e.even_.size()) <= t.k) e.even_.resize(t.k + 1);
        e.even_[t.k] += t.f;
    }
    for (auto& t : odd) {
        if (t.k < 1) throw InvalidInput("odd term index must be >= 1");
        if (static_cast<int>(e.odd_.size()) <= t.k) e.odd_.resize(t.k + 1);
        e.odd_[t.k] += t.f;
    }
    for (std::size_t k = 0; k < e.even_.size(); ++k)
        if (!e.even_[k].is_zero()) e.order_ = std::max(e.order_, static_cast<int>(2 * k));
    for (std::size_t k = 1; k < e.odd_.size(); ++k)
        if (!e.odd_[k].is_zero()) e.order_ = std::max(e.order_, static_cast<int>(2 * k - 1));
    if (e.order_ == 0) throw InvalidInput("order 0 expression is not a differential operator");
    e.even_.resize(e.order_ / 2 + 1);
    e.odd_.resize((e.order_ + 1) / 2 + 1);

    if (probes.empty()) probes = {0.37, 0.71, 1.0, 1.53, 1.97};
    const Coefficient& lead = e.leading();
    for (double x : probes) {
        const double v = lead(x);
        if (v == 0.0 || !std::isfinite(v))
            throw InvalidInput("leading coefficient vanishes or is not finite at probe x=" + std::to_string(x));
    }
    return e;
}

DifferentialExpression DifferentialExpression::momentum() {
    return canonical({}, {{1, Coefficient::constant(1.0)}});
}

DifferentialExpression DifferentialExpression::schrodinger(Coefficient potential) {
    return canonical({{1, Coefficient::constant(1.0)}, {0, std::move(potential)}}, {});
}

bool DifferentialExpression::has_odd_terms() const {
    return std::any_of(odd_.begin(), odd_.end(), [](const Coefficient& c) { return !c.is_zero(); });
}

bool DifferentialExpression::has_even_terms() const {
    return std::any_of(even_.begin(), even_.end(), [](const Coefficient& c) { return !c.is_zero(); });
}

const Coefficient& DifferentialExpression::even(int k) const {
    if (k < 0 || k >= static_cast<int>(even_.size())) return zero_coefficient();
    return even_[k];
}

const Coefficient& DifferentialExpression::odd(int k) const {
    if (k < 1 || k >= static_cast<int>(odd_.size())) return zero_coefficient();
    return odd_[k];
}

const Coefficient& DifferentialExpression::leading() const {
    return (order_ % 2 == 0) ? even(order_ / 2) : odd((order_ + 1) / 2);
}

bool DifferentialExpression::is_schrodinger() const {
    if (order_ != 2 || has_odd_terms()) return false;
    const auto& f2 = even(1);
    return f2.kind() == CoefficientKind::Constant && f2.power_coefficient(0.0) == 1.0;
}

bool DifferentialExpression::is_momentum() const {
    if (order_ != 1) return false;
    return odd(1).kind() == CoefficientKind::Constant;
}

bool DifferentialExpression::has_quasi_derivatives() const {
    if (order_ == 1) return true;
    return order_ % 2 == 0 && !has_odd_terms();
}

RawExpression DifferentialExpression::raw() const {
    RawExpression r;
    r.coefficients.resize(order_ + 1);
    for (int k = 0; k < static_cast<int>(even_.size()); ++k) {
        const auto& f = even_[k];
        if (f.is_zero()) continue;
        for (int j = 0; j <= k; ++j) add_term(r, k + j, sign_pow(k) * binom(k, j), f, k - j);
    }
    for (int k = 1; k < static_cast<int>(odd_.size()); ++k) {
        const auto& f = odd_[k];
        if (f.is_zero()) continue;
        const cplx w = 0.5 * I * sign_pow(k);
        for (int j = 0; j <= k - 1; ++j) add_term(r, k + j, w * binom(k - 1, j), f, k - 1 - j);
        for (int j = 0; j <= k; ++j) add_term(r, k - 1 + j, w * binom(k, j), f, k - j);
    }
    return r;
}

RawExpression adjoint_general(const RawExpression& raw) {
    RawExpression h;
    h.coefficients.resize(raw.coefficients.size());
    for (int j = 0; j < static_cast<int>(raw.coefficients.size()); ++j) {
        for (const auto& t : raw.coefficients[j].terms) {
            if (t.f.table() && t.derivative + j > 3)
                throw InvalidInput("tabulated coefficient lacks derivative data of order " +
                                   std::to_string(t.derivative + j));
            for (int m = 0; m <= j; ++m)
                add_term(h, m, std::conj(t.weight) * sign_pow(j) * binom(j, m), t.f, t.derivative + j - m);
        }
    }
    return h;
}

bool raw_equal(const RawExpression& a, const RawExpression& b, std::span<const double> probes, double rtol) {
    const std::size_t n = std::max(a.coefficients.size(), b.coefficients.size());
    for (double x : probes) {
        std::vector<cplx> va(n), vb(n);
        double scale = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j < a.coefficients.size()) va[j] = a.coefficients[j](x);
            if (j < b.coefficients.size()) vb[j] = b.coefficients[j](x);
            scale = std::max({scale, std::abs(va[j]), std::abs(vb[j])});
        }
        for (std::size_t j = 0; j < n; ++j)
            if (std::abs(va[j] - vb[j]) > rtol * std::max(scale, 1e-300)) return false;
    }
    return true;
}

bool is_self_adjoint(const RawExpression& raw, std::span<const double> probes, double rtol) {
    return raw_equal(adjoint_general(raw), raw, probes, rtol);
}

namespace {

/// w * f_{2k}^{(cd)} * psi^{(pd)}
struct QTerm {
    double w;
    int k;
    int cd;
    int pd;
};

/// Symbolic quasi-derivatives psi^[N], ..., psi^[n-1] as sums of QTerms.
std::vector<std::vector<QTerm>> quasi_terms(int n) {
    const int N = n / 2;
    std::vector<std::vector<QTerm>> s(N);
    s[0] = {{1.0, N, 0, N}};
    for (int k = 1; k < N; ++k) {
        auto& cur = s[k];
        cur.push_back({1.0, N - k, 0, N - k});
        for (const auto& t : s[k - 1]) {
            cur.push_back({-t.w, t.k, t.cd + 1, t.pd});
            cur.push_back({-t.w, t.k, t.cd, t.pd + 1});
        }
    }
    return s;
}

void require_stackable(const DifferentialExpression& expr) {
    if (!expr.has_quasi_derivatives())
        throw Unsupported("quasi-derivatives are defined only for n=1 and purely even expressions");
}

}  // namespace

DerivativeStack quasi_stack(const DifferentialExpression& expr, std::span<const cplx> ordinary, double x) {
    require_stackable(expr);
    const int n = expr.order();
    if (static_cast<int>(ordinary.size()) < n) throw InvalidInput("quasi_stack needs derivatives up to order n-1");
    DerivativeStack st{x, std::vector<cplx>(n)};
    if (n == 1) {
        st.values[0] = ordinary[0];
        return st;
    }
    const int N = n / 2;
    for (int k = 0; k < N; ++k) st.values[k] = ordinary[k];
    const auto terms = quasi_terms(n);
    for (int k = 0; k < N; ++k) {
        cplx v{};
        for (const auto& t : terms[k]) v += t.w * expr.even(t.k).derivative(t.cd, x) * ordinary[t.pd];
        st.values[N + k] = v;
    }
    return st;
}

std::vector<cplx> ordinary_from_stack(const DifferentialExpression& expr, const DerivativeStack& stack) {
    require_stackable(expr);
    const int n = expr.order();
    if (static_cast<int>(stack.size()) != n) throw InvalidInput("stack length differs from expression order");
    std::vector<cplx> d(n);
    if (n == 1) {
        d[0] = stack[0];
        return d;
    }
    const int N = n / 2;
    for (int k = 0; k < N; ++k) d[k] = stack[k];
    const auto terms = quasi_terms(n);
    for (int k = 0; k < N; ++k) {
        // psi^[N+k] is linear in psi^(N+k) with factor (-1)^k f_n; everything else is already known.
        cplx rest{};
        double lead = 0.0;
        for (const auto& t : terms[k]) {
            const double c = t.w * expr.even(t.k).derivative(t.cd, stack.x);
            if (t.pd == N + k)
                lead += c;
            else
                rest += c * d[t.pd];
        }
        d[N + k] = (stack[N + k] - rest) / lead;
    }
    return d;
}

cplx local_form(const DifferentialExpression& expr, const DerivativeStack& chi, const DerivativeStack& psi) {
    require_stackable(expr);
    const int n = expr.order();
    if (static_cast<int>(chi.size()) != n || static_cast<int>(psi.size()) != n)
        throw InvalidInput("stack lengths do not match the expression order");
    if (chi.x != psi.x) throw InvalidInput("stacks are taken at different points");
    if (n == 1) return -I * std::conj(chi[0]) * expr.odd(1)(chi.x) * psi[0];
    const int N = n / 2;
    cplx s{};
    for (int k = 0; k < N; ++k)
        s += std::conj(chi[k]) * psi[n - k - 1] - std::conj(chi[n - k - 1]) * psi[k];
    return -s;
}

Coefficient radial_reduce(const Coefficient& v, int l) {
    if (l < 0) throw InvalidInput("angular momentum must be nonnegative");
    if (l == 0) return v;
    return v + Coefficient::power(static_cast<double>(l) * (l + 1), -2.0);
}

}  // namespace selfadj
