#pragma once

#include <complex>
#include <span>
#include <vector>

#include "selfadj/coefficient.hpp"

namespace selfadj {

using cplx = std::complex<double>;

/// (-d/dx)^k f (d/dx)^k, order 2k.
struct EvenTerm {
    int k = 0;
    Coefficient f;
};

/// (i/2)[(d/dx)^{k-1} f (-d/dx)^k + (-d/dx)^k f (d/dx)^{k-1}], order 2k-1, k >= 1.
struct OddTerm {
    int k = 1;
    Coefficient f;
};

/// One summand w * f^{(d)}(x) of a raw coefficient.
struct RawTerm {
    cplx weight;
    Coefficient f;
    int derivative = 0;
};

/// Coefficient g_j of (d/dx)^j in the expanded form sum_j g_j (d/dx)^j.
struct RawCoefficient {
    std::vector<RawTerm> terms;

    [[nodiscard]] cplx operator()(double x) const;
};

/// Expression in the expanded form sum_j g_j(x) (d/dx)^j.
struct RawExpression {
    std::vector<RawCoefficient> coefficients;

    [[nodiscard]] int order() const { return static_cast<int>(coefficients.size()) - 1; }
    /// Applies to ordinary derivatives (psi, psi', ..., psi^(n)).
    [[nodiscard]] cplx apply(std::span<const cplx> derivatives, double x) const;
};

/// Formally self-adjoint expression in canonical even/odd form.
class DifferentialExpression {
public:
    /// Probe points for the leading-coefficient check default to a spread inside (0, 2].
    static DifferentialExpression canonical(std::vector<EvenTerm> even, std::vector<OddTerm> odd,
                                            std::vector<double> probes = {});
    static DifferentialExpression momentum();
    static DifferentialExpression schrodinger(Coefficient potential);

    [[nodiscard]] int order() const { return order_; }
    [[nodiscard]] bool has_odd_terms() const;
    [[nodiscard]] bool has_even_terms() const;
    /// f_{2k}; zero if absent.
    [[nodiscard]] const Coefficient& even(int k) const;
    /// f_{2k-1}; zero if absent.
    [[nodiscard]] const Coefficient& odd(int k) const;
    [[nodiscard]] const Coefficient& leading() const;
    [[nodiscard]] const Coefficient& potential() const { return even(0); }
    /// True for -d^2/dx^2 + V.
    [[nodiscard]] bool is_schrodinger() const;
    /// True for -i d/dx (+ f0) with f1 constant.
    [[nodiscard]] bool is_momentum() const;
    /// Supported for n = 1 (f1, f0) and purely even n.
    [[nodiscard]] bool has_quasi_derivatives() const;

    [[nodiscard]] RawExpression raw() const;

private:
    int order_ = 0;
    std::vector<Coefficient> even_;  // index k -> f_{2k}
    std::vector<Coefficient> odd_;   // index k -> f_{2k-1}, index 0 unused
};

/// Lagrange adjoint of sum_j g_j (d/dx)^j for real coefficient functions and complex weights.
RawExpression adjoint_general(const RawExpression& raw);

/// Pointwise equality of two raw expressions (relative tolerance).
bool raw_equal(const RawExpression& a, const RawExpression& b, std::span<const double> probes, double rtol = 1e-10);

/// Self-adjointness check at probe points.
bool is_self_adjoint(const RawExpression& raw, std::span<const double> probes, double rtol = 1e-10);

/// Quasi-derivatives (psi, psi^[1], ..., psi^[n-1]) at a point.
struct DerivativeStack {
    double x = 0.0;
    std::vector<cplx> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    const cplx& operator[](std::size_t i) const { return values[i]; }
};

/// Builds the quasi-derivative stack from ordinary derivatives psi, ..., psi^(n-1).
DerivativeStack quasi_stack(const DifferentialExpression& expr, std::span<const cplx> ordinary, double x);

/// Ordinary derivatives psi, ..., psi^(n-1) recovered from a quasi-derivative stack.
std::vector<cplx> ordinary_from_stack(const DifferentialExpression& expr, const DerivativeStack& stack);

/// Local sesquilinear form [chi, psi] at the common point of the stacks.
cplx local_form(const DifferentialExpression& expr, const DerivativeStack& chi, const DerivativeStack& psi);

/// V(r) + l(l+1)/r^2.
Coefficient radial_reduce(const Coefficient& v, int l);

}  // namespace selfadj
