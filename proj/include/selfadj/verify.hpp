#pragma once

#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "selfadj/bcalg.hpp"
#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"
#include "selfadj/ode.hpp"

namespace selfadj {

/// Ordinary derivatives psi, psi', ..., psi^(upto) at x.
using TestFunction = std::function<std::vector<cplx>(double x, int upto)>;

/// psi(x) = sum_j poly[j] (x - shift)^j + sum_k a_k exp(b_k x); derivatives are exact.
struct SmoothFunction {
    std::vector<cplx> poly;
    double shift = 0.0;
    std::vector<std::pair<cplx, cplx>> exps;  // (a_k, b_k)

    [[nodiscard]] std::vector<cplx> derivatives(double x, int upto) const;
    [[nodiscard]] TestFunction function() const;
};

/// Random complex polynomial (given degree) plus a few exponentials with |Re b| <= 1.
SmoothFunction random_smooth(std::mt19937_64& rng, int degree = 4, int exponentials = 2);

struct Segment {
    double alpha = 0.0;
    double beta = 1.0;
};

struct FormReport {
    cplx omega_quadrature;  // int conj(chi) f psi - psi conj(f chi)
    cplx omega_boundary;    // [chi, psi](beta) - [chi, psi](alpha)
    double discrepancy = 0.0;
    double quadrature_error = 0.0;
    Segment segment;
    bool passed = false;  // discrepancy <= tol * (1 + |omega_boundary|)
};

FormReport lagrange_check(const DifferentialExpression& expr, const TestFunction& chi, const TestFunction& psi,
                          Segment seg, double tol = 1e-8);

struct LimitOptions {
    int windows = 8;
    double ratio = 2.0;  // geometric spacing of the evaluation points
    /// First evaluation point; NaN picks 1 (toward +inf), -1 (toward -inf) or endpoint + 1 (finite endpoint).
    double anchor = std::numeric_limits<double>::quiet_NaN();
    double rtol = 1e-3;  // last three values must agree to rtol times the largest value seen
};

/// Limit of [psi, psi](x) toward an endpoint; converged = false is the divergence flag.
struct BoundaryLimit {
    bool converged = false;
    cplx value;
    std::vector<double> points;
    std::vector<cplx> values;
};

BoundaryLimit boundary_form_limit(const DifferentialExpression& expr,
                                  const std::function<DerivativeStack(double)>& psi, double endpoint,
                                  const LimitOptions& opt = {});

/// Trajectory version; evaluation points outside the trajectory are dropped (at least 6 must remain).
BoundaryLimit boundary_form_limit(const DifferentialExpression& expr, const SolutionTrajectory& psi, double endpoint,
                                  const LimitOptions& opt = {});

/// Solution of expr psi - lambda psi = chi between x_lo and x_far (either order), built from the Green function
/// with the solution decaying toward x_far; for Im lambda != 0 and chi in L2 it approximates the
/// square-integrable solution.
SolutionTrajectory natural_domain_trajectory(const DifferentialExpression& expr, cplx lambda, const Forcing& chi,
                                             double x_lo, double x_far, const IntegrationOptions& opt = {});

struct ProbeReport {
    double max_delta = 0.0;              // max |Delta*| over unit-norm boundary samples
    double max_lagrange_discrepancy = 0.0;  // blended functions, both ends regular only
    int samples = 0;
};

/// Random boundary data in the kernel of the condition (zero at limit-point ends), Delta* from boundary forms.
/// Validation is skipped so that invalid conditions can be probed.
ProbeReport symmetry_probe(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                           int sample_count, unsigned seed = 1);

/// Polynomial of degree 2n-1 matching ordinary derivatives 0..n-1 at a and b.
SmoothFunction hermite_blend(double a, const std::vector<cplx>& da, double b, const std::vector<cplx>& db);

}  // namespace selfadj
