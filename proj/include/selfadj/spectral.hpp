#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfadj/bcalg.hpp"
#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"
#include "selfadj/ode.hpp"

namespace selfadj {

struct EnergyWindow {
    double e_min = 0.0;
    double e_max = 100.0;
};

struct SpectralOptions {
    int scan_points = 400;
    /// Relative tolerance on E for the refinement.
    double e_tol = 1e-12;
    IntegrationOptions integration{1e-11, 1e-14, 20'000'000};
    /// Truncation of an infinite end; 0 picks it from the decay of the potential (capped at 2^14).
    double max_x = 0.0;
    /// Forbidden-region action between the matching point and the truncation point.
    double decay_action = 20.0;
    bool with_eigenfunctions = false;
};

struct Spectrum {
    std::vector<double> eigenvalues;  // sorted, distinct
    std::vector<double> residuals;    // smallest singular value of the mismatch map, or normalized Wronskian
    std::vector<int> multiplicity;
    std::vector<SolutionTrajectory> eigenfunctions;  // one per eigenvalue when requested
    EnergyWindow window;
    std::string method;  // "determinant" or "matching"
};

Spectrum eigenvalues(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                     const EnergyWindow& window, int max_count = 1000, const SpectralOptions& opt = {});

/// (vartheta + 2 pi k) / l for k_min <= k <= k_max.
Spectrum momentum_spectrum(double l, double vartheta, int k_min, int k_max);

/// L2-normalized eigenfunction at an eigenvalue E; throws InvalidInput when E is not one.
SolutionTrajectory eigenfunction(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                                 double e, const SpectralOptions& opt = {});

/// Transfer matrix of the stack system from a to b (columns: solutions with unit initial stacks at a).
MatrixXc transfer_matrix(const DifferentialExpression& expr, cplx lambda, double a, double b,
                         const IntegrationOptions& opt = {});

/// Mismatch value at E: smallest singular value of the row-normalized map (regular ends),
/// or the normalized Wronskian of the two end solutions (singular ends).
double mismatch(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc, double e,
                const SpectralOptions& opt = {});

/// Start data u_+ + e^{i vartheta} u_- (times e^{-i vartheta/2}, so real) for -d^2 - alpha/x^2 at x0.
DerivativeStack singular_start(const SingularAsymptotic& bc, double e, double x0);

}  // namespace selfadj
