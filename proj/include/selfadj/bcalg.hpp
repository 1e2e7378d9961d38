#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"
#include "selfadj/ode.hpp"

namespace selfadj {

/// E_lm = delta_{l,n+1-m} * sign(l - (n+1)/2); anti-Hermitian, E^2 = -I.
MatrixXc epsilon_matrix(int n);

struct Diagonalizer {
    MatrixXc T;      // unitary
    MatrixXc Sigma;  // diag(I, -I)
};

/// T^+ Sigma T = (1/i) E.
Diagonalizer diagonalizer(int n);

/// Boundary columns Psi_tau(x) = (psi, tau psi^[1], ..., tau^{n-1} psi^[n-1]).
VectorXc tau_column(const DerivativeStack& s, double tau);

/// n/2-columns Psi_{tau,+}(x) and Psi_{tau,-}(x) as linear maps of the stack.
MatrixXc abv_plus_map(int n, double tau);
MatrixXc abv_minus_map(int n, double tau);

struct AbvColumns {
    VectorXc psi_plus_minus;  // (Psi_+(b); Psi_-(a))
    VectorXc psi_minus_plus;  // (Psi_-(b); Psi_+(a))
    double tau = 1.0;

    /// 2 i kappa (|psi_plus_minus|^2 - |psi_minus_plus|^2), kappa = tau^{1-n} / 4.
    [[nodiscard]] cplx delta() const;
};

AbvColumns abv_columns(const DerivativeStack& a, const DerivativeStack& b, double tau);

/// Psi^+(b) E Psi(b) - Psi^+(a) E Psi(a), the boundary-form difference for even n.
cplx boundary_form_difference(const DerivativeStack& a, const DerivativeStack& b);

// Parametrizations.
struct MatrixPair {
    MatrixXc A, B;  // B^+ E Psi(b) = A^+ E Psi(a)
};
struct SMatrix {
    MatrixXc S;  // Psi(b) = S Psi(a)
};
struct HalfMatrix {
    MatrixXc A;  // n x n/2, A^+ E Psi(at) = 0
    Side at = Side::Left;
};
enum class AbvLayout { Full, LeftOnly, RightOnly };
struct AbvUnitary {
    MatrixXc U;
    double tau = 1.0;
    AbvLayout layout = AbvLayout::Full;
};
/// Robin value: nullopt = end not constrained (singular limit-point end); infinite = Dirichlet.
struct RobinEnd {
    bool dirichlet = false;
    double lambda = 0.0;
};
struct Robin {
    std::optional<RobinEnd> left, right;  // psi^[1] = lambda psi at each constrained end; none for two limit-point ends
};
struct QuasiPeriodic {
    double vartheta = 0.0;  // Psi(b) = e^{i vartheta} Psi(a)
};
struct MomentumPhase {
    double vartheta = 0.0;  // psi(b) = e^{i vartheta} psi(a)
};
/// psi ~ c [(mu0 x)^{1/2 + i kappa} + e^{i vartheta} (mu0 x)^{1/2 - i kappa}] at x -> 0 for V = -alpha/x^2.
struct SingularAsymptotic {
    double alpha = 1.0;
    double vartheta = 0.0;
    double mu0 = 1.0;

    [[nodiscard]] double varkappa() const;
};

using BoundaryCondition = std::variant<MatrixPair, SMatrix, HalfMatrix, AbvUnitary, Robin, QuasiPeriodic,
                                       MomentumPhase, SingularAsymptotic>;

enum class BcKind { MatrixPair, SMatrix, HalfMatrix, AbvUnitary, Robin, QuasiPeriodic, MomentumPhase, SingularAsymptotic };

BcKind kind_of(const BoundaryCondition& bc);
const char* to_string(BcKind k);
std::optional<BcKind> bc_kind_from_string(const std::string& s);

struct ValidationReport {
    bool ok = true;
    std::string violated;  // name of the failed condition
    double residual = 0.0;
};

ValidationReport validate(const BoundaryCondition& bc, int n);

/// Linear form of a condition on finite boundary stacks: Ca Psi(a) + Cb Psi(b) = 0.
struct LinearConditions {
    MatrixXc Ca, Cb;
    [[nodiscard]] Eigen::Index rows() const { return Ca.rows(); }
};

/// tau only matters for AbvUnitary (which carries its own). SingularAsymptotic has no linear form.
/// check=false skips validation (used to probe deliberately invalid conditions).
LinearConditions linear_conditions(const BoundaryCondition& bc, int n, bool check = true);

VectorXc residual(const BoundaryCondition& bc, const DerivativeStack& a, const DerivativeStack& b);

/// Target tau is used when converting to AbvUnitary.
BoundaryCondition convert(const BoundaryCondition& from, BcKind target, int n, double tau = 1.0);

/// Do two conditions define the same boundary subspace? Random stacks (seeded) in the kernel of each must
/// satisfy the other, and random generic stacks must agree on being rejected.
bool residual_equivalent(const BoundaryCondition& x, const BoundaryCondition& y, int n, unsigned seed = 1,
                         int samples = 50, double tol = 1e-9);

/// Named U(2) presets for the free Hamiltonian on [0, l] (n=2).
struct NamedCondition {
    std::string name;
    BoundaryCondition bc;
};
std::vector<NamedCondition> named_presets(double l);

struct SingularFit {
    cplx c_plus, c_minus;
    double residual = 0.0;       // rms misfit relative to the rms of the data
    double residual_half = 0.0;  // same with x_fit halved
};

/// Least squares against u_pm = (mu0 x)^{1/2 +- i kappa} on log-spaced samples in [x_min, x_fit].
SingularFit singular_fit(const SolutionTrajectory& traj, double alpha, double mu0, double x_fit,
                         int samples = 200);

/// Raw fit on given samples (x, psi).
SingularFit singular_fit(std::span<const double> x, std::span<const cplx> psi, double alpha, double mu0);

/// vartheta = theta - 2 arctan(sin theta / (e^{kappa l} + cos theta)).
double vartheta_map(double theta, double kappa, double l);

}  // namespace selfadj
