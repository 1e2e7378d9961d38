#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"

namespace selfadj {

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;
using Forcing = std::function<cplx(double)>;

struct IntegrationOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    std::size_t max_steps = 20'000'000;
};

/// First-order system for the quasi-derivative stack of expr psi = lambda psi + chi.
class StackSystem {
public:
    StackSystem(const DifferentialExpression& expr, cplx lambda, Forcing chi = {});

    void operator()(double x, const VectorXc& y, VectorXc& dy) const;
    /// Homogeneous right-hand side for p stacked columns (y has n*p entries); coefficients evaluated once.
    void block(double x, const VectorXc& y, VectorXc& dy, int p) const;
    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] cplx lambda() const { return lambda_; }
    [[nodiscard]] const DifferentialExpression& expression() const { return *expr_; }
    [[nodiscard]] bool homogeneous() const { return !chi_; }

private:
    const DifferentialExpression* expr_;
    cplx lambda_;
    Forcing chi_;
    int n_;
};

/// One accepted step with its quartic-in-theta dense interpolant.
struct DenseStep {
    double x0 = 0.0;
    double h = 0.0;
    std::array<VectorXc, 5> rc;

    [[nodiscard]] double lo() const { return h > 0 ? x0 : x0 + h; }
    [[nodiscard]] double hi() const { return h > 0 ? x0 + h : x0; }
    void eval(double x, VectorXc& out) const;
    [[nodiscard]] VectorXc start() const { return rc[0]; }
    [[nodiscard]] VectorXc end() const { return rc[0] + rc[1]; }
};

/// Called after each accepted step; may rescale the state y together with its derivative k1 = f(x, y),
/// which is valid for homogeneous linear systems.
using StepObserver = std::function<void(const DenseStep&, VectorXc& y, VectorXc& k1)>;
using SystemRhs = std::function<void(double, const VectorXc&, VectorXc&)>;

/// Dormand-Prince 5(4) with dense output; integrates from x0 to x1 (either direction).
VectorXc dopri5(const SystemRhs& rhs, double x0, const VectorXc& y0, double x1, const IntegrationOptions& opt,
                const StepObserver& observer = {});

struct TrajectoryMeta {
    VectorXc initial;
    double x_initial = 0.0;
    IntegrationOptions options;
};

/// Dense solution of the stack system on a segment.
class SolutionTrajectory {
public:
    SolutionTrajectory() = default;
    SolutionTrajectory(const DifferentialExpression& expr, cplx lambda, std::vector<DenseStep> steps,
                       TrajectoryMeta meta);

    [[nodiscard]] int order() const { return n_; }
    [[nodiscard]] cplx lambda() const { return lambda_; }
    [[nodiscard]] double lo() const;
    [[nodiscard]] double hi() const;
    [[nodiscard]] std::vector<double> grid() const;
    [[nodiscard]] std::size_t step_count() const { return steps_.size(); }
    [[nodiscard]] const std::vector<DenseStep>& steps() const { return steps_; }
    [[nodiscard]] VectorXc state(double x) const;
    [[nodiscard]] DerivativeStack stack(double x) const;
    [[nodiscard]] cplx value(double x) const { return state(x)(0); }
    [[nodiscard]] const TrajectoryMeta& meta() const { return meta_; }

    /// Returns c * this.
    [[nodiscard]] SolutionTrajectory scaled(cplx c) const;
    /// Joins two trajectories on adjacent segments.
    [[nodiscard]] SolutionTrajectory spliced(const SolutionTrajectory& other) const;
    /// integral of |psi|^2 over [x0, x1] (clipped to the trajectory).
    [[nodiscard]] double norm_squared(double x0, double x1) const;
    [[nodiscard]] double norm_squared() const { return norm_squared(lo(), hi()); }

    /// CSV columns: x, then re/im of each stack entry, one row per grid point.
    void write_csv(std::ostream& os) const;

private:
    int n_ = 0;
    cplx lambda_{};
    std::vector<DenseStep> steps_;  // ascending by lo()
    TrajectoryMeta meta_;
};

/// Integrates the stack system from initial.x to x1.
SolutionTrajectory integrate(const DifferentialExpression& expr, cplx lambda, const DerivativeStack& initial, double x1,
                             const Forcing& chi = {}, const IntegrationOptions& opt = {});

/// Identity-column initial stacks at x0, integrated to x1.
std::vector<SolutionTrajectory> fundamental_system(const DifferentialExpression& expr, cplx lambda, double x0,
                                                   double x1, const IntegrationOptions& opt = {});

/// Bilinear (conjugation-free) Wronskian-type form; constant for two solutions of the same equation.
cplx wronskian(const DifferentialExpression& expr, const VectorXc& u, const VectorXc& v);

/// Particular solution of expr y - lambda y = chi for n=2 with zero data at the common start of u1, u2.
SolutionTrajectory variation_of_parameters(const DifferentialExpression& expr, const Forcing& chi,
                                           const SolutionTrajectory& u1, const SolutionTrajectory& u2);

/// Particular solution (u_R(x) int_lo^x u_L chi + u_L(x) int_x^hi u_R chi) / W(u_R, u_L) on the common segment.
SolutionTrajectory green_solution(const DifferentialExpression& expr, const Forcing& chi,
                                  const SolutionTrajectory& u_left, const SolutionTrajectory& u_right);

enum class L2Class { SquareIntegrable, NotSquareIntegrable, Inconclusive };

const char* to_string(L2Class v);

struct TailWindow {
    double lo = 0.0;
    double hi = 0.0;
};

struct TailOptions {
    int min_windows = 6;
    int agree_windows = 4;
    double decay_ratio = 0.75;
};

struct L2Verdict {
    double endpoint = 0.0;
    std::vector<TailWindow> windows;  // ordered toward the endpoint
    std::vector<double> log_norms;    // natural log of the window integrals of |psi|^2
    L2Class verdict = L2Class::Inconclusive;
    double ratio = 0.0;               // largest consecutive norm ratio over the decisive windows
};

/// Dyadic windows tiling the approach from anchor to endpoint, ordered toward the endpoint.
std::vector<TailWindow> tail_windows(double endpoint, double anchor, int count);

/// Verdict from window log-norms; the rule is deterministic and scale invariant.
L2Verdict verdict_from_log_norms(double endpoint, std::vector<TailWindow> windows, std::vector<double> log_norms,
                                 const TailOptions& opt = {});

L2Verdict classify_tail(const SolutionTrajectory& traj, double endpoint, double anchor, const TailOptions& opt = {});

/// Hermitian window Gram matrix in log-scaled form: true Gram = D g D with D = diag(exp(log_scale)).
struct ScaledGram {
    MatrixXc g;
    Eigen::VectorXd log_scale;

    [[nodiscard]] double log_diagonal(Eigen::Index i) const { return std::log(g(i, i).real()) + 2.0 * log_scale(i); }
    /// Leading j x j block.
    [[nodiscard]] ScaledGram leading(Eigen::Index j) const;
};

/// Sum of two Grams in the same basis, without overflow.
ScaledGram merge(const ScaledGram& a, const ScaledGram& b);

/// Integrates a block of solutions window by window. The block is kept orthonormal by QR steps; all window
/// Grams (of psi) are re-expressed in the current basis after each step, so they refer to one solution basis.
class BlockWindowIntegrator {
public:
    BlockWindowIntegrator(const DifferentialExpression& expr, cplx lambda, double x_start, const MatrixXc& y0,
                          const IntegrationOptions& opt = {});

    /// Integrates to the near edge of w (if needed) and across it, storing the window Gram.
    void next(const TailWindow& w);
    [[nodiscard]] const std::vector<ScaledGram>& grams() const { return grams_; }
    [[nodiscard]] double x() const { return x_; }
    /// Current basis states (columns), orthonormal up to the last QR step.
    [[nodiscard]] MatrixXc states() const;
    /// Accumulated log|R_jj| over all QR steps; the first column's true Grams are exp(2*log_growth(0)) larger.
    [[nodiscard]] const Eigen::VectorXd& log_growth() const { return log_growth_; }

private:
    void orthonormalize(VectorXc& y, VectorXc& k1);

    StackSystem sys_;
    IntegrationOptions opt_;
    int n_, p_;
    double x_;
    VectorXc y_;
    ScaledGram running_;
    MatrixXc fresh_;
    std::vector<ScaledGram> grams_;
    Eigen::VectorXd log_growth_;
};

/// Generalized eigenvalues of the pencil (sum of late Grams, sum of early Grams), both in one basis.
/// Empty when the early Gram is numerically singular.
std::vector<double> pencil_ratios(std::span<const ScaledGram> late, std::span<const ScaledGram> early);

/// Streaming window norms of a single solution; no trajectory is stored.
std::vector<double> window_log_norms(const DifferentialExpression& expr, cplx lambda, double x_start,
                                     const VectorXc& y0, std::span<const TailWindow> windows_in_order,
                                     const IntegrationOptions& opt = {});

}  // namespace selfadj
