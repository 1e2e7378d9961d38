#include "selfadj/bcalg.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "selfadj/errors.hpp"

namespace selfadj {

namespace {

constexpr cplx I{0.0, 1.0};

void require_even(int n) {
    if (n < 2 || n % 2 != 0) throw InvalidInput("order must be even and >= 2");
}

double step(double x) { return x > 0 ? 1.0 : 0.0; }

VectorXc to_vector(const DerivativeStack& s, int n) {
    VectorXc v = VectorXc::Zero(n);
    if (s.values.empty()) return v;
    if (static_cast<int>(s.values.size()) != n) throw InvalidInput("stack length does not match the order");
    for (int i = 0; i < n; ++i) v(i) = s.values[static_cast<std::size_t>(i)];
    return v;
}

MatrixXc null_space(const MatrixXc& m, double rtol = 1e-10) {
    Eigen::JacobiSVD<MatrixXc> svd(m, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const double smax = s.size() ? s(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rtol * std::max(smax, 1e-300)) ++rank;
    return svd.matrixV().rightCols(m.cols() - rank);
}

Eigen::Index numeric_rank(const MatrixXc& m, double rtol = 1e-10) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<MatrixXc> svd(m);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rtol * std::max(s(0), 1e-300)) ++r;
    return r;
}

double unit_phase_to_lambda(cplx u, double tau, bool& dirichlet) {
    dirichlet = std::abs(u + 1.0) < 1e-12;
    if (dirichlet) return 0.0;
    return -std::tan(0.5 * std::arg(u)) / tau;
}

int order_of(const LinearConditions& lc) { return static_cast<int>(lc.Ca.cols()); }

bool one_sided(const LinearConditions& lc, Side& side) {
    const bool a0 = lc.Ca.norm() == 0.0, b0 = lc.Cb.norm() == 0.0;
    if (a0 == b0) return false;
    side = a0 ? Side::Right : Side::Left;
    return true;
}

}  // namespace

MatrixXc epsilon_matrix(int n) {
    require_even(n);
    MatrixXc e = MatrixXc::Zero(n, n);
    const double h = 0.5 * (n + 1);
    for (int l = 1; l <= n; ++l) e(l - 1, n - l) = (l - h) > 0 ? 1.0 : -1.0;
    return e;
}

Diagonalizer diagonalizer(int n) {
    require_even(n);
    const double h = 0.5 * (n + 1), r = 1.0 / std::sqrt(2.0);
    MatrixXc t = MatrixXc::Zero(n, n);
    for (int m = 1; m <= n; ++m) {
        t(m - 1, m - 1) += r * (step(h - m) - I * step(m - h));
        t(n - m, m - 1) += r * (step(h - m) + I * step(m - h));
    }
    MatrixXc sigma = MatrixXc::Identity(n, n);
    sigma.bottomRightCorner(n / 2, n / 2) *= -1.0;
    return {t, sigma};
}

VectorXc tau_column(const DerivativeStack& s, double tau) {
    VectorXc v(static_cast<Eigen::Index>(s.size()));
    double p = 1.0;
    for (std::size_t k = 0; k < s.size(); ++k, p *= tau) v(static_cast<Eigen::Index>(k)) = p * s.values[k];
    return v;
}

MatrixXc abv_plus_map(int n, double tau) {
    require_even(n);
    MatrixXc p = MatrixXc::Zero(n / 2, n);
    for (int k = 1; k <= n / 2; ++k) {
        p(k - 1, k - 1) += std::pow(tau, k - 1);
        p(k - 1, n - k) += I * std::pow(tau, n - k);
    }
    return p;
}

MatrixXc abv_minus_map(int n, double tau) {
    require_even(n);
    MatrixXc p = MatrixXc::Zero(n / 2, n);
    for (int k = 1; k <= n / 2; ++k) {
        p(k - 1, n / 2 - k) += std::pow(tau, n / 2 - k);
        p(k - 1, n / 2 + k - 1) -= I * std::pow(tau, n / 2 + k - 1);
    }
    return p;
}

cplx AbvColumns::delta() const {
    const int n = static_cast<int>(psi_plus_minus.size());
    const double kappa = 0.25 * std::pow(tau, 1 - n);
    return 2.0 * I * kappa * (psi_plus_minus.squaredNorm() - psi_minus_plus.squaredNorm());
}

AbvColumns abv_columns(const DerivativeStack& a, const DerivativeStack& b, double tau) {
    if (a.size() != b.size()) throw InvalidInput("stacks of different order");
    const int n = static_cast<int>(a.size());
    require_even(n);
    if (!(tau > 0.0)) throw InvalidInput("tau must be positive");
    const MatrixXc pp = abv_plus_map(n, tau), pm = abv_minus_map(n, tau);
    const VectorXc va = to_vector(a, n), vb = to_vector(b, n);
    AbvColumns c;
    c.tau = tau;
    c.psi_plus_minus.resize(n);
    c.psi_minus_plus.resize(n);
    c.psi_plus_minus << pp * vb, pm * va;
    c.psi_minus_plus << pm * vb, pp * va;
    return c;
}

cplx boundary_form_difference(const DerivativeStack& a, const DerivativeStack& b) {
    if (a.size() != b.size()) throw InvalidInput("stacks of different order");
    const int n = static_cast<int>(a.size());
    const MatrixXc e = epsilon_matrix(n);
    const VectorXc va = to_vector(a, n), vb = to_vector(b, n);
    return vb.dot(e * vb) - va.dot(e * va);
}

double SingularAsymptotic::varkappa() const { return std::sqrt(alpha - 0.25); }

BcKind kind_of(const BoundaryCondition& bc) { return static_cast<BcKind>(bc.index()); }

namespace {
constexpr const char* kBcNames[] = {"matrix_pair",    "s_matrix",       "half_matrix",   "abv_unitary",
                                    "robin",          "quasi_periodic", "momentum_phase", "singular_asymptotic"};
}

const char* to_string(BcKind k) { return kBcNames[static_cast<int>(k)]; }

std::optional<BcKind> bc_kind_from_string(const std::string& s) {
    for (int i = 0; i < 8; ++i)
        if (s == kBcNames[i]) return static_cast<BcKind>(i);
    return std::nullopt;
}

ValidationReport validate(const BoundaryCondition& bc, int n) {
    auto fail = [](std::string what, double r) { return ValidationReport{false, std::move(what), r}; };
    auto square = [&](const MatrixXc& m, Eigen::Index k) { return m.rows() == k && m.cols() == k; };
    constexpr double tol = 1e-10;
    return std::visit(
        [&](const auto& c) -> ValidationReport {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, MatrixPair>) {
                require_even(n);
                if (!square(c.A, n) || !square(c.B, n)) return fail("shape", 0.0);
                MatrixXc ab(2 * n, n);
                ab << c.A, c.B;
                if (numeric_rank(ab) < n) return fail("rank", static_cast<double>(n - numeric_rank(ab)));
                const MatrixXc e = epsilon_matrix(n);
                const double r = (c.B.adjoint() * e * c.B - c.A.adjoint() * e * c.A).norm();
                const double scale = std::max(1.0, c.A.squaredNorm() + c.B.squaredNorm());
                if (r > tol * scale) return fail("E_isometry", r);
                return {true, "", r};
            } else if constexpr (std::is_same_v<T, SMatrix>) {
                require_even(n);
                if (!square(c.S, n)) return fail("shape", 0.0);
                const MatrixXc e = epsilon_matrix(n);
                const double r = (c.S.adjoint() * e * c.S - e).norm();
                if (r > tol * std::max(1.0, c.S.squaredNorm())) return fail("E_isometry", r);
                return {true, "", r};
            } else if constexpr (std::is_same_v<T, HalfMatrix>) {
                require_even(n);
                if (c.A.rows() != n || c.A.cols() != n / 2) return fail("shape", 0.0);
                if (numeric_rank(c.A) < n / 2) return fail("rank", static_cast<double>(n / 2 - numeric_rank(c.A)));
                const double r = (c.A.adjoint() * epsilon_matrix(n) * c.A).norm();
                if (r > tol * std::max(1.0, c.A.squaredNorm())) return fail("E_isotropic", r);
                return {true, "", r};
            } else if constexpr (std::is_same_v<T, AbvUnitary>) {
                require_even(n);
                const Eigen::Index k = c.layout == AbvLayout::Full ? n : n / 2;
                if (!square(c.U, k)) return fail("shape", 0.0);
                if (!(c.tau > 0.0) || !std::isfinite(c.tau)) return fail("tau", c.tau);
                const double r = (c.U.adjoint() * c.U - MatrixXc::Identity(k, k)).norm();
                if (r > tol) return fail("unitarity", r);
                return {true, "", r};
            } else if constexpr (std::is_same_v<T, Robin>) {
                if (n != 2) return fail("order", n);
                for (const auto& e : {c.left, c.right})
                    if (e && !e->dirichlet && !std::isfinite(e->lambda)) return fail("lambda", e->lambda);
                return {true, "", 0.0};
            } else if constexpr (std::is_same_v<T, QuasiPeriodic>) {
                require_even(n);
                if (!std::isfinite(c.vartheta)) return fail("vartheta", c.vartheta);
                return {true, "", 0.0};
            } else if constexpr (std::is_same_v<T, MomentumPhase>) {
                if (n != 1) return fail("order", n);
                if (!std::isfinite(c.vartheta)) return fail("vartheta", c.vartheta);
                return {true, "", 0.0};
            } else {
                if (n != 2) return fail("order", n);
                if (!(c.alpha > 0.25)) return fail("alpha", c.alpha);
                if (!(c.mu0 > 0.0) || !std::isfinite(c.mu0)) return fail("mu0", c.mu0);
                if (!std::isfinite(c.vartheta)) return fail("vartheta", c.vartheta);
                return {true, "", 0.0};
            }
        },
        bc);
}

LinearConditions linear_conditions(const BoundaryCondition& bc, int n, bool check) {
    const auto rep = validate(bc, n);
    if (!rep.ok && (check || rep.violated == "shape" || rep.violated == "order")) throw InvalidInput(std::string("invalid boundary condition: ") + rep.violated);
    return std::visit(
        [&](const auto& c) -> LinearConditions {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, MatrixPair>) {
                const MatrixXc e = epsilon_matrix(n);
                return {-c.A.adjoint() * e, c.B.adjoint() * e};
            } else if constexpr (std::is_same_v<T, SMatrix>) {
                return {-c.S, MatrixXc::Identity(n, n)};
            } else if constexpr (std::is_same_v<T, HalfMatrix>) {
                const MatrixXc r = c.A.adjoint() * epsilon_matrix(n);
                const MatrixXc z = MatrixXc::Zero(n / 2, n);
                return c.at == Side::Left ? LinearConditions{r, z} : LinearConditions{z, r};
            } else if constexpr (std::is_same_v<T, AbvUnitary>) {
                const MatrixXc pp = abv_plus_map(n, c.tau), pm = abv_minus_map(n, c.tau);
                const int h = n / 2;
                if (c.layout == AbvLayout::Full) {
                    // (Psi_-(b); Psi_+(a)) = U (Psi_+(b); Psi_-(a))
                    MatrixXc top_b(n, n), top_a(n, n), rhs_b(n, n), rhs_a(n, n);
                    top_b << pm, MatrixXc::Zero(h, n);
                    top_a << MatrixXc::Zero(h, n), pp;
                    rhs_b << pp, MatrixXc::Zero(h, n);
                    rhs_a << MatrixXc::Zero(h, n), pm;
                    return {top_a - c.U * rhs_a, top_b - c.U * rhs_b};
                }
                const MatrixXc r = pm - c.U * pp;  // Psi_-(x) = U Psi_+(x)
                const MatrixXc z = MatrixXc::Zero(h, n);
                return c.layout == AbvLayout::LeftOnly ? LinearConditions{r, z} : LinearConditions{z, r};
            } else if constexpr (std::is_same_v<T, Robin>) {
                const int rows = (c.left ? 1 : 0) + (c.right ? 1 : 0);
                LinearConditions lc{MatrixXc::Zero(rows, 2), MatrixXc::Zero(rows, 2)};
                int r = 0;
                auto row = [](const RobinEnd& e, MatrixXc& m, int i) {
                    if (e.dirichlet) {
                        m(i, 0) = 1.0;
                    } else {
                        m(i, 0) = e.lambda;
                        m(i, 1) = -1.0;
                    }
                };
                if (c.left) row(*c.left, lc.Ca, r++);
                if (c.right) row(*c.right, lc.Cb, r++);
                return lc;
            } else if constexpr (std::is_same_v<T, QuasiPeriodic>) {
                return {-std::exp(I * c.vartheta) * MatrixXc::Identity(n, n), MatrixXc::Identity(n, n)};
            } else if constexpr (std::is_same_v<T, MomentumPhase>) {
                MatrixXc a(1, 1), b(1, 1);
                a(0, 0) = -std::exp(I * c.vartheta);
                b(0, 0) = 1.0;
                return {a, b};
            } else {
                throw Unsupported("singular asymptotic conditions have no finite linear form");
            }
        },
        bc);
}

VectorXc residual(const BoundaryCondition& bc, const DerivativeStack& a, const DerivativeStack& b) {
    const int n = static_cast<int>(std::max(a.size(), b.size()));
    const LinearConditions lc = linear_conditions(bc, n);
    return lc.Ca * to_vector(a, n) + lc.Cb * to_vector(b, n);
}

namespace {

MatrixXc abv_unitary_from(const LinearConditions& lc, double tau, AbvLayout& layout) {
    const int n = order_of(lc);
    const MatrixXc pp = abv_plus_map(n, tau), pm = abv_minus_map(n, tau);
    Side side;
    if (one_sided(lc, side)) {
        const MatrixXc& c = side == Side::Left ? lc.Ca : lc.Cb;
        if (c.rows() != n / 2) throw InvalidInput("one-sided condition needs n/2 rows");
        const MatrixXc k = null_space(c);
        layout = side == Side::Left ? AbvLayout::LeftOnly : AbvLayout::RightOnly;
        const MatrixXc x1 = pp * k, x2 = pm * k;
        return x2 * x1.inverse();
    }
    if (lc.rows() != n) throw InvalidInput("two-sided condition needs n rows");
    MatrixXc m(n, 2 * n);
    m << lc.Ca, lc.Cb;
    const MatrixXc k = null_space(m);
    if (k.cols() != n) throw InvalidInput("conditions are not independent");
    const int h = n / 2;
    MatrixXc l1 = MatrixXc::Zero(n, 2 * n), l2 = MatrixXc::Zero(n, 2 * n);
    // (Psi_+(b); Psi_-(a)) and (Psi_-(b); Psi_+(a)) as maps of (Psi(a); Psi(b))
    l1.block(0, n, h, n) = pp;
    l1.block(h, 0, h, n) = pm;
    l2.block(0, n, h, n) = pm;
    l2.block(h, 0, h, n) = pp;
    layout = AbvLayout::Full;
    const MatrixXc x1 = l1 * k, x2 = l2 * k;
    return x2 * x1.inverse();
}

}  // namespace

BoundaryCondition convert(const BoundaryCondition& from, BcKind target, int n, double tau) {
    if (kind_of(from) == target) return from;
    if (kind_of(from) == BcKind::SingularAsymptotic || target == BcKind::SingularAsymptotic)
        throw InvalidInput("singular asymptotic conditions convert only to themselves");
    const LinearConditions lc = linear_conditions(from, n);
    Side side;
    const bool one = one_sided(lc, side);
    switch (target) {
        case BcKind::MatrixPair: {
            if (one) throw InvalidInput("a one-sided condition is not a matrix pair");
            const MatrixXc e = epsilon_matrix(n);
            return MatrixPair{-e * lc.Ca.adjoint(), e * lc.Cb.adjoint()};
        }
        case BcKind::SMatrix: {
            if (one) throw InvalidInput("a one-sided condition is not an S-matrix");
            Eigen::JacobiSVD<MatrixXc> svd(lc.Cb);
            const auto& s = svd.singularValues();
            if (s(s.size() - 1) < 1e-12 * s(0))
                throw InvalidInput("singular B: representable only as a matrix pair");
            return SMatrix{-lc.Cb.fullPivLu().solve(lc.Ca)};
        }
        case BcKind::HalfMatrix: {
            if (!one) throw InvalidInput("a two-sided condition is not a half matrix");
            const MatrixXc& c = side == Side::Left ? lc.Ca : lc.Cb;
            return HalfMatrix{epsilon_matrix(n) * c.adjoint(), side};
        }
        case BcKind::AbvUnitary: {
            AbvLayout layout;
            MatrixXc u = abv_unitary_from(lc, tau, layout);
            return AbvUnitary{u, tau, layout};
        }
        case BcKind::Robin: {
            if (n != 2) throw InvalidInput("Robin conditions need n=2");
            AbvLayout layout;
            const MatrixXc u = abv_unitary_from(lc, 1.0, layout);
            Robin r;
            bool d = false;
            auto end_from = [&](cplx phase) {
                const double lam = unit_phase_to_lambda(phase, 1.0, d);
                return RobinEnd{d, lam};
            };
            if (layout == AbvLayout::Full) {
                if (std::abs(u(0, 1)) > 1e-10 || std::abs(u(1, 0)) > 1e-10)
                    throw InvalidInput("condition couples the two ends; not splitted");
                r.right = end_from(u(0, 0));
                r.left = end_from(1.0 / u(1, 1));
            } else if (layout == AbvLayout::LeftOnly) {
                r.left = end_from(u(0, 0));
            } else {
                r.right = end_from(u(0, 0));
            }
            return r;
        }
        case BcKind::QuasiPeriodic: {
            if (one) throw InvalidInput("a one-sided condition is not quasi-periodic");
            const auto s = std::get<SMatrix>(convert(from, BcKind::SMatrix, n, tau)).S;
            const cplx z = s(0, 0);
            if ((s - z * MatrixXc::Identity(n, n)).norm() > 1e-10 || std::abs(std::abs(z) - 1.0) > 1e-10)
                throw InvalidInput("S is not a phase times the identity");
            return QuasiPeriodic{std::arg(z)};
        }
        case BcKind::MomentumPhase: {
            if (n != 1 || one) throw InvalidInput("momentum phase needs n=1 and both ends");
            const cplx z = -lc.Ca(0, 0) / lc.Cb(0, 0);
            if (std::abs(std::abs(z) - 1.0) > 1e-10) throw InvalidInput("not a unit phase");
            return MomentumPhase{std::arg(z)};
        }
        default:
            break;
    }
    throw InvalidInput("unsupported conversion");
}

bool residual_equivalent(const BoundaryCondition& x, const BoundaryCondition& y, int n, unsigned seed, int samples,
                         double tol) {
    const LinearConditions lx = linear_conditions(x, n), ly = linear_conditions(y, n);
    MatrixXc mx(lx.rows(), 2 * n), my(ly.rows(), 2 * n);
    mx << lx.Ca, lx.Cb;
    my << ly.Ca, ly.Cb;
    // Normalize rows so tolerances are relative.
    for (Eigen::Index i = 0; i < mx.rows(); ++i) mx.row(i) /= std::max(mx.row(i).norm(), 1e-300);
    for (Eigen::Index i = 0; i < my.rows(); ++i) my.row(i) /= std::max(my.row(i).norm(), 1e-300);
    const MatrixXc kx = null_space(mx), ky = null_space(my);
    std::mt19937 rng(seed);
    std::normal_distribution<double> g;
    auto rnd = [&](Eigen::Index k) {
        VectorXc v(k);
        for (Eigen::Index i = 0; i < k; ++i) v(i) = cplx(g(rng), g(rng));
        return v;
    };
    for (int s = 0; s < samples; ++s) {
        if (kx.cols() > 0) {
            const VectorXc v = kx * rnd(kx.cols());
            if ((my * v).norm() > tol * v.norm()) return false;
        }
        if (ky.cols() > 0) {
            const VectorXc v = ky * rnd(ky.cols());
            if ((mx * v).norm() > tol * v.norm()) return false;
        }
        const VectorXc w = rnd(2 * n);
        if (((mx * w).norm() > tol * w.norm()) != ((my * w).norm() > tol * w.norm())) return false;
    }
    return kx.cols() == ky.cols();
}

std::vector<NamedCondition> named_presets(double l) {
    using std::numbers::pi;
    MatrixXc dA(2, 2), dB(2, 2), nA(2, 2), nB(2, 2), ex(2, 2), u(2, 2);
    dA << 0, 0, 0, 1;
    dB << 0, 0, 1, 0;
    nA << 0, 1, 0, 0;
    nB << 1, 0, 0, 0;
    ex << std::cosh(pi), l / pi * std::sinh(pi), pi / l * std::sinh(pi), std::cosh(pi);
    u << I * std::sinh(pi), 1.0, 1.0, I * std::sinh(pi);
    return {
        {"dirichlet", MatrixPair{dA, dB}},
        {"neumann", MatrixPair{nA, nB}},
        {"periodic", QuasiPeriodic{0.0}},
        {"antiperiodic", QuasiPeriodic{pi}},
        {"splitted_neumann", Robin{RobinEnd{false, 0.0}, RobinEnd{false, 0.0}}},
        {"exotic", SMatrix{-ex}},
        {"exotic_abv", AbvUnitary{-u / std::cosh(pi), l / pi, AbvLayout::Full}},
    };
}

SingularFit singular_fit(std::span<const double> x, std::span<const cplx> psi, double alpha, double mu0) {
    if (!(alpha > 0.25)) throw InvalidInput("alpha must exceed 1/4");
    if (x.size() != psi.size() || x.size() < 4) throw InvalidInput("need at least 4 samples");
    const double kap = std::sqrt(alpha - 0.25);
    const Eigen::Index m = static_cast<Eigen::Index>(x.size());
    // Divide out (mu0 x)^{1/2} so every sample weighs the same.
    MatrixXc a(m, 2);
    VectorXc rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double lx = std::log(mu0 * x[static_cast<std::size_t>(i)]);
        a(i, 0) = std::exp(I * kap * lx);
        a(i, 1) = std::exp(-I * kap * lx);
        rhs(i) = psi[static_cast<std::size_t>(i)] / std::sqrt(mu0 * x[static_cast<std::size_t>(i)]);
    }
    const VectorXc c = a.colPivHouseholderQr().solve(rhs);
    SingularFit f;
    f.c_plus = c(0);
    f.c_minus = c(1);
    f.residual = (a * c - rhs).norm() / std::max(rhs.norm(), 1e-300);
    return f;
}

SingularFit singular_fit(const SolutionTrajectory& traj, double alpha, double mu0, double x_fit, int samples) {
    const double lo = traj.lo();
    if (!(x_fit > lo)) throw InvalidInput("fit window lies outside the trajectory");
    auto fit_on = [&](double hi) {
        std::vector<double> xs(static_cast<std::size_t>(samples));
        std::vector<cplx> ps(xs.size());
        for (int i = 0; i < samples; ++i) {
            xs[static_cast<std::size_t>(i)] = lo * std::pow(hi / lo, static_cast<double>(i) / (samples - 1));
            ps[static_cast<std::size_t>(i)] = traj.value(xs[static_cast<std::size_t>(i)]);
        }
        return singular_fit(xs, ps, alpha, mu0);
    };
    SingularFit f = fit_on(x_fit);
    f.residual_half = fit_on(0.5 * x_fit).residual;
    // Remainder should behave like a power of x; below the integration noise there is nothing to check.
    if (f.residual > 1e-8 && f.residual_half > 0.5 * f.residual)
        throw NumericalFailure("singular fit residual does not shrink with the window");
    return f;
}

double vartheta_map(double theta, double kappa, double l) {
    return theta - 2.0 * std::atan2(std::sin(theta), std::exp(kappa * l) + std::cos(theta));
}

}  // namespace selfadj
