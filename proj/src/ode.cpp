#include "selfadj/ode.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "selfadj/errors.hpp"

namespace selfadj {

namespace {

const cplx I{0.0, 1.0};

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// Gauss-Legendre 5-point nodes on [0,1].
constexpr std::array<double, 5> gl_x{0.04691007703066800, 0.23076534494715845, 0.5, 0.76923465505284155,
                                     0.95308992296933200};
constexpr std::array<double, 5> gl_w{0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                                     0.23931433524968324, 0.11846344252809454};

double err_norm(const VectorXc& e, const VectorXc& y0, const VectorXc& y1, const IntegrationOptions& opt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double r = std::abs(e(i)) / sc;
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(e.size()));
}

double scaled_norm(const VectorXc& v, const VectorXc& y0, const IntegrationOptions& opt) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double r = std::abs(v(i)) / (opt.atol + opt.rtol * std::abs(y0(i)));
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

StackSystem::StackSystem(const DifferentialExpression& expr, cplx lambda, Forcing chi)
    : expr_(&expr), lambda_(lambda), chi_(std::move(chi)), n_(expr.order()) {
    if (!expr.has_quasi_derivatives())
        throw Unsupported("first-order reduction needs n=1 or a purely even expression");
}

void StackSystem::block(double x, const VectorXc& y, VectorXc& dy, int p) const {
    const int n = n_;
    if (n == 1) {
        const double f1 = expr_->odd(1)(x);
        const cplx a = I * (lambda_ - expr_->even(0)(x) + 0.5 * I * expr_->odd(1).derivative(1, x)) / f1;
        for (int c = 0; c < p; ++c) dy(c) = a * y(c);
        return;
    }
    const int N = n / 2;
    std::array<double, 16> f{};
    if (N >= static_cast<int>(f.size())) throw Unsupported("order too large");
    for (int k = 0; k <= N; ++k) f[k] = expr_->even(k)(x);
    for (int c = 0; c < p; ++c) {
        const cplx* yc = y.data() + c * n;
        cplx* dc = dy.data() + c * n;
        for (int k = 0; k < N - 1; ++k) dc[k] = yc[k + 1];
        dc[N - 1] = yc[N] / f[N];
        for (int k = 1; k <= N; ++k) {
            const cplx next = (k < N) ? yc[N + k] : lambda_ * yc[0];
            dc[N + k - 1] = f[N - k] * yc[N - k] - next;
        }
    }
}

void StackSystem::operator()(double x, const VectorXc& y, VectorXc& dy) const {
    const cplx g = chi_ ? chi_(x) : cplx{};
    if (n_ == 1) {
        const double f1 = expr_->odd(1)(x);
        const double df1 = expr_->odd(1).derivative(1, x);
        const double f0 = expr_->even(0)(x);
        dy(0) = I * ((lambda_ - f0) * y(0) + g + 0.5 * I * df1 * y(0)) / f1;
        return;
    }
    const int N = n_ / 2;
    for (int k = 0; k < N - 1; ++k) dy(k) = y(k + 1);
    dy(N - 1) = y(N) / expr_->even(N)(x);
    for (int k = 1; k <= N; ++k) {
        const cplx next = (k < N) ? y(N + k) : lambda_ * y(0) + g;
        dy(N + k - 1) = expr_->even(N - k)(x) * y(N - k) - next;
    }
}

void DenseStep::eval(double x, VectorXc& out) const {
    const double t = (x - x0) / h;
    const double t1 = 1.0 - t;
    out = rc[0] + t * (rc[1] + t1 * (rc[2] + t * (rc[3] + t1 * rc[4])));
}

VectorXc dopri5(const SystemRhs& rhs, double x0, const VectorXc& y0, double x1, const IntegrationOptions& opt,
                const StepObserver& observer) {
    const Eigen::Index n = y0.size();
    VectorXc y = y0, y1(n), yt(n), k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), err(n);
    if (x1 == x0) return y;
    const double dir = x1 > x0 ? 1.0 : -1.0;
    const double span = std::abs(x1 - x0);
    double x = x0;

    rhs(x, y, k1);
    // Initial step (Hairer-Wanner heuristic).
    double h;
    {
        const double dn0 = scaled_norm(y, y, opt), dn1 = scaled_norm(k1, y, opt);
        double h0 = (dn0 < 1e-5 || dn1 < 1e-5) ? 1e-6 : 0.01 * dn0 / dn1;
        h0 = std::min(h0, span);
        yt = y + dir * h0 * k1;
        rhs(x + dir * h0, yt, k2);
        const double dn2 = scaled_norm(k2 - k1, y, opt) / h0;
        const double mx = std::max(dn1, dn2);
        const double h1 = mx <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / mx, 0.2);
        h = std::min({100 * h0, h1, span});
        // zero components with a tiny atol can make the guess absurdly small; the controller shrinks it if needed
        h = std::min(span, std::max(h, 1e-12 * std::max(1.0, std::abs(x0))));
    }

    DenseStep step;
    if (observer)
        for (auto& r : step.rc) r.resize(n);

    bool last_rejected = false;
    std::size_t steps = 0;
    while (dir * (x1 - x) > 0) {
        if (++steps > opt.max_steps) throw NumericalFailure("integration exceeded the step budget");
        const double hmin = 1e-14 * std::max(1.0, std::abs(x));
        if (h < hmin) throw NumericalFailure("step size collapse near x=" + std::to_string(x));
        bool final_step = false;
        if (h >= dir * (x1 - x)) {
            h = dir * (x1 - x);
            final_step = true;
        }
        const double hs = dir * h;
        yt.noalias() = y + hs * a21 * k1;
        rhs(x + c2 * hs, yt, k2);
        yt.noalias() = y + hs * (a31 * k1 + a32 * k2);
        rhs(x + c3 * hs, yt, k3);
        yt.noalias() = y + hs * (a41 * k1 + a42 * k2 + a43 * k3);
        rhs(x + c4 * hs, yt, k4);
        yt.noalias() = y + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
        rhs(x + c5 * hs, yt, k5);
        yt.noalias() = y + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
        const double xn = final_step ? x1 : x + hs;
        rhs(xn, yt, k6);
        y1.noalias() = y + hs * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        rhs(xn, y1, k7);
        err.noalias() = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const double en = err_norm(err, y, y1, opt);
        if (!std::isfinite(en)) {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
        fac = std::clamp(fac, 0.2, 10.0);
        if (en <= 1.0) {
            if (observer) {
                step.x0 = x;
                step.h = hs;
                step.rc[0] = y;
                step.rc[1] = y1 - y;
                step.rc[2] = hs * k1 - step.rc[1];
                step.rc[3] = step.rc[1] - hs * k7 - step.rc[2];
                step.rc[4] = hs * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
            }
            x = xn;
            y = y1;
            k1 = k7;
            if (observer) observer(step, y, k1);
            if (final_step) break;
            if (last_rejected) fac = std::min(fac, 1.0);
            last_rejected = false;
            h *= fac;
        } else {
            h *= std::min(fac, 1.0);
            last_rejected = true;
        }
    }
    return y;
}

SolutionTrajectory::SolutionTrajectory(const DifferentialExpression& expr, cplx lambda, std::vector<DenseStep> steps,
                                       TrajectoryMeta meta)
    : n_(expr.order()), lambda_(lambda), steps_(std::move(steps)), meta_(std::move(meta)) {
    std::sort(steps_.begin(), steps_.end(), [](const DenseStep& a, const DenseStep& b) { return a.lo() < b.lo(); });
}

double SolutionTrajectory::lo() const { return steps_.empty() ? meta_.x_initial : steps_.front().lo(); }

double SolutionTrajectory::hi() const { return steps_.empty() ? meta_.x_initial : steps_.back().hi(); }

std::vector<double> SolutionTrajectory::grid() const {
    std::vector<double> g;
    g.reserve(steps_.size() + 1);
    for (const auto& s : steps_) g.push_back(s.lo());
    if (!steps_.empty()) g.push_back(steps_.back().hi());
    return g;
}

VectorXc SolutionTrajectory::state(double x) const {
    if (steps_.empty()) {
        if (x == meta_.x_initial) return meta_.initial;
        throw InvalidInput("empty trajectory");
    }
    const double tol = 1e-12 * std::max(1.0, std::abs(x));
    if (x < lo() - tol || x > hi() + tol) throw InvalidInput("point outside the trajectory segment");
    auto it = std::upper_bound(steps_.begin(), steps_.end(), x, [](double v, const DenseStep& s) { return v < s.lo(); });
    const DenseStep& s = (it == steps_.begin()) ? *it : *(it - 1);
    VectorXc out;
    s.eval(std::clamp(x, s.lo(), s.hi()), out);
    return out;
}

DerivativeStack SolutionTrajectory::stack(double x) const {
    const VectorXc v = state(x);
    return {x, std::vector<cplx>(v.data(), v.data() + v.size())};
}

SolutionTrajectory SolutionTrajectory::scaled(cplx c) const {
    SolutionTrajectory r = *this;
    for (auto& s : r.steps_)
        for (auto& v : s.rc) v *= c;
    r.meta_.initial *= c;
    return r;
}

SolutionTrajectory SolutionTrajectory::spliced(const SolutionTrajectory& other) const {
    if (other.n_ != n_) throw InvalidInput("cannot splice trajectories of different order");
    SolutionTrajectory r = *this;
    r.steps_.insert(r.steps_.end(), other.steps_.begin(), other.steps_.end());
    std::sort(r.steps_.begin(), r.steps_.end(), [](const DenseStep& a, const DenseStep& b) { return a.lo() < b.lo(); });
    return r;
}

double SolutionTrajectory::norm_squared(double x0, double x1) const {
    if (x1 < x0) std::swap(x0, x1);
    double s = 0.0;
    VectorXc v;
    for (const auto& st : steps_) {
        const double l = std::max(x0, st.lo()), r = std::min(x1, st.hi());
        if (r <= l) continue;
        for (std::size_t q = 0; q < gl_x.size(); ++q) {
            st.eval(l + gl_x[q] * (r - l), v);
            s += gl_w[q] * (r - l) * std::norm(v(0));
        }
    }
    return s;
}

void SolutionTrajectory::write_csv(std::ostream& os) const {
    os << "x";
    for (int k = 0; k < n_; ++k) os << ",re" << k << ",im" << k;
    os << "\n";
    char buf[64];
    for (double x : grid()) {
        const VectorXc v = state(x);
        std::snprintf(buf, sizeof buf, "%.17g", x);
        os << buf;
        for (int k = 0; k < n_; ++k) {
            std::snprintf(buf, sizeof buf, ",%.17g,%.17g", v(k).real(), v(k).imag());
            os << buf;
        }
        os << "\n";
    }
}

SolutionTrajectory integrate(const DifferentialExpression& expr, cplx lambda, const DerivativeStack& initial, double x1,
                             const Forcing& chi, const IntegrationOptions& opt) {
    if (static_cast<int>(initial.size()) != expr.order()) throw InvalidInput("initial stack length differs from order");
    for (const auto& v : initial.values)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw InvalidInput("initial stack is not finite");
    StackSystem sys(expr, lambda, chi);
    const VectorXc y0 = Eigen::Map<const VectorXc>(initial.values.data(), expr.order());
    std::vector<DenseStep> steps;
    dopri5([&](double x, const VectorXc& y, VectorXc& dy) { sys(x, y, dy); }, initial.x, y0, x1, opt,
           [&](const DenseStep& s, VectorXc&, VectorXc&) { steps.push_back(s); });
    return SolutionTrajectory(expr, lambda, std::move(steps), {y0, initial.x, opt});
}

std::vector<SolutionTrajectory> fundamental_system(const DifferentialExpression& expr, cplx lambda, double x0,
                                                   double x1, const IntegrationOptions& opt) {
    const int n = expr.order();
    std::vector<SolutionTrajectory> out;
    for (int j = 0; j < n; ++j) {
        DerivativeStack s{x0, std::vector<cplx>(n)};
        s.values[j] = 1.0;
        out.push_back(integrate(expr, lambda, s, x1, {}, opt));
    }
    return out;
}

cplx wronskian(const DifferentialExpression& expr, const VectorXc& u, const VectorXc& v) {
    const int n = expr.order();
    if (n % 2 != 0) throw Unsupported("Wronskian form is defined here for even order");
    cplx s{};
    for (int k = 0; k < n / 2; ++k) s += u(k) * v(n - k - 1) - u(n - k - 1) * v(k);
    return s;
}

namespace {

// y = (u1 I2 - u2 I1) / W with I_k = integral of u_k chi, taken from the left end of the common segment
// when side_k < 0 and from the right end otherwise.
SolutionTrajectory vop_core(const DifferentialExpression& expr, const Forcing& chi, const SolutionTrajectory& u1,
                            const SolutionTrajectory& u2, int side1, int side2, double x0) {
    if (expr.order() != 2) throw Unsupported("variation of parameters is implemented for n=2");
    if (u1.lambda() != u2.lambda()) throw InvalidInput("u1 and u2 solve different equations");
    const cplx W = wronskian(expr, u1.state(x0), u2.state(x0));
    if (std::abs(W) < 1e-12) throw InvalidInput("u1, u2 do not form a fundamental pair (|W| < 1e-12)");

    const double lo = std::max(u1.lo(), u2.lo()), hi = std::min(u1.hi(), u2.hi());
    std::vector<double> nodes;
    for (double g : u1.grid())
        if (g >= lo && g <= hi) nodes.push_back(g);
    for (double g : u2.grid())
        if (g >= lo && g <= hi) nodes.push_back(g);
    nodes.push_back(lo);
    nodes.push_back(hi);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (int q = 1; q < 512; ++q) nodes.push_back(lo + (hi - lo) * q / 512.0);
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    std::vector<double> fine;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        for (int q = 0; q < 4; ++q) fine.push_back(nodes[i] + (nodes[i + 1] - nodes[i]) * q / 4.0);
    fine.push_back(nodes.back());

    // Cumulative integrals of u_i chi.
    const std::size_t m = fine.size();
    std::vector<cplx> I1(m), I2(m);
    auto piece = [&](double l, double r, cplx& a1, cplx& a2) {
        a1 = a2 = 0.0;
        for (std::size_t q = 0; q < gl_x.size(); ++q) {
            const double x = l + gl_x[q] * (r - l);
            const cplx c = chi ? chi(x) : cplx{};
            a1 += gl_w[q] * (r - l) * u1.value(x) * c;
            a2 += gl_w[q] * (r - l) * u2.value(x) * c;
        }
    };
    std::vector<cplx> p1(m - 1), p2(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) piece(fine[i], fine[i + 1], p1[i], p2[i]);
    auto accumulate = [m](std::vector<cplx>& v, const std::vector<cplx>& p, int side) {
        if (side < 0)
            for (std::size_t i = 1; i < m; ++i) v[i] = v[i - 1] + p[i - 1];
        else
            for (std::size_t i = m - 1; i-- > 0;) v[i] = v[i + 1] - p[i];
    };
    accumulate(I1, p1, side1);
    accumulate(I2, p2, side2);
    StackSystem sys(expr, u1.lambda(), chi);
    std::vector<VectorXc> y(m), dy(m);
    for (std::size_t i = 0; i < m; ++i) {
        y[i] = (u1.state(fine[i]) * I2[i] - u2.state(fine[i]) * I1[i]) / W;
        dy[i].resize(2);
        sys(fine[i], y[i], dy[i]);
    }
    std::vector<DenseStep> steps(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        auto& s = steps[i];
        s.x0 = fine[i];
        s.h = fine[i + 1] - fine[i];
        s.rc[0] = y[i];
        s.rc[1] = y[i + 1] - y[i];
        s.rc[2] = s.h * dy[i] - s.rc[1];
        s.rc[3] = s.rc[1] - s.h * dy[i + 1] - s.rc[2];
        s.rc[4] = VectorXc::Zero(2);
    }
    return SolutionTrajectory(expr, u1.lambda(), std::move(steps), {y[0], fine.front(), u1.meta().options});
}

}  // namespace

SolutionTrajectory variation_of_parameters(const DifferentialExpression& expr, const Forcing& chi,
                                           const SolutionTrajectory& u1, const SolutionTrajectory& u2) {
    const double x0 = u1.meta().x_initial;
    const double lo = std::max(u1.lo(), u2.lo()), hi = std::min(u1.hi(), u2.hi());
    const int side = std::abs(x0 - lo) <= std::abs(x0 - hi) ? -1 : 1;
    auto t = vop_core(expr, chi, u1, u2, side, side, x0);
    return SolutionTrajectory(expr, u1.lambda(), t.steps(), {VectorXc::Zero(2), x0, u1.meta().options});
}

SolutionTrajectory green_solution(const DifferentialExpression& expr, const Forcing& chi,
                                  const SolutionTrajectory& u_left, const SolutionTrajectory& u_right) {
    const double lo = std::max(u_left.lo(), u_right.lo());
    return vop_core(expr, chi, u_left, u_right, -1, 1, lo);
}

const char* to_string(L2Class v) {
    switch (v) {
        case L2Class::SquareIntegrable: return "square_integrable";
        case L2Class::NotSquareIntegrable: return "not_square_integrable";
        case L2Class::Inconclusive: return "inconclusive";
    }
    return "unknown";
}

std::vector<TailWindow> tail_windows(double endpoint, double anchor, int count) {
    std::vector<TailWindow> w;
    if (std::isinf(endpoint)) {
        const double sgn = endpoint > 0 ? 1.0 : -1.0;
        const double a = sgn * anchor;
        const int k0 = a <= 0.25 ? -2 : static_cast<int>(std::ceil(std::log2(a)));
        for (int k = k0; k < k0 + count; ++k) {
            const double l = std::ldexp(1.0, k), r = std::ldexp(1.0, k + 1);
            w.push_back(sgn > 0 ? TailWindow{l, r} : TailWindow{-r, -l});
        }
    } else {
        const double s = anchor - endpoint;
        if (s == 0.0) throw InvalidInput("anchor coincides with the endpoint");
        for (int k = 0; k < count; ++k) {
            const double p = endpoint + s * std::ldexp(1.0, -k - 1), q = endpoint + s * std::ldexp(1.0, -k);
            w.push_back({std::min(p, q), std::max(p, q)});
        }
    }
    return w;
}

L2Verdict verdict_from_log_norms(double endpoint, std::vector<TailWindow> windows, std::vector<double> log_norms,
                                 const TailOptions& opt) {
    if (static_cast<int>(log_norms.size()) < opt.min_windows || windows.size() != log_norms.size())
        throw InvalidInput("tail classification needs at least " + std::to_string(opt.min_windows) + " windows");
    L2Verdict v{endpoint, std::move(windows), std::move(log_norms), L2Class::Inconclusive, 0.0};
    const std::size_t m = v.log_norms.size();
    const std::size_t first = m - static_cast<std::size_t>(opt.agree_windows);
    double max_r = -kInf, min_r = kInf;
    for (std::size_t i = first + 1; i < m; ++i) {
        const double a = v.log_norms[i - 1], b = v.log_norms[i];
        double r;
        if (std::isinf(a) && a < 0)
            r = std::isinf(b) && b < 0 ? 0.0 : kInf;
        else
            r = std::exp(b - a);
        max_r = std::max(max_r, r);
        min_r = std::min(min_r, r);
    }
    if (max_r <= opt.decay_ratio) {
        v.verdict = L2Class::SquareIntegrable;
        v.ratio = max_r;
    } else if (min_r >= 1.0 - 1e-6) {
        v.verdict = L2Class::NotSquareIntegrable;
        v.ratio = min_r;
    } else {
        v.ratio = max_r;
    }
    return v;
}

L2Verdict classify_tail(const SolutionTrajectory& traj, double endpoint, double anchor, const TailOptions& opt) {
    std::vector<TailWindow> all = tail_windows(endpoint, anchor, 64), used;
    std::vector<double> norms;
    const double tol = 1e-12;
    for (const auto& w : all) {
        if (w.lo < traj.lo() - tol * std::max(1.0, std::abs(w.lo)) ||
            w.hi > traj.hi() + tol * std::max(1.0, std::abs(w.hi)))
            break;
        used.push_back(w);
        norms.push_back(std::log(traj.norm_squared(w.lo, w.hi)));
    }
    return verdict_from_log_norms(endpoint, std::move(used), std::move(norms), opt);
}

ScaledGram ScaledGram::leading(Eigen::Index j) const {
    return {g.topLeftCorner(j, j), log_scale.head(j)};
}

ScaledGram merge(const ScaledGram& a, const ScaledGram& b) {
    const Eigen::Index p = a.g.rows();
    ScaledGram r{MatrixXc::Zero(p, p), a.log_scale.cwiseMax(b.log_scale)};
    const Eigen::VectorXd ea = (a.log_scale - r.log_scale).array().exp();
    const Eigen::VectorXd eb = (b.log_scale - r.log_scale).array().exp();
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) r.g(i, j) = ea(i) * a.g(i, j) * ea(j) + eb(i) * b.g(i, j) * eb(j);
    return r;
}

namespace {

/// g <- V^H g V with V = D U^{-1} D^{-1}, then log_scale -= log|R_jj|; R = diag(|R_jj|) U.
void congruence(ScaledGram& s, const MatrixXc& uinv, const Eigen::VectorXd& log_rdiag) {
    const Eigen::Index p = s.g.rows();
    MatrixXc v = MatrixXc::Zero(p, p);
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = a; b < p; ++b)
            v(a, b) = uinv(a, b) * std::exp(std::min(700.0, s.log_scale(a) - s.log_scale(b)));
    // Upper-triangular products written out so that overflow in trailing entries cannot reach leading ones.
    MatrixXc gv = MatrixXc::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index b = 0; b < p; ++b) {
            cplx acc{};
            for (Eigen::Index c = 0; c <= b; ++c) acc += s.g(i, c) * v(c, b);
            gv(i, b) = acc;
        }
    for (Eigen::Index a = 0; a < p; ++a)
        for (Eigen::Index b = 0; b < p; ++b) {
            cplx acc{};
            for (Eigen::Index c = 0; c <= a; ++c) acc += std::conj(v(c, a)) * gv(c, b);
            s.g(a, b) = acc;
        }
    s.log_scale -= log_rdiag;
}

}  // namespace

BlockWindowIntegrator::BlockWindowIntegrator(const DifferentialExpression& expr, cplx lambda, double x_start,
                                             const MatrixXc& y0, const IntegrationOptions& opt)
    : sys_(expr, lambda), opt_(opt), n_(expr.order()), p_(static_cast<int>(y0.cols())), x_(x_start) {
    if (y0.rows() != n_ || p_ < 1 || p_ > n_) throw InvalidInput("block initial data has the wrong shape");
    y_ = Eigen::Map<const VectorXc>(y0.data(), n_ * p_);
    running_ = {MatrixXc::Zero(p_, p_), Eigen::VectorXd::Zero(p_)};
    fresh_ = MatrixXc::Zero(p_, p_);
    log_growth_ = Eigen::VectorXd::Zero(p_);
    VectorXc dummy = VectorXc::Zero(n_ * p_);
    orthonormalize(y_, dummy);
}

MatrixXc BlockWindowIntegrator::states() const { return Eigen::Map<const MatrixXc>(y_.data(), n_, p_); }

void BlockWindowIntegrator::orthonormalize(VectorXc& y, VectorXc& k1) {
    Eigen::Map<MatrixXc> Y(y.data(), n_, p_);
    Eigen::HouseholderQR<MatrixXc> qr(Y);
    MatrixXc R = qr.matrixQR().topRows(p_).triangularView<Eigen::Upper>();
    Eigen::VectorXd logd(p_);
    MatrixXc U = R;
    for (int j = 0; j < p_; ++j) {
        const double d = std::abs(R(j, j));
        if (!(d > 0.0) || !std::isfinite(d)) throw NumericalFailure("solution block lost rank");
        logd(j) = std::log(d);
        U.row(j) /= d;
    }
    const MatrixXc uinv = U.triangularView<Eigen::Upper>().solve(MatrixXc::Identity(p_, p_));
    const MatrixXc rinv = R.triangularView<Eigen::Upper>().solve(MatrixXc::Identity(p_, p_));
    MatrixXc Q = Y * rinv;
    Y = Q;
    Eigen::Map<MatrixXc> K(k1.data(), n_, p_);
    K = (K * rinv).eval();
    // Fold the pending contributions in and move every stored Gram to the new basis.
    running_ = merge(running_, {fresh_, Eigen::VectorXd::Zero(p_)});
    fresh_.setZero();
    congruence(running_, uinv, logd);
    for (auto& gm : grams_) congruence(gm, uinv, logd);
    log_growth_ += logd;
}

void BlockWindowIntegrator::next(const TailWindow& w) {
    auto rhs = [this](double x, const VectorXc& y, VectorXc& dy) { sys_.block(x, y, dy, p_); };
    bool accumulate = false;
    VectorXc v(p_);
    auto observer = [&](const DenseStep& st, VectorXc& y, VectorXc& k1) {
        if (accumulate) {
            const double l = st.lo(), r = st.hi();
            for (std::size_t q = 0; q < gl_x.size(); ++q) {
                const double t = (l + gl_x[q] * (r - l) - st.x0) / st.h;
                const double t1 = 1.0 - t;
                for (int c = 0; c < p_; ++c) {
                    const Eigen::Index i = c * n_;
                    v(c) = st.rc[0](i) + t * (st.rc[1](i) + t1 * (st.rc[2](i) + t * (st.rc[3](i) + t1 * st.rc[4](i))));
                }
                fresh_.noalias() += gl_w[q] * (r - l) * v.conjugate() * v.transpose();
            }
        }
        double big = 0.0, small = kInf;
        for (int c = 0; c < p_; ++c) {
            const double m = y.segment(c * n_, n_).norm();
            big = std::max(big, m);
            small = std::min(small, m);
        }
        if (big > 1e2 || small < 1e-2) orthonormalize(y, k1);
    };
    const bool forward = std::abs(w.lo - x_) <= std::abs(w.hi - x_);
    const double near = forward ? w.lo : w.hi, far = forward ? w.hi : w.lo;
    if (near != x_) y_ = dopri5(rhs, x_, y_, near, opt_, observer);
    running_ = {MatrixXc::Zero(p_, p_), Eigen::VectorXd::Zero(p_)};
    fresh_.setZero();
    accumulate = true;
    y_ = dopri5(rhs, near, y_, far, opt_, observer);
    running_ = merge(running_, {fresh_, Eigen::VectorXd::Zero(p_)});
    fresh_.setZero();
    grams_.push_back(running_);
    x_ = far;
}

std::vector<double> pencil_ratios(std::span<const ScaledGram> late, std::span<const ScaledGram> early) {
    if (late.empty() || early.empty()) throw InvalidInput("pencil needs Grams on both sides");
    ScaledGram L = late[0], R = early[0];
    for (std::size_t i = 1; i < late.size(); ++i) L = merge(L, late[i]);
    for (std::size_t i = 1; i < early.size(); ++i) R = merge(R, early[i]);
    const Eigen::Index p = R.g.rows();
    Eigen::VectorXd d(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        d(i) = R.log_diagonal(i);
        if (!std::isfinite(d(i))) return {};
    }
    MatrixXc rt(p, p), lt(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) {
            const double er = R.log_scale(i) + R.log_scale(j) - 0.5 * (d(i) + d(j));
            const double el = std::min(600.0, L.log_scale(i) + L.log_scale(j) - 0.5 * (d(i) + d(j)));
            rt(i, j) = R.g(i, j) * std::exp(er);
            lt(i, j) = L.g(i, j) * std::exp(el);
        }
    rt = 0.5 * (rt + rt.adjoint()).eval();
    lt = 0.5 * (lt + lt.adjoint()).eval();
    if (!rt.allFinite() || !lt.allFinite()) return {};
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(rt);
    if (es.eigenvalues().minCoeff() < 1e-10) return {};
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXc> ges(lt, rt);
    std::vector<double> mu(ges.eigenvalues().data(), ges.eigenvalues().data() + p);
    return mu;
}

std::vector<double> window_log_norms(const DifferentialExpression& expr, cplx lambda, double x_start,
                                     const VectorXc& y0, std::span<const TailWindow> windows_in_order,
                                     const IntegrationOptions& opt) {
    std::vector<double> out;
    if (y0.cwiseAbs().maxCoeff() == 0.0) {
        out.assign(windows_in_order.size(), -kInf);
        return out;
    }
    BlockWindowIntegrator bi(expr, lambda, x_start, y0, opt);
    for (const auto& w : windows_in_order) bi.next(w);
    for (const auto& g : bi.grams()) out.push_back(g.log_diagonal(0) + 2.0 * bi.log_growth()(0));
    return out;
}

}  // namespace selfadj
