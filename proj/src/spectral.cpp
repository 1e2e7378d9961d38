#include "selfadj/spectral.hpp"

#include <algorithm>
#include <boost/math/tools/toms748_solve.hpp>
#include <cmath>
#include <numbers>

#include "selfadj/endpoints.hpp"
#include "selfadj/errors.hpp"

namespace selfadj {

namespace {

constexpr cplx I{0.0, 1.0};
constexpr double kAcceptMismatch = 1e-7;  // refined minima above this are not eigenvalues
constexpr double kNullSingular = 1e-6;    // singular values counted for the multiplicity
constexpr double kEigenTol = 1e-6;        // eigenfunction(): E must reach this mismatch

double scale_of(double e) { return std::max(1.0, std::abs(e)); }

std::vector<double> scan_grid(const EnergyWindow& w, int n) {
    std::vector<double> g(static_cast<std::size_t>(n));
    const bool logpos = w.e_min > 0 && w.e_max / w.e_min > 100.0;
    const bool logneg = w.e_max < 0 && w.e_min / w.e_max > 100.0;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / (n - 1);
        double e;
        if (logpos)
            e = w.e_min * std::pow(w.e_max / w.e_min, t);
        else if (logneg)
            e = w.e_min * std::pow(w.e_max / w.e_min, t);
        else
            e = w.e_min + t * (w.e_max - w.e_min);
        g[static_cast<std::size_t>(i)] = e;
    }
    g.back() = w.e_max;
    return g;
}

/// Golden section; the mismatch is V-shaped at a zero, so no parabolic steps.
template <class F>
double golden_min(F f, double lo, double hi, double tol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - r * (hi - lo), d = lo + r * (hi - lo);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    return fc < fd ? c : d;
}

template <class F>
double bracket_root(F f, double lo, double hi, double flo, double fhi, double tol) {
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(
        f, lo, hi, flo, fhi, [tol](double x, double y) { return std::abs(y - x) <= tol; }, iters);
    return 0.5 * (r.first + r.second);
}

struct Candidate {
    double e;
    double residual;
    int multiplicity;
};

std::vector<Candidate> dedupe(std::vector<Candidate> c) {
    std::sort(c.begin(), c.end(), [](const Candidate& x, const Candidate& y) { return x.e < y.e; });
    std::vector<Candidate> out;
    for (const auto& x : c) {
        if (!out.empty() && std::abs(x.e - out.back().e) <= 1e-8 * scale_of(x.e)) {
            if (x.residual < out.back().residual) out.back() = x;
            continue;
        }
        out.push_back(x);
    }
    return out;
}

// Both ends regular: zeros of the n x n map Ca + Cb Phi(E).
class RegularProblem {
public:
    RegularProblem(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                   const SpectralOptions& opt)
        : expr_(expr), iv_(iv), opt_(opt), n_(expr.order()) {
        if (kind_of(bc) == BcKind::SingularAsymptotic)
            throw InvalidInput("bc/endpoint mismatch: asymptotic condition at a regular end");
        lc_ = linear_conditions(bc, n_);
        if (lc_.rows() != n_)
            throw InvalidInput("bc/endpoint mismatch: two regular ends need " + std::to_string(n_) + " conditions");
    }

    struct Eval {
        Eigen::VectorXd sv;
        VectorXc null;
        cplx det;
    };

    Eval at(double e) const {
        const MatrixXc phi = transfer_matrix(expr_, e, iv_.a, iv_.b, opt_.integration);
        const MatrixXc cb = lc_.Cb * phi;
        MatrixXc m = lc_.Ca + cb;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m.row(i) /= std::sqrt(lc_.Ca.row(i).squaredNorm() + cb.row(i).squaredNorm());
        Eigen::JacobiSVD<MatrixXc> svd(m, Eigen::ComputeFullV);
        return {svd.singularValues(), svd.matrixV().col(n_ - 1), m.determinant()};
    }

    double sigma(double e) const { return at(e).sv(n_ - 1); }

    Candidate candidate(double e) const {
        const Eval v = at(e);
        int mult = 0;
        for (Eigen::Index i = 0; i < v.sv.size(); ++i)
            if (v.sv(i) <= kNullSingular) ++mult;
        return {e, v.sv(n_ - 1), std::max(mult, 1)};
    }

    std::vector<Candidate> solve(const EnergyWindow& w) const {
        const auto grid = scan_grid(w, opt_.scan_points);
        const std::size_t m = grid.size();
        std::vector<cplx> det(m);
        std::vector<double> sig(m);
        for (std::size_t i = 0; i < m; ++i) {
            const Eval v = at(grid[i]);
            det[i] = v.det;
            sig[i] = v.sv(n_ - 1);
        }
        // Real characteristic function up to a constant phase?
        std::size_t kmax = 0;
        for (std::size_t i = 1; i < m; ++i)
            if (std::abs(det[i]) > std::abs(det[kmax])) kmax = i;
        const cplx rot = std::abs(det[kmax]) > 0 ? std::conj(det[kmax]) / std::abs(det[kmax]) : cplx(1.0);
        double imag = 0.0;
        for (const auto& d : det) imag = std::max(imag, std::abs((rot * d).imag()));
        const bool real_phase = imag <= 1e-6 * std::abs(det[kmax]);

        std::vector<Candidate> found;
        std::vector<std::pair<double, double>> bracketed;
        if (real_phase) {
            auto r = [&](double e) { return (rot * at(e).det).real(); };
            for (std::size_t i = 0; i + 1 < m; ++i) {
                const double a = (rot * det[i]).real(), b = (rot * det[i + 1]).real();
                if (a == 0.0) {
                    found.push_back(candidate(grid[i]));
                } else if (a * b < 0) {
                    const double e =
                        bracket_root(r, grid[i], grid[i + 1], a, b, opt_.e_tol * scale_of(grid[i]));
                    const Candidate c = candidate(e);
                    if (c.residual <= kAcceptMismatch) found.push_back(c);
                    bracketed.emplace_back(grid[i], grid[i + 1]);
                }
            }
        }
        // Touching zeros (degenerate levels) and complex determinants: minima of the smallest singular value.
        for (std::size_t i = 0; i < m; ++i) {
            const double left = i > 0 ? sig[i - 1] : kInf, right = i + 1 < m ? sig[i + 1] : kInf;
            if (!(sig[i] <= left && sig[i] <= right)) continue;
            const double lo = grid[i > 0 ? i - 1 : i], hi = grid[i + 1 < m ? i + 1 : i];
            if (std::any_of(bracketed.begin(), bracketed.end(),
                            [&](const auto& b) { return b.second >= lo && b.first <= hi; }))
                continue;
            const double e =
                golden_min([&](double x) { return sigma(x); }, lo, hi, opt_.e_tol * scale_of(grid[i]));
            const Candidate c = candidate(e);
            if (c.residual <= kAcceptMismatch && e > w.e_min && e < w.e_max) found.push_back(c);
        }
        return dedupe(std::move(found));
    }

    SolutionTrajectory eigenfunction(double e) const {
        const Eval v = at(e);
        if (v.sv(n_ - 1) > kEigenTol) throw InvalidInput("E is not an eigenvalue (mismatch " +
                                                         std::to_string(v.sv(n_ - 1)) + ")");
        DerivativeStack s{iv_.a, std::vector<cplx>(v.null.data(), v.null.data() + n_)};
        return integrate(expr_, e, s, iv_.b, {}, opt_.integration);
    }

private:
    const DifferentialExpression& expr_;
    Interval iv_;
    SpectralOptions opt_;
    int n_;
    LinearConditions lc_;
};

// At least one singular end, n = 2: match the two end solutions.
class MatchingProblem {
public:
    MatchingProblem(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                    const SpectralOptions& opt)
        : expr_(expr), iv_(iv), opt_(opt) {
        if (!expr.is_schrodinger()) throw Unsupported("singular-end spectra are computed for -d^2/dx^2 + V");
        cap_ = opt.max_x > 0 ? opt.max_x : std::ldexp(1.0, 14);
        const bool reg[2] = {classify_endpoint(expr, iv, Side::Left) == EndpointKind::Regular,
                             classify_endpoint(expr, iv, Side::Right) == EndpointKind::Regular};
        if (const auto* sa = std::get_if<SingularAsymptotic>(&bc)) {
            const auto rep = validate(bc, 2);
            if (!rep.ok) throw InvalidInput("invalid boundary condition: " + rep.violated);
            const auto& v = expr.potential();
            if (reg[0] || iv.a != 0.0)
                throw InvalidInput("bc/endpoint mismatch: asymptotic condition needs a singular end at 0");
            if (v.table() || v.powers().size() != 1 || v.powers()[0].p != -2.0 ||
                std::abs(v.powers()[0].c + sa->alpha) > 1e-12 * sa->alpha)
                throw InvalidInput("bc/endpoint mismatch: asymptotic condition is for V = -alpha/x^2 with the same alpha");
            if (iv.finite(Side::Right))
                throw Unsupported("asymptotic condition combined with a finite right end");
            left_ = {EndKind::Asymptotic, {}, *sa};
            right_ = {EndKind::Decaying, {}, {}};
            return;
        }
        const LinearConditions lc = linear_conditions(bc, 2);
        EndSpec* ends[2] = {&left_, &right_};
        const MatrixXc* cs[2] = {&lc.Ca, &lc.Cb};
        for (int s = 0; s < 2; ++s) {
            int only = 0, touching = 0;
            Eigen::Index row = -1;
            for (Eigen::Index i = 0; i < lc.rows(); ++i) {
                const bool here = cs[s]->row(i).norm() > 0, there = cs[1 - s]->row(i).norm() > 0;
                if (here) ++touching;
                if (here && !there) {
                    ++only;
                    row = i;
                }
                if (here && there) throw InvalidInput("bc/endpoint mismatch: coupled conditions need two regular ends");
            }
            if (reg[s]) {
                if (only != 1) throw InvalidInput("bc/endpoint mismatch: a regular end needs one condition");
                Eigen::JacobiSVD<MatrixXc> svd(cs[s]->row(row), Eigen::ComputeFullV);
                VectorXc k = svd.matrixV().col(1);
                Eigen::Index imax;
                k.cwiseAbs().maxCoeff(&imax);
                k *= std::abs(k(imax)) / k(imax);
                *ends[s] = {EndKind::Stack, k, {}};
            } else {
                if (touching > 0) throw InvalidInput("bc/endpoint mismatch: condition imposed at a limit-point end");
                if (iv.finite(s == 0 ? Side::Left : Side::Right))
                    throw Unsupported("finite singular end without an asymptotic condition");
                *ends[s] = {EndKind::Decaying, {}, {}};
            }
        }
    }

    struct Solution {
        SolutionTrajectory left, right;
        double xm = 0.0;
        double g = 0.0;
    };

    Solution solve_at(double e) const {
        const Geometry geo = geometry(e);
        Solution s;
        s.xm = geo.xm;
        s.left = integrate(expr_, e, start(left_, Side::Left, geo.xl, e), geo.xm, {}, opt_.integration);
        s.right = integrate(expr_, e, start(right_, Side::Right, geo.xr, e), geo.xm, {}, opt_.integration);
        const VectorXc ul = s.left.state(geo.xm), ur = s.right.state(geo.xm);
        s.g = (wronskian(expr_, ul, ur) / (ul.norm() * ur.norm())).real();
        return s;
    }

    double g(double e) const { return solve_at(e).g; }

    std::vector<Candidate> solve(const EnergyWindow& w) const {
        const auto grid = scan_grid(w, opt_.scan_points);
        std::vector<double> gv(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) gv[i] = g(grid[i]);
        std::vector<Candidate> found;
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            double e;
            if (gv[i] == 0.0)
                e = grid[i];
            else if (gv[i] * gv[i + 1] < 0)
                e = bracket_root([&](double x) { return g(x); }, grid[i], grid[i + 1], gv[i], gv[i + 1],
                                 opt_.e_tol * scale_of(grid[i]));
            else
                continue;
            // Jumps of the truncation geometry can flip the sign without a zero.
            const double r = std::abs(g(e));
            if (r <= kAcceptMismatch) found.push_back({e, r, 1});
        }
        return dedupe(std::move(found));
    }

    SolutionTrajectory eigenfunction(double e) const {
        const Solution s = solve_at(e);
        if (std::abs(s.g) > kEigenTol)
            throw InvalidInput("E is not an eigenvalue (mismatch " + std::to_string(std::abs(s.g)) + ")");
        const VectorXc ul = s.left.state(s.xm), ur = s.right.state(s.xm);
        const cplx c = ur.dot(ul) / ur.squaredNorm();
        return s.left.spliced(s.right.scaled(c));
    }

private:
    enum class EndKind { Stack, Asymptotic, Decaying };
    struct EndSpec {
        EndKind kind = EndKind::Decaying;
        VectorXc stack;
        SingularAsymptotic sa;
    };
    struct Geometry {
        double xl, xr, xm;
    };

    double v(double x) const { return expr_.potential()(x); }

    DerivativeStack start(const EndSpec& end, Side side, double x, double e) const {
        switch (end.kind) {
            case EndKind::Stack:
                return {x, {end.stack(0), end.stack(1)}};
            case EndKind::Asymptotic:
                return singular_start(end.sa, e, x);
            case EndKind::Decaying: {
                const double q = std::sqrt(std::max(v(x) - e, 0.0));
                return {x, {1.0, side == Side::Right ? -q : q}};
            }
        }
        return {};
    }

    /// Walks from x0 in direction dir until the forbidden-region action reaches the target.
    double advance(double x0, double dir, double e) const {
        double x = x0, act = 0.0, q = std::sqrt(std::max(v(x) - e, 0.0));
        while (act < opt_.decay_action) {
            double h = 0.01 * std::max(std::abs(x), 1e-2);
            if (q > 0) h = std::min(h, 0.1 / q);
            const double xn = x + dir * h;
            if (std::abs(xn) >= cap_) return dir * cap_;
            const double qn = std::sqrt(std::max(v(xn) - e, 0.0));
            act += 0.5 * h * (q + qn);
            x = xn;
            q = qn;
        }
        return x;
    }

    Geometry geometry(double e) const {
        Geometry g{};
        if (left_.kind == EndKind::Stack) g.xl = iv_.a;
        if (left_.kind == EndKind::Asymptotic)
            g.xl = std::min(std::ldexp(1.0, -20) / left_.sa.mu0, 1e-3 / std::sqrt(std::max(std::abs(e), 1e-300)));
        if (right_.kind == EndKind::Stack) g.xr = iv_.b;
        const double lo = left_.kind == EndKind::Decaying ? -cap_ : g.xl;
        const double hi = right_.kind == EndKind::Decaying ? cap_ : g.xr;
        std::vector<double> xs;
        for (int i = 1; i < 2000; ++i) xs.push_back(lo + (hi - lo) * i / 2000.0);
        for (int j = -320; j <= 224; ++j) {
            const double p = std::exp2(j / 16.0);
            for (double x : {p, -p})
                if (x > lo && x < hi) xs.push_back(x);
        }
        std::sort(xs.begin(), xs.end());
        double first = kInf, last = -kInf, best = xs.front(), vbest = kInf;
        for (double x : xs) {
            const double q = v(x) - e;
            if (q < 0) {
                first = std::min(first, x);
                last = std::max(last, x);
            }
            if (q < vbest) {
                vbest = q;
                best = x;
            }
        }
        g.xm = std::isfinite(last) ? last : best;
        const double xm_left = std::isfinite(first) ? first : g.xm;
        if (left_.kind != EndKind::Decaying && g.xm - g.xl < 1e-6 * std::max(1.0, std::abs(g.xl)))
            g.xm = g.xl + 0.5 * std::min(1.0, hi - g.xl);
        if (right_.kind == EndKind::Stack && g.xr - g.xm < 1e-6 * std::max(1.0, std::abs(g.xr)))
            g.xm = g.xr - 0.5 * std::min(1.0, g.xr - lo);
        if (left_.kind == EndKind::Decaying) g.xl = std::min(advance(xm_left, -1.0, e), g.xm - 1.0);
        if (right_.kind == EndKind::Decaying) g.xr = std::max(advance(g.xm, 1.0, e), g.xm + 1.0);
        return g;
    }

    const DifferentialExpression& expr_;
    Interval iv_;
    SpectralOptions opt_;
    double cap_ = 0.0;
    EndSpec left_, right_;
};

bool both_regular(const DifferentialExpression& expr, const Interval& iv) {
    return classify_endpoint(expr, iv, Side::Left) == EndpointKind::Regular &&
           classify_endpoint(expr, iv, Side::Right) == EndpointKind::Regular;
}

void check_inputs(const Interval& iv, const SpectralOptions& opt) {
    if (!iv.valid()) throw InvalidInput("invalid interval");
    if (opt.scan_points < 3) throw InvalidInput("scan needs at least 3 points");
}

SolutionTrajectory normalized(SolutionTrajectory t) {
    const double n2 = t.norm_squared();
    if (!(n2 > 0.0) || !std::isfinite(n2)) throw NumericalFailure("eigenfunction has no finite nonzero norm");
    // Fix the phase at the largest sample.
    cplx ref = 0.0;
    for (double x : t.grid()) {
        const cplx v = t.value(x);
        if (std::abs(v) > std::abs(ref)) ref = v;
    }
    return t.scaled(std::abs(ref) / ref / std::sqrt(n2));
}

}  // namespace

MatrixXc transfer_matrix(const DifferentialExpression& expr, cplx lambda, double a, double b,
                         const IntegrationOptions& opt) {
    const int n = expr.order();
    StackSystem sys(expr, lambda);
    const VectorXc y0 = Eigen::Map<const VectorXc>(MatrixXc::Identity(n, n).eval().data(), n * n);
    const VectorXc y = dopri5([&](double x, const VectorXc& u, VectorXc& du) { sys.block(x, u, du, n); }, a, y0, b,
                              opt);
    return Eigen::Map<const MatrixXc>(y.data(), n, n);
}

DerivativeStack singular_start(const SingularAsymptotic& bc, double e, double x0) {
    const double k = bc.varkappa();
    auto branch = [&](cplx s, cplx& val, cplx& der) {
        cplx a = 1.0;
        val = der = 0.0;
        for (int j = 0; j < 400; ++j) {
            const cplx p = s + 2.0 * j;
            const cplx term = a * std::pow(cplx(x0), p);
            val += term;
            der += p * term / x0;
            if (j > 0 && std::abs(term) <= 1e-18 * std::abs(val)) break;
            a *= -e / ((p + 2.0) * (p + 1.0) + bc.alpha);
        }
        const cplx m = std::pow(cplx(bc.mu0), s);
        val *= m;
        der *= m;
    };
    cplx vp, dp, vm, dm;
    branch(cplx(0.5, k), vp, dp);
    branch(cplx(0.5, -k), vm, dm);
    const cplx ph = std::exp(I * bc.vartheta), half = std::exp(-0.5 * I * bc.vartheta);
    return {x0, {half * (vp + ph * vm), half * (dp + ph * dm)}};
}

double mismatch(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc, double e,
                const SpectralOptions& opt) {
    check_inputs(iv, opt);
    if (both_regular(expr, iv)) return RegularProblem(expr, iv, bc, opt).sigma(e);
    return std::abs(MatchingProblem(expr, iv, bc, opt).g(e));
}

Spectrum eigenvalues(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                     const EnergyWindow& window, int max_count, const SpectralOptions& opt) {
    check_inputs(iv, opt);
    if (!(window.e_min < window.e_max) || !std::isfinite(window.e_min) || !std::isfinite(window.e_max))
        throw InvalidInput("energy window must be finite with e_min < e_max");
    if (max_count < 0) throw InvalidInput("max_count must be non-negative");
    Spectrum sp;
    sp.window = window;
    std::vector<Candidate> found;
    if (both_regular(expr, iv)) {
        sp.method = "determinant";
        found = RegularProblem(expr, iv, bc, opt).solve(window);
    } else {
        if (expr.order() != 2) throw Unsupported("singular-end spectra are computed for n=2");
        sp.method = "matching";
        found = MatchingProblem(expr, iv, bc, opt).solve(window);
    }
    if (static_cast<int>(found.size()) > max_count) found.resize(static_cast<std::size_t>(max_count));
    for (const auto& c : found) {
        sp.eigenvalues.push_back(c.e);
        sp.residuals.push_back(c.residual);
        sp.multiplicity.push_back(c.multiplicity);
        if (opt.with_eigenfunctions) sp.eigenfunctions.push_back(eigenfunction(expr, iv, bc, c.e, opt));
    }
    return sp;
}

Spectrum momentum_spectrum(double l, double vartheta, int k_min, int k_max) {
    if (!(l > 0.0) || !std::isfinite(l)) throw InvalidInput("length must be positive");
    Spectrum sp;
    sp.method = "closed_form";
    for (int k = k_min; k <= k_max; ++k) {
        sp.eigenvalues.push_back((vartheta + 2.0 * std::numbers::pi * k) / l);
        sp.residuals.push_back(0.0);
        sp.multiplicity.push_back(1);
    }
    std::sort(sp.eigenvalues.begin(), sp.eigenvalues.end());
    if (!sp.eigenvalues.empty()) sp.window = {sp.eigenvalues.front(), sp.eigenvalues.back()};
    return sp;
}

SolutionTrajectory eigenfunction(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                                 double e, const SpectralOptions& opt) {
    check_inputs(iv, opt);
    if (both_regular(expr, iv)) {
        const auto t = normalized(RegularProblem(expr, iv, bc, opt).eigenfunction(e));
        const double r = residual(bc, t.stack(iv.a), t.stack(iv.b)).norm();
        if (r > kEigenTol * (1.0 + t.state(iv.a).norm() + t.state(iv.b).norm()))
            throw NumericalFailure("eigenfunction misses the boundary condition");
        return t;
    }
    if (expr.order() != 2) throw Unsupported("singular-end spectra are computed for n=2");
    return normalized(MatchingProblem(expr, iv, bc, opt).eigenfunction(e));
}

}  // namespace selfadj
