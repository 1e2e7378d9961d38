#include "selfadj/verify.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "selfadj/endpoints.hpp"
#include "selfadj/errors.hpp"

namespace selfadj {

namespace {

constexpr cplx I{0.0, 1.0};

DerivativeStack stack_of(const DifferentialExpression& expr, const TestFunction& f, double x) {
    const auto d = f(x, expr.order() - 1);
    return quasi_stack(expr, std::span<const cplx>(d.data(), static_cast<std::size_t>(expr.order())), x);
}

}  // namespace

std::vector<cplx> SmoothFunction::derivatives(double x, int upto) const {
    std::vector<cplx> out(static_cast<std::size_t>(upto + 1), cplx{});
    const double t = x - shift;
    for (int k = 0; k <= upto; ++k) {
        // k-th derivative of sum_j p_j t^j
        cplx s{};
        for (int j = static_cast<int>(poly.size()) - 1; j >= k; --j) {
            double fall = 1.0;
            for (int q = 0; q < k; ++q) fall *= (j - q);
            s = s * t + fall * poly[static_cast<std::size_t>(j)];
        }
        cplx e{};
        for (const auto& [a, b] : exps) e += a * std::pow(b, k) * std::exp(b * x);
        out[static_cast<std::size_t>(k)] = s + e;
    }
    return out;
}

TestFunction SmoothFunction::function() const {
    return [self = *this](double x, int upto) { return self.derivatives(x, upto); };
}

SmoothFunction random_smooth(std::mt19937_64& rng, int degree, int exponentials) {
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SmoothFunction f;
    for (int j = 0; j <= degree; ++j) f.poly.emplace_back(g(rng), g(rng));
    for (int k = 0; k < exponentials; ++k) f.exps.push_back({cplx(g(rng), g(rng)), cplx(u(rng), 3.0 * u(rng))});
    return f;
}

FormReport lagrange_check(const DifferentialExpression& expr, const TestFunction& chi, const TestFunction& psi,
                          Segment seg, double tol) {
    if (!(seg.alpha < seg.beta) || !std::isfinite(seg.alpha) || !std::isfinite(seg.beta))
        throw InvalidInput("segment must be finite with alpha < beta");
    const int n = expr.order();
    const RawExpression raw = expr.raw();
    auto integrand = [&](double x) {
        const auto dc = chi(x, n), dp = psi(x, n);
        const cplx fc = raw.apply(dc, x), fp = raw.apply(dp, x);
        const cplx v = std::conj(dc[0]) * fp - dp[0] * std::conj(fc);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalFailure("integrand is not finite inside the segment (coefficient singularity?)");
        return v;
    };
    FormReport r;
    r.segment = seg;
    double err = 0.0;
    r.omega_quadrature =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, seg.alpha, seg.beta, 15, 1e-13, &err);
    r.quadrature_error = err;
    if (err > 1e-9 * (1.0 + std::abs(r.omega_quadrature))) throw NumericalFailure("quadrature did not converge");
    r.omega_boundary = local_form(expr, stack_of(expr, chi, seg.beta), stack_of(expr, psi, seg.beta)) -
                       local_form(expr, stack_of(expr, chi, seg.alpha), stack_of(expr, psi, seg.alpha));
    r.discrepancy = std::abs(r.omega_quadrature - r.omega_boundary);
    r.passed = r.discrepancy <= tol * (1.0 + std::abs(r.omega_boundary));
    return r;
}

namespace {

std::vector<double> limit_points(double endpoint, const LimitOptions& opt) {
    if (opt.windows < 6) throw InvalidInput("boundary form limit needs at least 6 windows");
    if (!(opt.ratio > 1.0)) throw InvalidInput("window ratio must exceed 1");
    std::vector<double> xs;
    if (std::isinf(endpoint)) {
        const double a = std::isnan(opt.anchor) ? (endpoint > 0 ? 1.0 : -1.0) : opt.anchor;
        if (a * endpoint <= 0) throw InvalidInput("anchor must lie on the side of the infinite endpoint");
        for (int k = 0; k < opt.windows; ++k) xs.push_back(a * std::pow(opt.ratio, k));
    } else {
        const double a = std::isnan(opt.anchor) ? endpoint + 1.0 : opt.anchor;
        if (a == endpoint) throw InvalidInput("anchor coincides with the endpoint");
        for (int k = 0; k < opt.windows; ++k) xs.push_back(endpoint + (a - endpoint) * std::pow(opt.ratio, -k));
    }
    return xs;
}

BoundaryLimit finish(std::vector<double> xs, std::vector<cplx> vs, double rtol) {
    BoundaryLimit r;
    r.points = std::move(xs);
    r.values = std::move(vs);
    const std::size_t m = r.values.size();
    double vmax = 0.0;
    bool finite = true;
    for (const auto& v : r.values) {
        vmax = std::max(vmax, std::abs(v));
        finite = finite && std::isfinite(v.real()) && std::isfinite(v.imag());
    }
    const cplx a = r.values[m - 3], b = r.values[m - 2], c = r.values[m - 1];
    const double tol = std::max(rtol * vmax, 1e-13);
    r.converged = finite && std::abs(c - b) <= tol && std::abs(b - a) <= tol && std::abs(c - a) <= tol;
    r.value = c;
    // Aitken step when the differences shrink geometrically.
    const cplx d1 = b - a, d2 = c - b, den = d2 - d1;
    if (r.converged && std::abs(den) > 1e-14 * vmax) {
        const cplx l = c - d2 * d2 / den;
        if (std::abs(l - c) <= 10.0 * std::abs(d2)) r.value = l;
    }
    return r;
}

}  // namespace

BoundaryLimit boundary_form_limit(const DifferentialExpression& expr,
                                  const std::function<DerivativeStack(double)>& psi, double endpoint,
                                  const LimitOptions& opt) {
    const auto xs = limit_points(endpoint, opt);
    std::vector<cplx> vs;
    for (double x : xs) {
        const auto s = psi(x);
        vs.push_back(local_form(expr, s, s));
    }
    return finish(xs, std::move(vs), opt.rtol);
}

BoundaryLimit boundary_form_limit(const DifferentialExpression& expr, const SolutionTrajectory& psi, double endpoint,
                                  const LimitOptions& opt) {
    LimitOptions o = opt;
    if (std::isnan(o.anchor) && !std::isinf(endpoint))
        o.anchor = std::abs(psi.lo() - endpoint) < std::abs(psi.hi() - endpoint) ? endpoint + 1.0 : endpoint - 1.0;
    std::vector<double> xs;
    std::vector<cplx> vs;
    for (double x : limit_points(endpoint, o)) {
        if (x < psi.lo() || x > psi.hi()) continue;
        const auto s = psi.stack(x);
        xs.push_back(x);
        vs.push_back(local_form(expr, s, s));
    }
    if (xs.size() < 6) throw InvalidInput("trajectory covers fewer than 6 windows toward the endpoint");
    return finish(xs, std::move(vs), opt.rtol);
}

SolutionTrajectory natural_domain_trajectory(const DifferentialExpression& expr, cplx lambda, const Forcing& chi,
                                             double x_lo, double x_far, const IntegrationOptions& opt) {
    if (expr.order() != 2) throw Unsupported("natural-domain trajectories are built for n=2");
    if (!(x_lo != x_far) || !std::isfinite(x_lo) || !std::isfinite(x_far)) throw InvalidInput("bad segment");
    const double dir = x_far > x_lo ? 1.0 : -1.0;
    // solution decaying toward x_far (WKB slope), any other solution from x_lo
    cplx slope = 0.0;
    if (expr.is_schrodinger()) slope = -dir * std::sqrt(cplx(expr.potential()(x_far)) - lambda);
    const auto far = integrate(expr, lambda, DerivativeStack{x_far, {1.0, slope}}, x_lo, {}, opt);
    const auto near = integrate(expr, lambda, DerivativeStack{x_lo, {0.0, 1.0}}, x_far, {}, opt);
    return dir > 0 ? green_solution(expr, chi, near, far) : green_solution(expr, chi, far, near);
}

SmoothFunction hermite_blend(double a, const std::vector<cplx>& da, double b, const std::vector<cplx>& db) {
    if (da.size() != db.size() || da.empty()) throw InvalidInput("derivative lists differ");
    const int n = static_cast<int>(da.size()), m = 2 * n;
    const double l = b - a;
    // Unknowns: coefficients q_j of t^j with t = (x - a)/l.
    MatrixXc sys = MatrixXc::Zero(m, m);
    VectorXc rhs(m);
    for (int k = 0; k < n; ++k) {
        for (int j = k; j < m; ++j) {
            double fall = 1.0;
            for (int q = 0; q < k; ++q) fall *= (j - q);
            sys(k, j) = (j == k) ? fall : 0.0;
            sys(n + k, j) = fall;
        }
        rhs(k) = da[static_cast<std::size_t>(k)] * std::pow(l, k);
        rhs(n + k) = db[static_cast<std::size_t>(k)] * std::pow(l, k);
    }
    const VectorXc q = sys.fullPivLu().solve(rhs);
    SmoothFunction f;
    f.shift = a;
    for (int j = 0; j < m; ++j) f.poly.push_back(q(j) / std::pow(l, j));
    return f;
}

ProbeReport symmetry_probe(const DifferentialExpression& expr, const Interval& iv, const BoundaryCondition& bc,
                           int sample_count, unsigned seed) {
    if (!iv.valid()) throw InvalidInput("invalid interval");
    if (sample_count < 1) throw InvalidInput("sample_count must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    auto rc = [&] { return cplx(g(rng), g(rng)); };
    ProbeReport rep;
    rep.samples = sample_count;

    if (const auto* sa = std::get_if<SingularAsymptotic>(&bc)) {
        // [psi, psi](0) = 2 i mu0 kappa (|c+|^2 - |c-|^2) for psi ~ c+ u+ + c- u-; the far end is limit point.
        for (int s = 0; s < sample_count; ++s) {
            const cplx cp = rc();
            const cplx cm = std::exp(I * sa->vartheta) * cp;
            const double nrm = std::norm(cp) + std::norm(cm);
            const cplx d = -2.0 * I * sa->mu0 * sa->varkappa() * (std::norm(cp) - std::norm(cm)) / nrm;
            rep.max_delta = std::max(rep.max_delta, std::abs(d));
        }
        return rep;
    }

    const int n = expr.order();
    const LinearConditions lc = linear_conditions(bc, n, false);
    const bool reg[2] = {classify_endpoint(expr, iv, Side::Left) == EndpointKind::Regular,
                         classify_endpoint(expr, iv, Side::Right) == EndpointKind::Regular};
    // Limit-point (singular) ends contribute zero boundary data.
    const Eigen::Index extra = (reg[0] ? 0 : n) + (reg[1] ? 0 : n);
    MatrixXc m = MatrixXc::Zero(lc.rows() + extra, 2 * n);
    m.topLeftCorner(lc.rows(), n) = lc.Ca;
    m.topRightCorner(lc.rows(), n) = lc.Cb;
    Eigen::Index r = lc.rows();
    if (!reg[0]) m.block(r, 0, n, n).setIdentity(), r += n;
    if (!reg[1]) m.block(r, n, n, n).setIdentity();
    Eigen::JacobiSVD<MatrixXc> svd(m, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10 * std::max(sv(0), 1e-300)) ++rank;
    const MatrixXc k = svd.matrixV().rightCols(2 * n - rank);
    if (k.cols() == 0) return rep;

    for (int s = 0; s < sample_count; ++s) {
        VectorXc c(k.cols());
        for (Eigen::Index i = 0; i < c.size(); ++i) c(i) = rc();
        VectorXc v = k * c;
        v /= v.norm();
        DerivativeStack sa{reg[0] ? iv.a : 0.0, {}}, sb{reg[1] ? iv.b : 0.0, {}};
        for (int i = 0; i < n; ++i) {
            sa.values.push_back(v(i));
            sb.values.push_back(v(n + i));
        }
        const cplx d = local_form(expr, sb, sb) - local_form(expr, sa, sa);
        rep.max_delta = std::max(rep.max_delta, std::abs(d));
        if (reg[0] && reg[1]) {
            const auto f = hermite_blend(iv.a, ordinary_from_stack(expr, sa), iv.b, ordinary_from_stack(expr, sb));
            const auto fr = lagrange_check(expr, f.function(), f.function(), {iv.a, iv.b});
            rep.max_lagrange_discrepancy = std::max(rep.max_lagrange_discrepancy, std::abs(fr.omega_quadrature - d));
        }
    }
    return rep;
}

}  // namespace selfadj
