#include "selfadj/endpoints.hpp"

#include <algorithm>
#include <cmath>

#include "selfadj/errors.hpp"

namespace selfadj {

const char* to_string(EndpointKind k) { return k == EndpointKind::Regular ? "regular" : "singular"; }

namespace {

bool is_integer(double p) { return std::round(p) == p; }

/// Is the power part of c locally integrable near the finite point e?
bool powers_integrable(const Coefficient& c, double e) {
    for (const auto& t : c.powers()) {
        if (is_integer(t.p) && t.p >= 0) continue;
        if (e > 0) continue;
        if (e < 0) {
            if (!is_integer(t.p)) return false;
            continue;
        }
        if (t.p <= -1.0) return false;
    }
    return true;
}

bool reciprocal_integrable(const Coefficient& f, double e) {
    const double v = f(e);
    if (std::isfinite(v) && v != 0.0) return true;
    if (e != 0.0 || f.table()) return false;
    // Near 0 the lowest power dominates.
    double pmin = kInf;
    for (const auto& t : f.powers()) pmin = std::min(pmin, t.p);
    if (pmin < 0) return true;  // f blows up, 1/f -> 0
    return pmin < 1.0;
}

}  // namespace

EndpointKind classify_endpoint(const DifferentialExpression& expr, const Interval& iv, Side side) {
    if (!iv.valid()) throw InvalidInput("invalid interval");
    if (!iv.finite(side)) return EndpointKind::Singular;
    const double e = iv.endpoint(side);
    const int n = expr.order();
    for (int k = 0; 2 * k < n; ++k)
        if (!powers_integrable(expr.even(k), e)) return EndpointKind::Singular;
    for (int k = 1; 2 * k - 1 < n; ++k)
        if (!powers_integrable(expr.odd(k), e)) return EndpointKind::Singular;
    if (!reciprocal_integrable(expr.leading(), e)) return EndpointKind::Singular;
    return EndpointKind::Regular;
}

std::optional<LimitPointCertificate> weyl_fastpath(const DifferentialExpression& expr, double endpoint) {
    if (!expr.is_schrodinger() || !std::isinf(endpoint)) return std::nullopt;
    const Coefficient& v = expr.potential();
    if (v.table()) return std::nullopt;
    const auto& pw = v.powers();
    if (pw.empty()) return LimitPointCertificate{"square_integrable_potential"};
    const double sgn = endpoint > 0 ? 1.0 : -1.0;
    for (const auto& t : pw)
        if (sgn < 0 && !is_integer(t.p)) return std::nullopt;
    if (std::all_of(pw.begin(), pw.end(), [](const PowerTerm& t) { return t.p < -0.5; }))
        return LimitPointCertificate{"square_integrable_potential"};
    const PowerTerm& lead = pw.back();  // powers are sorted by exponent
    const double lead_sign = lead.c * ((sgn < 0 && static_cast<long long>(lead.p) % 2 != 0) ? -1.0 : 1.0);
    if (lead.p <= 2.0 || lead_sign > 0) return LimitPointCertificate{"quadratic_lower_bound"};
    return std::nullopt;
}

namespace {

std::vector<TailWindow> admissible_windows(double e, double anchor, const DeficiencyOptions& opt) {
    std::vector<TailWindow> w;
    const double cap = std::ldexp(1.0, opt.max_exponent);
    const double s = std::abs(anchor - e);
    for (const auto& t : tail_windows(e, anchor, 128)) {
        if (std::isinf(e)) {
            if (std::max(std::abs(t.lo), std::abs(t.hi)) > cap) break;
        } else if (std::min(std::abs(t.lo - e), std::abs(t.hi - e)) < s * std::ldexp(1.0, -opt.min_exponent)) {
            break;
        }
        w.push_back(t);
    }
    return w;
}

struct PencilCount {
    int l2 = 0;
    int undecided = 0;
    bool reliable = false;
    std::vector<double> mu;
};

/// Pencil over the 2b windows ending before `end`: late = last b, early = the b before. Thresholds scale with b.
PencilCount pencil_block(const std::vector<ScaledGram>& grams, std::size_t end, Eigen::Index dim, std::size_t b,
                         double decay) {
    std::vector<ScaledGram> early, late;
    for (std::size_t i = 0; i < b; ++i) {
        early.push_back(grams[end - 2 * b + i].leading(dim));
        late.push_back(grams[end - b + i].leading(dim));
    }
    PencilCount pc;
    pc.mu = pencil_ratios(late, early);
    if (pc.mu.empty()) return pc;
    pc.reliable = true;
    const double thr = std::pow(decay, static_cast<double>(b));
    for (double m : pc.mu) {
        if (m <= thr)
            ++pc.l2;
        else if (m < 1.0 - 1e-6)
            ++pc.undecided;
    }
    return pc;
}

/// Short blocks first; longer ones average out slow oscillation (log-periodic solutions) that spreads the pencil.
PencilCount pencil_count(const std::vector<ScaledGram>& grams, std::size_t end, Eigen::Index dim,
                         const TailOptions& opt) {
    const std::size_t bmax = static_cast<std::size_t>(opt.agree_windows);
    PencilCount pc;
    for (std::size_t b = std::max<std::size_t>(1, bmax / 2); b <= bmax && 2 * b <= end; b *= 2) {
        pc = pencil_block(grams, end, dim, b, opt.decay_ratio);
        if (pc.reliable && pc.undecided == 0) break;
    }
    return pc;
}

}  // namespace

SignCount count_l2_solutions(const DifferentialExpression& expr, const Interval& iv, Side side, cplx lambda,
                             const DeficiencyOptions& opt) {
    const int n = expr.order();
    const double e = iv.endpoint(side);
    const double anchor = iv.anchor();
    const auto windows = admissible_windows(e, anchor, opt);
    const std::size_t wmin = static_cast<std::size_t>(std::max(opt.tail.min_windows, opt.tail.agree_windows)) + 1;
    if (windows.size() < wmin) throw InvalidInput("not enough room for the tail windows toward the endpoint");

    SignCount out;
    const MatrixXc identity = MatrixXc::Identity(n, n);
    BlockWindowIntegrator fw(expr, lambda, anchor, identity, opt.integration);
    std::size_t used = 0;
    auto extend = [&](std::size_t count) {
        while (used < count) fw.next(windows[used++]);
    };
    // The trailing windows decide; add windows until the count repeats.
    extend(wmin);
    PencilCount prev = pencil_count(fw.grams(), used - 1, n, opt.tail);
    PencilCount cur = pencil_count(fw.grams(), used, n, opt.tail);
    while ((cur.l2 != prev.l2 || cur.undecided > 0) && used < windows.size()) {
        extend(used + 1);
        prev = cur;
        cur = pencil_count(fw.grams(), used, n, opt.tail);
    }
    int undecided = cur.undecided + (cur.l2 != prev.l2 ? 1 : 0);
    out.windows.assign(windows.begin(), windows.begin() + static_cast<long>(used));
    out.forward_ratios = cur.mu;
    out.forward_count = cur.l2;
    out.count = cur.l2;

    if (out.count < n) {
        // Integrate back from the far window: solutions decaying toward the endpoint dominate there,
        // and the orthonormalized block keeps them ordered by growth. The far window itself is a transient.
        const TailWindow& last = windows[used - 1];
        const double x_far = std::abs(last.lo - e) < std::abs(last.hi - e) ? last.lo : last.hi;
        BlockWindowIntegrator bw(expr, lambda, x_far, identity, opt.integration);
        for (std::size_t i = used; i-- > 0;) bw.next(windows[i]);
        std::vector<ScaledGram> toward(bw.grams().rbegin(), bw.grams().rend());
        for (Eigen::Index j = n; j >= 1; --j) {
            const PencilCount pc = pencil_count(toward, used - 1, j, opt.tail);
            if (pc.reliable && pc.l2 == j) {
                out.backward_count = static_cast<int>(j);
                break;
            }
        }
        if (out.backward_count > out.count) {
            out.count = out.backward_count;
            undecided = 0;
        }
    }
    out.inconclusive = undecided > 0 && out.count < n;
    return out;
}

DeficiencyReport deficiency_indices(const DifferentialExpression& expr, const Interval& iv,
                                    const DeficiencyOptions& opt) {
    if (!iv.valid()) throw InvalidInput("invalid interval");
    if (!(opt.kappa > 0.0) || !std::isfinite(opt.kappa)) throw InvalidInput("kappa must be a positive real number");
    if (!expr.has_quasi_derivatives())
        throw Unsupported("deficiency indices are computed for n=1 and purely even expressions");
    const int n = expr.order();
    DeficiencyReport rep;
    rep.kappa = opt.kappa;
    rep.anchor = iv.anchor();
    rep.order = n;

    int regular_ends = 0;
    for (Side side : {Side::Left, Side::Right}) {
        EndpointInfo& info = side == Side::Left ? rep.left : rep.right;
        info.side = side;
        info.point = iv.endpoint(side);
        info.kind = classify_endpoint(expr, iv, side);
        if (info.kind == EndpointKind::Regular) {
            ++regular_ends;
            info.count_plus = info.count_minus = n;
            info.method = "regular";
            continue;
        }
        info.fastpath = weyl_fastpath(expr, info.point);
        if (info.fastpath && opt.use_fastpath) {
            info.count_plus = info.count_minus = 1;
            info.method = "weyl_fastpath";
            continue;
        }
        info.method = "windowed_l2";
        info.plus = count_l2_solutions(expr, iv, side, cplx(0.0, opt.kappa), opt);
        info.minus = count_l2_solutions(expr, iv, side, cplx(0.0, -opt.kappa), opt);
        info.count_plus = info.plus.count;
        info.count_minus = info.minus.count;
        info.inconclusive = info.plus.inconclusive || info.minus.inconclusive;
        if (info.inconclusive && info.fastpath) {
            info.count_plus = info.count_minus = 1;
            info.inconclusive = false;
            info.method = "weyl_fastpath";
            rep.notes.push_back(std::string("inconclusive tail at the ") + to_string(side) +
                                " end resolved by the limit-point certificate");
        }
        if (info.inconclusive)
            rep.notes.push_back(std::string("inconclusive tail verdict at the ") + to_string(side) + " end");
    }
    rep.m_plus = rep.left.count_plus + rep.right.count_plus - n;
    rep.m_minus = rep.left.count_minus + rep.right.count_minus - n;
    rep.inconclusive = rep.left.inconclusive || rep.right.inconclusive;

    const bool even_real = n % 2 == 0;
    if (even_real && rep.m_plus != rep.m_minus) {
        rep.inconclusive = true;
        rep.notes.push_back("unequal indices for a real even expression indicate a numerical failure");
    }
    if (even_real && regular_ends == 1) {
        for (int m : {rep.m_plus, rep.m_minus})
            if (m < n / 2 || m > n) {
                rep.inconclusive = true;
                rep.notes.push_back("index outside the bounds n/2 <= m <= n for one regular end");
                break;
            }
    }
    if (rep.m_plus < 0 || rep.m_minus < 0) {
        rep.inconclusive = true;
        rep.notes.push_back("negative index from the endpoint composition");
    }
    return rep;
}

}  // namespace selfadj
