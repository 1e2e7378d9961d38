#include "selfadj/coefficient.hpp"

#include <algorithm>
#include <cmath>

#include "selfadj/errors.hpp"

namespace selfadj {

const char* to_string(CoefficientKind kind) {
    switch (kind) {
        case CoefficientKind::Zero: return "zero";
        case CoefficientKind::Constant: return "constant";
        case CoefficientKind::Power: return "power";
        case CoefficientKind::Harmonic: return "harmonic";
        case CoefficientKind::InverseSquare: return "inverse_square";
        case CoefficientKind::Tabulated: return "table";
        case CoefficientKind::Composite: return "composite";
    }
    return "unknown";
}

CubicSpline::CubicSpline(std::vector<double> xs, std::vector<double> ys)
    : xs_(std::move(xs)), ys_(std::move(ys)) {
    const std::size_t n = xs_.size();
    if (n < 2 || ys_.size() != n) throw InvalidInput("table needs at least two (x, y) samples of equal length");
    for (std::size_t i = 1; i < n; ++i)
        if (!(xs_[i] > xs_[i - 1])) throw InvalidInput("table abscissae must be strictly increasing");
    // Natural spline second derivatives via the tridiagonal (Thomas) solve.
    m_.assign(n, 0.0);
    if (n == 2) return;
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double h0 = xs_[i] - xs_[i - 1], h1 = xs_[i + 1] - xs_[i];
        const double diag = 2.0 * (h0 + h1);
        const double rhs = 6.0 * ((ys_[i + 1] - ys_[i]) / h1 - (ys_[i] - ys_[i - 1]) / h0);
        const double denom = diag - h0 * c[i - 1];
        c[i] = h1 / denom;
        d[i] = (rhs - h0 * d[i - 1]) / denom;
    }
    for (std::size_t i = n - 2; i >= 1; --i) {
        m_[i] = d[i] - c[i] * m_[i + 1];
        if (i == 1) break;
    }
}

double CubicSpline::derivative(int k, double x) const {
    if (k < 0 || k > 3) throw InvalidInput("tabulated coefficient has no derivative of order " + std::to_string(k));
    auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
    std::size_t i = (it == xs_.begin()) ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
    if (i + 1 >= xs_.size()) i = xs_.size() - 2;
    const double h = xs_[i + 1] - xs_[i];
    const double a = (xs_[i + 1] - x) / h, b = (x - xs_[i]) / h;
    const double m0 = m_[i], m1 = m_[i + 1];
    switch (k) {
        case 0:
            return a * ys_[i] + b * ys_[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        case 1:
            return (ys_[i + 1] - ys_[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        case 2:
            return a * m0 + b * m1;
        default:
            return (m1 - m0) / h;
    }
}

Coefficient Coefficient::zero() { return {}; }

Coefficient Coefficient::constant(double c) { return power(c, 0.0); }

Coefficient Coefficient::power(double c, double p) {
    Coefficient r;
    r.powers_.push_back({c, p});
    r.normalize();
    return r;
}

Coefficient Coefficient::harmonic() { return power(1.0, 2.0); }

Coefficient Coefficient::inverse_square(double alpha) { return power(-alpha, -2.0); }

Coefficient Coefficient::tabulated(std::vector<double> xs, std::vector<double> ys) {
    Coefficient r;
    r.table_ = std::make_shared<const CubicSpline>(std::move(xs), std::move(ys));
    return r;
}

void Coefficient::normalize() {
    std::sort(powers_.begin(), powers_.end(), [](const PowerTerm& a, const PowerTerm& b) { return a.p < b.p; });
    std::vector<PowerTerm> merged;
    for (const auto& t : powers_) {
        if (!merged.empty() && merged.back().p == t.p)
            merged.back().c += t.c;
        else
            merged.push_back(t);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(), [](const PowerTerm& t) { return t.c == 0.0; }),
                 merged.end());
    powers_ = std::move(merged);
}

CoefficientKind Coefficient::kind() const {
    if (table_ && table_scale_ != 0.0) return powers_.empty() ? CoefficientKind::Tabulated : CoefficientKind::Composite;
    if (powers_.empty()) return CoefficientKind::Zero;
    if (powers_.size() > 1) return CoefficientKind::Composite;
    const auto& t = powers_.front();
    if (t.p == 0.0) return CoefficientKind::Constant;
    if (t.p == 2.0 && t.c == 1.0) return CoefficientKind::Harmonic;
    if (t.p == -2.0 && t.c < 0.0) return CoefficientKind::InverseSquare;
    return CoefficientKind::Power;
}

bool Coefficient::is_zero() const { return kind() == CoefficientKind::Zero; }

namespace {

double ipow(double x, int e) {
    if (e < 0) return 1.0 / ipow(x, -e);
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= x;
        x *= x;
        e >>= 1;
    }
    return r;
}

double power_derivative(const PowerTerm& t, int k, double x) {
    double factor = t.c;
    for (int j = 0; j < k; ++j) factor *= (t.p - j);
    if (factor == 0.0) return 0.0;
    const double e = t.p - k;
    const double er = std::round(e);
    if (er == e && std::abs(e) < 64) return factor * ipow(x, static_cast<int>(er));
    return factor * std::pow(x, e);
}

}  // namespace

double Coefficient::derivative(int k, double x) const {
    if (k < 0) throw InvalidInput("negative derivative order");
    double s = 0.0;
    for (const auto& t : powers_) s += power_derivative(t, k, x);
    if (table_ && table_scale_ != 0.0) s += table_scale_ * table_->derivative(k, x);
    return s;
}

double Coefficient::power_coefficient(double p) const {
    for (const auto& t : powers_)
        if (t.p == p) return t.c;
    return 0.0;
}

Coefficient& Coefficient::operator+=(const Coefficient& other) {
    for (const auto& t : other.powers_) powers_.push_back(t);
    if (other.table_) {
        if (table_) throw Unsupported("sum of two tabulated coefficients");
        table_ = other.table_;
        table_scale_ = other.table_scale_;
    }
    normalize();
    return *this;
}

Coefficient Coefficient::scaled(double s) const {
    Coefficient r = *this;
    for (auto& t : r.powers_) t.c *= s;
    r.table_scale_ *= s;
    r.normalize();
    return r;
}

Coefficient operator+(Coefficient a, const Coefficient& b) {
    a += b;
    return a;
}

}  // namespace selfadj
