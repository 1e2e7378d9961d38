#pragma once

#include <memory>
#include <string>
#include <vector>

namespace selfadj {

enum class CoefficientKind { Zero, Constant, Power, Harmonic, InverseSquare, Tabulated, Composite };

const char* to_string(CoefficientKind kind);

/// Natural cubic spline through tabulated samples.
class CubicSpline {
public:
    CubicSpline(std::vector<double> xs, std::vector<double> ys);

    /// k-th derivative (k <= 3); outside the table the end cubic is extended.
    [[nodiscard]] double derivative(int k, double x) const;
    [[nodiscard]] double lo() const { return xs_.front(); }
    [[nodiscard]] double hi() const { return xs_.back(); }
    [[nodiscard]] const std::vector<double>& xs() const { return xs_; }
    [[nodiscard]] const std::vector<double>& ys() const { return ys_; }

private:
    std::vector<double> xs_, ys_, m_;
};

/// c * x^p; p == 0 is a constant.
struct PowerTerm {
    double c = 0.0;
    double p = 0.0;
};

/// Real-valued coefficient function: sum of power terms plus an optional table.
class Coefficient {
public:
    Coefficient() = default;

    static Coefficient zero();
    static Coefficient constant(double c);
    static Coefficient power(double c, double p);
    static Coefficient harmonic();
    /// -alpha / x^2
    static Coefficient inverse_square(double alpha);
    static Coefficient tabulated(std::vector<double> xs, std::vector<double> ys);

    [[nodiscard]] CoefficientKind kind() const;
    [[nodiscard]] bool is_zero() const;
    [[nodiscard]] double operator()(double x) const { return derivative(0, x); }
    /// Throws InvalidInput when a tabulated part is asked for k > 3.
    [[nodiscard]] double derivative(int k, double x) const;

    [[nodiscard]] const std::vector<PowerTerm>& powers() const { return powers_; }
    [[nodiscard]] const std::shared_ptr<const CubicSpline>& table() const { return table_; }
    /// Coefficient of x^p in the power part (0 if absent).
    [[nodiscard]] double power_coefficient(double p) const;

    Coefficient& operator+=(const Coefficient& other);
    [[nodiscard]] Coefficient scaled(double s) const;

private:
    void normalize();

    std::vector<PowerTerm> powers_;
    std::shared_ptr<const CubicSpline> table_;
    double table_scale_ = 1.0;
};

Coefficient operator+(Coefficient a, const Coefficient& b);

}  // namespace selfadj
