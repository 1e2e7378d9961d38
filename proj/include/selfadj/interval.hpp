#pragma once

#include <cmath>
#include <limits>
#include <string>

namespace selfadj {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Side { Left, Right };

inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

/// Open or closed real interval; endpoints may be infinite.
struct Interval {
    double a = 0.0;
    double b = 1.0;

    [[nodiscard]] bool valid() const { return a < b && !std::isnan(a) && !std::isnan(b); }
    [[nodiscard]] double endpoint(Side s) const { return s == Side::Left ? a : b; }
    [[nodiscard]] bool finite(Side s) const { return std::isfinite(endpoint(s)); }
    [[nodiscard]] bool bounded() const { return std::isfinite(a) && std::isfinite(b); }
    /// Interior reference point: midpoint, 1 on a half-line starting at 0, 0 on the line.
    [[nodiscard]] double anchor() const {
        if (bounded()) return 0.5 * (a + b);
        if (std::isfinite(a)) return a + 1.0;
        if (std::isfinite(b)) return b - 1.0;
        return 0.0;
    }
};

}  // namespace selfadj
