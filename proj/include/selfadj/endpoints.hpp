#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"
#include "selfadj/ode.hpp"

namespace selfadj {

enum class EndpointKind { Regular, Singular };

const char* to_string(EndpointKind k);

/// Regular iff finite and f_0..f_{n-1}, 1/f_n are integrable near it.
EndpointKind classify_endpoint(const DifferentialExpression& expr, const Interval& iv, Side side);

struct LimitPointCertificate {
    std::string criterion;  // "square_integrable_potential" or "quadratic_lower_bound"
};

/// Weyl limit-point criteria for -d^2/dx^2 + V at an infinite endpoint.
std::optional<LimitPointCertificate> weyl_fastpath(const DifferentialExpression& expr, double endpoint);

struct DeficiencyOptions {
    double kappa = 1.0;
    bool use_fastpath = true;
    IntegrationOptions integration{1e-8, 1e-14, 20'000'000};
    TailOptions tail;
    /// Outer limits of the window search: 2^max_exponent toward infinity, scale*2^-min_exponent toward a finite end.
    int max_exponent = 14;
    int min_exponent = 20;
};

struct SignCount {
    int count = 0;
    bool inconclusive = false;
    std::vector<TailWindow> windows;     // windows used, ordered toward the endpoint
    std::vector<double> forward_ratios;  // late/early Gram pencil eigenvalues from the anchor
    int forward_count = 0;
    int backward_count = 0;              // dimension of the L2 subspace found integrating back from the far window
};

struct EndpointInfo {
    Side side = Side::Left;
    double point = 0.0;
    EndpointKind kind = EndpointKind::Regular;
    int count_plus = 0;   // L2 solutions of f psi = +i kappa psi near this end
    int count_minus = 0;  // ... of -i kappa
    std::optional<LimitPointCertificate> fastpath;
    std::string method;   // "regular", "weyl_fastpath" or "windowed_l2"
    bool inconclusive = false;
    SignCount plus, minus;
};

struct DeficiencyReport {
    EndpointInfo left, right;
    double kappa = 1.0;
    double anchor = 0.0;
    int order = 0;
    int m_plus = 0;
    int m_minus = 0;
    bool inconclusive = false;
    std::vector<std::string> notes;

    [[nodiscard]] bool equal_indices() const { return m_plus == m_minus; }
};

/// Count of solutions of expr psi = lambda psi square integrable near the given singular end.
SignCount count_l2_solutions(const DifferentialExpression& expr, const Interval& iv, Side side, cplx lambda,
                             const DeficiencyOptions& opt = {});

DeficiencyReport deficiency_indices(const DifferentialExpression& expr, const Interval& iv,
                                    const DeficiencyOptions& opt = {});

}  // namespace selfadj
