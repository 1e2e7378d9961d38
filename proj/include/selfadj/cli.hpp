#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selfadj/bcalg.hpp"
#include "selfadj/expr.hpp"
#include "selfadj/interval.hpp"
#include "selfadj/spectral.hpp"

namespace selfadj::cli {

/// Coefficient description as written in a config.
struct CoefficientSpec {
    std::string kind = "zero";  // zero|constant|power|harmonic|inverse_square|table
    double c = 0.0;
    double p = 0.0;
    double alpha = 1.0;
    std::string path;  // table: two columns x, y
};

struct EvenSpec {
    int k = 0;
    CoefficientSpec f;
};

struct ExpressionSpec {
    std::string kind = "schrodinger";  // momentum|schrodinger|custom_even
    CoefficientSpec potential;
    int order = 0;  // custom_even only; 0 means 2 max k
    std::vector<EvenSpec> terms;
};

struct SpectrumSpec {
    double e_min = 0.0;
    double e_max = 100.0;
    int max_count = 1000;
};

struct ProblemConfig {
    ExpressionSpec expression;
    Interval interval;
    double kappa = 1.0;
    double tau = 1.0;
    std::optional<BoundaryCondition> bc;
    std::optional<SpectrumSpec> spectrum;
    /// Directory against which table paths are resolved.
    std::string base_dir;
};

/// Parses the JSON config text; numbers may be written as "inf", "+inf" or "-inf". Throws InvalidInput.
ProblemConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ProblemConfig load_config(const std::string& path);

/// Canonical form: sorted keys, two-space indent, shortest round-trip numbers, trailing newline.
std::string serialize_config(const ProblemConfig& cfg);

std::string serialize_bc(const BoundaryCondition& bc);

DifferentialExpression build_expression(const ProblemConfig& cfg);

enum ExitCode : int { Ok = 0, ConfigError = 2, NonConvergence = 3, NoSelfAdjointExtension = 4 };

struct RunOptions {
    unsigned seed = 1;
    std::optional<double> max_x;
};

struct RunResult {
    int exit_code = Ok;
    std::string report;  // JSON text with trailing newline
    std::string csv;     // LF line endings, header row
};

const std::vector<std::string>& commands();

/// Never throws; failures become exit codes with an "error" entry in the report.
RunResult run(const ProblemConfig& cfg, const std::string& command, const RunOptions& opt = {});

}  // namespace selfadj::cli
