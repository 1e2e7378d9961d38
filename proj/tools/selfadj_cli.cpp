#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "selfadj/cli.hpp"
#include "selfadj/errors.hpp"

namespace {

bool write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace selfadj::cli;
    CLI::App app{"Self-adjoint realizations of ordinary differential expressions"};
    std::string command, config, csv, json_path;
    unsigned seed = 1;
    double max_x = 0.0;
    app.add_option("command", command, "classify | deficiency | extensions | spectrum | verify")
        ->required()
        ->check(CLI::IsMember(commands()));
    app.add_option("--config", config, "problem description (JSON)")->required();
    app.add_option("--csv", csv, "write the command's table here");
    app.add_option("--json", json_path, "write the report here instead of standard output");
    app.add_option("--seed", seed, "seed for randomized checks");
    auto* mx = app.add_option("--max-x", max_x, "truncation of infinite ends");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : ConfigError;
    }

    ProblemConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const selfadj::Error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ConfigError;
    }
    RunOptions opt;
    opt.seed = seed;
    if (*mx) opt.max_x = max_x;
    const auto r = run(cfg, command, opt);
    if (json_path.empty()) {
        std::cout << r.report;
    } else if (!write_file(json_path, r.report)) {
        std::cerr << "cannot write " << json_path << "\n";
        return ConfigError;
    }
    if (!csv.empty() && !write_file(csv, r.csv)) {
        std::cerr << "cannot write " << csv << "\n";
        return ConfigError;
    }
    return r.exit_code;
}
