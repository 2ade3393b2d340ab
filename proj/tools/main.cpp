#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fracwave/harness.hpp>
#include <fracwave/validate.hpp>

namespace {

struct CliSettings {
    double gamma = 1.5;
    double r = 2.0;
    int m = 1;
    int n = 1;
    std::string J = "16";
    double sigma = 1.0;
    std::string cells = "8";
    double T = 1.0;
    double tol = 1e-10;
    std::string out;
    std::string config_path;
};

void add_run_options(CLI::App* cmd, CliSettings& s) {
    cmd->add_option("--gamma", s.gamma, "fractional order in (1,2)");
    cmd->add_option("--r", s.r, "temporal exponent of the exact field (> 1)");
    cmd->add_option("--m", s.m, "trial degree in time (1..3)");
    cmd->add_option("--n", s.n, "element degree in space (1..4)");
    cmd->add_option("--J", s.J, "time slabs; a comma list sweeps in time");
    cmd->add_option("--sigma", s.sigma, "grid grading exponent (>= 1)");
    cmd->add_option("--cells", s.cells, "cells per side; a comma list sweeps in space");
    cmd->add_option("--T", s.T, "final time");
    cmd->add_option("--tol", s.tol, "linear solver tolerance");
    cmd->add_option("--out", s.out, "also write the CSV table to this path");
    cmd->add_option("--config", s.config_path, "key=value file; command-line flags win");
}

double parse_double_value(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end == text.c_str() || *end != '\0')
        throw std::invalid_argument("config: cannot read number for '" + key + "'");
    return v;
}

int parse_int_value(const std::string& key, const std::string& text) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (text.empty() || end == text.c_str() || *end != '\0')
        throw std::invalid_argument("config: cannot read integer for '" + key + "'");
    return static_cast<int>(v);
}

std::string trimmed(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

// Fills settings from key=value lines, skipping any key whose flag was given
// on the command line.
void apply_config_file(const CLI::App* cmd, CliSettings& s) {
    if (s.config_path.empty()) return;
    std::ifstream file(s.config_path);
    if (!file) throw std::invalid_argument("config: cannot open " + s.config_path);

    auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
    std::string line;
    int lineno = 0;
    while (std::getline(file, line)) {
        ++lineno;
        const std::string entry = trimmed(line);
        if (entry.empty() || entry[0] == '#') continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value");
        const std::string key = trimmed(entry.substr(0, eq));
        const std::string value = trimmed(entry.substr(eq + 1));
        if (key == "gamma") {
            if (!given("--gamma")) s.gamma = parse_double_value(key, value);
        } else if (key == "r") {
            if (!given("--r")) s.r = parse_double_value(key, value);
        } else if (key == "m") {
            if (!given("--m")) s.m = parse_int_value(key, value);
        } else if (key == "n") {
            if (!given("--n")) s.n = parse_int_value(key, value);
        } else if (key == "J") {
            if (!given("--J")) s.J = value;
        } else if (key == "sigma") {
            if (!given("--sigma")) s.sigma = parse_double_value(key, value);
        } else if (key == "cells") {
            if (!given("--cells")) s.cells = value;
        } else if (key == "T") {
            if (!given("--T")) s.T = parse_double_value(key, value);
        } else if (key == "tol") {
            if (!given("--tol")) s.tol = parse_double_value(key, value);
        } else if (key == "out") {
            if (!given("--out")) s.out = value;
        } else {
            throw std::invalid_argument("config: unknown key '" + key + "'");
        }
    }
}

std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
    std::vector<int> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t next = text.find(',', pos);
        const std::string piece =
            text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        char* end = nullptr;
        const long v = std::strtol(piece.c_str(), &end, 10);
        if (piece.empty() || end == piece.c_str() || *end != '\0' || v < 1 || v > 10000000)
            throw std::invalid_argument(flag + ": cannot read positive integer from '" +
                                        piece + "'");
        out.push_back(static_cast<int>(v));
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

fracwave::RunConfig to_config(const CliSettings& s, int J, int cells) {
    fracwave::RunConfig cfg;
    cfg.gamma = s.gamma;
    cfg.r = s.r;
    cfg.m = s.m;
    cfg.n = s.n;
    cfg.J = J;
    cfg.sigma = s.sigma;
    cfg.cells = cells;
    cfg.T = s.T;
    cfg.tol = s.tol;
    cfg.out = s.out;
    return cfg;
}

int run_solve(const CliSettings& s) {
    const auto js = parse_int_list(s.J, "--J");
    const auto ms = parse_int_list(s.cells, "--cells");
    if (js.size() != 1 || ms.size() != 1)
        throw std::invalid_argument("solve: takes a single --J and a single --cells value");
    const auto cfg = to_config(s, js[0], ms[0]);
    const auto result = fracwave::run_single(cfg);
    std::printf("E1 = %.6e\n", result.report.E1);
    std::printf("E2 = %.6e\n", result.report.E2);
    std::printf("seconds = %.3f\n", result.report.seconds);
    if (!cfg.out.empty()) {
        fracwave::SweepTable table;
        table.axis = fracwave::SweepAxis::time;
        fracwave::SweepRow row;
        row.level = 1;
        row.J = cfg.J;
        row.inv_h = cfg.cells;
        row.report = result.report;
        table.rows.push_back(row);
        fracwave::write_csv(cfg.out, table);
    }
    return 0;
}

int run_sweep(const CliSettings& s) {
    const auto js = parse_int_list(s.J, "--J");
    const auto ms = parse_int_list(s.cells, "--cells");
    fracwave::SweepAxis axis;
    const std::vector<int>* levels = nullptr;
    if (js.size() >= 2 && ms.size() == 1) {
        axis = fracwave::SweepAxis::time;
        levels = &js;
    } else if (ms.size() >= 2 && js.size() == 1) {
        axis = fracwave::SweepAxis::space;
        levels = &ms;
    } else {
        throw std::invalid_argument(
            "sweep: exactly one of --J/--cells must list two or more levels");
    }
    const auto base = to_config(s, js[0], ms[0]);
    const auto table = fracwave::convergence_sweep(base, *levels, axis);
    std::fputs(fracwave::csv_table(table).c_str(), stdout);
    if (!s.out.empty()) fracwave::write_csv(s.out, table);
    int failures = 0;
    for (const auto& row : table.rows) {
        if (!row.failed) continue;
        std::cerr << "level " << row.level << " failed: " << row.note << "\n";
        ++failures;
    }
    return failures == 0 ? 0 : 1;
}

int run_validate() {
    bool all_pass = true;
    for (const auto& check : fracwave::checks::run_all()) {
        std::printf("%s %s (%s)\n", check.pass ? "PASS" : "FAIL", check.name.c_str(),
                    check.detail.c_str());
        all_pass = all_pass && check.pass;
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-time solver for the fractional wave model on the unit square"};
    app.require_subcommand(1);

    CliSettings solve_settings, sweep_settings;
    auto* solve = app.add_subcommand("solve", "one run; errors on standard output");
    add_run_options(solve, solve_settings);
    auto* sweep = app.add_subcommand("sweep", "refinement study; CSV on standard output");
    add_run_options(sweep, sweep_settings);
    auto* validate = app.add_subcommand("validate", "run the property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& err) {
        return app.exit(err);
    } catch (const CLI::ParseError& err) {
        std::cerr << err.what() << "\n\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (solve->parsed()) {
            apply_config_file(solve, solve_settings);
            return run_solve(solve_settings);
        }
        if (sweep->parsed()) {
            apply_config_file(sweep, sweep_settings);
            return run_sweep(sweep_settings);
        }
        if (validate->parsed()) return run_validate();
    } catch (const fracwave::SolverFailure& err) {
        std::cerr << err.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& err) {
        std::cerr << err.what() << "\n\n" << app.help() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << err.what() << "\n";
        return 1;
    }
    return 0;
}
