#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qat/parallel.hpp"
#include "qat/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvariantFailure = 1;
constexpr int kConfigError = 2;

std::vector<std::filesystem::path> bundled_examples() {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(QAT_EXAMPLES_DIR, ec))
        if (e.path().extension() == ".json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

// a bare example name resolves to the bundled config of that name
std::string resolve(const std::string& arg) {
    if (std::filesystem::exists(arg)) return arg;
    const auto bundled = std::filesystem::path(QAT_EXAMPLES_DIR) / (arg + ".json");
    return std::filesystem::exists(bundled) ? bundled.string() : arg;
}

int print_diagnostics(const std::vector<qat::Diagnostic>& d) {
    for (const auto& x : d) std::cerr << "config: " << x.str() << '\n';
    return d.empty() ? kOk : kConfigError;
}

void print_summary(const qat::RunSummary& s, const std::string& dir) {
    std::cout << "scenario " << s.name << " -> " << dir << '\n';
    for (const auto& a : s.analyses) {
        std::cout << "  " << a.name << ": " << a.status;
        if (!a.message.empty()) std::cout << " (" << a.message << ')';
        std::cout << '\n';
        for (const auto& [k, v] : a.scalars) std::cout << "    " << k << " = " << v << '\n';
    }
    std::cout << (s.ok() ? "OK" : "FAILED") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Arrival-time scenarios for a particle under quantum Brownian motion"};
    app.require_subcommand(1);

    std::string out_dir;
    int grid_n = 0, threads = 0;
    bool seedless = false;
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--grid", grid_n, "grid points per axis (overrides grid.n)")->check(CLI::Range(16, 1 << 16));
    app.add_option("--threads", threads, "worker threads; 0 = all cores")->check(CLI::NonNegativeNumber);
    app.add_flag("--seedless", seedless, "fail unless the pipeline is free of random numbers");

    std::string config;
    auto* run = app.add_subcommand("run", "run a scenario config or a bundled example by name");
    run->add_option("config", config, "config file or example name")->required();
    auto* validate = app.add_subcommand("validate", "check a config and list diagnostics");
    validate->add_option("config", config, "config file or example name")->required();
    auto* list = app.add_subcommand("list-examples", "list bundled example configs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    if (seedless && qat::kPipelineUsesRng) {
        std::cerr << "--seedless: pipeline uses a random number generator\n";
        return kInvariantFailure;
    }
    qat::worker_count() = threads;

    if (*list) {
        for (const auto& p : bundled_examples()) std::cout << p.stem().string() << "  " << p.string() << '\n';
        return kOk;
    }

    const std::string path = resolve(config);
    try {
        if (*validate) {
            const auto d = qat::validate_config(path);
            if (d.empty()) std::cout << path << ": valid\n";
            return print_diagnostics(d);
        }
        const auto cfg = qat::load_config(path);
        qat::RunOptions opt;
        if (!out_dir.empty()) opt.out_dir = out_dir;
        if (grid_n > 0) {
            if (grid_n % 2 != 0) {
                std::cerr << "--grid must be even\n";
                return kConfigError;
            }
            opt.grid_n = grid_n;
        }
        const auto summary = qat::run_scenario(cfg, opt);
        print_summary(summary, opt.out_dir.value_or(cfg.output_dir));
        return summary.ok() ? kOk : kInvariantFailure;
    } catch (const qat::ConfigError& e) {
        return print_diagnostics(e.diagnostics());
    } catch (const qat::InvalidArgument& e) {
        if (e.stage() == "config") {
            std::cerr << e.what() << '\n';
            return kConfigError;
        }
        std::cerr << e.what() << '\n';
        return kInvariantFailure;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return kInvariantFailure;
    }
}
