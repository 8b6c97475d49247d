// sense: run active-sensing experiments and write WMSE tables and traces.

#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "activesense/harness.hpp"

namespace fs = std::filesystem;
using namespace activesense;

namespace {

template <class T>
std::vector<T> split_list(const std::string& text, T (*convert)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(convert(item));
    return out;
}

double to_double(const std::string& s) { return std::stod(s); }
int to_int(const std::string& s) { return std::stoi(s); }
Strategy to_strategy(const std::string& s) { return strategy_from_string(s); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential active sensing experiments"};
    app.require_subcommand(1);

    CLI::App* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
    std::string config_path, out_dir, snr, strategies, t_explore;
    int trials = 0, threads = -1;
    std::uint64_t seed = 0;
    bool alpha_random = false, trace = false, quiet = false;
    run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory")->required();
    auto* trials_opt = run->add_option("--trials", trials, "Trials per cell")->check(CLI::PositiveNumber);
    auto* seed_opt = run->add_option("--seed", seed, "Root seed");
    run->add_option("--snr", snr, "Comma-separated SNR grid in dB");
    run->add_option("--strategies", strategies, "Comma-separated: proposed,random,steering");
    run->add_option("--t-explore", t_explore, "Comma-separated exploration lengths");
    run->add_option("--threads", threads, "Worker threads (0: all cores)");
    run->add_flag("--alpha-random", alpha_random, "Draw coefficients from CN(0,1)");
    run->add_flag("--trace", trace, "Also write the posterior and beampattern traces");
    run->add_flag("--quiet", quiet, "No progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentSpec spec = load_spec(config_path);
        if (*trials_opt) spec.trials = trials;
        if (*seed_opt) spec.seed = seed;
        if (!snr.empty()) spec.snr_grid = split_list<double>(snr, to_double);
        if (!strategies.empty()) spec.strategies = split_list<Strategy>(strategies, to_strategy);
        if (!t_explore.empty()) spec.t_explore_values = split_list<int>(t_explore, to_int);
        if (threads >= 0) spec.threads = threads;
        if (alpha_random) spec.alpha_random = true;
        if (trace) spec.trace = true;
        spec.output = out_dir;
        spec.validate();

        fs::create_directories(out_dir);
        const fs::path out(out_dir);
        write_text((out / "run_meta.json").string(), run_meta_json(spec));

        WmseReport report = run_experiment(spec, [quiet](const CellResult& c) {
            if (quiet) return;
            std::cerr << "cell strategy=" << c.strategy << " snr_db=" << c.snr_db
                      << " t_explore=" << c.t_explore << " trials=" << c.trials
                      << " wmse=" << c.wmse_mean << " stderr=" << c.wmse_stderr
                      << " failures=" << c.failures << "\n";
        });
        emit_csv(report, (out / "wmse.csv").string());
        write_text((out / "runs.csv").string(), format_run_records(report));

        if (spec.trace) {
            StrategyRun tr = run_trace(spec);
            emit_posterior_trace(tr, spec.base.geometry(), (out / "posterior_trace.csv").string(),
                                 (out / "beampattern.csv").string());
            if (!quiet)
                for (const StageRecord& r : tr.stages)
                    for (const std::string& line : r.diagnostics)
                        std::cerr << "stage=" << r.stage << " " << line << "\n";
        }
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
