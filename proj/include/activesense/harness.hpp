#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "activesense/strategies.hpp"

namespace activesense {

struct ExperimentSpec {
    SensingConfig base;
    std::vector<double> snr_grid{10.0};
    int trials = 200;
    std::uint64_t seed = 1;
    std::vector<Strategy> strategies{Strategy::Proposed, Strategy::RandomOrthogonal};
    std::vector<int> t_explore_values{0};
    std::string output = "out";
    bool alpha_random = false;  // CN(0,1) coefficients instead of unit magnitude
    bool trace = false;
    std::optional<SceneParams> trace_scene;
    int threads = 0;  // 0: hardware concurrency

    void validate() const;
};

ExperimentSpec parse_spec(const std::string& json_text);
ExperimentSpec load_spec(const std::string& path);
std::string spec_to_json(const ExperimentSpec& spec, int indent = 2);

// Scene for one trial: angles uniform on the range, coefficients of unit magnitude with uniform
// phase (or CN(0,1) when alpha_random is set).
SceneParams draw_scene(const SensingConfig& config, bool alpha_random, const SeedSequence& trial);

double snr_to_power(double snr_db);

struct TrialStage {
    int stage = 0;
    double bcrb = 0.0;
    bool rx_certificate = true;
    bool tx_certificate = true;
    double angle_error = 0.0;
};

struct CellResult {
    std::string strategy;
    double snr_db = 0.0;
    int t_explore = 0;  // -1 for strategies without an exploration phase
    int trials = 0;     // successful trials
    double wmse_mean = 0.0;
    double wmse_stderr = 0.0;
    int failures = 0;
    // Per-trial detail, not part of the CSV; NaN marks failed trials.
    double bcrb_mean = 0.0;
    std::vector<double> errors;
    std::vector<double> final_bcrb;
    std::vector<std::vector<TrialStage>> stages;
};

struct WmseReport {
    std::vector<CellResult> cells;

    const CellResult* find(const std::string& strategy, double snr_db, int t_explore) const;
};

using ProgressFn = std::function<void(const CellResult&)>;

WmseReport run_experiment(const ExperimentSpec& spec, const ProgressFn& progress = {});

// strategy,snr_db,t_explore,trials,wmse_mean,wmse_stderr,failures; rows sorted, 10 significant
// digits, LF line endings.
std::string format_csv(const WmseReport& report);
WmseReport parse_csv(const std::string& text);
void emit_csv(const WmseReport& report, const std::string& path);

// Per-trial, per-stage records of every cell.
std::string format_run_records(const WmseReport& report);

inline constexpr int kBeampatternPoints = 512;

// Runs the proposed strategy once on the trace scene with full tracing.
StrategyRun run_trace(const ExperimentSpec& spec);
std::string format_posterior_trace(const StrategyRun& run);
std::string format_beampattern(const StrategyRun& run, const ArrayGeometry& geom);
void emit_posterior_trace(const StrategyRun& run, const ArrayGeometry& geom,
                          const std::string& trace_path, const std::string& beampattern_path);

std::string build_commit();
std::string run_meta_json(const ExperimentSpec& spec);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace activesense
