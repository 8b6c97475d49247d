#pragma once

#include <string>
#include <vector>

#include "activesense/alternating.hpp"

namespace activesense {

struct SensingConfig {
    int n_tx = 1;
    int n_rx = 1;
    int m_tx = 1;
    int m_rx = 1;
    int stages = 8;
    int t_explore = 0;
    int i_max = 1;
    double power = 1.0;
    int grid_size = 1024;
    AngleRange angle_range;
    RVector q;  // empty: uniform over the angles
    int targets = 1;

    ArrayGeometry geometry() const { return ArrayGeometry(n_tx, n_rx); }
    RVector weights() const { return q.size() == 0 ? angle_weights(targets) : q; }
    void validate() const;
};

enum class Strategy { Proposed, RandomOrthogonal, SteeringMmse };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& name);

struct StageRecord {
    int stage = 0;  // 1-based
    BeamformerPair beams;
    CMatrix measurement;
    double bcrb = 0.0;  // NaN when the bound is not identifiable
    bool rx_certificate = true;
    bool tx_certificate = true;
    int unconverged = 0;
    bool fallback = false;  // steering baseline used random beams for this stage
    std::vector<double> beta;  // alternating trace, proposed strategy only
    std::vector<std::string> diagnostics;
    double entropy = 0.0;  // of the angle weights after assimilation
    double sq_error = 0.0; // angle_error of the estimate after assimilation
    RVector weights;       // angle weights after assimilation, when tracing
};

struct StrategyRun {
    Strategy strategy = Strategy::Proposed;
    SceneParams estimate;
    std::vector<StageRecord> stages;
    RMatrix grid_points;     // filled when tracing
    RVector initial_weights; // filled when tracing
};

struct RunOptions {
    bool trace = false;         // keep per-stage angle weights
    bool diagnostics = false;   // keep solver summaries
    DualOptions dual;
};

// Streams drawn from `seeds`: "noise" per stage (shared by every strategy), "init" per stage for
// the proposed strategy, "beams" per stage for the random baseline.
StrategyRun run_proposed(const SceneParams& scene, const SensingConfig& config,
                         const SeedSequence& seeds, const RunOptions& options = {});
StrategyRun run_random_orthogonal(const SceneParams& scene, const SensingConfig& config,
                                  const SeedSequence& seeds, const RunOptions& options = {});
StrategyRun run_steering_mmse(const SceneParams& scene, const SensingConfig& config,
                              const SeedSequence& seeds, const RunOptions& options = {});
StrategyRun run_strategy(Strategy strategy, const SceneParams& scene, const SensingConfig& config,
                         const SeedSequence& seeds, const RunOptions& options = {});

// sqrt(P / M_T) times a Haar matrix with M_T orthonormal columns.
CMatrix random_precoder(int n_tx, int m_tx, double power, std::mt19937_64& rng);

// Steering beamformers for the response at the estimate: top left singular vectors for the
// combiner and sqrt(P) times the top right singular vector for the precoder. Returns false (and
// leaves the pair untouched) when the response is numerically zero.
bool steering_beamformers(const SceneParams& estimate, const ArrayGeometry& geom, int m_rx,
                          double power, BeamformerPair& pair);

// (1/L) sum of squared angle errors under the best matching of estimated to true targets.
double angle_error(const SceneParams& truth, const SceneParams& estimate);

}  // namespace activesense
