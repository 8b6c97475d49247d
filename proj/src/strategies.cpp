#include "activesense/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace activesense {

void SensingConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigurationError(msg); };
    if (n_tx < 1 || n_rx < 1) fail("array sizes must be positive");
    if (m_tx < 1 || m_tx > n_tx) fail("m_tx must lie in [1, n_tx]");
    if (m_rx < 1 || m_rx > n_rx) fail("m_rx must lie in [1, n_rx]");
    if (stages < 1) fail("stages must be positive");
    if (t_explore < 0 || t_explore > stages) fail("t_explore must lie in [0, stages]");
    if (i_max < 1) fail("i_max must be positive");
    if (!(power > 0.0) || !std::isfinite(power)) fail("power must be positive and finite");
    if (grid_size < 1) fail("grid_size must be positive");
    if (!(angle_range.min < angle_range.max)) fail("angle_range must satisfy min < max");
    if (targets < 1) fail("targets must be positive");
    if (q.size() != 0) check_weights(q, 3 * targets);
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Proposed: return "proposed";
        case Strategy::RandomOrthogonal: return "random";
        case Strategy::SteeringMmse: return "steering";
    }
    return "unknown";
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "proposed") return Strategy::Proposed;
    if (name == "random") return Strategy::RandomOrthogonal;
    if (name == "steering") return Strategy::SteeringMmse;
    throw ConfigurationError("unknown strategy '" + name + "'");
}

CMatrix random_precoder(int n_tx, int m_tx, double power, std::mt19937_64& rng) {
    return std::sqrt(power / m_tx) * haar_orthonormal(n_tx, m_tx, rng);
}

bool steering_beamformers(const SceneParams& estimate, const ArrayGeometry& geom, int m_rx,
                          double power, BeamformerPair& pair) {
    CMatrix h = target_response(estimate, geom);
    Eigen::JacobiSVD<CMatrix> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (!(svd.singularValues()(0) > 1e-12)) return false;
    pair.w = svd.matrixU().leftCols(m_rx);
    pair.v = std::sqrt(power) * svd.matrixV().col(0);
    return true;
}

double angle_error(const SceneParams& truth, const SceneParams& estimate) {
    if (truth.num_targets() != estimate.num_targets())
        throw DimensionMismatch("target counts differ");
    // best over labellings; targets are interchangeable
    std::vector<int> perm(truth.num_targets());
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double e = 0.0;
        for (int i = 0; i < truth.num_targets(); ++i)
            e += std::pow(truth.angles(i) - estimate.angles(perm[i]), 2);
        best = std::min(best, e);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / truth.num_targets();
}

namespace {

template <class Design>
StrategyRun run_loop(Strategy strategy, const SceneParams& scene, const SensingConfig& config,
                     const SeedSequence& seeds, const RunOptions& options, Design&& design) {
    config.validate();
    if (scene.num_targets() != config.targets)
        throw DimensionMismatch("scene has " + std::to_string(scene.num_targets()) +
                                " targets, configuration expects " +
                                std::to_string(config.targets));
    const ArrayGeometry geom = config.geometry();
    const RVector q = config.weights();
    PosteriorState post = init_posterior(config.angle_range, config.grid_size, config.targets);

    StrategyRun run;
    run.strategy = strategy;
    if (options.trace) {
        run.grid_points = post.points;
        run.initial_weights = post.weights();
    }
    for (int k = 1; k <= config.stages; ++k) {
        PriorFim prior = prior_fim(post, geom);
        StageRecord rec;
        rec.stage = k;
        rec.bcrb = std::numeric_limits<double>::quiet_NaN();
        design(k, post, prior.matrix, rec);
        if (rec.beta.empty()) {
            try {
                RMatrix j = prior.matrix +
                            data_fim(post, rec.beams.v, rx_projector(rec.beams.w), geom);
                rec.bcrb = bcrb_value(q, j);
            } catch (const NonIdentifiable&) {
            }
        } else {
            rec.bcrb = rec.beta.back();
        }
        std::mt19937_64 noise = seeds.stream("noise", k);
        rec.measurement = simulate_measurement(scene, geom, rec.beams, noise);
        post = assimilate(post, rec.beams, geom, rec.measurement);
        rec.entropy = weight_entropy(post);
        rec.sq_error = angle_error(scene, mmse_estimate(post));
        if (options.trace) rec.weights = post.weights();
        run.stages.push_back(std::move(rec));
    }
    run.estimate = mmse_estimate(post);
    return run;
}

}  // namespace

StrategyRun run_proposed(const SceneParams& scene, const SensingConfig& config,
                         const SeedSequence& seeds, const RunOptions& options) {
    const ArrayGeometry geom(config.n_tx, config.n_rx);
    AlternatingConfig ac;
    ac.m_tx = config.m_tx;
    ac.m_rx = config.m_rx;
    ac.power = config.power;
    ac.i_max = config.i_max;
    ac.q = config.q;
    ac.dual = options.dual;
    return run_loop(Strategy::Proposed, scene, config, seeds, options,
                    [&](int k, const PosteriorState& post, const RMatrix& prior, StageRecord& rec) {
                        ac.explore = k <= config.t_explore;
                        std::mt19937_64 rng = seeds.stream("init", k);
                        CMatrix v0 = random_precoder(config.n_tx, config.m_tx, config.power, rng);
                        AlternatingResult res = alternating_optimize(
                            post, prior, geom, ac, v0, seeds.child("stage", k));
                        rec.beams = res.pair;
                        rec.beta = res.beta;
                        rec.rx_certificate = res.rx_certificate;
                        rec.tx_certificate = res.tx_certificate;
                        rec.unconverged = res.unconverged;
                        if (options.diagnostics) {
                            for (const auto& s : res.rx_solutions) rec.diagnostics.push_back(s.summary());
                            for (const auto& s : res.tx_solutions) rec.diagnostics.push_back(s.summary());
                        }
                    });
}

StrategyRun run_random_orthogonal(const SceneParams& scene, const SensingConfig& config,
                                  const SeedSequence& seeds, const RunOptions& options) {
    return run_loop(Strategy::RandomOrthogonal, scene, config, seeds, options,
                    [&](int k, const PosteriorState&, const RMatrix&, StageRecord& rec) {
                        std::mt19937_64 rng = seeds.stream("beams", k);
                        rec.beams.v = random_precoder(config.n_tx, config.m_tx, config.power, rng);
                        rec.beams.w = haar_orthonormal(config.n_rx, config.m_rx, rng);
                    });
}

StrategyRun run_steering_mmse(const SceneParams& scene, const SensingConfig& config,
                              const SeedSequence& seeds, const RunOptions& options) {
    const ArrayGeometry geom(config.n_tx, config.n_rx);
    return run_loop(Strategy::SteeringMmse, scene, config, seeds, options,
                    [&](int k, const PosteriorState& post, const RMatrix&, StageRecord& rec) {
                        if (!post.history.empty() &&
                            steering_beamformers(mmse_estimate(post), geom, config.m_rx,
                                                 config.power, rec.beams))
                            return;
                        rec.fallback = true;
                        std::mt19937_64 rng = seeds.stream("beams", k);
                        rec.beams.v = random_precoder(config.n_tx, config.m_tx, config.power, rng);
                        rec.beams.w = haar_orthonormal(config.n_rx, config.m_rx, rng);
                    });
}

StrategyRun run_strategy(Strategy strategy, const SceneParams& scene, const SensingConfig& config,
                         const SeedSequence& seeds, const RunOptions& options) {
    switch (strategy) {
        case Strategy::Proposed: return run_proposed(scene, config, seeds, options);
        case Strategy::RandomOrthogonal: return run_random_orthogonal(scene, config, seeds, options);
        case Strategy::SteeringMmse: return run_steering_mmse(scene, config, seeds, options);
    }
    throw ConfigurationError("unknown strategy");
}

}  // namespace activesense
