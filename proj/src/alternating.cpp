#include "activesense/alternating.hpp"

namespace activesense {

namespace {

DualSolution solve_or_best(const DualProblem& pb, const DualOptions& opt, int& unconverged) {
    try {
        return solve_dual(pb, opt);
    } catch (const NonConverged& e) {
        ++unconverged;
        return e.best();
    }
}

}  // namespace

AlternatingResult alternating_optimize(const PosteriorState& post, const RMatrix& prior,
                                       const ArrayGeometry& geom, const AlternatingConfig& config,
                                       const CMatrix& v0, const SeedSequence& seeds) {
    if (config.i_max < 1) throw ConfigurationError("i_max must be at least 1");
    if (v0.rows() != geom.n_tx) throw DimensionMismatch("initial precoder row count mismatch");
    const RVector q = config.q.size() == 0 ? angle_weights(post.targets) : config.q;
    const ProblemKind tx_kind = config.explore ? ProblemKind::TxExplore : ProblemKind::TxExploit;

    AlternatingResult res;
    CMatrix v = v0;
    CMatrix w;
    for (int it = 0; it < config.i_max; ++it) {
        DualProblem rx = DualProblem::receive(post, v, prior, q, geom, config.m_rx);
        DualSolution rs = solve_or_best(rx, config.dual, res.unconverged);
        ExtractedBeamformer we = extract_beamformers(rx, rs, seeds.derive("tie", it, 0));
        if (w.size() != 0 && rx.primal(we.covariance) > rx.primal(rx_projector(w))) {
            ++res.kept_incumbent;
        } else {
            w = we.matrix;
        }
        res.rx_certificate = rs.certificate;
        res.rx_solutions.push_back(std::move(rs));

        DualProblem tx = DualProblem::transmit(tx_kind, post, w, prior, q, geom, config.power,
                                               config.m_tx);
        DualSolution ts = solve_or_best(tx, config.dual, res.unconverged);
        ExtractedBeamformer ve = extract_beamformers(tx, ts, seeds.derive("tie", it, 1));
        const double incumbent = tx.primal(v * v.adjoint());
        const double candidate = tx.primal(ve.covariance);
        if (candidate > incumbent) {
            ++res.kept_incumbent;
            res.beta.push_back(incumbent);
        } else {
            v = ve.matrix;
            res.beta.push_back(candidate);
        }
        res.tx_certificate = ts.certificate;
        res.tx_solutions.push_back(std::move(ts));
    }
    res.pair = {v, w};
    return res;
}

}  // namespace activesense
