#pragma once

#include <vector>

#include "activesense/dual_optimizer.hpp"
#include "activesense/random.hpp"

namespace activesense {

struct AlternatingConfig {
    int m_tx = 1;
    int m_rx = 1;
    double power = 1.0;
    int i_max = 1;
    bool explore = false;
    RVector q;  // empty: uniform weights on the angles
    DualOptions dual;
};

struct AlternatingResult {
    BeamformerPair pair;
    std::vector<double> beta;  // bound after each full iteration
    std::vector<DualSolution> rx_solutions;
    std::vector<DualSolution> tx_solutions;
    bool rx_certificate = false;
    bool tx_certificate = false;
    int unconverged = 0;  // solves that hit their iteration limits
    int kept_incumbent = 0;  // half-steps whose candidate did not improve the bound
};

// Alternates receive and transmit subproblems starting from precoder v0. A candidate that would
// raise the bound is discarded in favour of the current beamformer.
AlternatingResult alternating_optimize(const PosteriorState& post, const RMatrix& prior,
                                       const ArrayGeometry& geom, const AlternatingConfig& config,
                                       const CMatrix& v0, const SeedSequence& seeds);

}  // namespace activesense
