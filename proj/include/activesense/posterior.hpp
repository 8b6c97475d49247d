#pragma once

#include <cstddef>
#include <vector>

#include "activesense/array_model.hpp"

namespace activesense {

struct AngleRange {
    double min = -kPi / 3.0;
    double max = kPi / 3.0;
};

// Gaussian law of the reflection coefficients conditioned on one angle tuple.
struct ConditionalGaussian {
    CVector mean;
    CMatrix cov;
};

struct MeasurementRecord {
    CMatrix v;
    CMatrix w;
    CMatrix y;
};

// Mixture posterior: discrete weights over angle tuples, each with a Gaussian on the coefficients.
struct PosteriorState {
    int targets = 0;
    RMatrix points;      // targets x size(), one angle tuple per column
    RVector log_weights; // normalized so that logsumexp == 0
    std::vector<ConditionalGaussian> conditionals;
    std::vector<MeasurementRecord> history;
    int regularized = 0;  // count of predictive covariances that needed a diagonal shift

    Eigen::Index size() const { return points.cols(); }
    RVector angles(Eigen::Index g) const { return points.col(g); }
    RVector weights() const { return log_weights.array().exp(); }

    // Single-point posterior at the scene, with the given coefficient covariance (zero by default).
    static PosteriorState point_mass(const SceneParams& scene, const CMatrix& cov = CMatrix());
};

inline constexpr std::size_t kDefaultGridCap = std::size_t{1} << 20;

// Uniform weights on the Cartesian product of `per_angle` evenly spaced points spanning the
// closed range; coefficients start as CN(0, I). Target 0 varies fastest along the flat index.
PosteriorState init_posterior(AngleRange range, int per_angle, int targets,
                              std::size_t cap = kDefaultGridCap);

// Maps the coefficient vector to vec(W^H H V) (column-major) at fixed angles.
CMatrix observation_operator(const RVector& angles, const BeamformerPair& pair,
                             const ArrayGeometry& geom);

struct PredictiveMoments {
    CVector mean;     // C mu
    CMatrix cross;    // Sigma C^H
    CMatrix cov;      // C Sigma C^H + I (x) W^H W
};

PredictiveMoments predictive_moments(const PosteriorState& state, Eigen::Index g,
                                     const BeamformerPair& pair, const ArrayGeometry& geom);

// Conditional Gaussian update for every grid point; appends the measurement to the history.
PosteriorState kalman_update(const PosteriorState& state, const BeamformerPair& pair,
                             const ArrayGeometry& geom, const CMatrix& y);

// Reweights grid points by the predictive likelihood of y; conditionals are left untouched.
PosteriorState bayes_weight_update(const PosteriorState& state, const BeamformerPair& pair,
                                   const ArrayGeometry& geom, const CMatrix& y);

// Weight update followed by the conditional update, sharing the predictive moments.
PosteriorState assimilate(const PosteriorState& state, const BeamformerPair& pair,
                          const ArrayGeometry& geom, const CMatrix& y);

// Posterior mean of the angle-sorted tuple and its coefficients.
SceneParams mmse_estimate(const PosteriorState& state);

struct SecondMoments {
    CVector mean;
    CMatrix second;  // E[alpha alpha^H]
    CMatrix pseudo;  // E[alpha alpha^T]
};

SecondMoments posterior_second_moments(const PosteriorState& state, Eigen::Index g);

// Shannon entropy of the discrete angle weights (nats).
double weight_entropy(const PosteriorState& state);

double log_sum_exp(const RVector& x);

}  // namespace activesense
