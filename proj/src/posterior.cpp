#include "activesense/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace activesense {

namespace {

// Cholesky of a Hermitian matrix, shifting the diagonal if it is not numerically PD.
struct RobustCholesky {
    Eigen::LLT<CMatrix> llt;
    bool shifted = false;

    explicit RobustCholesky(const CMatrix& s) {
        llt.compute(s);
        double shift = 1e-12 * std::max(1.0, s.real().diagonal().cwiseAbs().maxCoeff());
        while (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().real().allFinite() ||
               llt.matrixLLT().diagonal().real().minCoeff() <= 0.0) {
            shifted = true;
            llt.compute(s + shift * CMatrix::Identity(s.rows(), s.cols()));
            shift *= 10.0;
            if (shift > 1e6) throw Error("predictive covariance is not positive definite");
        }
    }

    double log_det() const {
        return 2.0 * llt.matrixLLT().diagonal().real().array().log().sum();
    }
};

// Per-stage quantities shared across grid points.
struct StageContext {
    const BeamformerPair& pair;
    const ArrayGeometry& geom;
    CMatrix noise;  // I_{M_T} (x) W^H W

    StageContext(const BeamformerPair& p, const ArrayGeometry& g) : pair(p), geom(g) {
        check_beamformers(p, g);
        const Eigen::Index mr = p.w.cols();
        const Eigen::Index mt = p.v.cols();
        CMatrix gram = p.w.adjoint() * p.w;
        noise = CMatrix::Zero(mr * mt, mr * mt);
        for (Eigen::Index m = 0; m < mt; ++m) noise.block(m * mr, m * mr, mr, mr) = gram;
    }
};

CMatrix observation_matrix(const RVector& angles, const StageContext& ctx) {
    const Eigen::Index mr = ctx.pair.w.cols();
    const Eigen::Index mt = ctx.pair.v.cols();
    CMatrix c(mr * mt, angles.size());
    for (Eigen::Index j = 0; j < angles.size(); ++j) {
        CVector r = ctx.pair.w.adjoint() * steering_vector(ctx.geom.n_rx, angles(j));
        CVector t = ctx.pair.v.adjoint() * steering_vector(ctx.geom.n_tx, angles(j));
        for (Eigen::Index m = 0; m < mt; ++m) c.col(j).segment(m * mr, mr) = r * std::conj(t(m));
    }
    return c;
}

PredictiveMoments moments_at(const ConditionalGaussian& cg, const CMatrix& c,
                             const StageContext& ctx) {
    PredictiveMoments pm;
    pm.mean = c * cg.mean;
    pm.cross = cg.cov * c.adjoint();
    pm.cov = hermitian_part(c * pm.cross) + ctx.noise;
    return pm;
}

CVector vectorize(const CMatrix& y) { return Eigen::Map<const CVector>(y.data(), y.size()); }

void check_measurement(const CMatrix& y, const BeamformerPair& pair) {
    if (y.rows() != pair.w.cols() || y.cols() != pair.v.cols())
        throw DimensionMismatch("measurement is " + std::to_string(y.rows()) + "x" +
                                std::to_string(y.cols()) + ", expected " +
                                std::to_string(pair.w.cols()) + "x" +
                                std::to_string(pair.v.cols()));
}

struct UpdateFlags {
    bool weights;
    bool conditionals;
};

PosteriorState update(const PosteriorState& state, const BeamformerPair& pair,
                      const ArrayGeometry& geom, const CMatrix& y, UpdateFlags flags) {
    check_measurement(y, pair);
    StageContext ctx(pair, geom);
    const CVector yv = vectorize(y);
    const double n = static_cast<double>(yv.size());
    const double log_pi = std::log(kPi);

    PosteriorState out = state;
    RVector loglik(state.size());
    for (Eigen::Index g = 0; g < state.size(); ++g) {
        const ConditionalGaussian& cg = state.conditionals[g];
        CMatrix c = observation_matrix(state.points.col(g), ctx);
        PredictiveMoments pm = moments_at(cg, c, ctx);
        RobustCholesky chol(pm.cov);
        if (chol.shifted) ++out.regularized;
        CVector innov = yv - pm.mean;
        CVector white = chol.llt.solve(innov);
        if (flags.weights) {
            double quad = innov.dot(white).real();
            loglik(g) = -n * log_pi - chol.log_det() - quad;
        }
        if (flags.conditionals) {
            // Gain K = Sigma_ay Sigma_y^{-1}; covariance in Joseph form to keep it PSD.
            CMatrix gain = chol.llt.solve(pm.cross.adjoint()).adjoint();
            ConditionalGaussian& next = out.conditionals[g];
            next.mean = cg.mean + gain * innov;
            CMatrix i_kc = CMatrix::Identity(cg.cov.rows(), cg.cov.cols()) - gain * c;
            next.cov = hermitian_part(i_kc * cg.cov * i_kc.adjoint() +
                                      gain * ctx.noise * gain.adjoint());
        }
    }
    if (flags.weights) {
        RVector lw = state.log_weights + loglik;
        double z = log_sum_exp(lw);
        if (!std::isfinite(z)) {
            lw.setConstant(-std::log(static_cast<double>(state.size())));
        } else {
            lw.array() -= z;
        }
        out.log_weights = lw;
    }
    if (flags.conditionals) out.history.push_back({pair.v, pair.w, y});
    return out;
}

}  // namespace

double log_sum_exp(const RVector& x) {
    if (x.size() == 0) return -std::numeric_limits<double>::infinity();
    double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.array() - m).exp().sum());
}

PosteriorState PosteriorState::point_mass(const SceneParams& scene, const CMatrix& cov) {
    PosteriorState s;
    const int l = scene.num_targets();
    s.targets = l;
    s.points = scene.angles;
    s.log_weights = RVector::Zero(1);
    CMatrix c = cov.size() == 0 ? CMatrix::Zero(l, l) : cov;
    if (c.rows() != l || c.cols() != l) throw DimensionMismatch("point_mass: covariance shape");
    s.conditionals.push_back({scene.coeffs, c});
    return s;
}

PosteriorState init_posterior(AngleRange range, int per_angle, int targets, std::size_t cap) {
    if (targets < 1) throw ConfigurationError("need at least one target");
    if (per_angle < 1) throw ConfigurationError("grid size must be positive");
    if (!(range.max > range.min) && per_angle > 1)
        throw ConfigurationError("angle range must satisfy min < max");
    double total = std::pow(static_cast<double>(per_angle), targets);
    if (total > static_cast<double>(cap))
        throw ConfigurationError("grid of " + std::to_string(per_angle) + "^" +
                                 std::to_string(targets) + " points exceeds the cap of " +
                                 std::to_string(cap));
    const auto size = static_cast<Eigen::Index>(total);
    RVector axis = per_angle == 1 ? RVector(RVector::Constant(1, 0.5 * (range.min + range.max)))
                                  : RVector(RVector::LinSpaced(per_angle, range.min, range.max));

    PosteriorState s;
    s.targets = targets;
    s.points.resize(targets, size);
    for (Eigen::Index g = 0; g < size; ++g) {
        Eigen::Index rem = g;
        for (int t = 0; t < targets; ++t) {
            s.points(t, g) = axis(rem % per_angle);
            rem /= per_angle;
        }
    }
    s.log_weights = RVector::Constant(size, -std::log(static_cast<double>(size)));
    s.conditionals.assign(size, {CVector::Zero(targets), CMatrix::Identity(targets, targets)});
    return s;
}

CMatrix observation_operator(const RVector& angles, const BeamformerPair& pair,
                             const ArrayGeometry& geom) {
    StageContext ctx(pair, geom);
    return observation_matrix(angles, ctx);
}

PredictiveMoments predictive_moments(const PosteriorState& state, Eigen::Index g,
                                     const BeamformerPair& pair, const ArrayGeometry& geom) {
    StageContext ctx(pair, geom);
    CMatrix c = observation_matrix(state.points.col(g), ctx);
    return moments_at(state.conditionals.at(g), c, ctx);
}

PosteriorState kalman_update(const PosteriorState& state, const BeamformerPair& pair,
                             const ArrayGeometry& geom, const CMatrix& y) {
    return update(state, pair, geom, y, {false, true});
}

PosteriorState bayes_weight_update(const PosteriorState& state, const BeamformerPair& pair,
                                   const ArrayGeometry& geom, const CMatrix& y) {
    return update(state, pair, geom, y, {true, false});
}

PosteriorState assimilate(const PosteriorState& state, const BeamformerPair& pair,
                          const ArrayGeometry& geom, const CMatrix& y) {
    return update(state, pair, geom, y, {true, true});
}

SceneParams mmse_estimate(const PosteriorState& state) {
    // The product grid holds every labelling of a target set, so each tuple is sorted by angle
    // (carrying its coefficients along) before averaging.
    RVector w = state.weights();
    RVector angles = RVector::Zero(state.targets);
    CVector coeffs = CVector::Zero(state.targets);
    std::vector<int> order(state.targets);
    for (Eigen::Index g = 0; g < state.size(); ++g) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return state.points(a, g) < state.points(b, g); });
        for (int i = 0; i < state.targets; ++i) {
            angles(i) += w(g) * state.points(order[i], g);
            coeffs(i) += w(g) * state.conditionals[g].mean(order[i]);
        }
    }
    return SceneParams(angles, coeffs);
}

SecondMoments posterior_second_moments(const PosteriorState& state, Eigen::Index g) {
    const ConditionalGaussian& cg = state.conditionals.at(g);
    // Circular conditionals have zero pseudo-covariance.
    return {cg.mean, cg.cov + cg.mean * cg.mean.adjoint(), cg.mean * cg.mean.transpose()};
}

double weight_entropy(const PosteriorState& state) {
    double h = 0.0;
    for (Eigen::Index g = 0; g < state.size(); ++g) {
        double lw = state.log_weights(g);
        if (std::isfinite(lw)) h -= std::exp(lw) * lw;
    }
    return h;
}

}  // namespace activesense
