#pragma once

#include <random>
#include <vector>

#include "activesense/common.hpp"

namespace activesense {

enum class ArraySide { Tx, Rx };

struct ArrayGeometry {
    int n_tx = 1;
    int n_rx = 1;

    ArrayGeometry() = default;
    ArrayGeometry(int tx, int rx);
    int count(ArraySide side) const { return side == ArraySide::Tx ? n_tx : n_rx; }
};

// Angles in radians and complex reflection coefficients, one entry per target.
struct SceneParams {
    RVector angles;
    CVector coeffs;

    SceneParams() = default;
    SceneParams(RVector angles, CVector coeffs);

    int num_targets() const { return static_cast<int>(angles.size()); }
    int num_params() const { return 3 * num_targets(); }
    // [angles; Re coeffs; Im coeffs]
    RVector to_real() const;
    static SceneParams from_real(const RVector& theta);
};

// V is N_T x M_T, W is N_R x M_R.
struct BeamformerPair {
    CMatrix v;
    CMatrix w;
};

enum class ParamKind { Angle, RealCoeff, ImagCoeff };

struct ParamIndex {
    ParamKind kind;
    int target;
};

// Flat layout: [angle_0..angle_{L-1}, Re_0..Re_{L-1}, Im_0..Im_{L-1}].
ParamIndex param_index(int flat, int num_targets);
int flat_index(ParamIndex p, int num_targets);

// a(phi)_n = exp(i pi n sin phi), n = 0..count-1; element 0 is the phase reference.
CVector steering_vector(int count, double angle);
CVector steering_derivative(int count, double angle);
CVector steering_second_derivative(int count, double angle);

// Steering vector and its first two angle derivatives on both arrays.
struct SteeringSet {
    CVector rx, rx_d1, rx_d2;
    CVector tx, tx_d1, tx_d2;

    SteeringSet() = default;
    SteeringSet(const ArrayGeometry& geom, double angle);
};

CMatrix target_response(const SceneParams& scene, const ArrayGeometry& geom);
CMatrix response_jacobian(const SceneParams& scene, const ArrayGeometry& geom, int index);
CMatrix response_hessian(const SceneParams& scene, const ArrayGeometry& geom, int i, int j);

void check_beamformers(const BeamformerPair& pair, const ArrayGeometry& geom);

// Y = W^H H V + W^H Z with Z having i.i.d. CN(0,1) entries.
CMatrix simulate_measurement(const SceneParams& scene, const ArrayGeometry& geom,
                             const BeamformerPair& pair, std::mt19937_64& rng);

// |w^H a_R(phi)|^2 (Rx) or |v^H a_T(phi)|^2 (Tx) on the given angles.
RVector beampattern(const CVector& weights, ArraySide side, const ArrayGeometry& geom,
                    const RVector& angles);

}  // namespace activesense
