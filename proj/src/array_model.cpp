#include "activesense/array_model.hpp"

#include <cmath>
#include <string>

#include "activesense/random.hpp"

namespace activesense {

ArrayGeometry::ArrayGeometry(int tx, int rx) : n_tx(tx), n_rx(rx) {
    if (tx < 1 || rx < 1)
        throw ConfigurationError("array sizes must be positive, got n_tx=" + std::to_string(tx) +
                                 " n_rx=" + std::to_string(rx));
}

SceneParams::SceneParams(RVector a, CVector c) : angles(std::move(a)), coeffs(std::move(c)) {
    if (angles.size() != coeffs.size())
        throw DimensionMismatch("scene: angle and coefficient counts differ");
}

RVector SceneParams::to_real() const {
    const int l = num_targets();
    RVector theta(3 * l);
    theta.head(l) = angles;
    theta.segment(l, l) = coeffs.real();
    theta.tail(l) = coeffs.imag();
    return theta;
}

SceneParams SceneParams::from_real(const RVector& theta) {
    if (theta.size() % 3 != 0) throw DimensionMismatch("parameter vector length must be 3L");
    const Eigen::Index l = theta.size() / 3;
    CVector c(l);
    for (Eigen::Index i = 0; i < l; ++i) c(i) = cd(theta(l + i), theta(2 * l + i));
    return SceneParams(theta.head(l), c);
}

ParamIndex param_index(int flat, int num_targets) {
    if (flat < 0 || flat >= 3 * num_targets) throw DimensionMismatch("parameter index out of range");
    return {static_cast<ParamKind>(flat / num_targets), flat % num_targets};
}

int flat_index(ParamIndex p, int num_targets) {
    return static_cast<int>(p.kind) * num_targets + p.target;
}

CVector steering_vector(int count, double angle) {
    const double s = kPi * std::sin(angle);
    CVector a(count);
    for (int n = 0; n < count; ++n) a(n) = std::polar(1.0, s * n);
    return a;
}

CVector steering_derivative(int count, double angle) {
    CVector a = steering_vector(count, angle);
    const double c = kPi * std::cos(angle);
    for (int n = 0; n < count; ++n) a(n) *= cd(0.0, c * n);
    return a;
}

CVector steering_second_derivative(int count, double angle) {
    CVector a = steering_vector(count, angle);
    const double s = kPi * std::sin(angle);
    const double c = kPi * std::cos(angle);
    for (int n = 0; n < count; ++n) a(n) *= cd(-c * c * n * n, -s * n);
    return a;
}

SteeringSet::SteeringSet(const ArrayGeometry& geom, double angle) {
    auto fill = [angle](int count, CVector& a, CVector& d1, CVector& d2) {
        const double s = kPi * std::sin(angle);
        const double c = kPi * std::cos(angle);
        a.resize(count);
        d1.resize(count);
        d2.resize(count);
        for (int n = 0; n < count; ++n) {
            a(n) = std::polar(1.0, s * n);
            d1(n) = a(n) * cd(0.0, c * n);
            d2(n) = a(n) * cd(-c * c * n * n, -s * n);
        }
    };
    fill(geom.n_rx, rx, rx_d1, rx_d2);
    fill(geom.n_tx, tx, tx_d1, tx_d2);
}

CMatrix target_response(const SceneParams& scene, const ArrayGeometry& geom) {
    CMatrix h = CMatrix::Zero(geom.n_rx, geom.n_tx);
    for (int i = 0; i < scene.num_targets(); ++i) {
        CVector ar = steering_vector(geom.n_rx, scene.angles(i));
        CVector at = steering_vector(geom.n_tx, scene.angles(i));
        h.noalias() += scene.coeffs(i) * ar * at.adjoint();
    }
    return h;
}

CMatrix response_jacobian(const SceneParams& scene, const ArrayGeometry& geom, int index) {
    const ParamIndex p = param_index(index, scene.num_targets());
    SteeringSet s(geom, scene.angles(p.target));
    switch (p.kind) {
        case ParamKind::Angle:
            return scene.coeffs(p.target) * (s.rx_d1 * s.tx.adjoint() + s.rx * s.tx_d1.adjoint());
        case ParamKind::RealCoeff:
            return s.rx * s.tx.adjoint();
        case ParamKind::ImagCoeff:
            return cd(0.0, 1.0) * (s.rx * s.tx.adjoint());
    }
    return {};
}

CMatrix response_hessian(const SceneParams& scene, const ArrayGeometry& geom, int i, int j) {
    const int l = scene.num_targets();
    ParamIndex a = param_index(i, l);
    ParamIndex b = param_index(j, l);
    if (static_cast<int>(a.kind) > static_cast<int>(b.kind)) std::swap(a, b);
    CMatrix zero = CMatrix::Zero(geom.n_rx, geom.n_tx);
    if (a.target != b.target || a.kind != ParamKind::Angle) return zero;

    SteeringSet s(geom, scene.angles(a.target));
    CMatrix d = s.rx_d1 * s.tx.adjoint() + s.rx * s.tx_d1.adjoint();
    switch (b.kind) {
        case ParamKind::Angle:
            return scene.coeffs(a.target) *
                   (s.rx_d2 * s.tx.adjoint() + 2.0 * s.rx_d1 * s.tx_d1.adjoint() +
                    s.rx * s.tx_d2.adjoint());
        case ParamKind::RealCoeff:
            return d;
        case ParamKind::ImagCoeff:
            return cd(0.0, 1.0) * d;
    }
    return zero;
}

void check_beamformers(const BeamformerPair& pair, const ArrayGeometry& geom) {
    if (pair.v.rows() != geom.n_tx)
        throw DimensionMismatch("precoder has " + std::to_string(pair.v.rows()) +
                                " rows, expected " + std::to_string(geom.n_tx));
    if (pair.w.rows() != geom.n_rx)
        throw DimensionMismatch("combiner has " + std::to_string(pair.w.rows()) +
                                " rows, expected " + std::to_string(geom.n_rx));
    if (pair.v.cols() < 1 || pair.w.cols() < 1)
        throw DimensionMismatch("beamformers need at least one column");
}

CMatrix simulate_measurement(const SceneParams& scene, const ArrayGeometry& geom,
                             const BeamformerPair& pair, std::mt19937_64& rng) {
    check_beamformers(pair, geom);
    CMatrix z = complex_gaussian(geom.n_rx, pair.v.cols(), rng);
    CMatrix h = target_response(scene, geom);
    return pair.w.adjoint() * (h * pair.v + z);
}

RVector beampattern(const CVector& weights, ArraySide side, const ArrayGeometry& geom,
                    const RVector& angles) {
    const int n = geom.count(side);
    if (weights.size() != n) throw DimensionMismatch("beampattern: weight length mismatch");
    RVector g(angles.size());
    for (Eigen::Index k = 0; k < angles.size(); ++k)
        g(k) = std::norm(weights.dot(steering_vector(n, angles(k))));
    return g;
}

}  // namespace activesense
