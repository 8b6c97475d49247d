#include "doctest.h"
#include "oracles.hpp"

#include "activesense/bfim.hpp"
#include "activesense/random.hpp"

using namespace activesense;

namespace {

// Fisher information of Y = W^H H V + W^H Z at a fixed theta, from finite-difference Jacobians
// of the independent response.
RMatrix fisher_at(const RVector& theta, const CMatrix& v, const CMatrix& w) {
    const int n_tx = static_cast<int>(v.rows()), n_rx = static_cast<int>(w.rows());
    const Eigen::Index p = theta.size();
    const double h = 1e-6;
    std::vector<CMatrix> d(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        RVector a = theta, b = theta;
        a(i) += h;
        b(i) -= h;
        d[i] = oracle::whitener(w) * w.adjoint() *
               (oracle::response(a, n_tx, n_rx) - oracle::response(b, n_tx, n_rx)) * v / (2 * h);
    }
    RMatrix j(p, p);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index k = 0; k < p; ++k) j(i, k) = 2.0 * (d[i].adjoint() * d[k]).trace().real();
    return j;
}

RMatrix expected_fisher(const PosteriorState& post, const CMatrix& v, const CMatrix& w) {
    const int l = post.targets;
    RMatrix out = RMatrix::Zero(3 * l, 3 * l);
    RVector wg = post.weights();
    for (Eigen::Index g = 0; g < post.size(); ++g) {
        const ConditionalGaussian& cg = post.conditionals[g];
        for (const oracle::Node& n : oracle::gauss_hermite_nodes(cg.mean, cg.cov)) {
            RVector theta(3 * l);
            theta << post.points.col(g), n.alpha.real(), n.alpha.imag();
            out += wg(g) * n.weight * fisher_at(theta, v, w);
        }
    }
    return out;
}

PosteriorState random_mixture(int per_angle, int targets, std::mt19937_64& rng) {
    PosteriorState s = init_posterior({-1.0, 1.0}, per_angle, targets);
    std::uniform_real_distribution<double> u(-2.0, 0.0);
    for (Eigen::Index g = 0; g < s.size(); ++g) {
        s.log_weights(g) = u(rng);
        CMatrix a = oracle::randn(targets, targets, rng);
        s.conditionals[g] = {oracle::randn(targets, 1, rng).col(0), 0.3 * a * a.adjoint()};
    }
    s.log_weights.array() -= log_sum_exp(s.log_weights);
    return s;
}

void clip_psd(RMatrix& m) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (m + m.transpose()));
    m = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
        es.eigenvectors().transpose();
}

}  // namespace

TEST_CASE("angle weights and weight checks") {
    RVector q = angle_weights(2);
    REQUIRE(q.size() == 6);
    CHECK(q(0) == 0.5);
    CHECK(q(1) == 0.5);
    CHECK(q.tail(4).norm() == 0.0);
    CHECK_THROWS_AS(check_weights(RVector::Ones(4), 6), DimensionMismatch);
}

TEST_CASE("receive projector and orthonormal basis") {
    std::mt19937_64 rng(21);
    CMatrix w = oracle::randn(5, 2, rng);
    CMatrix p = rx_projector(w);
    CHECK((p * p - p).norm() < 1e-12);
    CHECK((p * w - w).norm() < 1e-12);
    CMatrix u = orthonormal_basis(w);
    CHECK((u.adjoint() * u - CMatrix::Identity(2, 2)).norm() < 1e-12);
    CHECK((u * u.adjoint() - p).norm() < 1e-12);
    CMatrix deficient(5, 2);
    deficient << w.col(0), 2.0 * w.col(0);
    CHECK_THROWS_AS(orthonormal_basis(deficient), NonIdentifiable);
}

TEST_CASE("data FIM at a point posterior equals the Fisher information") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 4; ++trial) {
        const int l = 1 + trial % 2;
        ArrayGeometry g(3, 4);
        SceneParams s(RVector::LinSpaced(l, -0.4, 0.5), oracle::randn(l, 1, rng).col(0));
        CMatrix v = oracle::randn(3, 2, rng), w = oracle::randn(4, 2, rng);
        RMatrix j = data_fim(PosteriorState::point_mass(s), v, rx_projector(w), g);
        RMatrix ref = fisher_at(s.to_real(), v, w);
        CHECK((j - ref).norm() < 1e-6 * ref.norm());
    }
}

TEST_CASE("data FIM of a mixture averages the Fisher information over the posterior") {
    std::mt19937_64 rng(23);
    for (int l : {1, 2}) {
        ArrayGeometry g(2, 3);
        PosteriorState s = random_mixture(3, l, rng);
        CMatrix v = oracle::randn(2, 1, rng), w = oracle::randn(3, 2, rng);
        RMatrix j = data_fim(s, v, rx_projector(w), g);
        RMatrix ref = expected_fisher(s, v, w);
        CHECK((j - ref).norm() < 1e-6 * ref.norm());
    }
}

TEST_CASE("information tensors are linear in the free covariance and agree with data_fim") {
    std::mt19937_64 rng(24);
    ArrayGeometry g(3, 4);
    PosteriorState s = random_mixture(4, 1, rng);
    CMatrix v = oracle::randn(3, 2, rng), w = oracle::randn(4, 2, rng);
    RMatrix ref = data_fim(s, v, rx_projector(w), g);

    InformationTensor rx = InformationTensor::receive(s, v, g);
    InformationTensor tx = InformationTensor::transmit(s, w, g);
    CHECK(rx.dim() == 4);
    CHECK(tx.dim() == 3);
    CHECK((rx.fim(rx_projector(w)) - ref).norm() < 1e-10 * ref.norm());
    CHECK((tx.fim(v * v.adjoint()) - ref).norm() < 1e-10 * ref.norm());

    CMatrix r1 = oracle::randn(4, 4, rng), r2 = oracle::randn(4, 4, rng);
    r1 = r1 * r1.adjoint();
    r2 = r2 * r2.adjoint();
    RMatrix lin = 0.3 * rx.fim(r1) + 1.7 * rx.fim(r2);
    CHECK((rx.fim(0.3 * r1 + 1.7 * r2) - lin).norm() < 1e-10 * lin.norm());

    RMatrix a = RMatrix::Random(3, 3);
    a = 0.5 * (a + a.transpose());
    CMatrix dir = rx.direction(a);
    CHECK((dir - dir.adjoint()).norm() < 1e-12 * dir.norm());
    double lhs = 2.0 * (r1 * dir).trace().real();
    double rhs = a.cwiseProduct(rx.fim(r1)).sum();
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("prior FIM without measurements carries only the coefficient prior") {
    PosteriorState s = init_posterior({-1.0, 1.0}, 4, 2);
    PriorFim p = prior_fim(s, ArrayGeometry(2, 2));
    RVector d(6);
    d << 0, 0, 2, 2, 2, 2;
    CHECK((p.matrix - RMatrix(d.asDiagonal())).norm() == 0.0);
    CHECK(p.clipped == 0.0);
}

TEST_CASE("prior FIM matches the expected negative Hessian of the log posterior") {
    std::mt19937_64 rng(25);
    for (int l : {1, 2}) {
        ArrayGeometry g(2, 3);
        PosteriorState s = init_posterior({-0.8, 0.8}, l == 1 ? 7 : 3, l);
        SceneParams truth(RVector::LinSpaced(l, 0.1, -0.3), oracle::randn(l, 1, rng).col(0));
        std::vector<oracle::Stage> stages;
        for (int k = 0; k < 2; ++k) {
            BeamformerPair pair{oracle::randn(2, 1 + k, rng), oracle::randn(3, 2, rng)};
            CMatrix y = simulate_measurement(truth, g, pair, rng);
            s = assimilate(s, pair, g, y);
            stages.push_back({pair.v, pair.w, y});
        }
        auto loglik = [&](const RVector& theta) {
            double v = 0.0;
            for (const oracle::Stage& st : stages)
                v += oracle::log_likelihood(theta, st.y, st.v, st.w);
            return v;
        };
        RMatrix ref = RMatrix::Zero(3 * l, 3 * l);
        RVector wg = s.weights();
        for (Eigen::Index i = 0; i < s.size(); ++i) {
            const ConditionalGaussian& cg = s.conditionals[i];
            for (const oracle::Node& n : oracle::gauss_hermite_nodes(cg.mean, cg.cov)) {
                RVector theta(3 * l);
                theta << s.points.col(i), n.alpha.real(), n.alpha.imag();
                ref -= wg(i) * n.weight * oracle::fd_hessian(loglik, theta, 1e-4);
            }
        }
        ref.diagonal().tail(2 * l).array() += 2.0;
        RMatrix raw = ref;
        clip_psd(ref);

        PriorFim p = prior_fim(s, g);
        CHECK((p.matrix - ref).norm() < 1e-5 * (1.0 + ref.norm()));
        Eigen::SelfAdjointEigenSolver<RMatrix> es(0.5 * (raw + raw.transpose()));
        double clipped = -es.eigenvalues().cwiseMin(0.0).sum();
        CHECK(std::abs(p.clipped - clipped) < 1e-5 * (1.0 + ref.norm()));
    }
}

TEST_CASE("BCRB value") {
    RMatrix j(3, 3);
    j << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
    RVector q(3);
    q << 1, 0, 2;
    RMatrix inv = j.inverse();
    CHECK(bcrb_value(q, j) == doctest::Approx(inv(0, 0) + 2 * inv(2, 2)).epsilon(1e-13));

    RMatrix singular = RMatrix::Zero(3, 3);
    singular(0, 0) = 1.0;
    try {
        bcrb_value(q, singular);
        FAIL("expected NonIdentifiable");
    } catch (const NonIdentifiable& e) {
        CHECK(e.smallest_eigenvalue() <= 0.0);
    }
    RMatrix ill = RMatrix::Identity(3, 3);
    ill(2, 2) = 1e-13;
    CHECK_THROWS_AS(bcrb_value(q, ill), NonIdentifiable);
    CHECK_THROWS_AS(bcrb_value(RVector::Ones(2), j), DimensionMismatch);
}
