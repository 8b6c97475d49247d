#include "doctest.h"
#include "instances.hpp"

#include "activesense/alternating.hpp"

using namespace activesense;

namespace {

struct Setup {
    ArrayGeometry geom;
    PosteriorState post;
    RMatrix prior;
};

Setup random_setup(std::mt19937_64& rng) {
    ArrayGeometry g(3, 4);
    PosteriorState post = instances::random_posterior(5, 1, rng);
    return {g, post, prior_fim(post, g).matrix};
}

}  // namespace

TEST_CASE("alternating trace is non-increasing and matches an independent bound") {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 6; ++trial) {
        Setup s = random_setup(rng);
        AlternatingConfig cfg;
        cfg.m_tx = 2;
        cfg.m_rx = 2;
        cfg.power = 3.0;
        cfg.i_max = 4;
        cfg.explore = trial % 2 == 1;
        CMatrix v0 = std::sqrt(cfg.power / 2) * haar_orthonormal(3, 2, rng);
        AlternatingResult r = alternating_optimize(s.post, s.prior, s.geom, cfg, v0,
                                                   SeedSequence(trial));
        REQUIRE(r.beta.size() == 4);
        for (std::size_t k = 1; k < r.beta.size(); ++k) CHECK(r.beta[k] <= r.beta[k - 1] + 1e-9);
        CHECK(r.rx_solutions.size() == 4);
        CHECK(r.tx_solutions.size() == 4);

        RMatrix j = s.prior + data_fim(s.post, r.pair.v, rx_projector(r.pair.w), s.geom);
        double bound = j.inverse()(0, 0);
        CHECK(bound == doctest::Approx(r.beta.back()).epsilon(1e-8));
        CHECK(r.pair.v.squaredNorm() == doctest::Approx(cfg.power).epsilon(1e-10));
        CHECK((r.pair.w.adjoint() * r.pair.w - CMatrix::Identity(2, 2)).norm() < 1e-10);
        if (cfg.explore) {
            CMatrix gram = r.pair.v.adjoint() * r.pair.v;
            CHECK((gram - 1.5 * CMatrix::Identity(2, 2)).norm() < 1e-9);
        }
    }
}

TEST_CASE("alternating optimization is deterministic for a fixed seed") {
    std::mt19937_64 rng(42);
    Setup s = random_setup(rng);
    AlternatingConfig cfg;
    cfg.power = 2.0;
    cfg.i_max = 2;
    CMatrix v0 = std::sqrt(2.0) * haar_orthonormal(3, 1, rng);
    AlternatingResult a = alternating_optimize(s.post, s.prior, s.geom, cfg, v0, SeedSequence(3));
    AlternatingResult b = alternating_optimize(s.post, s.prior, s.geom, cfg, v0, SeedSequence(3));
    CHECK((a.pair.v - b.pair.v).norm() == 0.0);
    CHECK((a.pair.w - b.pair.w).norm() == 0.0);
    CHECK(a.beta == b.beta);
}

TEST_CASE("alternating optimization validates its inputs") {
    std::mt19937_64 rng(43);
    Setup s = random_setup(rng);
    AlternatingConfig cfg;
    cfg.i_max = 0;
    CHECK_THROWS_AS(alternating_optimize(s.post, s.prior, s.geom, cfg, CMatrix::Ones(3, 1), SeedSequence()),
                    ConfigurationError);
    cfg.i_max = 1;
    CHECK_THROWS_AS(alternating_optimize(s.post, s.prior, s.geom, cfg, CMatrix::Ones(2, 1), SeedSequence()),
                    DimensionMismatch);
}
