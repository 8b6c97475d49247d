#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "activesense/common.hpp"

namespace activesense {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives independent generator streams from one root seed, keyed by a tag and two counters.
class SeedSequence {
public:
    explicit SeedSequence(std::uint64_t root = 0) : root_(root) {}

    std::uint64_t root() const { return root_; }

    std::uint64_t derive(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) const {
        std::uint64_t h = mix64(root_ ^ hash_tag(tag));
        h = mix64(h ^ (a * 0xd6e8feb86659fd93ULL));
        return mix64(h ^ (b * 0xa0761d6478bd642fULL));
    }

    std::mt19937_64 stream(std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0) const {
        return std::mt19937_64(derive(tag, a, b));
    }

    SeedSequence child(std::string_view tag, std::uint64_t a = 0) const {
        return SeedSequence(derive(tag, a));
    }

private:
    std::uint64_t root_;
};

// Matrix of i.i.d. circular complex Gaussians with unit variance.
inline CMatrix complex_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    CMatrix z(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) {
            double re = n(rng);
            double im = n(rng);
            z(i, j) = cd(re, im);
        }
    return z;
}

// Haar-distributed n x m matrix with orthonormal columns (QR with phase correction).
inline CMatrix haar_orthonormal(Eigen::Index n, Eigen::Index m, std::mt19937_64& rng) {
    if (m > n) throw DimensionMismatch("haar_orthonormal: more columns than rows");
    CMatrix g = complex_gaussian(n, m, rng);
    Eigen::HouseholderQR<CMatrix> qr(g);
    CMatrix q = qr.householderQ() * CMatrix::Identity(n, m);
    const CMatrix& r = qr.matrixQR();
    for (Eigen::Index k = 0; k < m; ++k) {
        double mag = std::abs(r(k, k));
        cd phase = mag > 0.0 ? r(k, k) / mag : cd(1.0, 0.0);
        q.col(k) *= phase;
    }
    return q;
}

}  // namespace activesense
