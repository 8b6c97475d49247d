#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "activesense/bfim.hpp"

namespace activesense {

enum class ProblemKind { RxCombiner, TxExploit, TxExplore };

std::string to_string(ProblemKind kind);

// Hermitian matrix with its spectrum sorted in descending order.
struct SpectralMatrix {
    CMatrix matrix;
    RVector values;
    CMatrix vectors;

    SpectralMatrix() = default;
    explicit SpectralMatrix(const CMatrix& m);

    double top_sum(int r) const;
    // mu_r - mu_{r+1} (1-based); infinite when r covers the whole space.
    double gap(int r) const;
};

// Sum of the m largest eigenvalues of a Hermitian matrix.
double ky_fan_value(const CMatrix& m, int count);

// Dual of one beamformer subproblem with the other side held fixed:
//   f(L) = 2 tr(L Q^{1/2}) - tr(L^T J^P L) - 2 s * (sum of the top r eigenvalues of P_{L L^T}),
// where s = scale() and r = rank(). Its relaxed primal minimizes tr(Q J(R)^{-1}) over
//   { R : 0 <= R <= cap() I, tr R = budget() }.
class DualProblem {
public:
    DualProblem(ProblemKind kind, InformationTensor tensor, RMatrix prior, RVector q,
                double power, int columns);

    static DualProblem receive(const PosteriorState& post, const CMatrix& v, const RMatrix& prior,
                               const RVector& q, const ArrayGeometry& geom, int m_rx);
    static DualProblem transmit(ProblemKind kind, const PosteriorState& post, const CMatrix& w,
                                const RMatrix& prior, const RVector& q, const ArrayGeometry& geom,
                                double power, int m_tx);

    ProblemKind kind() const { return kind_; }
    const InformationTensor& tensor() const { return tensor_; }
    const RMatrix& prior() const { return prior_; }
    const RVector& weights() const { return q_; }
    const RVector& weights_sqrt() const { return q_sqrt_; }
    int params() const { return tensor_.params(); }
    int dim() const { return tensor_.dim(); }
    int rank() const { return rank_; }
    double scale() const { return scale_; }
    double cap() const { return cap_; }
    double budget() const { return budget_; }

    SpectralMatrix direction(const RMatrix& lambda) const;
    double objective(const RMatrix& lambda) const;
    double objective(const RMatrix& lambda, const SpectralMatrix& dir) const;
    // Minimizing covariance for a fixed multiplier: scale * (projector on the top r eigenvectors).
    CMatrix covariance(const SpectralMatrix& dir) const;
    RMatrix information(const CMatrix& r) const;
    // 2 Q^{1/2} - 2 J(R(L)) L; a subgradient when the eigengap vanishes.
    RMatrix gradient(const RMatrix& lambda) const;
    double primal(const CMatrix& r) const;

private:
    ProblemKind kind_;
    InformationTensor tensor_;
    RMatrix prior_;
    RVector q_, q_sqrt_;
    int rank_;
    double scale_, cap_, budget_;
};

// Euclidean projection of a Hermitian matrix onto { 0 <= R <= cap I, tr R = budget }.
CMatrix project_spectral(const CMatrix& r, double cap, double budget);

struct DualOptions {
    double grad_tol = 1e-7;      // relative to 1 + |f|
    double kkt_tol = 1e-8;
    double gap_tol = 1e-9;       // duality gap, relative to |f|
    int max_iters = 2000;
    double damping = 0.5;
    double backtrack = 0.5;
    double armijo = 1e-4;
    double certificate_tol = 1e-8;
    // The eigengap only certifies a stationary point: the KKT residual must also be within this
    // tolerance, relative to 1 + |L|.
    double certificate_kkt_tol = 1e-5;
    int polish_iters = 100;
    bool relaxation_fallback = true;
    int relaxation_max_iters = 4000;
    // Accepted duality gap (relative to |f|) once the relaxation can make no further progress.
    double stall_gap_tol = 1e-6;
};

struct DualSolution {
    ProblemKind kind = ProblemKind::RxCombiner;
    RMatrix lambda;
    SpectralMatrix direction;
    double objective = 0.0;
    double grad_norm = 0.0;
    double eigengap = 0.0;
    bool certificate = false;
    double kkt_residual = 0.0;
    double duality_gap = 0.0;
    double primal = 0.0;        // best relaxed primal value seen
    CMatrix primal_covariance;  // where it was attained
    int iterations = 0;
    int relaxation_iterations = 0;
    bool used_relaxation = false;
    bool converged = false;
    std::vector<double> objective_trace;

    // key=value diagnostics line
    std::string summary() const;
};

class NonConverged : public Error {
public:
    NonConverged(const std::string& what, DualSolution best)
        : Error(what), best_(std::move(best)) {}
    const DualSolution& best() const { return best_; }

private:
    DualSolution best_;
};

DualSolution solve_dual(const DualProblem& problem, const DualOptions& options = {});

struct ExtractedBeamformer {
    CMatrix matrix;      // W (N_R x M_R) or V (N_T x M_T)
    CMatrix covariance;  // W W^H or V V^H
    bool certificate = false;
    bool randomized = false;
};

// Top-eigenvector beamformer; ties at the rank boundary are broken by a seeded random basis of
// the tied eigenspace.
ExtractedBeamformer extract_beamformers(const DualProblem& problem, const DualSolution& solution,
                                        std::uint64_t seed);

}  // namespace activesense
