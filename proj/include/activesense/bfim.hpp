#pragma once

#include <vector>

#include "activesense/posterior.hpp"

namespace activesense {

// Diagonal weights on [angles; Re coeffs; Im coeffs]; uniform over the angles only.
RVector angle_weights(int targets);
void check_weights(const RVector& q, int params);

// W (W^H W)^{-1} W^H
CMatrix rx_projector(const CMatrix& w);
// Orthonormal basis of range(W); throws when W is rank deficient.
CMatrix orthonormal_basis(const CMatrix& w);

enum class TensorSide { Receive, Transmit };

// Posterior-averaged blocks K_ij, linear in the free beamformer covariance R:
//   receive:  K_ij = E[Hdot_i R_V Hdot_j^H]   (R = R_W, dimension N_R)
//   transmit: K_ij = E[Hdot_i^H R_W Hdot_j]   (R = R_V, dimension N_T)
// so that the data information is J_ij = 2 Re tr(R K_ij).
class InformationTensor {
public:
    static InformationTensor receive(const PosteriorState& post, const CMatrix& v,
                                     const ArrayGeometry& geom);
    static InformationTensor transmit(const PosteriorState& post, const CMatrix& w,
                                      const ArrayGeometry& geom);

    TensorSide side() const { return side_; }
    int params() const { return params_; }
    int dim() const { return dim_; }
    const CMatrix& block(int i, int j) const { return blocks_[i * params_ + j]; }

    RMatrix fim(const CMatrix& r) const;
    // sum_ij A_ij K_ij for symmetric A
    CMatrix direction(const RMatrix& a) const;

private:
    InformationTensor(TensorSide side, int params, int dim);
    static InformationTensor build(TensorSide side, const PosteriorState& post,
                                   const CMatrix& basis, const ArrayGeometry& geom);

    TensorSide side_;
    int params_;
    int dim_;
    std::vector<CMatrix> blocks_;
};

// Expected data information of the next measurement for precoder V and combiner projector R_W.
RMatrix data_fim(const PosteriorState& post, const CMatrix& v, const CMatrix& r_w,
                 const ArrayGeometry& geom);

struct PriorFim {
    RMatrix matrix;       // symmetric PSD after clipping
    double clipped = 0.0; // total magnitude of the negative eigenvalues removed
};

// Expected negative Hessian of the log posterior given the stored history.
PriorFim prior_fim(const PosteriorState& post, const ArrayGeometry& geom);

// tr(diag(q) J^{-1}); throws NonIdentifiable if J is singular or badly conditioned.
double bcrb_value(const RVector& q, const RMatrix& j);

inline constexpr double kMaxCondition = 1e12;

}  // namespace activesense
