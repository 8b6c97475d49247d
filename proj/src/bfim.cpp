#include "activesense/bfim.hpp"

#include <cmath>
#include <string>

namespace activesense {

namespace {

constexpr double kNegligibleWeight = 1e-18;
const cd kI(0.0, 1.0);

// Frobenius inner product tr(X Y^H).
cd inner(const CMatrix& x, const CMatrix& y) { return x.cwiseProduct(y.conjugate()).sum(); }

// E[c_i c_j^*] for Hdot_i = c_i M_i, with c = [alpha; 1; i].
CMatrix coefficient_moments(const CVector& mean, const CMatrix& second) {
    const Eigen::Index l = mean.size();
    CMatrix e(3 * l, 3 * l);
    for (Eigen::Index a = 0; a < l; ++a)
        for (Eigen::Index b = 0; b < l; ++b) {
            e(a, b) = second(a, b);
            e(a, l + b) = mean(a);
            e(a, 2 * l + b) = -kI * mean(a);
            e(l + a, b) = std::conj(mean(b));
            e(l + a, l + b) = 1.0;
            e(l + a, 2 * l + b) = -kI;
            e(2 * l + a, b) = kI * std::conj(mean(b));
            e(2 * l + a, l + b) = kI;
            e(2 * l + a, 2 * l + b) = 1.0;
        }
    return e;
}

}  // namespace

RVector angle_weights(int targets) {
    RVector q = RVector::Zero(3 * targets);
    q.head(targets).setConstant(1.0 / targets);
    return q;
}

void check_weights(const RVector& q, int params) {
    if (q.size() != params)
        throw DimensionMismatch("weight vector has " + std::to_string(q.size()) +
                                " entries, expected " + std::to_string(params));
    if ((q.array() < 0.0).any() || !q.allFinite())
        throw ConfigurationError("weights must be finite and nonnegative");
}

CMatrix orthonormal_basis(const CMatrix& w) {
    if (w.cols() == 0) throw DimensionMismatch("empty combiner");
    Eigen::JacobiSVD<CMatrix> svd(w, Eigen::ComputeThinU);
    const RVector& s = svd.singularValues();
    if (s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
        throw NonIdentifiable("combiner is rank deficient", s(s.size() - 1));
    return svd.matrixU();
}

CMatrix rx_projector(const CMatrix& w) {
    CMatrix u = orthonormal_basis(w);
    return u * u.adjoint();
}

InformationTensor::InformationTensor(TensorSide side, int params, int dim)
    : side_(side), params_(params), dim_(dim),
      blocks_(static_cast<std::size_t>(params) * params, CMatrix::Zero(dim, dim)) {}

InformationTensor InformationTensor::receive(const PosteriorState& post, const CMatrix& v,
                                             const ArrayGeometry& geom) {
    if (v.rows() != geom.n_tx) throw DimensionMismatch("precoder row count mismatch");
    return build(TensorSide::Receive, post, v, geom);
}

InformationTensor InformationTensor::transmit(const PosteriorState& post, const CMatrix& w,
                                              const ArrayGeometry& geom) {
    if (w.rows() != geom.n_rx) throw DimensionMismatch("combiner row count mismatch");
    return build(TensorSide::Transmit, post, orthonormal_basis(w), geom);
}

InformationTensor InformationTensor::build(TensorSide side, const PosteriorState& post,
                                           const CMatrix& basis, const ArrayGeometry& geom) {
    const int l = post.targets;
    const bool rx = side == TensorSide::Receive;
    const int n = rx ? geom.n_rx : geom.n_tx;
    InformationTensor t(side, 3 * l, n);

    // Three families of accumulators; every block is one of them times a fixed phase.
    std::vector<CMatrix> aa(l * l, CMatrix::Zero(n, n));
    std::vector<CMatrix> ac(l * l, CMatrix::Zero(n, n));
    std::vector<CMatrix> cc(l * l, CMatrix::Zero(n, n));
    std::vector<CVector> fa(l), fc(l);

    for (Eigen::Index g = 0; g < post.size(); ++g) {
        const double wg = std::exp(post.log_weights(g));
        if (wg < kNegligibleWeight) continue;
        const ConditionalGaussian& cg = post.conditionals[g];
        CMatrix second = cg.cov + cg.mean * cg.mean.adjoint();
        if (!rx) second = second.conjugate().eval();
        CVector mean = rx ? cg.mean : cg.mean.conjugate().eval();

        std::vector<SteeringSet> s;
        s.reserve(l);
        for (int k = 0; k < l; ++k) s.emplace_back(geom, post.points(k, g));

        for (Eigen::Index m = 0; m < basis.cols(); ++m) {
            auto x = basis.col(m);
            for (int k = 0; k < l; ++k) {
                if (rx) {
                    cd s0 = s[k].tx.dot(x);
                    cd s1 = s[k].tx_d1.dot(x);
                    fa[k] = s[k].rx_d1 * s0 + s[k].rx * s1;
                    fc[k] = s[k].rx * s0;
                } else {
                    cd r0 = s[k].rx.dot(x);
                    cd r1 = s[k].rx_d1.dot(x);
                    fa[k] = s[k].tx * r1 + s[k].tx_d1 * r0;
                    fc[k] = s[k].tx * r0;
                }
            }
            for (int a = 0; a < l; ++a)
                for (int b = 0; b < l; ++b) {
                    aa[a * l + b].noalias() += (wg * second(a, b)) * fa[a] * fa[b].adjoint();
                    ac[a * l + b].noalias() += (wg * mean(a)) * fa[a] * fc[b].adjoint();
                    cc[a * l + b].noalias() += wg * fc[a] * fc[b].adjoint();
                }
        }
    }

    // Receive uses E[c_i c_j^*]; transmit uses its conjugate, which flips the phase of i.
    const cd ph = rx ? -kI : kI;
    auto put = [&t](int i, int j, const CMatrix& m) {
        t.blocks_[i * t.params_ + j] = m;
        if (i != j) t.blocks_[j * t.params_ + i] = m.adjoint();
    };
    for (int a = 0; a < l; ++a)
        for (int b = 0; b < l; ++b) {
            const CMatrix& mab_aa = aa[a * l + b];
            const CMatrix& mab_ac = ac[a * l + b];
            const CMatrix& mab_cc = cc[a * l + b];
            if (a <= b) put(a, b, mab_aa);
            put(a, l + b, mab_ac);
            put(a, 2 * l + b, ph * mab_ac);
            if (a <= b) {
                put(l + a, l + b, mab_cc);
                put(2 * l + a, 2 * l + b, mab_cc);
            }
            put(l + a, 2 * l + b, ph * mab_cc);
        }
    return t;
}

RMatrix InformationTensor::fim(const CMatrix& r) const {
    if (r.rows() != dim_ || r.cols() != dim_)
        throw DimensionMismatch("covariance dimension does not match the tensor");
    RMatrix j(params_, params_);
    CMatrix rt = r.transpose();
    for (int a = 0; a < params_; ++a)
        for (int b = a; b < params_; ++b) {
            double v = 2.0 * rt.cwiseProduct(block(a, b)).sum().real();
            j(a, b) = v;
            j(b, a) = v;
        }
    return j;
}

CMatrix InformationTensor::direction(const RMatrix& a) const {
    if (a.rows() != params_ || a.cols() != params_)
        throw DimensionMismatch("direction weights have the wrong shape");
    CMatrix p = CMatrix::Zero(dim_, dim_);
    for (int i = 0; i < params_; ++i)
        for (int j = 0; j < params_; ++j)
            if (a(i, j) != 0.0) p.noalias() += a(i, j) * block(i, j);
    return hermitian_part(p);
}

RMatrix data_fim(const PosteriorState& post, const CMatrix& v, const CMatrix& r_w,
                 const ArrayGeometry& geom) {
    return InformationTensor::receive(post, v, geom).fim(r_w);
}

PriorFim prior_fim(const PosteriorState& post, const ArrayGeometry& geom) {
    const int l = post.targets;
    const int p = 3 * l;
    RMatrix j = RMatrix::Zero(p, p);

    struct Stage {
        CMatrix u;   // orthonormal basis of range(W)
        CMatrix zt;  // W (W^H W)^{-1} Y
        const CMatrix* v;
    };
    std::vector<Stage> stages;
    for (const MeasurementRecord& rec : post.history) {
        CMatrix gram = rec.w.adjoint() * rec.w;
        stages.push_back({orthonormal_basis(rec.w), rec.w * gram.ldlt().solve(rec.y), &rec.v});
    }

    if (!stages.empty()) {
        std::vector<CMatrix> am(l), dm(l), em(l);
        std::vector<cd> zd(l), ze(l);
        for (Eigen::Index g = 0; g < post.size(); ++g) {
            const double wg = std::exp(post.log_weights(g));
            if (wg < kNegligibleWeight) continue;
            const ConditionalGaussian& cg = post.conditionals[g];
            CMatrix second = cg.cov + cg.mean * cg.mean.adjoint();
            CMatrix moments = coefficient_moments(cg.mean, second);
            std::vector<SteeringSet> s;
            s.reserve(l);
            for (int k = 0; k < l; ++k) s.emplace_back(geom, post.points(k, g));

            RMatrix jg = RMatrix::Zero(p, p);
            for (const Stage& st : stages) {
                for (int k = 0; k < l; ++k) {
                    CVector r0 = st.u.adjoint() * s[k].rx, r1 = st.u.adjoint() * s[k].rx_d1,
                            r2 = st.u.adjoint() * s[k].rx_d2;
                    CVector t0 = st.v->adjoint() * s[k].tx, t1 = st.v->adjoint() * s[k].tx_d1,
                            t2 = st.v->adjoint() * s[k].tx_d2;
                    CVector p0 = st.zt.adjoint() * s[k].rx, p1 = st.zt.adjoint() * s[k].rx_d1,
                            p2 = st.zt.adjoint() * s[k].rx_d2;
                    am[k] = r0 * t0.adjoint();
                    dm[k] = r1 * t0.adjoint() + r0 * t1.adjoint();
                    em[k] = r2 * t0.adjoint() + 2.0 * r1 * t1.adjoint() + r0 * t2.adjoint();
                    // tr(Zt^H N V) for N = D_k and N = E_k
                    zd[k] = t0.dot(p1) + t1.dot(p0);
                    ze[k] = t0.dot(p2) + 2.0 * t1.dot(p1) + t2.dot(p0);
                }
                // 2 Re E[c_i c_j^*] <M_i, M_j>
                for (int i = 0; i < p; ++i) {
                    ParamIndex pi = param_index(i, l);
                    const CMatrix& mi = pi.kind == ParamKind::Angle ? dm[pi.target] : am[pi.target];
                    for (int jj = i; jj < p; ++jj) {
                        ParamIndex pj = param_index(jj, l);
                        const CMatrix& mj =
                            pj.kind == ParamKind::Angle ? dm[pj.target] : am[pj.target];
                        double v = 2.0 * (moments(i, jj) * inner(mi, mj)).real();
                        jg(i, jj) += v;
                        if (jj != i) jg(jj, i) += v;
                    }
                }
                // Second-derivative terms, nonzero only within one target.
                for (int k = 0; k < l; ++k) {
                    cd e_aa = 0.0, e_ac = 0.0;
                    for (int b = 0; b < l; ++b) {
                        e_aa += second(k, b) * inner(em[k], am[b]);
                        e_ac += std::conj(cg.mean(b)) * inner(dm[k], am[b]);
                    }
                    double v_aa = 2.0 * e_aa.real() - 2.0 * (cg.mean(k) * ze[k]).real();
                    double v_re = 2.0 * e_ac.real() - 2.0 * zd[k].real();
                    double v_im = 2.0 * (kI * e_ac).real() - 2.0 * (kI * zd[k]).real();
                    jg(k, k) += v_aa;
                    jg(k, l + k) += v_re;
                    jg(l + k, k) += v_re;
                    jg(k, 2 * l + k) += v_im;
                    jg(2 * l + k, k) += v_im;
                }
            }
            j += wg * jg;
        }
    }
    for (int k = 0; k < 2 * l; ++k) j(l + k, l + k) += 2.0;

    Eigen::SelfAdjointEigenSolver<RMatrix> es(symmetric_part(j));
    RVector lam = es.eigenvalues();
    PriorFim out;
    for (Eigen::Index k = 0; k < lam.size(); ++k)
        if (lam(k) < 0.0) {
            out.clipped += -lam(k);
            lam(k) = 0.0;
        }
    out.matrix = out.clipped > 0.0
                     ? symmetric_part(es.eigenvectors() * lam.asDiagonal() *
                                      es.eigenvectors().transpose())
                     : symmetric_part(j);
    return out;
}

double bcrb_value(const RVector& q, const RMatrix& j) {
    if (j.rows() != j.cols() || j.rows() != q.size())
        throw DimensionMismatch("weight and information dimensions differ");
    Eigen::SelfAdjointEigenSolver<RMatrix> es(symmetric_part(j));
    const RVector& lam = es.eigenvalues();
    const double lo = lam(0);
    const double hi = lam(lam.size() - 1);
    if (!(lo > 0.0) || hi > kMaxCondition * lo)
        throw NonIdentifiable("information matrix is singular or ill-conditioned", lo);
    const RMatrix& u = es.eigenvectors();
    double v = 0.0;
    for (Eigen::Index k = 0; k < lam.size(); ++k)
        v += u.col(k).cwiseAbs2().dot(q) / lam(k);
    return v;
}

}  // namespace activesense
