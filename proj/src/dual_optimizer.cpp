#include "activesense/dual_optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <sstream>

#include "activesense/random.hpp"

namespace activesense {

std::string to_string(ProblemKind kind) {
    switch (kind) {
        case ProblemKind::RxCombiner: return "rx";
        case ProblemKind::TxExploit: return "tx_exploit";
        case ProblemKind::TxExplore: return "tx_explore";
    }
    return "unknown";
}

SpectralMatrix::SpectralMatrix(const CMatrix& m) : matrix(hermitian_part(m)) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix);
    const Eigen::Index n = matrix.rows();
    values = es.eigenvalues().reverse();
    vectors = es.eigenvectors().rowwise().reverse();
    if (n == 0) vectors.resize(0, 0);
}

double SpectralMatrix::top_sum(int r) const {
    return values.head(std::min<Eigen::Index>(r, values.size())).sum();
}

double SpectralMatrix::gap(int r) const {
    if (r >= values.size()) return std::numeric_limits<double>::infinity();
    return values(r - 1) - values(r);
}

double ky_fan_value(const CMatrix& m, int count) {
    if (m.rows() != m.cols()) throw DimensionMismatch("ky_fan_value: matrix must be square");
    if (count < 0) throw ConfigurationError("ky_fan_value: negative count");
    return SpectralMatrix(m).top_sum(count);
}

DualProblem::DualProblem(ProblemKind kind, InformationTensor tensor, RMatrix prior, RVector q,
                         double power, int columns)
    : kind_(kind), tensor_(std::move(tensor)), prior_(std::move(prior)), q_(std::move(q)) {
    const int p = tensor_.params();
    if (prior_.rows() != p || prior_.cols() != p)
        throw DimensionMismatch("prior information has the wrong shape");
    check_weights(q_, p);
    q_sqrt_ = q_.cwiseSqrt();
    const int n = tensor_.dim();
    if (columns < 1 || columns > n)
        throw ConfigurationError("beamformer needs between 1 and " + std::to_string(n) +
                                 " columns, got " + std::to_string(columns));
    if (kind_ != ProblemKind::RxCombiner && !(power > 0.0))
        throw ConfigurationError("transmit power must be positive");
    switch (kind_) {
        case ProblemKind::RxCombiner:
            rank_ = columns;
            scale_ = 1.0;
            cap_ = 1.0;
            break;
        case ProblemKind::TxExploit:
            rank_ = 1;
            scale_ = power;
            cap_ = power;
            break;
        case ProblemKind::TxExplore:
            rank_ = columns;
            scale_ = power / columns;
            cap_ = scale_;
            break;
    }
    budget_ = scale_ * rank_;
}

DualProblem DualProblem::receive(const PosteriorState& post, const CMatrix& v, const RMatrix& prior,
                                 const RVector& q, const ArrayGeometry& geom, int m_rx) {
    return DualProblem(ProblemKind::RxCombiner, InformationTensor::receive(post, v, geom), prior, q,
                       1.0, m_rx);
}

DualProblem DualProblem::transmit(ProblemKind kind, const PosteriorState& post, const CMatrix& w,
                                  const RMatrix& prior, const RVector& q, const ArrayGeometry& geom,
                                  double power, int m_tx) {
    if (kind == ProblemKind::RxCombiner) throw ConfigurationError("transmit problem kind expected");
    return DualProblem(kind, InformationTensor::transmit(post, w, geom), prior, q, power,
                       kind == ProblemKind::TxExploit ? 1 : m_tx);
}

SpectralMatrix DualProblem::direction(const RMatrix& lambda) const {
    return SpectralMatrix(tensor_.direction(lambda * lambda.transpose()));
}

double DualProblem::objective(const RMatrix& lambda) const {
    return objective(lambda, direction(lambda));
}

double DualProblem::objective(const RMatrix& lambda, const SpectralMatrix& dir) const {
    double lin = 2.0 * lambda.diagonal().dot(q_sqrt_);
    double quad = (lambda.transpose() * prior_ * lambda).trace();
    return lin - quad - 2.0 * scale_ * dir.top_sum(rank_);
}

CMatrix DualProblem::covariance(const SpectralMatrix& dir) const {
    const Eigen::Index r = std::min<Eigen::Index>(rank_, dir.values.size());
    CMatrix u = dir.vectors.leftCols(r);
    return scale_ * u * u.adjoint();
}

RMatrix DualProblem::information(const CMatrix& r) const { return prior_ + tensor_.fim(r); }

RMatrix DualProblem::gradient(const RMatrix& lambda) const {
    SpectralMatrix dir = direction(lambda);
    RMatrix j = information(covariance(dir));
    return 2.0 * RMatrix(q_sqrt_.asDiagonal()) - 2.0 * j * lambda;
}

double DualProblem::primal(const CMatrix& r) const { return bcrb_value(q_, information(r)); }

CMatrix project_spectral(const CMatrix& r, double cap, double budget) {
    const Eigen::Index n = r.rows();
    if (budget > cap * n * (1.0 + 1e-12) || budget < 0.0)
        throw ConfigurationError("spectral set is empty");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(r));
    const RVector& x = es.eigenvalues();
    auto mass = [&](double tau) {
        return (x.array() - tau).max(0.0).min(cap).sum();
    };
    double lo = x.minCoeff() - cap - 1.0;
    double hi = x.maxCoeff() + 1.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        (mass(mid) > budget ? lo : hi) = mid;
    }
    RVector y = (x.array() - 0.5 * (lo + hi)).max(0.0).min(cap);
    return hermitian_part(es.eigenvectors() * y.cast<cd>().asDiagonal() *
                          es.eigenvectors().adjoint());
}

namespace {

double frob_inner(const CMatrix& a, const CMatrix& b) { return a.cwiseProduct(b.conjugate()).sum().real(); }

struct Point {
    RMatrix lambda;
    SpectralMatrix dir;
    double f = 0.0;
    CMatrix r;
    RMatrix j;
    RMatrix g;
    std::optional<Eigen::LLT<RMatrix>> llt;
    double primal = std::numeric_limits<double>::infinity();
};

Point evaluate(const DualProblem& pb, const RMatrix& lambda) {
    Point p;
    p.lambda = lambda;
    p.dir = pb.direction(lambda);
    p.f = pb.objective(lambda, p.dir);
    p.r = pb.covariance(p.dir);
    p.j = pb.information(p.r);
    p.g = 2.0 * RMatrix(pb.weights_sqrt().asDiagonal()) - 2.0 * p.j * lambda;
    Eigen::LLT<RMatrix> llt(p.j);
    if (llt.info() == Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<RMatrix> es(p.j, Eigen::EigenvaluesOnly);
        const RVector& ev = es.eigenvalues();
        if (ev(0) > 0.0 && ev(ev.size() - 1) <= kMaxCondition * ev(0)) {
            p.llt = std::move(llt);
            RMatrix qs = pb.weights_sqrt().asDiagonal();
            p.primal = (qs * p.llt->solve(qs)).trace();
        }
    }
    return p;
}

class Solver {
public:
    Solver(const DualProblem& pb, const DualOptions& opt) : pb_(pb), opt_(opt) {}

    DualSolution run() {
        const int n = pb_.dim();
        const int p = pb_.params();
        CMatrix r0 = (pb_.budget() / n) * CMatrix::Identity(n, n);
        RMatrix lambda0 = RMatrix::Zero(p, p);
        Eigen::LLT<RMatrix> llt0(pb_.information(r0));
        if (llt0.info() == Eigen::Success)
            lambda0 = llt0.solve(RMatrix(pb_.weights_sqrt().asDiagonal()));
        Point cur = evaluate(pb_, lambda0);
        note_primal(cur.primal, cur.r);

        bool done = ascend(cur, opt_.max_iters);
        if (!done && opt_.relaxation_fallback) {
            used_relaxation_ = true;
            std::optional<Point> better = relax(cur.r);
            if (better && better->f > cur.f) cur = std::move(*better);
            done = converged(cur) ||
                   (relax_stalled_ && best_primal_ - cur.f <= opt_.stall_gap_tol * std::abs(cur.f));
            if (!done && cur.dir.gap(pb_.rank()) > opt_.certificate_tol * scale_of(cur))
                done = ascend(cur, opt_.max_iters);
        }
        if (done) polish(cur);
        return finish(cur, done);
    }

private:
    double scale_of(const Point& pt) const {
        return std::max(std::abs(pt.dir.values(0)), std::numeric_limits<double>::min());
    }

    double kkt(const Point& pt) const {
        if (!pt.llt) return std::numeric_limits<double>::infinity();
        return 0.5 * pt.llt->solve(pt.g).norm();
    }

    bool converged(const Point& pt) const {
        const double scale = 1.0 + std::abs(pt.f);
        if (pt.g.norm() <= opt_.grad_tol * scale && kkt(pt) <= opt_.kkt_tol) return true;
        return gap_ok(pt.f);
    }

    bool gap_ok(double f) const {
        return best_primal_ - f <= opt_.gap_tol * std::abs(f) + 1e-15 * (1.0 + std::abs(f));
    }

    void note_primal(double value, const CMatrix& r) {
        if (value < best_primal_) {
            best_primal_ = value;
            best_cov_ = r;
        }
    }

    void note_dual(const Point& pt) {
        trace_.push_back(pt.f);
    }

    std::optional<Point> line_search(const Point& cur, const RMatrix& step, double slope, double t) {
        for (; t >= 1e-12; t *= opt_.backtrack) {
            Point cand = evaluate(pb_, cur.lambda + t * step);
            note_primal(cand.primal, cand.r);
            if (cand.f >= cur.f + opt_.armijo * t * slope && std::isfinite(cand.f)) return cand;
            if (t == 1.0) t = opt_.damping / opt_.backtrack;
        }
        return std::nullopt;
    }

    // Stopping on the duality gap leaves Lambda accurate only to about the square root of the
    // gap. Where the eigengap is open, damped recovery steps drive the KKT residual down; f is
    // flat to rounding there, so steps are accepted on the residual.
    void polish(Point& cur) {
        const RMatrix qs = pb_.weights_sqrt().asDiagonal();
        const double floor = cur.f - 1e-12 * (1.0 + std::abs(cur.f));
        for (int it = 0; it < opt_.polish_iters; ++it) {
            if (!cur.llt) return;
            const double res = kkt(cur);
            if (res <= opt_.kkt_tol) return;
            if (cur.dir.gap(pb_.rank()) <= opt_.certificate_tol * scale_of(cur)) return;
            auto try_step = [&](const RMatrix& step) -> std::optional<Point> {
                for (double t = 1.0; t >= 1.0 / 64; t *= 0.5) {
                    Point cand = evaluate(pb_, cur.lambda + t * step);
                    if (cand.f >= floor && kkt(cand) < res) return cand;
                }
                return std::nullopt;
            };
            std::optional<Point> next = try_step(cur.llt->solve(qs) - cur.lambda);
            // the recovery map can repel along some directions; Newton on the gradient does not
            if (!next) next = try_step(newton_step(cur));
            if (!next) return;
            note_primal(next->primal, next->r);
            cur = std::move(*next);
            note_dual(cur);
        }
    }

    // Newton direction for the gradient, with the Hessian from central differences of it.
    RMatrix newton_step(const Point& cur) const {
        const Eigen::Index n = cur.lambda.size();
        const double h = 1e-6 * (1.0 + cur.lambda.norm());
        RMatrix hess(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            RMatrix p = cur.lambda, m = cur.lambda;
            p.data()[i] += h;
            m.data()[i] -= h;
            RMatrix d = (pb_.gradient(p) - pb_.gradient(m)) / (2.0 * h);
            hess.col(i) = d.reshaped();
        }
        RMatrix neg = -symmetric_part(hess);
        RVector step = neg.ldlt().solve(cur.g.reshaped());
        if (!step.allFinite()) return RMatrix::Zero(cur.lambda.rows(), cur.lambda.cols());
        return step.reshaped(cur.lambda.rows(), cur.lambda.cols());
    }

    // Dual ascent: damped fixed-point steps, falling back to plain gradient steps.
    bool ascend(Point& cur, int budget) {
        int rejections = 0;
        int skip = 0;  // iterations left before retrying fixed-point steps
        int kink = 0;
        note_dual(cur);
        for (int it = 0; it < budget; ++it) {
            if (converged(cur)) return true;
            ++iterations_;
            std::optional<Point> next;
            if (cur.llt && skip == 0) {
                RMatrix step = 0.5 * cur.llt->solve(cur.g);
                double slope = frob(cur.g, step);
                if (slope > 0.0) next = line_search(cur, step, slope, 1.0);
                if (next) {
                    rejections = 0;
                } else if (++rejections >= 2) {
                    skip = 10;
                    rejections = 0;
                }
            } else if (skip > 0) {
                --skip;
            }
            if (!next) {
                Eigen::SelfAdjointEigenSolver<RMatrix> es(cur.j, Eigen::EigenvaluesOnly);
                double lmax = std::max(es.eigenvalues().maxCoeff(), 1e-12);
                next = line_search(cur, cur.g, cur.g.squaredNorm(), 1.0 / (2.0 * lmax));
            }
            if (!next) return false;
            cur = std::move(*next);
            note_dual(cur);
            const int r = pb_.rank();
            kink = cur.dir.gap(r) <= 1e-6 * scale_of(cur) ? kink + 1 : 0;
            if (kink >= 50 && opt_.relaxation_fallback) return false;
        }
        return converged(cur);
    }

    static double frob(const RMatrix& a, const RMatrix& b) { return a.cwiseProduct(b).sum(); }

    struct Relaxed {
        CMatrix r;
        double value;
        CMatrix grad;
        Point dual;
    };

    std::optional<Relaxed> relaxed_at(const CMatrix& r) {
        Eigen::LLT<RMatrix> llt(pb_.information(r));
        if (llt.info() != Eigen::Success) return std::nullopt;
        RMatrix qs = pb_.weights_sqrt().asDiagonal();
        RMatrix lambda = llt.solve(qs);
        double value = (qs * lambda).trace();
        if (!std::isfinite(value)) return std::nullopt;
        Point dual = evaluate(pb_, lambda);
        CMatrix grad = -2.0 * dual.dir.matrix;
        return Relaxed{r, value, grad, std::move(dual)};
    }

    // Projected gradient with Barzilai-Borwein steps on the convex relaxation.
    std::optional<Point> relax(const CMatrix& start) {
        const double cap = pb_.cap();
        const double budget = pb_.budget();
        std::optional<Relaxed> cur = relaxed_at(project_spectral(start, cap, budget));
        if (!cur) cur = relaxed_at((budget / pb_.dim()) * CMatrix::Identity(pb_.dim(), pb_.dim()));
        if (!cur) return std::nullopt;
        std::optional<Point> best;
        auto keep = [&](const Relaxed& x) {
            note_primal(x.value, x.r);
            note_primal(x.dual.primal, x.dual.r);
            if (!best || x.dual.f > best->f) best = x.dual;
        };
        keep(*cur);
        std::deque<double> recent{cur->value};
        double alpha = 1.0 / std::max(cur->grad.norm(), 1e-300);
        for (int it = 0; it < opt_.relaxation_max_iters; ++it) {
            if (gap_ok(best->f)) break;
            ++relaxation_iterations_;
            CMatrix d = project_spectral(cur->r - alpha * cur->grad, cap, budget) - cur->r;
            double slope = frob_inner(cur->grad, d);
            if (d.norm() <= 1e-15 * (1.0 + cur->r.norm()) || slope >= 0.0) {
                relax_stalled_ = true;
                break;
            }
            double ref = *std::max_element(recent.begin(), recent.end());
            std::optional<Relaxed> next;
            for (double t = 1.0; t >= 1e-12; t *= 0.5) {
                next = relaxed_at(cur->r + t * d);
                if (next && next->value <= ref + 1e-4 * t * slope) break;
                next.reset();
            }
            if (!next) {
                relax_stalled_ = true;
                break;
            }
            CMatrix s = next->r - cur->r;
            CMatrix y = next->grad - cur->grad;
            double sy = frob_inner(s, y);
            alpha = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : 1e6 * alpha;
            cur = std::move(next);
            keep(*cur);
            recent.push_back(cur->value);
            if (recent.size() > 10) recent.pop_front();
        }
        return best;
    }

    DualSolution finish(Point& cur, bool done) {
        DualSolution s;
        s.kind = pb_.kind();
        s.lambda = cur.lambda;
        s.direction = cur.dir;
        s.objective = cur.f;
        s.grad_norm = cur.g.norm();
        s.eigengap = cur.dir.gap(pb_.rank());
        s.kkt_residual = kkt(cur);
        s.certificate = s.eigengap > opt_.certificate_tol * scale_of(cur) &&
                        s.kkt_residual <= opt_.certificate_kkt_tol * (1.0 + cur.lambda.norm());
        s.primal = best_primal_;
        s.primal_covariance = best_cov_;
        s.duality_gap = best_primal_ - cur.f;
        s.iterations = iterations_;
        s.relaxation_iterations = relaxation_iterations_;
        s.used_relaxation = used_relaxation_;
        s.converged = done;
        s.objective_trace = std::move(trace_);
        return s;
    }

    const DualProblem& pb_;
    const DualOptions& opt_;
    double best_primal_ = std::numeric_limits<double>::infinity();
    CMatrix best_cov_;
    std::vector<double> trace_;
    int iterations_ = 0;
    int relaxation_iterations_ = 0;
    bool used_relaxation_ = false;
    bool relax_stalled_ = false;  // no further progress possible in floating point
};

}  // namespace

std::string DualSolution::summary() const {
    std::ostringstream os;
    os.precision(10);
    os << "solve kind=" << to_string(kind) << " iterations=" << iterations
       << " relaxation_iterations=" << relaxation_iterations << " grad_norm=" << grad_norm
       << " eigengap=" << eigengap << " certificate=" << (certificate ? 1 : 0)
       << " kkt=" << kkt_residual << " duality_gap=" << duality_gap << " objective=" << objective
       << " converged=" << (converged ? 1 : 0);
    return os.str();
}

DualSolution solve_dual(const DualProblem& problem, const DualOptions& options) {
    DualSolution s = Solver(problem, options).run();
    if (!s.converged) throw NonConverged("dual solve did not converge: " + s.summary(), s);
    return s;
}

ExtractedBeamformer extract_beamformers(const DualProblem& problem, const DualSolution& solution,
                                        std::uint64_t seed) {
    const SpectralMatrix& dir = solution.direction;
    const int n = problem.dim();
    const int r = problem.rank();
    if (dir.values.size() != n) throw DimensionMismatch("solution does not match the problem");
    ExtractedBeamformer out;
    out.certificate = solution.certificate;
    CMatrix u = dir.vectors.leftCols(r);
    if (!solution.certificate && r < n) {
        const double tol = 1e-6 * std::max(std::abs(dir.values(0)), 1e-300);
        const double pivot = dir.values(r - 1);
        int lo = r - 1, hi = r;
        while (lo > 0 && dir.values(lo - 1) - pivot <= tol) --lo;
        while (hi < n && pivot - dir.values(hi) <= tol) ++hi;
        hi = std::max(hi, r + 1);
        std::mt19937_64 rng(seed);
        CMatrix mix = haar_orthonormal(hi - lo, r - lo, rng);
        u.rightCols(r - lo) = dir.vectors.middleCols(lo, hi - lo) * mix;
        out.randomized = true;
    }
    out.matrix = problem.kind() == ProblemKind::RxCombiner ? u : (std::sqrt(problem.scale()) * u).eval();
    out.covariance = out.matrix * out.matrix.adjoint();
    return out;
}

}  // namespace activesense
