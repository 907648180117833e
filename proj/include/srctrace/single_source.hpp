#ifndef srctrace_single_source_hpp
#define srctrace_single_source_hpp

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "srctrace/diffusion.hpp"
#include "srctrace/graph.hpp"
#include "srctrace/gromov.hpp"

namespace srctrace {

constexpr double kResidualFloor = 1e-12;
constexpr double kInfScore = std::numeric_limits<double>::infinity();

/// Generalized least squares fit of T ~ D [t0, mu]' with covariance cov.
/// log_score is the log of det(R * cov / n): n*log(R/n) + log det(cov).
struct GlsFit {
    double t0 = 0.0;
    double mu = 0.0;
    double residual = 0.0;
    double log_score = kInfScore;
};

/// Design matrix with k-th row [1, d_G(s, v_k)]. Empty optional if some
/// observed node is unreachable from s (candidate infeasible).
inline std::optional<Eigen::MatrixXd> design_matrix(const std::vector<int>& dist_from_s,
                                                    const Observations& obs) {
    Eigen::MatrixXd d(obs.size(), 2);
    for (int k = 0; k < obs.size(); ++k) {
        int hops = dist_from_s.at(obs.nodes[k]);
        if (hops == kUnreachable) return std::nullopt;
        d(k, 0) = 1.0;
        d(k, 1) = hops;
    }
    return d;
}

inline std::optional<Eigen::MatrixXd> design_matrix(const Graph& g, int s, const Observations& obs) {
    return design_matrix(shortest_distances(g, s), obs);
}

/// GLS solve via the Cholesky factor of cov; no explicit inverses. Empty
/// optional when cov is not positive definite or the normal equations are
/// singular (all observed nodes equidistant from the candidate).
inline std::optional<GlsFit> gls_fit(const Eigen::MatrixXd& d, const Eigen::MatrixXd& cov,
                                     const Eigen::VectorXd& t) {
    const int n = static_cast<int>(t.size());
    if (n < 3) throw std::invalid_argument("need at least 3 observations");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Eigen::MatrixXd w = llt.matrixL().solve(d);
    Eigen::VectorXd z = llt.matrixL().solve(t);
    Eigen::Matrix2d gram = w.transpose() * w;
    double det = gram(0, 0) * gram(1, 1) - gram(0, 1) * gram(1, 0);
    if (det <= 1e-9 * std::max(1.0, gram(0, 0) * gram(1, 1))) return std::nullopt;
    Eigen::Vector2d beta = gram.inverse() * (w.transpose() * z);
    double residual = (z - w * beta).squaredNorm();
    double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    GlsFit fit;
    fit.t0 = beta(0);
    fit.mu = beta(1);
    fit.residual = residual;
    fit.log_score = n * std::log(std::max(residual, kResidualFloor) / n) + log_det;
    return fit;
}

/// Coarse 21-point grid over [0,1] followed by golden-section refinement on
/// the bracketing interval, absolute tolerance 1e-3. The objective may
/// return +inf at infeasible points.
inline std::pair<double, double> optimize_unit_interval(
    const std::function<double(double)>& objective, double tol = 1e-3) {
    constexpr int kGrid = 21;
    double best_x = -1.0, best_f = kInfScore;
    std::vector<double> fx(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        double x = static_cast<double>(i) / (kGrid - 1);
        fx[i] = objective(x);
        if (fx[i] < best_f) {
            best_f = fx[i];
            best_x = x;
        }
    }
    if (!(best_f < kInfScore)) throw std::runtime_error("objective is infinite on [0,1]");
    double step = 1.0 / (kGrid - 1);
    double a = std::max(0.0, best_x - step);
    double b = std::min(1.0, best_x + step);
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = objective(x1), f2 = objective(x2);
    while (b - a > tol) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = objective(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = objective(x2);
        }
    }
    double mid = (a + b) / 2.0;
    double fmid = objective(mid);
    if (best_f < fmid) return {best_x, best_f};
    return {mid, fmid};
}

struct CandidateScore {
    int candidate = -1;
    double theta = 1.0;
    double alpha = 0.0;
    GlsFit fit;
    double sigma2_hat = 0.0;
    bool feasible = false;
};

struct SingleSourceEstimate {
    int source = -1;
    double t0_hat = 0.0;
    double mu_hat = 0.0;
    double sigma2_hat = 0.0;
    double alpha = 0.0;
    double theta = 1.0;
    std::vector<CandidateScore> ranking;  // ascending log-score, infeasible at the tail

    int rank_of(int node) const {
        for (std::size_t i = 0; i < ranking.size(); ++i)
            if (ranking[i].candidate == node) return static_cast<int>(i) + 1;
        return -1;
    }
};

enum class SingleSourceAlgorithm { Gssi, NaiveGssi, BfsMle, MleTree };

namespace detail {

inline CandidateScore score_candidate(const Graph& g, int s, const Observations& obs,
                                      const Eigen::VectorXd& t, SingleSourceAlgorithm alg,
                                      TargetKind target_kind) {
    CandidateScore out;
    out.candidate = s;
    auto dist = shortest_distances(g, s);
    auto d_opt = design_matrix(dist, obs);
    if (!d_opt) return out;
    const Eigen::MatrixXd& d = *d_opt;

    auto score_of = [&](const Eigen::MatrixXd& cov) {
        auto fit = gls_fit(d, cov, t);
        return fit ? fit->log_score : kInfScore;
    };

    SpanningTree asc = bfs_tree(g, s, BfsDirection::Ascending);
    Eigen::MatrixXd lambda1 = gromov_matrix(GromovBase{std::move(asc), obs.nodes});

    Eigen::MatrixXd m;
    if (alg == SingleSourceAlgorithm::BfsMle || alg == SingleSourceAlgorithm::MleTree) {
        m = std::move(lambda1);
    } else {
        SpanningTree desc = bfs_tree(g, s, BfsDirection::Descending);
        Eigen::MatrixXd lambda2 = gromov_matrix(GromovBase{std::move(desc), obs.nodes});
        if (lambda1 == lambda2) {
            m = std::move(lambda1);  // tree case: both BFS trees coincide, skip theta
        } else {
            double theta;
            try {
                theta = optimize_unit_interval([&](double th) {
                            return score_of(convex_combination(lambda1, lambda2, th));
                        }).first;
            } catch (const std::runtime_error&) {
                return out;  // no theta yields a usable fit; candidate infeasible
            }
            out.theta = theta;
            m = convex_combination(lambda1, lambda2, theta);
        }
    }

    Eigen::MatrixXd cov = m;
    if (alg == SingleSourceAlgorithm::Gssi) {
        Eigen::MatrixXd h = target_matrix(m, target_kind);
        double alpha;
        try {
            alpha = optimize_unit_interval([&](double a) {
                        return score_of(a * h + (1.0 - a) * m);
                    }).first;
        } catch (const std::runtime_error&) {
            return out;  // no alpha yields a usable fit; candidate infeasible
        }
        out.alpha = alpha;
        cov = alpha * h + (1.0 - alpha) * m;
    }

    auto fit = gls_fit(d, cov, t);
    if (!fit) return out;
    out.fit = *fit;
    out.sigma2_hat = fit->residual / obs.size();
    out.feasible = true;
    return out;
}

inline SingleSourceEstimate estimate_single(const Graph& g, const Observations& obs,
                                            SingleSourceAlgorithm alg, TargetKind target_kind,
                                            const std::vector<int>& candidates_in) {
    if (obs.size() < 3) throw std::invalid_argument("need at least 3 observations");
    std::vector<int> candidates = candidates_in;
    if (candidates.empty()) {
        for (int v = 0; v < g.node_count(); ++v)
            if (!obs.contains(v)) candidates.push_back(v);
    } else {
        for (int v : candidates) {
            g.check_node(v);
            if (obs.contains(v)) throw std::invalid_argument("observed nodes are not candidates");
        }
    }
    Eigen::VectorXd t = Eigen::Map<const Eigen::VectorXd>(obs.times.data(), obs.size());

    SingleSourceEstimate est;
    est.ranking.reserve(candidates.size());
    for (int s : candidates) est.ranking.push_back(score_candidate(g, s, obs, t, alg, target_kind));
    std::stable_sort(est.ranking.begin(), est.ranking.end(),
                     [](const CandidateScore& a, const CandidateScore& b) {
                         if (a.feasible != b.feasible) return a.feasible;
                         if (a.feasible && a.fit.log_score != b.fit.log_score)
                             return a.fit.log_score < b.fit.log_score;
                         return a.candidate < b.candidate;
                     });
    if (est.ranking.empty() || !est.ranking.front().feasible)
        throw std::runtime_error("no feasible source candidate");
    const CandidateScore& top = est.ranking.front();
    est.source = top.candidate;
    est.t0_hat = top.fit.t0;
    est.mu_hat = top.fit.mu;
    est.sigma2_hat = top.sigma2_hat;
    est.alpha = top.alpha;
    est.theta = top.theta;
    return est;
}

}  // namespace detail

/// GSSI: per candidate, blend two opposite-direction BFS-tree Gromov
/// matrices (theta) and a diagonal target matrix (alpha), scoring the GLS
/// log-determinant objective; global argmin with node-id tie-break.
inline SingleSourceEstimate gssi(const Graph& g, const Observations& obs,
                                 TargetKind target_kind = TargetKind::ScaledIdentity,
                                 const std::vector<int>& candidates = {}) {
    return detail::estimate_single(g, obs, SingleSourceAlgorithm::Gssi, target_kind, candidates);
}

/// Exact MLE of (source, t0, mu, sigma2) when the graph is a tree.
inline SingleSourceEstimate mle_tree(const Graph& g, const Observations& obs) {
    if (!is_tree(g)) throw std::invalid_argument("graph is not a tree");
    return detail::estimate_single(g, obs, SingleSourceAlgorithm::MleTree,
                                   TargetKind::ScaledIdentity, {});
}

/// One ascending BFS tree per candidate, tree-MLE scoring.
inline SingleSourceEstimate bfs_mle(const Graph& g, const Observations& obs) {
    return detail::estimate_single(g, obs, SingleSourceAlgorithm::BfsMle,
                                   TargetKind::ScaledIdentity, {});
}

/// GSSI without the shrinkage step: optimize theta only, alpha = 0.
inline SingleSourceEstimate naive_gssi(const Graph& g, const Observations& obs) {
    return detail::estimate_single(g, obs, SingleSourceAlgorithm::NaiveGssi,
                                   TargetKind::ScaledIdentity, {});
}

/// Evaluation of the shrinkage objective f(a) = f1(a) + f2(a)/sigma2 at the
/// true parameters, with f1 = log det A(a), f2 = U'A(a)^-1 U and
/// A(a) = a H + (1-a) Lambda. Analytic first derivatives use the closed
/// forms tr(A^-1 (H - Lambda)) and -U'A^-1 (H - Lambda) A^-1 U; central
/// finite differences are provided alongside for cross-checking.
struct AppendixEval {
    double f = 0.0;
    double f1 = 0.0;
    double f2 = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double df = 0.0;
    double fd_df1 = 0.0;
    double fd_df2 = 0.0;
};

inline AppendixEval appendix_f(double alpha, const Eigen::MatrixXd& lambda,
                               const Eigen::MatrixXd& h, const Eigen::VectorXd& u, double sigma2,
                               double fd_step = 1e-5) {
    if (lambda.rows() != h.rows()) throw std::invalid_argument("dimension mismatch");
    auto parts = [&](double a) -> std::pair<double, double> {
        Eigen::MatrixXd m = a * h + (1.0 - a) * lambda;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() != Eigen::Success) throw std::runtime_error("A(alpha) is singular");
        double f1 = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        double f2 = u.dot(llt.solve(u));
        return {f1, f2};
    };
    Eigen::MatrixXd a_mat = alpha * h + (1.0 - alpha) * lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a_mat);
    if (llt.info() != Eigen::Success) throw std::runtime_error("A(alpha) is singular");
    Eigen::MatrixXd diff = h - lambda;
    AppendixEval out;
    std::tie(out.f1, out.f2) = parts(alpha);
    out.f = out.f1 + out.f2 / sigma2;
    out.df1 = llt.solve(diff).trace();
    Eigen::VectorXd au = llt.solve(u);
    out.df2 = -au.dot(diff * au);
    out.df = out.df1 + out.df2 / sigma2;
    double lo = std::max(0.0, alpha - fd_step);
    double hi = std::min(1.0, alpha + fd_step);
    auto [f1_lo, f2_lo] = parts(lo);
    auto [f1_hi, f2_hi] = parts(hi);
    out.fd_df1 = (f1_hi - f1_lo) / (hi - lo);
    out.fd_df2 = (f2_hi - f2_lo) / (hi - lo);
    return out;
}

}  // namespace srctrace

#endif
