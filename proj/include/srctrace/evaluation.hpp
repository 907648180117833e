#ifndef srctrace_evaluation_hpp
#define srctrace_evaluation_hpp

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "srctrace/diffusion.hpp"
#include "srctrace/graph.hpp"
#include "srctrace/multi_source.hpp"
#include "srctrace/rng.hpp"
#include "srctrace/single_source.hpp"

namespace srctrace {

inline int error_distance(const Graph& g, int true_source, int estimate) {
    g.check_node(true_source);
    g.check_node(estimate);
    int d = shortest_distances(g, true_source)[estimate];
    if (d == kUnreachable) throw std::runtime_error("estimate unreachable from the true source");
    return d;
}

/// True iff the true source ranks within the top gamma percent of all nodes.
/// Unranked (observed or infeasible beyond the ranking) counts as failure.
inline bool rank_accuracy(const SingleSourceEstimate& est, int true_source, double gamma_percent,
                          int node_count) {
    int rank = est.rank_of(true_source);
    if (rank <= 0) return false;
    int cutoff = static_cast<int>(std::ceil(gamma_percent / 100.0 * node_count));
    return rank <= cutoff;
}

enum class EtaMode { Zero, AvgPairwise, Diameter };

struct DeltaConfig {
    EtaMode mode = EtaMode::Zero;
    double eta = 0.0;  // resolved penalty per miscounted source
};

inline DeltaConfig resolve_eta(const Graph& g, EtaMode mode) {
    DeltaConfig cfg;
    cfg.mode = mode;
    if (mode == EtaMode::Zero) {
        cfg.eta = 0.0;
    } else {
        auto stats = graph_stats(g);
        cfg.eta = mode == EtaMode::AvgPairwise ? stats.avg_pairwise_distance
                                               : static_cast<double>(stats.diameter);
    }
    return cfg;
}

namespace detail {

/// Minimum-cost size-k injective matching of a rectangular cost matrix,
/// k = min(rows, cols). Exhaustive for k <= 6, otherwise the potentials
/// formulation of the Hungarian algorithm.
inline double min_cost_matching(const std::vector<std::vector<double>>& cost) {
    int rows = static_cast<int>(cost.size());
    int cols = static_cast<int>(cost[0].size());
    if (rows > cols) {
        std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t[j][i] = cost[i][j];
        return min_cost_matching(t);
    }
    if (rows <= 6 && cols <= 6) {
        std::vector<int> idx(cols);
        std::iota(idx.begin(), idx.end(), 0);
        double best = std::numeric_limits<double>::infinity();
        // All injections row -> column via permutations of the column set.
        std::sort(idx.begin(), idx.end());
        do {
            double sum = 0.0;
            for (int i = 0; i < rows; ++i) sum += cost[i][idx[i]];
            best = std::min(best, sum);
        } while (std::next_permutation(idx.begin(), idx.end()));
        return best;
    }
    // Hungarian with row/column potentials; 1-based internal arrays.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
    for (int i = 1; i <= rows; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            int i0 = match[j0], j1 = 0;
            double delta = inf;
            for (int j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0.0;
    for (int j = 1; j <= cols; ++j)
        if (match[j]) total += cost[match[j] - 1][j - 1];
    return total;
}

}  // namespace detail

/// Matched-distance error between the true source set and the estimates:
/// (min injective matching cost + eta * |#sources - #estimates|) / norm,
/// where norm is the smaller set size when eta = 0 and the larger otherwise.
inline double delta_metric(const Graph& g, const std::vector<int>& true_sources,
                           const std::vector<int>& estimates, const DeltaConfig& cfg) {
    if (true_sources.empty()) throw std::invalid_argument("empty true source set");
    if (estimates.empty()) throw std::invalid_argument("empty estimate set");
    std::vector<std::vector<double>> cost(true_sources.size(),
                                          std::vector<double>(estimates.size()));
    for (std::size_t i = 0; i < true_sources.size(); ++i) {
        auto d = shortest_distances(g, true_sources[i]);
        for (std::size_t j = 0; j < estimates.size(); ++j) {
            if (d[estimates[j]] == kUnreachable)
                throw std::runtime_error("estimate unreachable from a true source");
            cost[i][j] = d[estimates[j]];
        }
    }
    double matched = detail::min_cost_matching(cost);
    double s = static_cast<double>(true_sources.size());
    double l = static_cast<double>(estimates.size());
    double norm = cfg.eta == 0.0 ? std::min(s, l) : std::max(s, l);
    return (matched + cfg.eta * std::abs(s - l)) / norm;
}

inline std::pair<double, double> parameter_mse(const std::vector<double>& mu_hats,
                                               const std::vector<double>& sigma2_hats,
                                               double mu_true, double sigma2_true) {
    if (mu_hats.empty() || mu_hats.size() != sigma2_hats.size())
        throw std::invalid_argument("need matching non-empty estimate vectors");
    double mse_mu = 0.0, mse_s2 = 0.0;
    for (std::size_t i = 0; i < mu_hats.size(); ++i) {
        mse_mu += (mu_hats[i] - mu_true) * (mu_hats[i] - mu_true);
        mse_s2 += (sigma2_hats[i] - sigma2_true) * (sigma2_hats[i] - sigma2_true);
    }
    return {mse_mu / mu_hats.size(), mse_s2 / sigma2_hats.size()};
}

enum class GraphFamily { ErTree, BaTree, Er, Ba };

inline GraphFamily parse_family(const std::string& s) {
    if (s == "er-tree") return GraphFamily::ErTree;
    if (s == "ba-tree") return GraphFamily::BaTree;
    if (s == "er") return GraphFamily::Er;
    if (s == "ba") return GraphFamily::Ba;
    throw std::invalid_argument("unknown graph family: " + s);
}

inline std::string family_name(GraphFamily f) {
    switch (f) {
        case GraphFamily::ErTree: return "er-tree";
        case GraphFamily::BaTree: return "ba-tree";
        case GraphFamily::Er: return "er";
        case GraphFamily::Ba: return "ba";
    }
    throw std::logic_error("unreachable");
}

inline Graph generate_graph(GraphFamily family, int nodes, double mean_degree,
                            std::mt19937_64& rng) {
    switch (family) {
        case GraphFamily::ErTree: return gen_er_tree(nodes, rng);
        case GraphFamily::BaTree: return gen_ba_tree(nodes, rng);
        case GraphFamily::Er: return gen_er_graph(nodes, mean_degree, rng);
        case GraphFamily::Ba: return gen_ba_graph(nodes, mean_degree, rng);
    }
    throw std::logic_error("unreachable");
}

enum class BenchAlgorithm { Gssi, BfsMle, NaiveGssi, MleTree, Scce };

inline BenchAlgorithm parse_algorithm(const std::string& s) {
    if (s == "gssi") return BenchAlgorithm::Gssi;
    if (s == "bfs-mle") return BenchAlgorithm::BfsMle;
    if (s == "naive-gssi") return BenchAlgorithm::NaiveGssi;
    if (s == "mle-tree") return BenchAlgorithm::MleTree;
    if (s == "scce") return BenchAlgorithm::Scce;
    throw std::invalid_argument("unknown algorithm: " + s);
}

inline std::string algorithm_name(BenchAlgorithm a) {
    switch (a) {
        case BenchAlgorithm::Gssi: return "gssi";
        case BenchAlgorithm::BfsMle: return "bfs-mle";
        case BenchAlgorithm::NaiveGssi: return "naive-gssi";
        case BenchAlgorithm::MleTree: return "mle-tree";
        case BenchAlgorithm::Scce: return "scce";
    }
    throw std::logic_error("unreachable");
}

struct BenchmarkSpec {
    GraphFamily family = GraphFamily::ErTree;
    int nodes = 100;
    double mean_degree = 4.0;
    double mu = 2.0;
    double sigma2 = 1.0;
    std::vector<double> fractions{0.3};
    std::vector<int> source_counts{1};        // trial draws uniformly from this set
    bool min_source_distance_avg = true;      // enforce pairwise distance >= avg pairwise
    double min_source_distance = 0.0;         // fixed floor when the flag is off
    int trials = 10;
    std::vector<BenchAlgorithm> algorithms{BenchAlgorithm::Gssi};
    std::vector<EtaMode> eta_modes{EtaMode::Zero};
    TargetKind target = TargetKind::ScaledIdentity;
    int max_sources = 0;
    std::uint64_t master_seed = 1;
    std::vector<double> gammas{1.0, 5.0, 10.0, 20.0};

    void validate() const {
        if (nodes < 4) throw std::invalid_argument("nodes must be at least 4");
        if (trials < 0) throw std::invalid_argument("trials must be non-negative");
        if (fractions.empty()) throw std::invalid_argument("fractions must be non-empty");
        if (source_counts.empty()) throw std::invalid_argument("source_counts must be non-empty");
        if (algorithms.empty()) throw std::invalid_argument("algorithms must be non-empty");
        for (double f : fractions)
            if (f <= 0.0 || f > 1.0) throw std::invalid_argument("fractions must lie in (0,1]");
        for (int k : source_counts)
            if (k < 1) throw std::invalid_argument("source counts must be positive");
    }
};

struct TrialRecord {
    int trial = 0;
    double fraction = 0.0;
    BenchAlgorithm algorithm = BenchAlgorithm::Gssi;
    std::uint64_t seed = 0;
    int nodes = 0;
    std::vector<int> true_sources;
    std::vector<int> estimated_sources;
    int rank = -1;              // single-source algorithms only
    int error = -1;             // single-source: hops to the true source
    std::vector<double> delta;  // one per eta mode (scce only)
    double mu_hat = std::nan("");
    double sigma2_hat = std::nan("");
    double alpha = std::nan("");
    double theta = std::nan("");
    int cluster_count = -1;     // scce only
    double runtime_seconds = 0.0;
    std::string failure;        // non-empty when the algorithm threw
};

namespace detail {

inline std::vector<int> draw_sources(const Graph& g, int count, bool avg_floor, double fixed_floor,
                                     std::mt19937_64& rng) {
    double floor_dist = fixed_floor;
    if (avg_floor && count > 1) floor_dist = graph_stats(g).avg_pairwise_distance;
    std::uniform_int_distribution<int> pick(0, g.node_count() - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<int> sources;
        while (static_cast<int>(sources.size()) < count) {
            int s = pick(rng);
            if (std::find(sources.begin(), sources.end(), s) == sources.end())
                sources.push_back(s);
        }
        bool ok = true;
        for (std::size_t i = 0; i < sources.size() && ok; ++i) {
            auto d = shortest_distances(g, sources[i]);
            for (std::size_t j = i + 1; j < sources.size(); ++j)
                if (d[sources[j]] < floor_dist) ok = false;
        }
        if (ok) return sources;
    }
    throw std::runtime_error("could not sample sources satisfying the distance constraint");
}

}  // namespace detail

/// Runs trials x fractions x algorithms. Each (fraction, trial) cell owns an
/// independent RNG stream derived from the master seed, so results do not
/// depend on the worker count or scheduling.
inline std::vector<TrialRecord> run_benchmark(const BenchmarkSpec& spec, int workers = 1) {
    spec.validate();
    if (workers < 1) throw std::invalid_argument("workers must be positive");
    const int cells = static_cast<int>(spec.fractions.size()) * spec.trials;
    const int algs = static_cast<int>(spec.algorithms.size());
    std::vector<std::vector<TrialRecord>> slots(cells);

    auto run_cell = [&](int cell) {
        const int fi = cell / spec.trials;
        const int trial = cell % spec.trials;
        const double fraction = spec.fractions[fi];
        const std::uint64_t stream = static_cast<std::uint64_t>(cell);
        auto rng = make_stream(spec.master_seed, stream);

        Graph g = generate_graph(spec.family, spec.nodes, spec.mean_degree, rng);
        std::uniform_int_distribution<std::size_t> pick_k(0, spec.source_counts.size() - 1);
        int k = spec.source_counts[pick_k(rng)];
        auto sources = detail::draw_sources(g, k, spec.min_source_distance_avg,
                                            spec.min_source_distance, rng);
        DiffusionParams params;
        params.mu = spec.mu;
        params.sigma2 = spec.sigma2;
        auto outcome = simulate(g, sources, params, rng);
        auto obs = sample_observations(outcome, sources, fraction, rng);

        std::vector<DeltaConfig> deltas;
        for (EtaMode mode : spec.eta_modes) deltas.push_back(resolve_eta(g, mode));

        auto& records = slots[cell];
        records.resize(algs);
        for (int ai = 0; ai < algs; ++ai) {
            TrialRecord& rec = records[ai];
            rec.trial = trial;
            rec.fraction = fraction;
            rec.algorithm = spec.algorithms[ai];
            rec.seed = stream;
            rec.nodes = g.node_count();
            rec.true_sources = sources;
            auto t0 = std::chrono::steady_clock::now();
            try {
                if (rec.algorithm == BenchAlgorithm::Scce) {
                    auto est = scce(g, obs, spec.max_sources, spec.target);
                    rec.estimated_sources = est.sources();
                    rec.cluster_count = est.source_count();
                    for (const auto& cfg : deltas)
                        rec.delta.push_back(delta_metric(g, sources, rec.estimated_sources, cfg));
                    for (const auto& c : est.clusters) {
                        if (!c.estimate) continue;
                        rec.mu_hat = c.estimate->mu_hat;
                        rec.sigma2_hat = c.estimate->sigma2_hat;
                        rec.alpha = c.estimate->alpha;
                        rec.theta = c.estimate->theta;
                        break;
                    }
                } else {
                    SingleSourceEstimate est;
                    switch (rec.algorithm) {
                        case BenchAlgorithm::Gssi: est = gssi(g, obs, spec.target); break;
                        case BenchAlgorithm::BfsMle: est = bfs_mle(g, obs); break;
                        case BenchAlgorithm::NaiveGssi: est = naive_gssi(g, obs); break;
                        case BenchAlgorithm::MleTree: est = mle_tree(g, obs); break;
                        default: throw std::logic_error("unreachable");
                    }
                    rec.estimated_sources = {est.source};
                    rec.rank = est.rank_of(sources[0]);
                    rec.error = error_distance(g, sources[0], est.source);
                    for (const auto& cfg : deltas)
                        rec.delta.push_back(delta_metric(g, sources, rec.estimated_sources, cfg));
                    rec.mu_hat = est.mu_hat;
                    rec.sigma2_hat = est.sigma2_hat;
                    rec.alpha = est.alpha;
                    rec.theta = est.theta;
                }
            } catch (const std::exception& e) {
                rec.failure = e.what();
            }
            rec.runtime_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
    };

    std::atomic<int> next{0};
    auto worker = [&] {
        for (;;) {
            int cell = next.fetch_add(1);
            if (cell >= cells) return;
            run_cell(cell);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<TrialRecord> out;
    out.reserve(static_cast<std::size_t>(cells) * algs);
    for (auto& cell : slots)
        for (auto& rec : cell) out.push_back(std::move(rec));
    return out;
}

struct AggregateRow {
    double fraction = 0.0;
    BenchAlgorithm algorithm = BenchAlgorithm::Gssi;
    int count = 0;      // successful trials
    int failures = 0;
    double mean_error = std::nan("");
    double stderr_error = std::nan("");
    std::vector<std::pair<double, double>> gamma_accuracy;  // (gamma, fraction of trials)
    std::vector<double> mean_delta;                         // one per eta mode
    double mean_alpha = std::nan("");
    double mean_cluster_count = std::nan("");
    double mse_mu = std::nan("");
    double mse_sigma2 = std::nan("");
};

inline std::vector<AggregateRow> aggregate(const BenchmarkSpec& spec,
                                           const std::vector<TrialRecord>& records) {
    std::vector<AggregateRow> out;
    for (double fraction : spec.fractions) {
        for (BenchAlgorithm alg : spec.algorithms) {
            AggregateRow row;
            row.fraction = fraction;
            row.algorithm = alg;
            std::vector<double> errors, alphas, clusters, mu_hats, s2_hats;
            std::vector<double> delta_sums(spec.eta_modes.size(), 0.0);
            std::vector<int> gamma_hits(spec.gammas.size(), 0);
            int delta_count = 0;
            for (const auto& rec : records) {
                if (rec.fraction != fraction || rec.algorithm != alg) continue;
                if (!rec.failure.empty()) {
                    ++row.failures;
                    continue;
                }
                ++row.count;
                if (rec.error >= 0) errors.push_back(rec.error);
                if (!std::isnan(rec.alpha)) alphas.push_back(rec.alpha);
                if (rec.cluster_count >= 0) clusters.push_back(rec.cluster_count);
                if (!std::isnan(rec.mu_hat)) mu_hats.push_back(rec.mu_hat);
                if (!std::isnan(rec.sigma2_hat)) s2_hats.push_back(rec.sigma2_hat);
                if (!rec.delta.empty()) {
                    ++delta_count;
                    for (std::size_t i = 0; i < rec.delta.size(); ++i)
                        delta_sums[i] += rec.delta[i];
                }
                for (std::size_t i = 0; i < spec.gammas.size(); ++i) {
                    int cutoff = static_cast<int>(std::ceil(spec.gammas[i] / 100.0 * rec.nodes));
                    if (rec.rank > 0 && rec.rank <= cutoff) ++gamma_hits[i];
                }
            }
            auto mean_of = [](const std::vector<double>& v) {
                return v.empty() ? std::nan("")
                                 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
            };
            row.mean_error = mean_of(errors);
            if (errors.size() > 1) {
                double var = 0.0;
                for (double e : errors) var += (e - row.mean_error) * (e - row.mean_error);
                var /= (errors.size() - 1);
                row.stderr_error = std::sqrt(var / errors.size());
            }
            for (std::size_t i = 0; i < spec.gammas.size(); ++i)
                row.gamma_accuracy.emplace_back(
                    spec.gammas[i],
                    row.count > 0 ? static_cast<double>(gamma_hits[i]) / row.count : 0.0);
            for (double sum : delta_sums)
                row.mean_delta.push_back(delta_count > 0 ? sum / delta_count : std::nan(""));
            row.mean_alpha = mean_of(alphas);
            row.mean_cluster_count = mean_of(clusters);
            if (!mu_hats.empty())
                std::tie(row.mse_mu, row.mse_sigma2) =
                    parameter_mse(mu_hats, s2_hats, spec.mu, spec.sigma2);
            out.push_back(std::move(row));
        }
    }
    return out;
}

}  // namespace srctrace

#endif
