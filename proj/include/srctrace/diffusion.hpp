#ifndef srctrace_diffusion_hpp
#define srctrace_diffusion_hpp

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "srctrace/graph.hpp"

namespace srctrace {

struct DiffusionParams {
    double mu = 2.0;
    double sigma2 = 1.0;
    std::vector<double> start_times;  // one per source

    void validate() const {
        if (mu <= 0.0) throw std::invalid_argument("mu must be positive");
        if (sigma2 < 0.0) throw std::invalid_argument("sigma2 must be non-negative");
    }
};

struct DiffusionOutcome {
    std::vector<double> infection_time;  // +inf for unreached nodes
    std::vector<int> infecting_source;   // index into the source list, -1 if unreached
};

struct Observations {
    std::vector<int> nodes;
    std::vector<double> times;

    int size() const { return static_cast<int>(nodes.size()); }

    double time_of(int node) const {
        for (int i = 0; i < size(); ++i)
            if (nodes[i] == node) return times[i];
        throw std::invalid_argument("node is not observed");
    }

    bool contains(int node) const {
        return std::find(nodes.begin(), nodes.end(), node) != nodes.end();
    }
};

/// Draw from N(mu, sigma2) conditioned on being non-negative.
inline double sample_truncated_gaussian(double mu, double sigma2, std::mt19937_64& rng) {
    if (mu <= 0.0) throw std::invalid_argument("mu must be positive");
    if (sigma2 < 0.0) throw std::invalid_argument("sigma2 must be non-negative");
    if (sigma2 == 0.0) return mu;
    std::normal_distribution<double> normal(mu, std::sqrt(sigma2));
    for (;;) {
        double x = normal(rng);
        if (x >= 0.0) return x;
    }
}

/// SI diffusion with one delay per undirected edge. Infection times are the
/// multi-source shortest-path relaxation over the sampled delays; ties
/// (possible only with sigma2 = 0) go to the smaller source index, then the
/// smaller node id.
inline DiffusionOutcome simulate(const Graph& g, const std::vector<int>& sources,
                                 const DiffusionParams& params, std::mt19937_64& rng) {
    params.validate();
    if (sources.empty()) throw std::invalid_argument("source list is empty");
    for (int s : sources) g.check_node(s);
    {
        auto sorted = sources;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("sources must be distinct");
    }
    if (!params.start_times.empty() && params.start_times.size() != sources.size())
        throw std::invalid_argument("start_times must match the source list");

    // Delays sampled in canonical edge order so the outcome depends only on the seed.
    const auto edge_list = g.edges();
    std::vector<double> delay(edge_list.size());
    for (std::size_t i = 0; i < edge_list.size(); ++i)
        delay[i] = sample_truncated_gaussian(params.mu, params.sigma2, rng);
    std::vector<std::vector<std::pair<int, double>>> wadj(g.node_count());
    for (std::size_t i = 0; i < edge_list.size(); ++i) {
        auto [u, v] = edge_list[i];
        wadj[u].emplace_back(v, delay[i]);
        wadj[v].emplace_back(u, delay[i]);
    }

    const double inf = std::numeric_limits<double>::infinity();
    DiffusionOutcome out;
    out.infection_time.assign(g.node_count(), inf);
    out.infecting_source.assign(g.node_count(), -1);

    using Entry = std::tuple<double, int, int>;  // (time, source index, node)
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        double t0 = params.start_times.empty() ? 0.0 : params.start_times[i];
        pq.emplace(t0, static_cast<int>(i), sources[i]);
    }
    while (!pq.empty()) {
        auto [t, src, u] = pq.top();
        pq.pop();
        if (out.infecting_source[u] != -1) continue;
        out.infection_time[u] = t;
        out.infecting_source[u] = src;
        for (auto [v, w] : wadj[u])
            if (out.infecting_source[v] == -1) pq.emplace(t + w, src, v);
    }
    return out;
}

/// Uniform sample (without replacement) of non-source infected nodes.
inline Observations sample_observations(const DiffusionOutcome& outcome,
                                        const std::vector<int>& sources, double fraction,
                                        std::mt19937_64& rng) {
    if (fraction <= 0.0 || fraction > 1.0) throw std::invalid_argument("fraction must be in (0,1]");
    std::vector<int> eligible;
    for (int v = 0; v < static_cast<int>(outcome.infection_time.size()); ++v) {
        if (std::isinf(outcome.infection_time[v])) continue;
        if (std::find(sources.begin(), sources.end(), v) != sources.end()) continue;
        eligible.push_back(v);
    }
    int count = static_cast<int>(std::llround(fraction * eligible.size()));
    if (count < 3) throw std::invalid_argument("fraction yields fewer than 3 observed nodes");
    // Partial Fisher-Yates, then sort by node id for a canonical ordering.
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, static_cast<int>(eligible.size()) - 1);
        std::swap(eligible[i], eligible[pick(rng)]);
    }
    eligible.resize(count);
    std::sort(eligible.begin(), eligible.end());
    Observations obs;
    for (int v : eligible) {
        obs.nodes.push_back(v);
        obs.times.push_back(outcome.infection_time[v]);
    }
    return obs;
}

inline Observations load_observations(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("node,timestamp", 0) != 0)
        throw std::runtime_error("observations file must start with 'node,timestamp'");
    Observations obs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("malformed observations line " + std::to_string(line_no));
        try {
            std::size_t used = 0;
            int node = std::stoi(line.substr(0, comma), &used);
            double t = std::stod(line.substr(comma + 1));
            if (obs.contains(node))
                throw std::runtime_error("duplicate observed node at line " + std::to_string(line_no));
            obs.nodes.push_back(node);
            obs.times.push_back(t);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("malformed observations line " + std::to_string(line_no));
        }
    }
    return obs;
}

inline Observations load_observations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_observations(in);
}

inline void save_observations(const Observations& obs, std::ostream& out) {
    out << "node,timestamp\n";
    out.precision(17);
    for (int i = 0; i < obs.size(); ++i) out << obs.nodes[i] << ',' << obs.times[i] << '\n';
}

inline void save_observations(const Observations& obs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    save_observations(obs, out);
}

inline void save_outcome(const DiffusionOutcome& outcome, std::ostream& out) {
    out << "node,infection_time,source_index\n";
    out.precision(17);
    for (std::size_t v = 0; v < outcome.infection_time.size(); ++v)
        out << v << ',' << outcome.infection_time[v] << ',' << outcome.infecting_source[v] << '\n';
}

}  // namespace srctrace

#endif
