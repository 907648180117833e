#ifndef srctrace_graph_hpp
#define srctrace_graph_hpp

#include <algorithm>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace srctrace {

constexpr int kUnreachable = -1;

/// Immutable undirected simple graph with dense 0-based node ids.
/// Adjacency lists are kept strictly ascending; BFS tie-breaking depends on it.
class Graph {
public:
    Graph() = default;

    static Graph from_edges(int node_count, const std::vector<std::pair<int, int>>& edges) {
        if (node_count <= 0) throw std::invalid_argument("graph must have at least one node");
        std::vector<std::vector<int>> adj(node_count);
        for (auto [u, v] : edges) {
            if (u < 0 || u >= node_count || v < 0 || v >= node_count)
                throw std::invalid_argument("edge endpoint out of range");
            if (u == v) throw std::invalid_argument("self-loop not allowed");
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        for (auto& nbrs : adj) {
            std::sort(nbrs.begin(), nbrs.end());
            if (std::adjacent_find(nbrs.begin(), nbrs.end()) != nbrs.end())
                throw std::invalid_argument("duplicate edge");
        }
        Graph g;
        g.adj_ = std::move(adj);
        return g;
    }

    int node_count() const { return static_cast<int>(adj_.size()); }

    std::int64_t edge_count() const {
        std::int64_t deg_sum = 0;
        for (const auto& nbrs : adj_) deg_sum += static_cast<std::int64_t>(nbrs.size());
        return deg_sum / 2;
    }

    const std::vector<int>& neighbors(int v) const { return adj_.at(v); }

    int degree(int v) const { return static_cast<int>(adj_.at(v).size()); }

    bool has_edge(int u, int v) const {
        const auto& nbrs = adj_.at(u);
        return std::binary_search(nbrs.begin(), nbrs.end(), v);
    }

    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int u = 0; u < node_count(); ++u)
            for (int v : adj_[u])
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    void check_node(int v) const {
        if (v < 0 || v >= node_count()) throw std::invalid_argument("invalid node id");
    }

private:
    std::vector<std::vector<int>> adj_;
};

enum class BfsDirection { Ascending, Descending };

/// BFS spanning tree of one component. Root has no parent; depth equals
/// the hop distance from the root.
struct SpanningTree {
    int root = 0;
    std::vector<int> parent;  // kUnreachable for the root and unreached nodes
    std::vector<int> depth;   // kUnreachable for unreached nodes

    bool reached(int v) const { return depth[v] != kUnreachable; }
};

inline SpanningTree bfs_tree(const Graph& g, int root, BfsDirection direction) {
    g.check_node(root);
    SpanningTree t;
    t.root = root;
    t.parent.assign(g.node_count(), kUnreachable);
    t.depth.assign(g.node_count(), kUnreachable);
    t.depth[root] = 0;
    std::deque<int> queue{root};
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        const auto& nbrs = g.neighbors(u);
        auto visit = [&](int v) {
            if (t.depth[v] == kUnreachable) {
                t.depth[v] = t.depth[u] + 1;
                t.parent[v] = u;
                queue.push_back(v);
            }
        };
        if (direction == BfsDirection::Ascending) {
            for (int v : nbrs) visit(v);
        } else {
            for (auto it = nbrs.rbegin(); it != nbrs.rend(); ++it) visit(*it);
        }
    }
    return t;
}

/// BFS hop distances from source; unreachable nodes get kUnreachable.
inline std::vector<int> shortest_distances(const Graph& g, int source) {
    return bfs_tree(g, source, BfsDirection::Ascending).depth;
}

inline bool is_connected(const Graph& g) {
    auto d = shortest_distances(g, 0);
    return std::find(d.begin(), d.end(), kUnreachable) == d.end();
}

inline bool is_tree(const Graph& g) {
    return g.edge_count() == g.node_count() - 1 && is_connected(g);
}

struct GraphStats {
    double edge_node_ratio = 0.0;
    int diameter = 0;
    double avg_pairwise_distance = 0.0;
};

inline GraphStats graph_stats(const Graph& g) {
    const int n = g.node_count();
    GraphStats s;
    s.edge_node_ratio = static_cast<double>(g.edge_count()) / n;
    std::int64_t dist_sum = 0;
    for (int u = 0; u < n; ++u) {
        auto d = shortest_distances(g, u);
        for (int v = 0; v < n; ++v) {
            if (d[v] == kUnreachable) throw std::invalid_argument("graph_stats requires a connected graph");
            s.diameter = std::max(s.diameter, d[v]);
            if (v > u) dist_sum += d[v];
        }
    }
    std::int64_t pairs = static_cast<std::int64_t>(n) * (n - 1) / 2;
    s.avg_pairwise_distance = pairs > 0 ? static_cast<double>(dist_sum) / pairs : 0.0;
    return s;
}

/// Random recursive tree: node i >= 1 attaches uniformly to one of 0..i-1.
inline Graph gen_er_tree(int n, std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("tree needs at least one node");
    std::vector<std::pair<int, int>> edges;
    for (int i = 1; i < n; ++i) {
        std::uniform_int_distribution<int> pick(0, i - 1);
        edges.emplace_back(pick(rng), i);
    }
    return Graph::from_edges(n, edges);
}

/// Preferential-attachment tree: node i >= 2 attaches to an existing node
/// with probability proportional to its degree. Seeded by the edge 0-1.
inline Graph gen_ba_tree(int n, std::mt19937_64& rng) {
    if (n < 1) throw std::invalid_argument("tree needs at least one node");
    std::vector<std::pair<int, int>> edges;
    std::vector<int> endpoints;  // one entry per half-edge; sampling is degree-proportional
    if (n >= 2) {
        edges.emplace_back(0, 1);
        endpoints = {0, 1};
    }
    for (int i = 2; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
        int target = endpoints[pick(rng)];
        edges.emplace_back(target, i);
        endpoints.push_back(target);
        endpoints.push_back(i);
    }
    return Graph::from_edges(n, edges);
}

/// Erdos-Renyi G(n, p) with p = mean_degree/(n-1), resampled until connected.
inline Graph gen_er_graph(int n, double mean_degree, std::mt19937_64& rng, int retry_cap = 100) {
    if (n < 2) throw std::invalid_argument("need at least two nodes");
    if (mean_degree <= 0.0) throw std::invalid_argument("mean degree must be positive");
    const double p = std::min(1.0, mean_degree / (n - 1));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < retry_cap; ++attempt) {
        std::vector<std::pair<int, int>> edges;
        for (int u = 0; u < n; ++u)
            for (int v = u + 1; v < n; ++v)
                if (unif(rng) < p) edges.emplace_back(u, v);
        Graph g = Graph::from_edges(n, edges);
        if (is_connected(g)) return g;
    }
    throw std::runtime_error("could not sample a connected ER graph within the retry cap");
}

/// Barabasi-Albert graph with m = round(mean_degree/2) edges per arriving
/// node, seeded by a star on m+1 nodes. Connected by construction.
inline Graph gen_ba_graph(int n, double mean_degree, std::mt19937_64& rng) {
    const int m = static_cast<int>(std::lround(mean_degree / 2.0));
    if (m < 1) throw std::invalid_argument("mean degree must be at least 2");
    if (n < m + 1) throw std::invalid_argument("need at least m+1 nodes");
    std::vector<std::pair<int, int>> edges;
    std::vector<int> endpoints;
    for (int i = 1; i <= m; ++i) {
        edges.emplace_back(0, i);
        endpoints.push_back(0);
        endpoints.push_back(i);
    }
    for (int i = m + 1; i < n; ++i) {
        std::vector<int> targets;
        while (static_cast<int>(targets.size()) < m) {
            std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
            int t = endpoints[pick(rng)];
            if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
        }
        for (int t : targets) {
            edges.emplace_back(t, i);
            endpoints.push_back(t);
            endpoints.push_back(i);
        }
    }
    return Graph::from_edges(n, edges);
}

struct LoadedGraph {
    Graph graph;
    std::map<std::int64_t, int> id_map;  // external id -> internal id
    int duplicate_edges = 0;
    int self_loops = 0;
};

/// Parses a whitespace-separated edge list ("u v" per line, '#' comments).
/// External ids are compacted to 0..n-1 in ascending external-id order.
inline LoadedGraph load_edge_list(std::istream& in) {
    std::vector<std::pair<std::int64_t, std::int64_t>> raw;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::int64_t u, v;
        if (!(ls >> u)) continue;  // blank line
        std::string trailing;
        if (!(ls >> v) || (ls >> trailing)) {
            throw std::runtime_error("malformed edge list line " + std::to_string(line_no));
        }
        raw.emplace_back(u, v);
    }
    LoadedGraph out;
    for (auto [u, v] : raw) {
        out.id_map.emplace(u, 0);
        out.id_map.emplace(v, 0);
    }
    int next = 0;
    for (auto& [ext, internal] : out.id_map) internal = next++;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::pair<int, int>> seen;
    for (auto [u, v] : raw) {
        int a = out.id_map[u], b = out.id_map[v];
        if (a == b) {
            ++out.self_loops;
            continue;
        }
        if (a > b) std::swap(a, b);
        seen.emplace_back(a, b);
    }
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < seen.size(); ++i) {
        if (i > 0 && seen[i] == seen[i - 1]) {
            ++out.duplicate_edges;
            continue;
        }
        edges.push_back(seen[i]);
    }
    if (next == 0) throw std::runtime_error("edge list is empty");
    out.graph = Graph::from_edges(next, edges);
    return out;
}

inline LoadedGraph load_edge_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_edge_list(in);
}

inline void save_edge_list(const Graph& g, std::ostream& out) {
    for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

inline void save_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    save_edge_list(g, out);
}

inline void save_id_map(const std::map<std::int64_t, int>& id_map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    for (auto [ext, internal] : id_map) out << ext << ' ' << internal << '\n';
}

}  // namespace srctrace

#endif
