#ifndef srctrace_multi_source_hpp
#define srctrace_multi_source_hpp

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "srctrace/diffusion.hpp"
#include "srctrace/graph.hpp"
#include "srctrace/single_source.hpp"

namespace srctrace {

/// Undirected tree graph induced by the reached parent edges of a BFS tree.
/// Unreached nodes stay as isolated vertices.
inline Graph tree_as_graph(const SpanningTree& t) {
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v < static_cast<int>(t.parent.size()); ++v)
        if (t.parent[v] != kUnreachable) edges.emplace_back(t.parent[v], v);
    return Graph::from_edges(static_cast<int>(t.parent.size()), edges);
}

struct ObservationCluster {
    int anchor = -1;
    std::vector<int> members;  // sorted by node id

    bool contains(int v) const {
        return std::binary_search(members.begin(), members.end(), v);
    }
};

/// Observed nodes whose timestamps strictly increase along every observed
/// prefix of the tree path from u. One traversal carrying the last observed
/// time seen on the path; a single decreasing pair invalidates the whole
/// branch beyond it.
inline ObservationCluster observation_cluster(const Graph& tree, int u, const Observations& obs) {
    tree.check_node(u);
    ObservationCluster out;
    out.anchor = u;
    const double neg_inf = -std::numeric_limits<double>::infinity();
    // Iterative DFS over (node, came-from, last observed time on the path).
    struct Frame {
        int node, from;
        double last;
    };
    std::vector<Frame> stack{{u, -1, neg_inf}};
    while (!stack.empty()) {
        auto [v, from, last] = stack.back();
        stack.pop_back();
        if (obs.contains(v)) {
            double t = obs.time_of(v);
            if (t <= last) continue;  // violated pair; nothing beyond qualifies
            last = t;
            out.members.push_back(v);
        }
        for (int w : tree.neighbors(v))
            if (w != from) stack.push_back({w, v, last});
    }
    std::sort(out.members.begin(), out.members.end());
    return out;
}

struct CandidateCluster {
    int anchor = -1;
    std::vector<int> members;  // sorted by node id

    bool contains(int v) const {
        return std::binary_search(members.begin(), members.end(), v);
    }
};

/// B(xi, V): BFS region grown from xi that halts immediately before every
/// other observed node.
inline CandidateCluster candidate_cluster(const Graph& tree, int xi, const Observations& obs) {
    tree.check_node(xi);
    CandidateCluster out;
    out.anchor = xi;
    std::vector<char> seen(tree.node_count(), 0);
    seen[xi] = 1;
    std::vector<int> queue{xi};
    for (std::size_t i = 0; i < queue.size(); ++i) {
        int v = queue[i];
        out.members.push_back(v);
        for (int w : tree.neighbors(v)) {
            if (seen[w] || obs.contains(w)) continue;
            seen[w] = 1;
            queue.push_back(w);
        }
    }
    std::sort(out.members.begin(), out.members.end());
    return out;
}

struct MsrCluster {
    int anchor = -1;
    ObservationCluster observed;
    CandidateCluster candidates;
};

/// Worklist reduction: repeatedly anchor at the unprocessed observed node
/// with minimal timestamp (node-id tie-break) and retire its observation
/// cluster. The emitted clusters cover the observed set.
inline std::vector<MsrCluster> msr(const Graph& tree, const Observations& obs,
                                   int max_clusters = 0) {
    if (obs.size() == 0) throw std::invalid_argument("empty observation set");
    std::vector<char> pending(obs.size(), 1);
    std::vector<MsrCluster> out;
    for (;;) {
        int pick = -1;
        for (int i = 0; i < obs.size(); ++i) {
            if (!pending[i]) continue;
            if (pick == -1 || obs.times[i] < obs.times[pick] ||
                (obs.times[i] == obs.times[pick] && obs.nodes[i] < obs.nodes[pick]))
                pick = i;
        }
        if (pick == -1) break;
        int xi = obs.nodes[pick];
        MsrCluster cluster;
        cluster.anchor = xi;
        cluster.observed = observation_cluster(tree, xi, obs);
        cluster.candidates = candidate_cluster(tree, xi, obs);
        for (int i = 0; i < obs.size(); ++i)
            if (cluster.observed.contains(obs.nodes[i])) pending[i] = 0;
        bool last_allowed =
            max_clusters > 0 && static_cast<int>(out.size()) + 1 == max_clusters;
        if (last_allowed) {
            // Iteration cap reached: fold every remaining observed node in.
            for (int i = 0; i < obs.size(); ++i) {
                if (!pending[i]) continue;
                pending[i] = 0;
                cluster.observed.members.push_back(obs.nodes[i]);
            }
            std::sort(cluster.observed.members.begin(), cluster.observed.members.end());
        }
        out.push_back(std::move(cluster));
        if (last_allowed) break;
    }
    return out;
}

struct SsseResult {
    std::vector<std::vector<int>> components;     // sorted node lists, disjoint
    std::vector<std::pair<int, int>> deleted_edges;
};

namespace detail {

/// BFS restricted to a node subset of the host tree.
struct SubtreeBfs {
    std::vector<int> order;
    std::vector<int> dist;    // host-indexed, kUnreachable outside
    std::vector<int> parent;  // host-indexed
};

inline SubtreeBfs subtree_bfs(const Graph& host, const std::vector<char>& in_set, int from) {
    SubtreeBfs out;
    out.dist.assign(host.node_count(), kUnreachable);
    out.parent.assign(host.node_count(), kUnreachable);
    out.dist[from] = 0;
    out.order.push_back(from);
    for (std::size_t i = 0; i < out.order.size(); ++i) {
        int v = out.order[i];
        for (int w : host.neighbors(v)) {
            if (!in_set[w] || out.dist[w] != kUnreachable) continue;
            out.dist[w] = out.dist[v] + 1;
            out.parent[w] = v;
            out.order.push_back(w);
        }
    }
    return out;
}

inline void ssse_recurse(const Graph& host, std::vector<int> nodes, SsseResult& out) {
    std::sort(nodes.begin(), nodes.end());
    const int m = static_cast<int>(nodes.size());
    if (m <= 2) {
        out.components.push_back(std::move(nodes));
        return;
    }
    std::vector<char> in_set(host.node_count(), 0);
    for (int v : nodes) in_set[v] = 1;

    // Average pairwise distance and the two double-BFS sweeps.
    long long dist_sum = 0;
    for (int v : nodes) {
        auto b = subtree_bfs(host, in_set, v);
        for (int w : nodes) dist_sum += b.dist[w];
    }
    double avg_dist = static_cast<double>(dist_sum) / (static_cast<long long>(m) * (m - 1));

    auto farthest = [&](const SubtreeBfs& b) {
        int best = b.order.front();
        for (int v : nodes)
            if (b.dist[v] > b.dist[best] || (b.dist[v] == b.dist[best] && v < best)) best = v;
        return best;
    };
    auto sweep1 = subtree_bfs(host, in_set, nodes.front());
    int end_a = farthest(sweep1);
    auto sweep2 = subtree_bfs(host, in_set, end_a);
    int end_b = farthest(sweep2);

    std::vector<int> path;
    for (int v = end_b; v != kUnreachable; v = sweep2.parent[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());  // now runs end_a -> end_b
    const int plen = static_cast<int>(path.size()) - 1;
    if (!(plen > avg_dist)) {
        out.components.push_back(std::move(nodes));
        return;
    }
    if (path.front() > path.back()) std::reverse(path.begin(), path.end());

    // s_P(w): sum of distances from w to the leaves whose (unique) closest
    // path node is w. Leaves lying on P contribute zero to their own node.
    std::vector<int> on_path_idx(host.node_count(), -1);
    for (int i = 0; i < static_cast<int>(path.size()); ++i) on_path_idx[path[i]] = i;
    std::vector<long long> s_p(path.size(), 0);
    for (int v : nodes) {
        int deg = 0;
        for (int w : host.neighbors(v)) deg += in_set[w];
        if (deg > 1) continue;  // not a leaf of the subtree
        auto b = subtree_bfs(host, in_set, v);
        int proj = path.front(), ties = 0;
        for (int p : path) {
            if (b.dist[p] < b.dist[proj]) proj = p, ties = 1;
            else if (b.dist[p] == b.dist[proj]) ++ties;
        }
        if (ties == 1) s_p[on_path_idx[proj]] += b.dist[proj];  // strictly closest only
    }

    // A local minimum is a maximal run of equal values strictly below the
    // nearest differing value on both sides; a run touching a path endpoint
    // has no flank there and never qualifies. At the first such run the edge
    // from its first node toward that node's successor on P is removed.
    int split = -1, other = -1;
    const int psize = static_cast<int>(path.size());
    for (int a = 1; a + 1 < psize; ++a) {
        if (s_p[a] >= s_p[a - 1]) continue;  // not a descent into a run
        int b = a;
        while (b + 1 < psize && s_p[b + 1] == s_p[a]) ++b;
        if (b + 1 == psize) break;  // run reaches the far endpoint
        if (s_p[b + 1] > s_p[a]) {
            split = path[a];
            other = path[a + 1];
            break;
        }
        a = b;  // descends further; resume scanning past the run
    }
    if (split == -1) {
        out.components.push_back(std::move(nodes));
        return;
    }
    out.deleted_edges.emplace_back(std::min(split, other), std::max(split, other));

    in_set[other] = 0;
    auto side_a = subtree_bfs(host, in_set, split);
    in_set[other] = 1;
    std::vector<int> part_a, part_b;
    for (int v : nodes) (side_a.dist[v] != kUnreachable ? part_a : part_b).push_back(v);
    ssse_recurse(host, std::move(part_a), out);
    ssse_recurse(host, std::move(part_b), out);
}

}  // namespace detail

/// Splits a subtree into putative per-source components by repeatedly
/// removing an edge at the first local minimum of s_P along a longest path,
/// as long as that path is longer than the subtree's average pairwise
/// distance. `nodes` must induce a connected subtree of `host`.
inline SsseResult ssse(const Graph& host, const std::vector<int>& nodes) {
    if (nodes.empty()) throw std::invalid_argument("empty subtree");
    for (int v : nodes) host.check_node(v);
    {
        std::vector<char> in_set(host.node_count(), 0);
        for (int v : nodes) {
            if (in_set[v]) throw std::invalid_argument("duplicate subtree node");
            in_set[v] = 1;
        }
        auto b = detail::subtree_bfs(host, in_set, nodes.front());
        if (b.order.size() != nodes.size())
            throw std::invalid_argument("subtree nodes are not connected");
        long long edge_count = 0;
        for (int v : nodes)
            for (int w : host.neighbors(v)) edge_count += in_set[w];
        if (edge_count / 2 != static_cast<long long>(nodes.size()) - 1)
            throw std::invalid_argument("subtree contains a cycle");
    }
    SsseResult out;
    detail::ssse_recurse(host, nodes, out);
    std::sort(out.components.begin(), out.components.end());
    return out;
}

inline SsseResult ssse(const Graph& tree) {
    std::vector<int> nodes(tree.node_count());
    for (int v = 0; v < tree.node_count(); ++v) nodes[v] = v;
    return ssse(tree, nodes);
}

struct ClusterEstimate {
    int anchor = -1;        // MSR anchor responsible for this component
    int source = -1;        // estimated source (anchor itself on fallback)
    bool fallback = false;  // too few observations or no candidates
    int candidates_size = 0;
    int observations_size = 0;
    std::optional<SingleSourceEstimate> estimate;
};

struct MultiSourceEstimate {
    std::vector<ClusterEstimate> clusters;

    int source_count() const { return static_cast<int>(clusters.size()); }

    std::vector<int> sources() const {
        std::vector<int> out;
        for (const auto& c : clusters) out.push_back(c.source);
        return out;
    }
};

/// Full multi-source pipeline: reduction to anchored clusters on per-anchor
/// BFS trees, s_P-based splitting of each candidate cluster, then one
/// single-source fit per resulting component. Components whose observation
/// set is too small for a fit report their anchor instead.
inline MultiSourceEstimate scce(const Graph& g, const Observations& obs, int max_sources = 0,
                                TargetKind target_kind = TargetKind::ScaledIdentity) {
    if (obs.size() == 0) throw std::invalid_argument("empty observation set");
    for (int v : obs.nodes) g.check_node(v);

    // MSR on the ascending BFS tree rooted at each anchor in turn.
    struct AnchoredCluster {
        int anchor;
        Graph tree;
        std::vector<int> observed;
        std::vector<int> candidates;
    };
    std::vector<AnchoredCluster> reduced;
    std::vector<char> pending(obs.size(), 1);
    for (;;) {
        int pick = -1;
        for (int i = 0; i < obs.size(); ++i) {
            if (!pending[i]) continue;
            if (pick == -1 || obs.times[i] < obs.times[pick] ||
                (obs.times[i] == obs.times[pick] && obs.nodes[i] < obs.nodes[pick]))
                pick = i;
        }
        if (pick == -1) break;
        int xi = obs.nodes[pick];
        Graph tree = tree_as_graph(bfs_tree(g, xi, BfsDirection::Ascending));
        auto vcluster = observation_cluster(tree, xi, obs);
        auto acluster = candidate_cluster(tree, xi, obs);
        for (int i = 0; i < obs.size(); ++i)
            if (vcluster.contains(obs.nodes[i])) pending[i] = 0;
        bool last_allowed =
            max_sources > 0 && static_cast<int>(reduced.size()) + 1 == max_sources;
        if (last_allowed) {
            for (int i = 0; i < obs.size(); ++i) {
                if (!pending[i]) continue;
                pending[i] = 0;
                vcluster.members.push_back(obs.nodes[i]);
            }
            std::sort(vcluster.members.begin(), vcluster.members.end());
        }
        reduced.push_back({xi, std::move(tree), std::move(vcluster.members),
                           std::move(acluster.members)});
        if (last_allowed) break;
    }

    MultiSourceEstimate out;
    for (const auto& cluster : reduced) {
        // Split the candidate cluster itself (a connected subtree of the
        // anchor's BFS tree) into putative per-source components.
        auto parts = ssse(cluster.tree, cluster.candidates);
        std::vector<int> comp_of(g.node_count(), -1);
        for (std::size_t i = 0; i < parts.components.size(); ++i)
            for (int v : parts.components[i]) comp_of[v] = static_cast<int>(i);

        // Each observed node follows its BFS-tree path toward the anchor and
        // joins the component where that path first enters the cluster.
        auto bfs = bfs_tree(cluster.tree, cluster.anchor, BfsDirection::Ascending);
        std::vector<Observations> comp_obs(parts.components.size());
        for (int v : cluster.observed) {
            if (!bfs.reached(v)) continue;
            int p = v;
            while (comp_of[p] == -1) p = bfs.parent[p];
            comp_obs[comp_of[p]].nodes.push_back(v);
            comp_obs[comp_of[p]].times.push_back(obs.time_of(v));
        }

        for (std::size_t i = 0; i < parts.components.size(); ++i) {
            if (comp_obs[i].size() == 0) continue;  // no evidence of a distinct source
            std::vector<int> comp_candidates;
            for (int v : parts.components[i])
                if (!obs.contains(v)) comp_candidates.push_back(v);
            ClusterEstimate ce;
            ce.anchor = cluster.anchor;
            ce.candidates_size = static_cast<int>(comp_candidates.size());
            ce.observations_size = comp_obs[i].size();
            if (comp_obs[i].size() < 3 || comp_candidates.empty()) {
                ce.fallback = true;
                ce.source = cluster.anchor;
            } else {
                try {
                    auto est = gssi(g, comp_obs[i], target_kind, comp_candidates);
                    ce.source = est.source;
                    ce.estimate = std::move(est);
                } catch (const std::runtime_error&) {
                    ce.fallback = true;  // no candidate admits a fit
                    ce.source = cluster.anchor;
                }
            }
            out.clusters.push_back(std::move(ce));
        }
    }
    if (out.clusters.empty()) throw std::runtime_error("no cluster contains an observed node");
    return out;
}

}  // namespace srctrace

#endif
