#ifndef srctrace_gromov_hpp
#define srctrace_gromov_hpp

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "srctrace/graph.hpp"

namespace srctrace {

/// A rooted tree together with a base vertex (the root) and an ordered set
/// of observed nodes. The Gromov matrix of the base is the matrix of
/// pairwise Gromov products of the observed nodes w.r.t. the base vertex.
struct GromovBase {
    SpanningTree tree;          // rooted at the base vertex
    std::vector<int> observed;  // distinct, excludes the base vertex
};

/// Gromov product of u and v w.r.t. the tree root: the depth of their
/// lowest common ancestor. Equals (d(u,root)+d(v,root)-d(u,v))/2.
inline int gromov_product(const SpanningTree& t, int u, int v) {
    while (u != v) {
        if (t.depth[u] < t.depth[v]) std::swap(u, v);
        u = t.parent[u];
    }
    return t.depth[u];
}

inline Eigen::MatrixXd gromov_matrix(const GromovBase& base) {
    const auto& t = base.tree;
    const int n = static_cast<int>(base.observed.size());
    if (n == 0) throw std::invalid_argument("empty observed set");
    for (int u : base.observed) {
        if (u == t.root) throw std::invalid_argument("base vertex may not be observed");
        if (u < 0 || u >= static_cast<int>(t.depth.size()) || !t.reached(u))
            throw std::invalid_argument("observed node not spanned by the base tree");
    }
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i) {
        m(i, i) = t.depth[base.observed[i]];
        for (int j = i + 1; j < n; ++j) {
            m(i, j) = m(j, i) = gromov_product(t, base.observed[i], base.observed[j]);
        }
    }
    return m;
}

/// Convenience: Gromov matrix of observed nodes in a BFS tree of g rooted at s.
inline Eigen::MatrixXd gromov_matrix(const Graph& g, int s, const std::vector<int>& observed,
                                     BfsDirection direction) {
    return gromov_matrix(GromovBase{bfs_tree(g, s, direction), observed});
}

/// Rebuilds a base (T, s, U) whose Gromov matrix equals m exactly. The k-th
/// observed node is attached on the path to the observed node j maximizing
/// m(j, k), ties broken by smallest j. Throws if m is not the Gromov matrix
/// of any tree base, naming the offending entry.
inline GromovBase reconstruct_base(const Eigen::MatrixXd& m) {
    const int n = static_cast<int>(m.rows());
    if (n == 0 || m.cols() != n) throw std::invalid_argument("matrix must be square and non-empty");
    auto entry_int = [&](int i, int j) {
        double v = m(i, j);
        double r = std::round(v);
        if (std::abs(v - r) > 1e-9 || r < 0 || m(i, j) != m(j, i))
            throw std::runtime_error("inconsistent Gromov matrix at entry (" + std::to_string(i) +
                                     "," + std::to_string(j) + ")");
        return static_cast<int>(r);
    };

    // Build the tree as parent/depth arrays; node 0 is the base vertex.
    std::vector<int> parent{kUnreachable};
    std::vector<int> depth{0};
    std::vector<int> observed;
    auto grow_path = [&](int from, int steps) {
        int cur = from;
        for (int i = 0; i < steps; ++i) {
            parent.push_back(cur);
            depth.push_back(depth[cur] + 1);
            cur = static_cast<int>(parent.size()) - 1;
        }
        return cur;
    };
    auto ancestor_at_depth = [&](int node, int d) {
        while (depth[node] > d) node = parent[node];
        return node;
    };

    for (int k = 0; k < n; ++k) {
        int dk = entry_int(k, k);
        if (dk == 0) throw std::runtime_error("inconsistent Gromov matrix at entry (" +
                                              std::to_string(k) + "," + std::to_string(k) + ")");
        if (k == 0) {
            observed.push_back(grow_path(0, dk));
            continue;
        }
        int best_j = 0;
        for (int j = 1; j < k; ++j)
            if (m(j, k) > m(best_j, k)) best_j = j;
        int prod = entry_int(best_j, k);
        if (prod > entry_int(best_j, best_j) || prod > dk)
            throw std::runtime_error("inconsistent Gromov matrix at entry (" +
                                     std::to_string(best_j) + "," + std::to_string(k) + ")");
        int attach = ancestor_at_depth(observed[best_j], prod);
        int node = prod == dk ? attach : grow_path(attach, dk - prod);
        if (std::find(observed.begin(), observed.end(), node) != observed.end())
            throw std::runtime_error("inconsistent Gromov matrix at entry (" +
                                     std::to_string(best_j) + "," + std::to_string(k) + ")");
        observed.push_back(node);
    }

    GromovBase base;
    base.tree.root = 0;
    base.tree.parent = std::move(parent);
    base.tree.depth = std::move(depth);
    base.observed = std::move(observed);

    Eigen::MatrixXd check = gromov_matrix(base);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (check(i, j) != m(i, j))
                throw std::runtime_error("inconsistent Gromov matrix at entry (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
    return base;
}

inline Eigen::MatrixXd convex_combination(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                          double theta) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("dimension mismatch in convex combination");
    return theta * a + (1.0 - theta) * b;
}

enum class TargetKind { ScaledIdentity, DiagOfM };

/// Diagonal target matrix with tr(H) = tr(M).
inline Eigen::MatrixXd target_matrix(const Eigen::MatrixXd& m, TargetKind kind) {
    const int n = static_cast<int>(m.rows());
    if (kind == TargetKind::ScaledIdentity) {
        return (m.trace() / n) * Eigen::MatrixXd::Identity(n, n);
    }
    return m.diagonal().asDiagonal();
}

}  // namespace srctrace

#endif
