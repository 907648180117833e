#include <doctest.h>

#include <Eigen/Cholesky>
#include <set>

#include "srctrace/gromov.hpp"
#include "srctrace/rng.hpp"

using namespace srctrace;

namespace {

// Independent oracle: (u,v)_s = (d(u,s)+d(v,s)-d(u,v))/2 from BFS distances.
double gromov_oracle(const Graph& tree, int s, int u, int v) {
    auto ds = shortest_distances(tree, s);
    auto du = shortest_distances(tree, u);
    return (ds[u] + ds[v] - du[v]) / 2.0;
}

bool on_path(const Graph& tree, int u, int v, int s) {
    auto du = shortest_distances(tree, u);
    return du[s] + shortest_distances(tree, s)[v] == du[v];
}

}  // namespace

TEST_CASE("gromov product equals the distance formula and satisfies its laws") {
    for (int trial = 0; trial < 50; ++trial) {
        auto rng = make_stream(21, trial + 1);
        std::uniform_int_distribution<int> size(4, 30);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        int s = pick(rng);
        auto t = bfs_tree(tree, s, BfsDirection::Ascending);
        for (int u = 0; u < n; ++u) {
            for (int v = 0; v < n; ++v) {
                double prod = gromov_product(t, u, v);
                CHECK(prod == gromov_oracle(tree, s, u, v));
                if (u == v) CHECK(prod == t.depth[u]);                  // (i)
                CHECK(prod == gromov_product(t, v, u));                 // (ii) symmetric
                CHECK(prod >= 0);                                       // (ii) non-negative
                CHECK((prod == 0) == on_path(tree, u, v, s));           // (iii)
                CHECK(prod <= t.depth[u]);                              // (iv)
            }
        }
    }
}

TEST_CASE("gromov matrix on a hand tree") {
    //      0
    //     / \
    //    1   2
    //   /   / \
    //  3   4   5
    Graph tree = Graph::from_edges(6, {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {2, 5}});
    auto m = gromov_matrix(tree, 0, {3, 4, 5}, BfsDirection::Ascending);
    Eigen::MatrixXd want(3, 3);
    want << 2, 0, 0,
            0, 2, 1,
            0, 1, 2;
    CHECK(m == want);
}

TEST_CASE("gromov matrix validates its inputs") {
    Graph tree = Graph::from_edges(3, {{0, 1}, {1, 2}});
    auto t = bfs_tree(tree, 0, BfsDirection::Ascending);
    CHECK_THROWS_AS(gromov_matrix(GromovBase{t, {}}), std::invalid_argument);
    CHECK_THROWS_AS(gromov_matrix(GromovBase{t, {0}}), std::invalid_argument);
    CHECK_THROWS_AS(gromov_matrix(GromovBase{t, {7}}), std::invalid_argument);
    Graph split = Graph::from_edges(4, {{0, 1}, {2, 3}});
    auto ts = bfs_tree(split, 0, BfsDirection::Ascending);
    CHECK_THROWS_AS(gromov_matrix(GromovBase{ts, {3}}), std::invalid_argument);
}

TEST_CASE("gromov matrices are positive definite") {
    for (int trial = 0; trial < 30; ++trial) {
        auto rng = make_stream(22, trial);
        std::uniform_int_distribution<int> size(5, 40);
        int n = size(rng);
        Graph tree = gen_ba_tree(n, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        int s = pick(rng);
        std::set<int> obs;
        std::uniform_int_distribution<int> count(3, std::min(8, n - 1));
        int want = count(rng);
        while (static_cast<int>(obs.size()) < want) {
            int v = pick(rng);
            if (v != s) obs.insert(v);
        }
        auto m = gromov_matrix(tree, s, {obs.begin(), obs.end()}, BfsDirection::Ascending);
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        CHECK(llt.info() == Eigen::Success);
    }
}

TEST_CASE("base reconstruction round-trips exactly") {
    for (int trial = 0; trial < 50; ++trial) {
        auto rng = make_stream(23, trial);
        std::uniform_int_distribution<int> size(5, 40);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        int s = pick(rng);
        std::set<int> obs;
        std::uniform_int_distribution<int> count(2, std::min(10, n - 1));
        int want = count(rng);
        while (static_cast<int>(obs.size()) < want) {
            int v = pick(rng);
            if (v != s) obs.insert(v);
        }
        auto m = gromov_matrix(tree, s, {obs.begin(), obs.end()}, BfsDirection::Ascending);
        auto base = reconstruct_base(m);
        CHECK(gromov_matrix(base) == m);
    }
}

TEST_CASE("reconstruction rejects non-Gromov matrices") {
    Eigen::MatrixXd bad(2, 2);
    bad << 2, 3,  // off-diagonal exceeds both diagonals
           3, 2;
    CHECK_THROWS_AS(reconstruct_base(bad), std::runtime_error);
    Eigen::MatrixXd asym(2, 2);
    asym << 2, 1,
            0, 2;
    CHECK_THROWS_AS(reconstruct_base(asym), std::runtime_error);
    Eigen::MatrixXd frac(1, 1);
    frac << 1.5;
    CHECK_THROWS_AS(reconstruct_base(frac), std::runtime_error);
    Eigen::MatrixXd zero(1, 1);
    zero << 0;  // observed node would coincide with the base vertex
    CHECK_THROWS_AS(reconstruct_base(zero), std::runtime_error);
}

TEST_CASE("convex combination of two-observer matrices") {
    // Two spanning trees of the same square-with-diagonal graph give these
    // Gromov matrices for the same observer pair; the midpoint is their blend.
    Eigen::MatrixXd m1(2, 2), m2(2, 2), mid(2, 2);
    m1 << 3, 2,
          2, 3;
    m2 << 3, 0,
          0, 3;
    mid << 3, 1,
           1, 3;
    CHECK(convex_combination(m1, m2, 0.5) == mid);
    CHECK(convex_combination(m1, m2, 1.0) == m1);
    CHECK(convex_combination(m1, m2, 0.0) == m2);
    Eigen::MatrixXd wrong(3, 3);
    CHECK_THROWS_AS(convex_combination(m1, wrong, 0.5), std::invalid_argument);
}

TEST_CASE("target matrices preserve the trace") {
    Eigen::MatrixXd m(3, 3);
    m << 4, 1, 0,
         1, 2, 1,
         0, 1, 3;
    auto id = target_matrix(m, TargetKind::ScaledIdentity);
    CHECK(id(0, 0) == doctest::Approx(3.0));
    CHECK(id(0, 1) == 0.0);
    CHECK(id.trace() == doctest::Approx(m.trace()));
    auto dg = target_matrix(m, TargetKind::DiagOfM);
    CHECK(dg(0, 0) == 4.0);
    CHECK(dg(1, 1) == 2.0);
    CHECK(dg(2, 2) == 3.0);
    CHECK(dg(0, 1) == 0.0);
    CHECK(dg.trace() == m.trace());
}
