#include <doctest.h>

#include <algorithm>
#include <set>

#include "srctrace/diffusion.hpp"
#include "srctrace/multi_source.hpp"
#include "srctrace/rng.hpp"
#include "srctrace/serialize.hpp"

using namespace srctrace;

namespace {

// Worked example shared by the cluster and reduction tests: a tree on node
// ids 1..14 (gaps unused) with six observed nodes whose timestamps force a
// two-cluster reduction.
struct Fixture {
    Graph tree = Graph::from_edges(15, {{1, 2},
                                        {2, 3},
                                        {2, 4},
                                        {3, 10},
                                        {10, 9},
                                        {9, 8},
                                        {8, 7},
                                        {10, 12},
                                        {12, 13},
                                        {13, 14}});
    Observations obs;

    Fixture() {
        obs.nodes = {1, 4, 7, 10, 12, 14};
        obs.times = {1.0, 2.0, 6.0, 5.0, 4.0, 3.0};
    }
};

// Quadratic oracle for observation clusters: check every observed node by
// walking its path from u and verifying all observed timestamps along the
// way are strictly increasing.
std::vector<int> observation_cluster_oracle(const Graph& tree, int u, const Observations& obs) {
    auto parent_of = bfs_tree(tree, u, BfsDirection::Ascending);
    std::vector<int> members;
    for (int k = 0; k < obs.size(); ++k) {
        int v = obs.nodes[k];
        if (!parent_of.reached(v)) continue;
        std::vector<int> path;
        for (int w = v; w != kUnreachable; w = parent_of.parent[w]) path.push_back(w);
        std::reverse(path.begin(), path.end());  // u .. v
        double last = -std::numeric_limits<double>::infinity();
        bool ok = true;
        for (int w : path) {
            if (!obs.contains(w)) continue;
            double t = obs.time_of(w);
            if (t <= last) {
                ok = false;
                break;
            }
            last = t;
        }
        if (ok) members.push_back(v);
    }
    return members;
}

}  // namespace

TEST_CASE("observation clusters on the worked fixture") {
    Fixture f;
    CHECK(observation_cluster(f.tree, 9, f.obs).members == std::vector<int>{7, 10});
    CHECK(observation_cluster(f.tree, 1, f.obs).members == std::vector<int>{1, 4, 7, 10});
    CHECK(observation_cluster(f.tree, 14, f.obs).members == std::vector<int>{7, 10, 12, 14});
}

TEST_CASE("single-source full observation covers everything") {
    auto rng = make_stream(51, 0);
    Graph tree = gen_er_tree(20, rng);
    DiffusionParams params;
    auto out = simulate(tree, {4}, params, rng);
    Observations obs;
    for (int v = 0; v < tree.node_count(); ++v) {
        if (v == 4) continue;
        obs.nodes.push_back(v);
        obs.times.push_back(out.infection_time[v]);
    }
    auto cluster = observation_cluster(tree, 4, obs);
    CHECK(cluster.members == obs.nodes);
}

TEST_CASE("observation clusters match the path-pair oracle on random instances") {
    for (int trial = 0; trial < 50; ++trial) {
        auto rng = make_stream(52, trial);
        std::uniform_int_distribution<int> size(6, 40);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::set<int> chosen;
        while (static_cast<int>(chosen.size()) < n / 3 + 1) chosen.insert(pick(rng));
        Observations obs;
        std::uniform_real_distribution<double> stamp(0.0, 10.0);
        for (int v : chosen) {
            obs.nodes.push_back(v);
            obs.times.push_back(stamp(rng));
        }
        for (int u = 0; u < n; ++u)
            CHECK(observation_cluster(tree, u, obs).members ==
                  observation_cluster_oracle(tree, u, obs));
    }
}

TEST_CASE("candidate clusters on the worked fixture") {
    Fixture f;
    CHECK(candidate_cluster(f.tree, 1, f.obs).members == std::vector<int>{1, 2, 3});
    CHECK(candidate_cluster(f.tree, 14, f.obs).members == std::vector<int>{13, 14});
    CHECK(candidate_cluster(f.tree, 9, f.obs).members == std::vector<int>{8, 9});
    // anchor with every neighbor observed keeps only itself
    Graph star = Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    Observations all;
    all.nodes = {0, 1, 2, 3};
    all.times = {0, 1, 2, 3};
    CHECK(candidate_cluster(star, 0, all).members == std::vector<int>{0});
}

TEST_CASE("reduction on the worked fixture yields two anchored clusters") {
    Fixture f;
    auto clusters = msr(f.tree, f.obs);
    REQUIRE(clusters.size() == 2);
    CHECK(clusters[0].anchor == 1);
    CHECK(clusters[0].observed.members == std::vector<int>{1, 4, 7, 10});
    CHECK(clusters[0].candidates.members == std::vector<int>{1, 2, 3});
    CHECK(clusters[1].anchor == 14);
    CHECK(clusters[1].observed.members == std::vector<int>{7, 10, 12, 14});
    CHECK(clusters[1].candidates.members == std::vector<int>{13, 14});
}

TEST_CASE("reduction covers the observed set and respects the cluster cap") {
    Fixture f;
    auto capped = msr(f.tree, f.obs, 1);
    REQUIRE(capped.size() == 1);
    CHECK(capped[0].observed.members == f.obs.nodes);  // remainder folded in
    for (int trial = 0; trial < 50; ++trial) {
        auto rng = make_stream(53, trial);
        std::uniform_int_distribution<int> size(8, 40);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::set<int> sources;
        std::uniform_int_distribution<int> nsrc(2, 3);
        int k = nsrc(rng);
        while (static_cast<int>(sources.size()) < k) sources.insert(pick(rng));
        DiffusionParams params;
        auto out = simulate(tree, {sources.begin(), sources.end()}, params, rng);
        auto obs = sample_observations(out, {sources.begin(), sources.end()},
                                       std::min(1.0, 12.0 / n), rng);
        auto clusters = msr(tree, obs);
        CHECK(static_cast<int>(clusters.size()) >= 1);
        std::set<int> covered;
        for (const auto& c : clusters)
            covered.insert(c.observed.members.begin(), c.observed.members.end());
        CHECK(covered == std::set<int>(obs.nodes.begin(), obs.nodes.end()));
    }
}

TEST_CASE("multi-source invariants hold on simulated tree instances") {
    int exact_count_checks = 0;
    for (int trial = 0; trial < 60; ++trial) {
        auto rng = make_stream(54, trial);
        std::uniform_int_distribution<int> size(10, 40);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        double avg = graph_stats(tree).avg_pairwise_distance;
        std::uniform_int_distribution<int> pick(0, n - 1);
        std::uniform_int_distribution<int> nsrc(2, 4);
        int k = nsrc(rng);
        std::vector<int> sources;
        for (int attempt = 0; attempt < 2000 && sources.empty(); ++attempt) {
            std::vector<int> draw;
            while (static_cast<int>(draw.size()) < k) {
                int s = pick(rng);
                if (std::find(draw.begin(), draw.end(), s) == draw.end()) draw.push_back(s);
            }
            bool spread = true;
            for (std::size_t i = 0; i < draw.size() && spread; ++i) {
                auto d = shortest_distances(tree, draw[i]);
                for (std::size_t j = i + 1; j < draw.size(); ++j)
                    if (d[draw[j]] < avg) spread = false;
            }
            if (spread) sources = std::move(draw);
        }
        if (sources.empty()) continue;  // instance too small to spread k sources
        DiffusionParams params;
        auto out = simulate(tree, sources, params, rng);
        Observations obs;
        for (int v = 0; v < n; ++v) {
            if (std::find(sources.begin(), sources.end(), v) != sources.end()) continue;
            obs.nodes.push_back(v);
            obs.times.push_back(out.infection_time[v]);
        }
        // infected-by-s observed nodes form a subset of s's observation cluster
        for (std::size_t si = 0; si < sources.size(); ++si) {
            auto cluster = observation_cluster(tree, sources[si], obs);
            for (int i = 0; i < obs.size(); ++i)
                if (out.infecting_source[obs.nodes[i]] == static_cast<int>(si))
                    CHECK(cluster.contains(obs.nodes[i]));
        }
        auto clusters = msr(tree, obs);
        CHECK(static_cast<int>(clusters.size()) <= k);
        for (const auto& c : clusters) {
            // anchors keep their candidate set free of other observed nodes
            for (int v : c.candidates.members)
                if (v != c.anchor) CHECK(!obs.contains(v));
            // candidate clusters are connected
            std::vector<char> in_set(n, 0);
            for (int v : c.candidates.members) in_set[v] = 1;
            std::vector<int> queue{c.anchor};
            std::set<int> seen{c.anchor};
            while (!queue.empty()) {
                int v = queue.back();
                queue.pop_back();
                for (int w : tree.neighbors(v))
                    if (in_set[w] && !seen.count(w)) {
                        seen.insert(w);
                        queue.push_back(w);
                    }
            }
            CHECK(seen.size() == c.candidates.members.size());
            // and contain at least one true source
            bool has_source = false;
            for (int s : sources) has_source = has_source || c.candidates.contains(s);
            CHECK(has_source);
        }
        // nested observation clusters (monotonicity in the anchor)
        std::uniform_int_distribution<int> node(0, n - 1);
        int u = node(rng);
        auto cu = observation_cluster(tree, u, obs);
        for (int v : cu.members) {
            auto cv = observation_cluster(tree, v, obs);
            for (int w : cv.members) CHECK(cu.contains(w));
        }
        ++exact_count_checks;
    }
    CHECK(exact_count_checks > 20);  // the sampler found enough valid instances
}

TEST_CASE("tree splitting reproduces the worked splits") {
    // First shape: a 1-7 path with extra leaves hanging off both halves.
    Graph left = Graph::from_edges(11, {{1, 2},
                                        {2, 3},
                                        {3, 10},
                                        {10, 9},
                                        {9, 8},
                                        {8, 7},
                                        {2, 4},
                                        {3, 5},
                                        {8, 6}});
    std::vector<int> left_nodes{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    auto left_split = ssse(left, left_nodes);
    CHECK(std::find(left_split.deleted_edges.begin(), left_split.deleted_edges.end(),
                    std::make_pair(9, 10)) != left_split.deleted_edges.end());

    // Second shape: a 7-14 path with leaves hanging near both ends.
    Graph right = Graph::from_edges(17, {{7, 8},
                                         {8, 9},
                                         {9, 10},
                                         {10, 12},
                                         {12, 13},
                                         {13, 14},
                                         {8, 15},
                                         {13, 16}});
    std::vector<int> right_nodes{7, 8, 9, 10, 12, 13, 14, 15, 16};
    auto right_split = ssse(right, right_nodes);
    CHECK(std::find(right_split.deleted_edges.begin(), right_split.deleted_edges.end(),
                    std::make_pair(9, 10)) != right_split.deleted_edges.end());
}

TEST_CASE("tree splitting outputs partition the input") {
    for (int trial = 0; trial < 40; ++trial) {
        auto rng = make_stream(55, trial);
        std::uniform_int_distribution<int> size(2, 50);
        int n = size(rng);
        Graph tree = gen_er_tree(n, rng);
        auto split = ssse(tree);
        std::set<int> all;
        for (const auto& comp : split.components) {
            CHECK(!comp.empty());
            for (int v : comp) CHECK(all.insert(v).second);  // disjoint
            // each component is connected after removing the deleted edges
            std::set<std::pair<int, int>> removed(split.deleted_edges.begin(),
                                                  split.deleted_edges.end());
            std::set<int> comp_set(comp.begin(), comp.end());
            std::vector<int> queue{comp.front()};
            std::set<int> seen{comp.front()};
            while (!queue.empty()) {
                int v = queue.back();
                queue.pop_back();
                for (int w : tree.neighbors(v)) {
                    auto e = std::minmax(v, w);
                    if (!comp_set.count(w) || seen.count(w) ||
                        removed.count({e.first, e.second}))
                        continue;
                    seen.insert(w);
                    queue.push_back(w);
                }
            }
            CHECK(seen == comp_set);
        }
        CHECK(static_cast<int>(all.size()) == n);
    }
}

TEST_CASE("star trees never split") {
    Graph star = Graph::from_edges(7, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {0, 6}});
    auto split = ssse(star);
    CHECK(split.components.size() == 1);
    CHECK(split.deleted_edges.empty());
}

TEST_CASE("tree splitting validates the node set") {
    Graph tree = Graph::from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
    CHECK_THROWS_AS(ssse(tree, {}), std::invalid_argument);
    CHECK_THROWS_AS(ssse(tree, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(ssse(tree, {0, 2}), std::invalid_argument);  // disconnected
    Graph cyc = Graph::from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    CHECK_THROWS_AS(ssse(cyc), std::invalid_argument);
}

TEST_CASE("full pipeline on a single-source instance returns one cluster") {
    auto rng = make_stream(56, 0);
    Graph tree = gen_er_tree(40, rng);
    DiffusionParams params;
    auto out = simulate(tree, {7}, params, rng);
    auto obs = sample_observations(out, {7}, 0.5, rng);
    auto est = scce(tree, obs);
    CHECK(est.source_count() == 1);
    CHECK(!est.clusters[0].fallback);
    CHECK(est.clusters[0].estimate.has_value());
}

TEST_CASE("full pipeline recovers two far-apart sources exactly at zero noise") {
    // Sources at both ends of a path, offset start times so every observed
    // timestamp is distinct; each wavefront is an exact linear fit at its end.
    std::vector<std::pair<int, int>> edges;
    for (int v = 0; v + 1 < 21; ++v) edges.emplace_back(v, v + 1);
    Graph tree = Graph::from_edges(21, edges);
    DiffusionParams params;
    params.mu = 1.0;
    params.sigma2 = 0.0;
    params.start_times = {0.0, 0.5};
    auto rng = make_stream(57, 0);
    std::vector<int> sources{0, 20};
    auto out = simulate(tree, sources, params, rng);
    Observations obs;
    for (int v = 1; v < 20; ++v) {
        obs.nodes.push_back(v);
        obs.times.push_back(out.infection_time[v]);
    }
    auto est = scce(tree, obs);
    auto found = est.sources();
    std::sort(found.begin(), found.end());
    CHECK(found == sources);
    for (const auto& c : est.clusters) CHECK(!c.fallback);
}

TEST_CASE("pipeline cluster cap folds everything into one estimate") {
    auto rng = make_stream(58, 0);
    Graph g = gen_er_graph(40, 4.0, rng);
    DiffusionParams params;
    auto out = simulate(g, {0, 20}, params, rng);
    auto obs = sample_observations(out, {0, 20}, 0.6, rng);
    auto est = scce(g, obs, 1);
    std::set<int> anchors;
    for (const auto& c : est.clusters) anchors.insert(c.anchor);
    CHECK(anchors.size() == 1);
}

TEST_CASE("multi-source report round-trips through json") {
    auto rng = make_stream(59, 0);
    Graph tree = gen_er_tree(40, rng);
    DiffusionParams params;
    auto out = simulate(tree, {3, 30}, params, rng);
    auto obs = sample_observations(out, {3, 30}, 0.5, rng);
    auto est = scce(tree, obs);
    auto back = multi_source_from_json(ordered_json::parse(to_json(est).dump()));
    CHECK(back.source_count() == est.source_count());
    for (int i = 0; i < est.source_count(); ++i) {
        CHECK(back.clusters[i].anchor == est.clusters[i].anchor);
        CHECK(back.clusters[i].source == est.clusters[i].source);
        CHECK(back.clusters[i].fallback == est.clusters[i].fallback);
    }
}
