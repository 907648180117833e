#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "srctrace/evaluation.hpp"
#include "srctrace/serialize.hpp"

namespace {

using namespace srctrace;

/// Writes through a temp file and renames on success, so failures never
/// leave a partial output behind.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& emit) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        emit(out);
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::vector<int> parse_id_list(const std::string& s) {
    std::vector<int> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stoi(item, &used));
        if (used != item.size()) throw std::runtime_error("bad id list entry: " + item);
    }
    if (out.empty()) throw std::runtime_error("empty id list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) out.push_back(std::stod(item));
    return out;
}

int run(int argc, char** argv) {
    CLI::App app{"Network infection-source estimation toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Generate a random graph and write its edge list");
    std::string gen_family = "er-tree", gen_out;
    int gen_nodes = 0;
    double gen_mean_degree = 4.0;
    std::uint64_t gen_seed = 1;
    gen->add_option("--family", gen_family, "er-tree|ba-tree|er|ba")->capture_default_str();
    gen->add_option("--nodes", gen_nodes, "node count")->required();
    gen->add_option("--mean-degree", gen_mean_degree, "mean degree (er/ba)")->capture_default_str();
    gen->add_option("--seed", gen_seed, "RNG seed")->capture_default_str();
    gen->add_option("--out", gen_out, "output edge-list path")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a diffusion and sample observed timestamps");
    std::string sim_graph, sim_sources, sim_start_times, sim_out_obs;
    double sim_mu = 2.0, sim_sigma2 = 1.0, sim_fraction = 0.3;
    std::uint64_t sim_seed = 1;
    sim->add_option("--graph", sim_graph, "edge-list path")->required();
    sim->add_option("--sources", sim_sources, "comma-separated source ids")->required();
    sim->add_option("--start-times", sim_start_times, "comma-separated start times (default 0)");
    sim->add_option("--mu", sim_mu, "mean edge delay")->capture_default_str();
    sim->add_option("--sigma2", sim_sigma2, "edge delay variance")->capture_default_str();
    sim->add_option("--fraction", sim_fraction, "observed fraction")->capture_default_str();
    sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
    sim->add_option("--out-obs", sim_out_obs, "output observations CSV")->required();

    // estimate
    auto* est_cmd = app.add_subcommand("estimate", "Estimate infection source(s) from observations");
    std::string est_mode = "single", est_graph, est_obs, est_target = "scaled-identity";
    std::string est_algorithm = "gssi", est_out;
    int est_max_sources = 0;
    est_cmd->add_option("--mode", est_mode, "single|multi")->capture_default_str();
    est_cmd->add_option("--graph", est_graph, "edge-list path")->required();
    est_cmd->add_option("--obs", est_obs, "observations CSV path")->required();
    est_cmd->add_option("--target", est_target, "scaled-identity|diag")->capture_default_str();
    est_cmd->add_option("--max-sources", est_max_sources, "cluster cap (multi mode)")
        ->capture_default_str();
    est_cmd->add_option("--algorithm", est_algorithm, "gssi|mle-tree|bfs-mle|naive-gssi")
        ->capture_default_str();
    est_cmd->add_option("--out", est_out, "output JSON path (default stdout)");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run a seeded benchmark sweep from a spec file");
    std::string bench_spec, bench_out_dir;
    int bench_workers = 1;
    bench->add_option("--spec", bench_spec, "benchmark spec JSON path")->required();
    bench->add_option("--workers", bench_workers, "worker thread count")->capture_default_str();
    bench->add_option("--out-dir", bench_out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        auto rng = make_stream(gen_seed, 0);
        Graph g = generate_graph(parse_family(gen_family), gen_nodes, gen_mean_degree, rng);
        atomic_write(gen_out, [&](std::ostream& out) { save_edge_list(g, out); });
        auto stats = graph_stats(g);
        std::cout << "family=" << gen_family << " nodes=" << g.node_count()
                  << " edges=" << g.edge_count() << " seed=" << gen_seed
                  << " diameter=" << stats.diameter
                  << " avg_pairwise_distance=" << stats.avg_pairwise_distance << '\n';
        return 0;
    }

    if (sim->parsed()) {
        Graph g = load_edge_list(sim_graph).graph;
        auto sources = parse_id_list(sim_sources);
        DiffusionParams params;
        params.mu = sim_mu;
        params.sigma2 = sim_sigma2;
        if (!sim_start_times.empty()) params.start_times = parse_double_list(sim_start_times);
        auto rng = make_stream(sim_seed, 0);
        auto outcome = simulate(g, sources, params, rng);
        auto obs = sample_observations(outcome, sources, sim_fraction, rng);
        atomic_write(sim_out_obs, [&](std::ostream& out) { save_observations(obs, out); });
        std::cout << "sources=" << join_ids(sources) << " mu=" << sim_mu << " sigma2=" << sim_sigma2
                  << " fraction=" << sim_fraction << " seed=" << sim_seed
                  << " observed=" << obs.size() << '\n';
        return 0;
    }

    if (est_cmd->parsed()) {
        Graph g = load_edge_list(est_graph).graph;
        Observations obs = load_observations(est_obs);
        TargetKind target = parse_target(est_target);
        ordered_json report;
        if (est_mode == "single") {
            SingleSourceEstimate est;
            if (est_algorithm == "gssi") est = gssi(g, obs, target);
            else if (est_algorithm == "mle-tree") est = mle_tree(g, obs);
            else if (est_algorithm == "bfs-mle") est = bfs_mle(g, obs);
            else if (est_algorithm == "naive-gssi") est = naive_gssi(g, obs);
            else throw std::runtime_error("unknown algorithm: " + est_algorithm);
            report = to_json(est);
        } else if (est_mode == "multi") {
            report = to_json(scce(g, obs, est_max_sources, target));
        } else {
            throw std::runtime_error("unknown mode: " + est_mode);
        }
        if (est_out.empty()) {
            std::cout << report.dump(2) << '\n';
        } else {
            atomic_write(est_out, [&](std::ostream& out) { out << report.dump(2) << '\n'; });
        }
        return 0;
    }

    // benchmark
    std::ifstream spec_in(bench_spec);
    if (!spec_in) throw std::runtime_error("cannot open " + bench_spec);
    ordered_json spec_json;
    try {
        spec_json = ordered_json::parse(spec_in);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("spec: invalid JSON: " + std::string(e.what()));
    }
    BenchmarkSpec spec = parse_benchmark_spec(spec_json);
    std::filesystem::create_directories(bench_out_dir);
    std::cerr << "resolved spec: " << to_json(spec).dump() << " workers=" << bench_workers << '\n';
    auto records = run_benchmark(spec, bench_workers);
    atomic_write(bench_out_dir + "/trials.csv",
                 [&](std::ostream& out) { write_trial_csv(spec, records, out); });
    atomic_write(bench_out_dir + "/aggregates.json", [&](std::ostream& out) {
        out << aggregate_report(spec, records).dump(2) << '\n';
    });
    std::cout << "trials=" << records.size() << " out=" << bench_out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
