#ifndef srctrace_serialize_hpp
#define srctrace_serialize_hpp

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "srctrace/evaluation.hpp"
#include "srctrace/multi_source.hpp"
#include "srctrace/single_source.hpp"

namespace srctrace {

using ordered_json = nlohmann::ordered_json;

inline ordered_json to_json(const SingleSourceEstimate& est) {
    ordered_json j;
    j["source"] = est.source;
    j["t0"] = est.t0_hat;
    j["mu"] = est.mu_hat;
    j["sigma2"] = est.sigma2_hat;
    j["alpha"] = est.alpha;
    j["theta"] = est.theta;
    ordered_json ranking = ordered_json::array();
    for (const auto& cs : est.ranking) {
        ordered_json entry;
        entry["node"] = cs.candidate;
        entry["log_score"] = cs.feasible ? ordered_json(cs.fit.log_score) : ordered_json(nullptr);
        ranking.push_back(std::move(entry));
    }
    j["ranking"] = std::move(ranking);
    return j;
}

inline SingleSourceEstimate single_source_from_json(const ordered_json& j) {
    SingleSourceEstimate est;
    est.source = j.at("source").get<int>();
    est.t0_hat = j.at("t0").get<double>();
    est.mu_hat = j.at("mu").get<double>();
    est.sigma2_hat = j.at("sigma2").get<double>();
    est.alpha = j.at("alpha").get<double>();
    est.theta = j.at("theta").get<double>();
    for (const auto& entry : j.at("ranking")) {
        CandidateScore cs;
        cs.candidate = entry.at("node").get<int>();
        if (!entry.at("log_score").is_null()) {
            cs.feasible = true;
            cs.fit.log_score = entry.at("log_score").get<double>();
        }
        est.ranking.push_back(cs);
    }
    return est;
}

inline ordered_json to_json(const MultiSourceEstimate& est) {
    ordered_json j;
    ordered_json clusters = ordered_json::array();
    for (const auto& c : est.clusters) {
        ordered_json entry;
        entry["anchor"] = c.anchor;
        entry["source"] = c.source;
        entry["fallback"] = c.fallback;
        entry["candidates_size"] = c.candidates_size;
        entry["observations_size"] = c.observations_size;
        entry["estimate"] = c.estimate ? to_json(*c.estimate) : ordered_json(nullptr);
        clusters.push_back(std::move(entry));
    }
    j["clusters"] = std::move(clusters);
    j["L"] = est.source_count();
    return j;
}

inline MultiSourceEstimate multi_source_from_json(const ordered_json& j) {
    MultiSourceEstimate est;
    for (const auto& entry : j.at("clusters")) {
        ClusterEstimate c;
        c.anchor = entry.at("anchor").get<int>();
        c.source = entry.at("source").get<int>();
        c.fallback = entry.at("fallback").get<bool>();
        c.candidates_size = entry.at("candidates_size").get<int>();
        c.observations_size = entry.at("observations_size").get<int>();
        if (!entry.at("estimate").is_null())
            c.estimate = single_source_from_json(entry.at("estimate"));
        est.clusters.push_back(std::move(c));
    }
    if (j.at("L").get<int>() != est.source_count())
        throw std::runtime_error("cluster count mismatch in estimate report");
    return est;
}

inline EtaMode parse_eta_mode(const std::string& s) {
    if (s == "zero") return EtaMode::Zero;
    if (s == "avg") return EtaMode::AvgPairwise;
    if (s == "diameter") return EtaMode::Diameter;
    throw std::invalid_argument("unknown eta mode: " + s);
}

inline std::string eta_mode_name(EtaMode m) {
    switch (m) {
        case EtaMode::Zero: return "zero";
        case EtaMode::AvgPairwise: return "avg";
        case EtaMode::Diameter: return "diameter";
    }
    throw std::logic_error("unreachable");
}

inline TargetKind parse_target(const std::string& s) {
    if (s == "scaled-identity") return TargetKind::ScaledIdentity;
    if (s == "diag") return TargetKind::DiagOfM;
    throw std::invalid_argument("unknown target kind: " + s);
}

/// Benchmark spec file: a flat JSON object. Unknown keys are rejected so
/// typos fail loudly; every error names the offending field.
inline BenchmarkSpec parse_benchmark_spec(const ordered_json& j) {
    BenchmarkSpec spec;
    if (!j.is_object()) throw std::runtime_error("spec: top level must be an object");
    auto fail = [](const std::string& field, const std::string& what) -> std::runtime_error {
        return std::runtime_error("spec field '" + field + "': " + what);
    };
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "family") spec.family = parse_family(value.get<std::string>());
            else if (key == "nodes") spec.nodes = value.get<int>();
            else if (key == "mean_degree") spec.mean_degree = value.get<double>();
            else if (key == "mu") spec.mu = value.get<double>();
            else if (key == "sigma2") spec.sigma2 = value.get<double>();
            else if (key == "fractions") spec.fractions = value.get<std::vector<double>>();
            else if (key == "source_counts") spec.source_counts = value.get<std::vector<int>>();
            else if (key == "min_source_distance") {
                if (value.is_string() && value.get<std::string>() == "avg") {
                    spec.min_source_distance_avg = true;
                } else {
                    spec.min_source_distance_avg = false;
                    spec.min_source_distance = value.get<double>();
                }
            } else if (key == "trials") spec.trials = value.get<int>();
            else if (key == "algorithms") {
                spec.algorithms.clear();
                for (const auto& a : value) spec.algorithms.push_back(parse_algorithm(a.get<std::string>()));
            } else if (key == "eta_modes") {
                spec.eta_modes.clear();
                for (const auto& m : value) spec.eta_modes.push_back(parse_eta_mode(m.get<std::string>()));
            } else if (key == "target") spec.target = parse_target(value.get<std::string>());
            else if (key == "max_sources") spec.max_sources = value.get<int>();
            else if (key == "master_seed") spec.master_seed = value.get<std::uint64_t>();
            else if (key == "gammas") spec.gammas = value.get<std::vector<double>>();
            else throw std::runtime_error("spec field '" + key + "': unknown key");
        } catch (const nlohmann::json::exception& e) {
            throw fail(key, e.what());
        }
    }
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("spec: ") + e.what());
    }
    return spec;
}

inline ordered_json to_json(const BenchmarkSpec& spec) {
    ordered_json j;
    j["family"] = family_name(spec.family);
    j["nodes"] = spec.nodes;
    j["mean_degree"] = spec.mean_degree;
    j["mu"] = spec.mu;
    j["sigma2"] = spec.sigma2;
    j["fractions"] = spec.fractions;
    j["source_counts"] = spec.source_counts;
    if (spec.min_source_distance_avg) j["min_source_distance"] = "avg";
    else j["min_source_distance"] = spec.min_source_distance;
    j["trials"] = spec.trials;
    ordered_json algs = ordered_json::array();
    for (auto a : spec.algorithms) algs.push_back(algorithm_name(a));
    j["algorithms"] = std::move(algs);
    ordered_json modes = ordered_json::array();
    for (auto m : spec.eta_modes) modes.push_back(eta_mode_name(m));
    j["eta_modes"] = std::move(modes);
    j["target"] = spec.target == TargetKind::ScaledIdentity ? "scaled-identity" : "diag";
    j["max_sources"] = spec.max_sources;
    j["master_seed"] = spec.master_seed;
    j["gammas"] = spec.gammas;
    return j;
}

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ';';
        out += std::to_string(ids[i]);
    }
    return out;
}

/// Trial table schema v1: one row per trial x fraction x algorithm.
/// Wall-clock runtimes stay out of the file so reruns with the same master
/// seed are byte-identical regardless of load or worker count.
inline void write_trial_csv(const BenchmarkSpec& spec, const std::vector<TrialRecord>& records,
                            std::ostream& out) {
    out << "schema_version,trial,fraction,algorithm,seed,nodes,true_sources,estimated_sources,"
           "rank,error,";
    for (auto m : spec.eta_modes) out << "delta_" << eta_mode_name(m) << ',';
    out << "mu_hat,sigma2_hat,alpha,theta,cluster_count,failure\n";
    for (const auto& rec : records) {
        out << "1," << rec.trial << ',' << format_double(rec.fraction) << ','
            << algorithm_name(rec.algorithm) << ',' << rec.seed << ',' << rec.nodes << ','
            << join_ids(rec.true_sources) << ',' << join_ids(rec.estimated_sources) << ','
            << (rec.rank >= 0 ? std::to_string(rec.rank) : "") << ','
            << (rec.error >= 0 ? std::to_string(rec.error) : "") << ',';
        for (std::size_t i = 0; i < spec.eta_modes.size(); ++i)
            out << (i < rec.delta.size() ? format_double(rec.delta[i]) : "") << ',';
        out << format_double(rec.mu_hat) << ',' << format_double(rec.sigma2_hat) << ','
            << format_double(rec.alpha) << ',' << format_double(rec.theta) << ','
            << (rec.cluster_count >= 0 ? std::to_string(rec.cluster_count) : "") << ','
            << rec.failure << '\n';
    }
}

inline ordered_json aggregate_report(const BenchmarkSpec& spec,
                                     const std::vector<TrialRecord>& records) {
    ordered_json j;
    j["schema_version"] = 1;
    j["spec"] = to_json(spec);
    ordered_json rows = ordered_json::array();
    for (const auto& row : aggregate(spec, records)) {
        ordered_json r;
        r["fraction"] = row.fraction;
        r["algorithm"] = algorithm_name(row.algorithm);
        r["count"] = row.count;
        r["failures"] = row.failures;
        r["mean_error"] = std::isnan(row.mean_error) ? ordered_json(nullptr)
                                                     : ordered_json(row.mean_error);
        r["stderr_error"] = std::isnan(row.stderr_error) ? ordered_json(nullptr)
                                                         : ordered_json(row.stderr_error);
        ordered_json acc = ordered_json::object();
        for (auto [gamma, frac] : row.gamma_accuracy)
            acc[format_double(gamma)] = frac;
        r["gamma_accuracy"] = std::move(acc);
        ordered_json deltas = ordered_json::object();
        for (std::size_t i = 0; i < spec.eta_modes.size(); ++i)
            deltas[eta_mode_name(spec.eta_modes[i])] =
                std::isnan(row.mean_delta[i]) ? ordered_json(nullptr)
                                              : ordered_json(row.mean_delta[i]);
        r["mean_delta"] = std::move(deltas);
        r["mean_alpha"] = std::isnan(row.mean_alpha) ? ordered_json(nullptr)
                                                     : ordered_json(row.mean_alpha);
        r["mean_cluster_count"] = std::isnan(row.mean_cluster_count)
                                      ? ordered_json(nullptr)
                                      : ordered_json(row.mean_cluster_count);
        r["mse_mu"] = std::isnan(row.mse_mu) ? ordered_json(nullptr) : ordered_json(row.mse_mu);
        r["mse_sigma2"] = std::isnan(row.mse_sigma2) ? ordered_json(nullptr)
                                                     : ordered_json(row.mse_sigma2);
        rows.push_back(std::move(r));
    }
    j["aggregates"] = std::move(rows);
    return j;
}

}  // namespace srctrace

#endif
