#pragma once

#include <fstream>
#include <set>
#include <tuple>
#include <string>

#include "json.hpp"

#include "aetsgd/error.hpp"
#include "aetsgd/harness.hpp"

// JSON experiment files. Sections mirror ExperimentConfig:
//
//   {
//     "experiment": {"name", "algorithm": "aet"|"threshold", "seed", "nodes",
//                    "iters" | "iters_total", "d" (int or "inf"), "eval_every",
//                    "sync", "trace", "speedup"},
//     "topology":   {"kind": "ring"|"line"|"complete"|"edges", "edges": [[u,v],...]},
//     "task":       {"kind": "blobs"|"quadratic"|"idx", "m", "test_m", "dim",
//                    "classes", "separation", "l2", "sigma", "center": [...],
//                    "train_images", "train_labels", "test_images", "test_labels",
//                    "partition": "iid"|"shard"|"label_skew", "data_seed"},
//     "schedule":   {"samples": "linear:10,1,0", "eta0", "beta", "probabilities": [...]},
//     "delays":     {"compute": [lo,hi], "network": [lo,hi],
//                    "stragglers": [{"node": 0, "factor": 5}]},
//     "threshold":  {"coeff", "epsilon"}
//   }
//
// Every section and key is optional; unknown keys are rejected.
namespace aetsgd {

namespace detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& section, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ValidationError("config." + section + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ValidationError("config." + section + "." + key + ": unknown key");
}

template <class T>
T get(const json& obj, const std::string& section, const std::string& key) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("config." + section + "." + key + ": " + e.what());
  }
}

inline std::pair<double, double> get_range(const json& obj, const std::string& section, const std::string& key) {
  const auto v = get<std::vector<double>>(obj, section, key);
  if (v.size() != 2) throw ValidationError("config." + section + "." + key + ": expected [lo, hi]");
  return {v[0], v[1]};
}

}  // namespace detail

// Applies the keys present in `j` on top of `cfg`.
inline void apply_config_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  using detail::get;
  detail::reject_unknown(j, "root", {"experiment", "topology", "task", "schedule", "delays", "threshold"});
  if (j.contains("experiment")) {
    const auto& e = j["experiment"];
    const std::string s = "experiment";
    detail::reject_unknown(e, s, {"name", "algorithm", "seed", "nodes", "iters", "iters_total", "d", "eval_every",
                                  "sync", "trace", "speedup"});
    if (e.contains("name")) cfg.name = get<std::string>(e, s, "name");
    if (e.contains("algorithm")) {
      const auto a = get<std::string>(e, s, "algorithm");
      if (a == "aet") cfg.algorithm = Algorithm::kAet;
      else if (a == "threshold") cfg.algorithm = Algorithm::kThreshold;
      else throw ValidationError("config.experiment.algorithm: expected aet | threshold");
    }
    if (e.contains("seed")) cfg.seed = get<std::uint64_t>(e, s, "seed");
    if (e.contains("nodes")) cfg.nodes = get<std::size_t>(e, s, "nodes");
    if (e.contains("iters")) {
      cfg.iters = get<std::uint64_t>(e, s, "iters");
      cfg.iters_total.reset();
    }
    if (e.contains("iters_total")) {
      cfg.iters_total = get<std::uint64_t>(e, s, "iters_total");
      cfg.iters.reset();
    }
    if (e.contains("d")) {
      if (e["d"].is_string() && e["d"] == "inf") cfg.max_lag.reset();
      else cfg.max_lag = get<std::uint64_t>(e, s, "d");
    }
    if (e.contains("eval_every")) cfg.eval_every = get<std::uint64_t>(e, s, "eval_every");
    if (e.contains("sync")) cfg.sync_enabled = get<bool>(e, s, "sync");
    if (e.contains("trace")) cfg.record_trace = get<bool>(e, s, "trace");
    if (e.contains("speedup")) cfg.compute_speedup = get<bool>(e, s, "speedup");
  }
  if (j.contains("topology")) {
    const auto& t = j["topology"];
    const std::string s = "topology";
    detail::reject_unknown(t, s, {"kind", "edges"});
    if (t.contains("kind")) {
      const auto k = get<std::string>(t, s, "kind");
      if (k == "ring") cfg.topology.kind = TopologyKind::kRing;
      else if (k == "line") cfg.topology.kind = TopologyKind::kLine;
      else if (k == "complete") cfg.topology.kind = TopologyKind::kComplete;
      else if (k == "edges") cfg.topology.kind = TopologyKind::kEdges;
      else throw ValidationError("config.topology.kind: expected ring | line | complete | edges");
    }
    if (t.contains("edges")) {
      cfg.topology.edges.clear();
      for (const auto& pr : get<std::vector<std::vector<std::size_t>>>(t, s, "edges")) {
        if (pr.size() != 2) throw ValidationError("config.topology.edges: each edge is [u, v]");
        cfg.topology.edges.emplace_back(pr[0], pr[1]);
      }
    }
  }
  if (j.contains("task")) {
    const auto& t = j["task"];
    const std::string s = "task";
    detail::reject_unknown(t, s, {"kind", "m", "test_m", "dim", "classes", "separation", "l2", "sigma", "center",
                                  "train_images", "train_labels", "test_images", "test_labels", "partition",
                                  "data_seed"});
    auto& task = cfg.task;
    if (t.contains("kind")) {
      const auto k = get<std::string>(t, s, "kind");
      if (k == "blobs") task.kind = TaskKind::kBlobs;
      else if (k == "quadratic") task.kind = TaskKind::kQuadratic;
      else if (k == "idx") task.kind = TaskKind::kIdx;
      else throw ValidationError("config.task.kind: expected blobs | quadratic | idx");
    }
    if (t.contains("m")) task.m = get<std::size_t>(t, s, "m");
    if (t.contains("test_m")) task.test_m = get<std::size_t>(t, s, "test_m");
    if (t.contains("dim")) task.dim = get<std::size_t>(t, s, "dim");
    if (t.contains("classes")) task.classes = get<std::size_t>(t, s, "classes");
    if (t.contains("separation")) task.separation = get<double>(t, s, "separation");
    if (t.contains("l2")) task.l2 = get<double>(t, s, "l2");
    if (t.contains("sigma")) task.sigma = get<double>(t, s, "sigma");
    if (t.contains("center")) task.center = get<std::vector<double>>(t, s, "center");
    if (t.contains("train_images")) task.train_images = get<std::string>(t, s, "train_images");
    if (t.contains("train_labels")) task.train_labels = get<std::string>(t, s, "train_labels");
    if (t.contains("test_images")) task.test_images = get<std::string>(t, s, "test_images");
    if (t.contains("test_labels")) task.test_labels = get<std::string>(t, s, "test_labels");
    if (t.contains("partition")) {
      const auto p = get<std::string>(t, s, "partition");
      if (p == "iid") task.partition = PartitionKind::kIid;
      else if (p == "shard") task.partition = PartitionKind::kShard;
      else if (p == "label_skew") task.partition = PartitionKind::kLabelSkew;
      else throw ValidationError("config.task.partition: expected iid | shard | label_skew");
    }
    if (t.contains("data_seed")) task.data_seed = get<std::uint64_t>(t, s, "data_seed");
  }
  if (j.contains("schedule")) {
    const auto& t = j["schedule"];
    const std::string s = "schedule";
    detail::reject_unknown(t, s, {"samples", "eta0", "beta", "probabilities"});
    if (t.contains("samples")) cfg.samples = parse_sample_schedule(get<std::string>(t, s, "samples"));
    if (t.contains("eta0")) cfg.eta0 = get<double>(t, s, "eta0");
    if (t.contains("beta")) cfg.beta = get<double>(t, s, "beta");
    if (t.contains("probabilities")) cfg.probabilities = get<std::vector<double>>(t, s, "probabilities");
  }
  if (j.contains("delays")) {
    const auto& t = j["delays"];
    const std::string s = "delays";
    detail::reject_unknown(t, s, {"compute", "network", "stragglers"});
    if (t.contains("compute")) std::tie(cfg.delays.compute_lo, cfg.delays.compute_hi) = detail::get_range(t, s, "compute");
    if (t.contains("network")) std::tie(cfg.delays.network_lo, cfg.delays.network_hi) = detail::get_range(t, s, "network");
    if (t.contains("stragglers")) {
      cfg.stragglers.clear();
      for (const auto& st : t["stragglers"]) {
        detail::reject_unknown(st, "delays.stragglers[]", {"node", "factor"});
        cfg.stragglers.emplace_back(get<std::size_t>(st, "delays.stragglers[]", "node"),
                                    get<double>(st, "delays.stragglers[]", "factor"));
      }
    }
  }
  if (j.contains("threshold")) {
    const auto& t = j["threshold"];
    const std::string s = "threshold";
    detail::reject_unknown(t, s, {"coeff", "epsilon"});
    if (t.contains("coeff")) cfg.threshold_coeff = get<double>(t, s, "coeff");
    if (t.contains("epsilon")) cfg.threshold_epsilon = get<double>(t, s, "epsilon");
  }
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config '" + path + "': " + e.what());
  }
  apply_config_json(j, base);
  return base;
}

}  // namespace aetsgd
