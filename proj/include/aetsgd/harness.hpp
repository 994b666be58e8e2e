#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "aetsgd/baselines.hpp"
#include "aetsgd/error.hpp"
#include "aetsgd/idx.hpp"
#include "aetsgd/node.hpp"
#include "aetsgd/objectives.hpp"
#include "aetsgd/rng.hpp"
#include "aetsgd/schedules.hpp"
#include "aetsgd/simnet.hpp"
#include "aetsgd/topology.hpp"
#include "aetsgd/trace.hpp"

namespace aetsgd {

enum class Algorithm { kAet, kThreshold };
enum class TopologyKind { kRing, kLine, kComplete, kEdges };
enum class TaskKind { kBlobs, kQuadratic, kIdx };

struct TopologySpec {
  TopologyKind kind = TopologyKind::kRing;
  std::vector<std::pair<NodeId, NodeId>> edges;  // kEdges only
};

struct TaskSpec {
  TaskKind kind = TaskKind::kBlobs;
  std::size_t m = 2000;
  std::size_t test_m = 2000;
  std::size_t dim = 2;
  std::size_t classes = 2;
  double separation = 10.0;
  double l2 = 0.0;
  double sigma = 1.0;  // quadratic cloud spread
  Vector center;       // quadratic cloud center; empty = (1, 2, ..., dim)
  std::string train_images, train_labels, test_images, test_labels;
  PartitionKind partition = PartitionKind::kIid;
  std::optional<std::uint64_t> data_seed;  // defaults to the experiment seed
};

struct ExperimentConfig {
  std::string name = "aet";
  Algorithm algorithm = Algorithm::kAet;
  TopologySpec topology;
  std::size_t nodes = 5;
  TaskSpec task;
  SampleSchedule samples = LinearSamples{10.0, 1.0, 0};
  double eta0 = 0.01;
  double beta = 0.01;
  std::optional<std::uint64_t> max_lag = 1;  // d; empty = unbounded
  std::optional<std::uint64_t> iters;        // K per node
  std::optional<std::uint64_t> iters_total;  // split as ceil(K_total / n)
  DelayModel delays;
  std::vector<std::pair<NodeId, double>> stragglers;
  std::uint64_t seed = 0;
  std::uint64_t eval_every = 1;  // rounds between evaluations; 0 = final only
  double threshold_coeff = 0.2;
  double threshold_epsilon = 1e-5;
  std::vector<double> probabilities;  // empty = uniform
  bool sync_enabled = true;
  bool record_trace = false;
  bool compute_speedup = false;

  std::uint64_t per_node_iters() const {
    if (iters) return *iters;
    return (*iters_total + nodes - 1) / nodes;
  }
};

inline void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& msg) {
    throw ValidationError("config." + field + ": " + msg);
  };
  if (cfg.nodes == 0) fail("nodes", "must be >= 1");
  if (cfg.iters.has_value() == cfg.iters_total.has_value()) fail("iters", "set exactly one of iters / iters_total");
  if (!(cfg.eta0 > 0.0)) fail("eta0", "must be positive");
  if (!(cfg.beta >= 0.0)) fail("beta", "must be non-negative");
  try {
    validate(cfg.samples);
  } catch (const ValidationError& e) {
    fail("schedule", e.what());
  }
  try {
    cfg.delays.validate();
  } catch (const ValidationError& e) {
    fail("delays", e.what());
  }
  for (const auto& [node, factor] : cfg.stragglers) {
    if (node >= cfg.nodes) fail("stragglers", "node " + std::to_string(node) + " does not exist");
    if (!(factor >= 1.0)) fail("stragglers", "factor must be >= 1");
  }
  if (!cfg.probabilities.empty() && cfg.probabilities.size() != cfg.nodes)
    fail("probabilities", "need one entry per node");
  if (!(cfg.threshold_coeff > 0.0 && cfg.threshold_coeff <= 1.0)) fail("threshold.coeff", "must be in (0, 1]");
  if (!(cfg.threshold_epsilon > 0.0)) fail("threshold.epsilon", "must be positive");
  const auto& t = cfg.task;
  if (t.kind == TaskKind::kBlobs) {
    if (t.classes < 2) fail("task.classes", "must be >= 2");
    if (t.m < t.classes || t.test_m < t.classes) fail("task.m", "need at least one sample per class");
    if (t.dim == 0) fail("task.dim", "must be >= 1");
  } else if (t.kind == TaskKind::kQuadratic) {
    if (t.m == 0 || t.test_m == 0) fail("task.m", "must be >= 1");
    if (t.center.empty() && t.dim == 0) fail("task.dim", "must be >= 1");
  } else if (t.train_images.empty() || t.train_labels.empty()) {
    fail("task.train_images", "idx task needs train_images and train_labels");
  }
  if (cfg.topology.kind == TopologyKind::kEdges) {
    for (const auto& [u, v] : cfg.topology.edges)
      if (u >= cfg.nodes || v >= cfg.nodes || u == v) fail("topology.edges", "bad edge");
  }
}

struct CurvePoint {
  std::uint64_t round = 0;  // rounds completed (AET) or broadcasts so far (threshold)
  std::uint64_t iter = 0;
  double loss = 0.0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
};

struct NodeMetrics {
  std::uint64_t rounds = 0;
  std::uint64_t iterations = 0;
  double final_loss = 0.0;        // held-out set
  double final_train_loss = 0.0;  // training set
  double final_accuracy = std::numeric_limits<double>::quiet_NaN();
  double finish_ms = 0.0;
  std::vector<CurvePoint> curve;  // the last point is the final, quiescent state
  Vector model;
};

struct Metrics {
  std::string experiment;
  std::vector<NodeMetrics> nodes;
  std::uint64_t messages = 0;
  double rounds_per_node = 0.0;  // communication rounds (AET) / broadcasts (threshold), mean over nodes
  std::uint64_t expected_rounds = 0;
  std::uint64_t total_iterations = 0;
  double duration_ms = 0.0;
  double speedup = std::numeric_limits<double>::quiet_NaN();
  bool connected = true;
  double agreement = 0.0;          // max pairwise l_inf distance between final models
  double optimum_train_loss = std::numeric_limits<double>::quiet_NaN();  // quadratic only
  std::optional<Trace> trace;

  // Best node by final accuracy (or lowest loss when accuracy is undefined).
  std::size_t best_node() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < nodes.size(); ++c) {
      const auto& a = nodes[c];
      const auto& b = nodes[best];
      const bool better = std::isnan(a.final_accuracy) ? a.final_loss < b.final_loss
                                                       : a.final_accuracy > b.final_accuracy;
      if (better) best = c;
    }
    return best;
  }
};

struct Task {
  std::shared_ptr<const Objective> objective;
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> test;
};

inline Task build_task(const TaskSpec& spec, std::uint64_t seed) {
  const std::uint64_t data_seed = spec.data_seed.value_or(seed);
  Task task;
  switch (spec.kind) {
    case TaskKind::kBlobs: {
      auto train = synthetic_blobs(data_seed, spec.m, spec.dim, spec.classes, spec.separation);
      auto test = synthetic_blobs(derive_seed(data_seed, StreamTag::kEval), spec.test_m, spec.dim, spec.classes,
                                  spec.separation);
      task.objective = std::make_shared<const Objective>(Objective::logistic(spec.dim, spec.classes, spec.l2));
      task.train = std::make_shared<const Dataset>(std::move(train));
      task.test = std::make_shared<const Dataset>(std::move(test));
      break;
    }
    case TaskKind::kQuadratic: {
      Vector center = spec.center;
      if (center.empty())
        for (std::size_t j = 0; j < spec.dim; ++j) center.push_back(static_cast<double>(j + 1));
      task.objective = std::make_shared<const Objective>(Objective::mean_quadratic(center.size()));
      task.train = std::make_shared<const Dataset>(synthetic_cloud(data_seed, spec.m, center, spec.sigma));
      task.test = std::make_shared<const Dataset>(
          synthetic_cloud(derive_seed(data_seed, StreamTag::kEval), spec.test_m, center, spec.sigma));
      break;
    }
    case TaskKind::kIdx: {
      auto train = idx::load_idx(spec.train_images, spec.train_labels);
      auto test = spec.test_images.empty() ? train : idx::load_idx(spec.test_images, spec.test_labels);
      const std::size_t classes = std::max({train.classes, test.classes, std::size_t{2}});
      train.classes = test.classes = classes;
      task.objective = std::make_shared<const Objective>(Objective::logistic(train.dim, classes, spec.l2));
      task.train = std::make_shared<const Dataset>(std::move(train));
      task.test = std::make_shared<const Dataset>(std::move(test));
      break;
    }
  }
  task.train->validate();
  task.test->validate();
  return task;
}

inline Topology build_topology(const TopologySpec& spec, std::size_t n) {
  switch (spec.kind) {
    case TopologyKind::kRing: return Topology::ring(n);
    case TopologyKind::kLine: return Topology::line(n);
    case TopologyKind::kComplete: return Topology::complete(n);
    case TopologyKind::kEdges: return Topology::from_edges(n, spec.edges);
  }
  return Topology::ring(n);
}

namespace detail {

inline CurvePoint evaluate(const Task& task, const Vector& w, std::uint64_t round, std::uint64_t iter) {
  CurvePoint p{round, iter, loss(*task.objective, w, *task.test), std::numeric_limits<double>::quiet_NaN()};
  if (task.objective->kind == ObjectiveKind::kLogistic) p.accuracy = accuracy(*task.objective, w, *task.test);
  return p;
}

inline void finalize_node(const Task& task, NodeMetrics& nm, const Vector& w, std::uint64_t round,
                          std::uint64_t iter) {
  nm.model = w;
  const auto p = evaluate(task, w, round, iter);
  nm.final_loss = p.loss;
  nm.final_accuracy = p.accuracy;
  nm.final_train_loss = loss(*task.objective, w, *task.train);
  nm.curve.push_back(p);
}

inline double max_pairwise_linf(const std::vector<NodeMetrics>& nodes) {
  double worst = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      for (std::size_t j = 0; j < nodes[a].model.size(); ++j)
        worst = std::max(worst, std::abs(nodes[a].model[j] - nodes[b].model[j]));
  return worst;
}

inline Metrics run_aet(const ExperimentConfig& cfg, const Task& task, const Topology& topo) {
  const std::size_t n = cfg.nodes;
  const std::uint64_t k = cfg.per_node_iters();
  const std::uint64_t rounds = required_rounds(cfg.samples, k);
  auto plan = std::make_shared<const RoundPlan>(
      RoundPlan::per_node(cfg.samples, rounds, n, DiminishingStep{cfg.eta0, cfg.beta}));
  const auto probs = cfg.probabilities.empty() ? uniform_probabilities(n) : cfg.probabilities;
  const std::uint64_t assignment_seed = derive_seed(cfg.seed, StreamTag::kSetup);
  auto assignment = std::make_shared<const Assignment>(setup(n, plan->sizes(), probs, assignment_seed));
  const auto partition = make_partition(cfg.task.partition, *task.train, n, cfg.seed);

  std::vector<AetNode> nodes;
  nodes.reserve(n);
  const Vector w0(task.objective->model_dim(), 0.0);
  for (NodeId c = 0; c < n; ++c) {
    NodeEnv env{task.objective, task.train, std::make_shared<const std::vector<std::size_t>>(partition[c]), plan,
                assignment};
    nodes.emplace_back(c, topo.neighbors(c), std::move(env), w0, cfg.max_lag.value_or(kUnboundedDelay), cfg.seed);
    nodes.back().set_sync_enabled(cfg.sync_enabled);
  }

  Metrics m;
  m.experiment = cfg.name;
  m.nodes.resize(n);
  SimOptions opts;
  opts.record_trace = cfg.record_trace;
  if (cfg.eval_every > 0) {
    opts.on_round_end = [&](const AetNode& node, std::uint64_t round, double) {
      const std::uint64_t done = round + 1;
      if (done < rounds && done % cfg.eval_every == 0)
        m.nodes[node.id()].curve.push_back(evaluate(task, node.model(), done, node.iterations()));
    };
  }
  DelayModel delays = cfg.delays;
  Simulator sim(std::move(nodes), topo, delays, cfg.seed, std::move(opts));
  for (const auto& [node, factor] : cfg.stragglers) sim.set_straggler(node, factor);
  TraceMeta meta;
  meta.nodes = n;
  meta.edges = topo.edges();
  meta.max_lag = cfg.max_lag;
  meta.assignment_seed = assignment_seed;
  meta.probabilities = probs;
  meta.round_sizes = plan->sizes();
  sim.set_trace_meta(std::move(meta));
  auto result = sim.run();

  std::uint64_t total_rounds = 0;
  for (NodeId c = 0; c < n; ++c) {
    const auto& node = sim.nodes()[c];
    auto& nm = m.nodes[c];
    nm.rounds = node.round();
    nm.iterations = node.iterations();
    nm.finish_ms = result.stats.finish_time[c];
    if (nm.rounds != rounds)
      throw ProtocolError("node " + std::to_string(c) + " completed " + std::to_string(nm.rounds) +
                          " rounds, expected " + std::to_string(rounds));
    finalize_node(task, nm, node.model(), nm.rounds, nm.iterations);
    total_rounds += nm.rounds;
    m.total_iterations += nm.iterations;
  }
  m.expected_rounds = rounds;
  m.rounds_per_node = static_cast<double>(total_rounds) / static_cast<double>(n);
  m.messages = result.stats.messages_sent;
  m.duration_ms = result.stats.duration_ms;
  if (cfg.record_trace) m.trace = std::move(result.trace);
  return m;
}

inline Metrics run_threshold_experiment(const ExperimentConfig& cfg, const Task& task, const Topology& topo) {
  const std::size_t n = cfg.nodes;
  const std::uint64_t k = cfg.per_node_iters();
  const auto partition = make_partition(cfg.task.partition, *task.train, n, cfg.seed);
  std::vector<ThresholdNode> nodes;
  nodes.reserve(n);
  const Vector w0(task.objective->model_dim(), 0.0);
  const ThresholdParams params{cfg.eta0, cfg.threshold_epsilon, cfg.threshold_coeff};
  for (NodeId c = 0; c < n; ++c)
    nodes.emplace_back(c, topo.neighbors(c), task.objective, task.train,
                       std::make_shared<const std::vector<std::size_t>>(partition[c]), w0, params, cfg.seed);
  Metrics m;
  m.experiment = cfg.name;
  m.nodes.resize(n);
  const std::uint64_t eval_stride = cfg.eval_every == 0 ? 0 : std::max<std::uint64_t>(1, k / 20);
  std::vector<double> finish(n, 0.0);
  auto stats = run_threshold(nodes, topo, [&] {
    DelayModel d = cfg.delays;
    if (d.straggler.size() < n) d.straggler.resize(n, 1.0);
    for (const auto& [node, factor] : cfg.stragglers) d.straggler[node] = factor;
    return d;
  }(), cfg.seed, k, [&](const ThresholdNode& node, double time) {
    if (node.iterations() == k) finish[node.id()] = time;
    if (eval_stride > 0 && node.iterations() < k && node.iterations() % eval_stride == 0)
      m.nodes[node.id()].curve.push_back(evaluate(task, node.model(), node.broadcasts(), node.iterations()));
  });
  std::uint64_t total_broadcasts = 0;
  for (NodeId c = 0; c < n; ++c) {
    auto& nm = m.nodes[c];
    nm.rounds = nodes[c].broadcasts();
    nm.iterations = nodes[c].iterations();
    nm.finish_ms = finish[c];
    finalize_node(task, nm, nodes[c].model(), nm.rounds, nm.iterations);
    total_broadcasts += nm.rounds;
    m.total_iterations += nm.iterations;
  }
  m.rounds_per_node = static_cast<double>(total_broadcasts) / static_cast<double>(n);
  m.messages = stats.messages_sent;
  m.duration_ms = stats.duration_ms;
  return m;
}

}  // namespace detail

inline Metrics run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const Task task = build_task(cfg.task, cfg.seed);
  const Topology topo = build_topology(cfg.topology, cfg.nodes);
  Metrics m = cfg.algorithm == Algorithm::kAet ? detail::run_aet(cfg, task, topo)
                                               : detail::run_threshold_experiment(cfg, task, topo);
  m.connected = topo.is_connected();
  m.agreement = detail::max_pairwise_linf(m.nodes);
  if (task.objective->kind == ObjectiveKind::kMeanQuadratic)
    m.optimum_train_loss = loss(*task.objective, dataset_mean(*task.train), *task.train);

  if (cfg.nodes == 1) {
    m.speedup = 1.0;
  } else if (cfg.compute_speedup) {
    ExperimentConfig ref = cfg;
    ref.nodes = 1;
    ref.topology = TopologySpec{TopologyKind::kRing, {}};
    ref.stragglers.clear();
    ref.probabilities.clear();
    ref.iters.reset();
    ref.iters_total = cfg.iters_total.value_or(cfg.per_node_iters() * cfg.nodes);
    ref.eval_every = 0;
    ref.record_trace = false;
    ref.compute_speedup = false;
    const Metrics base = run_experiment(ref);
    m.speedup = base.duration_ms / m.duration_ms;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepAxis { kNodes, kMaxLag, kIters, kConstantS, kThresholdCoeff };

inline const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNodes: return "n";
    case SweepAxis::kMaxLag: return "d";
    case SweepAxis::kIters: return "K";
    case SweepAxis::kConstantS: return "constant-s";
    case SweepAxis::kThresholdCoeff: return "threshold-coeff";
  }
  return "?";
}

inline SweepAxis parse_sweep_axis(std::string_view s) {
  if (s == "n") return SweepAxis::kNodes;
  if (s == "d") return SweepAxis::kMaxLag;
  if (s == "K") return SweepAxis::kIters;
  if (s == "constant-s") return SweepAxis::kConstantS;
  if (s == "threshold-coeff") return SweepAxis::kThresholdCoeff;
  throw ValidationError("unknown sweep axis '" + std::string(s) + "' (n | d | K | constant-s | threshold-coeff)");
}

struct SweepRow {
  double value = 0.0;
  Metrics metrics;
};

inline ExperimentConfig sweep_point(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig cfg = base;
  auto as_count = [&](const char* what) {
    if (!(value >= 0.0) || value != std::floor(value))
      throw ValidationError(std::string("sweep ") + what + ": value must be a non-negative integer");
    return static_cast<std::uint64_t>(value);
  };
  switch (axis) {
    case SweepAxis::kNodes: {
      cfg.nodes = static_cast<std::size_t>(as_count("n"));
      std::erase_if(cfg.stragglers, [&](const auto& s) { return s.first >= cfg.nodes; });
      cfg.probabilities.clear();
      break;
    }
    case SweepAxis::kMaxLag: cfg.max_lag = as_count("d"); break;
    case SweepAxis::kIters:
      if (cfg.iters_total) cfg.iters_total = as_count("K");
      else cfg.iters = as_count("K");
      break;
    case SweepAxis::kConstantS: cfg.samples = constant_local_schedule(as_count("constant-s")); break;
    case SweepAxis::kThresholdCoeff:
      cfg.algorithm = Algorithm::kThreshold;
      cfg.threshold_coeff = value;
      break;
  }
  cfg.name = std::string(to_string(axis)) + "=" + text::format_double(value);
  return cfg;
}

// One Metrics row per value, all sharing the base seed. Along the node axis
// the speedup column is filled from the n = 1 row when one is present.
inline std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis, const std::vector<double>& values) {
  std::vector<SweepRow> rows;
  for (double v : values) rows.push_back(SweepRow{v, run_experiment(sweep_point(base, axis, v))});
  if (axis == SweepAxis::kNodes) {
    const auto one = std::find_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.value == 1.0; });
    if (one != rows.end())
      for (auto& r : rows) r.metrics.speedup = one->metrics.duration_ms / r.metrics.duration_ms;
  }
  return rows;
}

}  // namespace aetsgd
