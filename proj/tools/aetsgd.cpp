// Command-line front end: run | sweep | compare | validate-trace | gen-data | inspect-idx.
//
// Exit codes: 0 success, 1 validation error (bad flags, config, input files),
// 2 runtime error, 3 trace validation found violations.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aetsgd/aetsgd.hpp"
#include "aetsgd/config.hpp"

namespace {

using namespace aetsgd;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitViolations = 3;

// Flags shared by run / sweep / compare. Defaults are the reference experiment
// settings; anything given on the command line overrides the config file.
struct ExperimentFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::string topology = "ring";
  std::string edges;
  std::size_t nodes = 5;
  std::string schedule = "linear:10,1,0";
  std::uint64_t iters = 60000;
  std::uint64_t iters_total = 0;
  std::string d = "1";
  std::string objective = "blobs";
  std::size_t m = 2000;
  std::size_t test_m = 2000;
  std::size_t dim = 2;
  std::size_t classes = 2;
  double separation = 10.0;
  double l2 = 0.0;
  double sigma = 1.0;
  std::string train_images, train_labels, test_images, test_labels;
  std::string partition = "iid";
  double eta0 = 0.01;
  double beta = 0.01;
  std::string compute_delay = "0.1,1";
  std::string network_delay = "0.1,1.5";
  std::vector<std::string> stragglers;
  std::string probs;
  std::uint64_t eval_every = 1;
  std::string algorithm = "aet";
  double coeff = 0.2;
  double epsilon = 1e-5;
  bool speedup = false;
  bool disable_sync = false;

  std::map<std::string, CLI::Option*> opts;

  void add_to(CLI::App& app) {
    auto add = [&](const std::string& name, auto& var, const std::string& desc) {
      opts[name] = app.add_option("--" + name, var, desc)->capture_default_str();
    };
    opts["config"] = app.add_option("--config", config, "JSON experiment file; flags override its values");
    opts["seed"] = app.add_option("--seed", seed, "Master seed (required)")->required();
    add("topology", topology, "ring | line | complete");
    opts["edges"] = app.add_option("--edges", edges, "Edge-list file ('u v' per line); overrides --topology");
    add("nodes", nodes, "Number of compute nodes n");
    add("schedule", schedule, "Sample sizes: linear:a,p,b | const:s | thetalog:scale");
    add("iters", iters, "Iterations K per node");
    add("iters-total", iters_total, "Total iterations K_total, split as ceil(K_total/n); overrides --iters");
    add("d", d, "Asynchronous round bound (integer or 'inf')");
    add("objective", objective, "blobs | quadratic | idx");
    add("m", m, "Training samples (synthetic tasks)");
    add("test-m", test_m, "Held-out samples (synthetic tasks)");
    add("dim", dim, "Feature dimension (synthetic tasks)");
    add("classes", classes, "Classes (blobs)");
    add("separation", separation, "Cluster radius (blobs)");
    add("l2", l2, "L2 coefficient (logistic objectives)");
    add("sigma", sigma, "Cloud spread (quadratic)");
    opts["train-images"] = app.add_option("--train-images", train_images, "IDX training images");
    opts["train-labels"] = app.add_option("--train-labels", train_labels, "IDX training labels");
    opts["test-images"] = app.add_option("--test-images", test_images, "IDX test images");
    opts["test-labels"] = app.add_option("--test-labels", test_labels, "IDX test labels");
    add("partition", partition, "iid | shard | label_skew");
    add("eta0", eta0, "Initial step size");
    add("beta", beta, "Step decay: eta0 / (1 + beta*sqrt(t))");
    add("compute-delay", compute_delay, "Per-iteration compute latency range lo,hi (ms)");
    add("network-delay", network_delay, "Per-message network latency range lo,hi (ms)");
    opts["straggler"] = app.add_option("--straggler", stragglers, "node:factor (repeatable)");
    opts["probs"] = app.add_option("--probs", probs, "Slot probabilities p_c, comma separated (default uniform)");
    add("eval-every", eval_every, "Evaluate every k rounds (0 = final only)");
    add("algorithm", algorithm, "aet | threshold");
    add("coeff", coeff, "Threshold baseline: v0 = coeff * N_p");
    add("epsilon", epsilon, "Threshold baseline step decay epsilon");
    opts["speedup"] = app.add_flag("--speedup", speedup, "Also run the n=1 reference and report speedup");
    opts["disable-sync"] =
        app.add_flag("--disable-sync", disable_sync, "Skip the delay checkpoint (fault injection only)");
  }

  bool given(const std::string& name) const {
    const auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
  // With no config file every default applies; with one, only explicit flags.
  bool use(const std::string& name) const { return config.empty() || given(name); }

  static std::pair<double, double> range(const std::string& s, const std::string& what) {
    const auto parts = text::split(s, ',');
    if (parts.size() != 2) throw ValidationError(what + ": expected lo,hi");
    return {text::parse_double(parts[0], what), text::parse_double(parts[1], what)};
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    cfg.iters = iters;
    if (!config.empty()) cfg = load_config(config, cfg);
    cfg.seed = seed;
    if (use("topology")) {
      if (topology == "ring") cfg.topology.kind = TopologyKind::kRing;
      else if (topology == "line") cfg.topology.kind = TopologyKind::kLine;
      else if (topology == "complete") cfg.topology.kind = TopologyKind::kComplete;
      else throw ValidationError("--topology: expected ring | line | complete");
    }
    if (use("nodes")) cfg.nodes = nodes;
    if (given("edges")) {
      std::ifstream in(edges);
      if (!in) throw IoError("cannot open edge list '" + edges + "'");
      const auto topo = parse_edge_list(in, given("nodes") ? nodes : 0);
      cfg.topology = TopologySpec{TopologyKind::kEdges, topo.edges()};
      cfg.nodes = topo.size();
    }
    if (use("schedule")) cfg.samples = parse_sample_schedule(schedule);
    if (given("iters-total")) {
      cfg.iters_total = iters_total;
      cfg.iters.reset();
    } else if (given("iters")) {
      cfg.iters = iters;
      cfg.iters_total.reset();
    }
    if (use("d")) {
      if (d == "inf") cfg.max_lag.reset();
      else cfg.max_lag = text::parse_u64(d, "--d");
    }
    if (use("objective")) {
      if (objective == "blobs") cfg.task.kind = TaskKind::kBlobs;
      else if (objective == "quadratic") cfg.task.kind = TaskKind::kQuadratic;
      else if (objective == "idx") cfg.task.kind = TaskKind::kIdx;
      else throw ValidationError("--objective: expected blobs | quadratic | idx");
    }
    if (use("m")) cfg.task.m = m;
    if (use("test-m")) cfg.task.test_m = test_m;
    if (use("dim")) cfg.task.dim = dim;
    if (use("classes")) cfg.task.classes = classes;
    if (use("separation")) cfg.task.separation = separation;
    if (use("l2")) cfg.task.l2 = l2;
    if (use("sigma")) cfg.task.sigma = sigma;
    if (given("train-images")) cfg.task.train_images = train_images;
    if (given("train-labels")) cfg.task.train_labels = train_labels;
    if (given("test-images")) cfg.task.test_images = test_images;
    if (given("test-labels")) cfg.task.test_labels = test_labels;
    if (use("partition")) {
      if (partition == "iid") cfg.task.partition = PartitionKind::kIid;
      else if (partition == "shard") cfg.task.partition = PartitionKind::kShard;
      else if (partition == "label_skew") cfg.task.partition = PartitionKind::kLabelSkew;
      else throw ValidationError("--partition: expected iid | shard | label_skew");
    }
    if (use("eta0")) cfg.eta0 = eta0;
    if (use("beta")) cfg.beta = beta;
    if (use("compute-delay")) std::tie(cfg.delays.compute_lo, cfg.delays.compute_hi) = range(compute_delay, "--compute-delay");
    if (use("network-delay")) std::tie(cfg.delays.network_lo, cfg.delays.network_hi) = range(network_delay, "--network-delay");
    if (given("straggler")) {
      cfg.stragglers.clear();
      for (const auto& s : stragglers) {
        const auto parts = text::split(s, ':');
        if (parts.size() != 2) throw ValidationError("--straggler: expected node:factor");
        cfg.stragglers.emplace_back(text::parse_u64(parts[0], "--straggler node"),
                                    text::parse_double(parts[1], "--straggler factor"));
      }
    }
    if (given("probs")) {
      cfg.probabilities.clear();
      for (auto p : text::split(probs, ',')) cfg.probabilities.push_back(text::parse_double(p, "--probs"));
    }
    if (use("eval-every")) cfg.eval_every = eval_every;
    if (use("algorithm")) {
      if (algorithm == "aet") cfg.algorithm = Algorithm::kAet;
      else if (algorithm == "threshold") cfg.algorithm = Algorithm::kThreshold;
      else throw ValidationError("--algorithm: expected aet | threshold");
    }
    if (use("coeff")) cfg.threshold_coeff = coeff;
    if (use("epsilon")) cfg.threshold_epsilon = epsilon;
    if (given("speedup")) cfg.compute_speedup = true;
    if (given("disable-sync")) cfg.sync_enabled = false;
    return cfg;
  }
};

std::string fmt(double v, int digits = 4) {
  if (std::isnan(v)) return "-";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void print_summary(std::ostream& out, const Metrics& m) {
  const auto best = m.best_node();
  out << m.experiment << ": nodes=" << m.nodes.size() << " rounds/node=" << fmt(m.rounds_per_node, 1)
      << " messages=" << m.messages << " duration_ms=" << fmt(m.duration_ms, 1) << " speedup=" << fmt(m.speedup, 3)
      << " best_node=" << best << " loss=" << fmt(m.nodes[best].final_loss)
      << " accuracy=" << fmt(m.nodes[best].final_accuracy) << " agreement=" << fmt(m.agreement, 6);
  if (!m.connected) out << " [warning: topology is disconnected]";
  out << '\n';
}

int cmd_run(const ExperimentFlags& flags, const std::string& out_csv, const std::string& trace_path,
            const std::string& svg_path) {
  auto cfg = flags.build();
  if (!trace_path.empty()) cfg.record_trace = true;
  if (!trace_path.empty() && cfg.algorithm != Algorithm::kAet)
    throw ValidationError("--trace is only available for --algorithm aet");
  const auto m = run_experiment(cfg);
  print_summary(std::cout, m);
  if (!out_csv.empty()) export_csv(std::vector<Metrics>{m}, out_csv);
  if (!trace_path.empty()) export_trace(*m.trace, trace_path);
  if (!svg_path.empty()) export_svg_lines(loss_curves(m), svg_path, cfg.name + " held-out loss per node");
  return kExitOk;
}

int cmd_sweep(const ExperimentFlags& flags, const std::string& axis_name, const std::string& values_text,
              const std::string& out_csv, const std::string& svg_path) {
  const auto cfg = flags.build();
  const auto axis = parse_sweep_axis(axis_name);
  std::vector<double> values;
  for (auto v : text::split(values_text, ',')) values.push_back(text::parse_double(v, "--values"));
  if (values.empty()) throw ValidationError("--values: need at least one value");
  const auto rows = sweep(cfg, axis, values);
  std::cout << axis_name << ",rounds_per_node,messages,duration_ms,speedup,best_accuracy,best_loss\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const auto& b = m.nodes[m.best_node()];
    std::cout << text::format_double(r.value) << ',' << fmt(m.rounds_per_node, 1) << ',' << m.messages << ','
              << fmt(m.duration_ms, 1) << ',' << fmt(m.speedup, 3) << ',' << fmt(b.final_accuracy) << ','
              << fmt(b.final_loss) << '\n';
  }
  if (!out_csv.empty()) export_csv(rows, out_csv);
  if (!svg_path.empty()) {
    std::vector<Series> series;
    for (const auto& r : rows) {
      const auto& b = r.metrics.nodes[r.metrics.best_node()];
      Series s{r.metrics.experiment, {}};
      for (const auto& p : b.curve) s.points.emplace_back(static_cast<double>(p.iter), p.loss);
      series.push_back(std::move(s));
    }
    export_svg_lines(series, svg_path, "sweep over " + axis_name + " (best node)");
  }
  return kExitOk;
}

int cmd_compare(const ExperimentFlags& flags, const std::string& out_csv) {
  auto cfg = flags.build();
  cfg.algorithm = Algorithm::kAet;
  cfg.name = "aet";
  const auto aet = run_experiment(cfg);
  cfg.algorithm = Algorithm::kThreshold;
  cfg.name = "threshold";
  const auto thr = run_experiment(cfg);
  print_summary(std::cout, aet);
  print_summary(std::cout, thr);
  std::cout << "communication reduction (threshold broadcasts / aet rounds): "
            << fmt(thr.rounds_per_node / aet.rounds_per_node, 2) << "x\n";
  if (!out_csv.empty()) export_csv(std::vector<Metrics>{aet, thr}, out_csv);
  return kExitOk;
}

int cmd_validate(const std::string& trace_path, const std::string& d_text, const std::string& tau_text,
                 const std::string& violations_path) {
  const auto trace = load_trace(trace_path);
  std::uint64_t max_lag = trace.meta.max_lag.value_or(kUnboundedDelay);
  if (!d_text.empty()) max_lag = d_text == "inf" ? kUnboundedDelay : text::parse_u64(d_text, "--d");
  auto round_report = verify_round_delay(trace, max_lag);
  write_report(std::cout, round_report,
               "round delay (d=" + (max_lag == kUnboundedDelay ? std::string("inf") : std::to_string(max_lag)) + ")");
  bool ok = round_report.ok;
  ConsistencyReport all = round_report;
  if (!tau_text.empty()) {
    const RhoMap rho(setup(trace.meta.nodes, trace.meta.round_sizes, trace.meta.probabilities,
                           trace.meta.assignment_seed));
    DelayFn fn;
    if (tau_text == "sqrt-log") fn = sqrt_log_delay();
    else if (tau_text == "induced") fn = induced_round_delay(rho, max_lag == kUnboundedDelay ? rho.assignment().rounds() : max_lag);
    else if (tau_text.rfind("const:", 0) == 0) fn = constant_delay(text::parse_double(tau_text.substr(6), "--tau"));
    else throw ValidationError("--tau: expected sqrt-log | induced | const:X");
    const auto iter_report = verify_iteration_delay(trace, rho, fn);
    write_report(std::cout, iter_report, "iteration delay (tau=" + tau_text + ")");
    ok = ok && iter_report.ok;
    all.violations.insert(all.violations.end(), iter_report.violations.begin(), iter_report.violations.end());
  }
  if (!violations_path.empty()) {
    std::ofstream out(violations_path);
    if (!out) throw IoError("cannot open '" + violations_path + "' for writing");
    write_violations(out, all);
  }
  return ok ? kExitOk : kExitViolations;
}

int cmd_gen_data(std::uint64_t seed, std::size_t m, std::size_t dim, std::size_t classes, double separation,
                 const std::string& images, const std::string& labels) {
  auto ds = synthetic_blobs(seed, m, dim, classes, separation);
  // IDX stores bytes; rescale features into [0, 1] first.
  const auto [lo, hi] = std::minmax_element(ds.features.begin(), ds.features.end());
  const double a = *lo;
  const double span = *hi > *lo ? *hi - *lo : 1.0;
  for (auto& v : ds.features) v = (v - a) / span;
  const auto [img, lab] = idx::encode_dataset(ds);
  idx::write_file(images, img);
  idx::write_file(labels, lab);
  std::cout << "wrote " << ds.size() << " samples (dim " << dim << ", " << classes << " classes) to " << images
            << " and " << labels << '\n';
  return kExitOk;
}

int cmd_inspect(const std::string& images, const std::string& labels) {
  const auto im = idx::parse_images(idx::read_file(images), images);
  std::cout << "images: count=" << im.count << " rows=" << im.rows << " cols=" << im.cols << '\n';
  if (!labels.empty()) {
    const auto lb = idx::parse_labels(idx::read_file(labels), labels);
    const auto ds = idx::to_dataset(im, lb);
    std::vector<std::size_t> hist(ds.classes, 0);
    for (int y : ds.labels) ++hist[static_cast<std::size_t>(y)];
    std::cout << "labels: count=" << lb.size() << " classes=" << ds.classes << " histogram=";
    for (std::size_t k = 0; k < hist.size(); ++k) std::cout << (k ? "," : "") << hist[k];
    std::cout << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous event-triggered SGD simulator"};
  app.require_subcommand(1);

  ExperimentFlags run_flags, sweep_flags, compare_flags;
  std::string run_out, run_trace, run_svg;
  auto* run = app.add_subcommand("run", "Run one experiment");
  run_flags.add_to(*run);
  run->add_option("--out", run_out, "Metrics CSV path");
  run->add_option("--trace", run_trace, "Trace file path (aet only)");
  run->add_option("--svg", run_svg, "Per-node loss curve SVG path");

  std::string sweep_axis, sweep_values, sweep_out, sweep_svg;
  auto* sw = app.add_subcommand("sweep", "Run one experiment per value along an axis");
  sweep_flags.add_to(*sw);
  sw->add_option("--axis", sweep_axis, "n | d | K | constant-s | threshold-coeff")->required();
  sw->add_option("--values", sweep_values, "Comma-separated axis values")->required();
  sw->add_option("--out", sweep_out, "Metrics CSV path");
  sw->add_option("--svg", sweep_svg, "Best-node loss curves SVG path");

  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "AET vs threshold baseline on the same task");
  compare_flags.add_to(*cmp);
  cmp->add_option("--out", compare_out, "Metrics CSV path");

  std::string vt_trace, vt_d, vt_tau, vt_violations;
  auto* vt = app.add_subcommand("validate-trace", "Check a trace against the round (and optionally iteration) delay bound");
  vt->add_option("--trace", vt_trace, "Trace file")->required();
  vt->add_option("--d", vt_d, "Round bound (default: the bound recorded in the trace; 'inf' disables)");
  vt->add_option("--tau", vt_tau, "Also check iteration delay: sqrt-log | induced | const:X");
  vt->add_option("--violations", vt_violations, "Write the violation list as CSV");

  std::uint64_t gd_seed = 0;
  std::size_t gd_m = 2000, gd_dim = 2, gd_classes = 2;
  double gd_sep = 10.0;
  std::string gd_images, gd_labels;
  auto* gd = app.add_subcommand("gen-data", "Write a synthetic blobs dataset as IDX files");
  gd->add_option("--seed", gd_seed, "Data seed")->required();
  gd->add_option("--m", gd_m, "Samples")->capture_default_str();
  gd->add_option("--dim", gd_dim, "Feature dimension")->capture_default_str();
  gd->add_option("--classes", gd_classes, "Classes")->capture_default_str();
  gd->add_option("--separation", gd_sep, "Cluster radius")->capture_default_str();
  gd->add_option("--images", gd_images, "Output IDX images path")->required();
  gd->add_option("--labels", gd_labels, "Output IDX labels path")->required();

  std::string ii_images, ii_labels;
  auto* ii = app.add_subcommand("inspect-idx", "Print the header and label histogram of IDX files");
  ii->add_option("--images", ii_images, "IDX images file")->required();
  ii->add_option("--labels", ii_labels, "IDX labels file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << " (see --help)\n";
    return kExitValidation;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags, run_out, run_trace, run_svg);
    if (sw->parsed()) return cmd_sweep(sweep_flags, sweep_axis, sweep_values, sweep_out, sweep_svg);
    if (cmp->parsed()) return cmd_compare(compare_flags, compare_out);
    if (vt->parsed()) return cmd_validate(vt_trace, vt_d, vt_tau, vt_violations);
    if (gd->parsed()) return cmd_gen_data(gd_seed, gd_m, gd_dim, gd_classes, gd_sep, gd_images, gd_labels);
    if (ii->parsed()) return cmd_inspect(ii_images, ii_labels);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}
