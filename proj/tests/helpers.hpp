#pragma once

#include <memory>

#include "aetsgd/aetsgd.hpp"

namespace testing_util {

using namespace aetsgd;

// Nodes over a shared dataset (iid), ready for a Simulator.
struct Fixture {
  std::shared_ptr<const Objective> objective;
  std::shared_ptr<const Dataset> data;
  std::shared_ptr<const RoundPlan> plan;
  std::shared_ptr<const Assignment> assignment;
  Topology topo;

  Fixture(Topology t, const SampleSchedule& sched, std::uint64_t rounds, std::uint64_t seed,
          StepSchedule step = DiminishingStep{0.01, 0.01})
      : topo(std::move(t)) {
    const std::size_t n = topo.size();
    objective = std::make_shared<const Objective>(Objective::logistic(2, 2));
    data = std::make_shared<const Dataset>(synthetic_blobs(seed, 200, 2, 2, 10.0));
    plan = std::make_shared<const RoundPlan>(RoundPlan::per_node(sched, rounds, n, step));
    assignment = std::make_shared<const Assignment>(setup(n, plan->sizes(), uniform_probabilities(n), seed));
  }

  NodeEnv env() const {
    std::vector<std::size_t> all(data->size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return NodeEnv{objective, data, std::make_shared<const std::vector<std::size_t>>(all), plan, assignment};
  }

  std::vector<AetNode> nodes(std::uint64_t max_lag, std::uint64_t seed, bool sync = true) const {
    std::vector<AetNode> out;
    for (NodeId c = 0; c < topo.size(); ++c) {
      out.emplace_back(c, topo.neighbors(c), env(), Vector(objective->model_dim(), 0.0), max_lag, seed);
      out.back().set_sync_enabled(sync);
    }
    return out;
  }

  TraceMeta meta(std::uint64_t max_lag, std::uint64_t seed) const {
    TraceMeta m;
    m.nodes = topo.size();
    m.edges = topo.edges();
    if (max_lag != kUnboundedDelay) m.max_lag = max_lag;
    m.assignment_seed = seed;
    m.probabilities = uniform_probabilities(topo.size());
    m.round_sizes = plan->sizes();
    return m;
  }

  SimResult simulate(std::uint64_t max_lag, std::uint64_t seed, DelayModel delays = {}, bool sync = true) const {
    Simulator sim(nodes(max_lag, seed, sync), topo, std::move(delays), seed);
    sim.set_trace_meta(meta(max_lag, seed));
    return sim.run();
  }
};

}  // namespace testing_util
