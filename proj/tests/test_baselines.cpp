#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace aetsgd;

namespace {

struct ThresholdFixture {
  std::shared_ptr<const Objective> obj = std::make_shared<const Objective>(Objective::mean_quadratic(2));
  std::shared_ptr<const Dataset> data =
      std::make_shared<const Dataset>(synthetic_cloud(4, 100, {1.0, 2.0}, 1.0));
  std::shared_ptr<const std::vector<std::size_t>> all = [] {
    std::vector<std::size_t> v(100);
    for (std::size_t i = 0; i < 100; ++i) v[i] = i;
    return std::make_shared<const std::vector<std::size_t>>(v);
  }();

  ThresholdNode node(NodeId id, std::vector<NodeId> nbrs, Vector w0, ThresholdParams p = {}) const {
    return ThresholdNode(id, std::move(nbrs), obj, data, all, std::move(w0), p, 1);
  }
};

}  // namespace

TEST(Threshold, ThresholdIsAlphaTimesCoeffTimesParams) {
  ThresholdFixture f;
  const auto n = f.node(0, {1}, {0.0, 0.0});
  EXPECT_DOUBLE_EQ(n.threshold(), 0.01 * 0.2 * 2);
  EXPECT_DOUBLE_EQ(n.alpha(), 0.01);
  EXPECT_DOUBLE_EQ(n.beta(), 0.02252);
}

TEST(Threshold, BroadcastsOnlyPastThreshold) {
  ThresholdFixture f;
  auto n = f.node(0, {1}, {0.0, 0.0});
  EXPECT_FALSE(n.should_broadcast());
  n.step();
  // One step moves w by alpha * |g| with g ~ w - xi, well above 0.004.
  EXPECT_GT(n.drift(), n.threshold());
  EXPECT_TRUE(n.should_broadcast());
  const auto msg = n.broadcast();
  EXPECT_EQ(msg.version, 1u);
  EXPECT_EQ(n.drift(), 0.0);
  EXPECT_FALSE(n.should_broadcast());
}

// w <- w - alpha g + beta sum_j (w_j - w), checked by hand with g = w - xi.
TEST(Threshold, StepFormula) {
  ThresholdFixture f;
  auto a = f.node(0, {1, 2}, {0.0, 0.0});
  a.set_neighbor_model(1, {1.0, 0.0});
  a.set_neighbor_model(2, {0.0, 1.0});
  Rng rng = make_rng(1, StreamTag::kSampling, 0);
  const auto idx = uniform_index(rng, 100);
  const auto xi = f.data->row(idx);
  a.step();
  EXPECT_NEAR(a.model()[0], -0.01 * (0.0 - xi[0]) + 0.02252 * 1.0, 1e-15);
  EXPECT_NEAR(a.model()[1], -0.01 * (0.0 - xi[1]) + 0.02252 * 1.0, 1e-15);
}

TEST(Threshold, StaleDeliveryIgnored) {
  ThresholdFixture f;
  auto a = f.node(0, {1}, {0.0, 0.0});
  a.on_receive(ModelBroadcast{1, 2, std::make_shared<const Vector>(Vector{5.0, 5.0})});
  a.on_receive(ModelBroadcast{1, 1, std::make_shared<const Vector>(Vector{-5.0, -5.0})});
  auto b = f.node(0, {1}, {0.0, 0.0});
  b.set_neighbor_model(1, {5.0, 5.0});
  a.step();
  b.step();
  EXPECT_EQ(a.model(), b.model());
}

TEST(Threshold, ParamValidation) {
  ThresholdFixture f;
  EXPECT_THROW(f.node(0, {1}, {0.0, 0.0}, ThresholdParams{0.01, 1e-5, 0.0}), ValidationError);
  EXPECT_THROW(f.node(0, {1}, {0.0, 0.0}, ThresholdParams{0.01, 1e-5, 1.5}), ValidationError);
  EXPECT_THROW(f.node(0, {1}, {0.0}), ValidationError);
}

TEST(Threshold, LowerCoeffBroadcastsMore) {
  ThresholdFixture f;
  const auto topo = Topology::ring(3);
  std::uint64_t prev = 0;
  for (double coeff : {1.0, 0.5, 0.1}) {
    std::vector<ThresholdNode> nodes;
    for (NodeId c = 0; c < 3; ++c) nodes.push_back(f.node(c, topo.neighbors(c), {0.0, 0.0}, {0.01, 1e-5, coeff}));
    const auto stats = run_threshold(nodes, topo, {}, 3, 2000);
    std::uint64_t total = 0;
    for (auto b : stats.broadcasts) total += b;
    EXPECT_GE(total, prev);
    EXPECT_EQ(stats.messages_sent, stats.messages_delivered);
    EXPECT_EQ(stats.messages_sent, 2 * total);
    prev = total;
  }
}

TEST(SerialSgd, ConvergesOnQuadratic) {
  ThresholdFixture f;
  const auto r = serial_sgd(*f.obj, *f.data, 20000, ConstantSamples{100}, DiminishingStep{0.05, 0.01}, 2);
  const double opt = loss(*f.obj, dataset_mean(*f.data), *f.data);
  EXPECT_LT(r.loss_curve.back(), opt * 1.03);
  EXPECT_LT(r.loss_curve.back(), r.loss_curve.front());
  EXPECT_EQ(r.loss_curve.size(), 200u);
}

TEST(ConstantLocal, IsConstantSchedule) {
  const auto s = constant_local_schedule(250);
  EXPECT_EQ(sample_size(s, 0), 250u);
  EXPECT_EQ(sample_size(s, 99), 250u);
  EXPECT_THROW(constant_local_schedule(0), ValidationError);
}
