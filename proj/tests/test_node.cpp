#include <gtest/gtest.h>

#include <cmath>

#include "helpers.hpp"

using namespace aetsgd;
using testing_util::Fixture;

TEST(Setup, CountsSumToRoundSize) {
  const auto a = setup(5, LinearSamples{10, 1, 0}, uniform_probabilities(5), 3, 20);
  for (std::size_t i = 0; i < a.rounds(); ++i) {
    std::uint64_t sum = 0;
    for (NodeId c = 0; c < 5; ++c) sum += a.count(i, c);
    EXPECT_EQ(sum, a.round_size(i));
  }
}

TEST(Setup, ZeroProbabilityNodeNeverChosen) {
  const auto a = setup(3, std::vector<std::uint64_t>(50, 40), {0.5, 0.0, 0.5}, 9);
  for (std::size_t i = 0; i < a.rounds(); ++i) EXPECT_EQ(a.count(i, 1), 0u);
  const auto last = setup(3, std::vector<std::uint64_t>(50, 40), {0.5, 0.5, 0.0}, 9);
  for (std::size_t i = 0; i < last.rounds(); ++i) EXPECT_EQ(last.count(i, 2), 0u);
}

TEST(Setup, RejectsBadProbabilities) {
  const std::vector<std::uint64_t> sizes{10};
  EXPECT_THROW(setup(2, sizes, {0.6, 0.6}, 1), ValidationError);
  EXPECT_THROW(setup(2, sizes, {1.5, -0.5}, 1), ValidationError);
  EXPECT_THROW(setup(2, sizes, {1.0}, 1), ValidationError);
  EXPECT_THROW(setup(0, sizes, {}, 1), ValidationError);
}

TEST(Setup, SameSeedSameLabels) {
  const auto a = setup(4, ConstantSamples{50}, uniform_probabilities(4), 77, 10);
  const auto b = setup(4, ConstantSamples{50}, uniform_probabilities(4), 77, 10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::uint64_t t = 0; t < 50; ++t) EXPECT_EQ(a.slot(i, t), b.slot(i, t));
}

TEST(Setup, SingleNodeTakesEverySlot) {
  const auto a = setup(1, ConstantSamples{30}, {1.0}, 5, 4);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.count(i, 0), 30u);
}

// w = [1, 1], U = [2, 4], eta = 0.5 gives w = [0, -1].
TEST(AetNode, ReceiveAppliesScaledSum) {
  Fixture f(Topology::ring(2), ConstantSamples{1}, 1, 1, DiminishingStep{0.5, 0.0});
  auto obj = std::make_shared<const Objective>(Objective::mean_quadratic(2));
  auto data = std::make_shared<const Dataset>(synthetic_cloud(1, 4, {0.0, 0.0}, 1.0));
  NodeEnv env{obj, data, std::make_shared<const std::vector<std::size_t>>(std::vector<std::size_t>{0}), f.plan,
              f.assignment};
  AetNode node(0, {1}, env, Vector{1.0, 1.0}, 1, 1);
  node.on_receive(Message{1, std::make_shared<const Vector>(Vector{2.0, 4.0}), 0});
  EXPECT_DOUBLE_EQ(node.model()[0], 0.0);
  EXPECT_DOUBLE_EQ(node.model()[1], -1.0);
  EXPECT_EQ(node.history(1), 1u);
}

TEST(AetNode, ReceiveFromStrangerIsProtocolError) {
  Fixture f(Topology::ring(3), ConstantSamples{3}, 2, 1);
  AetNode node(0, f.topo.neighbors(0), f.env(), Vector(6, 0.0), 1, 1);
  EXPECT_THROW(node.on_receive(Message{0, std::make_shared<const Vector>(Vector(6, 0.0)), 0}), ProtocolError);
  EXPECT_THROW(node.on_receive(Message{1, std::make_shared<const Vector>(Vector(2, 0.0)), 0}), ProtocolError);
  EXPECT_THROW(node.on_receive(Message{1, std::make_shared<const Vector>(Vector(6, 0.0)), 9}), ProtocolError);
}

// Node in round i with histories H: d_c = max(i - H_e), wait iff d_c > d.
TEST(AetNode, SyncDecisions) {
  Fixture f(Topology::ring(3), ConstantSamples{1}, 10, 4);
  const auto payload = std::make_shared<const Vector>(Vector(6, 0.0));
  AetNode node(0, f.topo.neighbors(0), f.env(), Vector(6, 0.0), 1, 4);
  EXPECT_EQ(node.check_sync(), SyncDecision::kProceed);  // i = 0
  auto close_round = [&] {
    while (!node.round_complete()) node.local_step();
    node.end_of_round();
  };
  close_round();  // i = 1, H = (0, 0): d_c = 1
  EXPECT_EQ(node.lag(), 1u);
  EXPECT_EQ(node.check_sync(), SyncDecision::kProceed);
  close_round();  // i = 2, H = (0, 0): d_c = 2 > 1
  EXPECT_EQ(node.lag(), 2u);
  EXPECT_EQ(node.check_sync(), SyncDecision::kWait);
  if (node.round_quota() > 0) EXPECT_THROW(node.local_step(), ProtocolError);
  node.on_receive(Message{1, payload, 0});  // H = (1, 0): still 2 via node 2
  EXPECT_EQ(node.check_sync(), SyncDecision::kWait);
  node.on_receive(Message{2, payload, 0});  // H = (1, 1): d_c = 1
  EXPECT_EQ(node.check_sync(), SyncDecision::kProceed);
}

TEST(AetNode, UnboundedNeverWaits) {
  Fixture f(Topology::ring(3), ConstantSamples{1}, 10, 4);
  AetNode node(0, f.topo.neighbors(0), f.env(), Vector(6, 0.0), kUnboundedDelay, 4);
  for (int r = 0; r < 8; ++r) {
    while (!node.round_complete()) node.local_step();
    node.end_of_round();
    EXPECT_EQ(node.check_sync(), SyncDecision::kProceed);
  }
}

TEST(AetNode, EndOfRoundSharesOnePayload) {
  Fixture f(Topology::ring(3), ConstantSamples{2}, 3, 8);
  AetNode node(1, f.topo.neighbors(1), f.env(), Vector(6, 0.0), 1, 8);
  EXPECT_THROW(node.end_of_round(), ProtocolError);
  while (!node.round_complete()) node.local_step();
  const auto u = node.gradient_sum();
  const auto msgs = node.end_of_round();
  ASSERT_EQ(msgs.size(), 2u);
  EXPECT_EQ(msgs[0].payload.get(), msgs[1].payload.get());
  EXPECT_EQ(*msgs[0].payload, u);
  EXPECT_EQ(msgs[0].round, 0u);
  EXPECT_EQ(node.round(), 1u);
  for (double v : node.gradient_sum()) EXPECT_EQ(v, 0.0);
}

// With one node the protocol is serial SGD with round-constant steps.
TEST(AetNode, SingleNodeEqualsSerialSgd) {
  const SampleSchedule sched = LinearSamples{10, 1, 0};
  const StepSchedule step = DiminishingStep{0.05, 0.01};
  const std::uint64_t k = 2000;
  const std::uint64_t rounds = required_rounds(sched, k);
  Fixture f(Topology::ring(1), sched, rounds, 21, step);
  AetNode node(0, {}, f.env(), Vector(6, 0.0), 1, 21);
  while (!node.finished()) {
    while (!node.round_complete()) node.local_step();
    node.end_of_round();
  }
  const auto ref = serial_sgd(*f.objective, *f.data, round_start_iteration(sched, rounds), sched, step, 21);
  EXPECT_EQ(node.model(), ref.w);
}

TEST(AetNode, ConstructorValidates) {
  Fixture f(Topology::ring(3), ConstantSamples{2}, 3, 8);
  EXPECT_THROW(AetNode(0, {1, 2}, f.env(), Vector(5, 0.0), 1, 1), ValidationError);
  auto env = f.env();
  env.local_indices = std::make_shared<const std::vector<std::size_t>>();
  EXPECT_THROW(AetNode(0, {1, 2}, env, Vector(6, 0.0), 1, 1), ValidationError);
}
