#include <gtest/gtest.h>

#include <cmath>

#include "moyapred/ann.hpp"
#include "moyapred/rng.hpp"
#include "oracles.hpp"

namespace moyapred::ann {
namespace {

using testing::make_dataset;

Model xor_net() {
  Model m;
  m.arch = {2, {2}};
  Layer hidden{Matrix(2, 2), Vector(2)};
  hidden.weights << 1, 1, 1, 1;
  hidden.bias << 0, -1;
  Layer out{Matrix(1, 2), Vector(1)};
  out.weights << 1, -2;
  out.bias << -0.5;
  m.layers = {hidden, out};
  return m;
}

Model random_model(const Architecture& arch, Rng& rng) {
  Model m = init_network(arch, rng.next());
  for (auto& l : m.layers) {
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.5, 0.5);
  }
  return m;
}

TEST(InitNetwork, DeterministicForSeed) {
  const Architecture arch{2, {3}};
  EXPECT_EQ(init_network(arch, 0), init_network(arch, 0));
  EXPECT_FALSE(init_network(arch, 0) == init_network(arch, 1));
}

TEST(InitNetwork, ShapesChainAndBiasesAreZero) {
  const Model m = init_network({33, {100}}, 5);
  ASSERT_EQ(m.layers.size(), 2u);
  EXPECT_EQ(m.layers[0].weights.rows(), 100);
  EXPECT_EQ(m.layers[0].weights.cols(), 33);
  EXPECT_EQ(m.layers[1].weights.rows(), 1);
  EXPECT_EQ(m.layers[1].weights.cols(), 100);
  EXPECT_EQ(m.layers[0].bias.size(), 100);
  EXPECT_EQ(m.layers[1].bias.size(), 1);
  for (const auto& l : m.layers) EXPECT_TRUE((l.bias.array() == 0.0).all());
  const double limit0 = std::sqrt(6.0 / 133.0);
  EXPECT_LE(m.layers[0].weights.cwiseAbs().maxCoeff(), limit0);
  const double limit1 = std::sqrt(6.0 / 101.0);
  EXPECT_LE(m.layers[1].weights.cwiseAbs().maxCoeff(), limit1);
}

TEST(InitNetwork, RejectsBadArchitecture) {
  EXPECT_THROW(init_network({0, {3}}, 0), std::invalid_argument);
  EXPECT_THROW(init_network({2, {3, 0}}, 0), std::invalid_argument);
}

TEST(Forward, ZeroNetworkGivesOneHalf) {
  Model m = init_network({4, {3}}, 1);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  const std::vector<double> x = {1.5, -2.0, 3.0, 0.25};
  EXPECT_DOUBLE_EQ(forward(m, x), 0.5);
}

TEST(Forward, ReluDefinition) {
  EXPECT_EQ(relu(-3.0), 0.0);
  EXPECT_EQ(relu(2.0), 2.0);
  EXPECT_EQ(relu(0.0), 0.0);
}

TEST(Forward, HandBuiltXorNetwork) {
  const Model m = xor_net();
  const std::vector<double> a = {0, 1};
  const std::vector<double> b = {1, 1};
  EXPECT_NEAR(forward(m, a), 0.6224593312018546, 1e-15);
  EXPECT_NEAR(forward(m, b), 0.3775406687981454, 1e-15);
  EXPECT_NEAR(forward(m, a), 1.0 / (1.0 + std::exp(-0.5)), 1e-15);
}

TEST(Forward, MatchesScalarOracleAndBatch) {
  Rng rng(11);
  const Model m = random_model({5, {7, 3}}, rng);
  std::vector<double> rows;
  for (int i = 0; i < 6 * 5; ++i) rows.push_back(rng.uniform(-2, 2));
  const auto batch = forward_batch(m, rows, 6);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::span<const double> r(rows.data() + i * 5, 5);
    EXPECT_NEAR(batch[i], testing::scalar_forward(m, r), 1e-14);
    EXPECT_GT(batch[i], 0.0);
    EXPECT_LT(batch[i], 1.0);
  }
}

TEST(Forward, RejectsNonFiniteInput) {
  const Model m = xor_net();
  const std::vector<double> x = {std::nan(""), 1.0};
  EXPECT_THROW(forward(m, x), std::invalid_argument);
}

TEST(Forward, ScoreMonotoneInOutputPreactivation) {
  Model m = xor_net();
  const std::vector<double> x = {0, 1};
  double prev = 0.0;
  for (double b = -5; b <= 5; b += 0.5) {
    m.layers[1].bias(0) = b;
    const double s = forward(m, x);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(MseLoss, Examples) {
  const std::vector<double> s = {0.3, 0.7};
  EXPECT_EQ(mse_loss(s, s), 0.0);
  EXPECT_DOUBLE_EQ(mse_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 1}), 0.25);
  EXPECT_NEAR(mse_loss(std::vector<double>{0.9}, std::vector<double>{0}), 0.81, 1e-15);
  EXPECT_THROW(mse_loss(std::vector<double>{0.1}, std::vector<double>{0, 1}), std::invalid_argument);
}

TEST(Backprop, ZeroAtStationaryPoint) {
  Model m = init_network({3, {4}}, 2);
  for (auto& l : m.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  // Every score is exactly 0.5, so labels of 0.5 give zero error.
  const std::vector<double> x = {1, 2, 3, -1, 0, 2};
  const std::vector<double> y = {0.5, 0.5};
  const auto lg = backprop_gradients(m, x, y);
  EXPECT_EQ(lg.loss, 0.0);
  for (const double g : testing::flatten(lg.grads)) EXPECT_EQ(g, 0.0);
}

TEST(Backprop, MatchesCentralFiniteDifferences) {
  Rng rng(3);
  const Model m = random_model({3, {5}}, rng);
  std::vector<double> x;
  for (int i = 0; i < 12; ++i) x.push_back(rng.uniform(-1, 1));
  const std::vector<double> y = {1, 0, 1, 0};
  const auto analytic = testing::flatten(backprop_gradients(m, x, y).grads);
  const auto numeric = testing::finite_difference_gradient(m, x, y, 1e-6);
  ASSERT_EQ(analytic.size(), numeric.size());
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    EXPECT_LT(testing::relative_error(analytic[i], numeric[i]), 1e-5) << "parameter " << i;
  }
}

TEST(Backprop, DuplicatedRowGivesSameGradient) {
  Rng rng(8);
  const Model m = random_model({3, {4}}, rng);
  const std::vector<double> one = {0.2, -0.4, 0.9};
  const std::vector<double> two = {0.2, -0.4, 0.9, 0.2, -0.4, 0.9};
  const auto g1 = testing::flatten(backprop_gradients(m, one, std::vector<double>{1}).grads);
  const auto g2 = testing::flatten(backprop_gradients(m, two, std::vector<double>{1, 1}).grads);
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_NEAR(g1[i], g2[i], 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Model m = init_network({3, {4}}, 4);
  const Model before = m;
  AdamState state = AdamState::zeros_like(m);
  Gradients zero = state.first_moment;
  adam_step(m, zero, state, 0.01);
  EXPECT_EQ(m, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  for (const double g : {0.37, -2.5, 1e-3}) {
    Model m = init_network({1, {1}}, 9);
    const double w0 = m.layers[1].weights(0, 0);
    AdamState state = AdamState::zeros_like(m);
    Gradients grads = state.first_moment;
    grads[1].weights(0, 0) = g;
    adam_step(m, grads, state, 0.01);
    const double delta = m.layers[1].weights(0, 0) - w0;
    EXPECT_NEAR(std::abs(delta), 0.01 * std::abs(g) / (std::abs(g) + 1e-8), 1e-15);
    EXPECT_EQ(std::signbit(delta), !std::signbit(g));
  }
}

TEST(Adam, TwoStepsMatchHandUnrolledRecurrence) {
  const double g = 0.5;
  const double lr = 0.01;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  // Hand unrolling of the moment recurrences for t = 1, 2.
  double theta = 0.3, m1 = 0, v1 = 0;
  m1 = b1 * m1 + (1 - b1) * g;
  v1 = b2 * v1 + (1 - b2) * g * g;
  theta -= lr * (m1 / (1 - b1)) / (std::sqrt(v1 / (1 - b2)) + eps);
  m1 = b1 * m1 + (1 - b1) * g;
  v1 = b2 * v1 + (1 - b2) * g * g;
  theta -= lr * (m1 / (1 - b1 * b1)) / (std::sqrt(v1 / (1 - b2 * b2)) + eps);
  EXPECT_NEAR(theta, 0.3 - 2 * lr * g / (g + eps), 1e-12);

  Model m = init_network({1, {1}}, 1);
  m.layers[0].bias(0) = 0.3;
  AdamState state = AdamState::zeros_like(m);
  Gradients grads = state.first_moment;
  grads[0].bias(0) = g;
  adam_step(m, grads, state, lr);
  adam_step(m, grads, state, lr);
  EXPECT_NEAR(m.layers[0].bias(0), theta, 1e-15);
  EXPECT_EQ(state.step, 2u);
  EXPECT_GE(state.second_moment[0].bias(0), 0.0);
}

Dataset xor_data() { return make_dataset(2, {0, 0, 0, 1, 1, 0, 1, 1}, {0, 1, 1, 0}); }

TEST(TrainAnn, LearnsXorForSomeSeed) {
  Hyperparams hp;
  hp.hidden_layers = {4};
  hp.learning_rate = 0.05;
  hp.batch_size = 4;
  hp.epochs = 5000;
  const Dataset d = xor_data();
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = train_ann(d, hp, seed);
    int correct = 0;
    for (std::size_t i = 0; i < 4; ++i) correct += classify(forward(r.model, d.row(i))) == d.label(i);
    solved += correct == 4;
  }
  EXPECT_GE(solved, 1);
}

TEST(TrainAnn, ZeroEpochsReturnsInitialization) {
  Hyperparams hp;
  hp.hidden_layers = {3};
  hp.batch_size = 2;
  hp.epochs = 0;
  const auto r = train_ann(xor_data(), hp, 42);
  EXPECT_EQ(r.model, init_network({2, {3}}, 42));
  EXPECT_TRUE(r.trace.epoch_loss.empty());
}

TEST(TrainAnn, DeterministicTrace) {
  Hyperparams hp;
  hp.hidden_layers = {6};
  hp.batch_size = 3;
  hp.epochs = 50;
  hp.learning_rate = 0.01;
  const auto a = train_ann(xor_data(), hp, 7);
  const auto b = train_ann(xor_data(), hp, 7);
  EXPECT_EQ(a.trace.epoch_loss, b.trace.epoch_loss);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.trace.epoch_loss.size(), 50u);
}

TEST(TrainAnn, RejectsSingleClassAndOversizedBatch) {
  const Dataset one_class = make_dataset(1, {0, 1, 2}, {1, 1, 1});
  EXPECT_THROW(train_ann(one_class, Hyperparams{}, 0), DataError);
  Hyperparams hp;
  hp.batch_size = 10;
  EXPECT_THROW(train_ann(xor_data(), hp, 0), std::invalid_argument);
}

TEST(TrainAnn, DivergenceIsReported) {
  Hyperparams hp;
  hp.hidden_layers = {4};
  hp.batch_size = 4;
  hp.epochs = 5;
  hp.learning_rate = std::numeric_limits<double>::max();
  const Dataset d = make_dataset(2, {0, 0, 0, 1e300, 1e300, 0, 1, 1}, {0, 1, 1, 0});
  EXPECT_THROW(train_ann(d, hp, 0), DivergenceError);
}

TEST(TrainNetwork, ConstantTargetsPullScoresToTarget) {
  Rng rng(5);
  std::vector<double> x;
  for (int i = 0; i < 50 * 4; ++i) x.push_back(rng.normal(0, 1));
  Hyperparams hp;
  hp.hidden_layers = {8};
  hp.batch_size = 10;
  hp.epochs = 500;
  hp.learning_rate = 0.01;
  for (const double c : {0.0, 1.0}) {
    const std::vector<double> y(50, c);
    const auto r = train_network(x, y, 4, hp, 3);
    const auto scores = forward_batch(r.model, x, 50);
    double gap = 0.0;
    for (const double s : scores) gap += std::abs(s - c);
    EXPECT_LT(gap / 50.0, 0.1) << "target " << c;
  }
}

TEST(TrainNetwork, FullBatchSmallStepLossDecreases) {
  // Smooth probe: one informative feature, mixed labels.
  Rng rng(21);
  std::vector<double> x;
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    const double v = rng.uniform(-1, 1);
    x.push_back(v);
    x.push_back(rng.uniform(-1, 1));
    y.push_back(v > 0 ? 1.0 : 0.0);
  }
  Hyperparams hp;
  hp.hidden_layers = {5};
  hp.batch_size = 40;
  hp.epochs = 10;
  hp.learning_rate = 1e-3;
  const auto r = train_network(x, y, 2, hp, 4);
  for (std::size_t e = 1; e < r.trace.epoch_loss.size(); ++e) {
    EXPECT_LE(r.trace.epoch_loss[e], r.trace.epoch_loss[e - 1]);
  }
}

TEST(Classify, StrictThreshold) {
  EXPECT_EQ(classify(0.6), 1);
  EXPECT_EQ(classify(0.5), 0);
  EXPECT_EQ(classify(0.4), 0);
  EXPECT_EQ(classify(0.3, 0.2), 1);
}

}  // namespace
}  // namespace moyapred::ann
