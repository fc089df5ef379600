#include <gtest/gtest.h>

#include "hsdlab/errors.hpp"
#include "hsdlab/policy.hpp"
#include "oracles.hpp"

using namespace hsd;

namespace {

constexpr int kDim = 288;

QNetwork small_net(HeadKind head, Seed seed) { return QNetwork(kDim, {32, 16}, 6, head, seed); }

double max_grad_error(const ActionScorer& pol, const Observation& obs, const ScalarLoss& loss) {
  const Vec analytic = grad_input(pol, obs, loss);
  const Vec numeric = oracle::finite_difference([&](const Vec& x) { return evaluate_loss(pol, x, loss); }, obs);
  return oracle::max_relative_error(analytic, numeric);
}

}  // namespace

TEST(Policy, LinearScoresAreInnerProducts) {
  Mat rows = Mat::Zero(2, 3);
  rows(0, 0) = 1.0;
  rows(1, 1) = 1.0;
  const LinearPolicy pol(rows);
  const Vec s = pol.score(Vec::Unit(3, 0));
  EXPECT_EQ(s[0], 1.0);
  EXPECT_EQ(s[1], 0.0);
}

TEST(Policy, LinearGradientOfActionScoreIsTheRow) {
  std::mt19937_64 rng(1);
  const LinearPolicy pol(oracle::random_mat(4, 10, rng));
  const Vec obs = oracle::random_vec(10, rng);
  for (int a = 0; a < 4; ++a) EXPECT_EQ(grad_input(pol, obs, ActionScoreLoss{a}), pol.row(a));
}

TEST(Policy, GapGradientIsDifferenceOfGradients) {
  const QNetwork net = small_net(HeadKind::Dueling, 3);
  std::mt19937_64 rng(2);
  const Vec obs = oracle::random_vec(kDim, rng);
  const Vec lhs = grad_input(net, obs, ScoreGapLoss{1, 4});
  const Vec rhs = grad_input(net, obs, ActionScoreLoss{1}) - grad_input(net, obs, ActionScoreLoss{4});
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Policy, DuelingWithZeroAdvantageScoresV) {
  std::mt19937_64 rng(4);
  DenseLayer hidden{oracle::random_mat(8, kDim, rng), Vec::Zero(8)};
  DenseLayer head{Mat::Zero(7, 8), Vec::Zero(7)};
  head.weight.row(0) = oracle::random_mat(1, 8, rng);
  head.bias[0] = 0.3;
  const QNetwork net({hidden, head}, 6, HeadKind::Dueling, "test");
  const Vec obs = oracle::random_vec(kDim, rng);
  const Vec h = (hidden.weight * obs).cwiseMax(0.0);
  const double v = head.weight.row(0).dot(h) + 0.3;
  const Vec q = net.score(obs);
  for (int a = 0; a < 6; ++a) EXPECT_NEAR(q[a], v, 1e-12);
}

TEST(Policy, DuelingInvariantToAdvantageShift) {
  QNetwork net = small_net(HeadKind::Dueling, 5);
  std::mt19937_64 rng(6);
  const Vec obs = oracle::random_vec(kDim, rng);
  const Vec before = net.score(obs);
  net.mutable_layers().back().bias.tail(6).array() += 3.7;
  EXPECT_LT((net.score(obs) - before).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Policy, BatchScoresMatchSingleScores) {
  const QNetwork net = small_net(HeadKind::Dueling, 8);
  std::mt19937_64 rng(9);
  Mat batch(5, kDim);
  for (int i = 0; i < 5; ++i) batch.row(i) = oracle::random_vec(kDim, rng).transpose();
  const Mat q = net.score_batch(batch);
  for (int i = 0; i < 5; ++i) EXPECT_LT((q.row(i).transpose() - net.score(batch.row(i).transpose())).norm(), 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, MatchesCentralFiniteDifferences) {
  const int which = GetParam();
  std::mt19937_64 rng(100 + which);
  std::unique_ptr<ActionScorer> pol;
  if (which == 0) pol = std::make_unique<QNetwork>(kDim, std::vector<int>{128, 128}, 6, HeadKind::Plain, 11);
  if (which == 1) pol = std::make_unique<QNetwork>(kDim, std::vector<int>{128, 128}, 6, HeadKind::Dueling, 12);
  if (which == 2) pol = std::make_unique<LinearPolicy>(oracle::random_mat(6, kDim, rng));
  for (int trial = 0; trial < 20; ++trial) {
    const Vec obs = oracle::random_vec(kDim, rng);
    const int a = argmax(pol->score(obs));
    EXPECT_LT(max_grad_error(*pol, obs, ActionScoreLoss{trial % 6}), 1e-4);
    EXPECT_LT(max_grad_error(*pol, obs, MarginLoss{a, 0.0}), 1e-4);
  }
}

std::string architecture_name(const ::testing::TestParamInfo<int>& info) {
  static const char* const names[] = {"Plain", "Dueling", "Linear"};
  return names[info.param];
}

INSTANTIATE_TEST_SUITE_P(Architectures, GradientCheck, ::testing::Values(0, 1, 2), architecture_name);

TEST(Policy, MarginLossClampsAndZeroesGradient) {
  Mat rows(2, 2);
  rows << 1, 0, 0, 1;
  const LinearPolicy pol(rows);
  const Vec s(Vec::Unit(2, 1) * 3 + Vec::Unit(2, 0));  // scores (1, 3)
  EXPECT_EQ(evaluate_loss(pol, s, MarginLoss{0, 0.0}), 0.0);
  EXPECT_EQ(grad_input(pol, s, MarginLoss{0, 0.0}), Vec::Zero(2));
  EXPECT_EQ(evaluate_loss(pol, s, MarginLoss{0, 5.0}), -2.0);
}

TEST(Policy, ShapeErrors) {
  std::mt19937_64 rng(1);
  DenseLayer a{oracle::random_mat(4, 10, rng), Vec::Zero(4)};
  DenseLayer b{oracle::random_mat(6, 5, rng), Vec::Zero(6)};
  EXPECT_THROW(QNetwork({a, b}, 6, HeadKind::Plain, "x"), ShapeError);
  DenseLayer c{oracle::random_mat(6, 4, rng), Vec::Zero(6)};
  EXPECT_NO_THROW(QNetwork({a, c}, 6, HeadKind::Plain, "x"));
  EXPECT_THROW(QNetwork({a, c}, 6, HeadKind::Dueling, "x"), ShapeError);
  EXPECT_THROW(LinearPolicy(Mat(0, 3)), ShapeError);
}

TEST(Policy, WrongObservationLengthIsDomainError) {
  const QNetwork net = small_net(HeadKind::Plain, 1);
  EXPECT_THROW(net.score(Vec::Zero(10)), DomainError);
}

TEST(Policy, NonFiniteParametersAreNumericError) {
  QNetwork net = small_net(HeadKind::Plain, 1);
  net.mutable_layers().back().bias[0] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(net.parameters_finite());
  EXPECT_THROW(net.score(Vec::Zero(kDim)), NumericError);
}

TEST(Policy, DefaultArchitectureIsTwoByOneTwentyEight) {
  const QNetwork net(kDim, {128, 128}, 6, HeadKind::Plain, 0);
  const auto shapes = net.layer_shapes();
  ASSERT_EQ(shapes.size(), 3u);
  EXPECT_EQ(shapes[0], std::make_pair(kDim, 128));
  EXPECT_EQ(shapes[2], std::make_pair(128, 6));
  EXPECT_EQ(QNetwork(kDim, {128, 128}, 6, HeadKind::Dueling, 0).layer_shapes()[2], std::make_pair(128, 7));
}

TEST(Policy, ParameterGradientsMatchFiniteDifferences) {
  for (auto head : {HeadKind::Plain, HeadKind::Dueling}) {
    QNetwork net(12, {8, 5}, 4, head, 21);
    std::mt19937_64 rng(22);
    Mat batch(3, 12);
    for (int i = 0; i < 3; ++i) batch.row(i) = oracle::random_vec(12, rng).transpose();
    const Mat weights = oracle::random_mat(3, 4, rng);
    // Scalar objective sum(weights .* Q(batch)).
    const auto objective = [&](const QNetwork& n) { return n.score_batch(batch).cwiseProduct(weights).sum(); };
    ForwardCache cache;
    net.score_batch(batch, cache);
    NetworkGradients grads;
    net.backward(cache, weights, &grads, nullptr);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      for (Eigen::Index r = 0; r < net.layers()[l].weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < net.layers()[l].weight.cols(); ++c) {
          QNetwork up = net, down = net;
          up.mutable_layers()[l].weight(r, c) += 1e-5;
          down.mutable_layers()[l].weight(r, c) -= 1e-5;
          EXPECT_NEAR(grads.weight[l](r, c), (objective(up) - objective(down)) / 2e-5, 1e-6);
        }
        QNetwork up = net, down = net;
        up.mutable_layers()[l].bias[r] += 1e-5;
        down.mutable_layers()[l].bias[r] -= 1e-5;
        EXPECT_NEAR(grads.bias[l][r], (objective(up) - objective(down)) / 2e-5, 1e-6);
      }
    }
  }
}
