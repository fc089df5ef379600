#include <gtest/gtest.h>

#include <filesystem>

#include "hsdlab/errors.hpp"
#include "hsdlab/perturb.hpp"
#include "oracles.hpp"

using namespace hsd;

namespace {

double active_fraction(const Vec& v) {
  const double cutoff = 1e-6 * v.cwiseAbs().maxCoeff();
  return static_cast<double>((v.array().abs() > cutoff).count()) / static_cast<double>(v.size());
}

}  // namespace

TEST(Perturb, MarginLossExamples) {
  const LinearPolicy pol(Mat::Identity(2, 2));
  EXPECT_EQ(margin_loss(pol, Vec((Vec(2) << 3, 1).finished()), 0), 2.0);
  EXPECT_EQ(margin_loss(pol, Vec((Vec(2) << 1, 3).finished()), 0), 0.0);
  EXPECT_EQ(margin_loss(pol, Vec((Vec(2) << 1, 3).finished()), 0, 5.0), -2.0);
}

TEST(Perturb, MarginVanishesAtAnalyticBoundaryPoint) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat w = oracle::random_mat(2, 30, rng);
    const Vec s = oracle::random_vec(30, rng);
    const LinearPolicy pol(w);
    const int a = argmax(pol.score(s));
    const Vec diff = (w.row(a) - w.row(1 - a)).transpose();
    const Vec boundary = s - (diff.dot(s) / diff.squaredNorm()) * diff;
    EXPECT_NEAR(margin_loss(pol, boundary, a), 0.0, 1e-9);
  }
}

TEST(Perturb, FgsmOnLinearPolicyIsNegativeMarginGradient) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat w = oracle::random_mat(2, 40, rng);
    const Vec s = oracle::random_vec(40, rng);
    const LinearPolicy pol(w);
    const int a = argmax(pol.score(s));
    const Vec expected = (w.row(1 - a) - w.row(a)).transpose();
    const Direction d = fgsm_direction(pol, s, PNorm::L2);
    EXPECT_NEAR(oracle::cosine(d.vector, expected), 1.0, 1e-9);
    EXPECT_NEAR(d.vector.norm(), 1.0, 1e-9);
    EXPECT_GT(d.raw_norm, 0.0);
    const Direction sign = fgsm_direction(pol, s, PNorm::Linf);
    EXPECT_NEAR(sign.vector.norm(), 1.0, 1e-9);
    EXPECT_EQ(sign.vector.cwiseSign(), expected.cwiseSign());
  }
}

TEST(Perturb, NegatedWeightsFlipTheMarginGradient) {
  // a* is held at its clean value, as inside the solvers; the confidence keeps
  // the negated margin off its clamp.
  std::mt19937_64 rng(5);
  QNetwork net(288, {32}, 6, HeadKind::Plain, 6);
  const Vec s = oracle::random_vec(288, rng);
  const int a = argmax(net.score(s));
  const Vec g = grad_input(net, s, MarginLoss{a, 1e9});
  net.mutable_layers().back().weight *= -1.0;
  net.mutable_layers().back().bias *= -1.0;
  const Vec g_neg = grad_input(net, s, MarginLoss{a, 1e9});
  // Negation turns max_{b != a} into min_{b != a}; compare against a two-action
  // linear policy, where both coincide.
  const Mat w = oracle::random_mat(2, 20, rng);
  const Vec x = oracle::random_vec(20, rng);
  const int ax = argmax(LinearPolicy(w).score(x));
  const Vec d1 = grad_input(LinearPolicy(w), x, MarginLoss{ax, 1e9});
  const Vec d2 = grad_input(LinearPolicy(-w), x, MarginLoss{ax, 1e9});
  EXPECT_NEAR((d1 + d2).norm(), 0.0, 1e-12);
  EXPECT_GT(g.norm(), 0.0);
  EXPECT_GT(g_neg.norm(), 0.0);
}

TEST(Perturb, FgsmZeroGradientIsDegenerate) {
  // Every hidden unit is dead, so scores are the output bias and the input gradient vanishes.
  DenseLayer hidden{Mat::Ones(4, 10), Vec::Constant(4, -100.0)};
  DenseLayer head{Mat::Ones(3, 4), (Vec(3) << 1.0, 0.5, 0.0).finished()};
  const QNetwork dead({hidden, head}, 3, HeadKind::Plain, "dead");
  EXPECT_THROW(fgsm_direction(dead, Vec::Constant(10, 0.5), PNorm::L2), DegenerateDirectionError);
  EXPECT_THROW(fgsm_direction(dead, Vec::Constant(10, 0.5), PNorm::Linf), DegenerateDirectionError);
  const LinearPolicy flat(Mat::Zero(2, 5));
  EXPECT_THROW(fgsm_direction(flat, Vec::Ones(5), PNorm::L2), TieBreakError);
}

TEST(Perturb, CwMatchesAnalyticDistanceOnTwoActions) {
  std::mt19937_64 rng(7);
  SolverConfig cfg;
  for (int trial = 0; trial < 20; ++trial) {
    const Mat w = oracle::random_mat(2, 30, rng) / std::sqrt(30.0);
    const Vec s = oracle::random_vec(30, rng);
    const LinearPolicy pol(w);
    const int a = argmax(pol.score(s));
    const double analytic = oracle::linear_boundary_distance(w, s, a);
    SolverTrace trace;
    const Direction d = cw_direction(pol, s, cfg, &trace);
    EXPECT_GE(d.raw_norm, analytic * (1 - 1e-9));
    EXPECT_LE(d.raw_norm, analytic * 1.05) << "trial " << trial;
    EXPECT_NE(argmax(pol.score(s + trace.delta)), a);
    EXPECT_NEAR(d.vector.norm(), 1.0, 1e-9);
  }
}

TEST(Perturb, CwKeepsSmallestSuccessfulRound) {
  std::mt19937_64 rng(8);
  const QNetwork net(288, {32}, 6, HeadKind::Plain, 9);
  const Vec s = oracle::random_vec(288, rng);
  SolverTrace trace;
  const Direction d = cw_direction(net, s, SolverConfig{}, &trace);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.rounds)
    if (r.success) best = std::min(best, r.best_norm);
  EXPECT_EQ(d.raw_norm, best);
  EXPECT_EQ(trace.rounds.size(), 6u);
}

TEST(Perturb, CwDirectionIsScaleInvariant) {
  std::mt19937_64 rng(10);
  const Mat w = oracle::random_mat(3, 30, rng) / std::sqrt(30.0);
  const Vec s = oracle::random_vec(30, rng);
  const Vec d1 = cw_direction(LinearPolicy(w), s, SolverConfig{}).vector;
  const Vec d2 = cw_direction(LinearPolicy(2.0 * w), s, SolverConfig{}).vector;
  EXPECT_GE(d1.dot(d2), 0.999);
}

TEST(Perturb, TieAtCleanArgmaxIsTieBreakError) {
  const LinearPolicy pol(Mat::Ones(3, 4));
  EXPECT_THROW(cw_direction(pol, Vec::Ones(4), SolverConfig{}), TieBreakError);
  EXPECT_THROW(enr_direction(pol, Vec::Ones(4), SolverConfig{}), TieBreakError);
}

TEST(Perturb, UnreachableBoundaryIsReported) {
  std::mt19937_64 rng(11);
  const Mat w = oracle::random_mat(2, 10, rng);
  const LinearPolicy pol(w);
  SolverConfig cfg;
  cfg.c_init = 1e-8;
  cfg.inner_steps = 1;
  cfg.c_search_steps = 1;
  EXPECT_THROW(cw_direction(pol, 10.0 * (w.row(0) - w.row(1)).transpose(), cfg), BoundaryUnreachedError);
}

TEST(Perturb, EnrWithoutL1MatchesCw) {
  std::mt19937_64 rng(12);
  const QNetwork net(288, {32}, 6, HeadKind::Dueling, 13);
  SolverConfig cfg;
  cfg.lambda1 = 0.0;
  cfg.lambda2 = 1.0;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec s = oracle::random_vec(288, rng);
    EXPECT_GE(enr_direction(net, s, cfg).vector.dot(cw_direction(net, s, cfg).vector), 0.999);
  }
}

TEST(Perturb, EnrIsSparserThanCw) {
  std::mt19937_64 rng(14);
  const QNetwork net(288, {64, 64}, 6, HeadKind::Plain, 15);
  SolverConfig cfg;
  int sparser = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const Vec s = oracle::random_vec(288, rng);
    SolverTrace te, tc;
    enr_direction(net, s, cfg, &te);
    cw_direction(net, s, cfg, &tc);
    if (active_fraction(te.delta) <= active_fraction(tc.delta)) ++sparser;
  }
  EXPECT_GE(sparser, static_cast<int>(0.7 * trials));
}

TEST(Perturb, SoftThresholdZeroesSmallCoordinates) {
  const Vec v = (Vec(4) << 0.5, -0.0004, 0.0002, -2.0).finished();
  const Vec out = soft_threshold(v, 0.001);
  EXPECT_EQ(out[1], 0.0);
  EXPECT_EQ(out[2], 0.0);
  EXPECT_DOUBLE_EQ(out[0], 0.499);
  EXPECT_DOUBLE_EQ(out[3], -1.999);
}

TEST(Perturb, GaussianDirections) {
  const Direction a = gaussian_direction(288, 1);
  EXPECT_NEAR(a.vector.norm(), 1.0, 1e-12);
  EXPECT_EQ(a.vector, gaussian_direction(288, 1).vector);
  EXPECT_NE(a.vector, gaussian_direction(288, 2).vector);
  int near_orthogonal = 0;
  for (Seed i = 0; i < 1000; ++i)
    near_orthogonal += std::abs(gaussian_direction(4096, 2 * i).vector.dot(gaussian_direction(4096, 2 * i + 1).vector)) < 0.1;
  EXPECT_GE(near_orthogonal, 990);
}

TEST(Perturb, SolverConfigValidation) {
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.c_init = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  SolverConfig d;
  d.lambda1 = -1.0;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Perturb, DirectionFileRoundTrip) {
  Direction d = gaussian_direction(288, 5);
  d.method = Method::ENR;
  d.source_mdp = "collector";
  d.source_policy = "p1";
  d.source_state_hash = "abcd";
  d.raw_norm = 0.42;
  const auto path = std::filesystem::temp_directory_path() / "hsdlab_direction_test.json";
  save_direction(d, path);
  const Direction back = load_direction(path);
  EXPECT_EQ(back.vector, d.vector);
  EXPECT_EQ(back.method, Method::ENR);
  EXPECT_EQ(back.source_mdp, "collector");
  EXPECT_EQ(back.source_policy, "p1");
  EXPECT_EQ(back.source_state_hash, "abcd");
  EXPECT_EQ(back.raw_norm, 0.42);
  EXPECT_THROW(load_direction(path.string() + ".missing"), ResolutionError);
}
