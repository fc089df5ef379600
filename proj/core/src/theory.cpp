#include "hsdlab/theory.hpp"

#include <cmath>
#include <random>

#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "hsdlab/envs.hpp"
#include "hsdlab/errors.hpp"

namespace hsd {

void to_json(nlohmann::json& j, const TheoryReport& r) {
  j = nlohmann::json{{"epsilon", r.epsilon},
                     {"forced_fraction", r.forced_fraction},
                     {"random_survival", r.random_survival},
                     {"trials", r.trials},
                     {"dims_swept", r.dims_swept},
                     {"clean_reward", r.clean_reward},
                     {"forced_reward", r.forced_reward},
                     {"random_reward", r.random_reward}};
}

namespace {

bool weights_valid(const Mat& w, double alpha, double beta) {
  const auto k = w.rows();
  for (Eigen::Index a = 0; a < k; ++a) {
    const double na = w.row(a).squaredNorm();
    for (Eigen::Index b = 0; b < k; ++b) {
      const double nb = w.row(b).squaredNorm();
      // Relative slack of 1e-12 so beta = 1 survives the rounding of the rescale.
      if (std::sqrt(na) > beta * std::sqrt(nb) * (1.0 + 1e-12)) return false;
      if (a != b && !(w.row(a).dot(w.row(b)) < alpha * std::min(na, nb))) return false;
    }
  }
  return true;
}

bool state_valid(const Mat& w, const Observation& s, int best, double c, double d) {
  const Vec scores = w * s;
  for (Eigen::Index a = 0; a < scores.size(); ++a) {
    if (a == best) continue;
    const double gap = scores[best] - scores[a];
    if (!(gap > c && gap < d)) return false;
  }
  return true;
}

}  // namespace

LinearInstance build_instance(const InstanceParams& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
  if (!(p.beta >= 1.0)) throw DomainError("beta must be >= 1");
  if (!(p.c_gap > 0.0 && p.c_gap < p.d_gap)) throw DomainError("need 0 < c_gap < d_gap");
  if (p.n < 64) throw DomainError("n must be >= 64");
  if (p.num_actions < 2 || p.num_actions > p.n) throw DomainError("num_actions must lie in [2, n]");
  if (p.s1_size < 1) throw DomainError("s1_size must be positive");

  std::mt19937_64 rng(mix_seed(p.seed, 0x7e0));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int k = p.num_actions;

  for (int restart = 0; restart < kMaxConstructorRestarts; ++restart) {
    Mat w(k, p.n);
    for (int a = 0; a < k; ++a)
      for (int i = 0; i < p.n; ++i) w(a, i) = normal(rng);
    if (p.orthogonalize) {
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < a; ++b) w.row(a) -= w.row(a).dot(w.row(b)) * w.row(b);
        w.row(a).normalize();
      }
    }
    // Row norms spread over [1, beta].
    for (int a = 0; a < k; ++a) w.row(a) *= (1.0 + (p.beta - 1.0) * unit(rng)) / w.row(a).norm();
    if (!weights_valid(w, p.alpha, p.beta)) continue;

    LinearInstance inst;
    inst.n = p.n;
    inst.alpha = p.alpha;
    inst.beta = p.beta;
    inst.c_gap = p.c_gap;
    inst.d_gap = p.d_gap;
    inst.seed = p.seed;
    inst.restarts_used = restart;
    std::uniform_int_distribution<int> pick_action(0, k - 1);
    inst.target_action_b = pick_action(rng);

    // Projector onto the orthogonal complement of the weight rows.
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w.transpose());
    const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(p.n, k);

    bool ok = true;
    for (int i = 0; i < p.s1_size && ok; ++i) {
      int best;
      do {
        best = pick_action(rng);
      } while (best == inst.target_action_b);
      const Vec wb = w.row(best).transpose();
      bool placed = false;
      for (int attempt = 0; attempt < kMaxStateAttempts; ++attempt) {
        const double m = p.c_gap + (p.d_gap - p.c_gap) * unit(rng);
        Vec noise(p.n);
        for (int t = 0; t < p.n; ++t) noise[t] = normal(rng) / std::sqrt(static_cast<double>(p.n));
        noise -= basis * (basis.transpose() * noise);
        Observation s = m * wb / wb.squaredNorm() + noise;
        if (state_valid(w, s, best, p.c_gap, p.d_gap)) {
          inst.s1_states.push_back(std::move(s));
          inst.optimal_actions.push_back(best);
          placed = true;
          break;
        }
      }
      ok = placed;
    }
    if (!ok) continue;
    inst.weights = LinearPolicy(std::move(w));
    if (!instance_valid(inst)) continue;
    return inst;
  }
  throw InfeasibleError("could not build a linear instance within " + std::to_string(kMaxConstructorRestarts) +
                        " restarts (alpha=" + std::to_string(p.alpha) + ", actions=" + std::to_string(k) + ")");
}

bool instance_valid(const LinearInstance& inst) {
  const Mat& w = inst.weights.rows();
  if (!weights_valid(w, inst.alpha, inst.beta)) return false;
  if (inst.s1_states.size() != inst.optimal_actions.size()) return false;
  for (std::size_t i = 0; i < inst.s1_states.size(); ++i)
    if (!state_valid(w, inst.s1_states[i], inst.optimal_actions[i], inst.c_gap, inst.d_gap)) return false;
  return true;
}

double forcing_epsilon(const LinearInstance& inst) {
  return 2.0 * inst.d_gap / ((1.0 - inst.alpha) * inst.weights.row(inst.target_action_b).squaredNorm());
}

double verify_forced_action(const LinearInstance& inst) { return verify_forced_action(inst, forcing_epsilon(inst)); }

double verify_forced_action(const LinearInstance& inst, double epsilon) {
  if (inst.s1_states.empty()) return 0.0;
  const Vec wb = inst.weights.row(inst.target_action_b);
  std::size_t forced = 0;
  for (const auto& s : inst.s1_states)
    if (argmax(inst.weights.score(s + epsilon * wb)) == inst.target_action_b) ++forced;
  return static_cast<double>(forced) / static_cast<double>(inst.s1_states.size());
}

double random_survival(const LinearInstance& inst, int trials, Seed seed) {
  if (trials < 1) throw DomainError("trials must be >= 1");
  if (inst.s1_states.empty()) return 0.0;
  const double eps = forcing_epsilon(inst);
  const double wb_norm = inst.weights.row(inst.target_action_b).norm();
  std::mt19937_64 rng(mix_seed(seed, 0x5eed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t kept = 0;
  Vec g(inst.n);
  for (int t = 0; t < trials; ++t) {
    for (int i = 0; i < inst.n; ++i) g[i] = normal(rng);
    const Vec r = (wb_norm / g.norm()) * g;
    for (std::size_t i = 0; i < inst.s1_states.size(); ++i)
      if (argmax(inst.weights.score(inst.s1_states[i] + eps * r)) == inst.optimal_actions[i]) ++kept;
  }
  return static_cast<double>(kept) / static_cast<double>(inst.s1_states.size() * static_cast<std::size_t>(trials));
}

double proof_t(const LinearInstance& inst) {
  return inst.c_gap * (1.0 - inst.alpha) * std::sqrt(static_cast<double>(inst.n)) /
         (8.0 * inst.d_gap * inst.beta * inst.beta * inst.beta);
}

double near_orthogonality_failure_rate(const LinearInstance& inst, int draws, Seed seed) {
  if (draws < 1) throw DomainError("draws must be >= 1");
  const Mat& w = inst.weights.rows();
  const double wb_norm = w.row(inst.target_action_b).norm();
  const double scale = proof_t(inst) * inst.beta / std::sqrt(static_cast<double>(inst.n));
  std::mt19937_64 rng(mix_seed(seed, 0x0a7));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec g(inst.n);
  long failures = 0;
  for (int t = 0; t < draws; ++t) {
    for (int i = 0; i < inst.n; ++i) g[i] = normal(rng);
    const Vec r = (wb_norm / g.norm()) * g;
    for (Eigen::Index a = 0; a < w.rows(); ++a)
      if (std::abs(w.row(a).dot(r)) >= scale * w.row(a).squaredNorm()) ++failures;
  }
  return static_cast<double>(failures) / (static_cast<double>(draws) * static_cast<double>(w.rows()));
}

TheoryReport proposition_rewards(const LinearInstance& inst, int trials, Seed seed) {
  TheoryReport r;
  r.epsilon = forcing_epsilon(inst);
  r.trials = trials;
  r.dims_swept = {inst.n};
  const Vec wb = inst.weights.row(inst.target_action_b);
  const auto reward = [&](const Observation& s, std::size_t i) {
    return argmax(inst.weights.score(s)) == inst.optimal_actions[i] ? 1.0 : 0.0;
  };
  double clean = 0.0;
  double forced = 0.0;
  for (std::size_t i = 0; i < inst.s1_states.size(); ++i) {
    clean += reward(inst.s1_states[i], i);
    forced += reward(inst.s1_states[i] + r.epsilon * wb, i);
  }
  const double n = static_cast<double>(inst.s1_states.size());
  r.clean_reward = clean / n;
  r.forced_reward = forced / n;
  r.forced_fraction = verify_forced_action(inst);
  // Reward 1 exactly when a*(s) survives, so the expectation is the survival rate.
  r.random_survival = random_survival(inst, trials, seed);
  r.random_reward = r.random_survival;
  return r;
}

std::vector<SweepRow> dimension_sweep(const InstanceParams& base, const std::vector<int>& dims, int trials, Seed seed) {
  std::vector<SweepRow> rows;
  for (int n : dims) {
    InstanceParams p = base;
    p.n = n;
    const LinearInstance inst = build_instance(p);
    rows.push_back({n, verify_forced_action(inst), random_survival(inst, trials, seed)});
  }
  return rows;
}

}  // namespace hsd
