#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hsdlab/policy.hpp"

namespace hsd {

/// A linear argmax policy together with a state set on which every
/// non-optimal action trails the optimal one by a margin in (c_gap, d_gap).
struct LinearInstance {
  int n = 0;
  LinearPolicy weights{Mat::Identity(1, 1)};
  double alpha = 0.5;
  double beta = 2.0;
  double c_gap = 1.0;
  double d_gap = 2.0;
  std::vector<Observation> s1_states;
  std::vector<int> optimal_actions;
  int target_action_b = 0;
  Seed seed = 0;
  int restarts_used = 0;
};

struct TheoryReport {
  double epsilon = 0.0;
  double forced_fraction = 0.0;
  double random_survival = 0.0;
  int trials = 0;
  std::vector<int> dims_swept;
  // Expected one-step rewards on S1.
  double clean_reward = 0.0;
  double forced_reward = 0.0;
  double random_reward = 0.0;
};

void to_json(nlohmann::json& j, const TheoryReport& r);

struct InstanceParams {
  int n = 1024;
  int num_actions = 8;
  double alpha = 0.5;
  double beta = 2.0;
  double c_gap = 1.0;
  double d_gap = 2.0;
  int s1_size = 200;
  Seed seed = 0;
  bool orthogonalize = false;  // Gram-Schmidt the weight draws
};

inline constexpr int kMaxConstructorRestarts = 20;
inline constexpr int kMaxStateAttempts = 1000;

/// Throws InfeasibleError when a rejection budget is exhausted.
LinearInstance build_instance(const InstanceParams& params);

/// Every invariant of the instance checked by direct evaluation.
bool instance_valid(const LinearInstance& inst);

/// 2 d / ((1 - alpha) ||w_b||^2).
double forcing_epsilon(const LinearInstance& inst);

/// Fraction of S1 states whose greedy action under s + epsilon * w_b is b.
double verify_forced_action(const LinearInstance& inst);
double verify_forced_action(const LinearInstance& inst, double epsilon);

/// Fraction of (state, trial) pairs keeping a*(s) under s + epsilon * r,
/// r = (||w_b|| / ||g||) g with g standard normal.
double random_survival(const LinearInstance& inst, int trials, Seed seed);

/// One-step bandit rewards on S1 (1 for a*(s), 0 otherwise) under no
/// perturbation, the w_b perturbation and random perturbations.
TheoryReport proposition_rewards(const LinearInstance& inst, int trials = 20, Seed seed = 0);

/// t = c (1 - alpha) sqrt(n) / (8 d beta^3), the concentration parameter of the forcing proof.
double proof_t(const LinearInstance& inst);

/// Fraction of (draw, action) pairs with |<r, w_a>| >= t beta ||w_a||^2 / sqrt(n),
/// r = (||w_b|| / ||g||) g.
double near_orthogonality_failure_rate(const LinearInstance& inst, int draws, Seed seed);

struct SweepRow {
  int n = 0;
  double forced_fraction = 0.0;
  double survival = 0.0;
};

std::vector<SweepRow> dimension_sweep(const InstanceParams& base, const std::vector<int>& dims, int trials, Seed seed);

}  // namespace hsd
