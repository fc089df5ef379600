#pragma once

// Cheap policies for harness and stats tests; none need training.

#include <random>

#include "hsdlab/envs.hpp"
#include "hsdlab/policy.hpp"

namespace hsd::fixture {

/// A linear Corridor agent: "right" scores the number of agent pixels (always 1
/// on a clean frame), every other action scores small random weights against
/// the frame. Clean play always moves right, so score_max = 1; the argmin
/// action never reaches the goal, so score_min = 0.
inline LinearPolicy corridor_linear_agent(Seed seed, double noise = 0.01) {
  const MdpSpec s = default_spec(DynamicsKind::Corridor, "corridor");
  const int plane = s.width * s.height;
  Mat w = Mat::Zero(s.action_count, s.obs_dim());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, noise);
  for (int a = 0; a < s.action_count; ++a)
    for (int i = 0; i < s.obs_dim(); ++i) w(a, i) = g(rng);
  for (int i = 0; i < plane; ++i) w(action::kRight, i) = 1.0;
  return LinearPolicy(w);
}

}  // namespace hsd::fixture
