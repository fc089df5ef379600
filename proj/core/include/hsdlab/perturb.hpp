#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hsdlab/policy.hpp"

namespace hsd {

enum class Method { FGSM, CW, ENR, Gaussian };
enum class PNorm { L2, Linf };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
std::string to_string(PNorm p);
PNorm pnorm_from_string(const std::string& name);

/// A unit l2 direction in observation space with its provenance.
struct Direction {
  Vec vector;
  Method method = Method::Gaussian;
  std::string source_mdp;
  std::string source_policy;
  std::string source_state_hash;
  double raw_norm = 0.0;  // l2 norm of the unnormalized solver output
};

struct SolverConfig {
  double c_init = 1.0;
  int c_search_steps = 6;
  int inner_steps = 500;
  double step_size = 0.01;
  double confidence = 0.0;
  double lambda1 = 0.01;  // ENR only
  double lambda2 = 1.0;   // ENR only
  Seed seed = 0;

  void validate() const;
};

/// Outcome of one round of the outer search over c.
struct SearchRound {
  double c = 0.0;
  bool success = false;
  double best_norm = 0.0;  // smallest successful l2 norm in this round
};

struct SolverTrace {
  int clean_action = 0;
  std::vector<SearchRound> rounds;
  Vec delta;  // retained perturbation
};

/// C&W-style margin: max(score[a*] - max_{a != a*} score[a], -confidence).
double margin_loss(const ActionScorer& policy, const Observation& obs, int clean_action, double confidence = 0.0);

/// Greedy action on a clean observation; throws TieBreakError when the maximum is shared.
int unique_greedy_action(const ActionScorer& policy, const Observation& obs);

/// Normalized descent direction of the margin of the clean greedy action.
Direction fgsm_direction(const ActionScorer& policy, const Observation& obs, PNorm p_norm);

/// Minimal-l2 boundary crossing: gradient descent on c*margin + ||delta||^2 with an
/// outer bracket/bisection search over c.
Direction cw_direction(const ActionScorer& policy, const Observation& obs, const SolverConfig& cfg,
                       SolverTrace* trace = nullptr);

/// Elastic-net variant: c*margin + lambda1*||delta||_1 + lambda2*||delta||^2, the l1 term
/// handled by soft-thresholding after each gradient step.
Direction enr_direction(const ActionScorer& policy, const Observation& obs, const SolverConfig& cfg,
                        SolverTrace* trace = nullptr);

Direction gaussian_direction(int dim, Seed seed);

/// Proximal operator of width * ||.||_1.
Vec soft_threshold(const Vec& v, double width);

void save_direction(const Direction& dir, const std::filesystem::path& path);
Direction load_direction(const std::filesystem::path& path);

}  // namespace hsd
