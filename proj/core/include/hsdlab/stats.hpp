#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hsdlab/harness.hpp"

namespace hsd {

/// Joint distribution P_shift(a, b): fraction of perturbed states where the
/// clean greedy action was a and the action actually taken was b.
struct ActionShiftMatrix {
  Mat joint;
  long states_counted = 0;

  int action_count() const { return static_cast<int>(joint.rows()); }
  /// Row sums: P_control(a).
  Vec p_control() const;
  /// Column sums: P_shift(b).
  Vec p_shift() const;
};

/// Builds the joint from (clean action, taken action) pairs.
ActionShiftMatrix tally_action_shift(const std::vector<std::pair<int, int>>& pairs, int action_count);

struct ActionStats {
  ActionShiftMatrix shift;
  Vec p_base;          // action frequencies of a paired clean run
  Vec p_shift_direct;  // taken-action frequencies tallied directly from the perturbed run
  ImpactReport report;
};

/// (clean greedy action, taken action) at every step of the episodes.
std::vector<std::pair<int, int>> action_pairs(const std::vector<EpisodeRecord>& episodes, const ActionScorer& policy);

ActionStats collect_action_stats(const RunSpec& spec, const Registry& registry, const RunOptions& options = {});

/// rho / tau: share of the off-diagonal mass whose destination lies in `targets`.
double percentage_shift(const ActionShiftMatrix& matrix, const std::set<int>& targets);

/// "Action 1" / "Actions 4 and 12" style label of an action set.
std::string action_set_label(const std::set<int>& targets);

struct CrossMdpEntry {
  std::string mdp_id;
  std::string policy_id;
  double kappa = 1.0;  // perturbation size used when this MDP is the target (row)
};

/// Cell (i, j): impact when a direction computed in MDP j is applied in MDP i.
struct CrossMdpMatrix {
  std::vector<std::string> mdp_ids;
  Mat impacts;
  Mat sems;
};

/// The run spec behind one cell; diagonal cells are EpisodeRandom, the rest EnvRandom.
RunSpec cross_mdp_cell_spec(const std::vector<CrossMdpEntry>& suite, std::size_t row, std::size_t col,
                            const MethodSpec& method, int episodes, Seed seed);

CrossMdpMatrix cross_mdp_matrix(const Registry& registry, const std::vector<CrossMdpEntry>& suite,
                                const MethodSpec& method, int episodes, Seed seed, const RunOptions& options = {});

double cosine_similarity(const Vec& a, const Vec& b);

/// Mean observation over every step of seeded clean greedy episodes.
Vec mean_observation(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds);

/// Cosine similarity between the mean clean observations of two MDPs.
double similarity_proxy(const MdpSpec& mdp_a, const MdpSpec& mdp_b, const ActionScorer& policy_a,
                        const ActionScorer& policy_b, const std::vector<Seed>& seeds);

// CSV emitters.
void write_action_stats_csv(const ActionStats& stats, const std::filesystem::path& path);
void write_matrix_csv(const Mat& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::filesystem::path& path);

}  // namespace hsd
