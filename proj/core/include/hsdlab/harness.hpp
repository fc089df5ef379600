#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hsdlab/envs.hpp"
#include "hsdlab/perturb.hpp"
#include "hsdlab/policy.hpp"

namespace hsd {

enum class SettingKind { Individual, EpisodeRandom, EnvRandom, AlgRandom, AlgEnvRandom, GaussianControl };

std::string to_string(SettingKind s);
SettingKind setting_from_string(const std::string& name);

/// Named MDPs, policies and stored directions that run specs refer to by id.
class Registry {
 public:
  void add_mdp(MdpSpec spec);
  void add_policy(std::string id, std::shared_ptr<const ActionScorer> policy);
  void add_direction(std::string id, Direction dir);

  const MdpSpec& mdp(const std::string& id) const;
  const ActionScorer& policy(const std::string& id) const;
  std::shared_ptr<const ActionScorer> policy_ptr(const std::string& id) const;
  const Direction& direction(const std::string& id) const;

  bool has_mdp(const std::string& id) const { return mdps_.contains(id); }
  bool has_policy(const std::string& id) const { return policies_.contains(id); }
  bool has_direction(const std::string& id) const { return directions_.contains(id); }

 private:
  std::map<std::string, MdpSpec> mdps_;
  std::map<std::string, std::shared_ptr<const ActionScorer>> policies_;
  std::map<std::string, Direction> directions_;
};

struct MethodSpec {
  Method method = Method::ENR;
  PNorm p_norm = PNorm::L2;  // FGSM only
  SolverConfig solver;
};

/// Computes the direction of `method` at `obs` for `policy`.
Direction compute_direction(const ActionScorer& policy, const Observation& obs, const MethodSpec& method);

struct RunSpec {
  std::string id;
  SettingKind setting = SettingKind::EpisodeRandom;
  MethodSpec method;
  std::string source_mdp;
  std::string target_mdp;
  std::string source_policy;
  std::string target_policy;
  double kappa = 1.0;  // l2 size of the applied perturbation; 0 leaves inputs unchanged
  int episodes = 10;
  Seed base_seed = 0;

  /// Use this stored direction for every evaluation episode instead of resampling.
  std::optional<std::string> direction_id;
  /// Draw one source state and direction for the whole run instead of one per episode.
  bool reuse_direction = false;
  /// Clip perturbed observations to [0,1] before scoring.
  bool clip = false;

  /// Throws ConfigError when the setting's invariants are violated.
  void validate() const;
};

/// Where the direction of one evaluation episode came from.
struct EpisodeProvenance {
  Seed source_seed = 0;
  std::string source_state_hash;
  int attempts = 0;
  double raw_norm = 0.0;
  int solver_failures = 0;  // Individual setting: states left unperturbed
};

struct ImpactReport {
  double mean_score = 0.0;
  double impact = 0.0;
  double sem = 0.0;  // standard error of the mean impact
  std::vector<double> per_episode_scores;
  double score_max = 0.0;
  double score_min = 0.0;
  RunSpec run_spec;
  std::vector<EpisodeProvenance> provenance;
};

struct RunOptions {
  int jobs = 1;
};

/// Mean clean greedy score over the seeds.
double score_max(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds);
/// Mean score when every step takes the lowest-scored action.
double score_min(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds);

/// (score_max - score_set) / (score_max - score_min), unclamped.
double impact(double score_max, double score_set, double score_min);

/// Sample standard deviation of the per-episode impacts over sqrt(n); 0 for one episode.
double impact_sem(const std::vector<double>& scores, double score_max, double score_min);

/// Evaluation seeds base_seed, base_seed + 1, ...
std::vector<Seed> evaluation_seeds(Seed base_seed, int episodes);

inline constexpr int kSourceAttempts = 11;  // first draw plus 10 resamples

/// Samples a source state from one seeded episode of (mdp, policy) and solves
/// there, resampling the state when the solver fails. Throws SolverError after
/// kSourceAttempts failures.
Direction draw_source_direction(const MdpSpec& mdp, const ActionScorer& policy, const MethodSpec& method,
                                Seed base_seed, std::uint64_t draw_index, EpisodeProvenance& prov);

ImpactReport run_setting(const RunSpec& spec, const Registry& registry, const RunOptions& options = {});

/// As run_setting, additionally returning the evaluation episodes.
ImpactReport run_setting_traced(const RunSpec& spec, const Registry& registry, std::vector<EpisodeRecord>& episodes,
                                const RunOptions& options = {});

struct CalibrationOptions {
  double threshold = 0.1;
  int directions = 20;
  double grid_base = 0.25;
  int grid_points = 9;  // 0.25 * 2^k, k = 0..8
  Seed seed = 0;
};

struct CalibrationPoint {
  double kappa = 0.0;
  double gaussian_impact = 0.0;
};

struct CalibrationResult {
  double kappa = 0.0;
  std::vector<CalibrationPoint> grid;  // evaluated points, ascending
};

/// Mean impact of `directions` seeded Gaussian directions of size kappa, each
/// applied at every state of the seeded episodes.
double gaussian_impact(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds, double kappa,
                       int directions, Seed direction_seed);

/// Largest grid kappa whose Gaussian impact (and that of every smaller grid point) is below threshold.
CalibrationResult calibrate_kappa(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds,
                                  const CalibrationOptions& options = {});

}  // namespace hsd
