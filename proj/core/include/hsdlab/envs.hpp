#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hsdlab/types.hpp"

namespace hsd {

class ActionScorer;

enum class DynamicsKind { Corridor, Collector, Dodger };

std::string to_string(DynamicsKind kind);
DynamicsKind dynamics_kind_from_string(const std::string& name);

// Shared action indexing for every game in a suite. Actions a game does not
// use behave as no-ops.
namespace action {
inline constexpr int kNoop = 0;
inline constexpr int kUp = 1;
inline constexpr int kDown = 2;
inline constexpr int kLeft = 3;
inline constexpr int kRight = 4;
inline constexpr int kFire = 5;
}  // namespace action

inline constexpr int kDefaultWidth = 12;
inline constexpr int kDefaultHeight = 12;
inline constexpr int kDefaultChannels = 2;
inline constexpr int kDefaultActionCount = 6;

// Channel layout shared by all games.
inline constexpr int kAgentChannel = 0;
inline constexpr int kObjectChannel = 1;

/// Immutable construction data for one suite MDP.
///
/// Reward tables:
///   Corridor  : +1 on entering the rightmost column (terminal), 0 otherwise.
///   Collector : +1 per falling coin caught on the bottom row, 0 otherwise;
///               terminal once every coin has landed.
///   Dodger    : +0.1 per survived step, -1 on collision (terminal).
struct MdpSpec {
  std::string id;
  DynamicsKind kind = DynamicsKind::Corridor;
  int width = kDefaultWidth;
  int height = kDefaultHeight;
  int channels = kDefaultChannels;
  int action_count = kDefaultActionCount;
  double gamma = 0.95;
  int max_steps = 30;
  Seed seed = 0;

  int corridor_height = 3;   // Corridor band rows
  int coin_count = 4;        // Collector
  double spawn_prob = 0.35;  // Dodger, per step

  int obs_dim() const { return width * height * channels; }
  /// Throws ConfigError when the spec is not constructible.
  void validate() const;
};

/// Reasonable per-kind defaults with the shared geometry.
MdpSpec default_spec(DynamicsKind kind, std::string id, Seed seed = 0);

struct StepOutcome {
  Observation next_obs;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;  // episode ended only because max_steps was reached
};

/// A single-threaded episode instance over an MdpSpec.
class GridMdp {
 public:
  explicit GridMdp(MdpSpec spec);

  const MdpSpec& spec() const { return spec_; }
  int obs_dim() const { return spec_.obs_dim(); }
  int action_count() const { return spec_.action_count; }

  Observation reset(Seed episode_seed);
  StepOutcome step(int action);
  Observation observe() const;

  bool done() const { return done_; }
  int steps_taken() const { return t_; }

  // Game state, exposed for oracle policies and tests.
  int agent_x() const { return ax_; }
  int agent_y() const { return ay_; }
  int band_top() const { return band_top_; }
  const std::vector<std::pair<int, int>>& objects() const { return objects_; }

  /// Finite set of per-step rewards the game can emit.
  std::vector<double> reward_set() const;

 private:
  bool is_wall(int x, int y) const;
  bool object_at(int x, int y) const;
  StepOutcome step_corridor(int action);
  StepOutcome step_collector(int action);
  StepOutcome step_dodger(int action);
  void spawn_row(int y);

  MdpSpec spec_;
  std::mt19937_64 rng_;
  int t_ = 0;
  bool done_ = true;
  bool started_ = false;
  int ax_ = 0;
  int ay_ = 0;
  int band_top_ = 0;
  std::vector<std::pair<int, int>> objects_;  // (x, y)
};

struct EpisodeStep {
  Observation obs;        // acted-upon input (perturbed when a modifier is set)
  Observation clean_obs;  // unmodified observation
  int action = 0;
  double reward = 0.0;
};

struct EpisodeRecord {
  std::vector<EpisodeStep> steps;
  double score = 0.0;
  Seed seed = 0;
};

/// Transforms a clean observation before it is scored; receives the step index.
using StateModifier = std::function<Observation(const Observation&, int)>;

/// How an action is chosen from the per-action scores.
enum class ActionRule { Greedy, Worst };

EpisodeRecord rollout(const MdpSpec& mdp, const ActionScorer& policy, Seed episode_seed,
                      const StateModifier& modifier = {}, ActionRule rule = ActionRule::Greedy);

/// Observation at a uniformly drawn index of one seeded greedy episode.
Observation sample_state(const MdpSpec& mdp, const ActionScorer& policy, Seed rng_seed);

/// Index of the first maximum / minimum.
int argmax(const Vec& v);
int argmin(const Vec& v);

}  // namespace hsd
