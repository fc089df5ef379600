#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "hsdlab/envs.hpp"
#include "hsdlab/policy.hpp"

namespace hsd {

struct TrainConfig {
  double learning_rate = 0.01;
  double gamma = 0.95;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_steps = 6000;
  int target_sync_period = 500;
  int batch_size = 32;
  int total_steps = 15000;
  int buffer_capacity = 15000;
  bool adversarial = false;
  double adversarial_budget = 0.0;  // l-inf FGSM step used during training
  Seed seed = 0;

  std::vector<int> hidden{128, 128};
  HeadKind head = HeadKind::Plain;
  int learning_starts = 500;
  int train_every = 1;
  double huber_delta = 1.0;
  double momentum = 0.0;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  double epsilon_at(int step) const;
};

struct Transition {
  Observation obs;
  int action = 0;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;  // terminal; truncated episodes bootstrap
};

/// Fixed-capacity ring with uniform sampling over the current contents.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }

  /// Indices drawn uniformly with replacement.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

/// Double-Q regression targets r + gamma * Q_target(s', argmax_a Q_online(s', a));
/// terminal transitions use r.
Vec double_q_targets(const QNetwork& online, const QNetwork& target, const Vec& rewards, const Mat& next_obs,
                     const std::vector<bool>& done, double gamma);

/// One l-inf FGSM step of size `budget` against the margin of the network's
/// own greedy action, applied row-wise.
Mat fgsm_linf_batch(const QNetwork& net, const Mat& obs, double budget);

struct TrainLog {
  std::vector<double> episode_scores;
  std::vector<double> losses;  // mean loss of each update
};

/// Double DQN with epsilon-greedy exploration, uniform replay, plain SGD on a
/// Huber loss and periodic target sync. Deterministic for a given config.
QNetwork train_ddqn(const MdpSpec& mdp, const TrainConfig& config, TrainLog* log = nullptr);

/// Same loop, but states fed to the online network (action selection and the
/// regression) are first perturbed by an l-inf FGSM step of adversarial_budget.
QNetwork train_adversarial(const MdpSpec& mdp, const TrainConfig& config, TrainLog* log = nullptr);

}  // namespace hsd
