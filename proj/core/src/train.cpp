#include "hsdlab/train.hpp"

#include <algorithm>
#include <cmath>

#include "hsdlab/errors.hpp"

namespace hsd {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0,1]");
  if (epsilon_decay_steps < 1) throw ConfigError("epsilon decay_steps must be positive");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw ConfigError("epsilon schedule values must lie in [0,1]");
  if (target_sync_period < 1) throw ConfigError("target_sync_period must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (total_steps < 1) throw ConfigError("total_steps must be positive");
  if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
  if (learning_starts < 0 || train_every < 1) throw ConfigError("learning_starts/train_every out of range");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (adversarial_budget < 0.0) throw ConfigError("adversarial_budget must be nonnegative");
  if (adversarial != (adversarial_budget > 0.0))
    throw ConfigError("adversarial_budget must be positive exactly when adversarial training is enabled");
  for (int h : hidden)
    if (h < 1) throw ConfigError("hidden widths must be positive");
}

double TrainConfig::epsilon_at(int step) const {
  if (step >= epsilon_decay_steps) return epsilon_end;
  const double frac = static_cast<double>(step) / epsilon_decay_steps;
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be positive");
  items_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (items_.empty()) throw StateError("sampling from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Vec double_q_targets(const QNetwork& online, const QNetwork& target, const Vec& rewards, const Mat& next_obs,
                     const std::vector<bool>& done, double gamma) {
  const Mat q_online = online.score_batch(next_obs);
  const Mat q_target = target.score_batch(next_obs);
  Vec y(rewards.size());
  for (Eigen::Index i = 0; i < rewards.size(); ++i) {
    if (done[static_cast<std::size_t>(i)]) {
      y[i] = rewards[i];
    } else {
      const int a = argmax(q_online.row(i).transpose());
      y[i] = rewards[i] + gamma * q_target(i, a);
    }
  }
  return y;
}

Mat fgsm_linf_batch(const QNetwork& net, const Mat& obs, double budget) {
  ForwardCache cache;
  const Mat q = net.score_batch(obs, cache);
  Mat coeff = Mat::Zero(q.rows(), q.cols());
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    const Vec row = q.row(i).transpose();
    const int best = argmax(row);
    int other = best == 0 ? 1 : 0;
    for (int a = 0; a < row.size(); ++a)
      if (a != best && row[a] > row[other]) other = a;
    coeff(i, best) = 1.0;
    coeff(i, other) = -1.0;
  }
  Mat grad;
  net.backward(cache, coeff, nullptr, &grad);
  // Descend the margin: s - budget * sign(grad).
  return obs - budget * grad.unaryExpr([](double g) { return double((g > 0.0) - (g < 0.0)); });
}

namespace {

double huber_grad(double diff, double delta) { return std::clamp(diff, -delta, delta); }

double huber(double diff, double delta) {
  const double a = std::abs(diff);
  return a <= delta ? 0.5 * diff * diff : delta * (a - 0.5 * delta);
}

QNetwork run_training(const MdpSpec& mdp, const TrainConfig& cfg, TrainLog* log) {
  cfg.validate();
  const bool adv = cfg.adversarial;
  GridMdp env(mdp);
  const int dim = env.obs_dim();
  const int actions = env.action_count();
  QNetwork online(dim, cfg.hidden, actions, cfg.head, mix_seed(cfg.seed, 1));
  QNetwork target = online;
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  std::mt19937_64 rng(mix_seed(cfg.seed, 2));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, actions - 1);

  std::vector<Mat> velocity_w;
  std::vector<Vec> velocity_b;
  for (const auto& L : online.layers()) {
    velocity_w.push_back(Mat::Zero(L.weight.rows(), L.weight.cols()));
    velocity_b.push_back(Vec::Zero(L.bias.size()));
  }

  Seed episode_counter = 0;
  Observation obs = env.reset(mix_seed(cfg.seed, 1000 + episode_counter++));
  double episode_score = 0.0;
  const auto batch = static_cast<Eigen::Index>(cfg.batch_size);
  Mat states(batch, dim);
  Mat next_states(batch, dim);
  Vec rewards(batch);
  std::vector<bool> done(static_cast<std::size_t>(batch));
  std::vector<int> taken(static_cast<std::size_t>(batch));

  for (int step = 0; step < cfg.total_steps; ++step) {
    int a;
    if (unit(rng) < cfg.epsilon_at(step)) {
      a = random_action(rng);
    } else {
      Observation input = obs;
      if (adv) input = fgsm_linf_batch(online, obs.transpose(), cfg.adversarial_budget).row(0).transpose();
      a = argmax(online.score(input));
    }
    StepOutcome out = env.step(a);
    episode_score += out.reward;
    buffer.push(Transition{obs, a, out.reward, out.next_obs, out.done && !out.truncated});
    if (out.done) {
      if (log) log->episode_scores.push_back(episode_score);
      episode_score = 0.0;
      obs = env.reset(mix_seed(cfg.seed, 1000 + episode_counter++));
    } else {
      obs = std::move(out.next_obs);
    }

    if (step >= cfg.learning_starts && step % cfg.train_every == 0) {
      const auto idx = buffer.sample_indices(static_cast<std::size_t>(batch), rng);
      for (Eigen::Index i = 0; i < batch; ++i) {
        const Transition& t = buffer.at(idx[static_cast<std::size_t>(i)]);
        states.row(i) = t.obs.transpose();
        next_states.row(i) = t.next_obs.transpose();
        rewards[i] = t.reward;
        done[static_cast<std::size_t>(i)] = t.done;
        taken[static_cast<std::size_t>(i)] = t.action;
      }
      Mat online_states = states;
      Mat online_next = next_states;
      if (adv) {
        online_states = fgsm_linf_batch(online, states, cfg.adversarial_budget);
        online_next = fgsm_linf_batch(online, next_states, cfg.adversarial_budget);
      }
      // Online argmax on (possibly perturbed) s', target value on clean s'.
      const Mat q_next_online = online.score_batch(online_next);
      const Mat q_next_target = target.score_batch(next_states);
      ForwardCache cache;
      const Mat q = online.score_batch(online_states, cache);
      Mat grad_q = Mat::Zero(batch, actions);
      double loss = 0.0;
      for (Eigen::Index i = 0; i < batch; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double y = rewards[i];
        if (!done[ui]) y += cfg.gamma * q_next_target(i, argmax(q_next_online.row(i).transpose()));
        const double diff = q(i, taken[ui]) - y;
        loss += huber(diff, cfg.huber_delta);
        grad_q(i, taken[ui]) = huber_grad(diff, cfg.huber_delta) / static_cast<double>(batch);
      }
      loss /= static_cast<double>(batch);
      if (!std::isfinite(loss)) throw TrainingError("training loss became non-finite", step);
      if (log) log->losses.push_back(loss);
      NetworkGradients grads;
      online.backward(cache, grad_q, &grads, nullptr);
      auto& layers = online.mutable_layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        if (cfg.momentum > 0.0) {
          velocity_w[l] = cfg.momentum * velocity_w[l] + grads.weight[l];
          velocity_b[l] = cfg.momentum * velocity_b[l] + grads.bias[l];
          layers[l].weight -= cfg.learning_rate * velocity_w[l];
          layers[l].bias -= cfg.learning_rate * velocity_b[l];
        } else {
          layers[l].weight -= cfg.learning_rate * grads.weight[l];
          layers[l].bias -= cfg.learning_rate * grads.bias[l];
        }
      }
      if (!online.parameters_finite()) throw TrainingError("network parameters became non-finite", step);
    }
    if ((step + 1) % cfg.target_sync_period == 0) target = online;
  }
  return online;
}

}  // namespace

QNetwork train_ddqn(const MdpSpec& mdp, const TrainConfig& config, TrainLog* log) {
  if (config.adversarial) throw ConfigError("train_ddqn called with adversarial config; use train_adversarial");
  return run_training(mdp, config, log);
}

QNetwork train_adversarial(const MdpSpec& mdp, const TrainConfig& config, TrainLog* log) {
  if (!config.adversarial || !(config.adversarial_budget > 0.0))
    throw ConfigError("adversarial training requires adversarial=true and a positive budget");
  return run_training(mdp, config, log);
}

}  // namespace hsd
