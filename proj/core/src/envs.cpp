#include "hsdlab/envs.hpp"

#include <algorithm>
#include <cmath>

#include "hsdlab/errors.hpp"
#include "hsdlab/policy.hpp"

namespace hsd {

std::string to_string(DynamicsKind kind) {
  switch (kind) {
    case DynamicsKind::Corridor:
      return "Corridor";
    case DynamicsKind::Collector:
      return "Collector";
    case DynamicsKind::Dodger:
      return "Dodger";
  }
  return "?";
}

DynamicsKind dynamics_kind_from_string(const std::string& name) {
  if (name == "Corridor") return DynamicsKind::Corridor;
  if (name == "Collector") return DynamicsKind::Collector;
  if (name == "Dodger") return DynamicsKind::Dodger;
  throw ConfigError("unknown dynamics kind '" + name + "'");
}

void MdpSpec::validate() const {
  if (id.empty()) throw ConfigError("mdp id must be non-empty");
  if (width < 4 || height < 4 || channels != 2)
    throw ConfigError("mdp '" + id + "': geometry must be at least 4x4 with 2 channels");
  if (action_count < 5) throw ConfigError("mdp '" + id + "': action_count must be >= 5");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("mdp '" + id + "': gamma must lie in (0,1]");
  if (max_steps < 1) throw ConfigError("mdp '" + id + "': max_steps must be positive");
  if (kind == DynamicsKind::Corridor && (corridor_height < 1 || corridor_height > height - 2))
    throw ConfigError("mdp '" + id + "': corridor_height out of range");
  if (kind == DynamicsKind::Collector && (coin_count < 1 || coin_count >= width * height))
    throw ConfigError("mdp '" + id + "': coin_count out of range");
  if (kind == DynamicsKind::Dodger && !(spawn_prob >= 0.0 && spawn_prob <= 1.0))
    throw ConfigError("mdp '" + id + "': spawn_prob must lie in [0,1]");
}

MdpSpec default_spec(DynamicsKind kind, std::string id, Seed seed) {
  MdpSpec s;
  s.id = std::move(id);
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case DynamicsKind::Corridor:
      s.max_steps = 30;
      break;
    case DynamicsKind::Collector:
      s.max_steps = 40;
      break;
    case DynamicsKind::Dodger:
      s.max_steps = 40;
      break;
  }
  return s;
}

GridMdp::GridMdp(MdpSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

bool GridMdp::is_wall(int x, int y) const {
  if (x < 0 || y < 0 || x >= spec_.width || y >= spec_.height) return true;
  if (spec_.kind == DynamicsKind::Corridor)
    return y < band_top_ || y >= band_top_ + spec_.corridor_height;
  return false;
}

bool GridMdp::object_at(int x, int y) const {
  return std::any_of(objects_.begin(), objects_.end(),
                     [&](const auto& o) { return o.first == x && o.second == y; });
}

void GridMdp::spawn_row(int y) {
  std::bernoulli_distribution spawn(spec_.spawn_prob);
  std::uniform_int_distribution<int> col(0, spec_.width - 1);
  if (spawn(rng_)) objects_.emplace_back(col(rng_), y);
}

Observation GridMdp::reset(Seed episode_seed) {
  rng_.seed(mix_seed(spec_.seed, episode_seed));
  t_ = 0;
  done_ = false;
  started_ = true;
  objects_.clear();
  const int w = spec_.width;
  const int h = spec_.height;
  switch (spec_.kind) {
    case DynamicsKind::Corridor: {
      std::uniform_int_distribution<int> top(1, h - 1 - spec_.corridor_height);
      band_top_ = top(rng_);
      std::uniform_int_distribution<int> row(0, spec_.corridor_height - 1);
      std::uniform_int_distribution<int> col(0, w - 3);
      ay_ = band_top_ + row(rng_);
      ax_ = col(rng_);
      break;
    }
    case DynamicsKind::Collector: {
      // Coins fall one row per step and land one after another; consecutive
      // landing columns are always reachable in time, so a perfect catcher
      // collects every coin.
      std::uniform_int_distribution<int> col(0, w - 1);
      ax_ = col(rng_);
      ay_ = h - 1;
      const int spacing = std::max(1, (h - 2) / spec_.coin_count);
      int prev_x = ax_;
      int prev_y = h - 1;
      for (int i = 0; i < spec_.coin_count; ++i) {
        const int y = h - 3 - i * spacing;
        const int reach = prev_y - y;
        std::uniform_int_distribution<int> dx(-reach, reach);
        int x;
        do {
          x = prev_x + dx(rng_);
        } while (x < 0 || x >= w);
        objects_.emplace_back(x, y);
        prev_x = x;
        prev_y = y;
      }
      break;
    }
    case DynamicsKind::Dodger: {
      std::uniform_int_distribution<int> col(0, w - 1);
      ax_ = col(rng_);
      ay_ = h - 1;
      // Pre-populate the falling field, leaving the two rows above the agent clear.
      for (int y = 0; y < h - 2; ++y) spawn_row(y);
      break;
    }
  }
  return observe();
}

Observation GridMdp::observe() const {
  const int w = spec_.width;
  const int h = spec_.height;
  Observation obs = Observation::Zero(spec_.obs_dim());
  const auto at = [&](int c, int x, int y) -> double& { return obs[(c * h + y) * w + x]; };
  at(kAgentChannel, ax_, ay_) = 1.0;
  if (spec_.kind == DynamicsKind::Corridor) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (is_wall(x, y)) at(kObjectChannel, x, y) = 1.0;
  }
  for (const auto& [x, y] : objects_) at(kObjectChannel, x, y) = 1.0;
  return obs;
}

std::vector<double> GridMdp::reward_set() const {
  switch (spec_.kind) {
    case DynamicsKind::Corridor:
    case DynamicsKind::Collector:
      return {0.0, 1.0};
    case DynamicsKind::Dodger:
      return {-1.0, 0.1};
  }
  return {};
}

StepOutcome GridMdp::step(int action) {
  if (action < 0 || action >= spec_.action_count)
    throw DomainError("action " + std::to_string(action) + " out of range [0," +
                      std::to_string(spec_.action_count) + ")");
  if (!started_) throw StateError("step before reset");
  if (done_) throw StateError("step after episode end");
  StepOutcome out;
  switch (spec_.kind) {
    case DynamicsKind::Corridor:
      out = step_corridor(action);
      break;
    case DynamicsKind::Collector:
      out = step_collector(action);
      break;
    case DynamicsKind::Dodger:
      out = step_dodger(action);
      break;
  }
  ++t_;
  if (t_ >= spec_.max_steps && !out.done) {
    out.done = true;
    out.truncated = true;
  }
  done_ = out.done;
  out.next_obs = observe();
  return out;
}

namespace {

std::pair<int, int> displacement(int action) {
  switch (action) {
    case action::kUp:
      return {0, -1};
    case action::kDown:
      return {0, 1};
    case action::kLeft:
      return {-1, 0};
    case action::kRight:
      return {1, 0};
    default:
      return {0, 0};
  }
}

}  // namespace

StepOutcome GridMdp::step_corridor(int action) {
  const auto [dx, dy] = displacement(action);
  const int nx = ax_ + dx;
  const int ny = ay_ + dy;
  if (!is_wall(nx, ny)) {
    ax_ = nx;
    ay_ = ny;
  }
  StepOutcome out;
  if (ax_ == spec_.width - 1) {
    out.reward = 1.0;
    out.done = true;
  }
  return out;
}

StepOutcome GridMdp::step_collector(int action) {
  if (action == action::kLeft || action == action::kRight) {
    const int nx = ax_ + displacement(action).first;
    if (nx >= 0 && nx < spec_.width) ax_ = nx;
  }
  StepOutcome out;
  for (auto& o : objects_) ++o.second;
  for (const auto& o : objects_)
    if (o.second == ay_ && o.first == ax_) out.reward += 1.0;
  std::erase_if(objects_, [&](const auto& o) { return o.second >= ay_; });
  out.done = objects_.empty();
  return out;
}

StepOutcome GridMdp::step_dodger(int action) {
  // Only horizontal moves exist in this game.
  if (action == action::kLeft || action == action::kRight) {
    const int nx = ax_ + displacement(action).first;
    if (nx >= 0 && nx < spec_.width) ax_ = nx;
  }
  StepOutcome out;
  bool hit = object_at(ax_, ay_);
  if (!hit) {
    for (auto& o : objects_) ++o.second;
    std::erase_if(objects_, [&](const auto& o) { return o.second >= spec_.height; });
    hit = object_at(ax_, ay_);
    spawn_row(0);
  }
  if (hit) {
    out.reward = -1.0;
    out.done = true;
  } else {
    out.reward = 0.1;
  }
  return out;
}

int argmax(const Vec& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

int argmin(const Vec& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

EpisodeRecord rollout(const MdpSpec& mdp, const ActionScorer& policy, Seed episode_seed,
                      const StateModifier& modifier, ActionRule rule) {
  GridMdp env(mdp);
  EpisodeRecord rec;
  rec.seed = episode_seed;
  Observation obs = env.reset(episode_seed);
  while (!env.done()) {
    EpisodeStep st;
    st.clean_obs = obs;
    st.obs = modifier ? modifier(obs, static_cast<int>(rec.steps.size())) : obs;
    const Vec scores = policy.score(st.obs);
    if (!scores.allFinite()) throw NumericError("non-finite policy scores during rollout");
    st.action = rule == ActionRule::Greedy ? argmax(scores) : argmin(scores);
    StepOutcome out = env.step(st.action);
    st.reward = out.reward;
    rec.score += out.reward;
    rec.steps.push_back(std::move(st));
    obs = std::move(out.next_obs);
  }
  return rec;
}

Observation sample_state(const MdpSpec& mdp, const ActionScorer& policy, Seed rng_seed) {
  std::mt19937_64 rng(mix_seed(rng_seed, 0x5a5a));
  const Seed episode_seed = rng();
  EpisodeRecord rec = rollout(mdp, policy, episode_seed);
  if (rec.steps.empty()) throw StateError("cannot sample from a zero-length episode");
  std::uniform_int_distribution<std::size_t> pick(0, rec.steps.size() - 1);
  return rec.steps[pick(rng)].clean_obs;
}

}  // namespace hsd
