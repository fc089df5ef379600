#include "hsdlab/harness.hpp"

#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "hsdlab/digest.hpp"
#include "hsdlab/errors.hpp"

namespace hsd {

std::string to_string(SettingKind s) {
  switch (s) {
    case SettingKind::Individual:
      return "Individual";
    case SettingKind::EpisodeRandom:
      return "EpisodeRandom";
    case SettingKind::EnvRandom:
      return "EnvRandom";
    case SettingKind::AlgRandom:
      return "AlgRandom";
    case SettingKind::AlgEnvRandom:
      return "AlgEnvRandom";
    case SettingKind::GaussianControl:
      return "GaussianControl";
  }
  return "?";
}

SettingKind setting_from_string(const std::string& name) {
  for (auto s : {SettingKind::Individual, SettingKind::EpisodeRandom, SettingKind::EnvRandom, SettingKind::AlgRandom,
                 SettingKind::AlgEnvRandom, SettingKind::GaussianControl})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown setting '" + name + "'");
}

void Registry::add_mdp(MdpSpec spec) {
  spec.validate();
  auto id = spec.id;
  mdps_.insert_or_assign(std::move(id), std::move(spec));
}

void Registry::add_policy(std::string id, std::shared_ptr<const ActionScorer> policy) {
  if (!policy) throw ConfigError("policy '" + id + "' is null");
  policies_.insert_or_assign(std::move(id), std::move(policy));
}

void Registry::add_direction(std::string id, Direction dir) { directions_.insert_or_assign(std::move(id), std::move(dir)); }

const MdpSpec& Registry::mdp(const std::string& id) const {
  const auto it = mdps_.find(id);
  if (it == mdps_.end()) throw ResolutionError("unknown mdp '" + id + "'");
  return it->second;
}

const ActionScorer& Registry::policy(const std::string& id) const { return *policy_ptr(id); }

std::shared_ptr<const ActionScorer> Registry::policy_ptr(const std::string& id) const {
  const auto it = policies_.find(id);
  if (it == policies_.end()) throw ResolutionError("unknown policy '" + id + "'");
  return it->second;
}

const Direction& Registry::direction(const std::string& id) const {
  const auto it = directions_.find(id);
  if (it == directions_.end()) throw ResolutionError("unknown direction '" + id + "'");
  return it->second;
}

Direction compute_direction(const ActionScorer& policy, const Observation& obs, const MethodSpec& method) {
  switch (method.method) {
    case Method::FGSM:
      return fgsm_direction(policy, obs, method.p_norm);
    case Method::CW:
      return cw_direction(policy, obs, method.solver);
    case Method::ENR:
      return enr_direction(policy, obs, method.solver);
    case Method::Gaussian: {
      Direction d = gaussian_direction(static_cast<int>(obs.size()), mix_seed(method.solver.seed, 0x6a55));
      d.source_state_hash = observation_digest(obs);
      return d;
    }
  }
  throw ConfigError("unhandled method");
}

void RunSpec::validate() const {
  const std::string who = "run '" + id + "': ";
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError(who + "kappa must be finite and nonnegative");
  if (episodes < 1) throw ConfigError(who + "episodes must be >= 1");
  if (target_mdp.empty() || target_policy.empty()) throw ConfigError(who + "target mdp and policy are required");
  const bool transfer_env = setting == SettingKind::EnvRandom || setting == SettingKind::AlgEnvRandom;
  const bool transfer_alg = setting == SettingKind::AlgRandom || setting == SettingKind::AlgEnvRandom;
  if (transfer_env || transfer_alg) {
    if (!direction_id && (source_mdp.empty() || source_policy.empty()))
      throw ConfigError(who + "source mdp and policy are required for " + to_string(setting));
  }
  if (transfer_env && source_mdp == target_mdp)
    throw ConfigError(who + to_string(setting) + " requires source_mdp != target_mdp");
  if (transfer_alg && source_policy == target_policy)
    throw ConfigError(who + to_string(setting) + " requires source_policy != target_policy");
  if (!transfer_env && !transfer_alg) {
    if (!source_mdp.empty() && source_mdp != target_mdp)
      throw ConfigError(who + to_string(setting) + " evaluates in its source mdp");
    if (!source_policy.empty() && source_policy != target_policy)
      throw ConfigError(who + to_string(setting) + " evaluates with its source policy");
  }
  if (setting == SettingKind::Individual && direction_id)
    throw ConfigError(who + "Individual computes a fresh direction per state; direction_id is not allowed");
  method.solver.validate();
}

std::vector<Seed> evaluation_seeds(Seed base_seed, int episodes) {
  std::vector<Seed> seeds(static_cast<std::size_t>(std::max(episodes, 0)));
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = base_seed + i;
  return seeds;
}

namespace {

double mean_score(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds, ActionRule rule,
                  const StateModifier& modifier = {}) {
  if (seeds.empty()) throw DomainError("at least one seed is required");
  double total = 0.0;
  for (Seed s : seeds) total += rollout(mdp, policy, s, modifier, rule).score;
  return total / static_cast<double>(seeds.size());
}

Observation clip_unit(const Observation& v) { return v.cwiseMax(0.0).cwiseMin(1.0); }

StateModifier shift_modifier(Vec step, bool clip) {
  return [step = std::move(step), clip](const Observation& obs, int) {
    Observation s = obs + step;
    return clip ? clip_unit(s) : s;
  };
}

template <class Fn>
void for_each_index(int n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  const auto guarded = [&](int i) {
    try {
      fn(i);
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  };
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) guarded(i);
  } else {
    std::vector<std::jthread> workers;
    const int w = std::min(jobs, n);
    for (int k = 0; k < w; ++k)
      workers.emplace_back([&, k] {
        for (int i = k; i < n; i += w) guarded(i);
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Direction draw_source_direction(const MdpSpec& mdp, const ActionScorer& policy, const MethodSpec& method,
                                Seed base_seed, std::uint64_t draw_index, EpisodeProvenance& prov) {
  std::string last_error;
  for (int attempt = 0; attempt < kSourceAttempts; ++attempt) {
    const Seed source_seed = mix_seed(base_seed, mix_seed(0xa11ULL + draw_index, static_cast<Seed>(attempt)));
    const Observation s = sample_state(mdp, policy, source_seed);
    try {
      MethodSpec m = method;
      m.solver.seed = mix_seed(method.solver.seed, source_seed);
      Direction d = compute_direction(policy, s, m);
      prov.source_seed = source_seed;
      prov.source_state_hash = d.source_state_hash;
      prov.attempts = attempt + 1;
      prov.raw_norm = d.raw_norm;
      return d;
    } catch (const SolverError& e) {
      last_error = e.what();
    }
  }
  throw SolverError("direction solver failed at " + std::to_string(kSourceAttempts) +
                    " sampled source states; last error: " + last_error);
}

double score_max(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds) {
  return mean_score(mdp, policy, seeds, ActionRule::Greedy);
}

double score_min(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds) {
  return mean_score(mdp, policy, seeds, ActionRule::Worst);
}

double impact(double score_max, double score_set, double score_min) {
  if (score_max == score_min) throw DegenerateScaleError("score_max equals score_min; impact is undefined");
  return (score_max - score_set) / (score_max - score_min);
}

double impact_sem(const std::vector<double>& scores, double score_max, double score_min) {
  const std::size_t n = scores.size();
  if (n < 2) return 0.0;
  std::vector<double> impacts;
  impacts.reserve(n);
  for (double s : scores) impacts.push_back(impact(score_max, s, score_min));
  const double mean = std::accumulate(impacts.begin(), impacts.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : impacts) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

ImpactReport run_setting(const RunSpec& spec, const Registry& registry, const RunOptions& options) {
  std::vector<EpisodeRecord> episodes;
  return run_setting_traced(spec, registry, episodes, options);
}

ImpactReport run_setting_traced(const RunSpec& spec, const Registry& registry, std::vector<EpisodeRecord>& episodes,
                                const RunOptions& options) {
  spec.validate();
  const MdpSpec& target_mdp = registry.mdp(spec.target_mdp);
  const ActionScorer& target = registry.policy(spec.target_policy);
  const int dim = target_mdp.obs_dim();
  if (target.input_dim() != dim) throw ConfigError("policy '" + spec.target_policy + "' does not fit mdp '" + spec.target_mdp + "'");

  const auto seeds = evaluation_seeds(spec.base_seed, spec.episodes);
  ImpactReport report;
  report.run_spec = spec;
  report.score_max = score_max(target_mdp, target, seeds);
  report.score_min = score_min(target_mdp, target, seeds);
  if (report.score_max == report.score_min)
    throw DegenerateScaleError("run '" + spec.id + "': clean and worst-action scores coincide");

  const bool random_setting = spec.setting == SettingKind::EpisodeRandom || spec.setting == SettingKind::EnvRandom ||
                              spec.setting == SettingKind::AlgRandom || spec.setting == SettingKind::AlgEnvRandom;
  const MdpSpec& source_mdp = random_setting && !spec.source_mdp.empty() ? registry.mdp(spec.source_mdp) : target_mdp;
  const ActionScorer& source =
      random_setting && !spec.source_policy.empty() ? registry.policy(spec.source_policy) : target;
  if (random_setting && source_mdp.obs_dim() != dim)
    throw ConfigError("run '" + spec.id + "': source and target observation dimensions differ");

  const Direction* stored = nullptr;
  if (spec.direction_id) {
    stored = &registry.direction(*spec.direction_id);
    if (stored->vector.size() != dim) throw ShapeError("direction '" + *spec.direction_id + "' has the wrong length");
  }

  const auto n = static_cast<std::size_t>(spec.episodes);
  episodes.assign(n, {});
  report.provenance.assign(n, {});

  for_each_index(spec.episodes, options.jobs, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    EpisodeProvenance& prov = report.provenance[ui];
    StateModifier modifier;
    switch (spec.setting) {
      case SettingKind::Individual: {
        modifier = [&](const Observation& obs, int) -> Observation {
          if (spec.kappa == 0.0) return obs;
          try {
            const Direction d = compute_direction(target, obs, spec.method);
            Observation s = obs + spec.kappa * d.vector;
            return spec.clip ? clip_unit(s) : s;
          } catch (const SolverError&) {
            ++prov.solver_failures;
            return obs;
          }
        };
        break;
      }
      case SettingKind::GaussianControl: {
        const Seed dseed = mix_seed(spec.base_seed, 0x6a0000ULL + (spec.reuse_direction ? 0 : ui));
        const Direction d = gaussian_direction(dim, dseed);
        prov.source_seed = dseed;
        prov.raw_norm = d.raw_norm;
        modifier = shift_modifier(spec.kappa * d.vector, spec.clip);
        break;
      }
      default: {
        Direction d;
        if (stored) {
          d = *stored;
          prov.source_state_hash = d.source_state_hash;
          prov.raw_norm = d.raw_norm;
        } else {
          d = draw_source_direction(source_mdp, source, spec.method, spec.base_seed, spec.reuse_direction ? 0 : ui,
                                    prov);
        }
        modifier = shift_modifier(spec.kappa * d.vector, spec.clip);
        break;
      }
    }
    episodes[ui] = rollout(target_mdp, target, seeds[ui], modifier);
  });

  report.per_episode_scores.reserve(n);
  for (const auto& e : episodes) report.per_episode_scores.push_back(e.score);
  report.mean_score = std::accumulate(report.per_episode_scores.begin(), report.per_episode_scores.end(), 0.0) /
                      static_cast<double>(n);
  report.impact = impact(report.score_max, report.mean_score, report.score_min);
  report.sem = impact_sem(report.per_episode_scores, report.score_max, report.score_min);
  return report;
}

double gaussian_impact(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds, double kappa,
                       int directions, Seed direction_seed) {
  if (directions < 1) throw DomainError("need at least one Gaussian direction");
  const double smax = score_max(mdp, policy, seeds);
  const double smin = score_min(mdp, policy, seeds);
  double total = 0.0;
  for (int j = 0; j < directions; ++j) {
    const Direction d = gaussian_direction(mdp.obs_dim(), mix_seed(direction_seed, static_cast<Seed>(j)));
    const double set = mean_score(mdp, policy, seeds, ActionRule::Greedy, shift_modifier(kappa * d.vector, false));
    total += impact(smax, set, smin);
  }
  return total / directions;
}

CalibrationResult calibrate_kappa(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds,
                                  const CalibrationOptions& options) {
  if (options.grid_points < 1 || !(options.grid_base > 0.0)) throw ConfigError("calibration grid is empty");
  CalibrationResult result;
  bool found = false;
  for (int k = 0; k < options.grid_points; ++k) {
    const double kappa = options.grid_base * std::ldexp(1.0, k);
    const double imp = gaussian_impact(mdp, policy, seeds, kappa, options.directions, options.seed);
    result.grid.push_back({kappa, imp});
    if (!(imp < options.threshold)) break;
    result.kappa = kappa;
    found = true;
  }
  if (!found)
    throw CalibrationError("no grid kappa keeps Gaussian impact below " + std::to_string(options.threshold) +
                           " (smallest tried " + std::to_string(options.grid_base) + ")");
  return result;
}

}  // namespace hsd
