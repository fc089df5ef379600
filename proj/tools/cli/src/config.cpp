#include "hsdlab/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "hsdlab/digest.hpp"
#include "hsdlab/errors.hpp"

namespace hsd::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

template <typename T>
T optional(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": bad value for '" + key + "': " + e.what());
  }
}

/// Wraps the enum parsers so their errors carry the location.
template <typename F>
auto parse_enum(F&& f, const std::string& where) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

MdpSpec parse_mdp(const json& j, Seed global) {
  const std::string id = required<std::string>(j, "id", "suite entry");
  const std::string where = "mdp '" + id + "'";
  check_keys(j,
             {"id", "kind", "seed", "width", "height", "channels", "action_count", "gamma", "max_steps",
              "corridor_height", "coin_count", "spawn_prob"},
             where);
  const auto kind = parse_enum([&] { return dynamics_kind_from_string(required<std::string>(j, "kind", where)); }, where);
  MdpSpec s = default_spec(kind, id, mix_seed(global, required<Seed>(j, "seed", where)));
  s.width = optional(j, "width", s.width, where);
  s.height = optional(j, "height", s.height, where);
  s.channels = optional(j, "channels", s.channels, where);
  s.action_count = optional(j, "action_count", s.action_count, where);
  s.gamma = optional(j, "gamma", s.gamma, where);
  s.max_steps = optional(j, "max_steps", s.max_steps, where);
  s.corridor_height = optional(j, "corridor_height", s.corridor_height, where);
  s.coin_count = optional(j, "coin_count", s.coin_count, where);
  s.spawn_prob = optional(j, "spawn_prob", s.spawn_prob, where);
  s.validate();
  return s;
}

TrainConfig parse_train(const json& j, const std::string& where, Seed global) {
  check_keys(j,
             {"learning_rate", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay_steps", "target_sync_period",
              "batch_size", "total_steps", "buffer_capacity", "adversarial", "adversarial_budget", "seed", "hidden",
              "learning_starts", "train_every", "huber_delta", "momentum"},
             where);
  TrainConfig c;
  c.learning_rate = optional(j, "learning_rate", c.learning_rate, where);
  c.gamma = optional(j, "gamma", c.gamma, where);
  c.epsilon_start = optional(j, "epsilon_start", c.epsilon_start, where);
  c.epsilon_end = optional(j, "epsilon_end", c.epsilon_end, where);
  c.epsilon_decay_steps = optional(j, "epsilon_decay_steps", c.epsilon_decay_steps, where);
  c.target_sync_period = optional(j, "target_sync_period", c.target_sync_period, where);
  c.batch_size = optional(j, "batch_size", c.batch_size, where);
  c.total_steps = optional(j, "total_steps", c.total_steps, where);
  c.buffer_capacity = optional(j, "buffer_capacity", c.buffer_capacity, where);
  c.adversarial = optional(j, "adversarial", c.adversarial, where);
  c.adversarial_budget = optional(j, "adversarial_budget", c.adversarial_budget, where);
  c.seed = mix_seed(global, required<Seed>(j, "seed", where));
  c.hidden = optional(j, "hidden", c.hidden, where);
  c.learning_starts = optional(j, "learning_starts", c.learning_starts, where);
  c.train_every = optional(j, "train_every", c.train_every, where);
  c.huber_delta = optional(j, "huber_delta", c.huber_delta, where);
  c.momentum = optional(j, "momentum", c.momentum, where);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

SolverConfig parse_solver(const json& j, const std::string& where) {
  check_keys(j, {"c_init", "c_search_steps", "inner_steps", "step_size", "confidence", "lambda1", "lambda2"}, where);
  SolverConfig s;
  s.c_init = optional(j, "c_init", s.c_init, where);
  s.c_search_steps = optional(j, "c_search_steps", s.c_search_steps, where);
  s.inner_steps = optional(j, "inner_steps", s.inner_steps, where);
  s.step_size = optional(j, "step_size", s.step_size, where);
  s.confidence = optional(j, "confidence", s.confidence, where);
  s.lambda1 = optional(j, "lambda1", s.lambda1, where);
  s.lambda2 = optional(j, "lambda2", s.lambda2, where);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

MethodSpec parse_method(const json& j, const std::string& where) {
  MethodSpec m;
  m.method = parse_enum([&] { return method_from_string(required<std::string>(j, "method", where)); }, where);
  if (j.contains("p_norm"))
    m.p_norm = parse_enum([&] { return pnorm_from_string(j.at("p_norm").get<std::string>()); }, where);
  if (j.contains("solver")) m.solver = parse_solver(j.at("solver"), where + " solver");
  return m;
}

/// kappa is a number or the string "calibrated".
std::pair<double, bool> parse_kappa(const json& j, const std::string& where) {
  if (!j.contains("kappa")) throw ConfigError(where + ": missing required key 'kappa'");
  const json& k = j.at("kappa");
  if (k.is_string()) {
    if (k.get<std::string>() != "calibrated") throw ConfigError(where + ": kappa must be a number or \"calibrated\"");
    return {0.0, true};
  }
  if (!k.is_number()) throw ConfigError(where + ": kappa must be a number or \"calibrated\"");
  return {k.get<double>(), false};
}

InstanceParams parse_theory_params(const json& j, const std::string& where, Seed global) {
  InstanceParams p;
  p.n = optional(j, "n", p.n, where);
  p.num_actions = optional(j, "num_actions", p.num_actions, where);
  p.alpha = optional(j, "alpha", p.alpha, where);
  p.beta = optional(j, "beta", p.beta, where);
  p.c_gap = optional(j, "c_gap", p.c_gap, where);
  p.d_gap = optional(j, "d_gap", p.d_gap, where);
  p.s1_size = optional(j, "s1_size", p.s1_size, where);
  p.orthogonalize = optional(j, "orthogonalize", p.orthogonalize, where);
  p.seed = mix_seed(global, required<Seed>(j, "seed", where));
  return p;
}

template <typename T, typename Key>
void ensure_unique(const std::vector<T>& items, Key key, const std::string& what) {
  std::set<std::string> seen;
  for (const auto& it : items)
    if (!seen.insert(key(it)).second) throw ConfigError("duplicate " + what + " id '" + key(it) + "'");
}

}  // namespace

const MdpSpec& ExperimentConfig::mdp(const std::string& id) const {
  for (const auto& m : suite)
    if (m.id == id) return m;
  throw ResolutionError("unknown mdp id '" + id + "'");
}

const PolicyEntry& ExperimentConfig::policy(const std::string& id) const {
  for (const auto& p : policies)
    if (p.id == id) return p;
  throw ResolutionError("unknown policy id '" + id + "'");
}

const DirectionEntry& ExperimentConfig::direction(const std::string& id) const {
  for (const auto& d : directions)
    if (d.id == id) return d;
  throw ResolutionError("unknown direction id '" + id + "'");
}

const RunEntry& ExperimentConfig::run(const std::string& id) const {
  for (const auto& r : runs)
    if (r.spec.id == id) return r;
  throw ResolutionError("unknown run id '" + id + "'");
}

ExperimentConfig load_config(const std::filesystem::path& path, const LoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ResolutionError("config file not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc, path.parent_path(), opts);
}

ExperimentConfig parse_config(const json& input, const std::filesystem::path& base_dir, const LoadOptions& opts) {
  json doc = input;
  check_keys(doc, {"suite", "policies", "directions", "runs", "stats", "calibration", "theory", "output_dir", "global_seed"},
             "config");
  if (opts.seed_override) doc["global_seed"] = *opts.seed_override;

  ExperimentConfig cfg;
  cfg.global_seed = required<Seed>(doc, "global_seed", "config");
  const Seed g = cfg.global_seed;
  cfg.digest = sha256_hex(doc.dump());

  cfg.output_dir = opts.output_override ? *opts.output_override
                                        : std::filesystem::path(required<std::string>(doc, "output_dir", "config"));
  if (cfg.output_dir.is_relative()) cfg.output_dir = base_dir / cfg.output_dir;

  for (const auto& j : doc.value("suite", json::array())) cfg.suite.push_back(parse_mdp(j, g));
  if (cfg.suite.empty()) throw ConfigError("config: suite must list at least one mdp");
  ensure_unique(cfg.suite, [](const MdpSpec& m) { return m.id; }, "mdp");
  for (const auto& m : cfg.suite)
    if (m.obs_dim() != cfg.suite.front().obs_dim() || m.action_count != cfg.suite.front().action_count)
      throw ConfigError("mdp '" + m.id + "': every suite mdp must share observation size and action count");

  for (const auto& j : doc.value("policies", json::array())) {
    PolicyEntry p;
    p.id = required<std::string>(j, "id", "policy entry");
    const std::string where = "policy '" + p.id + "'";
    check_keys(j, {"id", "mdp", "arch", "train"}, where);
    p.mdp = required<std::string>(j, "mdp", where);
    cfg.mdp(p.mdp);
    p.train = parse_train(required<json>(j, "train", where), where, g);
    p.train.head = parse_enum([&] { return head_kind_from_string(optional<std::string>(j, "arch", "Plain", where)); }, where);
    p.raw = j;
    cfg.policies.push_back(std::move(p));
  }
  ensure_unique(cfg.policies, [](const PolicyEntry& p) { return p.id; }, "policy");
  const auto policy_mdp = [&](const std::string& pid) { return cfg.policy(pid).mdp; };

  for (const auto& j : doc.value("directions", json::array())) {
    DirectionEntry d;
    d.id = required<std::string>(j, "id", "direction entry");
    const std::string where = "direction '" + d.id + "'";
    check_keys(j, {"id", "method", "p_norm", "solver", "source_policy", "source_mdp", "seed"}, where);
    d.method = parse_method(j, where);
    d.source_policy = required<std::string>(j, "source_policy", where);
    d.source_mdp = optional<std::string>(j, "source_mdp", policy_mdp(d.source_policy), where);
    cfg.mdp(d.source_mdp);
    d.seed = mix_seed(g, required<Seed>(j, "seed", where));
    cfg.directions.push_back(std::move(d));
  }
  ensure_unique(cfg.directions, [](const DirectionEntry& d) { return d.id; }, "direction");

  for (const auto& j : doc.value("runs", json::array())) {
    RunEntry r;
    RunSpec& s = r.spec;
    s.id = required<std::string>(j, "id", "run entry");
    const std::string where = "run '" + s.id + "'";
    check_keys(j,
               {"id", "setting", "method", "p_norm", "solver", "source_mdp", "target_mdp", "source_policy",
                "target_policy", "kappa", "episodes", "base_seed", "direction", "reuse_direction", "clip"},
               where);
    s.setting = parse_enum([&] { return setting_from_string(required<std::string>(j, "setting", where)); }, where);
    s.method = parse_method(j, where);
    s.target_policy = required<std::string>(j, "target_policy", where);
    s.target_mdp = optional<std::string>(j, "target_mdp", policy_mdp(s.target_policy), where);
    s.source_policy = optional<std::string>(j, "source_policy", s.target_policy, where);
    s.source_mdp = optional<std::string>(j, "source_mdp", policy_mdp(s.source_policy), where);
    cfg.mdp(s.target_mdp);
    cfg.mdp(s.source_mdp);
    std::tie(s.kappa, r.kappa_calibrated) = parse_kappa(j, where);
    s.episodes = optional(j, "episodes", s.episodes, where);
    s.base_seed = mix_seed(g, required<Seed>(j, "base_seed", where));
    if (j.contains("direction")) {
      s.direction_id = j.at("direction").get<std::string>();
      cfg.direction(*s.direction_id);
    }
    s.reuse_direction = optional(j, "reuse_direction", s.reuse_direction, where);
    s.clip = optional(j, "clip", s.clip, where);
    s.validate();
    cfg.runs.push_back(std::move(r));
  }
  ensure_unique(cfg.runs, [](const RunEntry& r) { return r.spec.id; }, "run");

  if (doc.contains("calibration")) {
    const json& j = doc.at("calibration");
    const std::string where = "calibration";
    check_keys(j, {"threshold", "directions", "grid_base", "grid_points", "episodes", "seed", "episode_seed"}, where);
    auto& o = cfg.calibration.options;
    o.threshold = optional(j, "threshold", o.threshold, where);
    o.directions = optional(j, "directions", o.directions, where);
    o.grid_base = optional(j, "grid_base", o.grid_base, where);
    o.grid_points = optional(j, "grid_points", o.grid_points, where);
    o.seed = mix_seed(g, required<Seed>(j, "seed", where));
    cfg.calibration.episodes = optional(j, "episodes", cfg.calibration.episodes, where);
    cfg.calibration.episode_seed = mix_seed(g, required<Seed>(j, "episode_seed", where));
  } else {
    const bool wants = std::any_of(cfg.runs.begin(), cfg.runs.end(), [](const RunEntry& r) { return r.kappa_calibrated; });
    if (wants) throw ConfigError("config: runs use calibrated kappa but there is no calibration section");
  }

  if (doc.contains("theory")) {
    const json& j = doc.at("theory");
    check_keys(j, {"n", "num_actions", "alpha", "beta", "c_gap", "d_gap", "s1_size", "orthogonalize", "seed", "dims", "trials"},
               "theory");
    cfg.theory = parse_theory_params(j, "theory", g);
    cfg.theory_dims = optional(j, "dims", cfg.theory_dims, "theory");
    cfg.theory_trials = optional(j, "trials", cfg.theory_trials, "theory");
  }

  for (const auto& j : doc.value("stats", json::array())) {
    StatEntry st;
    st.id = required<std::string>(j, "id", "stat entry");
    const std::string where = "stat '" + st.id + "'";
    const std::string type = required<std::string>(j, "type", where);
    if (type == "action_shift") {
      check_keys(j, {"id", "type", "run", "targets"}, where);
      st.kind = StatKind::ActionShift;
      st.run = required<std::string>(j, "run", where);
      cfg.run(st.run);
      for (const auto& t : optional(j, "targets", std::vector<std::vector<int>>{}, where))
        st.target_sets.emplace_back(t.begin(), t.end());
    } else if (type == "cross_mdp" || type == "similarity") {
      st.kind = type == "cross_mdp" ? StatKind::CrossMdp : StatKind::Similarity;
      if (st.kind == StatKind::CrossMdp)
        check_keys(j, {"id", "type", "entries", "method", "p_norm", "solver", "episodes", "seed"}, where);
      else
        check_keys(j, {"id", "type", "entries", "episodes", "seed"}, where);
      for (const auto& e : required<json>(j, "entries", where)) {
        CrossMdpEntry ce;
        ce.policy_id = required<std::string>(e, "policy", where);
        ce.mdp_id = optional<std::string>(e, "mdp", policy_mdp(ce.policy_id), where);
        cfg.mdp(ce.mdp_id);
        if (st.kind == StatKind::CrossMdp) {
          bool calibrated = false;
          std::tie(ce.kappa, calibrated) = parse_kappa(e, where);
          st.kappa_calibrated = st.kappa_calibrated || calibrated;
          if (calibrated) ce.kappa = -1.0;  // resolved at report time
        }
        st.entries.push_back(ce);
      }
      if (st.entries.size() < 2) throw ConfigError(where + ": needs at least two entries");
      if (st.kind == StatKind::CrossMdp) st.method = parse_method(j, where);
      st.episodes = optional(j, "episodes", st.episodes, where);
      st.seed = mix_seed(g, required<Seed>(j, "seed", where));
    } else if (type == "theory_sweep") {
      check_keys(j, {"id", "type", "num_actions", "alpha", "beta", "c_gap", "d_gap", "s1_size", "orthogonalize", "seed", "dims", "trials"},
                 where);
      st.kind = StatKind::TheorySweep;
      st.theory = parse_theory_params(j, where, g);
      st.dims = required<std::vector<int>>(j, "dims", where);
      st.trials = optional(j, "trials", st.trials, where);
    } else {
      throw ConfigError(where + ": unknown stat type '" + type + "'");
    }
    cfg.stats.push_back(std::move(st));
  }
  ensure_unique(cfg.stats, [](const StatEntry& s) { return s.id; }, "stat");
  return cfg;
}

std::string policy_artifact_digest(const ExperimentConfig& cfg, const PolicyEntry& entry) {
  const MdpSpec& m = cfg.mdp(entry.mdp);
  json j;
  j["entry"] = entry.raw;
  j["global_seed"] = cfg.global_seed;
  j["mdp"] = {{"id", m.id},          {"kind", to_string(m.kind)}, {"seed", m.seed},
              {"width", m.width},    {"height", m.height},        {"channels", m.channels},
              {"actions", m.action_count}, {"gamma", m.gamma},    {"max_steps", m.max_steps},
              {"corridor_height", m.corridor_height}, {"coin_count", m.coin_count}, {"spawn_prob", m.spawn_prob}};
  return sha256_hex(j.dump());
}

}  // namespace hsd::cli
