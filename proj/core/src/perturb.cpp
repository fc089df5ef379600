#include "hsdlab/perturb.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <nlohmann/json.hpp>

#include "hsdlab/digest.hpp"
#include "hsdlab/envs.hpp"
#include "hsdlab/errors.hpp"

namespace hsd {

std::string to_string(Method m) {
  switch (m) {
    case Method::FGSM:
      return "FGSM";
    case Method::CW:
      return "CW";
    case Method::ENR:
      return "ENR";
    case Method::Gaussian:
      return "Gaussian";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  if (name == "FGSM") return Method::FGSM;
  if (name == "CW") return Method::CW;
  if (name == "ENR") return Method::ENR;
  if (name == "Gaussian") return Method::Gaussian;
  throw ConfigError("unknown perturbation method '" + name + "'");
}

std::string to_string(PNorm p) { return p == PNorm::L2 ? "L2" : "Linf"; }

PNorm pnorm_from_string(const std::string& name) {
  if (name == "L2") return PNorm::L2;
  if (name == "Linf") return PNorm::Linf;
  throw ConfigError("unknown norm '" + name + "'");
}

void SolverConfig::validate() const {
  if (!(c_init > 0.0)) throw ConfigError("c_init must be positive");
  if (c_search_steps < 1) throw ConfigError("c_search_steps must be positive");
  if (inner_steps < 1) throw ConfigError("inner_steps must be positive");
  if (!(step_size > 0.0)) throw ConfigError("step_size must be positive");
  if (confidence < 0.0) throw ConfigError("confidence must be nonnegative");
  if (lambda1 < 0.0 || lambda2 < 0.0) throw ConfigError("lambda1/lambda2 must be nonnegative");
}

double margin_loss(const ActionScorer& policy, const Observation& obs, int clean_action, double confidence) {
  return evaluate_loss(policy, obs, MarginLoss{clean_action, confidence});
}

int unique_greedy_action(const ActionScorer& policy, const Observation& obs) {
  const Vec s = policy.score(obs);
  if (!s.allFinite()) throw NumericError("non-finite scores");
  const int best = argmax(s);
  for (int a = 0; a < s.size(); ++a)
    if (a != best && s[a] == s[best])
      throw TieBreakError("clean greedy action is tied between " + std::to_string(best) + " and " +
                          std::to_string(a));
  return best;
}

namespace {

Direction make_direction(Vec raw, Method method, const Observation& obs) {
  const double norm = raw.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw DegenerateDirectionError("direction has zero or non-finite norm");
  Direction d;
  d.vector = raw / norm;
  d.method = method;
  d.raw_norm = norm;
  d.source_state_hash = observation_digest(obs);
  return d;
}

Vec sign(const Vec& v) {
  return v.unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); });
}

// Shared by C&W (lambda1 = 0, lambda2 = 1) and ENR.
Vec solve_boundary(const ActionScorer& policy, const Observation& obs, const SolverConfig& cfg, double lambda1,
                   double lambda2, SolverTrace* trace) {
  cfg.validate();
  const int clean = unique_greedy_action(policy, obs);
  const MarginLoss loss{clean, cfg.confidence};
  const double prox = cfg.step_size * lambda1;

  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double c = cfg.c_init;
  Vec best;
  double best_norm = std::numeric_limits<double>::infinity();
  if (trace) {
    trace->clean_action = clean;
    trace->rounds.clear();
  }

  for (int round = 0; round < cfg.c_search_steps; ++round) {
    Vec delta = Vec::Zero(obs.size());
    SearchRound info{c, false, std::numeric_limits<double>::infinity()};
    const auto consider = [&](double margin) {
      if (margin > -cfg.confidence) return;
      const double n = delta.norm();
      if (!(n > 0.0)) return;
      info.success = true;
      info.best_norm = std::min(info.best_norm, n);
      if (n < best_norm) {
        best_norm = n;
        best = delta;
      }
    };
    for (int it = 0; it < cfg.inner_steps; ++it) {
      auto [margin, g] = loss_and_grad(policy, obs + delta, loss);
      consider(margin);
      delta -= cfg.step_size * (c * g + 2.0 * lambda2 * delta);
      if (prox > 0.0) delta = soft_threshold(delta, prox);
      if (!delta.allFinite()) throw NumericError("solver iterate became non-finite");
    }
    consider(evaluate_loss(policy, obs + delta, loss));
    if (trace) trace->rounds.push_back(info);

    if (info.success) {
      hi = std::min(hi, c);
      c = 0.5 * (lo + hi);
    } else {
      lo = std::max(lo, c);
      c = std::isinf(hi) ? c * 10.0 : 0.5 * (lo + hi);
    }
  }
  if (!std::isfinite(best_norm))
    throw BoundaryUnreachedError("no c in the search reached the decision boundary (last c = " + std::to_string(c) +
                                 ")");
  if (trace) trace->delta = best;
  return best;
}

}  // namespace

Direction fgsm_direction(const ActionScorer& policy, const Observation& obs, PNorm p_norm) {
  const int clean = unique_greedy_action(policy, obs);
  const Vec g = grad_input(policy, obs, MarginLoss{clean, 0.0});
  if (!(g.norm() > 0.0)) throw DegenerateDirectionError("margin gradient is zero");
  // Descending the margin is ascending the attack objective.
  Vec raw = p_norm == PNorm::L2 ? Vec(-g) : Vec(-sign(g));
  return make_direction(std::move(raw), Method::FGSM, obs);
}

Direction cw_direction(const ActionScorer& policy, const Observation& obs, const SolverConfig& cfg,
                       SolverTrace* trace) {
  return make_direction(solve_boundary(policy, obs, cfg, 0.0, 1.0, trace), Method::CW, obs);
}

Direction enr_direction(const ActionScorer& policy, const Observation& obs, const SolverConfig& cfg,
                        SolverTrace* trace) {
  return make_direction(solve_boundary(policy, obs, cfg, cfg.lambda1, cfg.lambda2, trace), Method::ENR, obs);
}

Direction gaussian_direction(int dim, Seed seed) {
  if (dim < 1) throw DomainError("gaussian direction needs a positive dimension");
  std::mt19937_64 rng(mix_seed(seed, 0x9a55));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec g(dim);
  for (int i = 0; i < dim; ++i) g[i] = normal(rng);
  Direction d;
  d.raw_norm = g.norm();
  d.vector = g / d.raw_norm;
  d.method = Method::Gaussian;
  return d;
}

Vec soft_threshold(const Vec& v, double width) {
  return v.unaryExpr([width](double x) {
    if (x > width) return x - width;
    if (x < -width) return x + width;
    return 0.0;
  });
}

namespace {
constexpr int kDirectionFormatVersion = 1;
}

void save_direction(const Direction& dir, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "hsdlab-direction";
  j["version"] = kDirectionFormatVersion;
  j["method"] = to_string(dir.method);
  j["source_mdp"] = dir.source_mdp;
  j["source_policy"] = dir.source_policy;
  j["source_state_hash"] = dir.source_state_hash;
  j["raw_norm"] = dir.raw_norm;
  j["dim"] = dir.vector.size();
  j["values"] = std::vector<double>(dir.vector.data(), dir.vector.data() + dir.vector.size());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write direction file " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw Error("failed writing direction file " + path.string());
}

Direction load_direction(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResolutionError("direction file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed direction file " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("format") != "hsdlab-direction") throw FormatError("not a direction file: " + path.string());
    if (j.at("version").get<int>() != kDirectionFormatVersion)
      throw VersionError("unsupported direction format version in " + path.string());
    const auto values = j.at("values").get<std::vector<double>>();
    if (static_cast<long>(values.size()) != j.at("dim").get<long>())
      throw ShapeError("direction dim does not match value count in " + path.string());
    Direction d;
    d.vector = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
    d.method = method_from_string(j.at("method").get<std::string>());
    d.source_mdp = j.at("source_mdp").get<std::string>();
    d.source_policy = j.at("source_policy").get<std::string>();
    d.source_state_hash = j.at("source_state_hash").get<std::string>();
    d.raw_norm = j.at("raw_norm").get<double>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("incomplete direction file " + path.string() + ": " + e.what());
  }
}

}  // namespace hsd
