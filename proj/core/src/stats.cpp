#include "hsdlab/stats.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hsdlab/errors.hpp"

namespace hsd {

Vec ActionShiftMatrix::p_control() const { return joint.rowwise().sum(); }

Vec ActionShiftMatrix::p_shift() const { return joint.colwise().sum().transpose(); }

ActionShiftMatrix tally_action_shift(const std::vector<std::pair<int, int>>& pairs, int action_count) {
  if (pairs.empty()) throw StateError("no states counted for action statistics");
  ActionShiftMatrix m;
  m.joint = Mat::Zero(action_count, action_count);
  for (const auto& [a, b] : pairs) {
    if (a < 0 || b < 0 || a >= action_count || b >= action_count) throw DomainError("action index out of range");
    m.joint(a, b) += 1.0;
  }
  m.states_counted = static_cast<long>(pairs.size());
  m.joint /= static_cast<double>(m.states_counted);
  return m;
}

std::vector<std::pair<int, int>> action_pairs(const std::vector<EpisodeRecord>& episodes, const ActionScorer& policy) {
  std::vector<std::pair<int, int>> pairs;
  for (const auto& e : episodes)
    for (const auto& st : e.steps) pairs.emplace_back(argmax(policy.score(st.clean_obs)), st.action);
  return pairs;
}

namespace {

Vec action_frequencies(const std::vector<EpisodeRecord>& episodes, int action_count) {
  Vec f = Vec::Zero(action_count);
  long n = 0;
  for (const auto& e : episodes)
    for (const auto& st : e.steps) {
      f[st.action] += 1.0;
      ++n;
    }
  if (n == 0) throw StateError("no states counted for action statistics");
  return f / static_cast<double>(n);
}

}  // namespace

ActionStats collect_action_stats(const RunSpec& spec, const Registry& registry, const RunOptions& options) {
  std::vector<EpisodeRecord> perturbed;
  ActionStats stats;
  stats.report = run_setting_traced(spec, registry, perturbed, options);
  const MdpSpec& mdp = registry.mdp(spec.target_mdp);
  const ActionScorer& policy = registry.policy(spec.target_policy);
  const int n = policy.action_count();
  stats.shift = tally_action_shift(action_pairs(perturbed, policy), n);
  stats.p_shift_direct = action_frequencies(perturbed, n);

  std::vector<EpisodeRecord> clean;
  for (Seed s : evaluation_seeds(spec.base_seed, spec.episodes)) clean.push_back(rollout(mdp, policy, s));
  stats.p_base = action_frequencies(clean, n);
  return stats;
}

double percentage_shift(const ActionShiftMatrix& matrix, const std::set<int>& targets) {
  double tau = 0.0;
  double rho = 0.0;
  const int n = matrix.action_count();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      tau += matrix.joint(a, b);
      if (targets.contains(b)) rho += matrix.joint(a, b);
    }
  if (!(tau > 0.0)) throw NoShiftError("no off-diagonal action shift mass");
  return rho / tau;
}

std::string action_set_label(const std::set<int>& targets) {
  std::vector<int> v(targets.begin(), targets.end());
  if (v.empty()) return "No actions";
  if (v.size() == 1) return "Action " + std::to_string(v[0]);
  std::string s = "Actions ";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) s += i + 1 == v.size() ? " and " : ", ";
    s += std::to_string(v[i]);
  }
  return s;
}

RunSpec cross_mdp_cell_spec(const std::vector<CrossMdpEntry>& suite, std::size_t row, std::size_t col,
                            const MethodSpec& method, int episodes, Seed seed) {
  const auto& target = suite.at(row);
  const auto& source = suite.at(col);
  RunSpec spec;
  spec.id = "cross-" + target.mdp_id + "-from-" + source.mdp_id;
  spec.setting = row == col ? SettingKind::EpisodeRandom : SettingKind::EnvRandom;
  spec.method = method;
  spec.source_mdp = source.mdp_id;
  spec.source_policy = source.policy_id;
  spec.target_mdp = target.mdp_id;
  spec.target_policy = target.policy_id;
  spec.kappa = target.kappa;
  spec.episodes = episodes;
  spec.base_seed = seed;
  return spec;
}

CrossMdpMatrix cross_mdp_matrix(const Registry& registry, const std::vector<CrossMdpEntry>& suite,
                                const MethodSpec& method, int episodes, Seed seed, const RunOptions& options) {
  if (suite.size() < 2) throw ConfigError("cross-MDP matrix needs at least two MDPs");
  const auto n = static_cast<Eigen::Index>(suite.size());
  CrossMdpMatrix m;
  m.impacts = Mat::Zero(n, n);
  m.sems = Mat::Zero(n, n);
  for (const auto& e : suite) m.mdp_ids.push_back(e.mdp_id);
  for (std::size_t i = 0; i < suite.size(); ++i)
    for (std::size_t j = 0; j < suite.size(); ++j) {
      try {
        const ImpactReport r = run_setting(cross_mdp_cell_spec(suite, i, j, method, episodes, seed), registry, options);
        m.impacts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.impact;
        m.sems(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r.sem;
      } catch (const Error& e) {
        throw Error("cross-MDP cell (" + suite[i].mdp_id + ", " + suite[j].mdp_id + "): " + e.what());
      }
    }
  return m;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw DomainError("cosine similarity needs equal lengths");
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DomainError("cosine similarity of a zero vector");
  return a.dot(b) / (na * nb);
}

Vec mean_observation(const MdpSpec& mdp, const ActionScorer& policy, const std::vector<Seed>& seeds) {
  Vec sum = Vec::Zero(mdp.obs_dim());
  long n = 0;
  for (Seed s : seeds) {
    const EpisodeRecord rec = rollout(mdp, policy, s);
    for (const auto& st : rec.steps) {
      sum += st.clean_obs;
      ++n;
    }
  }
  if (n == 0) throw StateError("no observations collected");
  return sum / static_cast<double>(n);
}

double similarity_proxy(const MdpSpec& mdp_a, const MdpSpec& mdp_b, const ActionScorer& policy_a,
                        const ActionScorer& policy_b, const std::vector<Seed>& seeds) {
  if (mdp_a.obs_dim() != mdp_b.obs_dim()) throw DomainError("similarity proxy needs equal observation dimensions");
  return cosine_similarity(mean_observation(mdp_a, policy_a, seeds), mean_observation(mdp_b, policy_b, seeds));
}

namespace {

std::string fmt_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_action_stats_csv(const ActionStats& stats, const std::filesystem::path& path) {
  auto out = open_out(path);
  const Vec control = stats.shift.p_control();
  const Vec shift = stats.shift.p_shift();
  out << "action,P_base,P_control,P_shift\n";
  for (int a = 0; a < stats.shift.action_count(); ++a)
    out << a << ',' << fmt_value(stats.p_base[a]) << ',' << fmt_value(control[a]) << ',' << fmt_value(shift[a]) << '\n';
}

void write_matrix_csv(const Mat& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels, const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(row_labels.size()) != m.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != m.cols())
    throw DomainError("label counts do not match the matrix shape");
  auto out = open_out(path);
  out << "row";
  for (const auto& c : col_labels) out << ',' << c;
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << row_labels[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << fmt_value(m(i, j));
    out << '\n';
  }
}

}  // namespace hsd
