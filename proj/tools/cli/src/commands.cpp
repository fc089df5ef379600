#include "hsdlab/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "hsdlab/digest.hpp"
#include "hsdlab/errors.hpp"
#include "hsdlab/heatmap.hpp"
#include "hsdlab/policy_io.hpp"
#include "hsdlab/stats.hpp"

namespace hsd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kCleanScoreEpisodes = 20;

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ResolutionError("file not found: " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

json versions_json() {
  return {{"hsdlab", kToolVersion}, {"policy_format", kPolicyFormatVersion}};
}

std::vector<std::string> action_labels(int k) {
  std::vector<std::string> labels;
  for (int a = 0; a < k; ++a) labels.push_back("a" + std::to_string(a));
  return labels;
}

json run_report_json(const RunEntry& run, const RunSpec& spec, const ImpactReport& rep, const std::string& digest) {
  json prov = json::array();
  for (const auto& p : rep.provenance)
    prov.push_back({{"source_seed", p.source_seed},
                    {"source_state_hash", p.source_state_hash},
                    {"attempts", p.attempts},
                    {"raw_norm", p.raw_norm},
                    {"solver_failures", p.solver_failures}});
  return {{"config_digest", digest},
          {"versions", versions_json()},
          {"run_id", spec.id},
          {"setting", to_string(spec.setting)},
          {"method", to_string(spec.method.method)},
          {"p_norm", to_string(spec.method.p_norm)},
          {"source_mdp", spec.source_mdp},
          {"target_mdp", spec.target_mdp},
          {"source_policy", spec.source_policy},
          {"target_policy", spec.target_policy},
          {"kappa", spec.kappa},
          {"kappa_calibrated", run.kappa_calibrated},
          {"episodes", spec.episodes},
          {"base_seed", spec.base_seed},
          {"direction", spec.direction_id ? json(*spec.direction_id) : json(nullptr)},
          {"reuse_direction", spec.reuse_direction},
          {"clip", spec.clip},
          {"mean_score", rep.mean_score},
          {"impact", rep.impact},
          {"sem", rep.sem},
          {"score_max", rep.score_max},
          {"score_min", rep.score_min},
          {"per_episode_scores", rep.per_episode_scores},
          {"provenance", prov}};
}

/// Position of a (setting, method) row in the results table.
int row_rank(const std::string& setting, const std::string& method) {
  return static_cast<int>(setting_from_string(setting)) * 16 + static_cast<int>(method_from_string(method));
}

std::string results_csv(const json& table, const std::vector<MdpSpec>& suite) {
  std::vector<std::pair<int, std::string>> rows;
  for (const auto& [key, _] : table.at("rows").items()) {
    const auto& r = table.at("rows").at(key);
    rows.emplace_back(row_rank(r.at("setting"), r.at("method")), key);
  }
  std::sort(rows.begin(), rows.end());
  std::ostringstream csv;
  csv << "setting,method";
  for (const auto& m : suite) csv << ',' << m.id;
  csv << '\n';
  for (const auto& [_, key] : rows) {
    const auto& r = table.at("rows").at(key);
    csv << r.at("setting").get<std::string>() << ',' << r.at("method").get<std::string>();
    for (const auto& m : suite) {
      csv << ',';
      if (r.at("cells").contains(m.id)) csv << r.at("cells").at(m.id).at("cell").get<std::string>();
    }
    csv << '\n';
  }
  return csv.str();
}

void add_cell(json& table, const json& run_report) {
  const std::string setting = run_report.at("setting");
  const std::string method = run_report.at("method");
  json& row = table["rows"][setting + "/" + method];
  row["setting"] = setting;
  row["method"] = method;
  row["cells"][run_report.at("target_mdp").get<std::string>()] = {
      {"cell", format_cell(run_report.at("impact").get<double>(), run_report.at("sem").get<double>())},
      {"run", run_report.at("run_id")}};
}

json empty_table(const std::string& digest) { return {{"config_digest", digest}, {"rows", json::object()}}; }

}  // namespace

std::string format_cell(double impact, double sem) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f±%.3f", impact, sem);
  return buf;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const FormatError*>(&e) ||
      dynamic_cast<const DomainError*>(&e))
    return 2;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const StateError*>(&e)) return 3;
  if (dynamic_cast<const SolverError*>(&e) || dynamic_cast<const CalibrationError*>(&e) ||
      dynamic_cast<const InfeasibleError*>(&e))
    return 4;
  return 1;
}

// ---- ArtifactWriter

void ArtifactWriter::write(const fs::path& rel, const std::string& bytes) {
  const fs::path p = root_ / rel;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << bytes;
  if (!out) throw Error("failed writing " + p.string());
  written_[rel.generic_string()] = sha256_hex(bytes);
}

void ArtifactWriter::write_json(const fs::path& rel, const json& j) { write(rel, j.dump(2) + "\n"); }

void ArtifactWriter::record(const fs::path& rel) { written_[rel.generic_string()] = sha256_hex(read_bytes(root_ / rel)); }

// ---- Commands

Commands::Commands(ExperimentConfig cfg, CommandOptions opts, std::ostream& out, std::ostream& err)
    : cfg_(std::move(cfg)), opts_(opts), out_(out), err_(err), writer_(cfg_.output_dir) {
  if (opts_.jobs < 1) throw ConfigError("--jobs must be at least 1");
}

fs::path Commands::policy_file(const std::string& id) { return fs::path("policies") / (id + ".hsdp"); }
fs::path Commands::direction_file(const std::string& id) { return fs::path("directions") / (id + ".json"); }
fs::path Commands::calibration_file(const std::string& policy, const std::string& mdp) {
  return fs::path("calibration") / (policy + "@" + mdp + ".json");
}
fs::path Commands::run_file(const std::string& id) { return fs::path("runs") / (id + ".json"); }

void Commands::train(const std::vector<std::string>& ids) {
  std::vector<const PolicyEntry*> entries;
  if (ids.empty())
    for (const auto& p : cfg_.policies) entries.push_back(&p);
  for (const auto& id : ids) entries.push_back(&cfg_.policy(id));

  for (const PolicyEntry* e : entries) {
    const fs::path rel = policy_file(e->id);
    const std::string digest = policy_artifact_digest(cfg_, *e);
    if (!opts_.force && fs::exists(writer_.path(rel))) {
      try {
        if (load_policy(writer_.path(rel)).metadata.config_digest == digest) {
          out_ << "policy '" << e->id << "' is up to date, skipping (use --force to retrain)\n";
          continue;
        }
      } catch (const FormatError&) {
        // unreadable file: retrain over it
      }
    }
    const MdpSpec& mdp = cfg_.mdp(e->mdp);
    out_ << "training policy '" << e->id << "' on '" << mdp.id << "' (" << e->train.total_steps << " steps)\n";
    QNetwork net = [&] {
      try {
        return e->train.adversarial ? train_adversarial(mdp, e->train) : train_ddqn(mdp, e->train);
      } catch (...) {
        err_ << "policy '" << e->id << "': training failed\n";
        throw;
      }
    }();
    fs::create_directories(writer_.path(rel).parent_path());
    save_policy(net, {e->train.seed, mdp.id, digest}, writer_.path(rel));
    writer_.record(rel);

    const auto seeds = evaluation_seeds(mix_seed(e->train.seed, 0xc1ea), kCleanScoreEpisodes);
    const double clean = score_max(mdp, net, seeds);
    writer_.write_json(fs::path("policies") / (e->id + ".json"),
                       {{"policy", e->id},
                        {"mdp", mdp.id},
                        {"arch", to_string(e->train.head)},
                        {"adversarial", e->train.adversarial},
                        {"training_seed", e->train.seed},
                        {"artifact_digest", digest},
                        {"config_digest", cfg_.digest},
                        {"clean_score", clean},
                        {"clean_episodes", kCleanScoreEpisodes},
                        {"versions", versions_json()}});
    out_ << "policy '" << e->id << "': clean score " << num(clean) << " over " << kCleanScoreEpisodes
         << " episodes\n";
  }
}

void Commands::load_policy_into(Registry& reg, const std::string& policy_id) const {
  if (reg.has_policy(policy_id)) return;
  const PolicyEntry& e = cfg_.policy(policy_id);
  const fs::path p = writer_.path(policy_file(policy_id));
  if (!fs::exists(p)) throw ResolutionError("policy '" + policy_id + "' has not been trained (run: hsdlab train " + policy_id + ")");
  LoadedPolicy loaded = load_policy(p, e.train.head);
  if (loaded.metadata.config_digest != policy_artifact_digest(cfg_, e))
    throw ResolutionError("policy file for '" + policy_id + "' is stale (run: hsdlab train " + policy_id + ")");
  reg.add_policy(policy_id, std::make_shared<QNetwork>(std::move(loaded.network)));
}

Registry Commands::registry_for(const std::vector<std::string>& policy_ids,
                                const std::vector<std::string>& direction_ids) const {
  Registry reg;
  for (const auto& m : cfg_.suite) reg.add_mdp(m);
  for (const auto& id : policy_ids) load_policy_into(reg, id);
  for (const auto& id : direction_ids) {
    cfg_.direction(id);
    const fs::path p = writer_.path(direction_file(id));
    if (!fs::exists(p)) throw ResolutionError("direction '" + id + "' has not been computed (run: hsdlab direction " + id + ")");
    reg.add_direction(id, load_direction(p));
  }
  return reg;
}

void Commands::direction(const std::vector<std::string>& ids) {
  std::vector<const DirectionEntry*> entries;
  if (ids.empty())
    for (const auto& d : cfg_.directions) entries.push_back(&d);
  for (const auto& id : ids) entries.push_back(&cfg_.direction(id));

  for (const DirectionEntry* e : entries) {
    const Registry reg = registry_for({e->source_policy}, {});
    EpisodeProvenance prov;
    Direction d = [&] {
      try {
        return draw_source_direction(cfg_.mdp(e->source_mdp), reg.policy(e->source_policy), e->method, e->seed, 0, prov);
      } catch (const SolverError&) {
        err_ << "direction '" << e->id << "': solver failed on " << kSourceAttempts << " sampled states\n";
        throw;
      }
    }();
    d.source_mdp = e->source_mdp;
    d.source_policy = e->source_policy;
    const fs::path rel = direction_file(e->id);
    fs::create_directories(writer_.path(rel).parent_path());
    save_direction(d, writer_.path(rel));
    json j = read_json(writer_.path(rel));
    j["direction_id"] = e->id;
    j["config_digest"] = cfg_.digest;
    j["seed"] = e->seed;
    j["source_seed"] = prov.source_seed;
    j["attempts"] = prov.attempts;
    writer_.write(rel, j.dump(1) + "\n");
    out_ << "direction '" << e->id << "': " << to_string(d.method) << " from '" << d.source_policy << "' on '"
         << d.source_mdp << "', raw norm " << num(d.raw_norm) << ", " << prov.attempts << " attempt(s)\n";
  }
}

namespace {

std::string calibration_input_digest(const ExperimentConfig& cfg, const std::string& policy, const std::string& mdp) {
  const auto& o = cfg.calibration.options;
  json j = {{"policy", policy_artifact_digest(cfg, cfg.policy(policy))},
            {"mdp", mdp},
            {"threshold", o.threshold},
            {"directions", o.directions},
            {"grid_base", o.grid_base},
            {"grid_points", o.grid_points},
            {"seed", o.seed},
            {"episodes", cfg.calibration.episodes},
            {"episode_seed", cfg.calibration.episode_seed}};
  return sha256_hex(j.dump());
}

}  // namespace

void Commands::calibrate(const std::vector<std::string>& policy_ids) {
  std::set<std::pair<std::string, std::string>> pairs;
  const auto wanted = [&](const std::string& pid) {
    return policy_ids.empty() || std::find(policy_ids.begin(), policy_ids.end(), pid) != policy_ids.end();
  };
  for (const auto& id : policy_ids) pairs.emplace(id, cfg_.policy(id).mdp);
  for (const auto& r : cfg_.runs)
    if (r.kappa_calibrated && wanted(r.spec.target_policy)) pairs.emplace(r.spec.target_policy, r.spec.target_mdp);
  for (const auto& st : cfg_.stats)
    if (st.kind == StatKind::CrossMdp)
      for (const auto& ce : st.entries)
        if (ce.kappa < 0 && wanted(ce.policy_id)) pairs.emplace(ce.policy_id, ce.mdp_id);
  if (pairs.empty())
    for (const auto& p : cfg_.policies) pairs.emplace(p.id, p.mdp);

  const auto seeds = evaluation_seeds(cfg_.calibration.episode_seed, cfg_.calibration.episodes);
  for (const auto& [pid, mid] : pairs) {
    const Registry reg = registry_for({pid}, {});
    const CalibrationResult res = calibrate_kappa(cfg_.mdp(mid), reg.policy(pid), seeds, cfg_.calibration.options);
    json grid = json::array();
    for (const auto& g : res.grid) grid.push_back({{"kappa", g.kappa}, {"gaussian_impact", g.gaussian_impact}});
    writer_.write_json(calibration_file(pid, mid), {{"policy", pid},
                                                    {"mdp", mid},
                                                    {"kappa", res.kappa},
                                                    {"threshold", cfg_.calibration.options.threshold},
                                                    {"grid", grid},
                                                    {"input_digest", calibration_input_digest(cfg_, pid, mid)},
                                                    {"config_digest", cfg_.digest},
                                                    {"versions", versions_json()}});
    out_ << "calibrated '" << pid << "' on '" << mid << "': kappa " << num(res.kappa) << "\n";
  }
}

double Commands::calibrated_kappa(const std::string& policy_id, const std::string& mdp_id) const {
  const fs::path p = writer_.path(calibration_file(policy_id, mdp_id));
  if (!fs::exists(p))
    throw ResolutionError("no calibration for policy '" + policy_id + "' on mdp '" + mdp_id +
                          "' (run: hsdlab calibrate " + policy_id + ")");
  const json j = read_json(p);
  if (j.value("input_digest", "") != calibration_input_digest(cfg_, policy_id, mdp_id))
    throw ResolutionError("calibration for policy '" + policy_id + "' on mdp '" + mdp_id + "' is stale");
  return j.at("kappa").get<double>();
}

RunSpec Commands::resolved_spec(const RunEntry& run) const {
  RunSpec spec = run.spec;
  if (run.kappa_calibrated) spec.kappa = calibrated_kappa(spec.target_policy, spec.target_mdp);
  return spec;
}

void Commands::write_results_csv(const json& table) {
  writer_.write_json("results_table.json", table);
  writer_.write("results.csv", results_csv(table, cfg_.suite));
}

void Commands::update_results_table(const RunEntry& run) {
  json table = empty_table(cfg_.digest);
  const fs::path p = writer_.path("results_table.json");
  if (fs::exists(p)) {
    json old = read_json(p);
    if (old.value("config_digest", "") == cfg_.digest) table = std::move(old);
    else err_ << "note: results table was built from another config; starting a new one\n";
  }
  add_cell(table, read_json(writer_.path(run_file(run.spec.id))));
  write_results_csv(table);
}

void Commands::evaluate(const std::vector<std::string>& ids) {
  std::vector<const RunEntry*> entries;
  if (ids.empty())
    for (const auto& r : cfg_.runs) entries.push_back(&r);
  for (const auto& id : ids) entries.push_back(&cfg_.run(id));

  for (const RunEntry* r : entries) {
    try {
      const RunSpec spec = resolved_spec(*r);
      std::vector<std::string> dirs;
      if (spec.direction_id) dirs.push_back(*spec.direction_id);
      const Registry reg = registry_for({spec.source_policy, spec.target_policy}, dirs);
      const ImpactReport rep = run_setting(spec, reg, RunOptions{opts_.jobs});
      writer_.write_json(run_file(spec.id), run_report_json(*r, spec, rep, cfg_.digest));
      update_results_table(*r);
      out_ << "run '" << spec.id << "': impact " << format_cell(rep.impact, rep.sem) << " (mean score "
           << num(rep.mean_score) << ", kappa " << num(spec.kappa) << ")\n";
    } catch (...) {
      err_ << "run '" << r->spec.id << "' failed\n";
      throw;
    }
  }
}

void Commands::theory() {
  const InstanceParams& params = cfg_.theory;
  const LinearInstance inst = build_instance(params);
  TheoryReport rep = proposition_rewards(inst, cfg_.theory_trials, mix_seed(params.seed, 1));
  rep.dims_swept = cfg_.theory_dims;
  const auto sweep = dimension_sweep(params, cfg_.theory_dims, cfg_.theory_trials, params.seed);

  json j = rep;
  j["config_digest"] = cfg_.digest;
  j["versions"] = versions_json();
  j["params"] = {{"n", params.n},         {"num_actions", params.num_actions}, {"alpha", params.alpha},
                 {"beta", params.beta},   {"c_gap", params.c_gap},             {"d_gap", params.d_gap},
                 {"s1_size", params.s1_size}, {"orthogonalize", params.orthogonalize}, {"seed", params.seed}};
  j["restarts_used"] = inst.restarts_used;
  j["target_action"] = inst.target_action_b;
  j["proof_t"] = proof_t(inst);
  writer_.write_json("theory/report.json", j);

  std::ostringstream csv;
  csv << "n,forced_fraction,survival\n";
  for (const auto& row : sweep) csv << row.n << ',' << num(row.forced_fraction) << ',' << num(row.survival) << '\n';
  writer_.write("theory/sweep.csv", csv.str());

  out_ << "theory: epsilon " << num(rep.epsilon) << ", forced fraction " << num(rep.forced_fraction)
       << ", random survival " << num(rep.random_survival) << " at n=" << params.n << "\n";
  for (const auto& row : sweep)
    out_ << "  n=" << row.n << " forced " << num(row.forced_fraction) << " survival " << num(row.survival) << "\n";
}

void Commands::report() {
  std::vector<std::string> warnings;
  std::vector<std::string> missing_runs;
  std::vector<std::string> stale_runs;
  std::vector<json> reports;
  json run_status = json::array();

  for (const auto& r : cfg_.runs) {
    const fs::path p = writer_.path(run_file(r.spec.id));
    if (!fs::exists(p)) {
      missing_runs.push_back(r.spec.id);
      run_status.push_back({{"id", r.spec.id}, {"status", "missing"}});
      continue;
    }
    json rep = read_json(p);
    if (rep.value("config_digest", "") != cfg_.digest) stale_runs.push_back(r.spec.id);
    run_status.push_back({{"id", r.spec.id}, {"status", "complete"}});
    reports.push_back(std::move(rep));
  }
  if (!stale_runs.empty()) {
    std::string ids;
    for (const auto& id : stale_runs) ids += (ids.empty() ? "" : ", ") + id;
    throw ConfigError("run reports were produced under a different config digest: " + ids +
                      " (re-run hsdlab evaluate)");
  }
  if (cfg_.runs.empty()) warnings.push_back("config lists no runs");
  for (const auto& id : missing_runs) warnings.push_back("run '" + id + "' has no report yet");

  if (!reports.empty()) {
    json table = empty_table(cfg_.digest);
    std::ostringstream runs_csv;
    runs_csv << "run,setting,method,source_mdp,target_mdp,source_policy,target_policy,kappa,episodes,impact,sem,mean_score\n";
    for (const auto& rep : reports) {
      add_cell(table, rep);
      runs_csv << rep.at("run_id").get<std::string>() << ',' << rep.at("setting").get<std::string>() << ','
               << rep.at("method").get<std::string>() << ',' << rep.at("source_mdp").get<std::string>() << ','
               << rep.at("target_mdp").get<std::string>() << ',' << rep.at("source_policy").get<std::string>() << ','
               << rep.at("target_policy").get<std::string>() << ',' << num(rep.at("kappa").get<double>()) << ','
               << rep.at("episodes").get<int>() << ',' << num(rep.at("impact").get<double>()) << ','
               << num(rep.at("sem").get<double>()) << ',' << num(rep.at("mean_score").get<double>()) << '\n';
    }
    writer_.write("reports/results.csv", results_csv(table, cfg_.suite));
    writer_.write("reports/runs.csv", runs_csv.str());
  }

  std::vector<std::string> missing_stats;
  const RunOptions ropts{opts_.jobs};
  for (const auto& st : cfg_.stats) {
    const fs::path base = fs::path("reports") / st.id;
    try {
      switch (st.kind) {
        case StatKind::ActionShift: {
          const RunEntry& run = cfg_.run(st.run);
          const RunSpec spec = resolved_spec(run);
          std::vector<std::string> dirs;
          if (spec.direction_id) dirs.push_back(*spec.direction_id);
          const Registry reg = registry_for({spec.source_policy, spec.target_policy}, dirs);
          const ActionStats stats = collect_action_stats(spec, reg, ropts);
          const int k = stats.shift.action_count();
          const fs::path bars = base.string() + "_actions.csv";
          fs::create_directories(writer_.path(bars).parent_path());
          write_action_stats_csv(stats, writer_.path(bars));
          writer_.record(bars);
          const auto labels = action_labels(k);
          writer_.write(base.string() + "_joint.svg",
                        heatmap_svg(stats.shift.joint, labels, labels, "P_shift(a, b): " + run.spec.id));
          auto targets = st.target_sets;
          if (targets.empty())
            for (int a = 0; a < k; ++a) targets.push_back({a});
          std::ostringstream csv;
          csv << "targets,percentage_shift\n";
          for (const auto& t : targets) {
            csv << '"' << action_set_label(t) << "\",";
            try {
              csv << num(percentage_shift(stats.shift, t));
            } catch (const NoShiftError&) {
              csv << "undefined";
            }
            csv << '\n';
          }
          writer_.write(base.string() + "_percentage_shift.csv", csv.str());
          break;
        }
        case StatKind::CrossMdp: {
          std::vector<CrossMdpEntry> entries = st.entries;
          std::vector<std::string> pids;
          for (auto& ce : entries) {
            if (ce.kappa < 0) ce.kappa = calibrated_kappa(ce.policy_id, ce.mdp_id);
            pids.push_back(ce.policy_id);
          }
          const Registry reg = registry_for(pids, {});
          const CrossMdpMatrix m = cross_mdp_matrix(reg, entries, st.method, st.episodes, st.seed, ropts);
          const fs::path csv = base.string() + "_matrix.csv";
          const fs::path sem_csv = base.string() + "_sem.csv";
          fs::create_directories(writer_.path(csv).parent_path());
          write_matrix_csv(m.impacts, m.mdp_ids, m.mdp_ids, writer_.path(csv));
          writer_.record(csv);
          write_matrix_csv(m.sems, m.mdp_ids, m.mdp_ids, writer_.path(sem_csv));
          writer_.record(sem_csv);
          writer_.write(base.string() + "_matrix.svg",
                        heatmap_svg(m.impacts, m.mdp_ids, m.mdp_ids, "impact, rows = target, cols = source"));
          break;
        }
        case StatKind::Similarity: {
          std::vector<std::string> pids;
          std::vector<std::string> labels;
          for (const auto& ce : st.entries) {
            pids.push_back(ce.policy_id);
            labels.push_back(ce.mdp_id);
          }
          const Registry reg = registry_for(pids, {});
          const auto seeds = evaluation_seeds(st.seed, st.episodes);
          const auto n = static_cast<Eigen::Index>(st.entries.size());
          Mat sim(n, n);
          for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
              const auto& a = st.entries[static_cast<std::size_t>(i)];
              const auto& b = st.entries[static_cast<std::size_t>(j)];
              sim(i, j) = similarity_proxy(reg.mdp(a.mdp_id), reg.mdp(b.mdp_id), reg.policy(a.policy_id),
                                           reg.policy(b.policy_id), seeds);
            }
          const fs::path csv = base.string() + "_similarity.csv";
          fs::create_directories(writer_.path(csv).parent_path());
          write_matrix_csv(sim, labels, labels, writer_.path(csv));
          writer_.record(csv);
          writer_.write(base.string() + "_similarity.svg", heatmap_svg(sim, labels, labels, "mean-state cosine"));
          break;
        }
        case StatKind::TheorySweep: {
          const auto sweep = dimension_sweep(st.theory, st.dims, st.trials, st.theory.seed);
          std::ostringstream csv;
          csv << "n,forced_fraction,survival\n";
          for (const auto& row : sweep)
            csv << row.n << ',' << num(row.forced_fraction) << ',' << num(row.survival) << '\n';
          writer_.write(base.string() + "_sweep.csv", csv.str());
          break;
        }
      }
    } catch (const ResolutionError& e) {
      missing_stats.push_back(st.id);
      warnings.push_back("stat '" + st.id + "' skipped: " + e.what());
    }
  }

  json artifacts = json::array();
  for (const auto& [path, sha] : writer_.written()) artifacts.push_back({{"path", path}, {"sha256", sha}});
  const json manifest = {{"config_digest", cfg_.digest},     {"versions", versions_json()},
                         {"artifacts", artifacts},           {"runs", run_status},
                         {"missing_runs", missing_runs},     {"missing_stats", missing_stats},
                         {"warnings", warnings}};
  // Not routed through the writer: the manifest does not list itself.
  fs::create_directories(cfg_.output_dir);
  std::ofstream out(cfg_.output_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw Error("failed writing manifest");

  for (const auto& w : warnings) err_ << "warning: " << w << "\n";
  out_ << "report: " << artifacts.size() << " artifact(s), " << missing_runs.size() << " missing run(s)\n";
}

}  // namespace hsd::cli
