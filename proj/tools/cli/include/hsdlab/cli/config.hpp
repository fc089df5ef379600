#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsdlab/envs.hpp"
#include "hsdlab/harness.hpp"
#include "hsdlab/stats.hpp"
#include "hsdlab/theory.hpp"
#include "hsdlab/train.hpp"

namespace hsd::cli {

struct PolicyEntry {
  std::string id;
  std::string mdp;
  TrainConfig train;
  nlohmann::json raw;  // the entry as written, for its artifact digest
};

struct DirectionEntry {
  std::string id;
  MethodSpec method;
  std::string source_policy;
  std::string source_mdp;
  Seed seed = 0;
};

/// A run whose kappa may be resolved from a stored calibration.
struct RunEntry {
  RunSpec spec;
  bool kappa_calibrated = false;
};

struct CalibrationEntry {
  CalibrationOptions options;
  int episodes = 10;
  Seed episode_seed = 0;
};

enum class StatKind { ActionShift, CrossMdp, TheorySweep, Similarity };

struct StatEntry {
  std::string id;
  StatKind kind = StatKind::ActionShift;
  // ActionShift
  std::string run;
  std::vector<std::set<int>> target_sets;
  // CrossMdp and Similarity
  std::vector<CrossMdpEntry> entries;
  MethodSpec method;
  int episodes = 10;
  Seed seed = 0;
  bool kappa_calibrated = false;
  // TheorySweep
  InstanceParams theory;
  std::vector<int> dims;
  int trials = 20;
};

struct ExperimentConfig {
  std::vector<MdpSpec> suite;
  std::vector<PolicyEntry> policies;
  std::vector<DirectionEntry> directions;
  std::vector<RunEntry> runs;
  std::vector<StatEntry> stats;
  CalibrationEntry calibration;
  InstanceParams theory;
  std::vector<int> theory_dims{256, 1024, 4096};
  int theory_trials = 20;
  std::filesystem::path output_dir;
  Seed global_seed = 0;
  std::string digest;  // SHA-256 of the canonical JSON after overrides

  const MdpSpec& mdp(const std::string& id) const;
  const PolicyEntry& policy(const std::string& id) const;
  const DirectionEntry& direction(const std::string& id) const;
  const RunEntry& run(const std::string& id) const;
};

struct LoadOptions {
  std::optional<Seed> seed_override;
  std::optional<std::filesystem::path> output_override;
};

/// Parses and validates the config; throws ConfigError or ResolutionError.
/// Relative output_dir values resolve against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path, const LoadOptions& opts = {});
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir,
                              const LoadOptions& opts = {});

/// Digest of one policy's training inputs (entry, mdp spec, global seed).
std::string policy_artifact_digest(const ExperimentConfig& cfg, const PolicyEntry& entry);

}  // namespace hsd::cli
