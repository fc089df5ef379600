#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsdlab/cli/config.hpp"

namespace hsd::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct CommandOptions {
  bool force = false;
  int jobs = 1;
};

/// Writes artifact files under the output directory and remembers what it wrote.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {}

  /// `rel` is relative to the output directory. Rewriting a path replaces its entry.
  void write(const std::filesystem::path& rel, const std::string& bytes);
  void write_json(const std::filesystem::path& rel, const nlohmann::json& j);
  /// Records a file some other routine already wrote at `rel`.
  void record(const std::filesystem::path& rel);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path(const std::filesystem::path& rel) const { return root_ / rel; }
  /// Relative path -> sha256 of the bytes written.
  const std::map<std::string, std::string>& written() const { return written_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> written_;
};

class Commands {
 public:
  Commands(ExperimentConfig cfg, CommandOptions opts, std::ostream& out, std::ostream& err);

  /// Each takes entry ids; an empty list means every entry of that kind.
  void train(const std::vector<std::string>& ids);
  void direction(const std::vector<std::string>& ids);
  void calibrate(const std::vector<std::string>& policy_ids);
  void evaluate(const std::vector<std::string>& ids);
  void report();
  void theory();

  const ExperimentConfig& config() const { return cfg_; }

  // Artifact locations, relative to the output directory.
  static std::filesystem::path policy_file(const std::string& id);
  static std::filesystem::path direction_file(const std::string& id);
  static std::filesystem::path calibration_file(const std::string& policy, const std::string& mdp);
  static std::filesystem::path run_file(const std::string& id);

 private:
  Registry registry_for(const std::vector<std::string>& policy_ids, const std::vector<std::string>& direction_ids) const;
  void load_policy_into(Registry& reg, const std::string& policy_id) const;
  double calibrated_kappa(const std::string& policy_id, const std::string& mdp_id) const;
  RunSpec resolved_spec(const RunEntry& run) const;
  void update_results_table(const RunEntry& run);
  void write_results_csv(const nlohmann::json& table);

  ExperimentConfig cfg_;
  CommandOptions opts_;
  std::ostream& out_;
  std::ostream& err_;
  ArtifactWriter writer_;
};

/// "0.764±0.022"
std::string format_cell(double impact, double sem);

/// Maps an exception to the documented exit code.
int exit_code_for(const std::exception& e);

}  // namespace hsd::cli
