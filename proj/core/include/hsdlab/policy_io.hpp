#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "hsdlab/policy.hpp"

namespace hsd {

inline constexpr std::uint32_t kPolicyFormatVersion = 1;

/// Provenance carried alongside the weights.
struct PolicyMetadata {
  Seed training_seed = 0;
  std::string source_mdp;
  std::string config_digest;
};

struct LoadedPolicy {
  QNetwork network;
  PolicyMetadata metadata;
};

/// Layout: "HSDPOLCY", u32 version, u64 header length, JSON header,
/// u64 parameter count, little-endian float64 parameters (row-major, per layer
/// weight then bias), then SHA-256 of everything before it.
void save_policy(const QNetwork& policy, const PolicyMetadata& meta, const std::filesystem::path& path);

/// Throws ResolutionError (missing), ChecksumError (corrupt or truncated),
/// VersionError, ShapeError (header inconsistent or head mismatch).
LoadedPolicy load_policy(const std::filesystem::path& path, std::optional<HeadKind> expected_head = std::nullopt);

}  // namespace hsd
