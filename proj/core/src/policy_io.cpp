#include "hsdlab/policy_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "hsdlab/digest.hpp"
#include "hsdlab/errors.hpp"

namespace hsd {

namespace {

constexpr char kMagic[8] = {'H', 'S', 'D', 'P', 'O', 'L', 'C', 'Y'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  auto raw = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ChecksumError("policy file truncated");
  std::array<std::uint8_t, sizeof(T)> raw;
  std::memcpy(raw.data(), in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  pos += sizeof(T);
  return std::bit_cast<T>(raw);
}

}  // namespace

void save_policy(const QNetwork& policy, const PolicyMetadata& meta, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = "hsdlab-policy";
  header["kind"] = "qnet";
  header["arch_id"] = policy.arch_id();
  header["head"] = to_string(policy.head());
  header["action_count"] = policy.action_count();
  header["layer_shapes"] = policy.layer_shapes();
  header["training_seed"] = meta.training_seed;
  header["source_mdp"] = meta.source_mdp;
  header["config_digest"] = meta.config_digest;
  const std::string header_text = header.dump();

  std::vector<std::uint8_t> bytes(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(bytes, kPolicyFormatVersion);
  put<std::uint64_t>(bytes, header_text.size());
  bytes.insert(bytes.end(), header_text.begin(), header_text.end());
  put<std::uint64_t>(bytes, policy.parameter_count());
  for (const auto& layer : policy.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put<double>(bytes, layer.weight(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put<double>(bytes, layer.bias[i]);
  }
  const Sha256 digest = sha256(bytes);
  bytes.insert(bytes.end(), digest.begin(), digest.end());

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

LoadedPolicy load_policy(const std::filesystem::path& path, std::optional<HeadKind> expected_head) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResolutionError("policy file not found: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < sizeof(kMagic) + 32) throw ChecksumError("policy file truncated: " + path.string());
  const std::size_t body = bytes.size() - 32;
  const Sha256 digest = sha256(std::span(bytes.data(), body));
  if (std::memcmp(digest.data(), bytes.data() + body, 32) != 0)
    throw ChecksumError("policy checksum mismatch: " + path.string());
  bytes.resize(body);

  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("not a policy file: " + path.string());
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kPolicyFormatVersion)
    throw VersionError("policy format version " + std::to_string(version) + ", expected " +
                       std::to_string(kPolicyFormatVersion));
  const auto header_len = get<std::uint64_t>(bytes, pos);
  if (pos + header_len > bytes.size()) throw ChecksumError("policy header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    pos += header_len;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad policy header: ") + e.what());
  }

  LoadedPolicy result;
  std::vector<std::pair<int, int>> shapes;
  HeadKind head;
  int actions;
  try {
    shapes = header.at("layer_shapes").get<std::vector<std::pair<int, int>>>();
    head = head_kind_from_string(header.at("head").get<std::string>());
    actions = header.at("action_count").get<int>();
    result.metadata.training_seed = header.at("training_seed").get<Seed>();
    result.metadata.source_mdp = header.at("source_mdp").get<std::string>();
    result.metadata.config_digest = header.at("config_digest").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad policy header: ") + e.what());
  }
  if (expected_head && *expected_head != head)
    throw ShapeError("policy head is " + to_string(head) + ", expected " + to_string(*expected_head));

  const auto count = get<std::uint64_t>(bytes, pos);
  std::vector<DenseLayer> layers;
  std::uint64_t seen = 0;
  for (const auto& [cols, rows] : shapes) {  // (in, out)
    if (rows <= 0 || cols <= 0) throw ShapeError("non-positive layer shape");
    DenseLayer layer{Mat(rows, cols), Vec(rows)};
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) layer.weight(r, c) = get<double>(bytes, pos);
    for (int r = 0; r < rows; ++r) layer.bias[r] = get<double>(bytes, pos);
    seen += static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols + 1);
    layers.push_back(std::move(layer));
  }
  if (seen != count || pos != bytes.size()) throw ShapeError("parameter count does not match layer shapes");
  result.network = QNetwork(std::move(layers), actions, head, header.value("arch_id", std::string{}));
  return result;
}

}  // namespace hsd
