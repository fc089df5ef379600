#include "hsdlab/digest.hpp"

#include <openssl/evp.h>

#include <memory>

#include "hsdlab/errors.hpp"

namespace hsd {

Sha256 sha256(std::span<const std::uint8_t> bytes) {
  Sha256 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw Error("sha256 computation failed");
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xf]);
  }
  return s;
}

std::string sha256_hex(std::string_view text) {
  const auto d = sha256({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return to_hex(d);
}

std::string observation_digest(const Observation& obs) {
  const auto d = sha256({reinterpret_cast<const std::uint8_t*>(obs.data()),
                         static_cast<std::size_t>(obs.size()) * sizeof(double)});
  return to_hex(d);
}

}  // namespace hsd
