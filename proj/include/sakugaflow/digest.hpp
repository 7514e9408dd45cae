#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace sakugaflow {

/// SHA-256 content hash. Rendered as 64 lowercase hex characters.
class Digest {
 public:
  using Bytes = std::array<std::uint8_t, 32>;

  Digest() = default;
  explicit Digest(const Bytes& bytes) : bytes_(bytes) {}

  static Digest of(std::string_view data);
  static std::optional<Digest> from_hex(std::string_view hex);

  std::string hex() const;
  const Bytes& bytes() const { return bytes_; }

  /// First 8 bytes read big-endian.
  std::uint64_t leading_u64() const;

  auto operator<=>(const Digest&) const = default;

 private:
  Bytes bytes_{};
};

std::string base64_encode(std::string_view data);
/// Absent when the input is not valid base64.
std::optional<std::string> base64_decode(std::string_view text);

}  // namespace sakugaflow
