#include "sakugaflow/kernels.hpp"

#include <cmath>

namespace sakugaflow::kernels::reference {

void fill_noise(std::uint64_t seed, std::span<std::uint8_t> rgba) {
  std::uint64_t state = seed;
  std::uint64_t word = 0;
  int bytes_left = 0;
  auto next_byte = [&]() -> std::uint8_t {
    if (bytes_left == 0) {
      state += kSplitMixGamma;
      word = splitmix64_mix(state);
      bytes_left = 8;
    }
    auto b = static_cast<std::uint8_t>(word & 0xff);
    word >>= 8;
    --bytes_left;
    return b;
  };
  for (std::size_t p = 0; p + 3 < rgba.size(); p += 4) {
    rgba[p] = next_byte();
    rgba[p + 1] = next_byte();
    rgba[p + 2] = next_byte();
    rgba[p + 3] = 255;
  }
}

void copy_unmasked(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base,
                   std::span<const std::uint8_t> mask) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) continue;
    for (std::size_t c = 0; c < 4; ++c) rgba[4 * i + c] = base[4 * i + c];
  }
}

void blend(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base, double strength) {
  const double keep = 1.0 - strength;
  for (std::size_t i = 0; i < rgba.size(); ++i) {
    double v = base[i] * keep + rgba[i] * strength;
    rgba[i] = static_cast<std::uint8_t>(std::floor(v + 0.5));
  }
}

std::size_t count_differing_pixels(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b) {
  std::size_t n = 0;
  for (std::size_t p = 0; p + 3 < a.size(); p += 4) {
    if (a[p] != b[p] || a[p + 1] != b[p + 1] || a[p + 2] != b[p + 2] || a[p + 3] != b[p + 3]) ++n;
  }
  return n;
}

std::size_t count_differing_outside(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b,
                                    std::span<const std::uint8_t> mask) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] != 0) continue;
    for (std::size_t c = 0; c < 4; ++c) {
      if (a[4 * i + c] != b[4 * i + c]) {
        ++n;
        break;
      }
    }
  }
  return n;
}

void scale_nearest(std::span<const std::uint8_t> src, std::uint32_t src_w, std::uint32_t src_h,
                   std::span<std::uint8_t> dst, std::uint32_t dst_w, std::uint32_t dst_h) {
  for (std::uint32_t y = 0; y < dst_h; ++y) {
    std::uint64_t sy = std::uint64_t{y} * src_h / dst_h;
    for (std::uint32_t x = 0; x < dst_w; ++x) {
      std::uint64_t sx = std::uint64_t{x} * src_w / dst_w;
      for (int c = 0; c < 4; ++c) {
        dst[(std::size_t{y} * dst_w + x) * 4 + c] = src[(sy * src_w + sx) * 4 + c];
      }
    }
  }
}

std::size_t count_set(std::span<const std::uint8_t> mask) {
  std::size_t n = 0;
  for (auto m : mask) n += m != 0;
  return n;
}

}  // namespace sakugaflow::kernels::reference
