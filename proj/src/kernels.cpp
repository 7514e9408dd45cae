#include "sakugaflow/kernels.hpp"

#include <cmath>
#include <cstring>

namespace sakugaflow::kernels {

void fill_noise(std::uint64_t seed, std::span<std::uint8_t> rgba) {
  const auto pixels = static_cast<std::int64_t>(rgba.size() / 4);
  std::uint8_t* out = rgba.data();

  // Three generator words carry 24 stream bytes, exactly eight pixels, so
  // each block of eight pixels can be filled independently.
  const std::int64_t blocks = pixels / 8;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < blocks; ++b) {
    std::uint8_t bytes[24];
    for (int w = 0; w < 3; ++w) {
      std::uint64_t v = splitmix64_at(seed, static_cast<std::uint64_t>(3 * b + w));
      for (int i = 0; i < 8; ++i, v >>= 8) bytes[8 * w + i] = static_cast<std::uint8_t>(v & 0xff);
    }
    std::uint8_t* px = out + 32 * b;
    for (int i = 0; i < 8; ++i) {
      px[4 * i] = bytes[3 * i];
      px[4 * i + 1] = bytes[3 * i + 1];
      px[4 * i + 2] = bytes[3 * i + 2];
      px[4 * i + 3] = 255;
    }
  }

  // Remaining pixels: stream byte j lands in pixel j/3, channel j%3.
  const std::int64_t first = blocks * 24;
  const std::int64_t stream_bytes = pixels * 3;
  for (std::int64_t j = first; j < stream_bytes; ++j) {
    const std::uint64_t w = splitmix64_at(seed, static_cast<std::uint64_t>(j / 8));
    out[(j / 3) * 4 + j % 3] = static_cast<std::uint8_t>((w >> (8 * (j % 8))) & 0xff);
  }
  for (std::int64_t p = blocks * 8; p < pixels; ++p) out[4 * p + 3] = 255;
}

void copy_unmasked(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base,
                   std::span<const std::uint8_t> mask) {
  const auto pixels = static_cast<std::int64_t>(mask.size());
  std::uint8_t* out = rgba.data();
  const std::uint8_t* in = base.data();
  const std::uint8_t* m = mask.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < pixels; ++i) {
    if (m[i] == 0) std::memcpy(out + 4 * i, in + 4 * i, 4);
  }
}

void blend(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base, double strength) {
  const double keep = 1.0 - strength;
  const auto n = static_cast<std::int64_t>(rgba.size());
  std::uint8_t* out = rgba.data();
  const std::uint8_t* in = base.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    double v = in[i] * keep + out[i] * strength;
    out[i] = static_cast<std::uint8_t>(std::floor(v + 0.5));
  }
}

std::size_t count_differing_pixels(std::span<const std::uint8_t> a,
                                   std::span<const std::uint8_t> b) {
  const auto pixels = static_cast<std::int64_t>(a.size() / 4);
  const std::uint8_t* pa = a.data();
  const std::uint8_t* pb = b.data();
  std::int64_t n = 0;
#pragma omp parallel for schedule(static) reduction(+ : n)
  for (std::int64_t p = 0; p < pixels; ++p) {
    n += std::memcmp(pa + 4 * p, pb + 4 * p, 4) != 0;
  }
  return static_cast<std::size_t>(n);
}

std::size_t count_differing_outside(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b,
                                    std::span<const std::uint8_t> mask) {
  const auto pixels = static_cast<std::int64_t>(mask.size());
  const std::uint8_t* pa = a.data();
  const std::uint8_t* pb = b.data();
  const std::uint8_t* m = mask.data();
  std::int64_t n = 0;
#pragma omp parallel for schedule(static) reduction(+ : n)
  for (std::int64_t p = 0; p < pixels; ++p) {
    n += m[p] == 0 && std::memcmp(pa + 4 * p, pb + 4 * p, 4) != 0;
  }
  return static_cast<std::size_t>(n);
}

void scale_nearest(std::span<const std::uint8_t> src, std::uint32_t src_w, std::uint32_t src_h,
                   std::span<std::uint8_t> dst, std::uint32_t dst_w, std::uint32_t dst_h) {
  const std::uint8_t* in = src.data();
  std::uint8_t* out = dst.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < static_cast<std::int64_t>(dst_h); ++y) {
    const std::uint64_t sy = static_cast<std::uint64_t>(y) * src_h / dst_h;
    for (std::uint32_t x = 0; x < dst_w; ++x) {
      const std::uint64_t sx = std::uint64_t{x} * src_w / dst_w;
      std::memcpy(out + (static_cast<std::size_t>(y) * dst_w + x) * 4, in + (sy * src_w + sx) * 4, 4);
    }
  }
}

std::size_t count_set(std::span<const std::uint8_t> mask) {
  const auto n = static_cast<std::int64_t>(mask.size());
  const std::uint8_t* m = mask.data();
  std::int64_t count = 0;
#pragma omp parallel for schedule(static) reduction(+ : count)
  for (std::int64_t i = 0; i < n; ++i) count += m[i] != 0;
  return static_cast<std::size_t>(count);
}

}  // namespace sakugaflow::kernels
