#pragma once

// Pixel kernels over 8-bit RGBA rasters (row-major, 4 bytes per pixel).
//
// sakugaflow::kernels holds the OpenMP versions used at runtime;
// sakugaflow::kernels::reference holds straightforward serial versions with
// identical signatures. Both must produce byte-identical output for every
// input; tests/test_kernels.cpp and bench/ compare them.
//
// Masks are one byte per pixel, nonzero = selected.

#include <cstddef>
#include <cstdint>
#include <span>

namespace sakugaflow::kernels {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// k-th output (0-based) of a SplitMix64 generator seeded with `seed`.
constexpr std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t k) {
  return splitmix64_mix(seed + (k + 1) * kSplitMixGamma);
}

/// RGB channels from successive generator bytes (little-endian within each
/// 64-bit output), alpha = 255.
void fill_noise(std::uint64_t seed, std::span<std::uint8_t> rgba);

/// pixel = base wherever mask is zero.
void copy_unmasked(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base,
                   std::span<const std::uint8_t> mask);

/// rgba = floor(base * (1 - strength) + rgba * strength + 0.5), per channel.
void blend(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base, double strength);

/// Pixels whose four channels are not all equal.
std::size_t count_differing_pixels(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Pixels where the mask is zero and a differs from b.
std::size_t count_differing_outside(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b,
                                    std::span<const std::uint8_t> mask);

/// Nearest-neighbour resample: source column = dst_x * src_w / dst_w (integer division).
void scale_nearest(std::span<const std::uint8_t> src, std::uint32_t src_w, std::uint32_t src_h,
                   std::span<std::uint8_t> dst, std::uint32_t dst_w, std::uint32_t dst_h);

std::size_t count_set(std::span<const std::uint8_t> mask);

namespace reference {

void fill_noise(std::uint64_t seed, std::span<std::uint8_t> rgba);
void copy_unmasked(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base,
                   std::span<const std::uint8_t> mask);
void blend(std::span<std::uint8_t> rgba, std::span<const std::uint8_t> base, double strength);
std::size_t count_differing_pixels(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
std::size_t count_differing_outside(std::span<const std::uint8_t> a,
                                    std::span<const std::uint8_t> b,
                                    std::span<const std::uint8_t> mask);
void scale_nearest(std::span<const std::uint8_t> src, std::uint32_t src_w, std::uint32_t src_h,
                   std::span<std::uint8_t> dst, std::uint32_t dst_w, std::uint32_t dst_h);
std::size_t count_set(std::span<const std::uint8_t> mask);

}  // namespace reference
}  // namespace sakugaflow::kernels
