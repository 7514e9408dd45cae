#include <gtest/gtest.h>

#include <omp.h>

#include <random>
#include <vector>

#include "sakugaflow/kernels.hpp"

namespace k = sakugaflow::kernels;

namespace {

std::vector<std::uint8_t> random_bytes(std::mt19937& rng, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng());
  return v;
}

std::vector<std::uint8_t> random_mask(std::mt19937& rng, std::size_t n) {
  std::vector<std::uint8_t> m(n);
  for (auto& b : m) b = rng() % 3 == 0;
  return m;
}

// Odd sizes exercise the tail paths of the blocked kernels.
const std::pair<std::uint32_t, std::uint32_t> kSizes[] = {{1, 1}, {3, 1}, {4, 3}, {7, 5},
                                                          {8, 8}, {13, 11}, {64, 64}, {129, 33}};

class Threads : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { omp_set_num_threads(GetParam()); }
};

}  // namespace

TEST(SplitMix, CounterFormMatchesSequentialStream) {
  std::uint64_t state = 99;
  for (std::uint64_t i = 0; i < 100; ++i) {
    state += k::kSplitMixGamma;
    EXPECT_EQ(k::splitmix64_at(99, i), k::splitmix64_mix(state));
  }
}

TEST_P(Threads, FillNoiseMatchesReference) {
  for (auto [w, h] : kSizes) {
    for (std::uint64_t seed : {0ULL, 1ULL, 0xf753c0e1fc80fc5fULL}) {
      std::vector<std::uint8_t> a(std::size_t{w} * h * 4, 0), b(a.size(), 1);
      k::reference::fill_noise(seed, a);
      k::fill_noise(seed, b);
      ASSERT_EQ(a, b) << w << "x" << h << " seed " << seed;
    }
  }
}

TEST_P(Threads, BlendAndCopyMatchReference) {
  std::mt19937 rng(5);
  for (auto [w, h] : kSizes) {
    const std::size_t n = std::size_t{w} * h;
    auto base = random_bytes(rng, n * 4);
    auto px = random_bytes(rng, n * 4);
    auto mask = random_mask(rng, n);
    for (double s : {0.0, 0.25, 0.3, 0.6, 1.0}) {
      auto a = px, b = px;
      k::reference::blend(a, base, s);
      k::blend(b, base, s);
      ASSERT_EQ(a, b) << "blend " << s;
    }
    auto a = px, b = px;
    k::reference::copy_unmasked(a, base, mask);
    k::copy_unmasked(b, base, mask);
    ASSERT_EQ(a, b);
    EXPECT_EQ(k::count_differing_outside(a, base, mask), 0u);
  }
}

TEST_P(Threads, CountsMatchReference) {
  std::mt19937 rng(6);
  for (auto [w, h] : kSizes) {
    const std::size_t n = std::size_t{w} * h;
    auto a = random_bytes(rng, n * 4);
    auto b = a;
    for (std::size_t i = 0; i < b.size(); i += 1 + rng() % 9) b[i] ^= 0x10;
    auto mask = random_mask(rng, n);
    EXPECT_EQ(k::count_differing_pixels(a, b), k::reference::count_differing_pixels(a, b));
    EXPECT_EQ(k::count_differing_outside(a, b, mask), k::reference::count_differing_outside(a, b, mask));
    EXPECT_EQ(k::count_set(mask), k::reference::count_set(mask));
    EXPECT_EQ(k::count_differing_pixels(a, a), 0u);
  }
}

TEST_P(Threads, ScaleMatchesReference) {
  std::mt19937 rng(8);
  for (auto [sw, sh] : kSizes) {
    auto src = random_bytes(rng, std::size_t{sw} * sh * 4);
    for (auto [dw, dh] : kSizes) {
      std::vector<std::uint8_t> a(std::size_t{dw} * dh * 4), b(a.size());
      k::reference::scale_nearest(src, sw, sh, a, dw, dh);
      k::scale_nearest(src, sw, sh, b, dw, dh);
      ASSERT_EQ(a, b);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Kernels, Threads, ::testing::Values(1, 2, 4, 7));

TEST(Blend, OracleValues) {
  // Frozen by tests/oracles/mock_generate_oracle.py: noise(1) blended toward noise(2) at 0.3.
  std::vector<std::uint8_t> base(8 * 8 * 4), px(base.size());
  k::reference::fill_noise(1, base);
  k::reference::fill_noise(2, px);
  k::blend(px, base, 0.3);
  EXPECT_EQ((std::vector<int>{px[0], px[1], px[2], px[3]}), (std::vector<int>{197, 90, 47, 255}));
}
