#include <gtest/gtest.h>

#include <set>

#include "ridge/rng.hpp"

using namespace ridge;

TEST(Rng, EngineMatchesStandard) {
  Engine eng;
  eng.discard(9999);
  EXPECT_EQ(eng(), 9981545732273789042ULL);
}

TEST(Rng, MixSeedOrderMatters) {
  EXPECT_EQ(mix_seed({1, 2}), mix_seed({1, 2}));
  EXPECT_NE(mix_seed({1, 2}), mix_seed({2, 1}));
  EXPECT_EQ(mix_seed({5}), splitmix64(5));
}

TEST(Rng, UniformBelowCoversRange) {
  Engine eng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = uniform_below(eng, 7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_EQ(uniform_below(eng, 1), 0u);
}
