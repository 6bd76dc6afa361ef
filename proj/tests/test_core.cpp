#include <gtest/gtest.h>

#include <set>

#include "refool/core.hpp"
#include "helpers.hpp"

using namespace refool;

// Golden values from tests/oracle/rng_golden.py, an independent
// implementation that also reproduces the published xoshiro256** vector.
TEST(Rng, GoldenSequences) {
  std::uint64_t s = 0;
  EXPECT_EQ(detail::splitmix64(s), 0xe220a8397b1dcdafULL);

  RngStream a(42, 0);
  EXPECT_EQ(a.next_u64(), 0xd2440e253b6dd0e2ULL);
  EXPECT_EQ(a.next_u64(), 0xba3a8284877a3f70ULL);
  EXPECT_EQ(a.next_u64(), 0x7272f90f3f81c662ULL);
  EXPECT_EQ(a.next_u64(), 0x7f7cb6e383413f81ULL);

  RngStream b(42, 7);
  EXPECT_EQ(b.next_u64(), 0x53b42d65b61c68b0ULL);
  EXPECT_EQ(b.next_u64(), 0x5937d42566711f29ULL);
  EXPECT_EQ(b.next_u64(), 0xc40aa10afc7ff2aeULL);
  EXPECT_EQ(b.next_u64(), 0xa775930eaaf0aaa1ULL);

  RngStream c = RngStream(42, 7).child(3);
  EXPECT_EQ(c.next_u64(), 0x0a4e334aeda84379ULL);
  EXPECT_EQ(c.next_u64(), 0x9c17774fd82d013dULL);

  RngStream u(42, 0);
  EXPECT_EQ(u.uniform(), 0.821350940790061);
  EXPECT_EQ(u.uniform(), 0.7274552892263068);
}

TEST(Rng, SameSeedSameDraws) {
  RngStream a = derive_stream(42, 0), b = derive_stream(42, 0);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer) {
  RngStream a = derive_stream(42, 0), b = derive_stream(42, 1);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, ChildIgnoresParentPosition) {
  RngStream a = derive_stream(9, 4);
  const RngStream before = a.child(11);
  for (int i = 0; i < 17; ++i) a.next_u64();
  RngStream x = before, y = a.child(11);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(x.next_u64(), y.next_u64());
}

TEST(Rng, UniformRangeAndMoments) {
  RngStream r(5, 5);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = r.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    sum += v;
  }
  // mean of U[0,1) has sd 1/sqrt(12 n) ~ 0.0009
  EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, BelowIsUniform) {
  RngStream r(1, 2);
  std::vector<int> hist(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) hist[r.below(7)]++;
  for (int h : hist) EXPECT_NEAR(h, n / 7, 400);  // ~4.3 sd
  for (int i = 0; i < 1000; ++i) {
    const int v = r.uniform_int(3, 8);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 8);
  }
}

TEST(Rng, SampleIndicesDistinctAndNested) {
  RngStream a(3, 3), b(3, 3);
  const auto small = a.sample_indices(50, 10);
  const auto large = b.sample_indices(50, 30);
  std::set<std::size_t> s(large.begin(), large.end());
  EXPECT_EQ(s.size(), 30u);
  for (std::size_t i = 0; i < small.size(); ++i) EXPECT_EQ(small[i], large[i]);
  RngStream c(0, 0);
  EXPECT_THROW(c.sample_indices(3, 4), Error);
}

TEST(Rng, ShuffleIsPermutation) {
  RngStream r(8, 8);
  std::vector<int> v(100);
  std::iota(v.begin(), v.end(), 0);
  r.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}

TEST(Image, ShapeChecks) {
  EXPECT_THROW(Image(0, 4, 3), Error);
  EXPECT_THROW(Image(4, 4, 2), Error);
  EXPECT_THROW(Image(2, 2, 1, std::vector<double>(3, 0.0)), Error);
  Image img(4, 3, 3, 0.25);
  EXPECT_EQ(img.size(), 36u);
  EXPECT_TRUE(img.is_valid());
  img.at(1, 2, 0) = 1.5;
  EXPECT_FALSE(img.is_valid());
  img.at(1, 2, 0) = std::nan("");
  EXPECT_FALSE(img.is_valid());
  EXPECT_THROW(require_valid(img, "test"), Error);
}

TEST(Image, LayoutIsRowMajorInterleaved) {
  Image img(3, 2, 3);
  img.at(2, 1, 1) = 0.5;
  EXPECT_EQ(img.buffer()[(1 * 3 + 2) * 3 + 1], 0.5);
}

TEST(Image, EightBitRoundTrip) {
  RngStream r(1, 1);
  for (int i = 0; i < 100000; ++i) {
    const double v = r.uniform();
    EXPECT_LE(std::abs(from_u8(to_u8(v)) - v), 1.0 / 255.0 + 1e-12);
  }
  for (int b = 0; b < 256; ++b) EXPECT_EQ(to_u8(from_u8(static_cast<std::uint8_t>(b))), b);
}

TEST(Dataset, Validate) {
  Dataset ds = testutil::constant_dataset(2, 3, 4);
  EXPECT_NO_THROW(ds.validate());
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{3, 3}));
  EXPECT_EQ(ds.indices_of(1), (std::vector<std::size_t>{3, 4, 5}));
  ds.items[0].label = 2;
  EXPECT_THROW(ds.validate(), Error);
  Dataset one = testutil::constant_dataset(2, 1, 4);
  one.class_count = 1;
  EXPECT_THROW(one.validate(), Error);
  Dataset empty;
  empty.class_count = 2;
  EXPECT_THROW(empty.validate(), Error);
}

TEST(Ranges, Defaults) {
  KernelParamRanges r;
  EXPECT_EQ(r.focal_alpha.lo, 0.05);
  EXPECT_EQ(r.focal_alpha.hi, 0.4);
  EXPECT_EQ(r.defocus_sigma.lo, 1.0);
  EXPECT_EQ(r.defocus_sigma.hi, 5.0);
  EXPECT_EQ(r.ghost_alpha.lo, 0.15);
  EXPECT_EQ(r.ghost_alpha.hi, 0.35);
  EXPECT_EQ(r.ghost_delta.lo, 3);
  EXPECT_EQ(r.ghost_delta.hi, 8);
  EXPECT_EQ(r.ghost_attenuation, 0.6);
  EXPECT_NO_THROW(r.validate());
  r.ghost_delta.lo = 0;
  EXPECT_THROW(r.validate(), Error);
  r = {};
  r.focal_alpha = {0.3, 0.2};
  EXPECT_THROW(r.validate(), Error);
}

TEST(Median, LowerForEvenLengths) {
  EXPECT_EQ(lower_median({3, 1, 2}), 2);
  EXPECT_EQ(lower_median({4, 1, 3, 2}), 2);
  EXPECT_EQ(lower_median({5}), 5);
}
