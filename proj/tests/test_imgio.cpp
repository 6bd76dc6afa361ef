#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "refool/eval.hpp"
#include "refool/imgio.hpp"
#include "golden.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace refool;
namespace fs = std::filesystem;

namespace {

void write_class_dir(const fs::path& root, std::size_t cls, std::size_t count, int side, std::uint64_t seed) {
  fs::create_directories(root / std::to_string(cls));
  for (std::size_t i = 0; i < count; ++i)
    write_png(root / std::to_string(cls) / ("img" + std::to_string(i) + ".png"),
              testutil::random_image(side, side, 3, seed * 100 + i));
}

}  // namespace

TEST(Png, RoundTripWithinQuantization) {
  const fs::path dir = testutil::temp_dir("png");
  for (int c : {1, 3}) {
    const Image img = testutil::random_image(13, 7, c, 5);
    write_png(dir / "a.png", img);
    const Image back = read_png(dir / "a.png");
    ASSERT_TRUE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_LE(std::abs(back.buffer()[i] - img.buffer()[i]), 0.5 / 255.0 + 1e-12);
  }
}

TEST(Png, GarbageFileNamesPath) {
  const fs::path dir = testutil::temp_dir("png_bad");
  std::ofstream(dir / "bad.png") << "not a png";
  try {
    read_png(dir / "bad.png");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("bad.png"), std::string::npos);
  }
}

TEST(LoadDataset, TwoClasses) {
  const fs::path root = testutil::temp_dir("load2");
  write_class_dir(root, 0, 10, 20, 1);
  write_class_dir(root, 1, 10, 40, 2);
  const Dataset ds = load_dataset(root, 32);
  EXPECT_EQ(ds.class_count, 2u);
  EXPECT_EQ(ds.size(), 20u);
  for (const auto& it : ds.items) {
    EXPECT_EQ(it.image.width(), 32);
    EXPECT_EQ(it.image.height(), 32);
  }
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{10, 10}));
}

TEST(LoadDataset, EmptyClassFolder) {
  const fs::path root = testutil::temp_dir("load_empty");
  write_class_dir(root, 0, 2, 8, 1);
  fs::create_directories(root / "1");
  try {
    load_dataset(root, 8);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find((root / "1").string()), std::string::npos);
  }
}

TEST(LoadDataset, NonConsecutiveIds) {
  const fs::path root = testutil::temp_dir("load_gap");
  write_class_dir(root, 0, 2, 8, 1);
  write_class_dir(root, 2, 2, 8, 2);
  try {
    load_dataset(root, 8);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-consecutive class ids"), std::string::npos);
  }
}

TEST(LoadDataset, NonIntegerFolderAndMissingRoot) {
  const fs::path root = testutil::temp_dir("load_name");
  write_class_dir(root, 0, 2, 8, 1);
  fs::create_directories(root / "cats");
  EXPECT_THROW(load_dataset(root, 8), Error);
  EXPECT_THROW(load_dataset(root / "nope", 8), Error);
}

TEST(SaveDataset, RoundTrip) {
  Dataset ds;
  ds.class_count = 2;
  for (std::size_t i = 0; i < 10; ++i) ds.items.push_back({testutil::random_image(16, 16, 3, 40 + i), i % 2});
  const fs::path root = testutil::temp_dir("save");
  save_dataset(ds, root);
  const Dataset back = load_dataset(root, 16);
  ASSERT_EQ(back.size(), ds.size());
  // load order is (class, file name); saving keeps the per-class order
  std::size_t k = 0;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i : ds.indices_of(c)) {
      const auto& got = back.items[k++];
      EXPECT_EQ(got.label, c);
      for (std::size_t p = 0; p < got.image.size(); ++p)
        EXPECT_LE(std::abs(got.image.buffer()[p] - ds.items[i].image.buffer()[p]), 1.0 / 255.0);
    }
}

TEST(SaveDataset, UnwritableRoot) {
  const fs::path dir = testutil::temp_dir("save_ro");
  std::ofstream(dir / "file") << "x";
  try {
    save_dataset(testutil::constant_dataset(2, 1, 4), dir / "file" / "sub");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_NE(std::string(e.what()).find("file"), std::string::npos);
  }
}

TEST(Images, SaveLoadSorted) {
  const fs::path dir = testutil::temp_dir("images");
  std::vector<Image> imgs;
  for (int i = 0; i < 12; ++i) imgs.push_back(Image(4, 4, 3, i / 20.0));
  save_images(imgs, dir);
  const auto back = load_images(dir);
  ASSERT_EQ(back.size(), 12u);
  for (int i = 0; i < 12; ++i) EXPECT_NEAR(back[i].at(0, 0, 0), i / 20.0, 0.5 / 255.0 + 1e-12);
}

TEST(Split, Stratified) {
  const Dataset ds = testutil::constant_dataset(2, 10, 4);
  const auto [tr, te] = split(ds, SplitSpec{0.8, 0.2, 3});
  EXPECT_EQ(tr.size(), 16u);
  EXPECT_EQ(te.size(), 4u);
  EXPECT_EQ(tr.class_counts(), (std::vector<std::size_t>{8, 8}));
  EXPECT_EQ(te.class_counts(), (std::vector<std::size_t>{2, 2}));
}

TEST(Split, DeterministicAndDisjoint) {
  Dataset ds;
  ds.class_count = 3;
  for (std::size_t i = 0; i < 60; ++i) ds.items.push_back({Image(2, 2, 1, i / 60.0), i % 3});
  const auto a = split(ds, SplitSpec{0.7, 0.3, 9});
  const auto b = split(ds, SplitSpec{0.7, 0.3, 9});
  const auto c = split(ds, SplitSpec{0.7, 0.3, 10});
  auto keys = [](const Dataset& d) {
    std::vector<double> k;
    for (const auto& it : d.items) k.push_back(it.image.at(0, 0, 0));
    return k;
  };
  EXPECT_EQ(keys(a.first), keys(b.first));
  EXPECT_EQ(keys(a.second), keys(b.second));
  EXPECT_NE(keys(a.first), keys(c.first));
  const auto train_keys = keys(a.first);
  const std::set<double> train(train_keys.begin(), train_keys.end());
  for (double v : keys(a.second)) EXPECT_EQ(train.count(v), 0u);
  EXPECT_EQ(a.first.size() + a.second.size(), 60u);
}

TEST(Split, EmptyTestRejected) {
  const Dataset ds = testutil::constant_dataset(2, 10, 4);
  EXPECT_THROW(split(ds, SplitSpec{1.0, 0.0, 1}), Error);
  EXPECT_THROW(split(ds, SplitSpec{0.8, 0.3, 1}), Error);
  EXPECT_THROW(split(ds, SplitSpec{0.95, 0.01, 1}), Error);
}

TEST(Validation, ExcludesTarget) {
  const Dataset ds = testutil::constant_dataset(8, 120, 4);
  const Dataset val = build_validation_set(ds, 0, 100);
  EXPECT_EQ(val.size(), 700u);
  const auto counts = val.class_counts();
  EXPECT_EQ(counts[0], 0u);
  for (std::size_t c = 1; c < 8; ++c) EXPECT_EQ(counts[c], 100u);
}

TEST(Validation, MinimalAndErrors) {
  const Dataset ds = testutil::constant_dataset(3, 1, 4);
  EXPECT_EQ(build_validation_set(ds, 1, 1).class_counts(), (std::vector<std::size_t>{1, 0, 1}));
  EXPECT_THROW(build_validation_set(ds, 3, 1), Error);
  EXPECT_THROW(build_validation_set(ds, 0, 2), Error);
}

TEST(Augment, IdentityCase) {
  const Image img = testutil::random_image(16, 16, 3, 6);
  RngStream rng(1, 1);
  const Image out = augment(img, rng, 0.0, 1.0);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.buffer()[i], img.buffer()[i], 1e-12);
}

TEST(Augment, DeterministicAndShapePreserving) {
  const Image img = testutil::random_image(20, 14, 3, 7);
  RngStream a(2, 2), b(2, 2);
  const Image x = augment(img, a, 15.0, 0.8), y = augment(img, b, 15.0, 0.8);
  EXPECT_EQ(x.buffer(), y.buffer());
  EXPECT_EQ(x.width(), 20);
  EXPECT_EQ(x.height(), 14);
}

TEST(Augment, ConstantStaysConstant) {
  const Image img(16, 16, 3, 0.37);
  RngStream rng(3, 3);
  for (int t = 0; t < 20; ++t) {
    const Image out = augment(img, rng, 30.0, 0.6);
    for (double v : out.buffer()) EXPECT_NEAR(v, 0.37, 1e-12);
  }
}

TEST(Augment, RejectsBadBounds) {
  const Image img(8, 8, 3, 0.5);
  RngStream rng(1, 1);
  EXPECT_THROW(augment(img, rng, 45.0, 0.9), Error);
  EXPECT_THROW(augment(img, rng, 10.0, 0.4), Error);
}

TEST(Synth, CountsAndDeterminism) {
  const Dataset a = synth_dataset(8, 300, 32, 1);
  EXPECT_EQ(a.size(), 2400u);
  EXPECT_EQ(a.class_count, 8u);
  const Dataset b = synth_dataset(8, 300, 32, 1);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.items[i].label, b.items[i].label);
    ASSERT_EQ(a.items[i].image.buffer(), b.items[i].image.buffer());
  }
  for (const auto& it : a.items) ASSERT_TRUE(it.image.is_valid());
}

TEST(Synth, PatternLimit) {
  EXPECT_GE(kSynthPatternCount, 12u);
  EXPECT_NO_THROW(synth_dataset(kSynthPatternCount, 1, 16, 1));
  EXPECT_THROW(synth_dataset(kSynthPatternCount + 1, 1, 16, 1), Error);
  EXPECT_THROW(synth_dataset(1, 5, 16, 1), Error);
}

// Nearest class mean is well above chance (1/8) but imperfect; the trained
// victim has to do better than it.
TEST(Synth, VictimBeatsCentroidOracle) {
  const auto& d = golden::data();
  const double centroid = oracle::nearest_centroid_accuracy(d.train, d.test);
  EXPECT_GE(centroid, 0.5);
  EXPECT_LT(centroid, 1.0);
  const ClassifierModel m = train(d.train, ClassifierConfig{}).model;
  const double acc = clean_accuracy(m, d.test);
  EXPECT_GE(acc, 0.90);
  EXPECT_GT(acc, centroid);
}

TEST(Synth, WildPoolDeterministic) {
  const auto a = synth_wild_images(20, 32, 7), b = synth_wild_images(20, 32, 7);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].buffer(), b[i].buffer());
    EXPECT_TRUE(a[i].is_valid());
  }
}
