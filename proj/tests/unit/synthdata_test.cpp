#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "ael/dataset.hpp"
#include "ael/synthdata.hpp"

using namespace ael;
using namespace ael::synth;

TEST(Scene, SameSeedBitIdentical) {
  SceneConfig cfg;
  const Scene a = generate_scene(cfg, 42);
  const Scene b = generate_scene(cfg, 42);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_NE(generate_scene(cfg, 43).mask, a.mask);
}

TEST(Scene, MasksValidAndIgnoreFree) {
  SceneConfig cfg;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Scene sc = generate_scene(cfg, s);
    EXPECT_EQ(sc.mask.height(), 64);
    for (auto v : sc.mask.values()) ASSERT_LT(v, cfg.classes);
    for (double v : sc.image.values()) {
      ASSERT_GE(v, 0.0);
      ASSERT_LE(v, 1.0);
    }
  }
}

TEST(Scene, UniformClassDrawsAtZeroExponent) {
  // Chi-square over 12k categorical draws with the generator's weights.
  const auto w = class_weights(6, 0.0);
  Rng rng(1);
  std::vector<int> counts(6, 0);
  const int n = 12000;
  for (int i = 0; i < n; ++i) ++counts[rng.categorical(w)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  EXPECT_LT(chi2, 20.515);  // chi-square 0.999 quantile, 5 dof
}

TEST(Scene, PixelSharesLongTailed) {
  SceneConfig cfg;
  std::vector<double> share(cfg.classes, 0.0);
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const Scene sc = generate_scene(cfg, mix_seed(7, s));
    for (auto v : sc.mask.values()) share[v] += 1.0;
  }
  EXPECT_LT(share[5], share[1] / 3.0);
  for (int c = 1; c < cfg.classes; ++c) EXPECT_GT(share[c - 1], share[c]) << "class " << c;
}

TEST(Scene, PaletteDistinct) {
  for (int classes : {2, 6, 12}) {
    for (int a = 0; a < classes; ++a) {
      for (int b = a + 1; b < classes; ++b) {
        const auto ca = class_color(a, classes), cb = class_color(b, classes);
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += (ca[k] - cb[k]) * (ca[k] - cb[k]);
        EXPECT_GT(d, 1e-3);
      }
    }
  }
}

TEST(Partition, SizesAndDisjointness) {
  const Partition p = make_partition(320, 32, 0, 2021);
  EXPECT_EQ(p.labeled.size(), 10u);
  EXPECT_EQ(p.unlabeled.size(), 310u);
  std::set<int> all(p.labeled.begin(), p.labeled.end());
  for (int id : p.unlabeled) EXPECT_TRUE(all.insert(id).second);
  EXPECT_EQ(all.size(), 320u);
}

TEST(Partition, FoldsDifferAndAreDeterministic) {
  for (int den : {2, 4, 8, 16, 32}) {
    std::vector<std::vector<int>> folds;
    for (int f = 0; f < 5; ++f) {
      folds.push_back(make_partition(320, den, f, 9).labeled);
      EXPECT_EQ(make_partition(320, den, f, 9).labeled, folds.back());
      EXPECT_EQ(folds.back().size(), static_cast<std::size_t>(320 / den));
    }
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) EXPECT_NE(folds[a], folds[b]);
    }
    if (den >= 8) {
      std::set<int> seen;
      for (const auto& f : folds) {
        for (int id : f) EXPECT_TRUE(seen.insert(id).second);
      }
    }
  }
}

TEST(Partition, InvalidArgumentsRejected) {
  EXPECT_THROW(make_partition(20, 32, 0, 1), Error);
  EXPECT_THROW(make_partition(320, 3, 0, 1), Error);
  EXPECT_THROW(make_partition(320, 8, 5, 1), Error);
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "ael_dataset_test";
  std::filesystem::remove_all(dir);
  SceneConfig scene;
  scene.height = scene.width = 16;
  write_dataset(dir, scene, 40, 6, 5);
  const Dataset d = read_dataset(dir, 8, 2);
  EXPECT_EQ(d.classes, 6);
  ASSERT_EQ(d.train.size(), 40u);
  ASSERT_EQ(d.val.size(), 6u);
  const auto train = generate_samples(scene, 0, 40, 5);
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(d.train[i].image, train[i].image);
    EXPECT_EQ(d.train[i].mask, train[i].mask);
    EXPECT_EQ(d.train[i].seed, train[i].seed);
  }
  EXPECT_EQ(d.partition.labeled, make_partition(40, 8, 2, 5).labeled);
  EXPECT_THROW(read_dataset(dir, 4, 7), Error);
  EXPECT_THROW(read_dataset(dir / "nope", 8, 0), Error);
}

TEST(Dataset, LabeledPixelCounts) {
  RunConfig cfg;
  cfg.train_count = 16;
  cfg.val_count = 2;
  cfg.protocol = 8;
  const Dataset d = generate_dataset(cfg);
  const auto counts = d.labeled_pixel_counts();
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  EXPECT_EQ(total, 2u * 64 * 64);
  EXPECT_EQ(d.val.front().id, 16);
}
