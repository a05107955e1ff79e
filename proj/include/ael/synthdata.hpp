#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "ael/core_types.hpp"
#include "ael/rng.hpp"

namespace ael::synth {

struct SceneConfig {
  int classes = 6;
  int height = 64;
  int width = 64;
  double tail_exponent = 1.5;
  int shapes_min = 3;
  int shapes_max = 6;
  double color_noise_sigma = 0.05;

  void validate() const {
    if (classes < 2 || classes >= kMaxClasses) throw Error("data.classes must lie in [2, 254]");
    if (height < 8 || width < 8) throw Error("data.image_size must be >= 8");
    if (tail_exponent < 0.0) throw Error("data.tail_exponent must be >= 0");
    if (shapes_min < 0 || shapes_min > shapes_max) throw Error("data.shapes_min/max invalid");
    if (color_noise_sigma < 0.0) throw Error("data.color_noise must be >= 0");
  }
};

/// splitmix64 finalizer; used to derive per-scene seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Shape-class draw weights (c+1)^-a, unnormalized.
inline std::vector<double> class_weights(int classes, double exponent) {
  std::vector<double> w(classes);
  for (int c = 0; c < classes; ++c) w[c] = std::pow(c + 1.0, -exponent);
  return w;
}

/// Base color of class c. Class 0 (background) is the gray center; the
/// others sit at evenly spread hues on a low-saturation ring around it, so
/// that neighbouring classes overlap under the color noise.
inline std::array<double, 3> class_color(int c, int classes) {
  if (c == 0) return {0.5, 0.5, 0.5};
  constexpr double kRadius = 0.4;
  const double angle = 2.0 * 3.14159265358979323846 * (c - 1) / (classes - 1);
  // Orthonormal basis of the plane perpendicular to the gray axis.
  const double u[3] = {0.8164965809277260, -0.4082482904638630, -0.4082482904638630};
  const double v[3] = {0.0, 0.7071067811865476, -0.7071067811865476};
  std::array<double, 3> rgb{};
  for (int k = 0; k < 3; ++k) rgb[k] = 0.5 + kRadius * (std::cos(angle) * u[k] + std::sin(angle) * v[k]);
  return rgb;
}

struct Scene {
  Image image;
  LabelMask mask;
};

/// Background plus z-ordered rectangles and ellipses; classes drawn with
/// probability proportional to (c+1)^-a. Pixel values are quantized to
/// multiples of 1/255 so scenes survive an 8-bit PNG round trip exactly.
inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const int h = cfg.height;
  const int w = cfg.width;
  Scene scene{Image(h, w), LabelMask(h, w, 0)};
  const std::vector<double> weights = class_weights(cfg.classes, cfg.tail_exponent);
  const int shapes = cfg.shapes_min + rng.below_int(cfg.shapes_max - cfg.shapes_min + 1);
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.bernoulli(0.5);
    const auto cls = static_cast<std::uint8_t>(rng.categorical(weights));
    if (ellipse) {
      const double cy = rng.uniform(0.0, h);
      const double cx = rng.uniform(0.0, w);
      const double ry = rng.uniform(h / 16.0, h / 4.0);
      const double rx = rng.uniform(w / 16.0, w / 4.0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double dy = (y + 0.5 - cy) / ry;
          const double dx = (x + 0.5 - cx) / rx;
          if (dy * dy + dx * dx <= 1.0) scene.mask.at(y, x) = cls;
        }
      }
    } else {
      const int rh = h / 8 + rng.below_int(h / 2 - h / 8 + 1);
      const int rw = w / 8 + rng.below_int(w / 2 - w / 8 + 1);
      const int top = rng.below_int(h - rh + 1);
      const int left = rng.below_int(w - rw + 1);
      for (int y = top; y < top + rh; ++y) {
        for (int x = left; x < left + rw; ++x) scene.mask.at(y, x) = cls;
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto base = class_color(scene.mask.at(y, x), cfg.classes);
      for (int k = 0; k < 3; ++k) {
        const double v = std::clamp(base[k] + cfg.color_noise_sigma * rng.normal(), 0.0, 1.0);
        scene.image.at(y, x, k) = std::round(v * 255.0) / 255.0;
      }
    }
  }
  return scene;
}

struct Sample {
  int id = 0;
  std::uint64_t seed = 0;
  Image image;
  LabelMask mask;
};

/// Scenes with ids [first_id, first_id + count) and seeds mix_seed(seed, id).
inline std::vector<Sample> generate_samples(const SceneConfig& cfg, int first_id, int count,
                                            std::uint64_t seed) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int id = first_id + i;
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(id));
    Scene scene = generate_scene(cfg, s);
    out.push_back({id, s, std::move(scene.image), std::move(scene.mask)});
  }
  return out;
}

inline bool is_protocol(int denominator) {
  return denominator == 2 || denominator == 4 || denominator == 8 || denominator == 16 ||
         denominator == 32;
}

struct Partition {
  int denominator = 8;
  int fold = 0;
  std::vector<int> labeled;
  std::vector<int> unlabeled;
};

/// Labeled subset of round(size / denominator) ids out of [0, size). When
/// five labeled subsets fit, the folds are consecutive slices of one seeded
/// permutation and hence disjoint; otherwise each fold uses its own
/// permutation.
inline Partition make_partition(int dataset_size, int denominator, int fold, std::uint64_t seed) {
  if (!is_protocol(denominator)) throw Error("protocol must be one of 1/2, 1/4, 1/8, 1/16, 1/32");
  if (fold < 0 || fold > 4) throw Error("fold must lie in 0..4");
  if (denominator > dataset_size) throw Error("protocol denominator exceeds dataset size");
  const int n = static_cast<int>(std::lround(static_cast<double>(dataset_size) / denominator));
  const bool disjoint = 5 * n <= dataset_size;

  std::vector<int> ids(dataset_size);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(mix_seed(seed, disjoint ? 0xfeedULL : 0xfeedULL + 1 + fold));
  for (int i = dataset_size - 1; i > 0; --i) std::swap(ids[i], ids[rng.below_int(i + 1)]);

  const int start = disjoint ? fold * n : 0;
  Partition p;
  p.denominator = denominator;
  p.fold = fold;
  std::set<int> labeled(ids.begin() + start, ids.begin() + start + n);
  p.labeled.assign(labeled.begin(), labeled.end());
  for (int id = 0; id < dataset_size; ++id) {
    if (!labeled.count(id)) p.unlabeled.push_back(id);
  }
  return p;
}

}  // namespace ael::synth
