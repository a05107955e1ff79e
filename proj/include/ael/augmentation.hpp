#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "ael/core_types.hpp"
#include "ael/rng.hpp"

namespace ael {

struct AugConfig {
  double r_star = 0.005;
  int copy_paste_k = 3;
  double scale_jitter_min = 0.5;
  double scale_jitter_max = 2.0;
  double crop_fraction = 0.5;
  double weak_scale_min = 0.5;
  double weak_scale_max = 2.0;

  void validate() const {
    if (!(r_star > 0.0 && r_star < 1.0)) throw Error("aug.r_star must lie in (0,1)");
    if (copy_paste_k < 1) throw Error("aug.copy_paste_k must be positive");
    if (!(scale_jitter_min > 0.0 && scale_jitter_min <= scale_jitter_max)) {
      throw Error("aug.scale_jitter_min/max invalid");
    }
    if (!(crop_fraction > 0.0 && crop_fraction <= 1.0)) throw Error("aug.crop_fraction must lie in (0,1]");
    if (!(weak_scale_min > 0.0 && weak_scale_min <= weak_scale_max)) throw Error("aug.weak_scale invalid");
  }
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

template <typename T>
Grid<T> flip_horizontal(const Grid<T>& in) {
  Grid<T> out(in.height(), in.width(), in.channels());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      auto src = in.pixel(y, in.width() - 1 - x);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

/// Source index of output coordinate `d` when resizing `in` -> `out` samples
/// with pixel centers aligned.
inline int nearest_source(int d, int in, int out) {
  const int s = static_cast<int>(std::floor((d + 0.5) * in / static_cast<double>(out)));
  return std::clamp(s, 0, in - 1);
}

template <typename T>
Grid<T> resize_nearest(const Grid<T>& in, int height, int width) {
  Grid<T> out(height, width, in.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = nearest_source(y, in.height(), height);
    for (int x = 0; x < width; ++x) {
      auto src = in.pixel(sy, nearest_source(x, in.width(), width));
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

inline Grid<double> resize_bilinear(const Grid<double>& in, int height, int width) {
  if (in.height() == height && in.width() == width) return in;
  Grid<double> out(height, width, in.channels());
  const double ry = in.height() / static_cast<double>(height);
  const double rx = in.width() / static_cast<double>(width);
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * ry - 0.5, 0.0, in.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, in.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * rx - 0.5, 0.0, in.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, in.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < in.channels(); ++c) {
        const double top = in.at(y0, x0, c) * (1.0 - wx) + in.at(y0, x1, c) * wx;
        const double bottom = in.at(y1, x0, c) * (1.0 - wx) + in.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

inline Image resize_image(const Image& in, int height, int width) {
  Image out;
  static_cast<Grid<double>&>(out) = resize_bilinear(in, height, width);
  return out;
}

inline LabelMask resize_mask(const LabelMask& in, int height, int width) {
  LabelMask out;
  static_cast<Grid<std::uint8_t>&>(out) = resize_nearest(in, height, width);
  return out;
}

/// Window of `height` x `width` centered on `in` (offset floor((in - out)/2)),
/// padding with `fill` where it falls outside.
template <typename T>
Grid<T> center_crop_or_pad(const Grid<T>& in, int height, int width, T fill) {
  Grid<T> out(height, width, in.channels(), fill);
  const int oy = (in.height() - height) / 2;
  const int ox = (in.width() - width) / 2;
  for (int y = 0; y < height; ++y) {
    const int sy = y + oy;
    if (sy < 0 || sy >= in.height()) continue;
    for (int x = 0; x < width; ++x) {
      const int sx = x + ox;
      if (sx < 0 || sx >= in.width()) continue;
      auto src = in.pixel(sy, sx);
      std::copy(src.begin(), src.end(), out.pixel(y, x).begin());
    }
  }
  return out;
}

template <typename G>
G as(Grid<typename G::value_type> g) {
  G out;
  static_cast<Grid<typename G::value_type>&>(out) = std::move(g);
  return out;
}

// ---------------------------------------------------------------------------
// Weak augmentation: random resize + horizontal flip
// ---------------------------------------------------------------------------

struct WeakParams {
  double scale = 1.0;
  bool flip = false;
};

inline WeakParams draw_weak_params(Rng& rng, const AugConfig& cfg = {}) {
  WeakParams p;
  p.scale = rng.uniform(cfg.weak_scale_min, cfg.weak_scale_max);
  p.flip = rng.bernoulli(0.5);
  return p;
}

struct AugmentedPair {
  Image image;
  LabelMask mask;
};

/// Resize by `scale` (bilinear image, nearest mask), center crop or pad back
/// to the input size (image pads with 0, mask with IGNORE), then flip.
inline AugmentedPair apply_weak(const Image& img, const LabelMask& mask, const WeakParams& p) {
  if (!img.same_size(mask)) throw Error("weak_augment: image/mask size mismatch");
  const int h = img.height();
  const int w = img.width();
  const int sh = std::max(1, static_cast<int>(std::lround(h * p.scale)));
  const int sw = std::max(1, static_cast<int>(std::lround(w * p.scale)));
  AugmentedPair out;
  if (sh == h && sw == w) {
    out.image = img;
    out.mask = mask;
  } else {
    out.image = as<Image>(center_crop_or_pad<double>(resize_image(img, sh, sw), h, w, 0.0));
    out.mask = as<LabelMask>(center_crop_or_pad<std::uint8_t>(resize_mask(mask, sh, sw), h, w, kIgnore));
  }
  if (p.flip) {
    out.image = as<Image>(flip_horizontal<double>(out.image));
    out.mask = as<LabelMask>(flip_horizontal<std::uint8_t>(out.mask));
  }
  return out;
}

inline AugmentedPair weak_augment(const Image& img, const LabelMask& mask, Rng& rng,
                                  const AugConfig& cfg = {}) {
  return apply_weak(img, mask, draw_weak_params(rng, cfg));
}

// ---------------------------------------------------------------------------
// Presence dictionary
// ---------------------------------------------------------------------------

/// Unlabeled image id -> categories whose pseudo-label share exceeds r*.
class PresenceDictionary {
 public:
  explicit PresenceDictionary(double ratio_threshold = 0.005) : threshold_(ratio_threshold) {}

  double threshold() const noexcept { return threshold_; }

  /// Replaces the entry for `image_id`. IGNORE pixels count toward the
  /// denominator.
  void update(int image_id, const LabelMask& pseudo) {
    std::vector<std::size_t> counts(kMaxClasses, 0);
    for (std::uint8_t v : pseudo.values()) {
      if (v != kIgnore) ++counts[v];
    }
    const double total = static_cast<double>(pseudo.pixel_count());
    std::set<int> present;
    for (int c = 0; c < kMaxClasses; ++c) {
      if (counts[c] > 0 && counts[c] / total > threshold_) present.insert(c);
    }
    entries_[image_id] = std::move(present);
  }

  bool contains(int image_id, int category) const {
    auto it = entries_.find(image_id);
    return it != entries_.end() && it->second.count(category) > 0;
  }

  const std::set<int>* find(int image_id) const {
    auto it = entries_.find(image_id);
    return it == entries_.end() ? nullptr : &it->second;
  }

  const std::map<int, std::set<int>>& entries() const noexcept { return entries_; }
  void set_entry(int image_id, std::set<int> categories) { entries_[image_id] = std::move(categories); }
  std::size_t size() const noexcept { return entries_.size(); }

  bool operator==(const PresenceDictionary&) const = default;

 private:
  double threshold_;
  std::map<int, std::set<int>> entries_;
};

// ---------------------------------------------------------------------------
// CutMix
// ---------------------------------------------------------------------------

struct PasteBox {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  bool contains(int y, int x) const noexcept {
    return y >= top && y < top + height && x >= left && x < left + width;
  }
  bool fits(int grid_height, int grid_width) const noexcept {
    return height >= 1 && width >= 1 && top >= 0 && left >= 0 && top + height <= grid_height &&
           left + width <= grid_width;
  }
  bool operator==(const PasteBox&) const = default;
};

/// One unlabeled sample in the strong-augmentation batch. `probs` (teacher
/// probabilities) is optional and is carried through compositing when set.
struct UnlabeledSample {
  Image image;
  LabelMask pseudo;
  ProbMap probs;
  int image_id = 0;
};

struct CutMixResult {
  Image image;
  LabelMask mask;
  ProbMap probs;
  PasteBox source_box;
  PasteBox target_box;
  int source_index = 0;
  int target_index = 0;
  int category = -1;  // -1 for non-adaptive CutMix
  bool fallback = false;
};

namespace detail {

template <typename T>
void copy_box(const Grid<T>& src, const PasteBox& from, Grid<T>& dst, const PasteBox& to) {
  for (int dy = 0; dy < from.height; ++dy) {
    for (int dx = 0; dx < from.width; ++dx) {
      auto s = src.pixel(from.top + dy, from.left + dx);
      std::copy(s.begin(), s.end(), dst.pixel(to.top + dy, to.left + dx).begin());
    }
  }
}

inline std::pair<int, int> crop_size(int height, int width, double fraction) {
  return {std::clamp(static_cast<int>(std::lround(height * fraction)), 1, height),
          std::clamp(static_cast<int>(std::lround(width * fraction)), 1, width)};
}

}  // namespace detail

/// Pastes `source_box` of `source` onto `target` at `target_box` (same size).
inline CutMixResult compose_cutmix(const UnlabeledSample& source, const UnlabeledSample& target,
                                   const PasteBox& source_box, const PasteBox& target_box) {
  if (source_box.height != target_box.height || source_box.width != target_box.width) {
    throw Error("cutmix: box size mismatch");
  }
  if (!source_box.fits(source.image.height(), source.image.width()) ||
      !target_box.fits(target.image.height(), target.image.width())) {
    throw Error("cutmix: box out of bounds");
  }
  CutMixResult out;
  out.image = target.image;
  out.mask = target.pseudo;
  detail::copy_box<double>(source.image, source_box, out.image, target_box);
  detail::copy_box<std::uint8_t>(source.pseudo, source_box, out.mask, target_box);
  if (!source.probs.empty() && !target.probs.empty()) {
    out.probs = target.probs;
    detail::copy_box<double>(source.probs, source_box, out.probs, target_box);
  }
  out.source_box = source_box;
  out.target_box = target_box;
  return out;
}

/// Crop window of `cfg.crop_fraction` centered on (cy, cx), clamped to the image.
inline PasteBox crop_around(int height, int width, int cy, int cx, double fraction) {
  const auto [ch, cw] = detail::crop_size(height, width, fraction);
  PasteBox box{cy - ch / 2, cx - cw / 2, ch, cw};
  box.top = std::clamp(box.top, 0, height - ch);
  box.left = std::clamp(box.left, 0, width - cw);
  return box;
}

inline PasteBox random_location(int height, int width, int box_h, int box_w, Rng& rng) {
  return {rng.below_int(height - box_h + 1), rng.below_int(width - box_w + 1), box_h, box_w};
}

/// Plain CutMix: source, target and crop location all uniform.
inline CutMixResult random_cutmix(std::span<const UnlabeledSample> batch, const AugConfig& cfg, Rng& rng) {
  if (batch.empty()) throw Error("cutmix: empty batch");
  const int src = rng.below_int(static_cast<int>(batch.size()));
  const int dst = rng.below_int(static_cast<int>(batch.size()));
  const Image& s = batch[src].image;
  const Image& t = batch[dst].image;
  auto [ch, cw] = detail::crop_size(s.height(), s.width(), cfg.crop_fraction);
  ch = std::min(ch, t.height());
  cw = std::min(cw, t.width());
  const PasteBox from = random_location(s.height(), s.width(), ch, cw, rng);
  const PasteBox to = random_location(t.height(), t.width(), ch, cw, rng);
  CutMixResult out = compose_cutmix(batch[src], batch[dst], from, to);
  out.source_index = src;
  out.target_index = dst;
  return out;
}

/// Adaptive CutMix: draw a category from `sampling_probs`, take the source
/// from batch images whose dictionary entry contains it (uniform over the
/// batch when none does), crop around a pixel of that category and paste
/// onto a uniformly drawn target.
inline CutMixResult adaptive_cutmix(std::span<const UnlabeledSample> batch,
                                    std::span<const double> sampling_probs,
                                    const PresenceDictionary& dict, const AugConfig& cfg, Rng& rng) {
  if (batch.empty()) throw Error("cutmix: empty batch");
  const int category = rng.categorical(sampling_probs);

  std::vector<int> candidates;
  for (int i = 0; i < static_cast<int>(batch.size()); ++i) {
    if (dict.contains(batch[i].image_id, category)) candidates.push_back(i);
  }
  const bool fallback = candidates.empty();
  const int src = fallback ? rng.below_int(static_cast<int>(batch.size()))
                           : candidates[rng.below_int(static_cast<int>(candidates.size()))];
  const int dst = rng.below_int(static_cast<int>(batch.size()));

  const UnlabeledSample& s = batch[src];
  std::vector<std::size_t> hits;
  for (std::size_t j = 0; j < s.pseudo.pixel_count(); ++j) {
    if (s.pseudo[j] == category) hits.push_back(j);
  }
  const std::size_t center = hits.empty() ? rng.below(s.pseudo.pixel_count()) : hits[rng.below(hits.size())];
  const int cy = static_cast<int>(center / s.image.width());
  const int cx = static_cast<int>(center % s.image.width());

  const Image& t = batch[dst].image;
  PasteBox from = crop_around(s.image.height(), s.image.width(), cy, cx, cfg.crop_fraction);
  from.height = std::min(from.height, t.height());
  from.width = std::min(from.width, t.width());
  const PasteBox to = random_location(t.height(), t.width(), from.height, from.width, rng);

  CutMixResult out = compose_cutmix(s, batch[dst], from, to);
  out.source_index = src;
  out.target_index = dst;
  out.category = category;
  out.fallback = fallback;
  return out;
}

// ---------------------------------------------------------------------------
// Copy-Paste
// ---------------------------------------------------------------------------

struct LabeledSample {
  Image image;
  LabelMask mask;
};

struct PasteRecord {
  int category = 0;
  double scale = 1.0;
  int offset_y = 0;  // top-left of the jittered source in destination coordinates
  int offset_x = 0;
  std::size_t pasted_pixels = 0;
};

struct CopyPasteResult {
  Image image;
  LabelMask mask;
  std::vector<int> sampled;         // all K drawn categories
  std::vector<PasteRecord> pasted;  // categories actually present in src
};

inline LabeledSample jitter(const LabeledSample& src, double scale) {
  const int h = std::max(1, static_cast<int>(std::lround(src.image.height() * scale)));
  const int w = std::max(1, static_cast<int>(std::lround(src.image.width() * scale)));
  return {resize_image(src.image, h, w), resize_mask(src.mask, h, w)};
}

/// Overwrites `dst` wherever the jittered source mask equals `category`,
/// with the jittered source placed at (offset_y, offset_x). Returns the
/// number of pixels written.
inline std::size_t paste_category(const LabeledSample& jittered, int category, int offset_y,
                                  int offset_x, Image& dst_image, LabelMask& dst_mask) {
  std::size_t written = 0;
  for (int y = 0; y < jittered.mask.height(); ++y) {
    const int ty = y + offset_y;
    if (ty < 0 || ty >= dst_mask.height()) continue;
    for (int x = 0; x < jittered.mask.width(); ++x) {
      const int tx = x + offset_x;
      if (tx < 0 || tx >= dst_mask.width()) continue;
      if (jittered.mask.at(y, x) != category) continue;
      auto s = jittered.image.pixel(y, x);
      std::copy(s.begin(), s.end(), dst_image.pixel(ty, tx).begin());
      dst_mask.at(ty, tx) = static_cast<std::uint8_t>(category);
      ++written;
    }
  }
  return written;
}

/// Draws `k` distinct indices with probability proportional to `probs`.
inline std::vector<int> sample_without_replacement(std::span<const double> probs, int k, Rng& rng) {
  std::vector<double> remaining(probs.begin(), probs.end());
  std::vector<int> out;
  int available = 0;
  for (double p : remaining) available += p > 0.0 ? 1 : 0;
  k = std::min(k, available);
  for (int i = 0; i < k; ++i) {
    const int c = rng.categorical(remaining);
    out.push_back(c);
    remaining[c] = 0.0;
  }
  return out;
}

/// Category-level Copy-Paste between two labeled samples.
inline CopyPasteResult adaptive_copy_paste(const LabeledSample& src, const LabeledSample& dst,
                                           std::span<const double> sampling_probs,
                                           const AugConfig& cfg, Rng& rng) {
  if (!src.image.same_size(src.mask) || !dst.image.same_size(dst.mask)) {
    throw Error("copy_paste: image/mask size mismatch");
  }
  CopyPasteResult out{dst.image, dst.mask, {}, {}};
  out.sampled = sample_without_replacement(sampling_probs, cfg.copy_paste_k, rng);
  std::vector<bool> present(256, false);
  for (std::uint8_t v : src.mask.values()) present[v] = true;
  for (int c : out.sampled) {
    if (!present[c] || c == kIgnore) continue;
    PasteRecord rec;
    rec.category = c;
    rec.scale = rng.uniform(cfg.scale_jitter_min, cfg.scale_jitter_max);
    const LabeledSample j = jitter(src, rec.scale);
    const int dh = dst.image.height() - j.image.height();
    const int dw = dst.image.width() - j.image.width();
    rec.offset_y = std::min(0, dh) + rng.below_int(std::abs(dh) + 1);
    rec.offset_x = std::min(0, dw) + rng.below_int(std::abs(dw) + 1);
    rec.pasted_pixels = paste_category(j, c, rec.offset_y, rec.offset_x, out.image, out.mask);
    out.pasted.push_back(rec);
  }
  return out;
}

}  // namespace ael
