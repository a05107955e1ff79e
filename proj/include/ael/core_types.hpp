#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ael {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reserved label value for void pixels. Skipped by every loss, metric and
/// bank statistic. Also the value written to mask PNGs.
inline constexpr std::uint8_t kIgnore = 255;

/// Largest class count representable next to the IGNORE sentinel.
inline constexpr int kMaxClasses = 255;

/// Clamp applied to the true-class probability before taking the log.
inline constexpr double kProbClamp = 1e-12;

/// Dense row-major H x W x channels grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels < 1) {
      throw Error("invalid grid shape");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return data_.empty(); }

  bool same_shape(int h, int w) const noexcept { return h == height_ && w == width_; }
  template <typename U>
  bool same_size(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  std::size_t offset(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  T& at(int y, int x, int c = 0) noexcept { return data_[offset(y, x, c)]; }
  const T& at(int y, int x, int c = 0) const noexcept { return data_[offset(y, x, c)]; }

  /// All channels of pixel j (row-major pixel index).
  std::span<T> pixel(std::size_t j) noexcept {
    return {data_.data() + j * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<const T> pixel(std::size_t j) const noexcept {
    return {data_.data() + j * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<T> pixel(int y, int x) noexcept { return pixel(static_cast<std::size_t>(y) * width_ + x); }
  std::span<const T> pixel(int y, int x) const noexcept {
    return pixel(static_cast<std::size_t>(y) * width_ + x);
  }

  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// RGB image with values in [0,1].
class Image : public Grid<double> {
 public:
  static constexpr int kChannels = 3;
  Image() = default;
  Image(int height, int width, double fill = 0.0) : Grid<double>(height, width, kChannels, fill) {}
  bool operator==(const Image&) const = default;
};

/// Per-pixel class ids in {0..C-1} or kIgnore.
class LabelMask : public Grid<std::uint8_t> {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, std::uint8_t fill = 0) : Grid<std::uint8_t>(height, width, 1, fill) {}
  std::uint8_t& operator[](std::size_t j) noexcept { return values()[j]; }
  std::uint8_t operator[](std::size_t j) const noexcept { return values()[j]; }
  bool operator==(const LabelMask&) const = default;
};

/// Per-pixel categorical distribution over C classes.
class ProbMap : public Grid<double> {
 public:
  ProbMap() = default;
  ProbMap(int height, int width, int classes, double fill = 0.0)
      : Grid<double>(height, width, classes, fill) {}
  int classes() const noexcept { return channels(); }
  bool operator==(const ProbMap&) const = default;
};

/// Pre-softmax model output.
class LogitMap : public Grid<double> {
 public:
  LogitMap() = default;
  LogitMap(int height, int width, int classes, double fill = 0.0)
      : Grid<double>(height, width, classes, fill) {}
  int classes() const noexcept { return channels(); }
  bool operator==(const LogitMap&) const = default;
};

/// Single-channel real grid (per-pixel losses, weights).
using ScalarGrid = Grid<double>;
/// Single-channel 0/1 grid.
using BinaryGrid = Grid<std::uint8_t>;

/// Stable softmax of one logit vector into `out`.
inline void softmax_into(std::span<const double> logits, std::span<double> out) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double v : logits) peak = std::max(peak, v);
  double total = 0.0;
  for (std::size_t c = 0; c < logits.size(); ++c) {
    out[c] = std::exp(logits[c] - peak);
    total += out[c];
  }
  for (double& v : out) v /= total;
}

inline ProbMap softmax(const LogitMap& logits) {
  for (double v : logits.values()) {
    if (!std::isfinite(v)) throw Error("non-finite logits");
  }
  ProbMap out(logits.height(), logits.width(), logits.classes());
  for (std::size_t j = 0; j < logits.pixel_count(); ++j) {
    softmax_into(logits.pixel(j), out.pixel(j));
  }
  return out;
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(std::span<const double> v) noexcept {
  int best = 0;
  for (int c = 1; c < static_cast<int>(v.size()); ++c) {
    if (v[c] > v[best]) best = c;
  }
  return best;
}

inline LabelMask argmax_mask(const ProbMap& p) {
  LabelMask mask(p.height(), p.width());
  for (std::size_t j = 0; j < p.pixel_count(); ++j) {
    mask[j] = static_cast<std::uint8_t>(argmax(p.pixel(j)));
  }
  return mask;
}

/// Per-pixel cross-entropy against hard labels.
struct CrossEntropyGrid {
  ScalarGrid loss;
  BinaryGrid included;  // 0 on IGNORE pixels
  std::size_t included_count = 0;
};

inline CrossEntropyGrid cross_entropy(const ProbMap& p, const LabelMask& y) {
  if (!p.same_size(y)) throw Error("cross_entropy: shape mismatch");
  CrossEntropyGrid out{ScalarGrid(p.height(), p.width()), BinaryGrid(p.height(), p.width()), 0};
  for (std::size_t j = 0; j < y.pixel_count(); ++j) {
    const std::uint8_t label = y[j];
    if (label == kIgnore) continue;
    if (label >= p.classes()) throw Error("cross_entropy: label out of range");
    out.loss.values()[j] = -std::log(std::max(p.pixel(j)[label], kProbClamp));
    out.included.values()[j] = 1;
    ++out.included_count;
  }
  return out;
}

inline void validate(const Image& img) {
  if (img.height() < 8 || img.width() < 8) throw Error("image smaller than 8x8");
  for (double v : img.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error("image value outside [0,1]");
  }
}

inline void validate(const LabelMask& mask, int classes) {
  for (std::uint8_t v : mask.values()) {
    if (v != kIgnore && v >= classes) throw Error("mask label out of range");
  }
}

}  // namespace ael
