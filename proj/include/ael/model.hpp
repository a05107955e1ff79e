#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "ael/core_types.hpp"

namespace ael {

/// Per-pixel input: (r, g, b, x/W, y/H, 1).
inline constexpr int kFeatureDim = 6;
using PixelFeatures = std::array<double, kFeatureDim>;

inline PixelFeatures pixel_features(const Image& img, int y, int x) {
  auto rgb = img.pixel(y, x);
  return {rgb[0], rgb[1], rgb[2], x / static_cast<double>(img.width()),
          y / static_cast<double>(img.height()), 1.0};
}

/// Linear per-pixel classifier, C x F row-major.
class ModelWeights {
 public:
  ModelWeights() = default;
  explicit ModelWeights(int classes) : classes_(classes), w_(static_cast<std::size_t>(classes) * kFeatureDim, 0.0) {
    if (classes < 2 || classes > kMaxClasses) throw Error("model: invalid class count");
  }

  int classes() const noexcept { return classes_; }
  double& operator()(int c, int f) noexcept { return w_[static_cast<std::size_t>(c) * kFeatureDim + f]; }
  double operator()(int c, int f) const noexcept { return w_[static_cast<std::size_t>(c) * kFeatureDim + f]; }
  std::vector<double>& values() noexcept { return w_; }
  const std::vector<double>& values() const noexcept { return w_; }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double v : w_) m = std::max(m, std::abs(v));
    return m;
  }

  bool operator==(const ModelWeights&) const = default;

 private:
  int classes_ = 0;
  std::vector<double> w_;
};

inline LogitMap forward(const ModelWeights& weights, const Image& img) {
  LogitMap out(img.height(), img.width(), weights.classes());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const PixelFeatures f = pixel_features(img, y, x);
      auto z = out.pixel(y, x);
      for (int c = 0; c < weights.classes(); ++c) {
        double acc = 0.0;
        for (int k = 0; k < kFeatureDim; ++k) acc += weights(c, k) * f[k];
        z[c] = acc;
      }
    }
  }
  return out;
}

inline ProbMap predict(const ModelWeights& weights, const Image& img) { return softmax(forward(weights, img)); }

/// Teacher labelling of a weak view. No confidence threshold.
struct PseudoLabels {
  LabelMask mask;
  ProbMap probs;
};

inline PseudoLabels pseudo_label(const ModelWeights& teacher, const Image& weak_view) {
  PseudoLabels out;
  out.probs = predict(teacher, weak_view);
  out.mask = argmax_mask(out.probs);
  return out;
}

/// One term group of the objective: images, hard targets and per-pixel
/// weights (constants). Each image contributes sum(w*ce)/sum(w); the group
/// loss is the mean over images with positive total weight.
struct LossGroup {
  std::span<const Image> images;
  std::span<const LabelMask> targets;
  std::span<const ScalarGrid> weights;
};

struct ObjectiveValue {
  double supervised = 0.0;
  double unsupervised = 0.0;
  double total = 0.0;
  ModelWeights gradient;
};

namespace detail {

/// Adds scale * d(group loss)/d(weights) into `grad`; returns the group loss.
inline double accumulate_group(const ModelWeights& weights, const LossGroup& group, double scale,
                               ModelWeights& grad) {
  if (group.images.size() != group.targets.size() || group.images.size() != group.weights.size()) {
    throw Error("objective: group size mismatch");
  }
  const int classes = weights.classes();
  struct PerImage {
    double loss = 0.0;
    double den = 0.0;
  };
  std::vector<PerImage> per_image(group.images.size());
  int counted = 0;
  for (std::size_t i = 0; i < group.images.size(); ++i) {
    const LabelMask& t = group.targets[i];
    const ScalarGrid& w = group.weights[i];
    for (std::size_t j = 0; j < t.pixel_count(); ++j) {
      if (t[j] != kIgnore) per_image[i].den += w.values()[j];
    }
    if (per_image[i].den > 0.0) ++counted;
  }
  if (counted == 0) return 0.0;

  std::vector<double> p(classes);
  std::vector<double> z(classes);
  double group_loss = 0.0;
  for (std::size_t i = 0; i < group.images.size(); ++i) {
    const double den = per_image[i].den;
    if (den <= 0.0) continue;
    const Image& img = group.images[i];
    const LabelMask& t = group.targets[i];
    const ScalarGrid& w = group.weights[i];
    if (!img.same_size(t) || !w.same_size(t)) throw Error("objective: shape mismatch");
    const double coeff = scale / (den * counted);
    double num = 0.0;
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const std::size_t j = static_cast<std::size_t>(y) * img.width() + x;
        const std::uint8_t label = t[j];
        const double wj = w.values()[j];
        if (label == kIgnore || wj == 0.0) continue;
        if (label >= classes) throw Error("objective: label out of range");
        const PixelFeatures f = pixel_features(img, y, x);
        for (int c = 0; c < classes; ++c) {
          double acc = 0.0;
          for (int k = 0; k < kFeatureDim; ++k) acc += weights(c, k) * f[k];
          z[c] = acc;
        }
        softmax_into(z, p);
        num += wj * -std::log(std::max(p[label], kProbClamp));
        // Inside the clamp the loss is constant in the weights.
        if (p[label] < kProbClamp) continue;
        for (int c = 0; c < classes; ++c) {
          const double d = coeff * wj * (p[c] - (c == label ? 1.0 : 0.0));
          for (int k = 0; k < kFeatureDim; ++k) grad(c, k) += d * f[k];
        }
      }
    }
    group_loss += num / den;
  }
  return group_loss / counted;
}

}  // namespace detail

/// L = L_s + alpha * L_u and its gradient with respect to the student
/// weights. Pixel weights are treated as constants.
inline ObjectiveValue objective(const ModelWeights& weights, const LossGroup& labeled,
                                const LossGroup& unlabeled, double alpha) {
  ObjectiveValue out;
  out.gradient = ModelWeights(weights.classes());
  out.supervised = detail::accumulate_group(weights, labeled, 1.0, out.gradient);
  if (alpha != 0.0 && !unlabeled.images.empty()) {
    out.unsupervised = detail::accumulate_group(weights, unlabeled, alpha, out.gradient);
  }
  out.total = out.supervised + alpha * out.unsupervised;
  return out;
}

inline ModelWeights loss_gradient(const ModelWeights& weights, const LossGroup& labeled,
                                  const LossGroup& unlabeled, double alpha) {
  return objective(weights, labeled, unlabeled, alpha).gradient;
}

struct TrainState {
  ModelWeights student;
  ModelWeights teacher;
  int step = 0;
  int max_iter = 1;
  double base_lr = 0.01;
  double teacher_momentum = 0.999;

  bool operator==(const TrainState&) const = default;
};

/// base_lr * (1 - k / max_iter)^0.9
inline double poly_lr(double base_lr, int step, int max_iter) {
  return base_lr * std::pow(1.0 - static_cast<double>(step) / max_iter, 0.9);
}

inline void sgd_step(TrainState& state, const ModelWeights& gradient) {
  if (state.step >= state.max_iter) throw Error("sgd_step: already at max_iter");
  if (gradient.classes() != state.student.classes()) throw Error("sgd_step: gradient shape mismatch");
  const double lr = poly_lr(state.base_lr, state.step, state.max_iter);
  auto& w = state.student.values();
  const auto& g = gradient.values();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
  ++state.step;
}

/// teacher <- m * teacher + (1 - m) * student
inline void teacher_update(TrainState& state) {
  const double m = state.teacher_momentum;
  auto& t = state.teacher.values();
  const auto& s = state.student.values();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = m * t[i] + (1.0 - m) * s[i];
}

}  // namespace ael
