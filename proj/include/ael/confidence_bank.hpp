#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ael/core_types.hpp"

namespace ael {

enum class IndicatorKind { Confidence, Margin, Entropy };

inline std::string_view to_string(IndicatorKind kind) {
  switch (kind) {
    case IndicatorKind::Confidence: return "confidence";
    case IndicatorKind::Margin: return "margin";
    case IndicatorKind::Entropy: return "entropy";
  }
  return "confidence";
}

inline IndicatorKind parse_indicator(std::string_view name) {
  if (name == "confidence") return IndicatorKind::Confidence;
  if (name == "margin") return IndicatorKind::Margin;
  if (name == "entropy") return IndicatorKind::Entropy;
  throw Error("unknown indicator: " + std::string(name));
}

/// Per-category batch statistic plus whether the category had any pixels.
struct IndicatorValues {
  std::vector<double> values;
  std::vector<bool> observed;
};

namespace detail {

/// Largest value after removing one occurrence of the maximum. With
/// `skip_index` >= 0, the largest value over the other channels instead.
inline double second_largest(std::span<const double> p, int skip_index = -1) {
  if (skip_index >= 0) {
    double best = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(p.size()); ++c) {
      if (c != skip_index) best = std::max(best, p[c]);
    }
    return best;
  }
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (double v : p) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return second;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

/// Mean over images of the per-image mean of `stat(pixel, gt)` over pixels
/// whose ground truth is c. Images without class c are left out of the
/// outer mean for c.
template <typename PixelStat>
IndicatorValues nested_class_means(std::span<const ProbMap> preds, std::span<const LabelMask> gts,
                                   PixelStat stat) {
  if (preds.empty()) throw Error("empty batch");
  if (preds.size() != gts.size()) throw Error("predictions and masks not paired");
  const int classes = preds.front().classes();
  std::vector<double> outer_sum(classes, 0.0);
  std::vector<int> image_count(classes, 0);
  std::vector<double> inner_sum(classes);
  std::vector<std::size_t> inner_count(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const ProbMap& p = preds[i];
    const LabelMask& y = gts[i];
    if (!p.same_size(y) || p.classes() != classes) throw Error("indicator: shape mismatch");
    std::fill(inner_sum.begin(), inner_sum.end(), 0.0);
    std::fill(inner_count.begin(), inner_count.end(), 0);
    for (std::size_t j = 0; j < y.pixel_count(); ++j) {
      const std::uint8_t c = y[j];
      if (c == kIgnore) continue;
      if (c >= classes) throw Error("indicator: label out of range");
      inner_sum[c] += stat(p.pixel(j), static_cast<int>(c));
      ++inner_count[c];
    }
    for (int c = 0; c < classes; ++c) {
      if (inner_count[c] == 0) continue;
      outer_sum[c] += inner_sum[c] / static_cast<double>(inner_count[c]);
      ++image_count[c];
    }
  }
  IndicatorValues out{std::vector<double>(classes, 0.0), std::vector<bool>(classes, false)};
  for (int c = 0; c < classes; ++c) {
    if (image_count[c] == 0) continue;
    out.values[c] = outer_sum[c] / image_count[c];
    out.observed[c] = true;
  }
  return out;
}

}  // namespace detail

/// Mean true-class probability.
inline IndicatorValues confidence_indicator(std::span<const ProbMap> preds,
                                            std::span<const LabelMask> gts) {
  return detail::nested_class_means(preds, gts,
                                    [](std::span<const double> p, int c) { return p[c]; });
}

/// True-class probability minus the second-largest probability. By default
/// the second largest is taken over all classes including c; with
/// `exclude_target` it is the largest over the other classes.
inline IndicatorValues margin_indicator(std::span<const ProbMap> preds,
                                        std::span<const LabelMask> gts,
                                        bool exclude_target = false) {
  return detail::nested_class_means(preds, gts, [exclude_target](std::span<const double> p, int c) {
    return p[c] - detail::second_largest(p, exclude_target ? c : -1);
  });
}

/// Full-distribution entropy (natural log) averaged over pixels of class c.
inline IndicatorValues entropy_indicator(std::span<const ProbMap> preds,
                                         std::span<const LabelMask> gts) {
  return detail::nested_class_means(
      preds, gts, [](std::span<const double> p, int) { return detail::entropy(p); });
}

/// Category-wise performance memory, EMA smoothed.
class ConfidenceBank {
 public:
  struct Entry {
    int class_id = 0;
    double value = 0.0;
    bool observed = false;
  };

  ConfidenceBank() = default;
  ConfidenceBank(int classes, IndicatorKind kind = IndicatorKind::Confidence, double tau = 0.999,
                 bool margin_exclude_target = false)
      : values_(classes, 0.0),
        observed_(classes, false),
        tau_(tau),
        kind_(kind),
        margin_exclude_target_(margin_exclude_target) {
    if (classes < 2 || classes > kMaxClasses) throw Error("bank: invalid class count");
    if (!(tau >= 0.0 && tau < 1.0)) throw Error("bank: tau must lie in [0,1)");
  }

  int classes() const noexcept { return static_cast<int>(values_.size()); }
  double tau() const noexcept { return tau_; }
  IndicatorKind kind() const noexcept { return kind_; }
  bool margin_exclude_target() const noexcept { return margin_exclude_target_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<bool>& observed() const noexcept { return observed_; }

  IndicatorValues measure(std::span<const ProbMap> preds, std::span<const LabelMask> gts) const {
    switch (kind_) {
      case IndicatorKind::Confidence: return confidence_indicator(preds, gts);
      case IndicatorKind::Margin: return margin_indicator(preds, gts, margin_exclude_target_);
      case IndicatorKind::Entropy: return entropy_indicator(preds, gts);
    }
    return confidence_indicator(preds, gts);
  }

  /// value <- tau * old + (1 - tau) * new for observed categories. The first
  /// observation of a category is stored directly.
  void ema_update(const IndicatorValues& batch) {
    if (static_cast<int>(batch.values.size()) != classes() ||
        static_cast<int>(batch.observed.size()) != classes()) {
      throw Error("bank: class count mismatch");
    }
    for (int c = 0; c < classes(); ++c) {
      if (!batch.observed[c]) continue;
      if (!observed_[c]) {
        values_[c] = batch.values[c];
        observed_[c] = true;
      } else {
        values_[c] = tau_ * values_[c] + (1.0 - tau_) * batch.values[c];
      }
    }
  }

  void update(std::span<const ProbMap> preds, std::span<const LabelMask> gts) {
    ema_update(measure(preds, gts));
  }

  /// Per-category badness: 1 - value for Confidence/Margin, the raw value
  /// for Entropy. Unobserved categories get the mean badness of the
  /// observed ones (zero when nothing has been observed).
  std::vector<double> badness() const {
    std::vector<double> bad(classes(), 0.0);
    double sum = 0.0;
    int seen = 0;
    for (int c = 0; c < classes(); ++c) {
      if (!observed_[c]) continue;
      bad[c] = kind_ == IndicatorKind::Entropy ? values_[c] : 1.0 - values_[c];
      sum += bad[c];
      ++seen;
    }
    const double fill = seen > 0 ? sum / seen : 0.0;
    for (int c = 0; c < classes(); ++c) {
      if (!observed_[c]) bad[c] = fill;
    }
    return bad;
  }

  std::vector<Entry> entries() const {
    std::vector<Entry> out;
    out.reserve(values_.size());
    for (int c = 0; c < classes(); ++c) out.push_back({c, values_[c], static_cast<bool>(observed_[c])});
    return out;
  }

  void restore(std::span<const Entry> entries) {
    if (static_cast<int>(entries.size()) != classes()) throw Error("bank: entry count mismatch");
    for (const Entry& e : entries) {
      if (e.class_id < 0 || e.class_id >= classes()) throw Error("bank: bad class id");
      values_[e.class_id] = e.value;
      observed_[e.class_id] = e.observed;
    }
  }

  bool operator==(const ConfidenceBank&) const = default;

 private:
  std::vector<double> values_;
  std::vector<bool> observed_;
  double tau_ = 0.999;
  IndicatorKind kind_ = IndicatorKind::Confidence;
  bool margin_exclude_target_ = false;
};

/// softmax(badness): under-performing categories are drawn more often.
inline std::vector<double> sampling_probabilities(const ConfidenceBank& bank) {
  const std::vector<double> bad = bank.badness();
  std::vector<double> r(bad.size());
  softmax_into(bad, r);
  return r;
}

}  // namespace ael
