#pragma once

#include <algorithm>
#include <cmath>
#include <iostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ael/confidence_bank.hpp"
#include "ael/core_types.hpp"
#include "ael/rng.hpp"

namespace ael {

enum class WeightSource { Teacher, StudentDetached };

inline std::string_view to_string(WeightSource s) {
  return s == WeightSource::Teacher ? "teacher" : "student-detached";
}

inline WeightSource parse_weight_source(std::string_view name) {
  if (name == "teacher") return WeightSource::Teacher;
  if (name == "student-detached") return WeightSource::StudentDetached;
  throw Error("unknown loss.weight_source: " + std::string(name));
}

struct LossConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 2.0;
  WeightSource weight_source = WeightSource::Teacher;

  void validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) throw Error("loss.alpha/beta/gamma must be >= 0");
  }
};

/// Lower bound on badness so that a perfectly confident category never
/// produces 0/0 or 0^0 in the sampling rate.
inline constexpr double kBadnessFloor = 1e-6;

struct SamplingRates {
  std::vector<double> s;
  double beta = 1.0;
};

/// s^c = (badness^c / max badness)^beta.
inline SamplingRates sampling_rates(std::span<const double> badness, double beta) {
  if (badness.empty()) throw Error("sampling_rates: no classes");
  std::vector<double> bad(badness.begin(), badness.end());
  for (double& b : bad) b = std::max(b, kBadnessFloor);
  const double worst = *std::max_element(bad.begin(), bad.end());
  SamplingRates out{std::vector<double>(bad.size()), beta};
  for (std::size_t c = 0; c < bad.size(); ++c) out.s[c] = std::pow(bad[c] / worst, beta);
  return out;
}

inline SamplingRates sampling_rates(const ConfidenceBank& bank, double beta) {
  const std::vector<double> bad = bank.badness();
  return sampling_rates(bad, beta);
}

/// Independent Bernoulli inclusion of each non-IGNORE pixel with the rate of
/// its pseudo class. Pixels are visited in row-major order.
inline BinaryGrid sample_pixels(const LabelMask& pseudo, const SamplingRates& rates, Rng& rng) {
  BinaryGrid out(pseudo.height(), pseudo.width());
  for (std::size_t j = 0; j < pseudo.pixel_count(); ++j) {
    const std::uint8_t c = pseudo[j];
    if (c == kIgnore) continue;
    if (c >= rates.s.size()) throw Error("sample_pixels: label out of range");
    out.values()[j] = rng.bernoulli(rates.s[c]) ? 1 : 0;
  }
  return out;
}

/// All non-IGNORE pixels included (AES disabled).
inline BinaryGrid all_valid(const LabelMask& pseudo) {
  BinaryGrid out(pseudo.height(), pseudo.width());
  for (std::size_t j = 0; j < pseudo.pixel_count(); ++j) out.values()[j] = pseudo[j] != kIgnore;
  return out;
}

/// w = (max_c p^c)^gamma on sampled pixels, 0 elsewhere.
inline ScalarGrid pixel_weights(const ProbMap& probs, const BinaryGrid& indicator, double gamma) {
  if (!probs.same_size(indicator)) throw Error("pixel_weights: shape mismatch");
  ScalarGrid w(probs.height(), probs.width());
  for (std::size_t j = 0; j < probs.pixel_count(); ++j) {
    if (!indicator.values()[j]) continue;
    auto p = probs.pixel(j);
    w.values()[j] = std::pow(*std::max_element(p.begin(), p.end()), gamma);
  }
  return w;
}

/// Unit weight on every non-IGNORE pixel.
inline ScalarGrid unit_weights(const LabelMask& mask) {
  ScalarGrid w(mask.height(), mask.width());
  for (std::size_t j = 0; j < mask.pixel_count(); ++j) w.values()[j] = mask[j] != kIgnore ? 1.0 : 0.0;
  return w;
}

namespace detail {

/// Mean over images of sum(w * ce) / sum(w); images with zero total weight
/// are left out of the outer mean. Returns the number of images counted.
inline double weighted_batch_ce(std::span<const ProbMap> preds, std::span<const LabelMask> targets,
                                std::span<const ScalarGrid> weights, int* counted = nullptr) {
  if (preds.size() != targets.size() || preds.size() != weights.size()) {
    throw Error("loss: batch size mismatch");
  }
  double outer = 0.0;
  int images = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!weights[i].same_size(targets[i])) throw Error("loss: weight grid shape mismatch");
    const CrossEntropyGrid ce = cross_entropy(preds[i], targets[i]);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < targets[i].pixel_count(); ++j) {
      if (!ce.included.values()[j]) continue;
      const double w = weights[i].values()[j];
      num += w * ce.loss.values()[j];
      den += w;
    }
    if (den > 0.0) {
      outer += num / den;
      ++images;
    }
  }
  if (counted) *counted = images;
  return images > 0 ? outer / images : 0.0;
}

inline std::vector<ScalarGrid> unit_weights(std::span<const LabelMask> masks) {
  std::vector<ScalarGrid> out;
  out.reserve(masks.size());
  for (const LabelMask& m : masks) out.push_back(ael::unit_weights(m));
  return out;
}

}  // namespace detail

/// Mean over images of the mean pixel cross-entropy over valid pixels.
inline double supervised_loss(std::span<const ProbMap> preds, std::span<const LabelMask> gts) {
  if (preds.empty()) throw Error("supervised_loss: empty batch");
  const auto w = detail::unit_weights(gts);
  return detail::weighted_batch_ce(preds, gts, w);
}

/// Basic-framework unsupervised loss against pseudo labels.
inline double unsupervised_loss_plain(std::span<const ProbMap> preds, std::span<const LabelMask> pseudo) {
  if (preds.empty()) return 0.0;
  const auto w = detail::unit_weights(pseudo);
  return detail::weighted_batch_ce(preds, pseudo, w);
}

/// Sampled and re-weighted unsupervised loss.
inline double unsupervised_loss_ael(std::span<const ProbMap> preds, std::span<const LabelMask> pseudo,
                                    std::span<const ScalarGrid> weights) {
  if (preds.empty()) return 0.0;
  int counted = 0;
  const double loss = detail::weighted_batch_ce(preds, pseudo, weights, &counted);
  if (counted == 0) std::clog << "warning: every unlabeled image has zero total weight\n";
  return loss;
}

inline double total_loss(double supervised, double unsupervised, double alpha) {
  return supervised + alpha * unsupervised;
}

}  // namespace ael
