#pragma once

#include <algorithm>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ael/core_types.hpp"

namespace ael {

/// Rows are ground truth, columns predictions. IGNORE pixels are not scored.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes)
      : classes_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0) {}

  int classes() const noexcept { return classes_; }
  std::uint64_t operator()(int gt, int pred) const noexcept {
    return counts_[static_cast<std::size_t>(gt) * classes_ + pred];
  }
  std::uint64_t total() const noexcept { return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0}); }

  void accumulate(const LabelMask& pred, const LabelMask& gt) {
    if (!pred.same_size(gt)) throw Error("confusion: shape mismatch");
    for (std::size_t j = 0; j < gt.pixel_count(); ++j) {
      const std::uint8_t g = gt[j];
      if (g == kIgnore) continue;
      const std::uint8_t p = pred[j];
      if (g >= classes_ || p >= classes_) throw Error("confusion: label out of range");
      ++counts_[static_cast<std::size_t>(g) * classes_ + p];
    }
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    if (other.classes_ != classes_) throw Error("confusion: class count mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
  }

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int classes_ = 0;
  std::vector<std::uint64_t> counts_;
};

inline ConfusionMatrix accumulate(ConfusionMatrix cm, const LabelMask& pred, const LabelMask& gt) {
  cm.accumulate(pred, gt);
  return cm;
}

struct IouReport {
  std::vector<std::optional<double>> per_class;  // nullopt: class absent in both gt and predictions
  double miou = 0.0;
  double miou_tail = 0.0;
  std::vector<int> tail_classes;
};

inline IouReport iou_report(const ConfusionMatrix& cm, std::span<const int> tail_classes) {
  const int classes = cm.classes();
  IouReport r;
  r.tail_classes.assign(tail_classes.begin(), tail_classes.end());
  r.per_class.resize(classes);
  for (int c = 0; c < classes; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int k = 0; k < classes; ++k) {
      row += cm(c, k);
      col += cm(k, c);
    }
    const std::uint64_t tp = cm(c, c);
    const std::uint64_t den = row + col - tp;  // TP + FP + FN
    if (den > 0) r.per_class[c] = static_cast<double>(tp) / static_cast<double>(den);
  }
  auto mean_over = [&](auto&& ids) {
    double sum = 0.0;
    int n = 0;
    for (int c : ids) {
      if (c < 0 || c >= classes || !r.per_class[c]) continue;
      sum += *r.per_class[c];
      ++n;
    }
    return n > 0 ? sum / n : 0.0;
  };
  std::vector<int> all(classes);
  std::iota(all.begin(), all.end(), 0);
  r.miou = mean_over(all);
  r.miou_tail = mean_over(r.tail_classes);
  return r;
}

/// The ceil(C/2) classes with the fewest pixels; ties go to the higher id.
inline std::vector<int> tail_classes_from_counts(std::span<const std::uint64_t> counts) {
  std::vector<int> ids(counts.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return counts[a] != counts[b] ? counts[a] < counts[b] : a > b;
  });
  ids.resize((counts.size() + 1) / 2);
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline nlohmann::json to_json(const IouReport& r) {
  nlohmann::json j;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& v : r.per_class) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  j["per_class_iou"] = per;
  j["miou"] = r.miou;
  j["miou_tail"] = r.miou_tail;
  j["tail_classes"] = r.tail_classes;
  return j;
}

inline IouReport iou_report_from_json(const nlohmann::json& j) {
  IouReport r;
  for (const auto& v : j.at("per_class_iou")) {
    r.per_class.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  r.miou = j.at("miou").get<double>();
  r.miou_tail = j.at("miou_tail").get<double>();
  r.tail_classes = j.at("tail_classes").get<std::vector<int>>();
  return r;
}

inline std::string to_table(const IouReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << std::left << std::setw(8) << "class" << std::right << std::setw(8) << "IoU" << "  tail\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const bool tail = std::find(r.tail_classes.begin(), r.tail_classes.end(), static_cast<int>(c)) !=
                      r.tail_classes.end();
    os << std::left << std::setw(8) << c << std::right << std::setw(8);
    if (r.per_class[c]) {
      os << 100.0 * *r.per_class[c];
    } else {
      os << "absent";
    }
    os << (tail ? "  *" : "") << '\n';
  }
  os << std::left << std::setw(8) << "mIoU" << std::right << std::setw(8) << 100.0 * r.miou << '\n';
  os << std::left << std::setw(8) << "tail" << std::right << std::setw(8) << 100.0 * r.miou_tail << '\n';
  return os.str();
}

/// Cumulative per-class count of pixels that entered the unsupervised loss
/// with positive weight, recorded after every step.
class SampleLedger {
 public:
  SampleLedger() = default;
  explicit SampleLedger(int classes) : totals_(classes, 0) {}

  int classes() const noexcept { return static_cast<int>(totals_.size()); }
  const std::vector<std::uint64_t>& totals() const noexcept { return totals_; }

  struct Row {
    int step = 0;
    std::vector<std::uint64_t> cumulative;
    bool operator==(const Row&) const = default;
  };
  const std::vector<Row>& history() const noexcept { return history_; }

  /// Adds, per pseudo-label class, the pixels with positive weight and
  /// records a history row for `step`.
  void update(int step, std::span<const LabelMask> pseudo, std::span<const ScalarGrid> weights) {
    if (pseudo.size() != weights.size()) throw Error("ledger: batch size mismatch");
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      if (!pseudo[i].same_size(weights[i])) throw Error("ledger: shape mismatch");
      for (std::size_t j = 0; j < pseudo[i].pixel_count(); ++j) {
        const std::uint8_t c = pseudo[i][j];
        if (c == kIgnore || weights[i].values()[j] <= 0.0) continue;
        if (c >= classes()) throw Error("ledger: label out of range");
        ++totals_[c];
      }
    }
    history_.push_back({step, totals_});
  }

  void restore(std::vector<Row> history) {
    history_ = std::move(history);
    if (!history_.empty()) totals_ = history_.back().cumulative;
  }

  /// Share of all counted pixels that belong to `classes`.
  double share(std::span<const int> classes) const {
    const std::uint64_t all = std::accumulate(totals_.begin(), totals_.end(), std::uint64_t{0});
    if (all == 0) return 0.0;
    std::uint64_t part = 0;
    for (int c : classes) part += totals_.at(c);
    return static_cast<double>(part) / static_cast<double>(all);
  }

  void write_csv(std::ostream& os) const {
    os << "step,class,count\n";
    for (const Row& row : history_) {
      for (int c = 0; c < classes(); ++c) os << row.step << ',' << c << ',' << row.cumulative[c] << '\n';
    }
  }

  bool operator==(const SampleLedger&) const = default;

 private:
  std::vector<std::uint64_t> totals_;
  std::vector<Row> history_;
};

inline SampleLedger ledger_update(SampleLedger ledger, int step, std::span<const LabelMask> pseudo,
                                  std::span<const ScalarGrid> weights) {
  ledger.update(step, pseudo, weights);
  return ledger;
}

}  // namespace ael
