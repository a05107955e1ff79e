#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ael/trainer.hpp"

namespace ael {

struct ComponentFlags {
  bool dr = false;
  bool aes = false;
  bool acm = false;
  bool acp = false;

  std::string name() const {
    std::string s;
    auto add = [&](bool on, const char* n) {
      if (!on) return;
      if (!s.empty()) s += '+';
      s += n;
    };
    add(dr, "dr");
    add(aes, "aes");
    add(acm, "acm");
    add(acp, "acp");
    return s.empty() ? "baseline" : s;
  }
  void apply(RunConfig& cfg) const {
    cfg.dr = dr;
    cfg.aes = aes;
    cfg.acm = acm;
    cfg.acp = acp;
  }
  bool operator==(const ComponentFlags&) const = default;
};

/// Baseline, each component alone, then dr+aes, +acm, +acp stacked.
inline std::vector<ComponentFlags> stacked_grid() {
  return {{false, false, false, false}, {true, false, false, false}, {false, true, false, false},
          {false, false, true, false},  {false, false, false, true}, {true, true, false, false},
          {true, true, true, false},    {true, true, true, true}};
}

/// Comma-separated rows, each `baseline`/`none` or a '+'-joined subset of
/// dr, aes, acm, acp; `stacked` expands to the full eight-row grid. The
/// baseline row always comes first and duplicates are dropped.
inline std::vector<ComponentFlags> parse_grid(const std::string& spec) {
  std::vector<ComponentFlags> rows{ComponentFlags{}};
  auto push = [&](const ComponentFlags& f) {
    if (std::find(rows.begin(), rows.end(), f) == rows.end()) rows.push_back(f);
  };
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (item.empty() || item == "baseline" || item == "none") continue;
    if (item == "stacked") {
      for (const auto& f : stacked_grid()) push(f);
      continue;
    }
    ComponentFlags f;
    std::stringstream parts(item);
    std::string part;
    while (std::getline(parts, part, '+')) {
      part = config_detail::trim(part);
      if (part == "dr") f.dr = true;
      else if (part == "aes") f.aes = true;
      else if (part == "acm") f.acm = true;
      else if (part == "acp") f.acp = true;
      else throw Error("unknown ablation component: " + part);
    }
    push(f);
  }
  return rows;
}

struct SeedResult {
  std::uint64_t seed = 0;
  double miou = 0.0;
  double miou_tail = 0.0;
  double tail_share = 0.0;
};

struct AblationRow {
  ComponentFlags flags;
  std::vector<SeedResult> runs;

  static double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / v.size();
  }
  /// Sample standard deviation.
  static double stddev(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / (v.size() - 1));
  }
  template <typename F>
  std::vector<double> column(F f) const {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(f(r));
    return out;
  }
  double miou_mean() const { return mean(column([](auto& r) { return r.miou; })); }
  double miou_std() const { return stddev(column([](auto& r) { return r.miou; })); }
  double tail_mean() const { return mean(column([](auto& r) { return r.miou_tail; })); }
  double tail_std() const { return stddev(column([](auto& r) { return r.miou_tail; })); }
  double share_mean() const { return mean(column([](auto& r) { return r.tail_share; })); }
};

/// Trains every grid row for seeds cfg.seed .. cfg.seed + seeds - 1.
inline std::vector<AblationRow> ablate(const RunConfig& base, const Dataset& data,
                                       const std::vector<ComponentFlags>& grid, int seeds,
                                       std::ostream* progress = nullptr) {
  if (seeds < 1) throw Error("ablate: need at least one seed");
  std::vector<AblationRow> rows;
  for (const auto& flags : grid) {
    AblationRow row{flags, {}};
    for (int k = 0; k < seeds; ++k) {
      RunConfig cfg = base;
      flags.apply(cfg);
      cfg.seed = base.seed + static_cast<std::uint64_t>(k);
      cfg.checkpoint_every = 0;
      Trainer trainer(cfg, data);
      const RunResult r = train_run(trainer, data, {});
      row.runs.push_back({cfg.seed, r.eval.miou, r.eval.miou_tail, r.tail_share});
      if (progress) {
        *progress << flags.name() << " seed " << cfg.seed << ": mIoU " << 100.0 * r.eval.miou << " tail "
                  << 100.0 * r.eval.miou_tail << " tail-share " << r.tail_share << std::endl;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

/// One line per row: flags, seed count, mean/std mIoU and tail mIoU (percent), mean tail share.
inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << "dr,aes,acm,acp,seeds,miou_mean,miou_std,miou_tail_mean,miou_tail_std,tail_share_mean\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.flags.dr << ',' << r.flags.aes << ',' << r.flags.acm << ',' << r.flags.acp << ',' << r.runs.size() << ','
       << 100.0 * r.miou_mean() << ',' << 100.0 * r.miou_std() << ',' << 100.0 * r.tail_mean() << ','
       << 100.0 * r.tail_std() << ',' << r.share_mean() << '\n';
  }
}

inline std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << " DR AES ACM ACP |        mIoU        |     mIoU_tail      | tail share\n";
  for (const auto& r : rows) {
    auto mark = [](bool b) { return b ? "  x" : "   "; };
    os << mark(r.flags.dr) << ' ' << mark(r.flags.aes) << ' ' << mark(r.flags.acm) << ' ' << mark(r.flags.acp)
       << " | " << std::setw(7) << 100.0 * r.miou_mean() << " +- " << std::setw(5) << 100.0 * r.miou_std()
       << "   | " << std::setw(7) << 100.0 * r.tail_mean() << " +- " << std::setw(5) << 100.0 * r.tail_std()
       << "   | " << std::setprecision(4) << r.share_mean() << std::setprecision(2) << '\n';
  }
  return os.str();
}

}  // namespace ael
