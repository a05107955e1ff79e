#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ael/augmentation.hpp"
#include "ael/confidence_bank.hpp"
#include "ael/core_types.hpp"
#include "ael/equalization.hpp"
#include "ael/synthdata.hpp"

namespace ael {

/// Every tunable of a run. Flat `key = value` text is the on-disk form.
struct RunConfig {
  std::uint64_t seed = 0;
  int max_iter = 2000;
  int batch_labeled = 4;
  int batch_unlabeled = 4;
  std::string out = "runs/ael";

  synth::SceneConfig scene;
  int train_count = 320;
  int val_count = 100;
  int protocol = 8;
  int fold = 0;
  std::uint64_t data_seed = 2021;
  std::string data_dir;  // empty: generate the benchmark in memory

  double base_lr = 5.0;
  double teacher_momentum = 0.99;

  LossConfig loss;
  AugConfig aug;

  IndicatorKind indicator = IndicatorKind::Confidence;
  double bank_tau = 0.999;
  bool margin_exclude_target = false;

  bool dr = true;
  bool aes = true;
  bool acm = true;
  bool acp = true;

  int checkpoint_every = 500;
  int log_every = 50;

  void validate() const;
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error("bad number for " + key + ": " + text);
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& text) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) throw Error("bad integer for " + key + ": " + text);
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on") return true;
  if (text == "false" || text == "0" || text == "off") return false;
  throw Error("bad boolean for " + key + ": " + text);
}

struct KeySpec {
  std::string name;
  std::string help;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define AEL_DOUBLE_KEY(key, member, doc)                                                  \
  KeySpec { key, doc, [](const RunConfig& c) { return format_double(c.member); },          \
            [](RunConfig& c, const std::string& v) { c.member = parse_double(key, v); } }
#define AEL_INT_KEY(key, member, doc)                                                     \
  KeySpec { key, doc, [](const RunConfig& c) { return std::to_string(c.member); },         \
            [](RunConfig& c, const std::string& v) { c.member = parse_int<decltype(c.member)>(key, v); } }
#define AEL_BOOL_KEY(key, member, doc)                                                    \
  KeySpec { key, doc, [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }, \
            [](RunConfig& c, const std::string& v) { c.member = parse_bool(key, v); } }

inline const std::vector<KeySpec>& keys() {
  static const std::vector<KeySpec> table = {
      AEL_INT_KEY("seed", seed, "training seed"),
      AEL_INT_KEY("max_iter", max_iter, "number of SGD steps"),
      AEL_INT_KEY("batch.labeled", batch_labeled, "labeled images per step (N_l)"),
      AEL_INT_KEY("batch.unlabeled", batch_unlabeled, "unlabeled images per step (N_u)"),
      KeySpec{"out", "output directory", [](const RunConfig& c) { return c.out; },
              [](RunConfig& c, const std::string& v) { c.out = v; }},
      AEL_INT_KEY("data.classes", scene.classes, "class count C"),
      KeySpec{"data.image_size", "square image side in pixels",
              [](const RunConfig& c) { return std::to_string(c.scene.height); },
              [](RunConfig& c, const std::string& v) {
                c.scene.height = c.scene.width = parse_int<int>("data.image_size", v);
              }},
      AEL_DOUBLE_KEY("data.tail_exponent", scene.tail_exponent, "shape class weights (c+1)^-a"),
      AEL_INT_KEY("data.shapes_min", scene.shapes_min, "fewest shapes per scene"),
      AEL_INT_KEY("data.shapes_max", scene.shapes_max, "most shapes per scene"),
      AEL_DOUBLE_KEY("data.color_noise", scene.color_noise_sigma, "per-channel color noise sigma"),
      AEL_INT_KEY("data.train_count", train_count, "training scenes"),
      AEL_INT_KEY("data.val_count", val_count, "validation scenes"),
      AEL_INT_KEY("data.protocol", protocol, "labeled fraction denominator (2,4,8,16,32)"),
      AEL_INT_KEY("data.fold", fold, "partition fold 0..4"),
      AEL_INT_KEY("data.seed", data_seed, "benchmark and partition seed"),
      KeySpec{"data.dir", "dataset directory written by `synthdata generate` (empty: in memory)",
              [](const RunConfig& c) { return c.data_dir; },
              [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      AEL_DOUBLE_KEY("model.base_lr", base_lr, "initial learning rate of the poly schedule"),
      AEL_DOUBLE_KEY("model.teacher_momentum", teacher_momentum, "teacher EMA momentum"),
      AEL_DOUBLE_KEY("loss.alpha", loss.alpha, "unsupervised loss weight"),
      AEL_DOUBLE_KEY("loss.beta", loss.beta, "equalization sampling exponent"),
      AEL_DOUBLE_KEY("loss.gamma", loss.gamma, "re-weighting exponent"),
      KeySpec{"loss.weight_source", "teacher | student-detached",
              [](const RunConfig& c) { return std::string(to_string(c.loss.weight_source)); },
              [](RunConfig& c, const std::string& v) { c.loss.weight_source = parse_weight_source(v); }},
      AEL_DOUBLE_KEY("aug.r_star", aug.r_star, "presence ratio threshold"),
      AEL_INT_KEY("aug.copy_paste_k", aug.copy_paste_k, "categories drawn per Copy-Paste"),
      AEL_DOUBLE_KEY("aug.scale_jitter_min", aug.scale_jitter_min, "Copy-Paste jitter lower bound"),
      AEL_DOUBLE_KEY("aug.scale_jitter_max", aug.scale_jitter_max, "Copy-Paste jitter upper bound"),
      AEL_DOUBLE_KEY("aug.crop_fraction", aug.crop_fraction, "CutMix crop side fraction"),
      AEL_DOUBLE_KEY("aug.weak_scale_min", aug.weak_scale_min, "weak resize lower bound"),
      AEL_DOUBLE_KEY("aug.weak_scale_max", aug.weak_scale_max, "weak resize upper bound"),
      KeySpec{"bank.indicator", "confidence | margin | entropy",
              [](const RunConfig& c) { return std::string(to_string(c.indicator)); },
              [](RunConfig& c, const std::string& v) { c.indicator = parse_indicator(v); }},
      AEL_DOUBLE_KEY("bank.tau", bank_tau, "bank EMA momentum"),
      AEL_BOOL_KEY("bank.margin_exclude_target", margin_exclude_target,
                   "margin: second largest over the other classes"),
      AEL_BOOL_KEY("ael.dr", dr, "dynamic re-weighting"),
      AEL_BOOL_KEY("ael.aes", aes, "adaptive equalization sampling"),
      AEL_BOOL_KEY("ael.acm", acm, "adaptive CutMix"),
      AEL_BOOL_KEY("ael.acp", acp, "adaptive Copy-Paste"),
      AEL_INT_KEY("train.checkpoint_every", checkpoint_every, "steps between checkpoints (0: final only)"),
      AEL_INT_KEY("train.log_every", log_every, "steps between loss log entries"),
  };
  return table;
}

#undef AEL_DOUBLE_KEY
#undef AEL_INT_KEY
#undef AEL_BOOL_KEY

}  // namespace config_detail

inline void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& spec : config_detail::keys()) {
    if (spec.name == key) {
      spec.set(cfg, value);
      return;
    }
  }
  throw Error("unknown config key: " + key);
}

inline std::string get_key(const RunConfig& cfg, const std::string& key) {
  for (const auto& spec : config_detail::keys()) {
    if (spec.name == key) return spec.get(cfg);
  }
  throw Error("unknown config key: " + key);
}

/// Applies one `key=value` assignment.
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw Error("expected key=value, got: " + std::string(assignment));
  set_key(cfg, config_detail::trim(assignment.substr(0, eq)), config_detail::trim(assignment.substr(eq + 1)));
}

/// `key = value` lines; '#' starts a comment.
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = config_detail::trim(line);
    if (t.empty()) continue;
    try {
      apply_override(cfg, t);
    } catch (const Error& e) {
      throw Error("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline RunConfig load_config_file(const std::string& path, RunConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
  return cfg;
}

/// Every key with its resolved value, in table order.
inline std::string resolved_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& spec : config_detail::keys()) out += spec.name + " = " + spec.get(cfg) + "\n";
  return out;
}

inline std::string describe_keys() {
  const RunConfig defaults;
  std::string out;
  for (const auto& spec : config_detail::keys()) {
    out += spec.name + " = " + spec.get(defaults) + "    # " + spec.help + "\n";
  }
  return out;
}

inline void RunConfig::validate() const {
  scene.validate();
  aug.validate();
  loss.validate();
  if (max_iter < 1) throw Error("max_iter must be positive");
  if (batch_labeled < 1) throw Error("batch.labeled must be positive");
  if (batch_unlabeled < 0) throw Error("batch.unlabeled must be >= 0");
  if (!synth::is_protocol(protocol)) throw Error("data.protocol must be one of 2,4,8,16,32");
  if (fold < 0 || fold > 4) throw Error("data.fold must lie in 0..4");
  if (train_count < 1) throw Error("data.train_count must be positive");
  if (val_count < 0) throw Error("data.val_count must be >= 0");
  if (!(base_lr > 0.0)) throw Error("model.base_lr must be positive");
  if (!(teacher_momentum >= 0.0 && teacher_momentum < 1.0)) throw Error("model.teacher_momentum must lie in [0,1)");
  if (!(bank_tau >= 0.0 && bank_tau < 1.0)) throw Error("bank.tau must lie in [0,1)");
  if (checkpoint_every < 0 || log_every < 1) throw Error("train.checkpoint_every/log_every invalid");
}

}  // namespace ael
