#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ael/augmentation.hpp"
#include "ael/confidence_bank.hpp"
#include "ael/config.hpp"
#include "ael/dataset.hpp"
#include "ael/equalization.hpp"
#include "ael/metrics.hpp"
#include "ael/model.hpp"
#include "ael/rng.hpp"

namespace ael {

/// Which components ran in the last step.
struct StepTrace {
  int step = 0;
  bool adaptive_cutmix = false;
  bool plain_cutmix = false;
  bool copy_paste = false;
  bool equalization_sampling = false;
  bool reweighting = false;
  std::vector<int> cutmix_categories;
  std::size_t sampled_pixels = 0;

  std::string describe() const {
    std::string s = "step " + std::to_string(step) + ":";
    if (adaptive_cutmix) s += " acm";
    if (plain_cutmix) s += " cutmix";
    if (copy_paste) s += " acp";
    if (equalization_sampling) s += " aes";
    if (reweighting) s += " dr";
    return s;
  }
};

struct LossLogEntry {
  int step = 0;
  double supervised = 0.0;
  double unsupervised = 0.0;
  double total = 0.0;
  bool operator==(const LossLogEntry&) const = default;
};

/// The full AEL training loop over one dataset partition.
class Trainer {
 public:
  Trainer(RunConfig cfg, const Dataset& data)
      : cfg_(std::move(cfg)),
        data_(&data),
        bank_(data.classes, cfg_.indicator, cfg_.bank_tau, cfg_.margin_exclude_target),
        dict_(cfg_.aug.r_star),
        ledger_(data.classes),
        rng_(cfg_.seed) {
    cfg_.validate();
    if (data.classes != cfg_.scene.classes) throw Error("class count mismatch between config and dataset");
    if (data.partition.labeled.empty()) throw Error("partition has no labeled images");
    state_.student = ModelWeights(data.classes);
    state_.teacher = ModelWeights(data.classes);
    state_.max_iter = cfg_.max_iter;
    state_.base_lr = cfg_.base_lr;
    state_.teacher_momentum = cfg_.teacher_momentum;
    const auto counts = data.labeled_pixel_counts();
    tail_classes_ = tail_classes_from_counts(counts);
  }

  const RunConfig& config() const noexcept { return cfg_; }
  const TrainState& state() const noexcept { return state_; }
  const ConfidenceBank& bank() const noexcept { return bank_; }
  const PresenceDictionary& presence() const noexcept { return dict_; }
  const SampleLedger& ledger() const noexcept { return ledger_; }
  const std::vector<int>& tail_classes() const noexcept { return tail_classes_; }
  const std::vector<LossLogEntry>& loss_log() const noexcept { return loss_log_; }
  const StepTrace& last_trace() const noexcept { return trace_; }
  bool done() const noexcept { return state_.step >= state_.max_iter; }

  void step() {
    const Dataset& data = *data_;
    trace_ = StepTrace{};
    trace_.step = state_.step;

    // Bank snapshot for this step.
    const std::vector<double> category_probs = sampling_probabilities(bank_);
    const SamplingRates rates = sampling_rates(bank_, cfg_.loss.beta);

    // Labeled weak views.
    std::vector<LabeledSample> labeled;
    for (int i = 0; i < cfg_.batch_labeled; ++i) {
      const auto& s = data.train[pick(data.partition.labeled)];
      auto weak = weak_augment(s.image, s.mask, rng_, cfg_.aug);
      labeled.push_back({std::move(weak.image), std::move(weak.mask)});
    }

    // Unlabeled weak views and teacher pseudo labels.
    std::vector<UnlabeledSample> unlabeled;
    const bool use_unlabeled = cfg_.batch_unlabeled > 0 && !data.partition.unlabeled.empty();
    if (use_unlabeled) {
      for (int i = 0; i < cfg_.batch_unlabeled; ++i) {
        const int id = pick(data.partition.unlabeled);
        const auto& s = data.train[id];
        auto weak = weak_augment(s.image, LabelMask(s.image.height(), s.image.width(), 0), rng_, cfg_.aug);
        PseudoLabels pl = pseudo_label(state_.teacher, weak.image);
        for (std::size_t j = 0; j < pl.mask.pixel_count(); ++j) {
          if (weak.mask[j] == kIgnore) pl.mask[j] = kIgnore;
        }
        if (cfg_.acm) dict_.update(id, pl.mask);
        unlabeled.push_back({std::move(weak.image), std::move(pl.mask), std::move(pl.probs), id});
      }
    }

    // Strong views: CutMix of the weak views.
    std::vector<Image> strong_images;
    std::vector<LabelMask> strong_pseudo;
    std::vector<ProbMap> strong_teacher_probs;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      CutMixResult mix;
      if (cfg_.acm) {
        mix = adaptive_cutmix(unlabeled, category_probs, dict_, cfg_.aug, rng_);
        trace_.adaptive_cutmix = true;
        trace_.cutmix_categories.push_back(mix.category);
      } else {
        mix = random_cutmix(unlabeled, cfg_.aug, rng_);
        trace_.plain_cutmix = true;
      }
      strong_images.push_back(std::move(mix.image));
      strong_pseudo.push_back(std::move(mix.mask));
      strong_teacher_probs.push_back(std::move(mix.probs));
    }

    // Copy-Paste between labeled views.
    if (cfg_.acp && labeled.size() > 1) {
      const std::vector<LabeledSample> sources = labeled;
      for (std::size_t i = 0; i < labeled.size(); ++i) {
        int j = rng_.below_int(static_cast<int>(sources.size()) - 1);
        if (j >= static_cast<int>(i)) ++j;
        auto cp = adaptive_copy_paste(sources[j], labeled[i], category_probs, cfg_.aug, rng_);
        labeled[i] = {std::move(cp.image), std::move(cp.mask)};
      }
      trace_.copy_paste = true;
    }

    std::vector<Image> labeled_images;
    std::vector<LabelMask> labeled_masks;
    for (auto& s : labeled) {
      labeled_images.push_back(std::move(s.image));
      labeled_masks.push_back(std::move(s.mask));
    }

    // Bank update from student predictions on the labeled batch.
    {
      std::vector<ProbMap> preds;
      preds.reserve(labeled_images.size());
      for (const Image& img : labeled_images) preds.push_back(predict(state_.student, img));
      bank_.update(preds, labeled_masks);
    }

    // Pixel selection and weights for the unsupervised term.
    std::vector<ScalarGrid> weights;
    const double gamma = cfg_.dr ? cfg_.loss.gamma : 0.0;
    trace_.reweighting = cfg_.dr;
    trace_.equalization_sampling = cfg_.aes && !strong_pseudo.empty();
    for (std::size_t i = 0; i < strong_pseudo.size(); ++i) {
      const BinaryGrid indicator =
          cfg_.aes ? sample_pixels(strong_pseudo[i], rates, rng_) : all_valid(strong_pseudo[i]);
      const ProbMap& weight_probs = cfg_.loss.weight_source == WeightSource::Teacher
                                        ? strong_teacher_probs[i]
                                        : student_probs(strong_images[i]);
      weights.push_back(pixel_weights(weight_probs, indicator, gamma));
      for (std::uint8_t v : indicator.values()) trace_.sampled_pixels += v;
    }
    if (!strong_pseudo.empty()) ledger_.update(state_.step, strong_pseudo, weights);

    std::vector<ScalarGrid> labeled_weights;
    for (const auto& m : labeled_masks) labeled_weights.push_back(unit_weights(m));
    const LossGroup sup{labeled_images, labeled_masks, labeled_weights};
    const LossGroup unsup{strong_images, strong_pseudo, weights};
    const ObjectiveValue obj = objective(state_.student, sup, unsup, cfg_.loss.alpha);

    if (state_.step % cfg_.log_every == 0 || state_.step + 1 == state_.max_iter) {
      loss_log_.push_back({state_.step, obj.supervised, obj.unsupervised, obj.total});
    }
    sgd_step(state_, obj.gradient);
    teacher_update(state_);
  }

  /// Runs to max_iter; `on_checkpoint` fires every checkpoint_every steps.
  template <typename Callback>
  void run(Callback&& on_checkpoint) {
    while (!done()) {
      step();
      if (cfg_.checkpoint_every > 0 && state_.step % cfg_.checkpoint_every == 0 && !done()) {
        on_checkpoint(*this);
      }
    }
  }
  void run() {
    run([](const Trainer&) {});
  }

  IouReport evaluate(const std::vector<synth::Sample>& split) const {
    return evaluate_weights(state_.student, split, data_->classes, tail_classes_);
  }

  static IouReport evaluate_weights(const ModelWeights& w, const std::vector<synth::Sample>& split,
                                    int classes, const std::vector<int>& tail) {
    if (split.empty()) throw Error("evaluation split is empty");
    if (w.classes() != classes) throw Error("class count mismatch between checkpoint and data");
    ConfusionMatrix cm(classes);
    for (const auto& s : split) cm.accumulate(argmax_mask(predict(w, s.image)), s.mask);
    return iou_report(cm, tail);
  }

  // --- checkpoint state access -------------------------------------------
  struct Snapshot {
    RunConfig config;
    TrainState state;
    std::vector<ConfidenceBank::Entry> bank;
    std::map<int, std::set<int>> presence;
    std::vector<SampleLedger::Row> ledger;
    std::vector<LossLogEntry> loss_log;
    std::vector<int> tail_classes;
    std::string rng_state;
  };

  Snapshot snapshot() const {
    return {cfg_, state_, bank_.entries(), dict_.entries(), ledger_.history(), loss_log_, tail_classes_,
            rng_.state()};
  }

  void restore(const Snapshot& s) {
    if (s.state.student.classes() != data_->classes) throw Error("class count mismatch between checkpoint and data");
    state_ = s.state;
    bank_.restore(s.bank);
    dict_ = PresenceDictionary(cfg_.aug.r_star);
    for (const auto& [id, cats] : s.presence) dict_.set_entry(id, cats);
    ledger_ = SampleLedger(data_->classes);
    ledger_.restore(s.ledger);
    loss_log_ = s.loss_log;
    tail_classes_ = s.tail_classes;
    rng_.set_state(s.rng_state);
  }

 private:
  int pick(const std::vector<int>& pool) { return pool[rng_.below(pool.size())]; }

  const ProbMap& student_probs(const Image& img) {
    scratch_probs_ = predict(state_.student, img);
    return scratch_probs_;
  }

  RunConfig cfg_;
  const Dataset* data_;
  TrainState state_;
  ConfidenceBank bank_;
  PresenceDictionary dict_;
  SampleLedger ledger_;
  Rng rng_;
  std::vector<int> tail_classes_;
  std::vector<LossLogEntry> loss_log_;
  StepTrace trace_;
  ProbMap scratch_probs_;
};

// ---------------------------------------------------------------------------
// Checkpoint text format (doubles as hexadecimal floating point):
//
//   ael-checkpoint 1
//   config <n>            followed by n `key = value` lines
//   step <k>
//   tail_classes <n> <ids...>
//   student <C> <C*6 values>
//   teacher <C> <C*6 values>
//   bank <indicator> <tau> <C>   followed by C lines `class_id value observed`
//   presence <n>          followed by n lines `image_id m c1 .. cm`
//   ledger <rows> <C>     followed by rows lines `step count_0 .. count_{C-1}`
//   losslog <n>           followed by n lines `step supervised unsupervised total`
//   rng <mt19937_64 state>
//   end
// ---------------------------------------------------------------------------
namespace checkpoint {

inline std::string hex(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
  return std::string(buf, ptr);
}

inline double unhex(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw Error("corrupt checkpoint value: " + s);
  return v;
}

inline std::string serialize(const Trainer::Snapshot& s) {
  std::ostringstream os;
  os << "ael-checkpoint 1\n";
  const std::string cfg = resolved_text(s.config);
  os << "config " << std::count(cfg.begin(), cfg.end(), '\n') << '\n' << cfg;
  os << "step " << s.state.step << '\n';
  os << "tail_classes " << s.tail_classes.size();
  for (int c : s.tail_classes) os << ' ' << c;
  os << '\n';
  auto weights = [&](const char* name, const ModelWeights& w) {
    os << name << ' ' << w.classes();
    for (double v : w.values()) os << ' ' << hex(v);
    os << '\n';
  };
  weights("student", s.state.student);
  weights("teacher", s.state.teacher);
  os << "bank " << to_string(s.config.indicator) << ' ' << hex(s.config.bank_tau) << ' ' << s.bank.size() << '\n';
  for (const auto& e : s.bank) os << e.class_id << ' ' << hex(e.value) << ' ' << (e.observed ? 1 : 0) << '\n';
  os << "presence " << s.presence.size() << '\n';
  for (const auto& [id, cats] : s.presence) {
    os << id << ' ' << cats.size();
    for (int c : cats) os << ' ' << c;
    os << '\n';
  }
  const std::size_t classes = s.bank.size();
  os << "ledger " << s.ledger.size() << ' ' << classes << '\n';
  for (const auto& row : s.ledger) {
    os << row.step;
    for (auto v : row.cumulative) os << ' ' << v;
    os << '\n';
  }
  os << "losslog " << s.loss_log.size() << '\n';
  for (const auto& e : s.loss_log) {
    os << e.step << ' ' << hex(e.supervised) << ' ' << hex(e.unsupervised) << ' ' << hex(e.total) << '\n';
  }
  os << "rng " << s.rng_state << '\n';
  os << "end\n";
  return os.str();
}

inline Trainer::Snapshot parse(const std::string& text) {
  std::istringstream in(text);
  auto expect = [&](const char* word) {
    std::string w;
    if (!(in >> w) || w != word) throw Error(std::string("corrupt checkpoint: expected '") + word + "'");
  };
  auto read_hex = [&]() {
    std::string w;
    if (!(in >> w)) throw Error("corrupt checkpoint: truncated");
    return unhex(w);
  };
  Trainer::Snapshot s;
  expect("ael-checkpoint");
  int version = 0;
  in >> version;
  if (version != 1) throw Error("unsupported checkpoint version");
  expect("config");
  int lines = 0;
  in >> lines;
  std::string line;
  std::getline(in, line);
  std::string cfg_text;
  for (int i = 0; i < lines; ++i) {
    std::getline(in, line);
    cfg_text += line + '\n';
  }
  apply_config_text(s.config, cfg_text);
  expect("step");
  in >> s.state.step;
  expect("tail_classes");
  std::size_t n = 0;
  in >> n;
  s.tail_classes.resize(n);
  for (auto& c : s.tail_classes) in >> c;
  auto weights = [&](const char* name) {
    expect(name);
    int classes = 0;
    in >> classes;
    ModelWeights w(classes);
    for (double& v : w.values()) v = read_hex();
    return w;
  };
  s.state.student = weights("student");
  s.state.teacher = weights("teacher");
  s.state.max_iter = s.config.max_iter;
  s.state.base_lr = s.config.base_lr;
  s.state.teacher_momentum = s.config.teacher_momentum;
  expect("bank");
  std::string kind;
  in >> kind;
  read_hex();  // tau, also present in the config block
  in >> n;
  s.bank.resize(n);
  for (auto& e : s.bank) {
    int observed = 0;
    in >> e.class_id;
    e.value = read_hex();
    in >> observed;
    e.observed = observed != 0;
  }
  expect("presence");
  in >> n;
  for (std::size_t i = 0; i < n; ++i) {
    int id = 0;
    std::size_t m = 0;
    in >> id >> m;
    std::set<int> cats;
    for (std::size_t k = 0; k < m; ++k) {
      int c = 0;
      in >> c;
      cats.insert(c);
    }
    s.presence[id] = std::move(cats);
  }
  expect("ledger");
  std::size_t rows = 0;
  std::size_t classes = 0;
  in >> rows >> classes;
  s.ledger.resize(rows);
  for (auto& row : s.ledger) {
    in >> row.step;
    row.cumulative.resize(classes);
    for (auto& v : row.cumulative) in >> v;
  }
  expect("losslog");
  in >> n;
  s.loss_log.resize(n);
  for (auto& e : s.loss_log) {
    in >> e.step;
    e.supervised = read_hex();
    e.unsupervised = read_hex();
    e.total = read_hex();
  }
  expect("rng");
  std::getline(in, line);
  s.rng_state = config_detail::trim(line);
  expect("end");
  if (!in) throw Error("corrupt checkpoint");
  return s;
}

inline void write(const std::filesystem::path& path, const Trainer::Snapshot& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << serialize(s);
}

inline Trainer::Snapshot read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace checkpoint

// ---------------------------------------------------------------------------
// Run outputs
// ---------------------------------------------------------------------------

struct RunResult {
  IouReport eval;
  double tail_share = 0.0;
  nlohmann::json metrics;
};

inline nlohmann::json metrics_json(const Trainer& t, const IouReport& eval) {
  nlohmann::json j;
  j["steps"] = t.state().step;
  j["final_eval"] = to_json(eval);
  j["tail_classes"] = t.tail_classes();
  j["ledger_totals"] = t.ledger().totals();
  j["ledger_tail_share"] = t.ledger().share(t.tail_classes());
  nlohmann::json bank = nlohmann::json::array();
  for (const auto& e : t.bank().entries()) {
    bank.push_back({{"class", e.class_id}, {"value", e.value}, {"observed", e.observed}});
  }
  j["bank"] = bank;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : t.loss_log()) {
    log.push_back({{"step", e.step}, {"supervised", e.supervised}, {"unsupervised", e.unsupervised}, {"total", e.total}});
  }
  j["loss_log"] = log;
  return j;
}

inline std::string checkpoint_name(int step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06d.ckpt", step);
  return buf;
}

/// Trains to completion, writing config.resolved, checkpoints/, metrics.json
/// and ledger.csv under `out` when it is non-empty.
inline RunResult train_run(Trainer& trainer, const Dataset& data, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  if (!out.empty()) {
    fs::create_directories(out / "checkpoints");
    std::ofstream(out / "config.resolved") << resolved_text(trainer.config());
  }
  trainer.run([&](const Trainer& t) {
    if (!out.empty()) checkpoint::write(out / "checkpoints" / checkpoint_name(t.state().step), t.snapshot());
  });
  RunResult r;
  r.eval = trainer.evaluate(data.val);
  r.tail_share = trainer.ledger().share(trainer.tail_classes());
  r.metrics = metrics_json(trainer, r.eval);
  if (!out.empty()) {
    checkpoint::write(out / "checkpoints" / "final.ckpt", trainer.snapshot());
    std::ofstream(out / "metrics.json") << r.metrics.dump(2) << '\n';
    std::ofstream ledger(out / "ledger.csv");
    trainer.ledger().write_csv(ledger);
  }
  return r;
}

}  // namespace ael
