// Acceptance checks 1-9: one PASS/FAIL line each, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ael/ablation.hpp"
#include "ael/augmentation.hpp"
#include "ael/confidence_bank.hpp"
#include "ael/equalization.hpp"
#include "ael/model.hpp"
#include "ael/trainer.hpp"

using namespace ael;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << title << " -- " << o.detail
            << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

ProbMap random_probs(Rng& rng, int h, int w, int classes) {
  LogitMap z(h, w, classes);
  const double sharp = rng.uniform(0.1, 5.0);
  for (double& v : z.values()) v = sharp * rng.normal();
  return softmax(z);
}

LabelMask random_mask(Rng& rng, int h, int w, int classes, double ignore_rate) {
  LabelMask m(h, w);
  for (auto& v : m.values()) {
    v = rng.bernoulli(ignore_rate) ? kIgnore : static_cast<std::uint8_t>(rng.below(classes));
  }
  return m;
}

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (double& v : img.values()) v = rng.uniform();
  return img;
}

// ---------------------------------------------------------------------------
// 1. Formula oracles
// ---------------------------------------------------------------------------

// Straight loops over (class, image, pixel), recomputing every statistic
// from the raw probabilities.
double oracle_stat(int kind, const std::vector<double>& p, int c) {
  if (kind == 0) return p[c];
  if (kind == 1) {
    std::vector<double> s = p;
    std::sort(s.begin(), s.end(), std::greater<>());
    return p[c] - s[1];
  }
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h += -v * std::log(v);
  }
  return h;
}

std::vector<double> oracle_indicator(int kind, const std::vector<ProbMap>& preds,
                                     const std::vector<LabelMask>& gts, int classes,
                                     std::vector<bool>& observed) {
  std::vector<double> out(classes, 0.0);
  observed.assign(classes, false);
  for (int c = 0; c < classes; ++c) {
    std::vector<double> per_image;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      double sum = 0.0;
      int n = 0;
      for (int y = 0; y < gts[i].height(); ++y) {
        for (int x = 0; x < gts[i].width(); ++x) {
          if (gts[i].at(y, x) != c) continue;
          std::vector<double> p(classes);
          for (int k = 0; k < classes; ++k) p[k] = preds[i].at(y, x, k);
          sum += oracle_stat(kind, p, c);
          ++n;
        }
      }
      if (n > 0) per_image.push_back(sum / n);
    }
    if (per_image.empty()) continue;
    double s = 0.0;
    for (double v : per_image) s += v;
    out[c] = s / per_image.size();
    observed[c] = true;
  }
  return out;
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  int cases = 0;
  bool flags_ok = true;
  auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };

  for (int trial = 0; trial < 150; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(7));  // 2..8
    const int n = 1 + static_cast<int>(rng.below(4));
    const int h = 1 + static_cast<int>(rng.below(8));
    const int w = 1 + static_cast<int>(rng.below(8));
    std::vector<ProbMap> preds;
    std::vector<LabelMask> gts;
    for (int i = 0; i < n; ++i) {
      preds.push_back(random_probs(rng, h, w, classes));
      gts.push_back(random_mask(rng, h, w, classes, 0.2));
    }

    // Indicators.
    const IndicatorValues got[3] = {confidence_indicator(preds, gts), margin_indicator(preds, gts),
                                    entropy_indicator(preds, gts)};
    for (int kind = 0; kind < 3; ++kind) {
      std::vector<bool> obs;
      const auto ref = oracle_indicator(kind, preds, gts, classes, obs);
      flags_ok &= obs == got[kind].observed;
      for (int c = 0; c < classes; ++c) {
        if (obs[c]) track(got[kind].values[c], ref[c]);
      }
      ++cases;
    }

    // EMA over a random sequence, compared with the unrolled sum.
    const double tau = rng.uniform(0.0, 0.9999);
    ConfidenceBank bank(classes, IndicatorKind::Confidence, tau);
    std::vector<std::vector<double>> seq;
    for (int t = 0; t < 10; ++t) {
      std::vector<double> v(classes);
      for (double& x : v) x = rng.uniform();
      seq.push_back(v);
      bank.ema_update({v, std::vector<bool>(classes, true)});
    }
    for (int c = 0; c < classes; ++c) {
      double ref = std::pow(tau, 9) * seq[0][c];
      for (int t = 1; t < 10; ++t) ref += (1.0 - tau) * std::pow(tau, 9 - t) * seq[t][c];
      track(bank.values()[c], ref);
    }
    ++cases;

    // Category probabilities: exp(1 - conf) / sum, no max subtraction.
    const auto r = sampling_probabilities(bank);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) z += std::exp(1.0 - bank.values()[c]);
    for (int c = 0; c < classes; ++c) track(r[c], std::exp(1.0 - bank.values()[c]) / z);
    ++cases;

    // Sampling rates.
    const double beta = rng.uniform(0.0, 3.0);
    const auto s = sampling_rates(bank, beta);
    double worst_bad = 0.0;
    for (int c = 0; c < classes; ++c) worst_bad = std::max(worst_bad, std::max(1.0 - bank.values()[c], 1e-6));
    for (int c = 0; c < classes; ++c) {
      track(s.s[c], std::exp(beta * (std::log(std::max(1.0 - bank.values()[c], 1e-6)) - std::log(worst_bad))));
    }
    ++cases;

    // Re-weighting.
    const double gamma = rng.uniform(0.0, 4.0);
    BinaryGrid ind(h, w);
    for (auto& v : ind.values()) v = rng.bernoulli(0.5);
    const auto wts = pixel_weights(preds[0], ind, gamma);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double m = 0.0;
        for (int k = 0; k < classes; ++k) m = std::max(m, preds[0].at(y, x, k));
        track(wts.at(y, x, 0), ind.at(y, x, 0) ? std::exp(gamma * std::log(m)) : 0.0);
      }
    }
    ++cases;
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= 1e-9 && flags_ok && secs < 10.0 && cases >= 100;
  o.detail = std::to_string(cases) + " instances, max |delta| " + fmt("%.3g", worst) + ", observed flags " +
             (flags_ok ? "agree" : "DISAGREE") + ", " + fmt("%.2f", secs) + " s";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Degeneracy equivalence
// ---------------------------------------------------------------------------

Outcome criterion2() {
  Rng rng(2002);
  double worst = 0.0;
  for (int b = 0; b < 50; ++b) {
    const int classes = 2 + static_cast<int>(rng.below(7));
    const int n = 1 + static_cast<int>(rng.below(4));
    std::vector<ProbMap> student;
    std::vector<LabelMask> pseudo;
    std::vector<ScalarGrid> weights;
    std::vector<double> conf(classes);
    for (double& v : conf) v = rng.uniform();
    ConfidenceBank bank(classes, IndicatorKind::Confidence, 0.0);
    bank.ema_update({conf, std::vector<bool>(classes, true)});
    const auto rates = sampling_rates(bank, 0.0);
    for (int i = 0; i < n; ++i) {
      student.push_back(random_probs(rng, 8, 8, classes));
      pseudo.push_back(random_mask(rng, 8, 8, classes, 0.1));
      const ProbMap teacher = random_probs(rng, 8, 8, classes);
      weights.push_back(pixel_weights(teacher, sample_pixels(pseudo.back(), rates, rng), 0.0));
    }
    worst = std::max(worst, std::abs(unsupervised_loss_ael(student, pseudo, weights) -
                                     unsupervised_loss_plain(student, pseudo)));
  }
  return {worst <= 1e-10, "50 batches, max |delta| " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------
// 3. Gradient check
// ---------------------------------------------------------------------------

Outcome criterion3() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(3003 + seed);
    const int classes = 3 + static_cast<int>(rng.below(3));
    ModelWeights w(classes);
    for (double& v : w.values()) v = 0.7 * rng.normal();
    std::vector<Image> li, ui;
    std::vector<LabelMask> lt, ut;
    std::vector<ScalarGrid> lw, uw;
    for (int i = 0; i < 2; ++i) {
      li.push_back(random_image(rng, 4, 4));
      lt.push_back(random_mask(rng, 4, 4, classes, 0.1));
      lw.push_back(unit_weights(lt.back()));
      ui.push_back(random_image(rng, 4, 4));
      ut.push_back(random_mask(rng, 4, 4, classes, 0.1));
      // Weights as in training: sampled pixels, (max teacher prob)^gamma.
      BinaryGrid ind(4, 4);
      for (auto& v : ind.values()) v = rng.bernoulli(0.7);
      uw.push_back(pixel_weights(random_probs(rng, 4, 4, classes), ind, 2.0));
    }
    const LossGroup lab{li, lt, lw}, unl{ui, ut, uw};
    const double alpha = rng.uniform(0.2, 2.0);
    const ModelWeights g = loss_gradient(w, lab, unl, alpha);
    const double eps = 1e-5;
    for (std::size_t i = 0; i < w.values().size(); ++i) {
      ModelWeights p = w, m = w;
      p.values()[i] += eps;
      m.values()[i] -= eps;
      const double fd = (objective(p, lab, unl, alpha).total - objective(m, lab, unl, alpha).total) / (2 * eps);
      const double a = g.values()[i];
      const double scale = std::max(std::abs(fd), std::abs(a));
      // Entries that are zero up to finite-difference noise carry no relative information.
      const double rel = scale < 1e-8 ? 0.0 : std::abs(fd - a) / scale;
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-4, "20 seeds, max relative error " + fmt("%.3g", worst)};
}

// ---------------------------------------------------------------------------
// 4. Compositing bit-exactness
// ---------------------------------------------------------------------------

bool same_rgb(const Image& a, int ay, int ax, const Image& b, int by, int bx) {
  for (int k = 0; k < 3; ++k) {
    if (a.at(ay, ax, k) != b.at(by, bx, k)) return false;
  }
  return true;
}

bool check_cutmix(Rng& rng) {
  const int classes = 2 + static_cast<int>(rng.below(6));
  const int h = 8 + static_cast<int>(rng.below(17));
  const int w = 8 + static_cast<int>(rng.below(17));
  const int n = 1 + static_cast<int>(rng.below(4));
  std::vector<UnlabeledSample> batch;
  PresenceDictionary dict;
  for (int i = 0; i < n; ++i) {
    UnlabeledSample s{random_image(rng, h, w), random_mask(rng, h, w, classes, 0.05), {}, 100 + i};
    s.probs = random_probs(rng, h, w, classes);
    dict.update(s.image_id, s.pseudo);
    batch.push_back(std::move(s));
  }
  std::vector<double> probs(classes);
  double z = 0.0;
  for (double& p : probs) z += (p = rng.uniform());
  for (double& p : probs) p /= z;
  AugConfig cfg;
  cfg.crop_fraction = rng.uniform(0.1, 1.0);
  const CutMixResult out = adaptive_cutmix(batch, probs, dict, cfg, rng);
  const auto& src = batch[out.source_index];
  const auto& dst = batch[out.target_index];
  if (!out.target_box.fits(h, w) || !out.source_box.fits(h, w)) return false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int sy = y, sx = x;
      const UnlabeledSample* from = &dst;
      if (out.target_box.contains(y, x)) {
        from = &src;
        sy = y - out.target_box.top + out.source_box.top;
        sx = x - out.target_box.left + out.source_box.left;
      }
      if (!same_rgb(out.image, y, x, from->image, sy, sx)) return false;
      if (out.mask.at(y, x) != from->pseudo.at(sy, sx)) return false;
      for (int k = 0; k < classes; ++k) {
        if (out.probs.at(y, x, k) != from->probs.at(sy, sx, k)) return false;
      }
    }
  }
  return true;
}

bool check_copy_paste(Rng& rng) {
  const int classes = 2 + static_cast<int>(rng.below(6));
  const int h = 8 + static_cast<int>(rng.below(17));
  const int w = 8 + static_cast<int>(rng.below(17));
  LabeledSample src{random_image(rng, h, w), random_mask(rng, h, w, classes, 0.05)};
  LabeledSample dst{random_image(rng, h, w), random_mask(rng, h, w, classes, 0.05)};
  std::vector<double> probs(classes);
  double z = 0.0;
  for (double& p : probs) z += (p = rng.uniform());
  for (double& p : probs) p /= z;
  AugConfig cfg;
  cfg.copy_paste_k = 1 + static_cast<int>(rng.below(classes));
  const CopyPasteResult out = adaptive_copy_paste(src, dst, probs, cfg, rng);

  // Replay provenance: -1 means the destination pixel survived.
  std::vector<int> who(static_cast<std::size_t>(h) * w, -1);
  std::vector<std::pair<int, int>> where(who.size());
  std::vector<LabeledSample> jittered;
  for (std::size_t r = 0; r < out.pasted.size(); ++r) {
    const PasteRecord& rec = out.pasted[r];
    jittered.push_back(jitter(src, rec.scale));
    const LabeledSample& j = jittered.back();
    for (int y = 0; y < j.mask.height(); ++y) {
      for (int x = 0; x < j.mask.width(); ++x) {
        const int ty = y + rec.offset_y, tx = x + rec.offset_x;
        if (ty < 0 || ty >= h || tx < 0 || tx >= w || j.mask.at(y, x) != rec.category) continue;
        who[static_cast<std::size_t>(ty) * w + tx] = static_cast<int>(r);
        where[static_cast<std::size_t>(ty) * w + tx] = {y, x};
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t j = static_cast<std::size_t>(y) * w + x;
      if (who[j] < 0) {
        if (!same_rgb(out.image, y, x, dst.image, y, x) || out.mask.at(y, x) != dst.mask.at(y, x)) return false;
      } else {
        const LabeledSample& s = jittered[who[j]];
        const auto [sy, sx] = where[j];
        if (!same_rgb(out.image, y, x, s.image, sy, sx) || out.mask.at(y, x) != s.mask.at(sy, sx)) return false;
      }
    }
  }
  return true;
}

Outcome criterion4() {
  Rng rng(4004);
  int cm_ok = 0, cp_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    cm_ok += check_cutmix(rng);
    cp_ok += check_copy_paste(rng);
  }
  return {cm_ok == 1000 && cp_ok == 1000,
          "cutmix " + std::to_string(cm_ok) + "/1000, copy-paste " + std::to_string(cp_ok) + "/1000 exact"};
}

// ---------------------------------------------------------------------------
// 5. Sampling statistics
// ---------------------------------------------------------------------------

Outcome criterion5() {
  ConfidenceBank bank(3, IndicatorKind::Confidence, 0.0);
  bank.ema_update({{0.9, 0.9, 0.2}, {true, true, true}});
  const auto probs = sampling_probabilities(bank);
  const double e1 = std::exp(0.1), e8 = std::exp(0.8);
  const double expect[3] = {e1 / (2 * e1 + e8), e1 / (2 * e1 + e8), e8 / (2 * e1 + e8)};

  Rng rng(5005);
  std::vector<UnlabeledSample> batch{{Image(8, 8, 0.5), LabelMask(8, 8, 0), {}, 0},
                                     {Image(8, 8, 0.5), LabelMask(8, 8, 1), {}, 1}};
  PresenceDictionary dict;
  for (const auto& s : batch) dict.update(s.image_id, s.pseudo);
  const int draws = 10000;
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < draws; ++i) ++counts[adaptive_cutmix(batch, probs, dict, {}, rng).category];
  double worst_sigma = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double sd = std::sqrt(draws * expect[c] * (1 - expect[c]));
    worst_sigma = std::max(worst_sigma, std::abs(counts[c] - draws * expect[c]) / sd);
  }

  // AES inclusion on 10k pixels per class, for two banks.
  double worst_aes = 0.0;
  const std::vector<std::vector<double>> banks{{0.9, 0.9, 0.2}, {0.9, 0.5, 0.7, 0.2}};
  for (const auto& conf : banks) {
    const int classes = static_cast<int>(conf.size());
    ConfidenceBank b(classes, IndicatorKind::Confidence, 0.0);
    b.ema_update({conf, std::vector<bool>(classes, true)});
    const auto rates = sampling_rates(b, 1.0);
    LabelMask grid(100 * classes, 100);
    for (std::size_t j = 0; j < grid.pixel_count(); ++j) grid[j] = static_cast<std::uint8_t>(j / 10000);
    const auto ind = sample_pixels(grid, rates, rng);
    std::vector<int> hit(classes, 0);
    for (std::size_t j = 0; j < grid.pixel_count(); ++j) hit[grid[j]] += ind.values()[j];
    for (int c = 0; c < classes; ++c) {
      const double s = rates.s[c];
      const double sd = std::sqrt(10000 * s * (1 - s));
      const double dev = std::abs(hit[c] - 10000 * s);
      worst_aes = std::max(worst_aes, sd > 0 ? dev / sd : (dev == 0 ? 0.0 : INFINITY));
    }
  }
  Outcome o;
  o.pass = worst_sigma <= 3.0 && worst_aes <= 3.0;
  o.detail = "category freq " + std::to_string(counts[2]) + "/10000 for class 2 (expected " +
             fmt("%.1f", draws * expect[2]) + "), worst " + fmt("%.2f", worst_sigma) + " sigma; AES worst " +
             fmt("%.2f", worst_aes) + " sigma";
  return o;
}

// ---------------------------------------------------------------------------
// 6 + 7. Directional desk-scale experiments
// ---------------------------------------------------------------------------

struct Experiments {
  std::vector<AblationRow> rows;
  double seconds = 0.0;
  const AblationRow& row(const ComponentFlags& f) const {
    for (const auto& r : rows) {
      if (r.flags == f) return r;
    }
    throw Error("missing ablation row");
  }
};

Experiments run_experiments() {
  RunConfig cfg;  // C = 6, 1/8 partition, desk-scale defaults
  cfg.seed = 0;
  const Dataset data = generate_dataset(cfg);
  const std::vector<ComponentFlags> grid{{false, false, false, false}, {true, false, false, false},
                                         {false, true, false, false},  {false, false, true, false},
                                         {false, false, false, true},  {true, true, true, true}};
  const auto t0 = Clock::now();
  Experiments e;
  e.rows = ablate(cfg, data, grid, 3, &std::cerr);
  e.seconds = seconds_since(t0);
  return e;
}

Outcome criterion6(const Experiments& e) {
  const auto& base = e.row({});
  const auto& full = e.row({true, true, true, true});
  bool every = true;
  std::ostringstream d;
  d << "tail share ael/baseline per seed:";
  for (std::size_t k = 0; k < base.runs.size(); ++k) {
    every &= full.runs[k].tail_share > base.runs[k].tail_share;
    d << ' ' << fmt("%.4f", full.runs[k].tail_share) << '/' << fmt("%.4f", base.runs[k].tail_share);
  }
  // Two of the six rows make up this experiment.
  const double secs = e.seconds * 2.0 / 6.0;
  d << ", ~" << fmt("%.0f", secs) << " s";
  return {every && secs < 15 * 60, d.str()};
}

Outcome criterion7(const Experiments& e) {
  const auto& base = e.row({});
  const auto& full = e.row({true, true, true, true});
  const double b = 100 * base.miou_mean(), a = 100 * full.miou_mean();
  const double bt = 100 * base.tail_mean(), at = 100 * full.tail_mean();
  bool singles_ok = true;
  std::ostringstream d;
  d << "mIoU ael " << fmt("%.2f", a) << " vs baseline " << fmt("%.2f", b) << ", tail " << fmt("%.2f", at)
    << " vs " << fmt("%.2f", bt) << "; singles";
  for (const ComponentFlags f : {ComponentFlags{true, false, false, false}, ComponentFlags{false, true, false, false},
                                 ComponentFlags{false, false, true, false}, ComponentFlags{false, false, false, true}}) {
    const double m = 100 * e.row(f).miou_mean();
    singles_ok &= m >= b - 1.0;
    d << ' ' << f.name() << '=' << fmt("%.2f", m);
  }
  d << ", " << fmt("%.0f", e.seconds) << " s";
  return {a >= b && at > bt && singles_ok && e.seconds < 30 * 60, d.str()};
}

// ---------------------------------------------------------------------------
// 8. Determinism and resume
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion8() {
  RunConfig cfg;
  cfg.max_iter = 300;
  cfg.checkpoint_every = 100;
  cfg.seed = 8;
  cfg.out = "determinism";
  const Dataset data = generate_dataset(cfg);
  const fs::path root = fs::temp_directory_path() / "ael_acceptance_determinism";
  fs::remove_all(root);
  for (const char* run : {"a", "b"}) {
    Trainer t(cfg, data);
    train_run(t, data, root / run);
  }
  {
    const auto snap = checkpoint::read(root / "a" / "checkpoints" / checkpoint_name(100));
    Trainer t(snap.config, data);
    t.restore(snap);
    train_run(t, data, root / "resumed");
  }
  const char* files[] = {"checkpoints/final.ckpt", "metrics.json", "ledger.csv"};
  bool twice = true, resumed = true;
  for (const char* f : files) {
    const std::string a = slurp(root / "a" / f);
    twice &= !a.empty() && a == slurp(root / "b" / f);
    resumed &= a == slurp(root / "resumed" / f);
  }
  twice &= slurp(root / "a/checkpoints" / checkpoint_name(200)) == slurp(root / "b/checkpoints" / checkpoint_name(200));
  return {twice && resumed, std::string("repeat run ") + (twice ? "identical" : "DIFFERS") + ", resume from step 100 " +
                                (resumed ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 9. Presence threshold
// ---------------------------------------------------------------------------

Outcome criterion9() {
  PresenceDictionary dict(0.005);
  auto present = [&](int pixels) {
    LabelMask m(64, 64, 0);
    for (int i = 0; i < pixels; ++i) m.values()[i * 37 % 4096] = 3;
    dict.update(0, m);
    return dict.contains(0, 3);
  };
  // 20/4096 = 0.00488, 21/4096 = 0.00513: the flip sits between 20 and 21.
  const bool p25 = present(25), p20 = present(20), p21 = present(21);
  return {p25 && !p20 && p21, std::string("25 px ") + (p25 ? "present" : "absent") + ", 20 px " +
                                  (p20 ? "present" : "absent") + ", 21 px " + (p21 ? "present" : "absent")};
}

}  // namespace

int main(int argc, char** argv) {
  // `--quick` skips the training experiments (criteria 6 and 7).
  const bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  try {
    report(1, "formula oracles", criterion1());
    report(2, "degeneracy equivalence", criterion2());
    report(3, "gradient vs finite differences", criterion3());
    report(4, "compositing bit-exactness", criterion4());
    report(5, "sampling statistics", criterion5());
    if (quick) {
      std::cout << "SKIP  criterion 6: ledger tail share (--quick)\nSKIP  criterion 7: component ablation (--quick)\n";
    } else {
      const Experiments e = run_experiments();
      report(6, "ledger tail share, ael vs baseline", criterion6(e));
      report(7, "component ablation", criterion7(e));
    }
    report(8, "determinism and resume", criterion8());
    report(9, "presence threshold", criterion9());
  } catch (const std::exception& ex) {
    std::cout << "FAIL  aborted: " << ex.what() << std::endl;
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
