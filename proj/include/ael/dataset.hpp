#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ael/config.hpp"
#include "ael/png_io.hpp"
#include "ael/synthdata.hpp"

namespace ael {

/// Training pool, validation split and the labeled/unlabeled partition.
struct Dataset {
  int classes = 0;
  std::vector<synth::Sample> train;  // train[i].id == i
  std::vector<synth::Sample> val;
  synth::Partition partition;

  /// Pixel counts per class over the labeled subset.
  std::vector<std::uint64_t> labeled_pixel_counts() const {
    std::vector<std::uint64_t> counts(classes, 0);
    for (int id : partition.labeled) {
      for (std::uint8_t v : train.at(id).mask.values()) {
        if (v != kIgnore && v < classes) ++counts[v];
      }
    }
    return counts;
  }
};

inline Dataset generate_dataset(const RunConfig& cfg) {
  Dataset d;
  d.classes = cfg.scene.classes;
  d.train = synth::generate_samples(cfg.scene, 0, cfg.train_count, cfg.data_seed);
  d.val = synth::generate_samples(cfg.scene, cfg.train_count, cfg.val_count, cfg.data_seed);
  d.partition = synth::make_partition(cfg.train_count, cfg.protocol, cfg.fold, cfg.data_seed);
  return d;
}

namespace dataset_files {

inline std::string partition_name(int denominator, int fold, const char* part) {
  return "partitions/1-" + std::to_string(denominator) + "_fold" + std::to_string(fold) + "." + part + ".txt";
}

inline void write_ids(const std::filesystem::path& path, const std::vector<int>& ids) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (int id : ids) out << id << '\n';
}

inline std::vector<int> read_ids(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("missing partition file " + path.string() +
                " (run `ael synthdata generate --out DIR` to create the dataset and partitions)");
  }
  std::vector<int> ids;
  int id = 0;
  while (in >> id) ids.push_back(id);
  return ids;
}

}  // namespace dataset_files

/// Writes `count` training and `val_count` validation scenes as PNG pairs,
/// a manifest (id, split, image, mask, seed), dataset.json with the scene
/// parameters and partition id lists for every protocol and fold.
inline void write_dataset(const std::filesystem::path& dir, const synth::SceneConfig& scene, int count,
                          int val_count, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "partitions");
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw Error("cannot write manifest in " + dir.string());
  manifest << "id\tsplit\timage\tmask\tseed\n";
  auto emit = [&](const std::vector<synth::Sample>& samples, const char* split) {
    for (const auto& s : samples) {
      char name[32];
      std::snprintf(name, sizeof name, "%06d.png", s.id);
      png::write_image(dir / "images" / name, s.image);
      png::write_mask(dir / "masks" / name, s.mask);
      manifest << s.id << '\t' << split << "\timages/" << name << "\tmasks/" << name << '\t' << s.seed << '\n';
    }
  };
  emit(synth::generate_samples(scene, 0, count, seed), "train");
  emit(synth::generate_samples(scene, count, val_count, seed), "val");

  nlohmann::json meta = {{"classes", scene.classes},
                         {"height", scene.height},
                         {"width", scene.width},
                         {"tail_exponent", scene.tail_exponent},
                         {"shapes_min", scene.shapes_min},
                         {"shapes_max", scene.shapes_max},
                         {"color_noise", scene.color_noise_sigma},
                         {"train_count", count},
                         {"val_count", val_count},
                         {"seed", seed},
                         {"ignore_label", kIgnore}};
  std::ofstream(dir / "dataset.json") << meta.dump(2) << '\n';

  for (int den : {2, 4, 8, 16, 32}) {
    if (den > count) continue;
    for (int fold = 0; fold < 5; ++fold) {
      const auto p = synth::make_partition(count, den, fold, seed);
      dataset_files::write_ids(dir / dataset_files::partition_name(den, fold, "labeled"), p.labeled);
      dataset_files::write_ids(dir / dataset_files::partition_name(den, fold, "unlabeled"), p.unlabeled);
    }
  }
}

inline Dataset read_dataset(const std::filesystem::path& dir, int protocol, int fold) {
  namespace fs = std::filesystem;
  const std::string hint = " (run `ael synthdata generate --out " + dir.string() + "` first)";
  if (!fs::exists(dir / "manifest.tsv") || !fs::exists(dir / "dataset.json")) {
    throw Error("no dataset found in " + dir.string() + hint);
  }
  Dataset d;
  {
    std::ifstream in(dir / "dataset.json");
    d.classes = nlohmann::json::parse(in).at("classes").get<int>();
  }
  std::ifstream manifest(dir / "manifest.tsv");
  std::string line;
  std::getline(manifest, line);  // header
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    synth::Sample s;
    std::string split, image, mask;
    row >> s.id >> split >> image >> mask >> s.seed;
    if (!row) throw Error("malformed manifest line: " + line);
    s.image = png::read_image(dir / image);
    s.mask = png::read_mask(dir / mask);
    validate(s.mask, d.classes);
    (split == "train" ? d.train : d.val).push_back(std::move(s));
  }
  for (std::size_t i = 0; i < d.train.size(); ++i) {
    if (d.train[i].id != static_cast<int>(i)) throw Error("manifest train ids must be 0..N-1 in order");
  }
  d.partition.denominator = protocol;
  d.partition.fold = fold;
  d.partition.labeled = dataset_files::read_ids(dir / dataset_files::partition_name(protocol, fold, "labeled"));
  d.partition.unlabeled = dataset_files::read_ids(dir / dataset_files::partition_name(protocol, fold, "unlabeled"));
  for (int id : d.partition.labeled) {
    if (id < 0 || id >= static_cast<int>(d.train.size())) throw Error("partition id out of range");
  }
  for (int id : d.partition.unlabeled) {
    if (id < 0 || id >= static_cast<int>(d.train.size())) throw Error("partition id out of range");
  }
  return d;
}

inline Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) return generate_dataset(cfg);
  Dataset d = read_dataset(cfg.data_dir, cfg.protocol, cfg.fold);
  if (d.classes != cfg.scene.classes) {
    throw Error("class count mismatch: dataset has " + std::to_string(d.classes) + ", config data.classes = " +
                std::to_string(cfg.scene.classes));
  }
  return d;
}

}  // namespace ael
