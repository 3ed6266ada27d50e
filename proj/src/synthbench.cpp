#include "spvlad/synthbench.hpp"

#include <limits>

#include <nlohmann/json.hpp>

#include "spvlad/encoder.hpp"
#include "spvlad/error.hpp"
#include "spvlad/parallel.hpp"
#include "spvlad/pca.hpp"
#include "spvlad/rng.hpp"

namespace spvlad {

namespace {

std::vector<float> random_prototype(std::size_t dim, Rng& rng) {
  std::vector<float> p(dim);
  for (auto& v : p) v = static_cast<float>(rng.normal());
  return p;
}

std::vector<float> noisy(const std::vector<float>& proto, double noise, Rng& rng) {
  std::vector<float> out(proto.size());
  for (std::size_t i = 0; i < proto.size(); ++i) {
    out[i] = noise == 0.0 ? proto[i] : static_cast<float>(proto[i] + noise * rng.normal());
  }
  return out;
}

// Stream ids for derive_seed.
enum : std::uint64_t { kClassStream = 0, kSampleStream = 1, kCodebookStream = 2, kSceneStream = 1000 };

}  // namespace

ImageRecord gen_scene(const SceneClass& cls, double noise, std::size_t regions_per_image, std::uint64_t seed,
                      const SceneGeometry& geometry) {
  if (noise < 0.0) throw Error("noise must be non-negative");
  if (regions_per_image == 0) throw Error("a scene needs at least one region");
  if (cls.placement.level != 2 || cls.placement.index < 0 || cls.placement.index > 3) {
    throw Error("secondary placement must be a level-2 cell");
  }
  Rng rng(seed);
  const double W = geometry.width;
  const double H = geometry.height;

  ImageRecord rec;
  rec.id = "class" + std::to_string(cls.id) + "_" + std::to_string(seed);
  rec.width = geometry.width;
  rec.height = geometry.height;
  rec.regions.reserve(regions_per_image);

  RegionDescriptor main;
  main.x = static_cast<float>(0.2 * W);
  main.y = static_cast<float>(0.2 * H);
  main.w = static_cast<float>(0.6 * W);
  main.h = static_cast<float>(0.6 * H);
  main.features = noisy(cls.main_prototype, noise, rng);
  rec.regions.push_back(std::move(main));

  const int col = cls.placement.index % 2;
  const int row = cls.placement.index / 2;
  const double anchor_x = (col + 0.5) * W / 2.0;
  const double anchor_y = (row + 0.5) * H / 2.0;
  for (std::size_t i = 1; i < regions_per_image; ++i) {
    const double cx = anchor_x + rng.uniform(-W / 8.0, W / 8.0);
    const double cy = anchor_y + rng.uniform(-H / 8.0, H / 8.0);
    const double bw = rng.uniform(W / 32.0, W / 16.0);
    const double bh = rng.uniform(H / 32.0, H / 16.0);
    RegionDescriptor r;
    r.x = static_cast<float>(cx - bw / 2.0);
    r.y = static_cast<float>(cy - bh / 2.0);
    r.w = static_cast<float>(bw);
    r.h = static_cast<float>(bh);
    r.features = noisy(cls.secondary_prototype, noise, rng);
    rec.regions.push_back(std::move(r));
  }
  return rec;
}

double nn_classify(const std::vector<std::vector<double>>& vectors, const std::vector<int>& labels) {
  const std::size_t n = vectors.size();
  if (n < 2) throw Error("nearest-neighbour evaluation needs at least two encodings");
  if (labels.size() != n) throw Error("label count does not match encoding count");
  for (const auto& v : vectors) {
    if (v.size() != vectors.front().size()) throw DimensionError("encodings differ in length");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = n;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = 0.0;
      for (std::size_t k = 0; k < vectors[i].size(); ++k) {
        const double diff = vectors[i][k] - vectors[j][k];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    if (best < n && labels[best] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<SceneClass> make_classes(const BenchConfig& config, std::uint64_t seed) {
  if (config.classes == 0) throw Error("benchmark needs at least one class");
  Rng rng(derive_seed(seed, kClassStream));
  std::vector<SceneClass> classes(config.classes);
  const auto shared_main = random_prototype(config.descriptor_dim, rng);
  const auto shared_secondary = random_prototype(config.descriptor_dim, rng);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    SceneClass& c = classes[i];
    c.id = static_cast<int>(i);
    c.placement = {2, static_cast<int>(i % 4)};
    if (config.placement_only) {
      c.main_prototype = shared_main;
      c.secondary_prototype = shared_secondary;
    } else {
      c.main_prototype = random_prototype(config.descriptor_dim, rng);
      c.secondary_prototype = random_prototype(config.descriptor_dim, rng);
    }
  }
  return classes;
}

std::vector<ImageRecord> make_scenes(const BenchConfig& config, std::uint64_t seed, std::vector<int>* labels) {
  const auto classes = make_classes(config, seed);
  const std::size_t total = config.classes * config.scenes_per_class;
  std::vector<ImageRecord> scenes(total);
  parallel_for(total, config.threads, [&](std::size_t s) {
    const SceneClass& cls = classes[s % classes.size()];
    scenes[s] = gen_scene(cls, config.noise, config.regions_per_image, derive_seed(seed, kSceneStream + s),
                          config.geometry);
    scenes[s].id = "scene_" + std::to_string(s);
  });
  if (labels) {
    labels->resize(total);
    for (std::size_t s = 0; s < total; ++s) (*labels)[s] = classes[s % classes.size()].id;
  }
  return scenes;
}

BenchEncodings encode_benchmark(const BenchConfig& config, std::uint64_t seed) {
  BenchEncodings out;
  const auto scenes = make_scenes(config, seed, &out.labels);
  if (scenes.size() < 2) throw Error("benchmark needs at least two scenes");

  Reservoir<const std::vector<float>*> reservoir(config.pca_sample, derive_seed(seed, kSampleStream));
  for (const auto& rec : scenes) {
    for (const auto& r : rec.regions) reservoir.offer(&r.features);
  }
  RowMatrix sample(static_cast<Eigen::Index>(reservoir.items().size()),
                   static_cast<Eigen::Index>(config.descriptor_dim));
  for (std::size_t i = 0; i < reservoir.items().size(); ++i) {
    const auto& f = *reservoir.items()[i];
    for (std::size_t c = 0; c < f.size(); ++c) sample(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = f[c];
  }
  const PcaModel pca = fit_pca(sample, config.pca_dim);
  LloydOptions lloyd = config.lloyd;
  lloyd.threads = config.threads;
  const Codebook cb =
      train_codebook(pca.project_rows(sample), config.codewords, derive_seed(seed, kCodebookStream), lloyd).codebook;

  out.level1.resize(scenes.size());
  out.level2.resize(scenes.size());
  parallel_for(scenes.size(), config.threads, [&](std::size_t s) {
    out.level1[s] = encode_pyramid(pca, cb, scenes[s], PyramidSpec(1)).vector;
    out.level2[s] = encode_pyramid(pca, cb, scenes[s], PyramidSpec(2)).vector;
  });
  return out;
}

BenchmarkReport run_benchmark(const BenchConfig& config, std::uint64_t seed) {
  const BenchEncodings enc = encode_benchmark(config, seed);
  BenchmarkReport report;
  report.level1_accuracy = nn_classify(enc.level1, enc.labels);
  report.level2_accuracy = nn_classify(enc.level2, enc.labels);
  report.scene_count = enc.labels.size();
  report.seed = seed;
  report.config = config;
  return report;
}

std::string report_to_json(const BenchmarkReport& report) {
  nlohmann::ordered_json doc;
  doc["seed"] = report.seed;
  doc["scene_count"] = report.scene_count;
  doc["accuracy"] = {{"level1", report.level1_accuracy}, {"level2", report.level2_accuracy}};
  const BenchConfig& c = report.config;
  doc["config"] = {{"classes", c.classes},
                   {"scenes_per_class", c.scenes_per_class},
                   {"noise", c.noise},
                   {"regions_per_image", c.regions_per_image},
                   {"descriptor_dim", c.descriptor_dim},
                   {"pca_dim", c.pca_dim},
                   {"codewords", c.codewords},
                   {"placement_only", c.placement_only},
                   {"width", c.geometry.width},
                   {"height", c.geometry.height}};
  return doc.dump(2);
}

}  // namespace spvlad
