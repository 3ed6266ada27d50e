#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "spvlad/codebook.hpp"
#include "spvlad/datamodel.hpp"

namespace spvlad {

// A synthetic scene class: one large main object in the image centre and a
// cluster of small secondary-object regions inside one level-2 cell.
struct SceneClass {
  int id = 0;
  std::vector<float> main_prototype;
  std::vector<float> secondary_prototype;
  CellId placement{2, 0};
};

struct SceneGeometry {
  std::uint32_t width = 640;
  std::uint32_t height = 480;
};

// Default region count per synthetic image (desk scale) and the large preset
// matching full-size proposal sets.
inline constexpr std::size_t kDeskRegionsPerImage = 64;
inline constexpr std::size_t kLargeRegionsPerImage = 385;

// Region 0 is the main object (a 0.6W x 0.6H box centred in the frame); the
// remaining regions_per_image - 1 are small boxes centred within a quarter
// cell of the placement cell's centre. Descriptors are the prototype plus
// N(0, noise^2) per component.
ImageRecord gen_scene(const SceneClass& cls, double noise, std::size_t regions_per_image, std::uint64_t seed,
                      const SceneGeometry& geometry = {});

// Leave-one-out 1-NN accuracy under Euclidean distance; the nearest other
// vector wins, ties to the lowest index. Throws Error for fewer than two
// vectors or mismatched lengths.
double nn_classify(const std::vector<std::vector<double>>& vectors, const std::vector<int>& labels);

struct BenchConfig {
  std::size_t classes = 4;
  std::size_t scenes_per_class = 25;
  double noise = 1.0;
  std::size_t regions_per_image = kDeskRegionsPerImage;
  std::size_t descriptor_dim = 32;
  std::size_t pca_dim = 8;
  // With placement-only classes and zero noise the data holds exactly two
  // distinct descriptors; K >= 2 would place a centroid on each and erase
  // every residual.
  std::size_t codewords = 1;
  std::size_t pca_sample = 250000;
  // All classes share both prototypes and differ only in placement.
  bool placement_only = true;
  SceneGeometry geometry;
  LloydOptions lloyd;
  unsigned threads = 1;
};

struct BenchmarkReport {
  double level1_accuracy = 0.0;
  double level2_accuracy = 0.0;
  std::size_t scene_count = 0;
  std::uint64_t seed = 0;
  BenchConfig config;
};

// Class prototypes and placements for a benchmark run. Class i is placed in
// level-2 cell i % 4.
std::vector<SceneClass> make_classes(const BenchConfig& config, std::uint64_t seed);

// Scenes in benchmark order (scene s belongs to class s % classes), with ids
// "scene_<s>".
std::vector<ImageRecord> make_scenes(const BenchConfig& config, std::uint64_t seed,
                                     std::vector<int>* labels = nullptr);

struct BenchEncodings {
  std::vector<int> labels;
  std::vector<std::vector<double>> level1;
  std::vector<std::vector<double>> level2;
};

// Generates scenes, fits PCA and codebook on their regions and encodes every
// scene at pyramid levels 1 and 2.
BenchEncodings encode_benchmark(const BenchConfig& config, std::uint64_t seed);

// encode_benchmark scored with nn_classify at both levels.
BenchmarkReport run_benchmark(const BenchConfig& config, std::uint64_t seed);

std::string report_to_json(const BenchmarkReport& report);

}  // namespace spvlad
