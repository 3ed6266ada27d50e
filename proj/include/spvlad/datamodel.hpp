#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace spvlad {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One proposal box in continuous pixel coordinates (left, top, width, height)
// together with its descriptor. Stored at file precision (f32); all derived
// geometry is computed in double.
struct RegionDescriptor {
  float x = 0.0f;
  float y = 0.0f;
  float w = 0.0f;
  float h = 0.0f;
  std::vector<float> features;

  friend bool operator==(const RegionDescriptor&, const RegionDescriptor&) = default;
};

struct ImageRecord {
  std::string id;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<RegionDescriptor> regions;

  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Box midpoint.
Point2 region_center(const RegionDescriptor& r);

// Patch scale: geometric-mean side length sqrt(w * h).
double region_scale(const RegionDescriptor& r);

// Slack allowed past the right/bottom frame edge, in pixels.
inline constexpr double kFrameSlack = 0.5;

struct Violation {
  std::size_t region;  // index into ImageRecord::regions; npos for record-level problems
  std::string message;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Every invariant violation of `rec` against descriptor dimension `dim`.
// An empty result means the record is valid.
std::vector<Violation> validate_image(const ImageRecord& rec, std::size_t dim);

// Joins violations into one human-readable line.
std::string describe(const std::vector<Violation>& violations);

// Spatial pyramid depth. Level 1 is the whole image (1 cell), level 2 adds the
// 2x2 grid (5 cells), level 3 adds the left/middle/right strips (8 cells).
class PyramidSpec {
 public:
  explicit PyramidSpec(int level = 1);

  int level() const { return level_; }
  std::size_t cell_count() const { return cells_through(level_); }

  // Cells contributed by a single level: 1, 4 or 3.
  static std::size_t cells_at(int level);
  // Cells of all levels up to and including `level`: 1, 5 or 8.
  static std::size_t cells_through(int level);

  friend bool operator==(const PyramidSpec&, const PyramidSpec&) = default;

 private:
  int level_;
};

// A single pyramid cell. Level-2 indices are row-major (TL, TR, BL, BR);
// level-3 indices are left, middle, right.
struct CellId {
  int level = 1;
  int index = 0;

  friend bool operator==(const CellId&, const CellId&) = default;
};

// All cells of `spec` in concatenation order.
std::vector<CellId> pyramid_cells(const PyramidSpec& spec);

struct CellSlice {
  CellId cell;
  std::size_t offset = 0;
  std::size_t length = 0;
  std::uint32_t region_count = 0;

  friend bool operator==(const CellSlice&, const CellSlice&) = default;
};

// Final flat representation of one image.
//
// `block_dim` is the per-codeword dimension (d, or d + 3 for augmented
// encodings). When `global_dim` is nonzero the vector starts with that many
// global-descriptor values followed by the cell slices.
struct EncodedRepresentation {
  std::string image_id;
  PyramidSpec spec;
  std::size_t codewords = 0;
  std::size_t block_dim = 0;
  bool augmented = false;
  std::size_t global_dim = 0;
  std::vector<CellSlice> layout;
  std::vector<double> vector;

  friend bool operator==(const EncodedRepresentation&, const EncodedRepresentation&) = default;
};

// cells(spec) * K * d.
std::size_t encoded_length(const PyramidSpec& spec, std::size_t codewords, std::size_t block_dim);

// Cell layout for (spec, K, d) with offsets starting at `base_offset`.
std::vector<CellSlice> make_layout(const PyramidSpec& spec, std::size_t codewords,
                                   std::size_t block_dim, std::size_t base_offset = 0);

}  // namespace spvlad
