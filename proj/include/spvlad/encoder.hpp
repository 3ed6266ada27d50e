#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "spvlad/codebook.hpp"
#include "spvlad/datamodel.hpp"
#include "spvlad/pca.hpp"

namespace spvlad {

enum class Normalization {
  // Signed square root over the whole cell vector, then one L2 per cell.
  kSsr,
  // Signed square root, L2 per codeword block, then one L2 per cell.
  kIntra,
};

struct EncodeOptions {
  Normalization normalization = Normalization::kSsr;
};

// Raw VLAD: block k holds the sum of (x - c_k) over descriptors (rows) whose
// nearest centroid is k. Returns K * d values; unused blocks are zero.
std::vector<double> vlad_raw(const Codebook& cb, const RowMatrix& descriptors);

// sign(v) * sqrt(|v|) componentwise, then divided by its L2 norm. A zero
// input maps to a zero output.
std::vector<double> normalize_ssr(std::span<const double> v);

// Signed square root, L2 per block of `block_dim`, then L2 over the whole.
std::vector<double> normalize_intra(std::span<const double> v, std::size_t block_dim);

std::vector<double> normalize(std::span<const double> v, std::size_t block_dim, Normalization mode);

// Pyramid cell holding the region centre at `level`. Level 2 splits at W/2
// and H/2 with centres on a split going right/down; level 3 uses
// min(floor(3 cx / W), 2). Level 1 always yields cell 0.
CellId assign_cell(int level, std::uint32_t width, std::uint32_t height, const RegionDescriptor& r);

// PCA projection of every region descriptor, one row per region.
RowMatrix project_regions(const PcaModel& pca, const ImageRecord& rec);

// Unnormalised per-cell VLAD vectors for every cell of `spec`, laid out in
// concatenation order, with per-cell region counts in `layout`.
struct PyramidRaw {
  std::vector<CellSlice> layout;
  std::vector<double> values;
};

PyramidRaw pyramid_raw(const Codebook& cb, const RowMatrix& projected, const ImageRecord& rec,
                       const PyramidSpec& spec);

// Projects, codes and normalises every cell: level 1, then level-2 cells
// 0..3, then level-3 cells 0..2. Length cells * K * d.
EncodedRepresentation encode_pyramid(const PcaModel& pca, const Codebook& cb, const ImageRecord& rec,
                                     const PyramidSpec& spec, const EncodeOptions& options = {});

// A projected descriptor with its normalised location and scale appended.
struct AugmentedDescriptor {
  std::vector<double> base;
  double rel_x = 0.0;
  double rel_y = 0.0;
  double log_scale = 0.0;

  std::vector<double> to_vector() const;
};

// Appends (cx / W - 0.5, cy / H - 0.5, log sigma - log sqrt(W H)). The two
// relative coordinates are clamped to [-0.5, 0.5] so boxes that use the
// half-pixel frame slack stay inside the range.
AugmentedDescriptor augment(const RegionDescriptor& r, std::span<const double> projected, std::uint32_t width,
                            std::uint32_t height);

// Single-cell VLAD over augmented descriptors; length K * (d + 3).
// `cb_aug` must have dimension d + 3.
EncodedRepresentation encode_augmented(const PcaModel& pca, const Codebook& cb_aug, const ImageRecord& rec,
                                       const EncodeOptions& options = {});

// Augmented descriptors of every region of `rec`, one row each.
RowMatrix augmented_rows(const PcaModel& pca, const ImageRecord& rec);

// Global descriptor followed by the encoding vector.
std::vector<double> concat_global(const EncodedRepresentation& enc, std::span<const double> global_desc);

// Same as concat_global but keeps the representation and its cell layout
// (offsets shift by the global length).
EncodedRepresentation with_global(EncodedRepresentation enc, std::span<const double> global_desc);

// Index of the first region that covers the full image frame, if any.
std::optional<std::size_t> find_full_frame(const ImageRecord& rec);

}  // namespace spvlad
