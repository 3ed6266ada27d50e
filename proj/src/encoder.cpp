#include "spvlad/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "spvlad/error.hpp"

namespace spvlad {

namespace {

std::vector<std::size_t> nearest_labels(const Codebook& cb, const RowMatrix& descriptors) {
  if (descriptors.rows() > 0 && static_cast<std::size_t>(descriptors.cols()) != cb.dim()) {
    throw DimensionError("descriptors have dimension " + std::to_string(descriptors.cols()) +
                         ", codebook dimension is " + std::to_string(cb.dim()));
  }
  std::vector<std::size_t> labels(static_cast<std::size_t>(descriptors.rows()));
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    labels[static_cast<std::size_t>(i)] = cb.assign(descriptors.row(i).transpose());
  }
  return labels;
}

// Adds the residuals of `rows` into out[0 .. K*d).
void accumulate(const Codebook& cb, const RowMatrix& descriptors, const std::vector<std::size_t>& labels,
                const std::vector<std::size_t>& rows, double* out) {
  const auto d = static_cast<Eigen::Index>(cb.dim());
  for (std::size_t i : rows) {
    const auto k = static_cast<Eigen::Index>(labels[i]);
    Eigen::Map<Eigen::RowVectorXd> block(out + k * d, d);
    block += descriptors.row(static_cast<Eigen::Index>(i)) - cb.centroids().row(k);
  }
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void scale_in_place(std::span<double> v, double norm) {
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

std::vector<double> signed_sqrt(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = std::sqrt(std::abs(v[i]));
    out[i] = v[i] < 0.0 ? -r : (v[i] > 0.0 ? r : 0.0);
  }
  return out;
}

}  // namespace

std::vector<double> vlad_raw(const Codebook& cb, const RowMatrix& descriptors) {
  const auto labels = nearest_labels(cb, descriptors);
  std::vector<std::size_t> all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<double> out(cb.size() * cb.dim(), 0.0);
  accumulate(cb, descriptors, labels, all, out.data());
  return out;
}

std::vector<double> normalize_ssr(std::span<const double> v) {
  std::vector<double> out = signed_sqrt(v);
  scale_in_place(out, l2(out));
  return out;
}

std::vector<double> normalize_intra(std::span<const double> v, std::size_t block_dim) {
  if (block_dim == 0 || v.size() % block_dim != 0) {
    throw DimensionError("vector of length " + std::to_string(v.size()) + " does not split into blocks of " +
                         std::to_string(block_dim));
  }
  std::vector<double> out = signed_sqrt(v);
  for (std::size_t off = 0; off < out.size(); off += block_dim) {
    std::span<double> block(out.data() + off, block_dim);
    scale_in_place(block, l2(block));
  }
  scale_in_place(out, l2(out));
  return out;
}

std::vector<double> normalize(std::span<const double> v, std::size_t block_dim, Normalization mode) {
  return mode == Normalization::kIntra ? normalize_intra(v, block_dim) : normalize_ssr(v);
}

CellId assign_cell(int level, std::uint32_t width, std::uint32_t height, const RegionDescriptor& r) {
  const Point2 c = region_center(r);
  const double w = width;
  const double h = height;
  switch (level) {
    case 1:
      return {1, 0};
    case 2: {
      const int col = c.x < w / 2.0 ? 0 : 1;
      const int row = c.y < h / 2.0 ? 0 : 1;
      return {2, 2 * row + col};
    }
    case 3: {
      const double third = std::floor(3.0 * c.x / w);
      return {3, static_cast<int>(std::clamp(third, 0.0, 2.0))};
    }
    default:
      throw Error("pyramid level must be 1, 2 or 3 (got " + std::to_string(level) + ")");
  }
}

RowMatrix project_regions(const PcaModel& pca, const ImageRecord& rec) {
  RowMatrix out(static_cast<Eigen::Index>(rec.regions.size()), static_cast<Eigen::Index>(pca.output_dim()));
  for (std::size_t i = 0; i < rec.regions.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = pca.project(std::span<const float>(rec.regions[i].features)).transpose();
  }
  return out;
}

PyramidRaw pyramid_raw(const Codebook& cb, const RowMatrix& projected, const ImageRecord& rec,
                       const PyramidSpec& spec) {
  if (static_cast<std::size_t>(projected.rows()) != rec.regions.size()) {
    throw DimensionError("projected rows do not match the region count");
  }
  const auto labels = nearest_labels(cb, projected);
  PyramidRaw out;
  out.layout = make_layout(spec, cb.size(), cb.dim());
  out.values.assign(encoded_length(spec, cb.size(), cb.dim()), 0.0);

  std::size_t slice = 0;
  for (int level = 1; level <= spec.level(); ++level) {
    std::vector<std::vector<std::size_t>> members(PyramidSpec::cells_at(level));
    for (std::size_t i = 0; i < rec.regions.size(); ++i) {
      const CellId cell = assign_cell(level, rec.width, rec.height, rec.regions[i]);
      members[static_cast<std::size_t>(cell.index)].push_back(i);
    }
    for (const auto& rows : members) {
      CellSlice& s = out.layout[slice++];
      s.region_count = static_cast<std::uint32_t>(rows.size());
      accumulate(cb, projected, labels, rows, out.values.data() + s.offset);
    }
  }
  return out;
}

EncodedRepresentation encode_pyramid(const PcaModel& pca, const Codebook& cb, const ImageRecord& rec,
                                     const PyramidSpec& spec, const EncodeOptions& options) {
  if (cb.dim() != pca.output_dim()) {
    throw DimensionError("codebook dimension " + std::to_string(cb.dim()) + " does not match PCA output " +
                         std::to_string(pca.output_dim()));
  }
  const RowMatrix projected = project_regions(pca, rec);
  PyramidRaw raw = pyramid_raw(cb, projected, rec, spec);

  EncodedRepresentation enc;
  enc.image_id = rec.id;
  enc.spec = spec;
  enc.codewords = cb.size();
  enc.block_dim = cb.dim();
  enc.layout = std::move(raw.layout);
  enc.vector.resize(raw.values.size());
  for (const CellSlice& s : enc.layout) {
    const auto cell = normalize(std::span<const double>(raw.values.data() + s.offset, s.length), cb.dim(),
                                options.normalization);
    std::copy(cell.begin(), cell.end(), enc.vector.begin() + static_cast<std::ptrdiff_t>(s.offset));
  }
  return enc;
}

std::vector<double> AugmentedDescriptor::to_vector() const {
  std::vector<double> out = base;
  out.push_back(rel_x);
  out.push_back(rel_y);
  out.push_back(log_scale);
  return out;
}

AugmentedDescriptor augment(const RegionDescriptor& r, std::span<const double> projected, std::uint32_t width,
                            std::uint32_t height) {
  if (width == 0 || height == 0) throw Error("image dimensions must be positive");
  const Point2 c = region_center(r);
  const double w = width;
  const double h = height;
  AugmentedDescriptor a;
  a.base.assign(projected.begin(), projected.end());
  a.rel_x = std::clamp(c.x / w - 0.5, -0.5, 0.5);
  a.rel_y = std::clamp(c.y / h - 0.5, -0.5, 0.5);
  a.log_scale = std::log(region_scale(r)) - std::log(std::sqrt(w * h));
  return a;
}

RowMatrix augmented_rows(const PcaModel& pca, const ImageRecord& rec) {
  const RowMatrix projected = project_regions(pca, rec);
  const auto d = projected.cols();
  RowMatrix out(projected.rows(), d + 3);
  for (Eigen::Index i = 0; i < projected.rows(); ++i) {
    const Eigen::RowVectorXd row = projected.row(i);
    const auto a = augment(rec.regions[static_cast<std::size_t>(i)], std::span<const double>(row.data(), row.size()),
                           rec.width, rec.height);
    out.row(i).head(d) = row;
    out(i, d) = a.rel_x;
    out(i, d + 1) = a.rel_y;
    out(i, d + 2) = a.log_scale;
  }
  return out;
}

EncodedRepresentation encode_augmented(const PcaModel& pca, const Codebook& cb_aug, const ImageRecord& rec,
                                       const EncodeOptions& options) {
  if (cb_aug.dim() != pca.output_dim() + 3) {
    throw DimensionError("augmented codebook dimension " + std::to_string(cb_aug.dim()) + " must be PCA output + 3 = " +
                         std::to_string(pca.output_dim() + 3));
  }
  const RowMatrix rows = augmented_rows(pca, rec);
  const PyramidSpec spec(1);
  EncodedRepresentation enc;
  enc.image_id = rec.id;
  enc.spec = spec;
  enc.codewords = cb_aug.size();
  enc.block_dim = cb_aug.dim();
  enc.augmented = true;
  enc.layout = make_layout(spec, enc.codewords, enc.block_dim);
  enc.layout.front().region_count = static_cast<std::uint32_t>(rec.regions.size());
  enc.vector = normalize(vlad_raw(cb_aug, rows), cb_aug.dim(), options.normalization);
  return enc;
}

std::vector<double> concat_global(const EncodedRepresentation& enc, std::span<const double> global_desc) {
  std::vector<double> out;
  out.reserve(global_desc.size() + enc.vector.size());
  out.insert(out.end(), global_desc.begin(), global_desc.end());
  out.insert(out.end(), enc.vector.begin(), enc.vector.end());
  return out;
}

EncodedRepresentation with_global(EncodedRepresentation enc, std::span<const double> global_desc) {
  enc.vector = concat_global(enc, global_desc);
  for (auto& s : enc.layout) s.offset += global_desc.size();
  enc.global_dim += global_desc.size();
  return enc;
}

std::optional<std::size_t> find_full_frame(const ImageRecord& rec) {
  for (std::size_t i = 0; i < rec.regions.size(); ++i) {
    const auto& r = rec.regions[i];
    if (std::abs(r.x) <= 0.5f && std::abs(r.y) <= 0.5f && std::abs(r.w - static_cast<float>(rec.width)) <= 0.5f &&
        std::abs(r.h - static_cast<float>(rec.height)) <= 0.5f) {
      return i;
    }
  }
  return std::nullopt;
}

}  // namespace spvlad
