#include "spvlad/datamodel.hpp"

#include <cmath>
#include <sstream>

#include "spvlad/error.hpp"

namespace spvlad {

Point2 region_center(const RegionDescriptor& r) {
  return {static_cast<double>(r.x) + static_cast<double>(r.w) / 2.0,
          static_cast<double>(r.y) + static_cast<double>(r.h) / 2.0};
}

double region_scale(const RegionDescriptor& r) {
  return std::sqrt(static_cast<double>(r.w) * static_cast<double>(r.h));
}

std::vector<Violation> validate_image(const ImageRecord& rec, std::size_t dim) {
  std::vector<Violation> out;
  auto record_level = [&](std::string msg) { out.push_back({Violation::npos, std::move(msg)}); };
  if (rec.width == 0) record_level("non-positive image width");
  if (rec.height == 0) record_level("non-positive image height");
  if (rec.regions.empty()) record_level("record has no regions");

  const double max_x = static_cast<double>(rec.width) + kFrameSlack;
  const double max_y = static_cast<double>(rec.height) + kFrameSlack;
  for (std::size_t i = 0; i < rec.regions.size(); ++i) {
    const RegionDescriptor& r = rec.regions[i];
    auto add = [&](const std::string& what) {
      out.push_back({i, what + " at region " + std::to_string(i)});
    };
    if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.w) || !std::isfinite(r.h)) {
      add("non-finite box coordinate");
      continue;
    }
    if (r.w <= 0.0f) add("non-positive width");
    if (r.h <= 0.0f) add("non-positive height");
    if (r.x < 0.0f) add("negative left edge");
    if (r.y < 0.0f) add("negative top edge");
    if (static_cast<double>(r.x) + r.w > max_x) add("box extends past image width");
    if (static_cast<double>(r.y) + r.h > max_y) add("box extends past image height");
    if (r.features.size() != dim) {
      add("feature dimension " + std::to_string(r.features.size()) +
          " does not match dataset dimension " + std::to_string(dim));
    }
  }
  return out;
}

std::string describe(const std::vector<Violation>& violations) {
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

PyramidSpec::PyramidSpec(int level) : level_(level) {
  if (level < 1 || level > 3) {
    throw Error("pyramid level must be 1, 2 or 3 (got " + std::to_string(level) + ")");
  }
}

std::size_t PyramidSpec::cells_at(int level) {
  switch (level) {
    case 1: return 1;
    case 2: return 4;
    case 3: return 3;
    default: throw Error("pyramid level must be 1, 2 or 3");
  }
}

std::size_t PyramidSpec::cells_through(int level) {
  std::size_t total = 0;
  for (int l = 1; l <= level; ++l) total += cells_at(l);
  return total;
}

std::vector<CellId> pyramid_cells(const PyramidSpec& spec) {
  std::vector<CellId> cells;
  cells.reserve(spec.cell_count());
  for (int l = 1; l <= spec.level(); ++l) {
    const int n = static_cast<int>(PyramidSpec::cells_at(l));
    for (int i = 0; i < n; ++i) cells.push_back({l, i});
  }
  return cells;
}

std::size_t encoded_length(const PyramidSpec& spec, std::size_t codewords, std::size_t block_dim) {
  return spec.cell_count() * codewords * block_dim;
}

std::vector<CellSlice> make_layout(const PyramidSpec& spec, std::size_t codewords,
                                   std::size_t block_dim, std::size_t base_offset) {
  std::vector<CellSlice> layout;
  const std::size_t len = codewords * block_dim;
  std::size_t offset = base_offset;
  for (const CellId& c : pyramid_cells(spec)) {
    layout.push_back({c, offset, len, 0});
    offset += len;
  }
  return layout;
}

}  // namespace spvlad
