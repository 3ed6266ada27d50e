#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spvlad/datamodel.hpp"
#include "spvlad/rng.hpp"

namespace testutil {

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("spvlad_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline spvlad::RowMatrix random_matrix(std::size_t rows, std::size_t cols, spvlad::Rng& rng, double scale = 1.0) {
  spvlad::RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * rng.normal();
  return m;
}

inline std::vector<std::vector<double>> to_rows(const spvlad::RowMatrix& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)].assign(m.row(i).data(), m.row(i).data() + m.cols());
  return out;
}

// Valid random record: W x H frame, n regions of dimension dim.
inline spvlad::ImageRecord random_record(spvlad::Rng& rng, std::size_t n, std::size_t dim,
                                         std::uint32_t width = 640, std::uint32_t height = 480,
                                         const std::string& id = "img") {
  spvlad::ImageRecord rec;
  rec.id = id;
  rec.width = width;
  rec.height = height;
  for (std::size_t i = 0; i < n; ++i) {
    spvlad::RegionDescriptor r;
    r.w = static_cast<float>(rng.uniform(1.0, width));
    r.h = static_cast<float>(rng.uniform(1.0, height));
    r.x = static_cast<float>(rng.uniform(0.0, width - r.w));
    r.y = static_cast<float>(rng.uniform(0.0, height - r.h));
    r.features.resize(dim);
    for (auto& v : r.features) v = static_cast<float>(rng.normal());
    rec.regions.push_back(std::move(r));
  }
  return rec;
}

}  // namespace testutil
