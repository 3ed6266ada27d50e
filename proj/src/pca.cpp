#include "spvlad/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "spvlad/error.hpp"
#include "spvlad/ingest.hpp"
#include "spvlad/rng.hpp"

namespace spvlad {

PcaModel::PcaModel(Eigen::VectorXd mean, RowMatrix basis) : mean_(std::move(mean)), basis_(std::move(basis)) {
  if (basis_.cols() != mean_.size()) {
    throw DimensionError("PCA basis has " + std::to_string(basis_.cols()) + " columns but mean has " +
                         std::to_string(mean_.size()) + " entries");
  }
}

PcaModel PcaModel::truncated(std::size_t d) const {
  if (d == 0 || d > output_dim()) {
    throw DimensionError("cannot truncate a " + std::to_string(output_dim()) + "-dimensional PCA to " +
                         std::to_string(d));
  }
  return PcaModel(mean_, basis_.topRows(static_cast<Eigen::Index>(d)));
}

Eigen::VectorXd PcaModel::project(std::span<const float> x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("descriptor has " + std::to_string(x.size()) + " values, PCA expects " +
                         std::to_string(input_dim()));
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return basis_ * (v - mean_);
}

Eigen::VectorXd PcaModel::project(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    throw DimensionError("descriptor has " + std::to_string(x.size()) + " values, PCA expects " +
                         std::to_string(input_dim()));
  }
  return basis_ * (x - mean_);
}

RowMatrix PcaModel::project_rows(const RowMatrix& rows) const {
  if (static_cast<std::size_t>(rows.cols()) != input_dim()) {
    throw DimensionError("rows have " + std::to_string(rows.cols()) + " columns, PCA expects " +
                         std::to_string(input_dim()));
  }
  return (rows.rowwise() - mean_.transpose()) * basis_.transpose();
}

namespace {

// Fetches sample row i into a D-vector.
template <typename RowFn>
PcaModel fit_impl(std::size_t n, std::size_t dim, std::size_t d, const PcaFitOptions& options,
                  RowFn&& fetch) {
  if (d == 0) throw FitError("PCA output dimension must be positive");
  if (dim == 0) throw FitError("PCA sample has zero-dimensional descriptors");
  if (d > dim) {
    throw FitError("PCA output dimension " + std::to_string(d) + " exceeds input dimension " +
                   std::to_string(dim));
  }
  if (n < d) {
    throw FitError("PCA sample of " + std::to_string(n) + " rows is smaller than d = " + std::to_string(d));
  }
  const auto D = static_cast<Eigen::Index>(dim);

  Eigen::VectorXd row(D);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(D);
  double max_abs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fetch(i, row);
    mean += row;
    max_abs = std::max(max_abs, row.cwiseAbs().maxCoeff());
  }
  mean /= static_cast<double>(n);

  const std::size_t block = options.block_rows ? options.block_rows : std::max<std::size_t>(4 * dim, 4096);

  // Factor whose right singular vectors and singular values equal those of
  // the centred sample: the sample itself, or its stacked QR triangle.
  RowMatrix factor;
  if (n <= block) {
    factor.resize(static_cast<Eigen::Index>(n), D);
    for (std::size_t i = 0; i < n; ++i) {
      fetch(i, row);
      factor.row(static_cast<Eigen::Index>(i)) = (row - mean).transpose();
    }
  } else {
    RowMatrix triangle(0, D);
    std::size_t i = 0;
    while (i < n) {
      const std::size_t take = std::min(block, n - i);
      RowMatrix stacked(triangle.rows() + static_cast<Eigen::Index>(take), D);
      stacked.topRows(triangle.rows()) = triangle;
      for (std::size_t j = 0; j < take; ++j) {
        fetch(i + j, row);
        stacked.row(triangle.rows() + static_cast<Eigen::Index>(j)) = (row - mean).transpose();
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(stacked);
      const Eigen::Index keep = std::min(stacked.rows(), D);
      triangle = qr.matrixQR().topRows(keep).triangularView<Eigen::Upper>();
      i += take;
    }
    factor = std::move(triangle);
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(factor, Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double scale = std::max(1.0, max_abs) * std::sqrt(static_cast<double>(n));
  if (sv.size() == 0 || sv[0] <= 1e-12 * scale) throw FitError("degenerate covariance");
  if (static_cast<std::size_t>(svd.matrixV().cols()) < d) {
    throw FitError("sample rank cannot support d = " + std::to_string(d));
  }

  RowMatrix basis = svd.matrixV().leftCols(static_cast<Eigen::Index>(d)).transpose();
  for (Eigen::Index r = 0; r < basis.rows(); ++r) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index c = 0; c < D; ++c) {
      const double a = std::abs(basis(r, c));
      if (a > best) {
        best = a;
        arg = c;
      }
    }
    if (basis(r, arg) < 0.0) basis.row(r) *= -1.0;
  }
  return PcaModel(std::move(mean), std::move(basis));
}

}  // namespace

PcaModel fit_pca(const RowMatrix& sample, std::size_t d, const PcaFitOptions& options) {
  return fit_impl(static_cast<std::size_t>(sample.rows()), static_cast<std::size_t>(sample.cols()), d, options,
                  [&](std::size_t i, Eigen::VectorXd& out) {
                    out = sample.row(static_cast<Eigen::Index>(i)).transpose();
                  });
}

PcaModel fit_pca(std::span<const std::vector<float>> sample, std::size_t d, const PcaFitOptions& options) {
  const std::size_t dim = sample.empty() ? 0 : sample.front().size();
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample[i].size() != dim) {
      throw DimensionError("PCA sample row " + std::to_string(i) + " has " + std::to_string(sample[i].size()) +
                           " values, expected " + std::to_string(dim));
    }
  }
  if (sample.empty()) throw FitError("PCA sample is empty");
  return fit_impl(sample.size(), dim, d, options, [&](std::size_t i, Eigen::VectorXd& out) {
    const auto& src = sample[i];
    for (std::size_t c = 0; c < dim; ++c) out[static_cast<Eigen::Index>(c)] = src[c];
  });
}

std::vector<std::vector<float>> sample_regions(DatasetReader& reader, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw Error("sample cap must be at least 1");
  Reservoir<std::vector<float>> reservoir(cap, seed);
  while (auto rec = reader.next()) {
    for (auto& region : rec->regions) reservoir.offer(std::move(region.features));
  }
  if (reservoir.seen() == 0) throw Error("dataset contains no regions to sample");
  return std::move(reservoir.items());
}

}  // namespace spvlad
