#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spvlad/datamodel.hpp"

namespace spvlad {

class DatasetReader;

// Linear reduction x -> basis * (x - mean) from D to d dimensions.
// Basis rows are orthonormal principal directions in descending variance
// order; each row's largest-magnitude component is positive.
class PcaModel {
 public:
  PcaModel() = default;
  PcaModel(Eigen::VectorXd mean, RowMatrix basis);

  std::size_t input_dim() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(basis_.rows()); }

  const Eigen::VectorXd& mean() const { return mean_; }
  const RowMatrix& basis() const { return basis_; }

  // Keeps the leading `d` directions.
  PcaModel truncated(std::size_t d) const;

  Eigen::VectorXd project(std::span<const float> x) const;
  Eigen::VectorXd project(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  // Projects each row of `rows` (n x D) to an n x d matrix.
  RowMatrix project_rows(const RowMatrix& rows) const;

  friend bool operator==(const PcaModel& a, const PcaModel& b) {
    return a.mean_ == b.mean_ && a.basis_ == b.basis_;
  }

 private:
  Eigen::VectorXd mean_;
  RowMatrix basis_;
};

struct PcaFitOptions {
  // Samples with more rows than this are reduced block-wise to a D x D
  // triangular factor (Householder QR) before the SVD, so the full centred
  // matrix is never materialised. 0 picks max(4 * D, 4096).
  std::size_t block_rows = 0;
};

// Fits a d-dimensional PCA from the SVD of the mean-centred sample.
// Throws FitError when the sample has fewer than d rows, d exceeds D, or the
// sample has no variance ("degenerate covariance").
PcaModel fit_pca(const RowMatrix& sample, std::size_t d, const PcaFitOptions& options = {});
PcaModel fit_pca(std::span<const std::vector<float>> sample, std::size_t d,
                 const PcaFitOptions& options = {});

// Uniform reservoir sample of min(cap, total) region descriptors, in one
// streaming pass over the dataset. Throws Error when the dataset holds no
// regions.
std::vector<std::vector<float>> sample_regions(DatasetReader& reader, std::size_t cap,
                                               std::uint64_t seed);

// Default sample size for PCA training.
inline constexpr std::size_t kDefaultPcaSample = 250000;

}  // namespace spvlad
