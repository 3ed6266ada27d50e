#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "spvlad/datamodel.hpp"

namespace spvlad {

// K centroids in d dimensions: the visual words VLAD quantizes against.
class Codebook {
 public:
  Codebook() = default;
  explicit Codebook(RowMatrix centroids, std::optional<double> inertia = std::nullopt);

  std::size_t size() const { return static_cast<std::size_t>(centroids_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(centroids_.cols()); }
  const RowMatrix& centroids() const { return centroids_; }

  // Training objective at the end of Lloyd iterations. Not persisted, so a
  // codebook loaded from disk has none.
  std::optional<double> inertia() const { return inertia_; }

  // Nearest centroid by Euclidean distance; ties go to the lowest index.
  std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  friend bool operator==(const Codebook& a, const Codebook& b) { return a.centroids_ == b.centroids_; }

 private:
  RowMatrix centroids_;
  std::optional<double> inertia_;
};

// Throws DimensionError when x has the wrong length.
std::size_t assign(const Codebook& cb, const Eigen::Ref<const Eigen::VectorXd>& x);

// k-means++ seeding: first centre uniform over the rows of `points`, each
// later centre drawn with probability proportional to the squared distance
// to the nearest centre already chosen. Throws FitError when `points` has
// fewer than K distinct rows.
RowMatrix seed_plusplus(const RowMatrix& points, std::size_t k, std::uint64_t seed);

struct LloydOptions {
  int max_iter = 100;
  // Stop once (previous - current) inertia < tol * previous.
  double tol = 1e-6;
  unsigned threads = 1;
};

struct LloydResult {
  Codebook codebook;
  // Inertia after each assignment step; the first entry is measured against
  // the initial centroids. Non-increasing.
  std::vector<double> inertia_trace;
  std::vector<std::size_t> assignment;
  int iterations = 0;
  bool converged = false;
};

// Lloyd iterations from `init`. A centroid left with no points is moved onto
// the point farthest from its own centroid.
LloydResult lloyd(const RowMatrix& points, const RowMatrix& init, const LloydOptions& options = {});

// seed_plusplus followed by lloyd.
LloydResult train_codebook(const RowMatrix& points, std::size_t k, std::uint64_t seed,
                           const LloydOptions& options = {});

}  // namespace spvlad
