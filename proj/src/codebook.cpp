#include "spvlad/codebook.hpp"

#include <limits>

#include "spvlad/error.hpp"
#include "spvlad/parallel.hpp"
#include "spvlad/rng.hpp"

namespace spvlad {

Codebook::Codebook(RowMatrix centroids, std::optional<double> inertia)
    : centroids_(std::move(centroids)), inertia_(inertia) {
  if (centroids_.rows() == 0 || centroids_.cols() == 0) throw Error("codebook needs at least one non-empty centroid");
}

std::size_t Codebook::assign(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return spvlad::assign(*this, x);
}

namespace {

// Nearest row of `centroids` to row `i` of `points`; writes the squared distance.
std::size_t nearest(const RowMatrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& x, double& dist2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
    const double d = (x - centroids.row(k)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::size_t>(k);
    }
  }
  dist2 = best_d;
  return best;
}

struct Assignment {
  std::vector<std::size_t> label;
  std::vector<double> dist2;
  double inertia = 0.0;
};

Assignment assign_all(const RowMatrix& points, const RowMatrix& centroids, unsigned threads) {
  const auto n = static_cast<std::size_t>(points.rows());
  Assignment a;
  a.label.resize(n);
  a.dist2.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    a.label[i] = nearest(centroids, points.row(static_cast<Eigen::Index>(i)), a.dist2[i]);
  });
  for (double d : a.dist2) a.inertia += d;
  return a;
}

// Means of assigned points; empty clusters are moved onto the farthest points.
RowMatrix update_centroids(const RowMatrix& points, const RowMatrix& current, const Assignment& a) {
  const Eigen::Index k = current.rows();
  RowMatrix sums = RowMatrix::Zero(k, current.cols());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < a.label.size(); ++i) {
    sums.row(static_cast<Eigen::Index>(a.label[i])) += points.row(static_cast<Eigen::Index>(i));
    ++counts[a.label[i]];
  }
  RowMatrix next = current;
  std::vector<bool> taken(a.label.size(), false);
  for (Eigen::Index c = 0; c < k; ++c) {
    const std::size_t count = counts[static_cast<std::size_t>(c)];
    if (count > 0) {
      next.row(c) = sums.row(c) / static_cast<double>(count);
      continue;
    }
    std::size_t far = a.label.size();
    double far_d = -1.0;
    for (std::size_t i = 0; i < a.label.size(); ++i) {
      if (!taken[i] && a.dist2[i] > far_d) {
        far_d = a.dist2[i];
        far = i;
      }
    }
    if (far < a.label.size()) {
      taken[far] = true;
      next.row(c) = points.row(static_cast<Eigen::Index>(far));
    }
  }
  return next;
}

}  // namespace

std::size_t assign(const Codebook& cb, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (static_cast<std::size_t>(x.size()) != cb.dim()) {
    throw DimensionError("vector has " + std::to_string(x.size()) + " values, codebook dimension is " +
                         std::to_string(cb.dim()));
  }
  double unused;
  return nearest(cb.centroids(), x.transpose(), unused);
}

RowMatrix seed_plusplus(const RowMatrix& points, std::size_t k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (k == 0) throw FitError("codebook size K must be at least 1");
  if (n < k) {
    throw FitError("k-means++ needs at least " + std::to_string(k) + " distinct points, got " +
                   std::to_string(n) + " points");
  }
  Rng rng(seed);
  RowMatrix centers(static_cast<Eigen::Index>(k), points.cols());
  std::size_t first = rng.uniform_index(n);
  centers.row(0) = points.row(static_cast<Eigen::Index>(first));

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = (points.row(static_cast<Eigen::Index>(i)) - centers.row(0)).squaredNorm();
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    if (!(total > 0.0)) {
      throw FitError("k-means++ needs at least " + std::to_string(k) + " distinct points, got " +
                     std::to_string(c));
    }
    const double target = rng.uniform01() * total;
    std::size_t pick = n;
    std::size_t last_positive = n;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      last_positive = i;
      cumulative += d2[i];
      if (cumulative > target) {
        pick = i;
        break;
      }
    }
    if (pick == n) pick = last_positive;
    const auto row = static_cast<Eigen::Index>(c);
    centers.row(row) = points.row(static_cast<Eigen::Index>(pick));
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(row)).squaredNorm();
      if (d < d2[i]) d2[i] = d;
    }
  }
  return centers;
}

LloydResult lloyd(const RowMatrix& points, const RowMatrix& init, const LloydOptions& options) {
  if (points.rows() == 0) throw FitError("k-means needs at least one point");
  if (init.rows() == 0) throw FitError("k-means needs at least one initial centroid");
  if (init.cols() != points.cols()) {
    throw DimensionError("initial centroids have dimension " + std::to_string(init.cols()) + ", points have " +
                         std::to_string(points.cols()));
  }

  LloydResult result;
  RowMatrix centroids = init;
  Assignment current = assign_all(points, centroids, options.threads);
  result.inertia_trace.push_back(current.inertia);

  bool settled = false;  // centroids are the means of `current`
  for (int it = 1; it <= options.max_iter; ++it) {
    centroids = update_centroids(points, centroids, current);
    Assignment next = assign_all(points, centroids, options.threads);
    result.inertia_trace.push_back(next.inertia);
    result.iterations = it;
    const double previous = current.inertia;
    const bool changed = next.label != current.label;
    current = std::move(next);
    if (!changed) {
      settled = true;
      result.converged = true;
      break;
    }
    if (previous - current.inertia < options.tol * previous) {
      result.converged = true;
      break;
    }
  }
  if (!settled && result.iterations > 0) {
    centroids = update_centroids(points, centroids, current);
    double inertia = 0.0;
    for (std::size_t i = 0; i < current.label.size(); ++i) {
      const double d = (points.row(static_cast<Eigen::Index>(i)) -
                        centroids.row(static_cast<Eigen::Index>(current.label[i])))
                           .squaredNorm();
      current.dist2[i] = d;
      inertia += d;
    }
    current.inertia = inertia;
  }

  result.assignment = std::move(current.label);
  result.codebook = Codebook(std::move(centroids), current.inertia);
  return result;
}

LloydResult train_codebook(const RowMatrix& points, std::size_t k, std::uint64_t seed, const LloydOptions& options) {
  return lloyd(points, seed_plusplus(points, k, seed), options);
}

}  // namespace spvlad
