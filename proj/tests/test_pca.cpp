#include <doctest.h>

#include <limits>
#include <map>

#include "oracles.hpp"
#include "spvlad/error.hpp"
#include "spvlad/ingest.hpp"
#include "spvlad/pca.hpp"
#include "test_util.hpp"

using namespace spvlad;

namespace {

double orthonormality_error(const RowMatrix& basis) {
  const Eigen::MatrixXd gram = basis * basis.transpose();
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

// Max-abs difference between basis rows and oracle vectors, up to row sign.
double sign_free_diff(const RowMatrix& basis, const oracle::Mat& vectors) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < basis.rows(); ++r) {
    double plus = 0.0, minus = 0.0;
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      const double e = vectors[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      plus = std::max(plus, std::abs(basis(r, c) - e));
      minus = std::max(minus, std::abs(basis(r, c) + e));
    }
    worst = std::max(worst, std::min(plus, minus));
  }
  return worst;
}

// Anisotropic sample so eigenvalues are well separated.
RowMatrix anisotropic(std::size_t n, std::size_t dim, Rng& rng) {
  RowMatrix m = testutil::random_matrix(n, dim, rng);
  for (Eigen::Index c = 0; c < m.cols(); ++c) m.col(c) *= 1.0 + 0.7 * static_cast<double>(m.cols() - c);
  m.rowwise() += Eigen::RowVectorXd::LinSpaced(m.cols(), -3.0, 5.0);
  return m;
}

double reconstruction_mse(const PcaModel& pca, const RowMatrix& sample) {
  const RowMatrix z = pca.project_rows(sample);
  const RowMatrix back = (z * pca.basis()).rowwise() + pca.mean().transpose();
  return (back - sample).squaredNorm() / static_cast<double>(sample.size());
}

}  // namespace

TEST_CASE("points on y = x give the diagonal direction") {
  RowMatrix pts(5, 2);
  pts << 0, 0, 1, 1, 2, 2, -3, -3, 7, 7;
  const PcaModel m = fit_pca(pts, 1);
  CHECK(m.basis()(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.basis()(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  CHECK(m.mean()[0] == doctest::Approx(1.4));
}

TEST_CASE("fit agrees with a Jacobi eigen-oracle on the covariance") {
  Rng rng(1234);
  for (int trial = 0; trial < 10; ++trial) {
    const RowMatrix sample = anisotropic(50, 5, rng);
    const PcaModel m = fit_pca(sample, 3);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(testutil::to_rows(sample)));
    CHECK(sign_free_diff(m.basis(), vectors) <= 1e-8);
    CHECK(orthonormality_error(m.basis()) <= 1e-8);
    // Largest-magnitude component of every row is positive.
    for (Eigen::Index r = 0; r < m.basis().rows(); ++r) {
      Eigen::Index arg;
      m.basis().row(r).cwiseAbs().maxCoeff(&arg);
      CHECK(m.basis()(r, arg) > 0.0);
    }
  }
}

TEST_CASE("blocked reduction matches the direct SVD") {
  Rng rng(99);
  const RowMatrix sample = anisotropic(700, 6, rng);
  const PcaModel direct = fit_pca(sample, 4);
  PcaFitOptions blocked;
  blocked.block_rows = 64;
  const PcaModel reduced = fit_pca(sample, 4, blocked);
  CHECK((direct.basis() - reduced.basis()).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((direct.mean() - reduced.mean()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("float-sample overload equals the matrix overload") {
  Rng rng(5);
  std::vector<std::vector<float>> rows(40, std::vector<float>(6));
  RowMatrix m(40, 6);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      rows[i][j] = static_cast<float>(rng.normal() * (j + 1));
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  CHECK(fit_pca(std::span<const std::vector<float>>(rows), 3) == fit_pca(m, 3));
}

TEST_CASE("full-scale reduction shape 4096 -> 256") {
  Rng rng(4096);
  const RowMatrix sample = testutil::random_matrix(300, 4096, rng);
  const PcaModel m = fit_pca(sample, 256);
  CHECK(m.input_dim() == 4096);
  CHECK(m.output_dim() == 256);
  CHECK(orthonormality_error(m.basis()) <= 1e-8);
}

TEST_CASE("projection") {
  Rng rng(8);
  const RowMatrix sample = anisotropic(60, 5, rng);
  const PcaModel m = fit_pca(sample, 3);
  CHECK(m.project(Eigen::VectorXd(m.mean())).cwiseAbs().maxCoeff() <= 1e-9);

  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd u(5), v(5);
    for (int i = 0; i < 5; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
    }
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    const Eigen::VectorXd combined = m.project(Eigen::VectorXd(a * u + b * v + m.mean() * (1 - a - b)));
    const Eigen::VectorXd direct = a * m.project(u) + b * m.project(v);
    CHECK((combined - direct).cwiseAbs().maxCoeff() <= 1e-9);
  }

  RowMatrix basis(1, 2);
  basis << 1, 0;
  const PcaModel hand(Eigen::VectorXd::Zero(2), basis);
  const std::vector<float> x{3, 4};
  CHECK(hand.project(std::span<const float>(x))[0] == 3.0);
  const std::vector<float> wrong{1, 2, 3};
  CHECK_THROWS_AS(hand.project(std::span<const float>(wrong)), DimensionError);
}

TEST_CASE("fit errors") {
  Rng rng(2);
  CHECK_THROWS_AS(fit_pca(testutil::random_matrix(2, 5, rng), 3), FitError);
  CHECK_THROWS_AS(fit_pca(testutil::random_matrix(10, 3, rng), 4), FitError);
  RowMatrix flat = RowMatrix::Constant(10, 4, 0.1);
  try {
    fit_pca(flat, 2);
    FAIL("expected FitError");
  } catch (const FitError& e) {
    CHECK(std::string(e.what()) == "degenerate covariance");
  }
}

TEST_CASE("reconstruction error falls and projected variances are ordered") {
  Rng rng(77);
  const RowMatrix sample = anisotropic(200, 8, rng);
  const PcaModel full = fit_pca(sample, 8);
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t d = 1; d <= 8; ++d) {
    const double mse = reconstruction_mse(full.truncated(d), sample);
    CHECK(mse <= previous + 1e-12);
    previous = mse;
    // A separate fit at d spans the same subspace as the truncation.
    CHECK((fit_pca(sample, d).basis() - full.truncated(d).basis()).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(previous <= 1e-20);

  const RowMatrix z = full.project_rows(sample);
  for (Eigen::Index c = 1; c < z.cols(); ++c) {
    CHECK(z.col(c).squaredNorm() <= z.col(c - 1).squaredNorm() * (1 + 1e-12));
    CHECK(std::abs(z.col(c).mean()) <= 1e-9);
  }
}

TEST_CASE("fits are deterministic") {
  Rng rng(31);
  const RowMatrix sample = anisotropic(120, 7, rng);
  CHECK(fit_pca(sample, 5) == fit_pca(sample, 5));
}

TEST_CASE("reservoir sampling of regions") {
  const auto dir = testutil::scratch_dir("pca_sample");
  Rng rng(4);
  std::vector<ImageRecord> records;
  for (int i = 0; i < 4; ++i) records.push_back(testutil::random_record(rng, 5, 3, 100, 100, std::to_string(i)));
  write_dataset(dir / "d.spvd", records, 3);

  {
    DatasetReader reader(dir / "d.spvd");
    CHECK(sample_regions(reader, 100, 1).size() == 20);
  }
  auto take = [&](std::size_t cap, std::uint64_t seed) {
    DatasetReader reader(dir / "d.spvd");
    return sample_regions(reader, cap, seed);
  };
  CHECK(take(7, 42).size() == 7);
  CHECK(take(7, 42) == take(7, 42));
  CHECK(take(7, 42) != take(7, 43));

  // Every region is kept with probability cap / total = 0.25.
  std::map<float, int> hits;
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s) {
    for (const auto& f : take(5, static_cast<std::uint64_t>(s))) ++hits[f[0]];
  }
  CHECK(hits.size() == 20);
  for (const auto& [key, count] : hits) {
    CHECK(count > 400);
    CHECK(count < 600);
  }

  write_dataset(dir / "empty.spvd", {}, 3);
  DatasetReader empty(dir / "empty.spvd");
  CHECK_THROWS_AS(sample_regions(empty, 10, 1), Error);
  DatasetReader again(dir / "d.spvd");
  CHECK_THROWS_AS(sample_regions(again, 0, 1), Error);
}
