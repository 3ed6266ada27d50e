// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spvlad/codebook.hpp"
#include "spvlad/datamodel.hpp"
#include "spvlad/encoder.hpp"
#include "spvlad/ingest.hpp"
#include "spvlad/pca.hpp"
#include "spvlad/rng.hpp"
#include "spvlad/synthbench.hpp"
#include "test_util.hpp"

using namespace spvlad;
namespace fs = std::filesystem;

namespace {

// Noise level fixed by the calibration sweep (tests/calibrate_bench): level-2
// beats level-1 by >= 0.55 accuracy on every seed 0..9 at this setting.
constexpr double kCalibratedNoise = 1.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void require(bool ok, const std::string& what) {
    if (!ok && out_.pass) {
      out_.pass = false;
      out_.detail = what;
    }
  }
  void note(const std::string& s) {
    if (out_.pass) out_.detail = s;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// --- 1 ----------------------------------------------------------------------

Outcome dimension_accounting() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(11);
  constexpr std::size_t kD = 4096, kRegions = 300;
  ImageRecord rec = testutil::random_record(rng, kRegions, kD);
  rec.regions[0].x = 0;
  rec.regions[0].y = 0;
  rec.regions[0].w = static_cast<float>(rec.width);
  rec.regions[0].h = static_cast<float>(rec.height);

  std::vector<std::vector<float>> sample;
  for (const auto& r : rec.regions) sample.push_back(r.features);
  const PcaModel pca = fit_pca(std::span<const std::vector<float>>(sample), 256);
  const RowMatrix projected = project_regions(pca, rec);

  const std::size_t expected[2][3] = {{1024, 5120, 8192}, {2048, 10240, 16384}};
  const std::size_t ks[2] = {4, 8};
  for (int i = 0; i < 2; ++i) {
    const Codebook cb = train_codebook(projected, ks[i], 3).codebook;
    for (int level = 1; level <= 3; ++level) {
      const auto enc = encode_pyramid(pca, cb, rec, PyramidSpec(level));
      c.require(enc.vector.size() == expected[i][level - 1],
                "K=" + std::to_string(ks[i]) + " level " + std::to_string(level) + " gave " +
                    std::to_string(enc.vector.size()));
    }
  }

  const Codebook cb_aug = train_codebook(augmented_rows(pca, rec), 4, 5).codebook;
  const auto aug = encode_augmented(pca, cb_aug, rec);
  c.require(aug.vector.size() == 1036, "augmented gave " + std::to_string(aug.vector.size()));

  const Codebook cb4 = train_codebook(projected, 4, 3).codebook;
  const auto frame = find_full_frame(rec);
  c.require(frame.has_value(), "no full-frame region found");
  if (frame) {
    const auto& g = rec.regions[*frame].features;
    const std::vector<double> global(g.begin(), g.end());
    const auto combined = concat_global(encode_pyramid(pca, cb4, rec, PyramidSpec(2)), global);
    c.require(combined.size() == 9216, "global + level 2 gave " + std::to_string(combined.size()));
  }
  const double secs = seconds_since(t0);
  c.require(secs < 60.0, "runtime " + fmt(secs) + " s");
  c.note("1024/5120/8192, 2048/10240/16384, 1036, 9216 in " + fmt(secs) + " s");
  return c.result();
}

// --- 2 ----------------------------------------------------------------------

Outcome vlad_oracle() {
  Check c;
  Rng rng(21);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.uniform_index(50);
    const std::size_t d = 1 + rng.uniform_index(8);
    const std::size_t k = 1 + rng.uniform_index(4);
    const RowMatrix x = testutil::random_matrix(n, d, rng);
    const RowMatrix centroids = testutil::random_matrix(k, d, rng);
    const auto got = vlad_raw(Codebook(centroids), x);
    const auto want = oracle::vlad(testutil::to_rows(centroids), testutil::to_rows(x));
    c.require(got.size() == want.size(), "length mismatch at instance " + std::to_string(t));
    if (got.size() != want.size()) break;
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  c.require(worst <= 1e-12, "max-abs " + fmt(worst));
  c.note("200 instances, max-abs " + fmt(worst));
  return c.result();
}

// --- 3 ----------------------------------------------------------------------

Outcome pyramid_additivity() {
  Check c;
  Rng rng(31);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.uniform_index(60);
    const std::size_t d = 1 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(4);
    const ImageRecord rec = testutil::random_record(rng, n, d);
    RowMatrix descriptors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j)
        descriptors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rec.regions[i].features[j];
    const Codebook cb(testutil::random_matrix(k, d, rng));
    const PyramidRaw raw = pyramid_raw(cb, descriptors, rec, PyramidSpec(3));
    const std::size_t len = k * d;
    for (int level = 2; level <= 3; ++level) {
      std::vector<double> sum(len, 0.0);
      for (const auto& slice : raw.layout) {
        if (slice.cell.level != level) continue;
        for (std::size_t i = 0; i < len; ++i) sum[i] += raw.values[slice.offset + i];
      }
      for (std::size_t i = 0; i < len; ++i) worst = std::max(worst, std::abs(sum[i] - raw.values[i]));
    }
  }
  c.require(worst <= 1e-9, "max-abs " + fmt(worst));
  c.note("50 records, max-abs " + fmt(worst));
  return c.result();
}

// --- 4 ----------------------------------------------------------------------

Outcome pca_properties() {
  Check c;
  Rng rng(41);
  RowMatrix sample = testutil::random_matrix(200, 8, rng);
  // Anisotropic columns so the spectrum is well separated.
  for (Eigen::Index j = 0; j < 8; ++j) sample.col(j) *= 1.0 + 0.7 * static_cast<double>(j);

  const PcaModel full = fit_pca(sample, 8);
  const Eigen::MatrixXd gram = full.basis() * full.basis().transpose();
  const double ortho = (gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff();
  c.require(ortho <= 1e-8, "orthonormality error " + fmt(ortho));

  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t d = 1; d <= 5; ++d) {
    const PcaModel m = fit_pca(sample, d);
    const RowMatrix z = m.project_rows(sample);
    RowMatrix recon = z * m.basis();
    recon.rowwise() += m.mean().transpose();
    const double err = (sample - recon).squaredNorm();
    c.require(err <= prev, "reconstruction error rose at d=" + std::to_string(d));
    prev = err;
  }

  const auto eig = oracle::jacobi_eigen(oracle::covariance(testutil::to_rows(sample)));
  double worst = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    double plus = 0.0, minus = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      const double b = full.basis()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      plus = std::max(plus, std::abs(b - eig.second[i][j]));
      minus = std::max(minus, std::abs(b + eig.second[i][j]));
    }
    worst = std::max(worst, std::min(plus, minus));
  }
  c.require(worst <= 1e-8, "oracle disagreement " + fmt(worst));
  c.note("orthonormality " + fmt(ortho) + ", oracle max-abs " + fmt(worst));
  return c.result();
}

// --- 5 ----------------------------------------------------------------------

Outcome kmeans_properties() {
  Check c;
  Rng rng(51);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 20 + rng.uniform_index(200);
    const std::size_t d = 1 + rng.uniform_index(6);
    const std::size_t k = 1 + rng.uniform_index(8);
    const RowMatrix x = testutil::random_matrix(n, d, rng);
    const auto r = train_codebook(x, k, static_cast<std::uint64_t>(t));
    for (std::size_t i = 1; i < r.inertia_trace.size(); ++i)
      c.require(r.inertia_trace[i] <= r.inertia_trace[i - 1], "inertia rose in run " + std::to_string(t));
  }

  const double truth[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  RowMatrix blobs(400, 2);
  for (Eigen::Index i = 0; i < 400; ++i) {
    blobs(i, 0) = truth[i % 4][0] + 0.05 * rng.normal();
    blobs(i, 1) = truth[i % 4][1] + 0.05 * rng.normal();
  }
  const auto fit = train_codebook(blobs, 4, 7);
  double worst = 0.0;
  for (const auto& t : truth) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < 4; ++k)
      best = std::min(best, std::hypot(fit.codebook.centroids()(k, 0) - t[0], fit.codebook.centroids()(k, 1) - t[1]));
    worst = std::max(worst, best);
  }
  c.require(worst <= 0.1, "blob centre off by " + fmt(worst));

  const RowMatrix x = testutil::random_matrix(300, 5, rng);
  const auto a = train_codebook(x, 6, 99);
  const auto b = train_codebook(x, 6, 99);
  c.require(a.codebook == b.codebook && a.inertia_trace == b.inertia_trace && a.assignment == b.assignment,
            "reruns differ");
  c.note("50 monotone traces, blob error " + fmt(worst) + ", reruns identical");
  return c.result();
}

// --- 6 ----------------------------------------------------------------------

Outcome augmentation_checks() {
  Check c;
  const std::uint32_t w = 640, h = 480;
  RegionDescriptor full{0, 0, static_cast<float>(w), static_cast<float>(h), {}};
  const std::vector<double> base{1.0, 2.0};
  const auto a = augment(full, base, w, h);
  c.require(a.rel_x == 0.0 && a.rel_y == 0.0 && a.log_scale == 0.0,
            "full frame gave (" + fmt(a.rel_x) + ", " + fmt(a.rel_y) + ", " + fmt(a.log_scale) + ")");

  Rng rng(61);
  std::size_t checked = 0;
  while (checked < 1000) {
    // Boxes may use the half-pixel frame slack.
    RegionDescriptor r;
    r.w = static_cast<float>(rng.uniform(0.01, w + kFrameSlack));
    r.h = static_cast<float>(rng.uniform(0.01, h + kFrameSlack));
    r.x = static_cast<float>(rng.uniform(-kFrameSlack, w + kFrameSlack - r.w));
    r.y = static_cast<float>(rng.uniform(-kFrameSlack, h + kFrameSlack - r.h));
    ImageRecord rec{"r", w, h, {r}};
    if (!validate_image(rec, 0).empty()) continue;
    const auto ad = augment(r, base, w, h);
    c.require(ad.rel_x >= -0.5 && ad.rel_x <= 0.5 && ad.rel_y >= -0.5 && ad.rel_y <= 0.5,
              "relative coordinate out of range: (" + fmt(ad.rel_x) + ", " + fmt(ad.rel_y) + ")");
    ++checked;
  }
  c.note("full frame (0, 0, 0); 1000 regions in range");
  return c.result();
}

// --- 7 ----------------------------------------------------------------------

Outcome benchmark() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  BenchConfig zero;
  zero.noise = 0.0;
  const BenchEncodings enc = encode_benchmark(zero, 0);
  double spread = 0.0;
  for (std::size_t i = 0; i < enc.level1.size(); ++i)
    for (std::size_t j = i + 1; j < enc.level1.size(); ++j) {
      if (enc.labels[i] == enc.labels[j]) continue;
      for (std::size_t t = 0; t < enc.level1[i].size(); ++t)
        spread = std::max(spread, std::abs(enc.level1[i][t] - enc.level1[j][t]));
    }
  c.require(spread <= 1e-9, "level-1 encodings differ by " + fmt(spread));
  const double l2_zero = oracle::loo_accuracy(enc.level2, enc.labels);
  c.require(l2_zero == 1.0, "zero-noise level-2 accuracy " + fmt(l2_zero));

  BenchConfig noisy;
  noisy.noise = kCalibratedNoise;
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const BenchmarkReport r = run_benchmark(noisy, seed);
    min_margin = std::min(min_margin, r.level2_accuracy - r.level1_accuracy);
    c.require(r.level2_accuracy > r.level1_accuracy,
              "seed " + std::to_string(seed) + ": level 2 " + fmt(r.level2_accuracy) + " <= level 1 " +
                  fmt(r.level1_accuracy));
  }
  const double secs = seconds_since(t0);
  c.require(secs < 120.0, "runtime " + fmt(secs) + " s");
  c.note("zero noise l2=1, l1 spread " + fmt(spread) + "; noise " + fmt(kCalibratedNoise) + " min margin " +
         fmt(min_margin) + " in " + fmt(secs) + " s");
  return c.result();
}

// --- 8 ----------------------------------------------------------------------

Outcome persistence() {
  Check c;
  const fs::path dir = testutil::scratch_dir("acceptance");
  Rng rng(81);

  auto twice = [&](const std::string& name, const std::function<void(const fs::path&)>& write,
                   const std::function<void(const fs::path&, const fs::path&)>& reload) {
    const fs::path a = dir / (name + "_a.bin"), b = dir / (name + "_b.bin");
    write(a);
    reload(a, b);
    c.require(slurp(a) == slurp(b), name + " bytes differ after round trip");
  };

  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t dim = 1 + rng.uniform_index(16);
    std::vector<ImageRecord> records;
    const std::size_t count = rng.uniform_index(6);
    for (std::size_t i = 0; i < count; ++i)
      records.push_back(testutil::random_record(rng, rng.uniform_index(20), dim, 100 + rng.uniform_index(900),
                                                100 + rng.uniform_index(900), "img_" + std::to_string(i)));
    twice("dataset", [&](const fs::path& p) { write_dataset(p, records, dim); },
          [&](const fs::path& a, const fs::path& b) {
            const auto back = read_dataset(a);
            c.require(back == records, "dataset records differ");
            write_dataset(b, back, dim);
          });

    const std::size_t in = 2 + rng.uniform_index(12);
    const PcaModel pca = fit_pca(testutil::random_matrix(40, in, rng), 1 + rng.uniform_index(in));
    twice("pca", [&](const fs::path& p) { save_model(p, pca); },
          [&](const fs::path& a, const fs::path& b) {
            const auto back = load_pca(a);
            c.require(back == pca, "pca model differs");
            save_model(b, back);
          });

    const Codebook cb(testutil::random_matrix(1 + rng.uniform_index(8), 1 + rng.uniform_index(8), rng));
    twice("codebook", [&](const fs::path& p) { save_model(p, cb); },
          [&](const fs::path& a, const fs::path& b) {
            const auto back = load_codebook(a);
            c.require(back == cb, "codebook differs");
            save_model(b, back);
          });

    const PyramidSpec spec(1 + static_cast<int>(rng.uniform_index(3)));
    const std::size_t k = 1 + rng.uniform_index(4), d = 1 + rng.uniform_index(6);
    std::vector<EncodedRepresentation> encs;
    for (std::size_t i = 0; i < 1 + rng.uniform_index(5); ++i) {
      EncodedRepresentation e;
      e.image_id = "enc_" + std::to_string(i);
      e.spec = spec;
      e.codewords = k;
      e.block_dim = d;
      e.layout = make_layout(spec, k, d);
      for (auto& s : e.layout) s.region_count = static_cast<std::uint32_t>(rng.uniform_index(100));
      // Values stored as f32 on disk; draw them representable.
      for (std::size_t t = 0; t < encoded_length(spec, k, d); ++t)
        e.vector.push_back(static_cast<float>(rng.normal()));
      encs.push_back(std::move(e));
    }
    twice("encodings", [&](const fs::path& p) { save_encodings(p, encs); },
          [&](const fs::path& a, const fs::path& b) {
            const auto back = load_encodings(a);
            c.require(back == encs, "encodings differ");
            save_encodings(b, back);
          });
  }
  fs::remove_all(dir);
  c.note("5 randomized trials per file kind, byte-identical");
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 dimension accounting", dimension_accounting},
      {"2 VLAD oracle equivalence", vlad_oracle},
      {"3 pyramid additivity", pyramid_additivity},
      {"4 PCA properties", pca_properties},
      {"5 k-means properties", kmeans_properties},
      {"6 location/scale augmentation", augmentation_checks},
      {"7 local-discrimination benchmark", benchmark},
      {"8 persistence round trip", persistence},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " -- " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
