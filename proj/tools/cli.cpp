#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <set>
#include <variant>

#include <CLI11.hpp>

#include "spvlad/codebook.hpp"
#include "spvlad/encoder.hpp"
#include "spvlad/ingest.hpp"
#include "spvlad/parallel.hpp"
#include "spvlad/pca.hpp"
#include "spvlad/rng.hpp"
#include "spvlad/synthbench.hpp"

namespace spvlad::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kEncodeBatch = 256;
const std::set<std::size_t> kStandardDims{128, 256, 512, 1024};

struct SynthArgs {
  std::string out;
  std::size_t classes = 4;
  std::size_t scenes = 25;
  double noise = 1.0;
  std::size_t regions = kDeskRegionsPerImage;
  std::size_t dim = 32;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct SampleArgs {
  std::string in;
  std::string out;
  std::size_t sample = kDefaultPcaSample;
  std::uint64_t seed = 0;
};

struct TrainPcaArgs {
  std::string in;
  std::string out;
  std::size_t dim = 256;
  std::size_t sample = kDefaultPcaSample;
  std::uint64_t seed = 0;
  bool nonstandard_dim = false;
};

struct TrainCodebookArgs {
  std::string in;
  std::string pca;
  std::string out;
  std::size_t k = 4;
  std::size_t sample = kDefaultPcaSample;
  std::uint64_t seed = 0;
  bool augment = false;
  int max_iter = 100;
  double tol = 1e-6;
  unsigned threads = 1;
};

struct EncodeArgs {
  std::string in;
  std::string pca;
  std::string codebook;
  std::string out;
  std::string csv;
  int level = 2;
  std::string mode = "ssr";
  unsigned threads = 1;
};

struct BenchArgs {
  std::size_t classes = 4;
  std::size_t scenes = 25;
  double noise = 1.0;
  std::size_t regions = kDeskRegionsPerImage;
  std::size_t dim = 32;
  std::size_t pca_dim = 8;
  std::size_t k = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool large = false;
  std::string out;
};

struct InspectArgs {
  std::string file;
};

Normalization parse_mode(const std::string& mode) { return mode == "intra" ? Normalization::kIntra : Normalization::kSsr; }

// A sampled region together with its image frame.
struct FramedRegion {
  RegionDescriptor region;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

std::vector<FramedRegion> reservoir_regions(const std::string& path, std::size_t cap, std::uint64_t seed,
                                            std::size_t* dim) {
  if (cap == 0) throw Error("--sample must be at least 1");
  DatasetReader reader(path);
  if (dim) *dim = reader.dim();
  Reservoir<FramedRegion> reservoir(cap, seed);
  while (auto rec = reader.next()) {
    for (auto& r : rec->regions) reservoir.offer(FramedRegion{std::move(r), rec->width, rec->height});
  }
  if (reservoir.seen() == 0) throw Error("dataset contains no regions to sample");
  return std::move(reservoir.items());
}

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  BenchConfig config;
  config.classes = a.classes;
  config.scenes_per_class = a.scenes;
  config.noise = a.noise;
  config.regions_per_image = a.regions;
  config.descriptor_dim = a.dim;
  config.threads = a.threads;
  const auto scenes = make_scenes(config, a.seed);
  write_dataset(a.out, scenes, a.dim);
  out << "wrote " << scenes.size() << " images (D=" << a.dim << ") to " << a.out << '\n';
}

void cmd_sample(const SampleArgs& a, std::ostream& out) {
  std::size_t dim = 0;
  const auto sample = reservoir_regions(a.in, a.sample, a.seed, &dim);
  DatasetWriter writer(a.out, dim);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    ImageRecord rec;
    rec.id = "sample_" + std::to_string(i);
    rec.width = sample[i].width;
    rec.height = sample[i].height;
    rec.regions.push_back(sample[i].region);
    writer.write(rec);
  }
  writer.close();
  out << "sampled " << sample.size() << " regions to " << a.out << '\n';
}

void cmd_train_pca(const TrainPcaArgs& a, std::ostream& out) {
  if (!a.nonstandard_dim && !kStandardDims.count(a.dim)) {
    throw Error("--dim must be one of 128, 256, 512, 1024 (pass --nonstandard-dim to override)");
  }
  DatasetReader reader(a.in);
  const auto sample = sample_regions(reader, a.sample, a.seed);
  const PcaModel model = fit_pca(std::span<const std::vector<float>>(sample), a.dim);
  save_model(a.out, model);
  out << "fitted PCA " << model.input_dim() << " -> " << model.output_dim() << " on " << sample.size()
      << " regions, wrote " << a.out << '\n';
}

void cmd_train_codebook(const TrainCodebookArgs& a, std::ostream& out) {
  if (a.k == 0) throw Error("--k must be at least 1");
  const PcaModel pca = load_pca(a.pca);
  std::size_t dim = 0;
  const auto sample = reservoir_regions(a.in, a.sample, derive_seed(a.seed, 1), &dim);
  if (dim != pca.input_dim()) {
    throw DimensionError("dataset dimension " + std::to_string(dim) + " does not match PCA input " +
                         std::to_string(pca.input_dim()));
  }
  const auto d = static_cast<Eigen::Index>(pca.output_dim());
  RowMatrix points(static_cast<Eigen::Index>(sample.size()), a.augment ? d + 3 : d);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& s = sample[i];
    const Eigen::VectorXd p = pca.project(std::span<const float>(s.region.features));
    const auto row = static_cast<Eigen::Index>(i);
    points.row(row).head(d) = p.transpose();
    if (a.augment) {
      const auto aug = augment(s.region, std::span<const double>(p.data(), p.size()), s.width, s.height);
      points(row, d) = aug.rel_x;
      points(row, d + 1) = aug.rel_y;
      points(row, d + 2) = aug.log_scale;
    }
  }
  LloydOptions options;
  options.max_iter = a.max_iter;
  options.tol = a.tol;
  options.threads = a.threads;
  const LloydResult result = train_codebook(points, a.k, a.seed, options);
  save_model(a.out, result.codebook);
  out << "trained codebook K=" << result.codebook.size() << " d=" << result.codebook.dim() << " in "
      << result.iterations << " iterations, inertia " << result.codebook.inertia().value_or(0.0) << ", wrote "
      << a.out << '\n';
}

void encode_dataset(const EncodeArgs& a, bool augmented, std::ostream& out) {
  const PcaModel pca = load_pca(a.pca);
  const Codebook cb = load_codebook(a.codebook);
  DatasetReader reader(a.in);
  if (reader.dim() != pca.input_dim()) {
    throw DimensionError("dataset dimension " + std::to_string(reader.dim()) + " does not match PCA input " +
                         std::to_string(pca.input_dim()));
  }
  const std::size_t expected_cb = pca.output_dim() + (augmented ? 3 : 0);
  if (cb.dim() != expected_cb) {
    throw DimensionError("codebook dimension " + std::to_string(cb.dim()) + " does not match expected " +
                         std::to_string(expected_cb));
  }
  const PyramidSpec spec(a.level);
  EncodeOptions options;
  options.normalization = parse_mode(a.mode);

  std::ofstream csv;
  if (!a.csv.empty()) {
    csv.open(a.csv, std::ios::trunc);
    if (!csv) throw Error("cannot open " + a.csv + " for writing");
  }
  EncodingWriter writer(a.out);
  std::size_t total = 0;
  std::size_t dim = 0;
  for (bool more = true; more;) {
    std::vector<ImageRecord> batch;
    while (batch.size() < kEncodeBatch) {
      auto rec = reader.next();
      if (!rec) {
        more = false;
        break;
      }
      batch.push_back(std::move(*rec));
    }
    std::vector<EncodedRepresentation> encoded(batch.size());
    parallel_for(batch.size(), a.threads, [&](std::size_t i) {
      encoded[i] = augmented ? encode_augmented(pca, cb, batch[i], options)
                             : encode_pyramid(pca, cb, batch[i], spec, options);
    });
    for (const auto& enc : encoded) {
      writer.write(enc);
      if (csv.is_open()) write_encoding_csv(csv, enc);
      dim = enc.vector.size();
    }
    total += encoded.size();
  }
  writer.close();
  out << "encoded " << total << " images, dimension " << dim << ", wrote " << a.out << '\n';
}

void cmd_bench(const BenchArgs& a, std::ostream& out) {
  BenchConfig config;
  config.classes = a.classes;
  config.scenes_per_class = a.scenes;
  config.noise = a.noise;
  config.regions_per_image = a.large ? kLargeRegionsPerImage : a.regions;
  config.descriptor_dim = a.dim;
  config.pca_dim = a.pca_dim;
  config.codewords = a.k;
  config.threads = a.threads;
  const std::string json = report_to_json(run_benchmark(config, a.seed));
  if (a.out.empty()) {
    out << json << '\n';
  } else {
    std::ofstream f(a.out, std::ios::trunc);
    if (!f) throw Error("cannot open " + a.out + " for writing");
    f << json << '\n';
    out << "wrote report to " << a.out << '\n';
  }
}

const char* level_cell_name(const CellId& c) {
  static const char* kLevel2[] = {"top-left", "top-right", "bottom-left", "bottom-right"};
  static const char* kLevel3[] = {"left", "middle", "right"};
  if (c.level == 1) return "whole";
  if (c.level == 2) return kLevel2[c.index];
  return kLevel3[c.index];
}

void cmd_inspect(const InspectArgs& a, std::ostream& out) {
  if (!fs::exists(a.file)) throw Error("no such file: " + a.file);
  switch (detect_file_kind(a.file)) {
    case FileKind::kDataset: {
      DatasetReader reader(a.file);
      const auto& h = reader.header();
      std::size_t images = 0, regions = 0, lo = SIZE_MAX, hi = 0;
      while (auto rec = reader.next()) {
        ++images;
        regions += rec->regions.size();
        lo = std::min(lo, rec->regions.size());
        hi = std::max(hi, rec->regions.size());
      }
      out << "kind=dataset version=" << h.version << " D=" << h.dim << " images=" << h.image_count << '\n';
      out << "regions=" << regions;
      if (images) out << " per_image_min=" << lo << " per_image_max=" << hi;
      out << '\n';
      break;
    }
    case FileKind::kModel: {
      const ModelHeader h = read_model_header(a.file);
      if (h.kind == ModelKind::kPca) {
        out << "kind=pca D=" << h.cols << " d=" << h.rows << '\n';
      } else {
        out << "kind=codebook K=" << h.rows << " d=" << h.cols << '\n';
      }
      break;
    }
    case FileKind::kEncodings: {
      EncodingReader reader(a.file);
      const auto& h = reader.header();
      out << "kind=encodings version=" << h.version << " level=" << h.level << " K=" << h.codewords
          << " d=" << h.block_dim << " augmented=" << (h.augmented ? 1 : 0) << " global_dim=" << h.global_dim
          << " count=" << h.count << " dim=" << (h.codewords ? h.vector_dim() : 0) << '\n';
      out << std::fixed << std::setprecision(6);
      while (auto enc = reader.next()) {
        out << enc->image_id;
        for (const auto& s : enc->layout) {
          double norm = 0.0;
          for (std::size_t i = 0; i < s.length; ++i) norm += enc->vector[s.offset + i] * enc->vector[s.offset + i];
          out << "  L" << s.cell.level << ':' << level_cell_name(s.cell) << " regions=" << s.region_count
              << " norm=" << std::sqrt(norm);
        }
        out << '\n';
      }
      break;
    }
    case FileKind::kUnknown:
      throw FormatError("unrecognised file format: " + a.file);
  }
}

void add_threads(CLI::App* cmd, unsigned& threads) {
  cmd->add_option("--threads", threads, "Worker threads (0 = all cores); output is identical for any value")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial-pyramid VLAD encoding of region descriptors"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic placement-only dataset");
  c_synth->add_option("--out", synth.out, "Output dataset (.spvd)")->required();
  c_synth->add_option("--classes", synth.classes, "Scene classes")->check(CLI::PositiveNumber);
  c_synth->add_option("--scenes", synth.scenes, "Scenes per class")->check(CLI::PositiveNumber);
  c_synth->add_option("--noise", synth.noise, "Descriptor noise scale")->check(CLI::NonNegativeNumber);
  c_synth->add_option("--regions", synth.regions, "Regions per image")->check(CLI::PositiveNumber);
  c_synth->add_option("--dim", synth.dim, "Descriptor dimension D")->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed, "Random seed");
  add_threads(c_synth, synth.threads);

  SampleArgs sample;
  auto* c_sample = app.add_subcommand("sample", "Reservoir-sample regions into a one-region-per-image dataset");
  c_sample->add_option("--in", sample.in, "Input dataset (.spvd)")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--out", sample.out, "Output dataset (.spvd)")->required();
  c_sample->add_option("--sample", sample.sample, "Maximum regions to keep")->check(CLI::PositiveNumber);
  c_sample->add_option("--seed", sample.seed, "Random seed");

  TrainPcaArgs pca;
  auto* c_pca = app.add_subcommand("train-pca", "Fit the PCA reduction on sampled region descriptors");
  c_pca->add_option("--in", pca.in, "Input dataset (.spvd)")->required()->check(CLI::ExistingFile);
  c_pca->add_option("--out", pca.out, "Output model (.spvm)")->required();
  c_pca->add_option("--dim", pca.dim, "Reduced dimension d (128, 256, 512 or 1024)")->check(CLI::PositiveNumber);
  c_pca->add_option("--sample", pca.sample, "Regions sampled for the fit")->check(CLI::PositiveNumber);
  c_pca->add_option("--seed", pca.seed, "Random seed");
  c_pca->add_flag("--nonstandard-dim", pca.nonstandard_dim, "Allow a reduced dimension outside the standard set");

  TrainCodebookArgs cb;
  auto* c_cb = app.add_subcommand("train-codebook", "Learn k-means codewords over PCA-reduced regions");
  c_cb->add_option("--in", cb.in, "Input dataset (.spvd)")->required()->check(CLI::ExistingFile);
  c_cb->add_option("--pca", cb.pca, "PCA model (.spvm)")->required()->check(CLI::ExistingFile);
  c_cb->add_option("--out", cb.out, "Output model (.spvm)")->required();
  c_cb->add_option("--k", cb.k, "Number of codewords K")->check(CLI::PositiveNumber);
  c_cb->add_option("--sample", cb.sample, "Regions sampled for training")->check(CLI::PositiveNumber);
  c_cb->add_option("--seed", cb.seed, "Random seed");
  c_cb->add_flag("--augment", cb.augment, "Train over location-augmented descriptors (d + 3)");
  c_cb->add_option("--max-iter", cb.max_iter, "Lloyd iteration cap")->check(CLI::NonNegativeNumber);
  c_cb->add_option("--tol", cb.tol, "Relative inertia improvement threshold")->check(CLI::NonNegativeNumber);
  add_threads(c_cb, cb.threads);

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "Spatial-pyramid VLAD encoding of every image");
  EncodeArgs aug;
  auto* c_aug = app.add_subcommand("augment-encode", "Single-cell VLAD over location-augmented descriptors");
  for (auto [cmd, args] : {std::pair{c_enc, &enc}, std::pair{c_aug, &aug}}) {
    cmd->add_option("--in", args->in, "Input dataset (.spvd)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--pca", args->pca, "PCA model (.spvm)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--codebook", args->codebook, "Codebook model (.spvm)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", args->out, "Output encodings (.spve)")->required();
    cmd->add_option("--csv", args->csv, "Also write one CSV line per image to this path");
    cmd->add_option("--mode", args->mode, "Normalization: ssr or intra")->check(CLI::IsMember({"ssr", "intra"}));
    add_threads(cmd, args->threads);
  }
  c_enc->add_option("--level", enc.level, "Pyramid level (1, 2 or 3)")->check(CLI::Range(1, 3));

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Synthetic local-discrimination benchmark (level 1 vs level 2)");
  c_bench->add_option("--classes", bench.classes, "Scene classes")->check(CLI::PositiveNumber);
  c_bench->add_option("--scenes", bench.scenes, "Scenes per class")->check(CLI::PositiveNumber);
  c_bench->add_option("--noise", bench.noise, "Descriptor noise scale")->check(CLI::NonNegativeNumber);
  c_bench->add_option("--regions", bench.regions, "Regions per image")->check(CLI::PositiveNumber);
  c_bench->add_flag("--large", bench.large, "Use the 385 regions-per-image preset");
  c_bench->add_option("--dim", bench.dim, "Descriptor dimension D")->check(CLI::PositiveNumber);
  c_bench->add_option("--pca-dim", bench.pca_dim, "Reduced dimension d")->check(CLI::PositiveNumber);
  c_bench->add_option("--k", bench.k, "Number of codewords K")->check(CLI::PositiveNumber);
  c_bench->add_option("--seed", bench.seed, "Random seed");
  c_bench->add_option("--out", bench.out, "Write the JSON report here instead of standard output");
  add_threads(c_bench, bench.threads);

  InspectArgs inspect;
  auto* c_inspect = app.add_subcommand("inspect", "Print header and shape information of any container");
  c_inspect->add_option("file", inspect.file, "Dataset, model or encoding file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*c_synth) cmd_synth(synth, out);
    else if (*c_sample) cmd_sample(sample, out);
    else if (*c_pca) cmd_train_pca(pca, out);
    else if (*c_cb) cmd_train_codebook(cb, out);
    else if (*c_enc) encode_dataset(enc, false, out);
    else if (*c_aug) encode_dataset(aug, true, out);
    else if (*c_bench) cmd_bench(bench, out);
    else if (*c_inspect) cmd_inspect(inspect, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace spvlad::cli
