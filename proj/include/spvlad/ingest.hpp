#pragma once

// Binary containers. All integers and floats are little-endian.
//
//   dataset  (.spvd)  "SPVD" u32 version=1, u32 D, u64 image count, then per
//                     image: u32 id length, id bytes (UTF-8), u32 W, u32 H,
//                     u32 N, N boxes as 4 x f32 (x, y, w, h), N x D f32.
//   model    (.spvm)  "SPVM" u8 kind (1 = PCA, 2 = codebook), u32 rows,
//                     u32 cols, rows x cols f64 row-major; PCA appends the
//                     mean as one more row of cols f64.
//   encoding (.spve)  "SPVE" u32 version=1, u32 level, u32 K, u32 block dim,
//                     u32 flags (bit 0 = augmented), u32 global dim, u64
//                     count, then per encoding: u32 id length, id bytes,
//                     cells x u32 region counts, dim x f32 values.
//
// Every writer also emits a JSON sidecar next to the binary file (same stem,
// ".json") that mirrors the header for inspection.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spvlad/codebook.hpp"
#include "spvlad/datamodel.hpp"
#include "spvlad/error.hpp"
#include "spvlad/pca.hpp"

namespace spvlad {

// A record refused by a writer, with every invariant it breaks.
class ValidationError : public Error {
 public:
  ValidationError(std::string context, std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

enum class FileKind { kDataset, kModel, kEncodings, kUnknown };

// Classifies a file by its magic bytes.
FileKind detect_file_kind(const std::filesystem::path& path);

// Sidecar location for a container: same directory and stem, ".json".
std::filesystem::path sidecar_path(const std::filesystem::path& path);

// ---------------------------------------------------------------- datasets

struct DatasetHeader {
  std::uint32_t version = 1;
  std::uint32_t dim = 0;
  std::uint64_t image_count = 0;
};

// Streams image records one at a time.
class DatasetReader {
 public:
  explicit DatasetReader(const std::filesystem::path& path);

  const DatasetHeader& header() const { return header_; }
  std::size_t dim() const { return header_.dim; }

  // Next record in file order, or nullopt after the last one.
  std::optional<ImageRecord> next();

 private:
  std::ifstream in_;
  DatasetHeader header_;
  std::uint64_t remaining_bytes_ = 0;
  std::uint64_t index_ = 0;
};

// Writes records as they arrive; the image count is patched on close().
class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, std::size_t dim);
  ~DatasetWriter();

  DatasetWriter(const DatasetWriter&) = delete;
  DatasetWriter& operator=(const DatasetWriter&) = delete;

  // Throws ValidationError (and writes nothing) for an invalid record.
  void write(const ImageRecord& rec);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint32_t dim_;
  std::uint64_t count_ = 0;
  bool closed_ = false;
};

std::vector<ImageRecord> read_dataset(const std::filesystem::path& path);
DatasetHeader read_dataset_header(const std::filesystem::path& path);

// Validates every record first; nothing is written if any is invalid.
void write_dataset(const std::filesystem::path& path, std::span<const ImageRecord> records, std::size_t dim);

// ------------------------------------------------------------------ models

enum class ModelKind : std::uint8_t { kPca = 1, kCodebook = 2 };

struct ModelHeader {
  ModelKind kind = ModelKind::kPca;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

void save_model(const std::filesystem::path& path, const PcaModel& model);
void save_model(const std::filesystem::path& path, const Codebook& model);

ModelHeader read_model_header(const std::filesystem::path& path);

// Throw ModelKindError when the file holds the other kind of model.
PcaModel load_pca(const std::filesystem::path& path);
Codebook load_codebook(const std::filesystem::path& path);

std::variant<PcaModel, Codebook> load_model(const std::filesystem::path& path);

// --------------------------------------------------------------- encodings

struct EncodingHeader {
  std::uint32_t version = 1;
  int level = 1;
  std::uint32_t codewords = 0;
  std::uint32_t block_dim = 0;
  bool augmented = false;
  std::uint32_t global_dim = 0;
  std::uint64_t count = 0;

  std::size_t cells() const;
  std::size_t vector_dim() const;
};

class EncodingWriter {
 public:
  explicit EncodingWriter(const std::filesystem::path& path);
  ~EncodingWriter();

  EncodingWriter(const EncodingWriter&) = delete;
  EncodingWriter& operator=(const EncodingWriter&) = delete;

  // The first encoding fixes (level, K, d, augmented, global dim); later ones
  // must match or a DimensionError is thrown.
  void write(const EncodedRepresentation& enc);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::optional<EncodingHeader> header_;
  std::uint64_t count_ = 0;
  bool closed_ = false;
};

class EncodingReader {
 public:
  explicit EncodingReader(const std::filesystem::path& path);

  const EncodingHeader& header() const { return header_; }
  std::optional<EncodedRepresentation> next();

 private:
  std::ifstream in_;
  EncodingHeader header_;
  std::uint64_t remaining_bytes_ = 0;
  std::uint64_t index_ = 0;
};

void save_encodings(const std::filesystem::path& path, std::span<const EncodedRepresentation> encodings);
std::vector<EncodedRepresentation> load_encodings(const std::filesystem::path& path);
EncodingHeader read_encoding_header(const std::filesystem::path& path);

// One CSV line: id followed by every vector value, comma separated.
void write_encoding_csv(std::ostream& os, const EncodedRepresentation& enc);

}  // namespace spvlad
