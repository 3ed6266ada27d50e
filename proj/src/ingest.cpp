#include "spvlad/ingest.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>

#include <nlohmann/json.hpp>

namespace spvlad {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kDatasetMagic{'S', 'P', 'V', 'D'};
constexpr std::array<char, 4> kModelMagic{'S', 'P', 'V', 'M'};
constexpr std::array<char, 4> kEncodingMagic{'S', 'P', 'V', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kDatasetHeaderBytes = 20;
constexpr std::size_t kModelHeaderBytes = 13;
constexpr std::size_t kEncodingHeaderBytes = 36;

// Little-endian encoders, independent of host byte order.
void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

void put_magic(std::string& buf, const std::array<char, 4>& magic) { buf.append(magic.data(), magic.size()); }

// Sequential decoder over an in-memory block.
class Cursor {
 public:
  explicit Cursor(const std::string& buf) : p_(reinterpret_cast<const unsigned char*>(buf.data())) {}

  std::uint8_t u8() { return *p_++; }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[i]) << (8 * i);
    p_ += 4;
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p_[i]) << (8 * i);
    p_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  bool magic(const std::array<char, 4>& m) {
    const bool ok = std::memcmp(p_, m.data(), 4) == 0;
    p_ += 4;
    return ok;
  }
  std::string str(std::size_t n) {
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }

 private:
  const unsigned char* p_;
};

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

// Reads exactly n bytes or throws FormatError(what).
std::string read_exact(std::istream& in, std::uint64_t n, std::uint64_t& remaining, const std::string& what) {
  if (n > remaining) throw FormatError(what);
  std::string buf(static_cast<std::size_t>(n), '\0');
  in.read(buf.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::uint64_t>(in.gcount()) != n) throw FormatError(what);
  remaining -= n;
  return buf;
}

void write_bytes(std::ofstream& out, const std::string& buf, const fs::path& path) {
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("write failed on " + path.string());
}

void write_sidecar(const fs::path& path, const nlohmann::ordered_json& doc) {
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw Error("cannot write sidecar for " + path.string());
  out << doc.dump(2) << '\n';
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFull) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

ValidationError::ValidationError(std::string context, std::vector<Violation> violations)
    : Error(context + ": " + describe(violations)), violations_(std::move(violations)) {}

FileKind detect_file_kind(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (in.gcount() != 4) return FileKind::kUnknown;
  if (magic == kDatasetMagic) return FileKind::kDataset;
  if (magic == kModelMagic) return FileKind::kModel;
  if (magic == kEncodingMagic) return FileKind::kEncodings;
  return FileKind::kUnknown;
}

fs::path sidecar_path(const fs::path& path) {
  fs::path out = path;
  out.replace_extension(".json");
  if (out == path) out += ".json";
  return out;
}

// ---------------------------------------------------------------- datasets

DatasetReader::DatasetReader(const fs::path& path) : in_(open_in(path)) {
  remaining_bytes_ = fs::file_size(path);
  if (remaining_bytes_ < 4) throw FormatError("not a dataset file: " + path.string());
  const std::string head = read_exact(in_, std::min<std::uint64_t>(kDatasetHeaderBytes, remaining_bytes_),
                                      remaining_bytes_, "not a dataset file");
  Cursor c(head);
  if (!c.magic(kDatasetMagic)) throw FormatError("not a dataset file: " + path.string());
  if (head.size() < kDatasetHeaderBytes) throw FormatError("unexpected end in dataset header");
  header_.version = c.u32();
  if (header_.version != kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(header_.version));
  }
  header_.dim = c.u32();
  header_.image_count = c.u64();
  if (header_.dim == 0) throw FormatError("dataset declares descriptor dimension 0");
}

std::optional<ImageRecord> DatasetReader::next() {
  if (index_ >= header_.image_count) {
    if (remaining_bytes_ != 0) throw FormatError("trailing bytes after image " + std::to_string(index_));
    return std::nullopt;
  }
  const std::string where = "unexpected end at image " + std::to_string(index_);
  ImageRecord rec;
  {
    const std::string b = read_exact(in_, 4, remaining_bytes_, where);
    const std::uint32_t id_len = Cursor(b).u32();
    rec.id = read_exact(in_, id_len, remaining_bytes_, where);
  }
  const std::string dims = read_exact(in_, 12, remaining_bytes_, where);
  Cursor dc(dims);
  rec.width = dc.u32();
  rec.height = dc.u32();
  const std::uint64_t n = dc.u32();
  const std::uint64_t per_region = 16 + 4 * static_cast<std::uint64_t>(header_.dim);
  if (n > remaining_bytes_ / per_region) throw FormatError(where);

  const std::string boxes = read_exact(in_, n * 16, remaining_bytes_, where);
  const std::string feats = read_exact(in_, n * 4 * header_.dim, remaining_bytes_, where);
  Cursor bc(boxes);
  Cursor fc(feats);
  rec.regions.resize(static_cast<std::size_t>(n));
  for (auto& r : rec.regions) {
    r.x = bc.f32();
    r.y = bc.f32();
    r.w = bc.f32();
    r.h = bc.f32();
  }
  for (auto& r : rec.regions) {
    r.features.resize(header_.dim);
    for (auto& v : r.features) v = fc.f32();
  }
  ++index_;
  return rec;
}

DatasetWriter::DatasetWriter(const fs::path& path, std::size_t dim)
    : path_(path), out_(open_out(path)), dim_(checked_u32(dim, "descriptor dimension")) {
  if (dim == 0) throw Error("dataset descriptor dimension must be at least 1");
  std::string buf;
  put_magic(buf, kDatasetMagic);
  put_u32(buf, kVersion);
  put_u32(buf, dim_);
  put_u64(buf, 0);
  write_bytes(out_, buf, path_);
}

DatasetWriter::~DatasetWriter() {
  try {
    close();
  } catch (...) {
  }
}

void DatasetWriter::write(const ImageRecord& rec) {
  if (closed_) throw Error("dataset writer already closed");
  auto violations = validate_image(rec, dim_);
  if (!violations.empty()) throw ValidationError("image '" + rec.id + "'", std::move(violations));
  std::string buf;
  buf.reserve(4 + rec.id.size() + 12 + rec.regions.size() * (16 + 4 * dim_));
  put_u32(buf, checked_u32(rec.id.size(), "image id length"));
  buf += rec.id;
  put_u32(buf, rec.width);
  put_u32(buf, rec.height);
  put_u32(buf, checked_u32(rec.regions.size(), "region count"));
  for (const auto& r : rec.regions) {
    put_f32(buf, r.x);
    put_f32(buf, r.y);
    put_f32(buf, r.w);
    put_f32(buf, r.h);
  }
  for (const auto& r : rec.regions) {
    for (float v : r.features) put_f32(buf, v);
  }
  write_bytes(out_, buf, path_);
  ++count_;
}

void DatasetWriter::close() {
  if (closed_) return;
  closed_ = true;
  std::string buf;
  put_u64(buf, count_);
  out_.seekp(12);
  write_bytes(out_, buf, path_);
  out_.close();
  if (!out_) throw Error("failed to finish " + path_.string());
  nlohmann::ordered_json doc;
  doc["format"] = "SPVD";
  doc["version"] = kVersion;
  doc["dim"] = dim_;
  doc["image_count"] = count_;
  write_sidecar(path_, doc);
}

std::vector<ImageRecord> read_dataset(const fs::path& path) {
  DatasetReader reader(path);
  std::vector<ImageRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

DatasetHeader read_dataset_header(const fs::path& path) { return DatasetReader(path).header(); }

void write_dataset(const fs::path& path, std::span<const ImageRecord> records, std::size_t dim) {
  for (const auto& rec : records) {
    auto violations = validate_image(rec, dim);
    if (!violations.empty()) throw ValidationError("image '" + rec.id + "'", std::move(violations));
  }
  DatasetWriter writer(path, dim);
  for (const auto& rec : records) writer.write(rec);
  writer.close();
}

// ------------------------------------------------------------------ models

namespace {

void save_matrix_model(const fs::path& path, ModelKind kind, const RowMatrix& rows, const Eigen::VectorXd* extra) {
  std::string buf;
  put_magic(buf, kModelMagic);
  put_u8(buf, static_cast<std::uint8_t>(kind));
  put_u32(buf, checked_u32(static_cast<std::size_t>(rows.rows()), "model rows"));
  put_u32(buf, checked_u32(static_cast<std::size_t>(rows.cols()), "model columns"));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) put_f64(buf, rows(r, c));
  }
  if (extra) {
    for (Eigen::Index c = 0; c < extra->size(); ++c) put_f64(buf, (*extra)[c]);
  }
  std::ofstream out = open_out(path);
  write_bytes(out, buf, path);
  out.close();

  nlohmann::ordered_json doc;
  doc["format"] = "SPVM";
  doc["kind"] = kind == ModelKind::kPca ? "pca" : "codebook";
  doc["shape"] = {rows.rows(), rows.cols()};
  if (kind == ModelKind::kPca) {
    doc["input_dim"] = rows.cols();
    doc["output_dim"] = rows.rows();
  } else {
    doc["codewords"] = rows.rows();
    doc["dim"] = rows.cols();
  }
  write_sidecar(path, doc);
}

const char* kind_name(ModelKind k) { return k == ModelKind::kPca ? "PCA" : "codebook"; }

struct RawModel {
  ModelHeader header;
  RowMatrix rows;
  Eigen::VectorXd extra;
};

ModelHeader parse_model_header(std::istream& in, std::uint64_t& remaining, const fs::path& path) {
  if (remaining < 4) throw FormatError("not a model file: " + path.string());
  const std::string head = read_exact(in, std::min<std::uint64_t>(kModelHeaderBytes, remaining), remaining,
                                      "not a model file");
  Cursor c(head);
  if (!c.magic(kModelMagic)) throw FormatError("not a model file: " + path.string());
  if (head.size() < kModelHeaderBytes) throw FormatError("unexpected end in model header");
  ModelHeader h;
  const std::uint8_t kind = c.u8();
  if (kind != 1 && kind != 2) throw FormatError("unknown model kind " + std::to_string(kind));
  h.kind = static_cast<ModelKind>(kind);
  h.rows = c.u32();
  h.cols = c.u32();
  if (h.rows == 0 || h.cols == 0) throw FormatError("model has an empty shape");
  return h;
}

RawModel read_raw_model(const fs::path& path, std::optional<ModelKind> expected) {
  std::ifstream in = open_in(path);
  std::uint64_t remaining = fs::file_size(path);
  RawModel m;
  m.header = parse_model_header(in, remaining, path);
  if (expected && *expected != m.header.kind) {
    throw ModelKindError(path.string() + " holds a " + kind_name(m.header.kind) + " model, expected " +
                         kind_name(*expected));
  }
  const std::uint64_t rows = m.header.rows;
  const std::uint64_t cols = m.header.cols;
  const std::uint64_t values = rows * cols + (m.header.kind == ModelKind::kPca ? cols : 0);
  if (remaining != values * 8) {
    throw FormatError("model payload is " + std::to_string(remaining) + " bytes, header implies " +
                      std::to_string(values * 8));
  }
  const std::string payload = read_exact(in, values * 8, remaining, "unexpected end in model payload");
  Cursor c(payload);
  m.rows.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows.rows(); ++r) {
    for (Eigen::Index k = 0; k < m.rows.cols(); ++k) m.rows(r, k) = c.f64();
  }
  if (m.header.kind == ModelKind::kPca) {
    m.extra.resize(static_cast<Eigen::Index>(cols));
    for (Eigen::Index k = 0; k < m.extra.size(); ++k) m.extra[k] = c.f64();
  }
  return m;
}

}  // namespace

void save_model(const fs::path& path, const PcaModel& model) {
  save_matrix_model(path, ModelKind::kPca, model.basis(), &model.mean());
}

void save_model(const fs::path& path, const Codebook& model) {
  save_matrix_model(path, ModelKind::kCodebook, model.centroids(), nullptr);
}

ModelHeader read_model_header(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::uint64_t remaining = fs::file_size(path);
  return parse_model_header(in, remaining, path);
}

PcaModel load_pca(const fs::path& path) {
  RawModel m = read_raw_model(path, ModelKind::kPca);
  return PcaModel(std::move(m.extra), std::move(m.rows));
}

Codebook load_codebook(const fs::path& path) {
  RawModel m = read_raw_model(path, ModelKind::kCodebook);
  return Codebook(std::move(m.rows));
}

std::variant<PcaModel, Codebook> load_model(const fs::path& path) {
  RawModel m = read_raw_model(path, std::nullopt);
  if (m.header.kind == ModelKind::kPca) return PcaModel(std::move(m.extra), std::move(m.rows));
  return Codebook(std::move(m.rows));
}

// --------------------------------------------------------------- encodings

std::size_t EncodingHeader::cells() const { return PyramidSpec::cells_through(level); }

std::size_t EncodingHeader::vector_dim() const {
  return global_dim + cells() * static_cast<std::size_t>(codewords) * block_dim;
}

namespace {

std::string encode_header(const EncodingHeader& h) {
  std::string buf;
  put_magic(buf, kEncodingMagic);
  put_u32(buf, h.version);
  put_u32(buf, static_cast<std::uint32_t>(h.level));
  put_u32(buf, h.codewords);
  put_u32(buf, h.block_dim);
  put_u32(buf, h.augmented ? 1u : 0u);
  put_u32(buf, h.global_dim);
  put_u64(buf, h.count);
  return buf;
}

EncodingHeader header_for(const EncodedRepresentation& enc) {
  EncodingHeader h;
  h.level = enc.spec.level();
  h.codewords = checked_u32(enc.codewords, "codeword count");
  h.block_dim = checked_u32(enc.block_dim, "block dimension");
  h.augmented = enc.augmented;
  h.global_dim = checked_u32(enc.global_dim, "global dimension");
  return h;
}

// Shape checks shared by the writer and save_encodings.
void check_encoding(const EncodedRepresentation& enc, const EncodingHeader* fixed) {
  const EncodingHeader h = header_for(enc);
  if (fixed && (h.level != fixed->level || h.codewords != fixed->codewords || h.block_dim != fixed->block_dim ||
                h.augmented != fixed->augmented || h.global_dim != fixed->global_dim)) {
    throw DimensionError("mixed encoding dimensions: '" + enc.image_id + "' has dimension " +
                         std::to_string(h.vector_dim()) + " but the file holds dimension " +
                         std::to_string(fixed->vector_dim()));
  }
  if (enc.vector.size() != h.vector_dim()) {
    throw DimensionError("encoding '" + enc.image_id + "' has " + std::to_string(enc.vector.size()) +
                         " values, its header implies " + std::to_string(h.vector_dim()));
  }
  const auto expected = make_layout(enc.spec, enc.codewords, enc.block_dim, enc.global_dim);
  bool ok = enc.layout.size() == expected.size();
  for (std::size_t i = 0; ok && i < expected.size(); ++i) {
    ok = enc.layout[i].cell == expected[i].cell && enc.layout[i].offset == expected[i].offset &&
         enc.layout[i].length == expected[i].length;
  }
  if (!ok) throw DimensionError("encoding '" + enc.image_id + "' has an inconsistent cell layout");
}

}  // namespace

EncodingWriter::EncodingWriter(const fs::path& path) : path_(path), out_(open_out(path)) {
  write_bytes(out_, encode_header(EncodingHeader{}), path_);
}

EncodingWriter::~EncodingWriter() {
  try {
    close();
  } catch (...) {
  }
}

void EncodingWriter::write(const EncodedRepresentation& enc) {
  if (closed_) throw Error("encoding writer already closed");
  check_encoding(enc, header_ ? &*header_ : nullptr);
  if (!header_) header_ = header_for(enc);
  std::string buf;
  buf.reserve(4 + enc.image_id.size() + 4 * enc.layout.size() + 4 * enc.vector.size());
  put_u32(buf, checked_u32(enc.image_id.size(), "image id length"));
  buf += enc.image_id;
  for (const auto& slice : enc.layout) put_u32(buf, slice.region_count);
  for (double v : enc.vector) put_f32(buf, static_cast<float>(v));
  write_bytes(out_, buf, path_);
  ++count_;
}

void EncodingWriter::close() {
  if (closed_) return;
  closed_ = true;
  EncodingHeader h = header_.value_or(EncodingHeader{});
  h.count = count_;
  out_.seekp(0);
  write_bytes(out_, encode_header(h), path_);
  out_.close();
  if (!out_) throw Error("failed to finish " + path_.string());

  nlohmann::ordered_json doc;
  doc["format"] = "SPVE";
  doc["version"] = h.version;
  doc["level"] = h.level;
  doc["codewords"] = h.codewords;
  doc["block_dim"] = h.block_dim;
  doc["augmented"] = h.augmented;
  doc["global_dim"] = h.global_dim;
  doc["count"] = h.count;
  doc["vector_dim"] = h.codewords == 0 ? 0 : h.vector_dim();
  write_sidecar(path_, doc);
}

EncodingReader::EncodingReader(const fs::path& path) : in_(open_in(path)) {
  remaining_bytes_ = fs::file_size(path);
  if (remaining_bytes_ < 4) throw FormatError("not an encoding file: " + path.string());
  const std::string head = read_exact(in_, std::min<std::uint64_t>(kEncodingHeaderBytes, remaining_bytes_),
                                      remaining_bytes_, "not an encoding file");
  Cursor c(head);
  if (!c.magic(kEncodingMagic)) throw FormatError("not an encoding file: " + path.string());
  if (head.size() < kEncodingHeaderBytes) throw FormatError("unexpected end in encoding header");
  header_.version = c.u32();
  if (header_.version != kVersion) {
    throw FormatError("unsupported encoding version " + std::to_string(header_.version));
  }
  const std::uint32_t level = c.u32();
  if (level < 1 || level > 3) throw FormatError("encoding header has pyramid level " + std::to_string(level));
  header_.level = static_cast<int>(level);
  header_.codewords = c.u32();
  header_.block_dim = c.u32();
  const std::uint32_t flags = c.u32();
  if (flags > 1) throw FormatError("encoding header has unknown flags");
  header_.augmented = flags & 1u;
  header_.global_dim = c.u32();
  header_.count = c.u64();
  if (header_.count > 0 && (header_.codewords == 0 || header_.block_dim == 0)) {
    throw FormatError("encoding header declares an empty codebook");
  }
}

std::optional<EncodedRepresentation> EncodingReader::next() {
  if (index_ >= header_.count) {
    if (remaining_bytes_ != 0) throw FormatError("trailing bytes after encoding " + std::to_string(index_));
    return std::nullopt;
  }
  const std::string where = "unexpected end at encoding " + std::to_string(index_);
  EncodedRepresentation enc;
  {
    const std::string b = read_exact(in_, 4, remaining_bytes_, where);
    enc.image_id = read_exact(in_, Cursor(b).u32(), remaining_bytes_, where);
  }
  enc.spec = PyramidSpec(header_.level);
  enc.codewords = header_.codewords;
  enc.block_dim = header_.block_dim;
  enc.augmented = header_.augmented;
  enc.global_dim = header_.global_dim;
  enc.layout = make_layout(enc.spec, enc.codewords, enc.block_dim, enc.global_dim);

  const std::string counts = read_exact(in_, 4 * enc.layout.size(), remaining_bytes_, where);
  Cursor cc(counts);
  for (auto& slice : enc.layout) slice.region_count = cc.u32();

  const std::uint64_t dim = header_.vector_dim();
  if (dim > remaining_bytes_ / 4) throw FormatError(where);
  const std::string values = read_exact(in_, 4 * dim, remaining_bytes_, where);
  Cursor vc(values);
  enc.vector.resize(static_cast<std::size_t>(dim));
  for (auto& v : enc.vector) v = vc.f32();
  ++index_;
  return enc;
}

void save_encodings(const fs::path& path, std::span<const EncodedRepresentation> encodings) {
  if (!encodings.empty()) {
    const EncodingHeader fixed = header_for(encodings.front());
    for (const auto& enc : encodings) check_encoding(enc, &fixed);
  }
  EncodingWriter writer(path);
  for (const auto& enc : encodings) writer.write(enc);
  writer.close();
}

std::vector<EncodedRepresentation> load_encodings(const fs::path& path) {
  EncodingReader reader(path);
  std::vector<EncodedRepresentation> out;
  while (auto enc = reader.next()) out.push_back(std::move(*enc));
  return out;
}

EncodingHeader read_encoding_header(const fs::path& path) { return EncodingReader(path).header(); }

void write_encoding_csv(std::ostream& os, const EncodedRepresentation& enc) {
  os << enc.image_id;
  std::array<char, 32> buf{};
  for (double v : enc.vector) {
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), static_cast<float>(v));
    os << ',';
    os.write(buf.data(), res.ptr - buf.data());
  }
  os << '\n';
}

}  // namespace spvlad
