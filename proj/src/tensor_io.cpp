#include "saedet/tensor_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <zlib.h>

namespace saedet {

namespace fs = std::filesystem;

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
  validate_finite();
}

Tensor2D Tensor2D::vector(std::vector<float> data) {
  const std::size_t n = data.size();
  Tensor2D t(1, n, std::move(data));
  t.rank_ = 1;
  return t;
}

Tensor2D Tensor2D::zeros_vector(std::size_t n) {
  Tensor2D t(1, n);
  t.rank_ = 1;
  return t;
}

std::string Tensor2D::shape_string() const {
  if (rank_ == 1) return "[" + std::to_string(cols_) + "]";
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void Tensor2D::validate_finite() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::ostringstream os;
      os << "non-finite value " << data_[i] << " at flat index " << i << " of tensor "
         << shape_string();
      throw ValidationError(os.str());
    }
  }
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::uint32_t header_crc(std::span<const std::uint8_t> prefix, std::span<const std::uint8_t> dims) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, prefix.data(), static_cast<uInt>(prefix.size()));
  crc = crc32(crc, dims.data(), static_cast<uInt>(dims.size()));
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void format_error(TensorFormatIssue issue, const std::string& context,
                               const std::string& msg) {
  throw TensorFormatError(issue, context + ": " + msg);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor2D& t) {
  t.validate_finite();
  const int rank = t.rank();
  std::vector<std::uint8_t> out;
  out.reserve(kSaetFixedHeaderBytes + 8 * rank + 4 * t.size());
  for (char c : {'S', 'A', 'E', 'T'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kSaetVersion);
  out.push_back(0);  // float32
  out.push_back(static_cast<std::uint8_t>(rank));

  std::vector<std::uint8_t> dims;
  if (rank == 2) put_u64(dims, t.rows());
  put_u64(dims, t.cols());

  put_u32(out, header_crc({out.data(), 10}, dims));
  out.insert(out.end(), dims.begin(), dims.end());
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

Tensor2D decode_tensor(std::span<const std::uint8_t> bytes, const std::string& context) {
  if (bytes.size() < kSaetFixedHeaderBytes) {
    format_error(TensorFormatIssue::truncated, context, "truncated header");
  }
  if (std::memcmp(bytes.data(), "SAET", 4) != 0) {
    format_error(TensorFormatIssue::bad_magic, context, "bad magic");
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kSaetVersion) {
    format_error(TensorFormatIssue::bad_version, context,
                 "unsupported version " + std::to_string(version));
  }
  if (bytes[8] != 0) {
    format_error(TensorFormatIssue::bad_dtype, context,
                 "unsupported dtype code " + std::to_string(bytes[8]));
  }
  const int rank = bytes[9];
  if (rank != 1 && rank != 2) {
    format_error(TensorFormatIssue::bad_rank, context, "bad rank " + std::to_string(rank));
  }
  const std::size_t header_bytes = kSaetFixedHeaderBytes + 8 * static_cast<std::size_t>(rank);
  if (bytes.size() < header_bytes) {
    format_error(TensorFormatIssue::truncated, context, "truncated header");
  }
  const auto dims_bytes = bytes.subspan(kSaetFixedHeaderBytes, 8 * static_cast<std::size_t>(rank));
  if (header_crc(bytes.first(10), dims_bytes) != get_u32(bytes.data() + 10)) {
    format_error(TensorFormatIssue::bad_checksum, context, "header checksum mismatch");
  }

  std::uint64_t rows = 1;
  std::uint64_t cols = get_u64(dims_bytes.data());
  if (rank == 2) {
    rows = cols;
    cols = get_u64(dims_bytes.data() + 8);
  }
  const std::uint64_t max_elems = std::numeric_limits<std::uint64_t>::max() / 4;
  if (cols != 0 && rows > max_elems / cols) {
    format_error(TensorFormatIssue::truncated, context, "dimensions overflow");
  }
  const std::uint64_t count = rows * cols;
  const std::uint64_t payload = bytes.size() - header_bytes;
  if (payload < 4 * count) {
    format_error(TensorFormatIssue::truncated, context,
                 "truncated payload: expected " + std::to_string(4 * count) + " bytes, found " +
                     std::to_string(payload));
  }
  if (payload > 4 * count) {
    format_error(TensorFormatIssue::trailing_bytes, context,
                 std::to_string(payload - 4 * count) + " trailing bytes after payload");
  }

  std::vector<float> data(count);
  const std::uint8_t* p = bytes.data() + header_bytes;
  for (std::uint64_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_u32(p + 4 * i));
  }
  try {
    if (rank == 1) return Tensor2D::vector(std::move(data));
    return Tensor2D(rows, cols, std::move(data));
  } catch (const ValidationError& e) {
    throw ValidationError(context + ": " + e.what());
  }
}

void write_tensor(const Tensor2D& t, const fs::path& path) {
  write_file_atomic(path, encode_tensor(t));
}

Tensor2D read_tensor(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_tensor(bytes, path.string());
}

fs::path meta_path_for(const fs::path& tensor_path) {
  fs::path p = tensor_path;
  p.replace_extension(".meta.json");
  return p;
}

nlohmann::json to_json(const TensorMeta& meta) {
  nlohmann::json j = meta.extra.is_object() ? meta.extra : nlohmann::json::object();
  j["layer"] = meta.layer;
  j["model"] = meta.model;
  j["d_model"] = meta.d_model;
  return j;
}

TensorMeta tensor_meta_from_json(const nlohmann::json& j, const std::string& context) {
  if (!j.is_object()) throw ParseError(context + ": metadata must be a JSON object");
  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!j.contains(key)) throw ParseError(context + ": missing required key '" + key + "'");
    return j.at(key);
  };
  TensorMeta meta;
  const auto& layer = require("layer");
  const auto& model = require("model");
  const auto& d_model = require("d_model");
  if (!layer.is_number_integer()) throw ParseError(context + ": 'layer' must be an integer");
  if (!model.is_string()) throw ParseError(context + ": 'model' must be a string");
  if (!d_model.is_number_unsigned()) {
    throw ParseError(context + ": 'd_model' must be a non-negative integer");
  }
  meta.layer = layer.get<int>();
  meta.model = model.get<std::string>();
  meta.d_model = d_model.get<std::size_t>();
  meta.extra = j;
  meta.extra.erase("layer");
  meta.extra.erase("model");
  meta.extra.erase("d_model");
  return meta;
}

void write_tensor_meta(const TensorMeta& meta, const fs::path& tensor_path) {
  write_file_atomic(meta_path_for(tensor_path), to_json(meta).dump(2) + "\n");
}

TensorMeta read_tensor_meta(const fs::path& tensor_path) {
  const auto path = meta_path_for(tensor_path);
  return tensor_meta_from_json(read_json_file(path), path.string());
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());
  return bytes;
}

std::string read_file_text(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json_file(const fs::path& path) {
  const std::string text = read_file_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace saedet
