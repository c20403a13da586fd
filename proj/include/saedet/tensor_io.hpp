#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "saedet/error.hpp"

namespace saedet {

// Dense row-major float32 matrix. A rank-1 tensor is a vector (rows() == 1)
// and keeps its rank through serialization.
class Tensor2D {
 public:
  Tensor2D() = default;
  // Zero-filled.
  Tensor2D(std::size_t rows, std::size_t cols);
  // Throws ShapeError if data.size() != rows*cols, ValidationError on non-finite values.
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data);

  static Tensor2D vector(std::vector<float> data);
  static Tensor2D zeros_vector(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  int rank() const noexcept { return rank_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::span<float> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }

  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  // Rank-1 element access.
  float operator[](std::size_t i) const { return data_[i]; }
  float& operator[](std::size_t i) { return data_[i]; }

  std::string shape_string() const;

  // Throws ValidationError naming the first non-finite element.
  void validate_finite() const;

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  int rank_ = 2;
  std::vector<float> data_;
};

// SAET v1 layout (all integers little-endian):
//   0  magic "SAET"
//   4  u32 version (1)
//   8  u8  dtype (0 = float32)
//   9  u8  rank (1 or 2)
//  10  u32 CRC-32 of bytes [0,10) followed by the dims bytes
//  14  u64 dims[rank]
//  ..  float32 payload, row-major
inline constexpr std::size_t kSaetFixedHeaderBytes = 14;
inline constexpr std::uint32_t kSaetVersion = 1;

enum class TensorFormatIssue {
  bad_magic,
  bad_version,
  bad_dtype,
  bad_rank,
  bad_checksum,
  truncated,
  trailing_bytes,
};

class TensorFormatError : public ParseError {
 public:
  TensorFormatError(TensorFormatIssue issue, const std::string& what)
      : ParseError(what), issue_(issue) {}
  TensorFormatIssue issue() const noexcept { return issue_; }

 private:
  TensorFormatIssue issue_;
};

std::vector<std::uint8_t> encode_tensor(const Tensor2D& t);
// `context` is prefixed to error messages (typically the file path).
Tensor2D decode_tensor(std::span<const std::uint8_t> bytes, const std::string& context = "<memory>");

void write_tensor(const Tensor2D& t, const std::filesystem::path& path);
Tensor2D read_tensor(const std::filesystem::path& path);

// "<dir>/<stem>.meta.json" for "<dir>/<stem>.saet".
std::filesystem::path meta_path_for(const std::filesystem::path& tensor_path);

// Sidecar for activation tensors. Required keys: layer, model, d_model.
struct TensorMeta {
  int layer = 0;
  std::string model;
  std::size_t d_model = 0;
  nlohmann::json extra = nlohmann::json::object();  // any further keys, kept verbatim
};

nlohmann::json to_json(const TensorMeta& meta);
TensorMeta tensor_meta_from_json(const nlohmann::json& j, const std::string& context);
void write_tensor_meta(const TensorMeta& meta, const std::filesystem::path& tensor_path);
TensorMeta read_tensor_meta(const std::filesystem::path& tensor_path);

// Whole-file helpers shared by every writer. write_file_atomic writes a
// sibling temp file and renames it over the target.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace saedet
