#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "saedet/tensor_io.hpp"

namespace saedet {

enum class Activation { relu, jumprelu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

// Sparse autoencoder: f(x) = act(W_enc x + b_enc), x_hat = W_dec f + b_dec.
// W_enc is M x d, W_dec is d x M; column i of W_dec is dictionary atom i.
class SaeModel {
 public:
  // Validates shapes, M > d, finiteness, and non-negative jump thresholds.
  SaeModel(Tensor2D w_enc, Tensor2D b_enc, Tensor2D w_dec, Tensor2D b_dec,
           Activation activation = Activation::relu, std::vector<float> jump_threshold = {});

  std::size_t d_model() const noexcept { return d_model_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const Tensor2D& w_enc() const noexcept { return w_enc_; }
  const Tensor2D& b_enc() const noexcept { return b_enc_; }
  const Tensor2D& w_dec() const noexcept { return w_dec_; }
  const Tensor2D& b_dec() const noexcept { return b_dec_; }
  Activation activation() const noexcept { return activation_; }
  std::span<const float> jump_threshold() const noexcept { return jump_threshold_; }

  // Some SAE families encode (x - b_dec) instead of x. Off by default; the
  // plain form is what load/save and every analysis use unless a model's
  // metadata asks for it.
  bool subtract_decoder_bias() const noexcept { return subtract_decoder_bias_; }
  void set_subtract_decoder_bias(bool on) noexcept { subtract_decoder_bias_ = on; }

  std::vector<float> decoder_column(std::size_t i) const;

  friend bool operator==(const SaeModel&, const SaeModel&) = default;

 private:
  std::size_t d_model_ = 0;
  std::size_t n_features_ = 0;
  Tensor2D w_enc_;
  Tensor2D b_enc_;
  Tensor2D w_dec_;
  Tensor2D b_dec_;
  Activation activation_ = Activation::relu;
  std::vector<float> jump_threshold_;
  bool subtract_decoder_bias_ = false;
};

// Per-token feature activations, n_tokens x M, every entry >= 0.
class TokenFeatureMatrix {
 public:
  TokenFeatureMatrix() = default;
  // Throws ValidationError on a negative entry.
  explicit TokenFeatureMatrix(Tensor2D values);

  std::size_t n_tokens() const noexcept { return values_.rows(); }
  std::size_t n_features() const noexcept { return values_.cols(); }
  const Tensor2D& values() const noexcept { return values_; }
  std::span<const float> row(std::size_t t) const { return values_.row(t); }
  float operator()(std::size_t t, std::size_t j) const { return values_(t, j); }

  friend bool operator==(const TokenFeatureMatrix&, const TokenFeatureMatrix&) = default;

 private:
  Tensor2D values_;
};

struct DocFeatureVector {
  std::string doc_id;
  std::vector<float> values;
};

enum class PoolingMode { sum, mean };

PoolingMode parse_pooling(const std::string& name);

// Pre-activation W_enc x + b_enc (with the optional b_dec pre-subtraction),
// accumulated in double.
std::vector<double> pre_activations(const SaeModel& model, std::span<const float> x);
std::vector<float> encode_token(const SaeModel& model, std::span<const float> x);
TokenFeatureMatrix encode(const SaeModel& model, const Tensor2D& acts);
Tensor2D decode(const SaeModel& model, const TokenFeatureMatrix& feats);

// Column-wise sum (or mean) of the rows, token order, float64 accumulator.
// Throws DataError on zero rows. Also used for the raw-activation arm.
std::vector<float> pool_rows(const Tensor2D& rows, PoolingMode mode = PoolingMode::sum);
DocFeatureVector pool_document(const TokenFeatureMatrix& feats, std::string doc_id,
                               PoolingMode mode = PoolingMode::sum);

// Token-level maximum of every feature over a stream of activation tensors.
class AMaxAccumulator {
 public:
  explicit AMaxAccumulator(const SaeModel& model);

  void add(const Tensor2D& acts);
  std::size_t tokens_seen() const noexcept { return tokens_; }
  // Throws DataError if no token was added.
  std::vector<float> result() const;

 private:
  const SaeModel* model_;
  std::vector<float> max_;
  std::size_t tokens_ = 0;
};

std::vector<float> compute_a_max(const SaeModel& model, std::span<const Tensor2D> reference);

struct SteeringConfig {
  std::size_t feature_index = 0;
  float lambda = 0.0f;
  float a_max = 0.0f;
  std::string provenance;  // which reference set a_max came from
};

// x' = x + lambda * a_max * W_dec[:, i] for every row.
Tensor2D apply_steering(const Tensor2D& acts, const SaeModel& model, const SteeringConfig& cfg);

inline constexpr std::array<float, 14> kSteeringShifts = {
    -4.0f, -3.0f, -2.5f, -2.0f, -1.5f, -1.0f, -0.5f, 0.5f, 1.0f, 1.5f, 2.0f, 2.5f, 3.0f, 4.0f};

struct SteeringAnchor {
  std::size_t feature_index = 0;
  float a_max = 0.0f;
  std::string provenance;
};

struct SteeringGrid {
  std::vector<SteeringAnchor> features;
  std::vector<float> shifts{kSteeringShifts.begin(), kSteeringShifts.end()};

  // Feature-major, shifts in order. Throws ConfigError if either list is empty.
  std::vector<SteeringConfig> expand() const;
};

// Analysis prompt for an external interpreter model; "{}" receives the
// comma-separated feature list.
extern const char* const kSteeringPromptTemplate;
std::string render_steering_prompt(std::span<const std::size_t> features);

struct SteeringProtocolFiles {
  std::filesystem::path manifest;
  std::filesystem::path prompt;
  std::size_t rows = 0;
};

// Writes steering_manifest.csv (feature_index,lambda,a_max,provenance) and
// steering_prompt.txt under out_dir.
SteeringProtocolFiles emit_steering_protocol(const SteeringGrid& grid,
                                             const std::filesystem::path& out_dir);

// Directory layout: W_enc.saet b_enc.saet W_dec.saet b_dec.saet
// [jump_threshold.saet] sae.meta.json.
struct SaeMeta {
  int layer = 0;
  std::string model_name;
};

void save_sae(const SaeModel& model, const std::filesystem::path& dir, const SaeMeta& meta = {});
SaeModel load_sae(const std::filesystem::path& dir, SaeMeta* meta_out = nullptr);

// Pooled vectors for a set of documents: row r of `values` belongs to doc_ids[r].
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<std::string> doc_ids, Tensor2D values);

  std::size_t n_docs() const noexcept { return doc_ids_.size(); }
  std::size_t n_features() const noexcept { return values_.cols(); }
  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const Tensor2D& values() const noexcept { return values_; }

  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  // Throws DataError for an unknown id.
  std::span<const float> row(const std::string& id) const;
  std::span<const float> row(std::size_t r) const { return values_.row(r); }

 private:
  std::vector<std::string> doc_ids_;
  Tensor2D values_;
  std::unordered_map<std::string, std::size_t> index_;
};

FeatureTable make_feature_table(const std::vector<DocFeatureVector>& docs);

// <path> holds the matrix; the id index goes next to it as <stem>.ids.txt.
std::filesystem::path ids_path_for(const std::filesystem::path& features_path);
void write_feature_table(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable read_feature_table(const std::filesystem::path& path);

}  // namespace saedet
