#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "saedet/sae.hpp"

namespace saedet {

// Ground-truth dictionary for superposition experiments: m_true unit-norm
// directions in R^d, m_true > d, k of them active per sample.
class PlantedDictionary {
 public:
  // Random Gaussian directions, normalized.
  static PlantedDictionary random(std::size_t d, std::size_t m_true, std::size_t sparsity_k,
                                  std::uint64_t seed);
  // Throws ValidationError unless every column has norm 1 +- 1e-6 and m_true > d.
  PlantedDictionary(Tensor2D directions, std::size_t sparsity_k, std::uint64_t seed);

  std::size_t d() const noexcept { return directions_.rows(); }
  std::size_t m_true() const noexcept { return directions_.cols(); }
  std::size_t sparsity_k() const noexcept { return sparsity_k_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Tensor2D& directions() const noexcept { return directions_; }

 private:
  Tensor2D directions_;  // d x m_true
  std::size_t sparsity_k_;
  std::uint64_t seed_;
};

struct CoefficientRange {
  float lo = 0.5f;
  float hi = 1.5f;
};

struct PlantedData {
  Tensor2D samples;                                // n x d
  std::vector<std::vector<std::size_t>> active;    // chosen columns per sample, draw order
  std::vector<std::vector<float>> coefficients;    // matching coefficients
};

// Each sample is a sum of k distinct uniformly chosen columns scaled by
// uniform coefficients. Throws ConfigError if k > m_true or n == 0.
PlantedData generate_planted_data(const PlantedDictionary& dict, std::size_t n_samples,
                                  CoefficientRange coeffs = {});

struct TrainConfig {
  double l1_weight = 0.03;
  double learning_rate = 0.03;
  std::size_t steps = 20000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool renormalize_decoder = true;
  double momentum = 0.9;

  void validate() const;
};

// Trainer state in double precision. The decoder is stored transposed
// (atoms[j] is dictionary column j) so both passes walk contiguous rows.
struct SaeParams {
  std::size_t d = 0;
  std::size_t m = 0;
  std::vector<double> w_enc;    // m x d
  std::vector<double> b_enc;    // m
  std::vector<double> atoms;    // m x d, atoms[j*d + k] == W_dec(k, j)
  std::vector<double> b_dec;    // d

  static SaeParams zeros(std::size_t d, std::size_t m);
  // Unit-norm random atoms, encoder = decoder transpose, zero biases.
  static SaeParams initialize(std::size_t d, std::size_t m, std::uint64_t seed);

  SaeModel to_model() const;
  void renormalize_atoms();
};

// Mean over the selected rows of ||x - x_hat||^2 + l1 * ||f||_1 with a ReLU
// encoder. Writes the gradient into *grad when non-null.
double sae_loss(const SaeParams& params, const Tensor2D& data, std::span<const std::size_t> rows,
                double l1_weight, SaeParams* grad = nullptr);

struct TrainResult {
  SaeModel initial;
  SaeModel model;
  std::vector<double> loss_history;  // minibatch loss per step, before the update
};

using StepObserver = std::function<void(std::size_t step, double loss, const SaeParams& params)>;

// Minibatch SGD with momentum on sae_loss; single-threaded and bit-reproducible
// for a fixed seed. Throws TrainingError on a non-finite loss.
TrainResult train_sae(const Tensor2D& data, std::size_t m, const TrainConfig& cfg,
                      const StepObserver& observer = {});

struct ReconstructionStats {
  double mse = 0.0;            // mean over samples of ||x - x_hat||^2
  double mean_sq_norm = 0.0;   // mean over samples of ||x||^2
  double relative() const { return mean_sq_norm > 0 ? mse / mean_sq_norm : 0.0; }
};

ReconstructionStats reconstruction_stats(const SaeModel& model, const Tensor2D& data);

struct DictionaryMatch {
  std::size_t feature_index = 0;
  std::size_t direction = 0;
  double cosine = 0.0;
};

struct RecoveryReport {
  std::vector<DictionaryMatch> matches;  // greedy order, descending |cosine|
  std::size_t recovered = 0;             // matches with |cosine| >= threshold
  double mean_cosine = 0.0;
  double threshold = 0.9;
};

// Greedy one-to-one matching of decoder columns to planted directions by
// descending |cosine|; ties go to the lower feature index, then lower direction.
RecoveryReport match_dictionary(const SaeModel& model, const PlantedDictionary& dict,
                                double threshold = 0.9);

// CSV: feature_index,matched_direction,cosine
void write_recovery_csv(const RecoveryReport& report, const std::filesystem::path& path);

}  // namespace saedet
