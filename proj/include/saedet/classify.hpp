#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saedet/corpus.hpp"
#include "saedet/sae.hpp"

namespace saedet {

// Labels throughout this module are 0 = human, 1 = machine.

// Mean of the human and machine F1 scores; a 0/0 precision, recall or F1 is 0.
// ShapeError on a length mismatch, DataError on empty input.
double macro_f1(std::span<const int> predictions, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Threshold classifiers

enum class ThresholdDirection { geq_is_machine, leq_is_machine };
std::string to_string(ThresholdDirection d);
ThresholdDirection parse_threshold_direction(const std::string& s);

struct ThresholdClassifier {
  std::size_t feature_index = 0;
  double threshold = 0.0;
  ThresholdDirection direction = ThresholdDirection::geq_is_machine;

  int predict(double value) const {
    return direction == ThresholdDirection::geq_is_machine ? (value >= threshold ? 1 : 0)
                                                           : (value <= threshold ? 1 : 0);
  }
};

struct ThresholdFit {
  ThresholdClassifier classifier;
  double macro_f1 = 0.0;
};

// Sentinel below the minimum, midpoints of consecutive distinct values, and a
// sentinel above the maximum, ascending. Sentinels sit max(1, |v|) outside.
std::vector<double> threshold_candidates(std::span<const double> values);

// Scores are compared with this slack so that equal confusion matrices always
// tie regardless of rounding.
inline constexpr double kScoreTieEpsilon = 1e-12;

// Maximises macro F1 over threshold_candidates() and both directions. Ties go
// to geq_is_machine, then to the smallest threshold. DataError unless both
// classes are present; ValidationError on non-finite values.
ThresholdFit fit_threshold(std::span<const double> values, std::span<const int> labels,
                           std::size_t feature_index = 0);

// ---------------------------------------------------------------------------
// Subset evaluation

enum class Grouping { domain, model, split };
std::string to_string(Grouping g);
Grouping parse_grouping(const std::string& s);

struct Subset {
  std::string id;
  std::vector<std::size_t> docs;  // indices into the corpus
};

// Subsets in lexicographic id order. domain and split subsets hold every doc
// with that tag (all four split names always appear). A model subset holds the
// machine docs of that model plus the human docs from the same domains.
// When `restrict_split` is set, only docs of that split are considered.
std::vector<Subset> make_subsets(const Corpus& corpus, Grouping grouping,
                                 std::optional<Split> restrict_split = std::nullopt);

struct SubsetEvalOptions {
  Grouping grouping = Grouping::domain;
  std::size_t folds = 5;
  bool in_sample = false;                // score the full-subset fit on the subset itself
  std::vector<std::size_t> features;     // empty: every feature
  std::optional<Split> restrict_split;
  std::uint64_t seed = 0;
};

struct SubsetScoreRow {
  std::size_t feature_index = 0;
  Grouping grouping = Grouping::domain;
  std::string subset;
  std::size_t n_docs = 0;
  std::optional<double> macro_f1;  // nullopt: empty or single-class subset
  double threshold = 0.0;          // fit on the whole subset
  ThresholdDirection direction = ThresholdDirection::geq_is_machine;
  bool cross_validated = false;
};

// Rows are subset-major, then by feature index. With cross-validation the
// score comes from stratified k-fold out-of-fold predictions; k is reduced to
// the minority class size, and a subset whose minority class has one doc is
// scored in-sample. DataError if a doc lacks a feature row.
std::vector<SubsetScoreRow> evaluate_threshold_subsets(const Corpus& corpus, const FeatureTable& features,
                                                       const SubsetEvalOptions& opts);

std::string subset_scores_csv(const std::vector<SubsetScoreRow>& rows);
std::string subset_scores_jsonl(const std::vector<SubsetScoreRow>& rows);

// ---------------------------------------------------------------------------
// Gradient-boosted trees

struct GbdtParams {
  std::size_t rounds = 100;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double lambda = 1.0;  // L2 leaf regularisation

  void validate() const;
};

struct GbdtNode {
  bool leaf = true;
  std::size_t feature = 0;
  double threshold = 0.0;  // x < threshold goes left
  std::size_t left = 0;
  std::size_t right = 0;
  double value = 0.0;      // leaf weight, before the learning rate
  double gain = 0.0;       // split gain, 0 for leaves

  friend bool operator==(const GbdtNode&, const GbdtNode&) = default;
};

struct GbdtTree {
  std::vector<GbdtNode> nodes;  // nodes[0] is the root

  double leaf_value(std::span<const float> x) const;
  friend bool operator==(const GbdtTree&, const GbdtTree&) = default;
};

class GbdtModel {
 public:
  GbdtModel() = default;
  GbdtModel(std::vector<GbdtTree> trees, double learning_rate, double base_score, std::size_t n_features);

  const std::vector<GbdtTree>& trees() const noexcept { return trees_; }
  double learning_rate() const noexcept { return learning_rate_; }
  double base_score() const noexcept { return base_score_; }
  std::size_t n_features() const noexcept { return n_features_; }

  // base_score + learning_rate * sum of tree outputs, accumulated in tree order.
  // ShapeError on a width mismatch.
  double margin(std::span<const float> x) const;
  double predict_proba(std::span<const float> x) const;
  int predict(std::span<const float> x, double cut = 0.5) const { return predict_proba(x) >= cut ? 1 : 0; }

  friend bool operator==(const GbdtModel&, const GbdtModel&) = default;

 private:
  std::vector<GbdtTree> trees_;
  double learning_rate_ = 0.1;
  double base_score_ = 0.0;
  std::size_t n_features_ = 0;
};

struct GbdtFit {
  GbdtModel model;
  std::vector<double> loss_history;   // mean logistic loss after each round
  std::vector<double> train_margins;  // final fit-time margins per sample
};

// Binary logistic boosting with exact greedy second-order splits. Split gain
// is 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)]; a split needs gain > 0 and
// each child hessian >= min_child_weight. Ties: lower feature, then lower
// threshold. base_score is the log-odds of the machine rate.
GbdtFit fit_gbdt(const Tensor2D& x, std::span<const int> labels, const GbdtParams& params = {});

std::vector<double> predict_proba(const GbdtModel& model, const Tensor2D& x);

struct FeatureImportance {
  std::size_t feature = 0;
  double gain = 0.0;
};

// Total split gain per feature, descending, ties by lower index; returns the
// first ceil(top_fraction * M) entries. ConfigError unless top_fraction in (0, 1].
std::vector<FeatureImportance> feature_importance(const GbdtModel& model, double top_fraction = 1.0);

// Text format:
//   saedet-gbdt 1
//   learning_rate <v>
//   base_score <v>
//   n_features <M>
//   n_trees <T>
//   tree_id,node_id,kind,feature,threshold,left,right,value,gain
//   one line per node; split/leaf fields not used by the kind are empty
std::string serialize_gbdt(const GbdtModel& model);
GbdtModel parse_gbdt(std::string_view text, const std::string& context = "<gbdt>");
void save_gbdt(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_gbdt(const std::filesystem::path& path);

// Cut in (0,1) maximising macro F1 of proba >= cut; ties to the cut closest
// to 0.5. Used for optional dev-set tuning.
double tune_probability_cut(std::span<const double> proba, std::span<const int> labels);

// Per-subset macro F1 of a trained model (rows have no feature index).
struct ModelSubsetRow {
  Grouping grouping = Grouping::domain;
  std::string subset;
  std::size_t n_docs = 0;
  std::optional<double> macro_f1;  // nullopt for an empty subset
};

std::vector<ModelSubsetRow> evaluate_model_subsets(const GbdtModel& model, const Corpus& corpus,
                                                   const FeatureTable& features, Grouping grouping,
                                                   std::optional<Split> restrict_split, double cut = 0.5);

std::vector<int> corpus_labels(const Corpus& corpus);

// Rows of `features` in corpus order (DataError naming missing ids).
Tensor2D gather_rows(const FeatureTable& features, const Corpus& corpus, std::span<const std::size_t> docs);

}  // namespace saedet
