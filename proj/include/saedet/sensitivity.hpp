#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saedet/anomaly.hpp"
#include "saedet/attacks.hpp"
#include "saedet/corpus.hpp"
#include "saedet/sae.hpp"

namespace saedet {

enum class SensitivityTarget { length, anomaly, attack };
std::string to_string(SensitivityTarget t);

struct RankedFeature {
  std::size_t feature = 0;
  double score = 0.0;
};

struct SensitivityGroup {
  std::string group;                // domain, or "model/domain" for attacks
  std::size_t n_a = 0;              // long / anomalous / attacked docs
  std::size_t n_b = 0;              // short / clean / clean docs
  std::vector<RankedFeature> top;   // min(top_k, candidate features) entries
};

struct SensitivityReport {
  SensitivityTarget target = SensitivityTarget::length;
  std::string kind;                 // anomaly or attack name; empty for length
  std::string sae_id;
  std::vector<SensitivityGroup> groups;
  std::vector<std::size_t> intersection;       // ascending
  std::vector<std::string> degraded_coverage;  // groups used when fewer than wanted qualified
  bool all_zero = false;                       // every listed score is exactly 0
};

struct SensitivityOptions {
  std::size_t top_k = 10;
  bool signed_difference = false;  // rank by a - b instead of |a - b|
  std::size_t min_domain_size = 100;
  std::size_t anomaly_domains = 3;
  std::string sae_id;
};

// Per human-text domain with more than min_domain_size docs: the top and
// bottom 10% by token count (floor, at least 1), score = |mean_long - mean_short|.
// DataError when no domain qualifies.
SensitivityReport length_sensitivity(const Corpus& corpus, const FeatureTable& features,
                                     const SensitivityOptions& opts = {});

// Human docs only. Domains holding both anomalous and clean docs are ranked by
// anomalous fraction (ties by name) and the first opts.anomaly_domains used;
// fewer than that sets degraded_coverage. score = |mean_with - mean_without|.
// DataError when the anomaly never occurs or no domain has both kinds of doc.
SensitivityReport anomaly_sensitivity(const Corpus& corpus, const FeatureTable& features, AnomalyKind kind,
                                      const SensitivityOptions& opts = {}, const ScanOptions& scan = {});

// One group per (model tag, domain) of the clean corpus; score =
// |mean_attacked - mean_clean| over `restrict_to` (every feature when empty).
// DataError naming any doc without an attacked row.
SensitivityReport attack_sensitivity(const Corpus& clean, const FeatureTable& clean_features,
                                     const FeatureTable& attacked_features, const std::string& attack_name,
                                     std::span<const std::size_t> restrict_to,
                                     const SensitivityOptions& opts = {});

// group,rank,feature_index,score rows, then one "intersection" row per
// intersecting feature (rank = position, score empty).
std::string sensitivity_csv(const SensitivityReport& report);
std::string sensitivity_jsonl(const SensitivityReport& report);

}  // namespace saedet
