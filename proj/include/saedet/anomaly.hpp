#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "saedet/corpus.hpp"

namespace saedet {

struct ScanOptions {
  // Count " , " only, i.e. also require a space after the comma.
  bool require_space_after_comma = false;
};

struct AnomalyCounts {
  std::string doc_id;
  std::size_t space_before_comma = 0;
  std::size_t comma_after_linebreak = 0;
  std::size_t long_ellipsis = 0;                      // maximal runs of >= 4 dots
  std::map<std::size_t, std::size_t> linebreak_runs;  // exact run length (>= 2) -> runs
  std::size_t single_linebreaks = 0;                  // runs of length 1
  std::size_t markdown_heading = 0;
  std::size_t token_length = 0;

  std::size_t runs_of(std::size_t length) const;
  friend bool operator==(const AnomalyCounts&, const AnomalyCounts&) = default;
};

AnomalyCounts scan_text(std::string_view text, const ScanOptions& opts = {});
AnomalyCounts scan_document(const Document& doc, const ScanOptions& opts = {});

// Report rows use these names; linebreak_N is "exactly N newlines in a row".
enum class AnomalyKind {
  space_before_comma,
  comma_after_linebreak,
  long_ellipsis,
  linebreak_2,
  linebreak_3,
  linebreak_4,
  markdown_heading,
};
inline constexpr std::array<AnomalyKind, 7> kAllAnomalyKinds = {
    AnomalyKind::space_before_comma, AnomalyKind::comma_after_linebreak, AnomalyKind::long_ellipsis,
    AnomalyKind::linebreak_2,        AnomalyKind::linebreak_3,           AnomalyKind::linebreak_4,
    AnomalyKind::markdown_heading};

std::string to_string(AnomalyKind k);
AnomalyKind parse_anomaly_kind(const std::string& s);
std::size_t count_of(const AnomalyCounts& c, AnomalyKind k);

struct FrequencyRow {
  std::string model;
  AnomalyKind anomaly;
  std::size_t n_docs = 0;
  double fraction_at_least_once = 0.0;
  double mean_count = 0.0;
  double mean_token_length = 0.0;
};

// One row per (model tag, anomaly kind), model tags in lexicographic order.
// Throws DataError on an empty corpus.
std::vector<FrequencyRow> corpus_frequency_report(const Corpus& corpus, const ScanOptions& opts = {});

std::string frequency_report_csv(const std::vector<FrequencyRow>& rows);
std::string frequency_report_jsonl(const std::vector<FrequencyRow>& rows);

}  // namespace saedet
