#include "saedet/anomaly.hpp"

#include <cstdio>

#include "saedet/csv.hpp"

namespace saedet {

std::size_t AnomalyCounts::runs_of(std::size_t length) const {
  if (length == 1) return single_linebreaks;
  const auto it = linebreak_runs.find(length);
  return it == linebreak_runs.end() ? 0 : it->second;
}

AnomalyCounts scan_text(std::string_view text, const ScanOptions& opts) {
  AnomalyCounts c;
  const std::size_t n = text.size();
  bool at_line_start = true;      // only spaces seen since the last newline (or text start)
  bool after_newline = false;     // the line start above follows an actual '\n'
  std::size_t i = 0;
  while (i < n) {
    const char ch = text[i];
    if (ch == '\n' || ch == '\r') {
      std::size_t j = i;
      std::size_t newlines = 0;
      while (j < n && (text[j] == '\n' || text[j] == '\r')) {
        if (text[j] == '\n') ++newlines;
        ++j;
      }
      if (newlines == 1) {
        ++c.single_linebreaks;
      } else if (newlines >= 2) {
        ++c.linebreak_runs[newlines];
      }
      if (newlines > 0) {
        at_line_start = true;
        after_newline = true;
      }
      i = j;
      continue;
    }
    if (ch == '.') {
      std::size_t j = i;
      while (j < n && text[j] == '.') ++j;
      if (j - i >= 4) ++c.long_ellipsis;
      at_line_start = false;
      i = j;
      continue;
    }
    if (ch == ' ' || ch == '\t') {
      ++i;
      continue;
    }
    if (ch == ',') {
      if (i > 0 && text[i - 1] == ' ' &&
          (!opts.require_space_after_comma || (i + 1 < n && text[i + 1] == ' '))) {
        ++c.space_before_comma;
      }
      if (at_line_start && after_newline) ++c.comma_after_linebreak;
    }
    if (ch == '#' && at_line_start && i + 1 < n && text[i + 1] == '#') ++c.markdown_heading;
    at_line_start = false;
    ++i;
  }
  c.token_length = token_count(text);
  return c;
}

AnomalyCounts scan_document(const Document& doc, const ScanOptions& opts) {
  AnomalyCounts c = scan_text(doc.text, opts);
  c.doc_id = doc.id;
  return c;
}

std::string to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::space_before_comma: return "space_before_comma";
    case AnomalyKind::comma_after_linebreak: return "comma_after_linebreak";
    case AnomalyKind::long_ellipsis: return "long_ellipsis";
    case AnomalyKind::linebreak_2: return "linebreak_2";
    case AnomalyKind::linebreak_3: return "linebreak_3";
    case AnomalyKind::linebreak_4: return "linebreak_4";
    case AnomalyKind::markdown_heading: return "markdown_heading";
  }
  return "space_before_comma";
}

AnomalyKind parse_anomaly_kind(const std::string& s) {
  for (AnomalyKind k : kAllAnomalyKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown anomaly kind '" + s + "'");
}

std::size_t count_of(const AnomalyCounts& c, AnomalyKind k) {
  switch (k) {
    case AnomalyKind::space_before_comma: return c.space_before_comma;
    case AnomalyKind::comma_after_linebreak: return c.comma_after_linebreak;
    case AnomalyKind::long_ellipsis: return c.long_ellipsis;
    case AnomalyKind::linebreak_2: return c.runs_of(2);
    case AnomalyKind::linebreak_3: return c.runs_of(3);
    case AnomalyKind::linebreak_4: return c.runs_of(4);
    case AnomalyKind::markdown_heading: return c.markdown_heading;
  }
  return 0;
}

std::vector<FrequencyRow> corpus_frequency_report(const Corpus& corpus, const ScanOptions& opts) {
  if (corpus.empty()) throw DataError("frequency report needs a non-empty corpus");
  struct Acc {
    std::size_t docs = 0;
    double tokens = 0.0;
    std::array<std::size_t, kAllAnomalyKinds.size()> present{};
    std::array<double, kAllAnomalyKinds.size()> total{};
  };
  std::map<std::string, Acc> by_model;
  for (const auto& doc : corpus) {
    const auto c = scan_document(doc, opts);
    auto& a = by_model[doc.model];
    ++a.docs;
    a.tokens += static_cast<double>(c.token_length);
    for (std::size_t k = 0; k < kAllAnomalyKinds.size(); ++k) {
      const std::size_t v = count_of(c, kAllAnomalyKinds[k]);
      if (v > 0) ++a.present[k];
      a.total[k] += static_cast<double>(v);
    }
  }
  std::vector<FrequencyRow> rows;
  for (const auto& [model, a] : by_model) {
    const double n = static_cast<double>(a.docs);
    for (std::size_t k = 0; k < kAllAnomalyKinds.size(); ++k) {
      rows.push_back({model, kAllAnomalyKinds[k], a.docs, static_cast<double>(a.present[k]) / n,
                      a.total[k] / n, a.tokens / n});
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string frequency_report_csv(const std::vector<FrequencyRow>& rows) {
  std::string out = "model,anomaly,fraction_at_least_once,mean_count,mean_token_length\n";
  for (const auto& r : rows) {
    out += csv_field(r.model) + "," + to_string(r.anomaly) + "," + fmt(r.fraction_at_least_once) + "," +
           fmt(r.mean_count) + "," + fmt(r.mean_token_length) + "\n";
  }
  return out;
}

std::string frequency_report_jsonl(const std::vector<FrequencyRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["anomaly"] = to_string(r.anomaly);
    j["n_docs"] = r.n_docs;
    j["fraction_at_least_once"] = r.fraction_at_least_once;
    j["mean_count"] = r.mean_count;
    j["mean_token_length"] = r.mean_token_length;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace saedet
