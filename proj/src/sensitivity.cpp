#include "saedet/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "saedet/csv.hpp"

namespace saedet {

std::string to_string(SensitivityTarget t) {
  switch (t) {
    case SensitivityTarget::length: return "length";
    case SensitivityTarget::anomaly: return "anomaly";
    case SensitivityTarget::attack: return "attack";
  }
  return "length";
}

namespace {

// Column means over the given docs, summed in doc-id order so the result does
// not depend on how the group was listed.
std::vector<double> mean_rows(const FeatureTable& table, const Corpus& corpus, std::vector<std::size_t> docs) {
  std::sort(docs.begin(), docs.end(), [&](std::size_t a, std::size_t b) { return corpus[a].id < corpus[b].id; });
  std::vector<double> sum(table.n_features(), 0.0);
  for (auto i : docs) {
    const auto row = table.row(corpus[i].id);
    for (std::size_t f = 0; f < sum.size(); ++f) sum[f] += row[f];
  }
  for (auto& v : sum) v /= static_cast<double>(docs.size());
  return sum;
}

std::vector<RankedFeature> top_features(const std::vector<double>& a, const std::vector<double>& b,
                                        std::span<const std::size_t> candidates, const SensitivityOptions& opts) {
  std::vector<RankedFeature> scored;
  scored.reserve(candidates.size());
  for (auto f : candidates) {
    const double d = a[f] - b[f];
    scored.push_back({f, opts.signed_difference ? d : std::abs(d)});
  }
  std::sort(scored.begin(), scored.end(), [](const RankedFeature& x, const RankedFeature& y) {
    return x.score != y.score ? x.score > y.score : x.feature < y.feature;
  });
  scored.resize(std::min(opts.top_k, scored.size()));
  return scored;
}

void finish(SensitivityReport& r) {
  std::set<std::size_t> inter;
  for (std::size_t g = 0; g < r.groups.size(); ++g) {
    std::set<std::size_t> s;
    for (const auto& t : r.groups[g].top) s.insert(t.feature);
    if (g == 0) {
      inter = std::move(s);
    } else {
      std::set<std::size_t> keep;
      std::set_intersection(inter.begin(), inter.end(), s.begin(), s.end(), std::inserter(keep, keep.end()));
      inter = std::move(keep);
    }
  }
  r.intersection.assign(inter.begin(), inter.end());
  r.all_zero = std::all_of(r.groups.begin(), r.groups.end(), [](const SensitivityGroup& g) {
    return std::all_of(g.top.begin(), g.top.end(), [](const RankedFeature& t) { return t.score == 0.0; });
  });
}

std::vector<std::size_t> all_features(std::size_t m) {
  std::vector<std::size_t> v(m);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

void require_rows(const FeatureTable& table, const Corpus& corpus, const std::vector<std::size_t>& docs,
                  const std::string& what) {
  std::vector<std::string> missing;
  for (auto i : docs) {
    if (!table.contains(corpus[i].id)) missing.push_back(corpus[i].id);
  }
  if (missing.empty()) return;
  std::string msg = what + " missing for " + std::to_string(missing.size()) + " document(s):";
  for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) msg += " " + missing[k];
  if (missing.size() > 10) msg += " ...";
  throw DataError(msg);
}

void check_options(const SensitivityOptions& opts) {
  if (opts.top_k == 0) throw ConfigError("top_k must be >= 1");
}

}  // namespace

SensitivityReport length_sensitivity(const Corpus& corpus, const FeatureTable& features,
                                     const SensitivityOptions& opts) {
  check_options(opts);
  std::map<std::string, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label == Label::human) by_domain[corpus[i].domain].push_back(i);
  }
  SensitivityReport r;
  r.target = SensitivityTarget::length;
  r.sae_id = opts.sae_id;
  const auto candidates = all_features(features.n_features());
  for (auto& [domain, docs] : by_domain) {
    if (docs.size() <= opts.min_domain_size) continue;
    require_rows(features, corpus, docs, "feature rows");
    std::vector<std::pair<std::size_t, std::size_t>> len;  // (tokens, doc)
    for (auto i : docs) len.emplace_back(token_count(corpus[i].text), i);
    std::sort(len.begin(), len.end(), [&](const auto& a, const auto& b) {
      return a.first != b.first ? a.first < b.first : corpus[a.second].id < corpus[b.second].id;
    });
    const std::size_t q = std::max<std::size_t>(1, docs.size() / 10);
    std::vector<std::size_t> shortest, longest;
    for (std::size_t k = 0; k < q; ++k) {
      shortest.push_back(len[k].second);
      longest.push_back(len[len.size() - 1 - k].second);
    }
    SensitivityGroup g;
    g.group = domain;
    g.n_a = longest.size();
    g.n_b = shortest.size();
    g.top = top_features(mean_rows(features, corpus, longest), mean_rows(features, corpus, shortest), candidates, opts);
    r.groups.push_back(std::move(g));
  }
  if (r.groups.empty()) {
    throw DataError("length sensitivity: no human-text domain has more than " +
                    std::to_string(opts.min_domain_size) + " documents");
  }
  finish(r);
  return r;
}

SensitivityReport anomaly_sensitivity(const Corpus& corpus, const FeatureTable& features, AnomalyKind kind,
                                      const SensitivityOptions& opts, const ScanOptions& scan) {
  check_options(opts);
  if (opts.anomaly_domains == 0) throw ConfigError("anomaly_domains must be >= 1");
  struct Split2 {
    std::vector<std::size_t> with, without;
  };
  std::map<std::string, Split2> by_domain;
  std::size_t occurrences = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].label != Label::human) continue;
    const bool has = count_of(scan_document(corpus[i], scan), kind) > 0;
    occurrences += has ? 1 : 0;
    auto& s = by_domain[corpus[i].domain];
    (has ? s.with : s.without).push_back(i);
  }
  if (occurrences == 0) {
    throw DataError("anomaly sensitivity: " + to_string(kind) + " does not occur in any human text");
  }
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [domain, s] : by_domain) {
    if (s.with.empty() || s.without.empty()) continue;
    ranked.emplace_back(static_cast<double>(s.with.size()) / static_cast<double>(s.with.size() + s.without.size()),
                        domain);
  }
  if (ranked.empty()) {
    throw DataError("anomaly sensitivity: no domain has both texts with and without " + to_string(kind));
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (ranked.size() > opts.anomaly_domains) ranked.resize(opts.anomaly_domains);

  SensitivityReport r;
  r.target = SensitivityTarget::anomaly;
  r.kind = to_string(kind);
  r.sae_id = opts.sae_id;
  const auto candidates = all_features(features.n_features());
  for (const auto& [frac, domain] : ranked) {
    const auto& s = by_domain[domain];
    require_rows(features, corpus, s.with, "feature rows");
    require_rows(features, corpus, s.without, "feature rows");
    SensitivityGroup g;
    g.group = domain;
    g.n_a = s.with.size();
    g.n_b = s.without.size();
    g.top = top_features(mean_rows(features, corpus, s.with), mean_rows(features, corpus, s.without), candidates, opts);
    r.groups.push_back(std::move(g));
  }
  if (r.groups.size() < opts.anomaly_domains) {
    for (const auto& g : r.groups) r.degraded_coverage.push_back(g.group);
  }
  finish(r);
  return r;
}

SensitivityReport attack_sensitivity(const Corpus& clean, const FeatureTable& clean_features,
                                     const FeatureTable& attacked_features, const std::string& attack_name,
                                     std::span<const std::size_t> restrict_to, const SensitivityOptions& opts) {
  check_options(opts);
  if (clean_features.n_features() != attacked_features.n_features()) {
    throw ShapeError("clean and attacked feature tables differ in width (" +
                     std::to_string(clean_features.n_features()) + " vs " +
                     std::to_string(attacked_features.n_features()) + ")");
  }
  const std::size_t m = clean_features.n_features();
  std::vector<std::size_t> candidates(restrict_to.begin(), restrict_to.end());
  if (candidates.empty()) candidates = all_features(m);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  for (auto f : candidates) {
    if (f >= m) throw ConfigError("restricted feature " + std::to_string(f) + " out of range");
  }

  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < clean.size(); ++i) cells[{clean[i].model, clean[i].domain}].push_back(i);
  std::vector<std::size_t> everyone(clean.size());
  std::iota(everyone.begin(), everyone.end(), 0);
  require_rows(attacked_features, clean, everyone, "attacked counterpart");
  require_rows(clean_features, clean, everyone, "clean feature rows");

  SensitivityReport r;
  r.target = SensitivityTarget::attack;
  r.kind = attack_name;
  r.sae_id = opts.sae_id;
  for (const auto& [key, docs] : cells) {
    SensitivityGroup g;
    g.group = key.first + "/" + key.second;
    g.n_a = docs.size();
    g.n_b = docs.size();
    g.top = top_features(mean_rows(attacked_features, clean, docs), mean_rows(clean_features, clean, docs),
                         candidates, opts);
    r.groups.push_back(std::move(g));
  }
  if (r.groups.empty()) throw DataError("attack sensitivity: empty clean corpus");
  finish(r);
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string sensitivity_csv(const SensitivityReport& report) {
  std::string out = "group,rank,feature_index,score\n";
  for (const auto& g : report.groups) {
    for (std::size_t k = 0; k < g.top.size(); ++k) {
      out += csv_field(g.group) + "," + std::to_string(k + 1) + "," + std::to_string(g.top[k].feature) + "," +
             fmt(g.top[k].score) + "\n";
    }
  }
  for (std::size_t k = 0; k < report.intersection.size(); ++k) {
    out += "intersection," + std::to_string(k + 1) + "," + std::to_string(report.intersection[k]) + ",\n";
  }
  return out;
}

std::string sensitivity_jsonl(const SensitivityReport& report) {
  std::string out;
  for (const auto& g : report.groups) {
    nlohmann::ordered_json j;
    j["group"] = g.group;
    j["n_a"] = g.n_a;
    j["n_b"] = g.n_b;
    j["top"] = nlohmann::ordered_json::array();
    for (const auto& t : g.top) j["top"].push_back({{"feature_index", t.feature}, {"score", t.score}});
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json s;
  s["summary"] = true;
  s["target"] = to_string(report.target);
  s["kind"] = report.kind;
  s["sae_id"] = report.sae_id;
  s["intersection"] = report.intersection;
  s["degraded_coverage"] = report.degraded_coverage;
  s["all_zero"] = report.all_zero;
  out += s.dump() + "\n";
  return out;
}

}  // namespace saedet
