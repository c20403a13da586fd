#include "saedet/classify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <set>

#include "saedet/csv.hpp"
#include "saedet/rng.hpp"

namespace saedet {

namespace {

void check_labels(std::span<const int> labels) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("labels must be 0 (human) or 1 (machine)");
  }
}

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double macro_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
}

std::string fmt(double v, const char* spec = "%.9g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double macro_f1(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ShapeError("macro_f1: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw DataError("macro_f1 needs at least one prediction");
  check_labels(predictions);
  check_labels(labels);
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == 1) {
      (labels[i] == 1 ? tp : fp)++;
    } else {
      (labels[i] == 1 ? fn : tn)++;
    }
  }
  return macro_from_counts(tp, fp, fn, tn);
}

std::string to_string(ThresholdDirection d) {
  return d == ThresholdDirection::geq_is_machine ? "geq_is_machine" : "leq_is_machine";
}

ThresholdDirection parse_threshold_direction(const std::string& s) {
  if (s == "geq_is_machine") return ThresholdDirection::geq_is_machine;
  if (s == "leq_is_machine") return ThresholdDirection::leq_is_machine;
  throw ParseError("unknown threshold direction '" + s + "'");
}

std::vector<double> threshold_candidates(std::span<const double> values) {
  if (values.empty()) return {};
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  std::vector<double> out;
  out.reserve(v.size() + 1);
  out.push_back(v.front() - std::max(1.0, std::abs(v.front())));
  for (std::size_t i = 1; i < v.size(); ++i) out.push_back(v[i - 1] + (v[i] - v[i - 1]) / 2.0);
  out.push_back(v.back() + std::max(1.0, std::abs(v.back())));
  return out;
}

ThresholdFit fit_threshold(std::span<const double> values, std::span<const int> labels,
                           std::size_t feature_index) {
  if (values.size() != labels.size()) {
    throw ShapeError("fit_threshold: " + std::to_string(values.size()) + " values for " +
                     std::to_string(labels.size()) + " labels");
  }
  check_labels(labels);
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("fit_threshold: non-finite feature value");
  }
  const std::size_t n = values.size();
  const std::size_t machines = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (machines == 0 || machines == n) throw DataError("fit_threshold needs both classes in the fitting set");
  const std::size_t humans = n - machines;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n);
  std::vector<std::size_t> machines_before(n + 1, 0);  // machines among sorted[0..i)
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = values[order[i]];
    machines_before[i + 1] = machines_before[i] + (labels[order[i]] == 1 ? 1 : 0);
  }

  ThresholdFit best;
  best.classifier.feature_index = feature_index;
  best.macro_f1 = -1.0;
  const auto candidates = threshold_candidates(values);
  for (ThresholdDirection dir : {ThresholdDirection::geq_is_machine, ThresholdDirection::leq_is_machine}) {
    for (double t : candidates) {
      std::size_t tp, fp;
      if (dir == ThresholdDirection::geq_is_machine) {
        const std::size_t idx = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
        tp = machines - machines_before[idx];
        fp = (n - idx) - tp;
      } else {
        const std::size_t idx = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
        tp = machines_before[idx];
        fp = idx - tp;
      }
      const double score = macro_from_counts(tp, fp, machines - tp, humans - fp);
      if (score > best.macro_f1 + kScoreTieEpsilon) {
        best.macro_f1 = score;
        best.classifier.threshold = t;
        best.classifier.direction = dir;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::string to_string(Grouping g) {
  switch (g) {
    case Grouping::domain: return "domain";
    case Grouping::model: return "model";
    case Grouping::split: return "split";
  }
  return "domain";
}

Grouping parse_grouping(const std::string& s) {
  if (s == "domain") return Grouping::domain;
  if (s == "model") return Grouping::model;
  if (s == "split") return Grouping::split;
  throw ConfigError("unknown grouping '" + s + "' (expected domain, model or split)");
}

std::vector<Subset> make_subsets(const Corpus& corpus, Grouping grouping, std::optional<Split> restrict_split) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!restrict_split || corpus[i].split == *restrict_split) pool.push_back(i);
  }
  std::vector<Subset> out;
  switch (grouping) {
    case Grouping::domain: {
      std::set<std::string> domains;
      for (auto i : pool) domains.insert(corpus[i].domain);
      for (const auto& d : domains) {
        Subset s{d, {}};
        for (auto i : pool) {
          if (corpus[i].domain == d) s.docs.push_back(i);
        }
        out.push_back(std::move(s));
      }
      break;
    }
    case Grouping::split: {
      std::set<std::string> names;
      for (Split sp : kAllSplits) names.insert(to_string(sp));
      for (const auto& name : names) {
        Subset s{name, {}};
        for (auto i : pool) {
          if (to_string(corpus[i].split) == name) s.docs.push_back(i);
        }
        out.push_back(std::move(s));
      }
      break;
    }
    case Grouping::model: {
      std::set<std::string> models;
      for (auto i : pool) {
        if (corpus[i].label == Label::machine) models.insert(corpus[i].model);
      }
      for (const auto& m : models) {
        std::set<std::string> domains;
        for (auto i : pool) {
          if (corpus[i].label == Label::machine && corpus[i].model == m) domains.insert(corpus[i].domain);
        }
        Subset s{m, {}};
        for (auto i : pool) {
          const auto& d = corpus[i];
          if ((d.label == Label::machine && d.model == m) ||
              (d.label == Label::human && domains.count(d.domain))) {
            s.docs.push_back(i);
          }
        }
        out.push_back(std::move(s));
      }
      break;
    }
  }
  return out;
}

std::vector<int> corpus_labels(const Corpus& corpus) {
  std::vector<int> out;
  out.reserve(corpus.size());
  for (const auto& d : corpus) out.push_back(d.label == Label::machine ? 1 : 0);
  return out;
}

Tensor2D gather_rows(const FeatureTable& features, const Corpus& corpus, std::span<const std::size_t> docs) {
  std::vector<std::string> missing;
  for (auto i : docs) {
    if (!features.contains(corpus[i].id)) missing.push_back(corpus[i].id);
  }
  if (!missing.empty()) {
    std::string msg = "no feature row for " + std::to_string(missing.size()) + " document(s):";
    for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) msg += " " + missing[k];
    if (missing.size() > 10) msg += " ...";
    throw DataError(msg);
  }
  const std::size_t m = features.n_features();
  Tensor2D out(docs.size(), m);
  for (std::size_t r = 0; r < docs.size(); ++r) {
    const auto src = features.row(corpus[docs[r]].id);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<SubsetScoreRow> evaluate_threshold_subsets(const Corpus& corpus, const FeatureTable& features,
                                                       const SubsetEvalOptions& opts) {
  if (!opts.in_sample && opts.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  std::vector<std::size_t> feats = opts.features;
  if (feats.empty()) {
    feats.resize(features.n_features());
    std::iota(feats.begin(), feats.end(), 0);
  }
  for (auto f : feats) {
    if (f >= features.n_features()) {
      throw ConfigError("feature index " + std::to_string(f) + " out of range for " +
                        std::to_string(features.n_features()) + " features");
    }
  }
  const auto all_labels = corpus_labels(corpus);

  std::vector<SubsetScoreRow> rows;
  for (const auto& subset : make_subsets(corpus, opts.grouping, opts.restrict_split)) {
    const Tensor2D x = gather_rows(features, corpus, subset.docs);
    const std::size_t n = subset.docs.size();
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) y[r] = all_labels[subset.docs[r]];
    const std::size_t machines = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
    const std::size_t minority = std::min(machines, n - machines);

    std::size_t k = opts.in_sample ? 0 : std::min(opts.folds, minority);
    const bool cv = k >= 2;
    std::vector<std::size_t> fold(n, 0);
    if (cv) {
      Rng rng(derive_seed(opts.seed, "folds/" + to_string(opts.grouping) + "/" + subset.id));
      for (int cls : {0, 1}) {
        std::vector<std::size_t> idx;
        for (std::size_t r = 0; r < n; ++r) {
          if (y[r] == cls) idx.push_back(r);
        }
        rng.shuffle(idx);
        for (std::size_t p = 0; p < idx.size(); ++p) fold[idx[p]] = p % k;
      }
    }

    for (auto f : feats) {
      SubsetScoreRow row;
      row.feature_index = f;
      row.grouping = opts.grouping;
      row.subset = subset.id;
      row.n_docs = n;
      if (minority == 0) {
        rows.push_back(std::move(row));
        continue;
      }
      std::vector<double> v(n);
      for (std::size_t r = 0; r < n; ++r) v[r] = x(r, f);
      const auto full = fit_threshold(v, y, f);
      row.threshold = full.classifier.threshold;
      row.direction = full.classifier.direction;
      row.cross_validated = cv;
      if (!cv) {
        row.macro_f1 = full.macro_f1;
      } else {
        std::vector<int> pred(n, 0);
        for (std::size_t fo = 0; fo < k; ++fo) {
          std::vector<double> tv;
          std::vector<int> ty;
          for (std::size_t r = 0; r < n; ++r) {
            if (fold[r] != fo) {
              tv.push_back(v[r]);
              ty.push_back(y[r]);
            }
          }
          const auto fit = fit_threshold(tv, ty, f);
          for (std::size_t r = 0; r < n; ++r) {
            if (fold[r] == fo) pred[r] = fit.classifier.predict(v[r]);
          }
        }
        row.macro_f1 = macro_f1(pred, y);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string subset_scores_csv(const std::vector<SubsetScoreRow>& rows) {
  std::string out = "feature_index,grouping,subset,macro_f1,threshold,direction,n_docs,cross_validated\n";
  for (const auto& r : rows) {
    out += std::to_string(r.feature_index) + "," + to_string(r.grouping) + "," + csv_field(r.subset) + "," +
           (r.macro_f1 ? fmt(*r.macro_f1) : std::string()) + "," + fmt(r.threshold) + "," +
           to_string(r.direction) + "," + std::to_string(r.n_docs) + "," + (r.cross_validated ? "1" : "0") + "\n";
  }
  return out;
}

std::string subset_scores_jsonl(const std::vector<SubsetScoreRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["feature_index"] = r.feature_index;
    j["grouping"] = to_string(r.grouping);
    j["subset"] = r.subset;
    j["macro_f1"] = r.macro_f1 ? nlohmann::ordered_json(*r.macro_f1) : nlohmann::ordered_json(nullptr);
    j["threshold"] = r.threshold;
    j["direction"] = to_string(r.direction);
    j["n_docs"] = r.n_docs;
    j["cross_validated"] = r.cross_validated;
    out += j.dump() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// GBDT

void GbdtParams::validate() const {
  if (max_depth == 0) throw ConfigError("max_depth must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(min_child_weight >= 0.0)) throw ConfigError("min_child_weight must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
}

double GbdtTree::leaf_value(std::span<const float> x) const {
  std::size_t k = 0;
  while (!nodes[k].leaf) {
    const auto& n = nodes[k];
    k = static_cast<double>(x[n.feature]) < n.threshold ? n.left : n.right;
  }
  return nodes[k].value;
}

GbdtModel::GbdtModel(std::vector<GbdtTree> trees, double learning_rate, double base_score, std::size_t n_features)
    : trees_(std::move(trees)), learning_rate_(learning_rate), base_score_(base_score), n_features_(n_features) {
  for (const auto& t : trees_) {
    if (t.nodes.empty()) throw ValidationError("gbdt tree without nodes");
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
      const auto& n = t.nodes[k];
      if (n.leaf) continue;
      if (n.feature >= n_features_) {
        throw ValidationError("gbdt split on feature " + std::to_string(n.feature) + " but model has " +
                              std::to_string(n_features_) + " features");
      }
      if (n.left <= k || n.right <= k || n.left >= t.nodes.size() || n.right >= t.nodes.size()) {
        throw ValidationError("gbdt node " + std::to_string(k) + " has invalid children");
      }
    }
  }
}

double GbdtModel::margin(std::span<const float> x) const {
  if (x.size() != n_features_) {
    throw ShapeError("gbdt expects " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
  }
  double m = base_score_;
  for (const auto& t : trees_) m += learning_rate_ * t.leaf_value(x);
  return m;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(double m, int y) {
  const double softplus = m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  return softplus - (y == 1 ? m : 0.0);
}

}  // namespace

double GbdtModel::predict_proba(std::span<const float> x) const { return sigmoid(margin(x)); }

std::vector<double> predict_proba(const GbdtModel& model, const Tensor2D& x) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict_proba(x.row(r));
  return out;
}

GbdtFit fit_gbdt(const Tensor2D& x, std::span<const int> labels, const GbdtParams& params) {
  params.validate();
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  if (labels.size() != n) {
    throw ShapeError("fit_gbdt: " + std::to_string(n) + " rows for " + std::to_string(labels.size()) + " labels");
  }
  check_labels(labels);
  if (n < 2) throw DataError("fit_gbdt needs at least 2 samples");
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  if (pos == 0 || pos == n) throw DataError("fit_gbdt needs both classes");
  if (m == 0) throw DataError("fit_gbdt needs at least one feature");

  std::vector<std::vector<std::uint32_t>> order(m, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < m; ++f) {
    auto& o = order[f];
    std::iota(o.begin(), o.end(), 0u);
    std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }

  const double rate = static_cast<double>(pos) / static_cast<double>(n);
  const double base = std::log(rate / (1.0 - rate));
  std::vector<double> margins(n, base);
  std::vector<double> g(n), h(n);
  std::vector<std::size_t> node_of(n);
  std::vector<GbdtTree> trees;
  std::vector<double> history;
  const double lambda = params.lambda;

  struct Stats {
    double g = 0.0;
    double h = 0.0;
  };
  struct Candidate {
    double gain = 0.0;
    std::size_t feature = 0;
    double threshold = 0.0;
    bool valid = false;
  };

  for (std::size_t round = 0; round < params.rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margins[i]);
      g[i] = p - labels[i];
      h[i] = p * (1.0 - p);
    }
    GbdtTree tree;
    tree.nodes.emplace_back();
    std::vector<Stats> stats(1);
    for (std::size_t i = 0; i < n; ++i) {
      node_of[i] = 0;
      stats[0].g += g[i];
      stats[0].h += h[i];
    }
    std::vector<std::size_t> active = {0};

    for (std::size_t depth = 0; depth < params.max_depth && !active.empty(); ++depth) {
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < active.size(); ++s) slot[active[s]] = static_cast<int>(s);
      std::vector<Candidate> best(active.size());
      std::vector<Stats> run(active.size());
      std::vector<double> last(active.size());
      std::vector<char> seen(active.size());

      for (std::size_t f = 0; f < m; ++f) {
        std::fill(run.begin(), run.end(), Stats{});
        std::fill(seen.begin(), seen.end(), 0);
        for (std::uint32_t i : order[f]) {
          const int s = slot[node_of[i]];
          if (s < 0) continue;
          const double v = x(i, f);
          if (seen[s] && v > last[s]) {
            const Stats& tot = stats[active[s]];
            const double gl = run[s].g, hl = run[s].h;
            const double gr = tot.g - gl, hr = tot.h - hl;
            if (hl >= params.min_child_weight && hr >= params.min_child_weight) {
              const double gain =
                  0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - tot.g * tot.g / (tot.h + lambda));
              if (gain > best[s].gain) best[s] = {gain, f, last[s] + (v - last[s]) / 2.0, true};
            }
          }
          run[s].g += g[i];
          run[s].h += h[i];
          last[s] = v;
          seen[s] = 1;
        }
      }

      std::vector<std::size_t> next;
      for (std::size_t s = 0; s < active.size(); ++s) {
        if (!best[s].valid) continue;
        const std::size_t k = active[s];
        const std::size_t left = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stats.resize(tree.nodes.size());
        auto& node = tree.nodes[k];
        node.leaf = false;
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = left;
        node.right = left + 1;
        node.gain = best[s].gain;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& node = tree.nodes[node_of[i]];
        if (node.leaf) continue;
        node_of[i] = static_cast<double>(x(i, node.feature)) < node.threshold ? node.left : node.right;
        stats[node_of[i]].g += g[i];
        stats[node_of[i]].h += h[i];
      }
      active = std::move(next);
    }

    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      if (tree.nodes[k].leaf) tree.nodes[k].value = -stats[k].g / (stats[k].h + lambda);
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      margins[i] += params.learning_rate * tree.nodes[node_of[i]].value;
      loss += logistic_loss(margins[i], labels[i]);
    }
    history.push_back(loss / static_cast<double>(n));
    trees.push_back(std::move(tree));
  }

  GbdtFit out{GbdtModel(std::move(trees), params.learning_rate, base, m), std::move(history), std::move(margins)};
  return out;
}

std::vector<FeatureImportance> feature_importance(const GbdtModel& model, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw ConfigError("top_fraction must be in (0, 1]");
  const std::size_t m = model.n_features();
  std::vector<FeatureImportance> imp(m);
  for (std::size_t f = 0; f < m; ++f) imp[f].feature = f;
  for (const auto& t : model.trees()) {
    for (const auto& node : t.nodes) {
      if (!node.leaf) imp[node.feature].gain += node.gain;
    }
  }
  std::stable_sort(imp.begin(), imp.end(),
                   [](const FeatureImportance& a, const FeatureImportance& b) { return a.gain > b.gain; });
  const auto keep = static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(m) - 1e-9));
  imp.resize(std::min(m, std::max<std::size_t>(keep, m == 0 ? 0 : 1)));
  return imp;
}

std::string serialize_gbdt(const GbdtModel& model) {
  std::string out = "saedet-gbdt 1\n";
  out += "learning_rate " + fmt(model.learning_rate(), "%.17g") + "\n";
  out += "base_score " + fmt(model.base_score(), "%.17g") + "\n";
  out += "n_features " + std::to_string(model.n_features()) + "\n";
  out += "n_trees " + std::to_string(model.trees().size()) + "\n";
  out += "tree_id,node_id,kind,feature,threshold,left,right,value,gain\n";
  for (std::size_t t = 0; t < model.trees().size(); ++t) {
    const auto& nodes = model.trees()[t].nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const auto& nd = nodes[k];
      out += std::to_string(t) + "," + std::to_string(k) + ",";
      if (nd.leaf) {
        out += "leaf,,,,," + fmt(nd.value, "%.17g") + ",0\n";
      } else {
        out += "split," + std::to_string(nd.feature) + "," + fmt(nd.threshold, "%.17g") + "," +
               std::to_string(nd.left) + "," + std::to_string(nd.right) + ",," + fmt(nd.gain, "%.17g") + "\n";
      }
    }
  }
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t c = line.find(sep, pos);
    if (c == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, c - pos));
    pos = c + 1;
  }
}

double parse_double(std::string_view s, const std::string& where) {
  const std::string str(s);
  char* end = nullptr;
  const double v = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size() || !std::isfinite(v)) {
    throw ParseError(where + ": invalid number '" + str + "'");
  }
  return v;
}

std::size_t parse_index(std::string_view s, const std::string& where) {
  const std::string str(s);
  if (str.empty() || !std::all_of(str.begin(), str.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    throw ParseError(where + ": invalid integer '" + str + "'");
  }
  return static_cast<std::size_t>(std::stoull(str));
}

}  // namespace

GbdtModel parse_gbdt(std::string_view text, const std::string& context) {
  std::vector<std::string_view> lines;
  for (auto l : split_fields(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  auto where = [&](std::size_t i) { return context + ":" + std::to_string(i + 1); };
  if (lines.size() < 6 || lines[0] != "saedet-gbdt 1") throw ParseError(context + ": not a saedet-gbdt v1 model");
  auto header = [&](std::size_t i, std::string_view key) {
    const auto f = split_fields(lines[i], ' ');
    if (f.size() != 2 || f[0] != key) throw ParseError(where(i) + ": expected '" + std::string(key) + " <value>'");
    return f[1];
  };
  const double lr = parse_double(header(1, "learning_rate"), where(1));
  const double base = parse_double(header(2, "base_score"), where(2));
  const std::size_t m = parse_index(header(3, "n_features"), where(3));
  const std::size_t n_trees = parse_index(header(4, "n_trees"), where(4));
  if (lines[5] != "tree_id,node_id,kind,feature,threshold,left,right,value,gain") {
    throw ParseError(where(5) + ": unexpected column header");
  }
  std::vector<GbdtTree> trees;
  for (std::size_t i = 6; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i], ',');
    if (f.size() != 9) throw ParseError(where(i) + ": expected 9 fields");
    const std::size_t t = parse_index(f[0], where(i));
    const std::size_t k = parse_index(f[1], where(i));
    if (t == trees.size()) trees.emplace_back();
    if (t + 1 != trees.size() || k != trees.back().nodes.size()) {
      throw ParseError(where(i) + ": nodes must be listed in tree and node order");
    }
    GbdtNode node;
    if (f[2] == "leaf") {
      node.leaf = true;
      node.value = parse_double(f[7], where(i));
    } else if (f[2] == "split") {
      node.leaf = false;
      node.feature = parse_index(f[3], where(i));
      node.threshold = parse_double(f[4], where(i));
      node.left = parse_index(f[5], where(i));
      node.right = parse_index(f[6], where(i));
      node.gain = parse_double(f[8], where(i));
    } else {
      throw ParseError(where(i) + ": unknown node kind '" + std::string(f[2]) + "'");
    }
    trees.back().nodes.push_back(node);
  }
  if (trees.size() != n_trees) {
    throw ParseError(context + ": header declares " + std::to_string(n_trees) + " trees, found " +
                     std::to_string(trees.size()));
  }
  try {
    return GbdtModel(std::move(trees), lr, base, m);
  } catch (const ValidationError& e) {
    throw ParseError(context + ": " + e.what());
  }
}

void save_gbdt(const GbdtModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_gbdt(model));
}

GbdtModel load_gbdt(const std::filesystem::path& path) { return parse_gbdt(read_file_text(path), path.string()); }

double tune_probability_cut(std::span<const double> proba, std::span<const int> labels) {
  if (proba.size() != labels.size()) throw ShapeError("tune_probability_cut: length mismatch");
  if (proba.empty()) throw DataError("tune_probability_cut needs data");
  std::vector<double> cands = {0.5};
  std::vector<double> v(proba.begin(), proba.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  for (std::size_t i = 1; i < v.size(); ++i) cands.push_back(v[i - 1] + (v[i] - v[i - 1]) / 2.0);
  double best_cut = 0.5;
  double best = -1.0;
  std::vector<int> pred(proba.size());
  for (double c : cands) {
    if (!(c > 0.0 && c < 1.0)) continue;
    for (std::size_t i = 0; i < proba.size(); ++i) pred[i] = proba[i] >= c ? 1 : 0;
    const double s = macro_f1(pred, labels);
    if (s > best + kScoreTieEpsilon ||
        (std::abs(s - best) <= kScoreTieEpsilon && std::abs(c - 0.5) < std::abs(best_cut - 0.5))) {
      best = s;
      best_cut = c;
    }
  }
  return best_cut;
}

std::vector<ModelSubsetRow> evaluate_model_subsets(const GbdtModel& model, const Corpus& corpus,
                                                   const FeatureTable& features, Grouping grouping,
                                                   std::optional<Split> restrict_split, double cut) {
  const auto labels = corpus_labels(corpus);
  std::vector<ModelSubsetRow> rows;
  for (const auto& s : make_subsets(corpus, grouping, restrict_split)) {
    ModelSubsetRow row{grouping, s.id, s.docs.size(), std::nullopt};
    if (!s.docs.empty()) {
      const Tensor2D x = gather_rows(features, corpus, s.docs);
      std::vector<int> pred(s.docs.size()), y(s.docs.size());
      for (std::size_t r = 0; r < s.docs.size(); ++r) {
        pred[r] = model.predict(x.row(r), cut);
        y[r] = labels[s.docs[r]];
      }
      row.macro_f1 = macro_f1(pred, y);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace saedet
