#include "saedet/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "saedet/anomaly.hpp"
#include "saedet/attacks.hpp"
#include "saedet/classify.hpp"
#include "saedet/corpus.hpp"
#include "saedet/csv.hpp"
#include "saedet/sae.hpp"
#include "saedet/sae_train.hpp"
#include "saedet/sensitivity.hpp"

namespace saedet::cli {

namespace fs = std::filesystem;

fs::path activation_path(const fs::path& dir, const std::string& doc_id, int layer) {
  if (doc_id.empty() || doc_id == "." || doc_id == ".." ||
      doc_id.find_first_of(std::string("/\\\0", 3)) != std::string::npos) {
    throw DataError("document id '" + doc_id + "' cannot be used as a file name");
  }
  return dir / (doc_id + ".L" + std::to_string(layer) + ".saet");
}

namespace {

// ---------------------------------------------------------------------------
// Shared helpers

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError(what + " not found: " + p.string());
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) throw IoError(what + " directory not found: " + p.string());
}

void write_twin(const fs::path& dir, const std::string& stem, const std::string& csv, const std::string& jsonl) {
  write_file_atomic(dir / (stem + ".csv"), csv);
  write_file_atomic(dir / (stem + ".jsonl"), jsonl);
}

std::vector<fs::path> list_tensors(const fs::path& dir) {
  require_dir(dir, "activation");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".saet") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> expand_inputs(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    if (fs::is_directory(p)) {
      const auto files = list_tensors(p);
      out.insert(out.end(), files.begin(), files.end());
    } else {
      require_file(p, "activation file");
      out.push_back(p);
    }
  }
  return out;
}

std::string jsonl_line(const nlohmann::ordered_json& j) { return j.dump() + "\n"; }

std::optional<Split> split_option(const std::string& s) {
  if (s.empty() || s == "all") return std::nullopt;
  return parse_split(s);
}

Corpus load_nonempty_corpus(const fs::path& path) {
  require_file(path, "corpus");
  Corpus c = load_corpus(path);
  if (c.empty()) throw DataError("corpus " + path.string() + " is empty");
  return c;
}

FeatureTable load_features(const fs::path& path) {
  require_file(path, "feature matrix");
  return read_feature_table(path);
}

std::size_t top_count(double fraction, std::size_t m) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("top fraction must be in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m) - 1e-9));
  return std::clamp<std::size_t>(k, 1, m);
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
  fs::path out;
  std::vector<std::string> profiles{"human=human", "gpt=gpt-like"};
  fs::path profile_file;
  std::vector<std::string> domains{"news", "wiki", "reddit"};
  std::size_t docs_per_cell = 50;
  std::vector<std::string> docs_per_model;
  std::uint64_t seed = 0;
  std::size_t d = 32;
  double noise = 0.05;
  double length_coupling = 0.0;
  int layer = 0;
  std::string model_name = "toy";
  bool no_activations = false;
  std::size_t sae_features = 64;
  double sae_bias = -0.5;
};

std::pair<std::string, std::string> split_assignment(const std::string& s, const std::string& what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw ConfigError(what + " must look like tag=value, got '" + s + "'");
  }
  return {s.substr(0, eq), s.substr(eq + 1)};
}

void cmd_gen(const GenOpts& o, std::ostream& out) {
  GenerationSpec spec;
  if (!o.profile_file.empty()) {
    require_file(o.profile_file, "profile file");
    const auto j = read_json_file(o.profile_file);
    if (!j.is_object()) throw ConfigError(o.profile_file.string() + ": expected an object of tag -> profile");
    for (auto it = j.begin(); it != j.end(); ++it) spec.profiles[it.key()] = profile_from_json(*it);
  } else {
    for (const auto& p : o.profiles) {
      const auto [tag, preset] = split_assignment(p, "--profiles entry");
      spec.profiles[tag] = SyntheticStyleProfile::preset(preset);
    }
  }
  spec.domains = o.domains;
  spec.docs_per_cell = o.docs_per_cell;
  for (const auto& e : o.docs_per_model) {
    const auto [tag, n] = split_assignment(e, "--docs-per-model entry");
    try {
      spec.docs_per_cell_by_model[tag] = std::stoul(n);
    } catch (const std::exception&) {
      throw ConfigError("--docs-per-model count for '" + tag + "' is not a number");
    }
  }
  spec.seed = o.seed;
  const auto generated = generate_corpus(spec);

  save_corpus(generated.corpus, o.out / "corpus.jsonl");
  save_markers(generated.markers, o.out / "markers.jsonl");

  nlohmann::ordered_json manifest;
  manifest["seed"] = o.seed;
  manifest["domains"] = o.domains;
  manifest["profiles"] = nlohmann::ordered_json::object();
  for (const auto& [tag, p] : spec.profiles) {
    manifest["profiles"][tag] = to_json(p);
    manifest["profiles"][tag]["docs_per_cell"] = spec.cell_count(tag);
  }

  if (!o.no_activations) {
    auto toy = ToyActivationSpec::standard(o.d, o.noise, o.seed);
    toy.length_coupling = o.length_coupling;
    const fs::path dir = o.out / "activations";
    for (std::size_t i = 0; i < generated.corpus.size(); ++i) {
      const auto& doc = generated.corpus[i];
      const Tensor2D acts = synthesize_activations(doc, generated.markers[i], toy);
      const auto path = activation_path(dir, doc.id, o.layer);
      write_tensor(acts, path);
      TensorMeta meta{o.layer, o.model_name, o.d, {{"doc_id", doc.id}, {"n_tokens", acts.rows()}}};
      write_tensor_meta(meta, path);
    }
    manifest["activations"] = {{"d", o.d},
                               {"noise_sigma", o.noise},
                               {"length_coupling", o.length_coupling},
                               {"layer", o.layer},
                               {"model", o.model_name}};
    if (o.sae_features > 0) {
      const auto sae = make_identity_like_sae(o.d, o.sae_features, o.seed, static_cast<float>(o.sae_bias));
      save_sae(sae, o.out / "sae", {o.layer, o.model_name});
      manifest["sae"] = {{"n_features", o.sae_features}, {"encoder_bias", o.sae_bias}};
    }
  }
  write_file_atomic(o.out / "gen_manifest.json", manifest.dump(2) + "\n");
  out << "wrote " << generated.corpus.size() << " documents to " << o.out.string() << "\n";
}

// ---------------------------------------------------------------------------
// train-sae

struct TrainSaeOpts {
  fs::path out;
  fs::path acts;
  int layer = -1;
  bool planted = false;
  std::size_t d = 32;
  std::size_t m_true = 36;
  std::size_t k = 3;
  std::size_t samples = 4096;
  std::size_t features = 128;
  double l1 = 0.03;
  double lr = 0.03;
  std::size_t steps = 20000;
  std::size_t batch = 64;
  double momentum = 0.9;
  bool no_renormalize = false;
  std::uint64_t seed = 0;
  std::string model_name;
};

Tensor2D stack_rows(const std::vector<fs::path>& files) {
  std::vector<float> data;
  std::size_t cols = 0;
  std::size_t rows = 0;
  for (const auto& f : files) {
    const Tensor2D t = read_tensor(f);
    if (rows == 0) cols = t.cols();
    if (t.cols() != cols) {
      throw ShapeError(f.string() + " has width " + std::to_string(t.cols()) + ", expected " + std::to_string(cols));
    }
    data.insert(data.end(), t.data().begin(), t.data().end());
    rows += t.rows();
  }
  if (rows == 0) throw DataError("no activation rows to train on");
  return Tensor2D(rows, cols, std::move(data));
}

void cmd_train_sae(const TrainSaeOpts& o, std::ostream& out) {
  if (o.planted == !o.acts.empty()) throw ConfigError("train-sae needs exactly one of --acts or --planted");
  TrainConfig cfg;
  cfg.l1_weight = o.l1;
  cfg.learning_rate = o.lr;
  cfg.steps = o.steps;
  cfg.batch_size = o.batch;
  cfg.momentum = o.momentum;
  cfg.renormalize_decoder = !o.no_renormalize;
  cfg.seed = o.seed;
  cfg.validate();

  std::optional<PlantedDictionary> dict;
  Tensor2D data;
  if (o.planted) {
    dict = PlantedDictionary::random(o.d, o.m_true, o.k, o.seed);
    data = generate_planted_data(*dict, o.samples).samples;
  } else {
    auto files = list_tensors(o.acts);
    if (o.layer >= 0) {
      const std::string suffix = ".L" + std::to_string(o.layer) + ".saet";
      std::erase_if(files, [&](const fs::path& p) {
        const auto name = p.filename().string();
        return name.size() < suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0;
      });
    }
    data = stack_rows(files);
  }

  const auto result = train_sae(data, o.features, cfg);
  save_sae(result.model, o.out, {std::max(o.layer, 0), o.model_name.empty() ? (o.planted ? "planted" : "trained") : o.model_name});

  std::string hist = "step,loss\n";
  for (std::size_t s = 0; s < result.loss_history.size(); ++s) {
    hist += std::to_string(s) + "," + format_number(result.loss_history[s]) + "\n";
  }
  write_file_atomic(o.out / "loss_history.csv", hist);

  const auto stats = reconstruction_stats(result.model, data);
  nlohmann::ordered_json summary;
  summary["n_samples"] = data.rows();
  summary["d_model"] = data.cols();
  summary["n_features"] = o.features;
  summary["mse"] = stats.mse;
  summary["mean_sq_norm"] = stats.mean_sq_norm;
  summary["relative_mse"] = stats.relative();
  if (dict) {
    const auto rec = match_dictionary(result.model, *dict);
    write_recovery_csv(rec, o.out / "recovery.csv");
    summary["m_true"] = o.m_true;
    summary["recovered"] = rec.recovered;
    summary["mean_cosine"] = rec.mean_cosine;
    out << "recovered " << rec.recovered << "/" << o.m_true << " planted directions, ";
  }
  write_file_atomic(o.out / "train_summary.json", summary.dump(2) + "\n");
  out << "relative reconstruction error " << format_number(stats.relative()) << "\n";
}

// ---------------------------------------------------------------------------
// encode-pool

struct EncodeOpts {
  fs::path corpus;
  fs::path acts;
  int layer = 0;
  fs::path sae;
  std::string pooling = "sum";
  bool raw = false;
  fs::path out;
  std::uint64_t seed = 0;
};

void cmd_encode_pool(const EncodeOpts& o, std::ostream& out) {
  const PoolingMode mode = parse_pooling(o.pooling);
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  require_dir(o.acts, "activation");
  std::optional<SaeModel> sae;
  SaeMeta sae_meta;
  if (!o.raw) {
    if (o.sae.empty()) throw ConfigError("encode-pool needs --sae unless --raw is given");
    require_dir(o.sae, "SAE");
    sae = load_sae(o.sae, &sae_meta);
  }

  std::vector<std::string> missing;
  for (const auto& doc : corpus) {
    if (!fs::is_regular_file(activation_path(o.acts, doc.id, o.layer))) missing.push_back(doc.id);
  }
  if (!missing.empty()) {
    std::string msg = "missing activation files for " + std::to_string(missing.size()) + " document(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 20); ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw DataError(msg);
  }

  std::vector<DocFeatureVector> pooled;
  pooled.reserve(corpus.size());
  std::size_t d_model = 0;
  for (const auto& doc : corpus) {
    const Tensor2D acts = read_tensor(activation_path(o.acts, doc.id, o.layer));
    d_model = acts.cols();
    if (sae) {
      pooled.push_back(pool_document(encode(*sae, acts), doc.id, mode));
    } else {
      pooled.push_back({doc.id, pool_rows(acts, mode)});
    }
  }
  const FeatureTable table = make_feature_table(pooled);
  write_feature_table(table, o.out);
  TensorMeta meta{o.layer, sae ? sae_meta.model_name : std::string("raw"), d_model,
                  {{"pooling", o.pooling}, {"raw", o.raw}, {"n_docs", table.n_docs()},
                   {"n_features", table.n_features()}}};
  write_tensor_meta(meta, o.out);
  out << "pooled " << table.n_docs() << " documents into " << table.n_features() << " features\n";
}

// ---------------------------------------------------------------------------
// train-eval

struct TrainEvalOpts {
  fs::path corpus;
  fs::path features;
  std::string mode = "gbdt";
  fs::path out;
  std::size_t rounds = 100;
  std::size_t max_depth = 6;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double lambda = 1.0;
  bool tune_cut = false;
  double top_fraction = 0.1;
  std::vector<std::string> groupings{"domain", "model"};
  std::uint64_t seed = 0;
};

std::vector<std::size_t> docs_in_split(const Corpus& corpus, Split s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].split == s) out.push_back(i);
  }
  return out;
}

std::vector<int> labels_of(const Corpus& corpus, const std::vector<std::size_t>& docs) {
  std::vector<int> y;
  y.reserve(docs.size());
  for (auto i : docs) y.push_back(corpus[i].label == Label::machine ? 1 : 0);
  return y;
}

std::vector<Grouping> parse_groupings(const std::vector<std::string>& names, bool allow_split) {
  std::vector<Grouping> out;
  for (const auto& n : names) {
    const Grouping g = parse_grouping(n);
    if (g == Grouping::split && !allow_split) throw ConfigError("grouping 'split' is not available here");
    out.push_back(g);
  }
  return out;
}

void train_eval_gbdt(const TrainEvalOpts& o, const Corpus& corpus, const FeatureTable& table,
                     const std::vector<std::size_t>& train, std::ostream& out) {
  GbdtParams params;
  params.rounds = o.rounds;
  params.max_depth = o.max_depth;
  params.learning_rate = o.learning_rate;
  params.min_child_weight = o.min_child_weight;
  params.lambda = o.lambda;
  const auto fit = fit_gbdt(gather_rows(table, corpus, train), labels_of(corpus, train), params);
  const auto& model = fit.model;

  double cut = 0.5;
  if (o.tune_cut) {
    const auto dev = docs_in_split(corpus, Split::dev);
    if (dev.empty()) throw DataError("--tune-cut needs documents in the 'dev' split");
    cut = tune_probability_cut(predict_proba(model, gather_rows(table, corpus, dev)), labels_of(corpus, dev));
  }

  std::string csv = "split,n_docs,macro_f1\n";
  std::string jsonl;
  double dev_f1 = -1.0;
  for (Split s : kAllSplits) {
    const auto docs = docs_in_split(corpus, s);
    std::optional<double> f1;
    if (!docs.empty()) {
      const auto x = gather_rows(table, corpus, docs);
      std::vector<int> pred(docs.size());
      for (std::size_t r = 0; r < docs.size(); ++r) pred[r] = model.predict(x.row(r), cut);
      f1 = macro_f1(pred, labels_of(corpus, docs));
      if (s == Split::dev) dev_f1 = *f1;
    }
    csv += to_string(s) + "," + std::to_string(docs.size()) + "," + (f1 ? format_number(*f1) : "") + "\n";
    jsonl += jsonl_line({{"split", to_string(s)},
                         {"n_docs", docs.size()},
                         {"macro_f1", f1 ? nlohmann::ordered_json(*f1) : nlohmann::ordered_json(nullptr)}});
  }
  write_twin(o.out, "scores_by_split", csv, jsonl);

  csv = "split,grouping,subset,n_docs,macro_f1\n";
  jsonl.clear();
  for (Grouping g : parse_groupings(o.groupings, true)) {
    for (Split s : kAllSplits) {
      for (const auto& row : evaluate_model_subsets(model, corpus, table, g, s, cut)) {
        csv += to_string(s) + "," + to_string(g) + "," + csv_field(row.subset) + "," + std::to_string(row.n_docs) +
               "," + (row.macro_f1 ? format_number(*row.macro_f1) : "") + "\n";
        jsonl += jsonl_line({{"split", to_string(s)},
                             {"grouping", to_string(g)},
                             {"subset", row.subset},
                             {"n_docs", row.n_docs},
                             {"macro_f1", row.macro_f1 ? nlohmann::ordered_json(*row.macro_f1)
                                                       : nlohmann::ordered_json(nullptr)}});
      }
    }
  }
  write_twin(o.out, "subset_scores", csv, jsonl);

  csv = "rank,feature_index,gain\n";
  jsonl.clear();
  const auto imp = feature_importance(model, o.top_fraction);
  for (std::size_t r = 0; r < imp.size(); ++r) {
    csv += std::to_string(r + 1) + "," + std::to_string(imp[r].feature) + "," + format_number(imp[r].gain) + "\n";
    jsonl += jsonl_line({{"rank", r + 1}, {"feature_index", imp[r].feature}, {"gain", imp[r].gain}});
  }
  write_twin(o.out, "importance", csv, jsonl);

  csv = "round,loss\n";
  for (std::size_t r = 0; r < fit.loss_history.size(); ++r) {
    csv += std::to_string(r + 1) + "," + format_number(fit.loss_history[r]) + "\n";
  }
  write_file_atomic(o.out / "loss_history.csv", csv);
  save_gbdt(model, o.out / "model.gbdt");
  write_file_atomic(o.out / "cut.txt", format_number(cut) + "\n");

  out << "trained " << model.trees().size() << " trees on " << train.size() << " documents";
  if (dev_f1 >= 0.0) out << ", dev macro F1 " << format_number(dev_f1);
  out << "\n";
}

void train_eval_thresholds(const TrainEvalOpts& o, const Corpus& corpus, const FeatureTable& table,
                           std::ostream& out) {
  std::string csv = "feature_index,grouping,subset,split,n_docs,macro_f1,threshold,direction\n";
  std::string jsonl;
  std::size_t rows = 0;
  const auto labels = corpus_labels(corpus);
  for (Grouping g : parse_groupings(o.groupings, false)) {
    for (const auto& subset : make_subsets(corpus, g)) {
      std::map<Split, std::vector<std::size_t>> by_split;
      for (auto i : subset.docs) by_split[corpus[i].split].push_back(i);
      const auto& train = by_split[Split::train];
      const Tensor2D xt = gather_rows(table, corpus, train);
      const auto yt = labels_of(corpus, train);
      const bool fittable = std::count(yt.begin(), yt.end(), 1) > 0 && std::count(yt.begin(), yt.end(), 0) > 0;
      for (std::size_t f = 0; f < table.n_features(); ++f) {
        std::optional<ThresholdFit> fit;
        if (fittable) {
          std::vector<double> v(train.size());
          for (std::size_t r = 0; r < train.size(); ++r) v[r] = xt(r, f);
          fit = fit_threshold(v, yt, f);
        }
        for (Split s : kAllSplits) {
          const auto& docs = by_split[s];
          std::optional<double> score;
          if (fit && !docs.empty()) {
            std::vector<int> pred(docs.size()), y(docs.size());
            for (std::size_t r = 0; r < docs.size(); ++r) {
              pred[r] = fit->classifier.predict(table.row(corpus[docs[r]].id)[f]);
              y[r] = labels[docs[r]];
            }
            score = macro_f1(pred, y);
          }
          const double thr = fit ? fit->classifier.threshold : 0.0;
          const auto dir = fit ? fit->classifier.direction : ThresholdDirection::geq_is_machine;
          csv += std::to_string(f) + "," + to_string(g) + "," + csv_field(subset.id) + "," + to_string(s) + "," +
                 std::to_string(docs.size()) + "," + (score ? format_number(*score) : "") + "," +
                 format_number(thr) + "," + to_string(dir) + "\n";
          jsonl += jsonl_line({{"feature_index", f},
                               {"grouping", to_string(g)},
                               {"subset", subset.id},
                               {"split", to_string(s)},
                               {"n_docs", docs.size()},
                               {"macro_f1", score ? nlohmann::ordered_json(*score) : nlohmann::ordered_json(nullptr)},
                               {"threshold", thr},
                               {"direction", to_string(dir)}});
          ++rows;
        }
      }
    }
  }
  write_twin(o.out, "threshold_scores", csv, jsonl);
  out << "wrote " << rows << " threshold rows\n";
}

void cmd_train_eval(const TrainEvalOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const FeatureTable table = load_features(o.features);
  const auto train = docs_in_split(corpus, Split::train);
  if (train.empty()) throw DataError("corpus has no documents in the 'train' split");
  if (o.mode == "gbdt") {
    train_eval_gbdt(o, corpus, table, train, out);
  } else if (o.mode == "thresholds") {
    train_eval_thresholds(o, corpus, table, out);
  } else {
    throw ConfigError("unknown train-eval mode '" + o.mode + "' (expected gbdt or thresholds)");
  }
}

// ---------------------------------------------------------------------------
// sweep-thresholds / report

struct SweepOpts {
  fs::path corpus;
  fs::path features;
  fs::path out;
  std::string grouping = "model";
  std::size_t folds = 5;
  bool in_sample = false;
  std::string split = "all";
  std::vector<std::size_t> feature_list;
  std::uint64_t seed = 0;
};

void cmd_sweep(const SweepOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const FeatureTable table = load_features(o.features);
  SubsetEvalOptions opts;
  opts.grouping = parse_grouping(o.grouping);
  opts.folds = o.folds;
  opts.in_sample = o.in_sample;
  opts.features = o.feature_list;
  opts.restrict_split = split_option(o.split);
  opts.seed = o.seed;
  const auto rows = evaluate_threshold_subsets(corpus, table, opts);
  write_twin(o.out, "subset_scores", subset_scores_csv(rows), subset_scores_jsonl(rows));
  out << "wrote " << rows.size() << " subset rows\n";
}

struct ReportOpts {
  fs::path scores;
  fs::path out;
  std::size_t top = 0;
  std::uint64_t seed = 0;
};

void cmd_report(const ReportOpts& o, std::ostream& out) {
  require_file(o.scores, "score table");
  const auto rows = parse_csv(read_file_text(o.scores), o.scores.string());
  if (rows.empty()) throw DataError(o.scores.string() + ": empty score table");
  const auto& header = rows[0];
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(o.scores.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_feat = col("feature_index");
  const std::size_t c_subset = col("subset");
  const std::size_t c_f1 = col("macro_f1");

  std::set<std::string> subsets;
  std::map<std::size_t, std::map<std::string, std::optional<double>>> grid;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw ParseError(o.scores.string() + ":" + std::to_string(r + 1) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    std::size_t f = 0;
    try {
      f = std::stoul(row[c_feat]);
    } catch (const std::exception&) {
      throw ParseError(o.scores.string() + ":" + std::to_string(r + 1) + ": bad feature_index");
    }
    std::optional<double> v;
    if (!row[c_f1].empty()) {
      try {
        v = std::stod(row[c_f1]);
      } catch (const std::exception&) {
        throw ParseError(o.scores.string() + ":" + std::to_string(r + 1) + ": bad macro_f1");
      }
    }
    subsets.insert(row[c_subset]);
    grid[f][row[c_subset]] = v;
  }

  struct Line {
    std::size_t feature;
    std::optional<double> max;
  };
  std::vector<Line> lines;
  for (const auto& [f, cells] : grid) {
    std::optional<double> mx;
    for (const auto& [s, v] : cells) {
      if (v && (!mx || *v > *mx)) mx = v;
    }
    lines.push_back({f, mx});
  }
  std::stable_sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    const double va = a.max.value_or(-1.0), vb = b.max.value_or(-1.0);
    return va > vb;
  });
  if (o.top > 0 && lines.size() > o.top) lines.resize(o.top);

  std::string csv = "feature_index";
  for (const auto& s : subsets) csv += "," + csv_field(s);
  csv += ",max_f1\n";
  std::string jsonl;
  for (const auto& line : lines) {
    csv += std::to_string(line.feature);
    nlohmann::ordered_json j;
    j["feature_index"] = line.feature;
    nlohmann::ordered_json cells = nlohmann::ordered_json::object();
    for (const auto& s : subsets) {
      const auto& m = grid[line.feature];
      const auto it = m.find(s);
      const std::optional<double> v = it == m.end() ? std::nullopt : it->second;
      csv += "," + (v ? format_number(*v) : std::string());
      cells[s] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    }
    csv += "," + (line.max ? format_number(*line.max) : std::string()) + "\n";
    j["scores"] = cells;
    j["max_f1"] = line.max ? nlohmann::ordered_json(*line.max) : nlohmann::ordered_json(nullptr);
    jsonl += jsonl_line(j);
  }
  fs::path csv_path = o.out;
  fs::path jsonl_path = o.out;
  jsonl_path.replace_extension(".jsonl");
  write_file_atomic(csv_path, csv);
  write_file_atomic(jsonl_path, jsonl);
  out << "wrote heatmap with " << lines.size() << " features x " << subsets.size() << " subsets\n";
}

// ---------------------------------------------------------------------------
// scan

struct ScanOpts {
  fs::path corpus;
  fs::path out;
  bool strict_comma = false;
  std::uint64_t seed = 0;
};

void cmd_scan(const ScanOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  ScanOptions scan;
  scan.require_space_after_comma = o.strict_comma;
  const auto rows = corpus_frequency_report(corpus, scan);
  write_twin(o.out, "frequency", frequency_report_csv(rows), frequency_report_jsonl(rows));

  std::string csv = "doc_id,model";
  for (AnomalyKind k : kAllAnomalyKinds) csv += "," + to_string(k);
  csv += ",token_length\n";
  std::string jsonl;
  for (const auto& doc : corpus) {
    const auto c = scan_document(doc, scan);
    csv += csv_field(doc.id) + "," + csv_field(doc.model);
    nlohmann::ordered_json j;
    j["doc_id"] = doc.id;
    j["model"] = doc.model;
    for (AnomalyKind k : kAllAnomalyKinds) {
      csv += "," + std::to_string(count_of(c, k));
      j[to_string(k)] = count_of(c, k);
    }
    nlohmann::ordered_json runs = nlohmann::ordered_json::object();
    for (const auto& [len, n] : c.linebreak_runs) runs[std::to_string(len)] = n;
    j["linebreak_runs"] = runs;
    j["token_length"] = c.token_length;
    csv += "," + std::to_string(c.token_length) + "\n";
    jsonl += jsonl_line(j);
  }
  write_twin(o.out, "doc_counts", csv, jsonl);
  out << "scanned " << corpus.size() << " documents\n";
}

// ---------------------------------------------------------------------------
// sensitivity

struct SensOpts {
  fs::path corpus;
  fs::path features;
  fs::path out;
  std::size_t top_k = 10;
  bool signed_difference = false;
  std::string sae_id;
  std::size_t min_domain_size = 100;
  std::string anomaly = "long_ellipsis";
  std::size_t anomaly_domains = 3;
  fs::path attacked_features;
  std::string attack;
  fs::path important;
  double top_fraction = 0.1;
  std::vector<std::size_t> restrict_to;
  std::uint64_t seed = 0;
};

SensitivityOptions sens_options(const SensOpts& o) {
  SensitivityOptions s;
  s.top_k = o.top_k;
  s.signed_difference = o.signed_difference;
  s.min_domain_size = o.min_domain_size;
  s.anomaly_domains = o.anomaly_domains;
  s.sae_id = o.sae_id.empty() ? o.features.filename().string() : o.sae_id;
  return s;
}

void emit_sensitivity(const SensOpts& o, const SensitivityReport& r, const std::string& stem, std::ostream& out) {
  write_twin(o.out, stem, sensitivity_csv(r), sensitivity_jsonl(r));
  out << r.groups.size() << " group(s), intersection {";
  for (std::size_t i = 0; i < r.intersection.size(); ++i) out << (i ? ", " : "") << r.intersection[i];
  out << "}";
  if (r.all_zero) out << " [all scores zero]";
  if (!r.degraded_coverage.empty()) out << " [degraded coverage]";
  out << "\n";
}

std::vector<std::size_t> read_importance(const fs::path& path, double fraction, std::size_t m) {
  require_file(path, "importance table");
  const auto rows = parse_csv(read_file_text(path), path.string());
  if (rows.empty()) throw DataError(path.string() + ": empty importance table");
  const auto it = std::find(rows[0].begin(), rows[0].end(), "feature_index");
  if (it == rows[0].end()) throw ParseError(path.string() + ": missing column 'feature_index'");
  const auto c = static_cast<std::size_t>(it - rows[0].begin());
  const std::size_t keep = top_count(fraction, m);
  std::vector<std::size_t> out;
  for (std::size_t r = 1; r < rows.size() && out.size() < keep; ++r) {
    try {
      out.push_back(std::stoul(rows[r].at(c)));
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(r + 1) + ": bad feature_index");
    }
  }
  return out;
}

void cmd_sens_length(const SensOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const FeatureTable table = load_features(o.features);
  emit_sensitivity(o, length_sensitivity(corpus, table, sens_options(o)), "sensitivity_length", out);
}

void cmd_sens_anomaly(const SensOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const FeatureTable table = load_features(o.features);
  const AnomalyKind kind = parse_anomaly_kind(o.anomaly);
  emit_sensitivity(o, anomaly_sensitivity(corpus, table, kind, sens_options(o)), "sensitivity_anomaly_" + o.anomaly,
                   out);
}

void cmd_sens_attack(const SensOpts& o, std::ostream& out) {
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const FeatureTable clean = load_features(o.features);
  if (o.attacked_features.empty()) throw ConfigError("sensitivity attack needs --attacked-features");
  const FeatureTable attacked = load_features(o.attacked_features);
  std::vector<std::size_t> restrict_to = o.restrict_to;
  if (!o.important.empty()) {
    if (!restrict_to.empty()) throw ConfigError("give either --important or --restrict, not both");
    restrict_to = read_importance(o.important, o.top_fraction, clean.n_features());
  }
  const std::string name = o.attack.empty() ? "attack" : o.attack;
  emit_sensitivity(o, attack_sensitivity(corpus, clean, attacked, name, restrict_to, sens_options(o)),
                   "sensitivity_attack_" + name, out);
}

// ---------------------------------------------------------------------------
// attack

struct AttackOpts {
  fs::path corpus;
  std::string kind;
  double rate = 0.5;
  fs::path out;
  fs::path wordlists;
  fs::path markers;
  fs::path acts_out;
  std::size_t d = 32;
  double noise = 0.05;
  double length_coupling = 0.0;
  std::uint64_t acts_seed = 0;
  int layer = 0;
  std::string model_name = "toy";
  std::uint64_t seed = 0;
};

void cmd_attack(const AttackOpts& o, std::ostream& out) {
  AttackSpec spec{parse_attack_kind(o.kind), o.rate, o.seed};
  spec.validate();
  if (!o.acts_out.empty() && o.markers.empty()) throw ConfigError("--acts-out needs --markers (the clean corpus sidecar)");
  const Corpus corpus = load_nonempty_corpus(o.corpus);
  const AttackResources resources =
      o.wordlists.empty() ? AttackResources::builtin() : AttackResources::load_dir(o.wordlists);
  const Corpus attacked = attack_corpus(corpus, spec, resources);
  save_corpus(attacked, o.out);

  std::size_t changed = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) changed += corpus[i].text != attacked[i].text ? 1 : 0;

  if (!o.acts_out.empty()) {
    require_file(o.markers, "marker sidecar");
    std::map<std::string, DocMarkers> by_id;
    for (auto& m : load_markers(o.markers)) by_id[m.id] = std::move(m);
    auto toy = ToyActivationSpec::standard(o.d, o.noise, o.acts_seed);
    toy.length_coupling = o.length_coupling;
    for (const auto& doc : attacked) {
      const auto it = by_id.find(doc.id);
      if (it == by_id.end()) throw DataError("no marker record for document '" + doc.id + "'");
      DocMarkers dm = it->second;
      const std::size_t n = token_count(doc.text);
      std::erase_if(dm.markers, [n](const MarkerSpan& s) { return s.token_start >= n; });
      for (auto& s : dm.markers) s.token_end = std::min(s.token_end, n);
      const Tensor2D acts = synthesize_activations(doc, dm, toy);
      const auto path = activation_path(o.acts_out, doc.id, o.layer);
      write_tensor(acts, path);
      write_tensor_meta({o.layer, o.model_name, o.d,
                         {{"doc_id", doc.id}, {"n_tokens", acts.rows()}, {"attack", o.kind}, {"rate", o.rate}}},
                        path);
    }
  }
  out << "attacked " << corpus.size() << " documents with " << o.kind << " (" << changed << " changed)\n";
}

// ---------------------------------------------------------------------------
// steer

struct SteerOpts {
  fs::path sae;
  std::vector<fs::path> inputs;
  std::vector<fs::path> reference;
  std::vector<std::size_t> features;
  std::vector<float> shifts{kSteeringShifts.begin(), kSteeringShifts.end()};
  fs::path out;
  std::uint64_t seed = 0;
};

std::string shift_label(float lambda) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+g", static_cast<double>(lambda));
  return buf;
}

void cmd_steer(const SteerOpts& o, std::ostream& out) {
  require_dir(o.sae, "SAE");
  const SaeModel sae = load_sae(o.sae);
  const auto inputs = expand_inputs(o.inputs);
  if (inputs.empty()) throw DataError("steer: no input activation files");
  const auto reference = o.reference.empty() ? inputs : expand_inputs(o.reference);
  if (reference.empty()) throw DataError("steer: no reference activation files for A_max");
  for (auto f : o.features) {
    if (f >= sae.n_features()) {
      throw ConfigError("feature " + std::to_string(f) + " out of range for an SAE with " +
                        std::to_string(sae.n_features()) + " features");
    }
  }

  AMaxAccumulator acc(sae);
  for (const auto& p : reference) acc.add(read_tensor(p));
  const auto a_max = acc.result();
  const std::string provenance = "token max over " + std::to_string(acc.tokens_seen()) + " tokens in " +
                                 std::to_string(reference.size()) + " file(s)";

  SteeringGrid grid;
  grid.shifts = o.shifts;
  for (auto f : o.features) grid.features.push_back({f, a_max[f], provenance});
  const auto configs = grid.expand();
  const auto protocol = emit_steering_protocol(grid, o.out);

  std::string csv = "input,feature_index,lambda,a_max,output\n";
  std::string jsonl;
  for (const auto& in : inputs) {
    const Tensor2D acts = read_tensor(in);
    std::optional<nlohmann::json> meta;
    if (fs::is_regular_file(meta_path_for(in))) meta = read_json_file(meta_path_for(in));
    const std::string stem = in.stem().string();
    for (const auto& cfg : configs) {
      const auto name = stem + ".f" + std::to_string(cfg.feature_index) + ".s" + shift_label(cfg.lambda) + ".saet";
      const auto path = o.out / "steered" / name;
      write_tensor(apply_steering(acts, sae, cfg), path);
      nlohmann::json m = meta.value_or(nlohmann::json::object());
      m["steering"] = {{"source", in.filename().string()},
                       {"feature_index", cfg.feature_index},
                       {"lambda", cfg.lambda},
                       {"a_max", cfg.a_max}};
      write_file_atomic(meta_path_for(path), m.dump(2) + "\n");
      csv += csv_field(in.filename().string()) + "," + std::to_string(cfg.feature_index) + "," +
             format_number(cfg.lambda) + "," + format_number(cfg.a_max) + "," + csv_field(name) + "\n";
      jsonl += jsonl_line({{"input", in.filename().string()},
                           {"feature_index", cfg.feature_index},
                           {"lambda", cfg.lambda},
                           {"a_max", cfg.a_max},
                           {"output", name}});
    }
  }
  write_twin(o.out, "steer_outputs", csv, jsonl);
  out << "wrote " << configs.size() * inputs.size() << " steered tensors (" << protocol.rows
      << " manifest rows) to " << o.out.string() << "\n";
}

// ---------------------------------------------------------------------------

void add_seed(CLI::App* app, std::uint64_t& seed) {
  app->add_option("--seed", seed, "Random seed")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"saedet: sparse-autoencoder features for machine-text detection"};
  app.name("saedet");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style key = value file; command-line flags win");

  GenOpts gen_o;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus, marker sidecar, toy activations and SAE");
  gen->add_option("--out", gen_o.out, "Output directory")->required();
  gen->add_option("--profiles", gen_o.profiles, "model-tag=preset list (presets: human, gpt-like, llama-like, neox-like, plain)")
      ->delimiter(',')
      ->capture_default_str();
  gen->add_option("--profile-file", gen_o.profile_file, "JSON object of model tag -> profile (overrides --profiles)");
  gen->add_option("--domains", gen_o.domains, "Domain tags")->delimiter(',')->capture_default_str();
  gen->add_option("--docs-per-cell", gen_o.docs_per_cell, "Documents per (model, domain)")->capture_default_str();
  gen->add_option("--docs-per-model", gen_o.docs_per_model, "model-tag=count overrides")->delimiter(',');
  gen->add_option("--d", gen_o.d, "Activation width")->capture_default_str();
  gen->add_option("--noise", gen_o.noise, "Per-token Gaussian noise sigma")->capture_default_str();
  gen->add_option("--length-coupling", gen_o.length_coupling, "Length direction scale per 100 tokens")->capture_default_str();
  gen->add_option("--layer", gen_o.layer, "Layer index recorded in file names")->capture_default_str();
  gen->add_option("--model-name", gen_o.model_name, "Model name recorded in metadata")->capture_default_str();
  gen->add_flag("--no-activations", gen_o.no_activations, "Only write the corpus and markers");
  gen->add_option("--sae-features", gen_o.sae_features, "Width of the identity-like SAE (0: none)")->capture_default_str();
  gen->add_option("--sae-bias", gen_o.sae_bias, "Encoder bias of the identity-like SAE")->capture_default_str();
  add_seed(gen, gen_o.seed);

  TrainSaeOpts ts_o;
  auto* ts = app.add_subcommand("train-sae", "Train an L1 sparse autoencoder");
  ts->add_option("--out", ts_o.out, "Output SAE directory")->required();
  ts->add_option("--acts", ts_o.acts, "Directory of activation .saet files");
  ts->add_option("--layer", ts_o.layer, "Only use files of this layer (-1: all)")->capture_default_str();
  ts->add_flag("--planted", ts_o.planted, "Train on a planted sparse dictionary instead");
  ts->add_option("--d", ts_o.d, "Planted: activation width")->capture_default_str();
  ts->add_option("--m-true", ts_o.m_true, "Planted: number of directions")->capture_default_str();
  ts->add_option("--k", ts_o.k, "Planted: active directions per sample")->capture_default_str();
  ts->add_option("--samples", ts_o.samples, "Planted: number of samples")->capture_default_str();
  ts->add_option("--features", ts_o.features, "SAE width M")->capture_default_str();
  ts->add_option("--l1", ts_o.l1, "L1 penalty")->capture_default_str();
  ts->add_option("--lr", ts_o.lr, "Learning rate")->capture_default_str();
  ts->add_option("--steps", ts_o.steps, "SGD steps")->capture_default_str();
  ts->add_option("--batch", ts_o.batch, "Batch size")->capture_default_str();
  ts->add_option("--momentum", ts_o.momentum, "Momentum")->capture_default_str();
  ts->add_flag("--no-renormalize", ts_o.no_renormalize, "Do not renormalise decoder columns");
  ts->add_option("--model-name", ts_o.model_name, "Model name recorded in sae.meta.json");
  add_seed(ts, ts_o.seed);

  EncodeOpts ep_o;
  auto* ep = app.add_subcommand("encode-pool", "Encode activations with an SAE and pool per document");
  ep->add_option("--corpus", ep_o.corpus, "Corpus JSONL")->required();
  ep->add_option("--acts", ep_o.acts, "Activation directory")->required();
  ep->add_option("--layer", ep_o.layer, "Layer index")->capture_default_str();
  ep->add_option("--sae", ep_o.sae, "SAE directory");
  ep->add_option("--pooling", ep_o.pooling, "sum or mean")->capture_default_str();
  ep->add_flag("--raw", ep_o.raw, "Pool raw activations instead of SAE features");
  ep->add_option("--out", ep_o.out, "Output feature matrix (.saet)")->required();
  add_seed(ep, ep_o.seed);

  TrainEvalOpts te_o;
  auto* te = app.add_subcommand("train-eval", "Train on the train split and score every split and subset");
  te->add_option("--corpus", te_o.corpus, "Corpus JSONL")->required();
  te->add_option("--features", te_o.features, "Pooled feature matrix")->required();
  te->add_option("--mode", te_o.mode, "gbdt or thresholds")->capture_default_str();
  te->add_option("--out", te_o.out, "Output directory")->required();
  te->add_option("--rounds", te_o.rounds, "Boosting rounds")->capture_default_str();
  te->add_option("--max-depth", te_o.max_depth, "Tree depth")->capture_default_str();
  te->add_option("--learning-rate", te_o.learning_rate, "Shrinkage")->capture_default_str();
  te->add_option("--min-child-weight", te_o.min_child_weight, "Minimum child hessian")->capture_default_str();
  te->add_option("--lambda", te_o.lambda, "L2 leaf regularisation")->capture_default_str();
  te->add_flag("--tune-cut", te_o.tune_cut, "Tune the probability cut on the dev split");
  te->add_option("--top-fraction", te_o.top_fraction, "Fraction of features kept in importance.csv")->capture_default_str();
  te->add_option("--groupings", te_o.groupings, "Subset groupings")->delimiter(',')->capture_default_str();
  add_seed(te, te_o.seed);

  SweepOpts sw_o;
  auto* sw = app.add_subcommand("sweep-thresholds", "Per-feature threshold classifiers on every subset");
  sw->add_option("--corpus", sw_o.corpus, "Corpus JSONL")->required();
  sw->add_option("--features", sw_o.features, "Pooled feature matrix")->required();
  sw->add_option("--out", sw_o.out, "Output directory")->required();
  sw->add_option("--grouping", sw_o.grouping, "domain, model or split")->capture_default_str();
  sw->add_option("--folds", sw_o.folds, "Cross-validation folds")->capture_default_str();
  sw->add_flag("--in-sample", sw_o.in_sample, "Score the fit on the data it was fit on");
  sw->add_option("--split", sw_o.split, "Restrict to one split (all: no restriction)")->capture_default_str();
  sw->add_option("--feature-list", sw_o.feature_list, "Only these feature indices")->delimiter(',');
  add_seed(sw, sw_o.seed);

  ReportOpts rp_o;
  auto* rp = app.add_subcommand("report", "Pivot a subset score table into a feature x subset heatmap");
  rp->add_option("--scores", rp_o.scores, "subset_scores.csv from sweep-thresholds")->required();
  rp->add_option("--out", rp_o.out, "Output CSV (a .jsonl twin is written next to it)")->required();
  rp->add_option("--top", rp_o.top, "Keep the N best features by max F1 (0: all)")->capture_default_str();
  add_seed(rp, rp_o.seed);

  ScanOpts sc_o;
  auto* sc = app.add_subcommand("scan", "Count syntactic anomalies per document and per model");
  sc->add_option("--corpus", sc_o.corpus, "Corpus JSONL")->required();
  sc->add_option("--out", sc_o.out, "Output directory")->required();
  sc->add_flag("--strict-comma", sc_o.strict_comma, "Count only ' , ' (space on both sides)");
  add_seed(sc, sc_o.seed);

  SensOpts se_o;
  auto* se = app.add_subcommand("sensitivity", "Features most sensitive to length, anomalies or attacks");
  se->require_subcommand(1);
  auto common = [&](CLI::App* a) {
    a->add_option("--corpus", se_o.corpus, "Corpus JSONL (the clean one for attacks)")->required();
    a->add_option("--features", se_o.features, "Pooled feature matrix")->required();
    a->add_option("--out", se_o.out, "Output directory")->required();
    a->add_option("--top-k", se_o.top_k, "Features per group")->capture_default_str();
    a->add_flag("--signed", se_o.signed_difference, "Rank by signed difference");
    a->add_option("--sae-id", se_o.sae_id, "Label recorded in the report");
    add_seed(a, se_o.seed);
  };
  auto* se_len = se->add_subcommand("length", "Longest vs shortest 10% of human texts per domain");
  common(se_len);
  se_len->add_option("--min-domain-size", se_o.min_domain_size, "Domains need more docs than this")->capture_default_str();
  auto* se_an = se->add_subcommand("anomaly", "Texts with vs without an anomaly in the top domains");
  common(se_an);
  se_an->add_option("--anomaly", se_o.anomaly, "Anomaly kind")->capture_default_str();
  se_an->add_option("--domains", se_o.anomaly_domains, "Number of domains to intersect")->capture_default_str();
  auto* se_at = se->add_subcommand("attack", "Attacked vs clean texts per (model, domain)");
  common(se_at);
  se_at->add_option("--attacked-features", se_o.attacked_features, "Pooled features of the attacked corpus")->required();
  se_at->add_option("--attack", se_o.attack, "Attack name recorded in the report");
  se_at->add_option("--important", se_o.important, "importance.csv restricting the candidate features");
  se_at->add_option("--top-fraction", se_o.top_fraction, "Fraction of features taken from --important")->capture_default_str();
  se_at->add_option("--restrict", se_o.restrict_to, "Explicit candidate feature list")->delimiter(',');

  AttackOpts at_o;
  auto* at = app.add_subcommand("attack", "Apply a text perturbation to every document");
  at->add_option("--corpus", at_o.corpus, "Corpus JSONL")->required();
  at->add_option("--kind", at_o.kind, "Attack kind")->required();
  at->add_option("--rate", at_o.rate, "Rate in (0, 1]")->capture_default_str();
  at->add_option("--out", at_o.out, "Attacked corpus JSONL")->required();
  at->add_option("--wordlists", at_o.wordlists, "Directory overriding the bundled word lists");
  at->add_option("--markers", at_o.markers, "Marker sidecar of the clean corpus (for --acts-out)");
  at->add_option("--acts-out", at_o.acts_out, "Also synthesise toy activations for the attacked texts");
  at->add_option("--d", at_o.d, "Toy activation width")->capture_default_str();
  at->add_option("--noise", at_o.noise, "Toy activation noise sigma")->capture_default_str();
  at->add_option("--length-coupling", at_o.length_coupling, "Toy length coupling")->capture_default_str();
  at->add_option("--acts-seed", at_o.acts_seed, "Seed used by gen for the clean activations")->capture_default_str();
  at->add_option("--layer", at_o.layer, "Layer index")->capture_default_str();
  at->add_option("--model-name", at_o.model_name, "Model name recorded in metadata")->capture_default_str();
  add_seed(at, at_o.seed);

  SteerOpts st_o;
  auto* st = app.add_subcommand("steer", "Steer activations along SAE decoder directions");
  st->add_option("--sae", st_o.sae, "SAE directory")->required();
  st->add_option("--inputs", st_o.inputs, "Activation files or directories to steer")->required()->delimiter(',');
  st->add_option("--reference", st_o.reference, "Files or directories for A_max (default: the inputs)")->delimiter(',');
  st->add_option("--features", st_o.features, "Feature indices")->required()->delimiter(',');
  st->add_option("--shifts", st_o.shifts, "Lambda grid (default: the 14-value grid)")->delimiter(',');
  st->add_option("--out", st_o.out, "Output directory")->required();
  add_seed(st, st_o.seed);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error[E_USAGE]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen) cmd_gen(gen_o, out);
    else if (*ts) cmd_train_sae(ts_o, out);
    else if (*ep) cmd_encode_pool(ep_o, out);
    else if (*te) cmd_train_eval(te_o, out);
    else if (*sw) cmd_sweep(sw_o, out);
    else if (*rp) cmd_report(rp_o, out);
    else if (*sc) cmd_scan(sc_o, out);
    else if (*se_len) cmd_sens_length(se_o, out);
    else if (*se_an) cmd_sens_anomaly(se_o, out);
    else if (*se_at) cmd_sens_attack(se_o, out);
    else if (*at) cmd_attack(at_o, out);
    else if (*st) cmd_steer(st_o, out);
  } catch (const saedet::Error& e) {
    err << "error[" << e.code() << "]: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error[E_IO]: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error[E_PARSE]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[E_INTERNAL]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace saedet::cli
