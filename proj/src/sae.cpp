#include "saedet/sae.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace saedet {

namespace fs = std::filesystem;

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "jumprelu") return Activation::jumprelu;
  throw ConfigError("unknown activation '" + name + "' (expected relu or jumprelu)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "jumprelu"; }

PoolingMode parse_pooling(const std::string& name) {
  if (name == "sum") return PoolingMode::sum;
  if (name == "mean") return PoolingMode::mean;
  throw ConfigError("unknown pooling '" + name + "' (expected sum or mean)");
}

SaeModel::SaeModel(Tensor2D w_enc, Tensor2D b_enc, Tensor2D w_dec, Tensor2D b_dec,
                   Activation activation, std::vector<float> jump_threshold)
    : d_model_(w_enc.cols()),
      n_features_(w_enc.rows()),
      w_enc_(std::move(w_enc)),
      b_enc_(std::move(b_enc)),
      w_dec_(std::move(w_dec)),
      b_dec_(std::move(b_dec)),
      activation_(activation),
      jump_threshold_(std::move(jump_threshold)) {
  const std::size_t d = d_model_;
  const std::size_t m = n_features_;
  if (w_enc_.rank() != 2 || w_dec_.rank() != 2) throw ShapeError("W_enc and W_dec must be rank 2");
  if (m <= d) {
    throw ShapeError("SAE must be overcomplete: n_features " + std::to_string(m) +
                     " <= d_model " + std::to_string(d));
  }
  if (w_dec_.rows() != d || w_dec_.cols() != m) {
    throw ShapeError("W_dec shape " + w_dec_.shape_string() + " does not match W_enc " +
                     w_enc_.shape_string() + " (expected [" + std::to_string(d) + "x" +
                     std::to_string(m) + "])");
  }
  if (b_enc_.size() != m) {
    throw ShapeError("b_enc shape " + b_enc_.shape_string() + " expected length " + std::to_string(m));
  }
  if (b_dec_.size() != d) {
    throw ShapeError("b_dec shape " + b_dec_.shape_string() + " expected length " + std::to_string(d));
  }
  // Tensor2D constructors already reject non-finite values; writable accessors
  // do not, so re-check here.
  w_enc_.validate_finite();
  b_enc_.validate_finite();
  w_dec_.validate_finite();
  b_dec_.validate_finite();
  if (activation_ == Activation::jumprelu) {
    if (jump_threshold_.size() != m) {
      throw ShapeError("jump_threshold length " + std::to_string(jump_threshold_.size()) +
                       " expected " + std::to_string(m));
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(jump_threshold_[j]) || jump_threshold_[j] < 0.0f) {
        throw ValidationError("jump_threshold[" + std::to_string(j) + "] must be finite and >= 0");
      }
    }
  } else {
    jump_threshold_.clear();
  }
}

std::vector<float> SaeModel::decoder_column(std::size_t i) const {
  std::vector<float> col(d_model_);
  for (std::size_t r = 0; r < d_model_; ++r) col[r] = w_dec_(r, i);
  return col;
}

TokenFeatureMatrix::TokenFeatureMatrix(Tensor2D values) : values_(std::move(values)) {
  const auto data = values_.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data[i] >= 0.0f)) {
      throw ValidationError("feature matrix entry " + std::to_string(i) + " is negative");
    }
  }
}

std::vector<double> pre_activations(const SaeModel& model, std::span<const float> x) {
  const std::size_t d = model.d_model();
  const std::size_t m = model.n_features();
  if (x.size() != d) {
    throw ShapeError("activation width " + std::to_string(x.size()) + " does not match d_model " +
                     std::to_string(d));
  }
  std::vector<double> input(x.begin(), x.end());
  if (model.subtract_decoder_bias()) {
    for (std::size_t k = 0; k < d; ++k) input[k] -= model.b_dec()[k];
  }
  std::vector<double> z(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto w = model.w_enc().row(j);
    double acc = model.b_enc()[j];
    for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(w[k]) * input[k];
    z[j] = acc;
  }
  return z;
}

namespace {

void activate(const SaeModel& model, const std::vector<double>& z, std::span<float> out) {
  if (model.activation() == Activation::relu) {
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] > 0.0 ? static_cast<float>(z[j]) : 0.0f;
  } else {
    const auto theta = model.jump_threshold();
    for (std::size_t j = 0; j < z.size(); ++j) {
      out[j] = z[j] > static_cast<double>(theta[j]) ? static_cast<float>(z[j]) : 0.0f;
    }
  }
}

}  // namespace

std::vector<float> encode_token(const SaeModel& model, std::span<const float> x) {
  std::vector<float> f(model.n_features());
  activate(model, pre_activations(model, x), f);
  return f;
}

TokenFeatureMatrix encode(const SaeModel& model, const Tensor2D& acts) {
  if (acts.cols() != model.d_model()) {
    throw ShapeError("activations " + acts.shape_string() + " incompatible with SAE d_model " +
                     std::to_string(model.d_model()) + " (W_enc " + model.w_enc().shape_string() + ")");
  }
  Tensor2D out(acts.rows(), model.n_features());
  for (std::size_t t = 0; t < acts.rows(); ++t) {
    activate(model, pre_activations(model, acts.row(t)), out.row(t));
  }
  return TokenFeatureMatrix(std::move(out));
}

Tensor2D decode(const SaeModel& model, const TokenFeatureMatrix& feats) {
  const std::size_t d = model.d_model();
  const std::size_t m = model.n_features();
  if (feats.n_features() != m) {
    throw ShapeError("feature matrix " + feats.values().shape_string() +
                     " incompatible with SAE n_features " + std::to_string(m));
  }
  Tensor2D out(feats.n_tokens(), d);
  std::vector<double> acc(d);
  for (std::size_t t = 0; t < feats.n_tokens(); ++t) {
    for (std::size_t k = 0; k < d; ++k) acc[k] = model.b_dec()[k];
    const auto f = feats.row(t);
    for (std::size_t j = 0; j < m; ++j) {
      if (f[j] == 0.0f) continue;
      for (std::size_t k = 0; k < d; ++k) acc[k] += static_cast<double>(model.w_dec()(k, j)) * f[j];
    }
    for (std::size_t k = 0; k < d; ++k) out(t, k) = static_cast<float>(acc[k]);
  }
  return out;
}

std::vector<float> pool_rows(const Tensor2D& rows, PoolingMode mode) {
  if (rows.rows() == 0) throw DataError("cannot pool an empty document (zero tokens)");
  std::vector<double> acc(rows.cols(), 0.0);
  for (std::size_t t = 0; t < rows.rows(); ++t) {
    const auto r = rows.row(t);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += r[j];
  }
  const double scale = mode == PoolingMode::mean ? 1.0 / static_cast<double>(rows.rows()) : 1.0;
  std::vector<float> out(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j] * scale);
  return out;
}

DocFeatureVector pool_document(const TokenFeatureMatrix& feats, std::string doc_id, PoolingMode mode) {
  if (feats.n_tokens() == 0) throw DataError("document '" + doc_id + "' has zero tokens");
  return {std::move(doc_id), pool_rows(feats.values(), mode)};
}

AMaxAccumulator::AMaxAccumulator(const SaeModel& model)
    : model_(&model), max_(model.n_features(), 0.0f) {}

void AMaxAccumulator::add(const Tensor2D& acts) {
  const auto feats = encode(*model_, acts);
  for (std::size_t t = 0; t < feats.n_tokens(); ++t) {
    const auto f = feats.row(t);
    for (std::size_t j = 0; j < max_.size(); ++j) max_[j] = std::max(max_[j], f[j]);
  }
  tokens_ += feats.n_tokens();
}

std::vector<float> AMaxAccumulator::result() const {
  if (tokens_ == 0) throw DataError("A_max reference stream contained no tokens");
  return max_;
}

std::vector<float> compute_a_max(const SaeModel& model, std::span<const Tensor2D> reference) {
  AMaxAccumulator acc(model);
  for (const auto& t : reference) acc.add(t);
  return acc.result();
}

Tensor2D apply_steering(const Tensor2D& acts, const SaeModel& model, const SteeringConfig& cfg) {
  if (cfg.feature_index >= model.n_features()) {
    throw ConfigError("steering feature index " + std::to_string(cfg.feature_index) +
                      " out of range (n_features " + std::to_string(model.n_features()) + ")");
  }
  if (acts.cols() != model.d_model()) {
    throw ShapeError("activations " + acts.shape_string() + " incompatible with SAE d_model " +
                     std::to_string(model.d_model()));
  }
  const float scale = cfg.lambda * cfg.a_max;
  std::vector<float> shift(model.d_model());
  for (std::size_t k = 0; k < shift.size(); ++k) shift[k] = scale * model.w_dec()(k, cfg.feature_index);

  Tensor2D out = acts;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    auto r = out.row(t);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += shift[k];
  }
  out.validate_finite();
  return out;
}

std::vector<SteeringConfig> SteeringGrid::expand() const {
  if (features.empty()) throw ConfigError("steering grid has no features");
  if (shifts.empty()) throw ConfigError("steering grid has no shifts");
  std::vector<SteeringConfig> out;
  out.reserve(features.size() * shifts.size());
  for (const auto& f : features) {
    for (float s : shifts) out.push_back({f.feature_index, s, f.a_max, f.provenance});
  }
  return out;
}

const char* const kSteeringPromptTemplate =
    "You will see the features {} with sequences of 50 text generations each. Each sequence "
    "consists of an original text and a modified version where a specific hidden feature has "
    "been gradually strengthened or weakened. The same hidden feature is shifted consistently "
    "across all sequences.\n"
    "Your task is to analyze the changes across these sequences and determine which semantic, "
    "stylistic, or structural feature has been modified. Try to find for each feature the "
    "dependencies and hidden meaning.\n"
    "\n"
    "Output Format:\n"
    "Create a structured table with the following columns:\n"
    "Feature Number: A unique identifier for the observed feature.\n"
    "Possible Function: Explain in detail what role this feature might serve in text generation "
    "(e.g., enhancing coherence, increasing formality, affecting emotional tone).\n"
    "Effect Type: Specify whether the observed changes are semantic, stylistic, or structural.\n"
    "Observed Behavior: Describe the specific textual variations caused by strengthening or "
    "weakening this feature.\n"
    "Each row should correspond to a distinct feature, listing its effects and possible functions "
    "with sufficient explanation\n";

std::string render_steering_prompt(std::span<const std::size_t> features) {
  std::string list;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (i) list += ", ";
    list += std::to_string(features[i]);
  }
  std::string text = kSteeringPromptTemplate;
  const auto pos = text.find("{}");
  text.replace(pos, 2, list);
  return text;
}

namespace {

std::string format_float(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SteeringProtocolFiles emit_steering_protocol(const SteeringGrid& grid, const fs::path& out_dir) {
  const auto configs = grid.expand();
  std::string manifest = "feature_index,lambda,a_max,provenance\n";
  for (const auto& c : configs) {
    manifest += std::to_string(c.feature_index) + "," + format_float(c.lambda) + "," +
                format_float(c.a_max) + "," + csv_escape(c.provenance) + "\n";
  }
  std::vector<std::size_t> ids;
  for (const auto& f : grid.features) ids.push_back(f.feature_index);

  SteeringProtocolFiles files{out_dir / "steering_manifest.csv", out_dir / "steering_prompt.txt",
                              configs.size()};
  write_file_atomic(files.manifest, manifest);
  write_file_atomic(files.prompt, render_steering_prompt(ids));
  return files;
}

void save_sae(const SaeModel& model, const fs::path& dir, const SaeMeta& meta) {
  write_tensor(model.w_enc(), dir / "W_enc.saet");
  write_tensor(model.b_enc(), dir / "b_enc.saet");
  write_tensor(model.w_dec(), dir / "W_dec.saet");
  write_tensor(model.b_dec(), dir / "b_dec.saet");
  nlohmann::ordered_json j;
  j["activation"] = to_string(model.activation());
  if (model.activation() == Activation::jumprelu) {
    const auto t = model.jump_threshold();
    write_tensor(Tensor2D::vector({t.begin(), t.end()}), dir / "jump_threshold.saet");
    j["jump_threshold"] = "jump_threshold.saet";
  } else {
    j["jump_threshold"] = nullptr;
  }
  j["d_model"] = model.d_model();
  j["n_features"] = model.n_features();
  j["layer"] = meta.layer;
  j["model"] = meta.model_name;
  j["subtract_decoder_bias"] = model.subtract_decoder_bias();
  write_file_atomic(dir / "sae.meta.json", j.dump(2) + "\n");
}

SaeModel load_sae(const fs::path& dir, SaeMeta* meta_out) {
  const auto meta_path = dir / "sae.meta.json";
  const auto j = read_json_file(meta_path);
  const std::string ctx = meta_path.string();
  for (const char* key : {"activation", "d_model", "n_features", "layer"}) {
    if (!j.contains(key)) throw ParseError(ctx + ": missing required key '" + key + "'");
  }
  if (!j["activation"].is_string()) throw ParseError(ctx + ": 'activation' must be a string");
  const Activation act = parse_activation(j["activation"].get<std::string>());
  std::vector<float> theta;
  if (act == Activation::jumprelu) {
    if (!j.contains("jump_threshold") || !j["jump_threshold"].is_string()) {
      throw ParseError(ctx + ": jumprelu SAE needs a 'jump_threshold' file reference");
    }
    const auto t = read_tensor(dir / j["jump_threshold"].get<std::string>());
    theta.assign(t.data().begin(), t.data().end());
  }
  SaeModel model(read_tensor(dir / "W_enc.saet"), read_tensor(dir / "b_enc.saet"),
                 read_tensor(dir / "W_dec.saet"), read_tensor(dir / "b_dec.saet"), act,
                 std::move(theta));
  if (!j["d_model"].is_number_unsigned() || j["d_model"].get<std::size_t>() != model.d_model() ||
      !j["n_features"].is_number_unsigned() ||
      j["n_features"].get<std::size_t>() != model.n_features()) {
    throw ValidationError(ctx + ": d_model/n_features disagree with weight shapes (d=" +
                          std::to_string(model.d_model()) + ", M=" +
                          std::to_string(model.n_features()) + ")");
  }
  if (j.contains("subtract_decoder_bias") && j["subtract_decoder_bias"].is_boolean()) {
    model.set_subtract_decoder_bias(j["subtract_decoder_bias"].get<bool>());
  }
  if (meta_out) {
    meta_out->layer = j["layer"].get<int>();
    meta_out->model_name = j.value("model", std::string{});
  }
  return model;
}

FeatureTable::FeatureTable(std::vector<std::string> doc_ids, Tensor2D values)
    : doc_ids_(std::move(doc_ids)), values_(std::move(values)) {
  if (values_.rows() != doc_ids_.size()) {
    throw ShapeError("feature table has " + std::to_string(values_.rows()) + " rows but " +
                     std::to_string(doc_ids_.size()) + " document ids");
  }
  for (std::size_t r = 0; r < doc_ids_.size(); ++r) {
    if (!index_.emplace(doc_ids_[r], r).second) {
      throw ValidationError("duplicate document id '" + doc_ids_[r] + "' in feature table");
    }
  }
}

std::span<const float> FeatureTable::row(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DataError("no pooled features for document '" + id + "'");
  return values_.row(it->second);
}

FeatureTable make_feature_table(const std::vector<DocFeatureVector>& docs) {
  if (docs.empty()) return {};
  const std::size_t m = docs.front().values.size();
  std::vector<std::string> ids;
  std::vector<float> data;
  data.reserve(docs.size() * m);
  for (const auto& d : docs) {
    if (d.values.size() != m) throw ShapeError("pooled vectors have inconsistent widths");
    ids.push_back(d.doc_id);
    data.insert(data.end(), d.values.begin(), d.values.end());
  }
  return {std::move(ids), Tensor2D(docs.size(), m, std::move(data))};
}

fs::path ids_path_for(const fs::path& features_path) {
  fs::path p = features_path;
  p.replace_extension(".ids.txt");
  return p;
}

void write_feature_table(const FeatureTable& table, const fs::path& path) {
  std::string ids;
  for (const auto& id : table.doc_ids()) ids += id + "\n";
  write_tensor(table.values(), path);
  write_file_atomic(ids_path_for(path), ids);
}

FeatureTable read_feature_table(const fs::path& path) {
  Tensor2D values = read_tensor(path);
  std::istringstream in(read_file_text(ids_path_for(path)));
  std::vector<std::string> ids;
  for (std::string line; std::getline(in, line);) ids.push_back(line);
  return {std::move(ids), std::move(values)};
}

}  // namespace saedet
