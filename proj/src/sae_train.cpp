#include "saedet/sae_train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "saedet/rng.hpp"

namespace saedet {

PlantedDictionary PlantedDictionary::random(std::size_t d, std::size_t m_true, std::size_t sparsity_k,
                                            std::uint64_t seed) {
  Rng rng(derive_seed(seed, "planted-directions"));
  std::vector<double> cols(d * m_true);
  for (auto& v : cols) v = rng.normal();
  Tensor2D dirs(d, m_true);
  for (std::size_t j = 0; j < m_true; ++j) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += cols[j * d + k] * cols[j * d + k];
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) dirs(k, j) = static_cast<float>(cols[j * d + k] / norm);
  }
  return PlantedDictionary(std::move(dirs), sparsity_k, seed);
}

PlantedDictionary::PlantedDictionary(Tensor2D directions, std::size_t sparsity_k, std::uint64_t seed)
    : directions_(std::move(directions)), sparsity_k_(sparsity_k), seed_(seed) {
  if (m_true() <= d()) {
    throw ValidationError("planted dictionary needs more directions than dimensions (" +
                          std::to_string(m_true()) + " <= " + std::to_string(d()) + ")");
  }
  for (std::size_t j = 0; j < m_true(); ++j) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d(); ++k) norm += double(directions_(k, j)) * directions_(k, j);
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-6) {
      throw ValidationError("planted direction " + std::to_string(j) + " is not unit norm");
    }
  }
}

PlantedData generate_planted_data(const PlantedDictionary& dict, std::size_t n_samples,
                                  CoefficientRange coeffs) {
  const std::size_t k = dict.sparsity_k();
  if (k > dict.m_true()) {
    throw ConfigError("sparsity k=" + std::to_string(k) + " exceeds dictionary size " +
                      std::to_string(dict.m_true()));
  }
  if (n_samples == 0) throw ConfigError("n_samples must be >= 1");
  if (coeffs.lo > coeffs.hi) throw ConfigError("coefficient range is empty");

  Rng rng(derive_seed(dict.seed(), "planted-samples"));
  const std::size_t d = dict.d();
  PlantedData out{Tensor2D(n_samples, d), {}, {}};
  out.active.reserve(n_samples);
  out.coefficients.reserve(n_samples);
  std::vector<double> acc(d);
  for (std::size_t s = 0; s < n_samples; ++s) {
    auto chosen = rng.sample_distinct(dict.m_true(), k);
    std::vector<float> c(k);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      c[i] = coeffs.lo == coeffs.hi ? coeffs.lo
                                    : static_cast<float>(rng.uniform(coeffs.lo, coeffs.hi));
      for (std::size_t r = 0; r < d; ++r) acc[r] += double(c[i]) * dict.directions()(r, chosen[i]);
    }
    for (std::size_t r = 0; r < d; ++r) out.samples(s, r) = static_cast<float>(acc[r]);
    out.active.push_back(std::move(chosen));
    out.coefficients.push_back(std::move(c));
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(l1_weight > 0.0)) throw ConfigError("l1_weight must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size == 0) throw ConfigError("batch_size must be > 0");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
}

SaeParams SaeParams::zeros(std::size_t d, std::size_t m) {
  SaeParams p;
  p.d = d;
  p.m = m;
  p.w_enc.assign(m * d, 0.0);
  p.b_enc.assign(m, 0.0);
  p.atoms.assign(m * d, 0.0);
  p.b_dec.assign(d, 0.0);
  return p;
}

SaeParams SaeParams::initialize(std::size_t d, std::size_t m, std::uint64_t seed) {
  SaeParams p = zeros(d, m);
  Rng rng(derive_seed(seed, "sae-init"));
  for (auto& v : p.atoms) v = rng.normal();
  p.renormalize_atoms();
  p.w_enc = p.atoms;  // encoder rows = decoder columns
  return p;
}

void SaeParams::renormalize_atoms() {
  for (std::size_t j = 0; j < m; ++j) {
    double* a = atoms.data() + j * d;
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += a[k] * a[k];
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (std::size_t k = 0; k < d; ++k) a[k] /= norm;
    }
  }
}

SaeModel SaeParams::to_model() const {
  std::vector<float> we(w_enc.begin(), w_enc.end());
  std::vector<float> be(b_enc.begin(), b_enc.end());
  std::vector<float> wd(d * m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) wd[k * m + j] = static_cast<float>(atoms[j * d + k]);
  }
  std::vector<float> bd(b_dec.begin(), b_dec.end());
  return SaeModel(Tensor2D(m, d, std::move(we)), Tensor2D::vector(std::move(be)),
                  Tensor2D(d, m, std::move(wd)), Tensor2D::vector(std::move(bd)));
}

double sae_loss(const SaeParams& p, const Tensor2D& data, std::span<const std::size_t> rows,
                double l1_weight, SaeParams* grad) {
  const std::size_t d = p.d;
  const std::size_t m = p.m;
  if (data.cols() != d) {
    throw ShapeError("training data " + data.shape_string() + " does not match d=" + std::to_string(d));
  }
  if (grad) *grad = SaeParams::zeros(d, m);
  const double inv_b = 1.0 / static_cast<double>(rows.size());

  std::vector<double> x(d), z(m), f(m), r(d), gz(m);
  double total = 0.0;
  for (std::size_t row : rows) {
    const auto src = data.row(row);
    for (std::size_t k = 0; k < d; ++k) x[k] = src[k];

    double l1 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double* w = p.w_enc.data() + j * d;
      double acc = p.b_enc[j];
      for (std::size_t k = 0; k < d; ++k) acc += w[k] * x[k];
      z[j] = acc;
      f[j] = acc > 0.0 ? acc : 0.0;
      l1 += f[j];
    }
    for (std::size_t k = 0; k < d; ++k) r[k] = p.b_dec[k] - x[k];
    for (std::size_t j = 0; j < m; ++j) {
      if (f[j] == 0.0) continue;
      const double* a = p.atoms.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) r[k] += a[k] * f[j];
    }
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) sq += r[k] * r[k];
    total += sq + l1_weight * l1;

    if (!grad) continue;
    // d/dx_hat = 2 r / B
    for (std::size_t k = 0; k < d; ++k) {
      r[k] *= 2.0 * inv_b;
      grad->b_dec[k] += r[k];
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double* a = p.atoms.data() + j * d;
      double* ga = grad->atoms.data() + j * d;
      double gf = l1_weight * inv_b;
      for (std::size_t k = 0; k < d; ++k) {
        gf += a[k] * r[k];
        ga[k] += r[k] * f[j];
      }
      gz[j] = z[j] > 0.0 ? gf : 0.0;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (gz[j] == 0.0) continue;
      double* gw = grad->w_enc.data() + j * d;
      for (std::size_t k = 0; k < d; ++k) gw[k] += gz[j] * x[k];
      grad->b_enc[j] += gz[j];
    }
  }
  return total * inv_b;
}

namespace {

void momentum_step(std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g,
                   double lr, double mu) {
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] + g[i];
    w[i] -= lr * v[i];
  }
}

}  // namespace

TrainResult train_sae(const Tensor2D& data, std::size_t m, const TrainConfig& cfg,
                      const StepObserver& observer) {
  cfg.validate();
  const std::size_t d = data.cols();
  if (m <= d) {
    throw ConfigError("n_features " + std::to_string(m) + " must exceed d_model " + std::to_string(d));
  }
  if (data.rows() == 0) throw DataError("training data is empty");

  SaeParams params = SaeParams::initialize(d, m, cfg.seed);
  TrainResult result{params.to_model(), params.to_model(), {}};
  result.loss_history.reserve(cfg.steps);

  SaeParams velocity = SaeParams::zeros(d, m);
  SaeParams grad;
  Rng rng(derive_seed(cfg.seed, "sae-batches"));
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<std::size_t> batch(cfg.batch_size);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    for (auto& b : batch) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      b = order[cursor++];
    }
    const double loss = sae_loss(params, data, batch, cfg.l1_weight, &grad);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "SAE training diverged: loss " << loss << " at step " << step;
      throw TrainingError(os.str(), static_cast<long>(step));
    }
    result.loss_history.push_back(loss);

    momentum_step(params.w_enc, velocity.w_enc, grad.w_enc, cfg.learning_rate, cfg.momentum);
    momentum_step(params.b_enc, velocity.b_enc, grad.b_enc, cfg.learning_rate, cfg.momentum);
    momentum_step(params.atoms, velocity.atoms, grad.atoms, cfg.learning_rate, cfg.momentum);
    momentum_step(params.b_dec, velocity.b_dec, grad.b_dec, cfg.learning_rate, cfg.momentum);
    if (cfg.renormalize_decoder) params.renormalize_atoms();

    if (observer) observer(step, loss, params);
  }
  result.model = params.to_model();
  return result;
}

ReconstructionStats reconstruction_stats(const SaeModel& model, const Tensor2D& data) {
  const auto recon = decode(model, encode(model, data));
  ReconstructionStats s;
  if (data.rows() == 0) return s;
  for (std::size_t t = 0; t < data.rows(); ++t) {
    for (std::size_t k = 0; k < data.cols(); ++k) {
      const double x = data(t, k);
      const double e = recon(t, k) - x;
      s.mse += e * e;
      s.mean_sq_norm += x * x;
    }
  }
  s.mse /= static_cast<double>(data.rows());
  s.mean_sq_norm /= static_cast<double>(data.rows());
  return s;
}

RecoveryReport match_dictionary(const SaeModel& model, const PlantedDictionary& dict, double threshold) {
  const std::size_t d = model.d_model();
  if (dict.d() != d) {
    throw ShapeError("SAE d_model " + std::to_string(d) + " does not match dictionary d " +
                     std::to_string(dict.d()));
  }
  const std::size_t m = model.n_features();
  const std::size_t mt = dict.m_true();

  std::vector<double> col_norm(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) col_norm[j] += double(model.w_dec()(k, j)) * model.w_dec()(k, j);
    col_norm[j] = std::sqrt(col_norm[j]);
  }

  struct Pair {
    double abs_cos;
    double cos;
    std::size_t feature;
    std::size_t direction;
  };
  std::vector<Pair> pairs;
  pairs.reserve(m * mt);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t t = 0; t < mt; ++t) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += double(model.w_dec()(k, j)) * dict.directions()(k, t);
      const double c = col_norm[j] > 0.0 ? dot / col_norm[j] : 0.0;
      pairs.push_back({std::abs(c), c, j, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.abs_cos != b.abs_cos) return a.abs_cos > b.abs_cos;
    if (a.feature != b.feature) return a.feature < b.feature;
    return a.direction < b.direction;
  });

  RecoveryReport report;
  report.threshold = threshold;
  std::vector<bool> used_f(m, false), used_t(mt, false);
  double sum = 0.0;
  for (const auto& p : pairs) {
    if (used_f[p.feature] || used_t[p.direction]) continue;
    used_f[p.feature] = used_t[p.direction] = true;
    report.matches.push_back({p.feature, p.direction, p.cos});
    sum += p.cos;
    if (p.abs_cos >= threshold) ++report.recovered;
    if (report.matches.size() == std::min(m, mt)) break;
  }
  report.mean_cosine = report.matches.empty() ? 0.0 : sum / static_cast<double>(report.matches.size());
  return report;
}

void write_recovery_csv(const RecoveryReport& report, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "feature_index,matched_direction,cosine\n";
  os.precision(9);
  for (const auto& m : report.matches) os << m.feature_index << ',' << m.direction << ',' << m.cosine << '\n';
  write_file_atomic(path, os.str());
}

}  // namespace saedet
