#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "saedet/classify.hpp"
#include "saedet/csv.hpp"
#include "support.hpp"

using namespace saedet;
using saedet::testing::brute_force_threshold_f1;
using saedet::testing::oracle_macro_f1;
using saedet::testing::TempDir;

namespace {

struct Dataset {
  Tensor2D x;
  std::vector<int> y;
};

Dataset xor_data(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n * 2);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = rng.bernoulli(0.5), b = rng.bernoulli(0.5);
    v[2 * i] = static_cast<float>((a ? 1.0 : -1.0) + 0.3 * rng.normal());
    v[2 * i + 1] = static_cast<float>((b ? 1.0 : -1.0) + 0.3 * rng.normal());
    y[i] = a != b ? 1 : 0;
  }
  return {Tensor2D(n, 2, v), y};
}

double train_f1(const GbdtModel& m, const Dataset& d) {
  std::vector<int> pred(d.y.size());
  for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = m.predict(d.x.row(i));
  return macro_f1(pred, d.y);
}

// Corpus with two machine models and humans across two domains; doc i gets
// a pooled row from `row(doc)`.
struct TableCorpus {
  Corpus corpus;
  FeatureTable table;
};

template <typename RowFn>
TableCorpus make_table_corpus(std::size_t per_cell, RowFn row) {
  std::vector<Document> docs;
  std::vector<DocFeatureVector> rows;
  for (const std::string model : {"gptA", "gptB", "human"}) {
    for (const std::string domain : {"news", "wiki"}) {
      for (std::size_t i = 0; i < per_cell; ++i) {
        Document d{model + "-" + domain + "-" + std::to_string(i), "text", model == "human" ? Label::human : Label::machine,
                   domain, model, kAllSplits[i % 4]};
        rows.push_back({d.id, row(d, i)});
        docs.push_back(std::move(d));
      }
    }
  }
  return {Corpus(std::move(docs)), make_feature_table(rows)};
}

}  // namespace

// ---------------------------------------------------------------------------
// macro F1

TEST(MacroF1, PerfectPredictions) {
  const std::vector<int> y{0, 1, 1, 0, 1};
  EXPECT_EQ(macro_f1(y, y), 1.0);
}

TEST(MacroF1, AllMachineOnBalancedLabels) {
  const std::vector<int> pred{1, 1, 1, 1}, y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(macro_f1(pred, y), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(oracle_macro_f1(pred, y), 1.0 / 3.0);
}

TEST(MacroF1, Errors) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(macro_f1(a, b), ShapeError);
  EXPECT_THROW(macro_f1(std::vector<int>{}, std::vector<int>{}), DataError);
  EXPECT_THROW(macro_f1(std::vector<int>{2}, std::vector<int>{1}), ValidationError);
}

TEST(MacroF1Property, MatchesIndependentOracleAndIsPermutationInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(2));
      y[i] = static_cast<int>(rng.below(2));
    }
    const double f = macro_f1(p, y);
    EXPECT_NEAR(f, oracle_macro_f1(p, y), 1e-12);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> pp(n), yy(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = p[perm[i]];
      yy[i] = y[perm[i]];
    }
    EXPECT_EQ(macro_f1(pp, yy), f);
  }
}

TEST(MacroF1, IndependentCoinIsHalf) {
  Rng rng(2);
  std::vector<int> p(1000), y(1000);
  for (std::size_t i = 0; i < 1000; ++i) {
    p[i] = rng.bernoulli(0.5);
    y[i] = rng.bernoulli(0.5);
  }
  const double f = macro_f1(p, y);
  EXPECT_GE(f, 0.4);
  EXPECT_LE(f, 0.6);
}

// ---------------------------------------------------------------------------
// Threshold classifiers

TEST(FitThreshold, SeparableMidpoint) {
  const std::vector<double> v{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y{0, 0, 1, 1};
  const auto fit = fit_threshold(v, y);
  EXPECT_DOUBLE_EQ(fit.classifier.threshold, 0.5);
  EXPECT_EQ(fit.classifier.direction, ThresholdDirection::geq_is_machine);
  EXPECT_EQ(fit.macro_f1, 1.0);
}

TEST(FitThreshold, ConstantFeatureEqualsBestTrivialPredictor) {
  const std::vector<double> v(7, 3.0);
  const std::vector<int> y{0, 0, 0, 1, 1, 1, 1};
  const std::vector<int> all0(7, 0), all1(7, 1);
  EXPECT_DOUBLE_EQ(fit_threshold(v, y).macro_f1, std::max(oracle_macro_f1(all0, y), oracle_macro_f1(all1, y)));
}

TEST(FitThreshold, AntiCorrelatedGivesLeq) {
  const std::vector<double> v{0.9, 0.8, 0.2, 0.1};
  const std::vector<int> y{0, 0, 1, 1};
  const auto fit = fit_threshold(v, y);
  EXPECT_EQ(fit.classifier.direction, ThresholdDirection::leq_is_machine);
  EXPECT_EQ(fit.macro_f1, 1.0);
  std::vector<double> neg(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
  const auto flipped = fit_threshold(neg, y);
  EXPECT_EQ(flipped.classifier.direction, ThresholdDirection::geq_is_machine);
  EXPECT_EQ(flipped.macro_f1, fit.macro_f1);
}

TEST(FitThreshold, Errors) {
  EXPECT_THROW(fit_threshold(std::vector<double>{1, 2}, std::vector<int>{1, 1}), DataError);
  EXPECT_THROW(fit_threshold(std::vector<double>{1, NAN}, std::vector<int>{0, 1}), ValidationError);
  EXPECT_THROW(fit_threshold(std::vector<double>{1}, std::vector<int>{0, 1}), ShapeError);
  EXPECT_THROW(parse_threshold_direction("sideways"), ParseError);
}

TEST(ThresholdCandidates, SentinelsAndMidpoints) {
  const auto c = threshold_candidates(std::vector<double>{2.0, 0.0, 2.0, 1.0});
  EXPECT_EQ(c, (std::vector<double>{-1.0, 0.5, 1.5, 4.0}));
}

TEST(FitThresholdProperty, EqualsBruteForce) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> v(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.bernoulli(0.3) ? static_cast<double>(rng.below(5)) : rng.normal();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    const auto fit = fit_threshold(v, y);
    EXPECT_NEAR(fit.macro_f1, brute_force_threshold_f1(v, y), 1e-12);
    std::vector<int> pred(n);
    for (std::size_t i = 0; i < n; ++i) pred[i] = fit.classifier.predict(v[i]);
    EXPECT_NEAR(oracle_macro_f1(pred, y), fit.macro_f1, 1e-12);
  }
}

TEST(FitThresholdProperty, InvariantUnderIncreasingTransform) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> v(n), w(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.normal();
      w[i] = std::exp(2.0 * v[i]) + 5.0;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(fit_threshold(v, y).macro_f1, fit_threshold(w, y).macro_f1, 1e-12);
  }
}

// ---------------------------------------------------------------------------
// Subsets

TEST(Subsets, ModelSubsetPairsWithSameDomainHumans) {
  const Corpus c({{"a", "t", Label::machine, "news", "gpt", Split::train},
                  {"b", "t", Label::human, "news", "human", Split::train},
                  {"c", "t", Label::human, "wiki", "human", Split::dev},
                  {"d", "t", Label::machine, "wiki", "llama", Split::dev}});
  const auto subsets = make_subsets(c, Grouping::model);
  ASSERT_EQ(subsets.size(), 2u);
  EXPECT_EQ(subsets[0].id, "gpt");
  EXPECT_EQ(subsets[0].docs, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(subsets[1].id, "llama");
  EXPECT_EQ(subsets[1].docs, (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(make_subsets(c, Grouping::split).size(), 4u);
  EXPECT_EQ(make_subsets(c, Grouping::domain, Split::dev).size(), 1u);
  EXPECT_THROW(parse_grouping("layer"), ConfigError);
}

TEST(SubsetEval, SeparableSingleSubset) {
  std::vector<Document> docs;
  std::vector<DocFeatureVector> rows;
  for (int i = 0; i < 20; ++i) {
    const bool machine = i % 2;
    docs.push_back({"d" + std::to_string(i), "t", machine ? Label::machine : Label::human, "news",
                    machine ? "gpt" : "human", Split::train});
    rows.push_back({docs.back().id, {machine ? 1.0f + i : -1.0f - i}});
  }
  const Corpus c(docs);
  SubsetEvalOptions opts;
  opts.grouping = Grouping::domain;
  const auto out = evaluate_threshold_subsets(c, make_feature_table(rows), opts);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].subset, "news");
  EXPECT_EQ(*out[0].macro_f1, 1.0);
  EXPECT_TRUE(out[0].cross_validated);
  const auto csv = parse_csv(subset_scores_csv(out));
  EXPECT_EQ(csv[0][0], "feature_index");
  EXPECT_EQ(csv.size(), 2u);
}

TEST(SubsetEval, GeneralFeatureLeadsEverySubsetSpecificFeatureOnlyItsOwn) {
  Rng rng(5);
  const auto tc = make_table_corpus(60, [&](const Document& d, std::size_t) {
    const bool machine = d.label == Label::machine;
    std::vector<float> r(6);
    r[0] = static_cast<float>((machine ? 2.0 : 0.0) + 0.1 * rng.normal());         // general
    r[1] = static_cast<float>((d.model == "gptA" ? 1.0 : 0.0) + 0.4 * rng.normal());  // gptA only
    r[2] = static_cast<float>((d.model == "gptB" ? 1.0 : 0.0) + 0.4 * rng.normal());  // gptB only
    for (std::size_t j = 3; j < 6; ++j) r[j] = static_cast<float>(rng.normal());
    return r;
  });
  SubsetEvalOptions opts;
  opts.grouping = Grouping::model;
  const auto rows = evaluate_threshold_subsets(tc.corpus, tc.table, opts);
  std::map<std::string, std::vector<std::pair<double, std::size_t>>> ranking;
  for (const auto& r : rows) ranking[r.subset].push_back({*r.macro_f1, r.feature_index});
  ASSERT_EQ(ranking.size(), 2u);
  for (auto& [subset, scores] : ranking) {
    std::sort(scores.begin(), scores.end(), [](auto& a, auto& b) { return a.first > b.first; });
    EXPECT_EQ(scores[0].second, 0u) << subset;
    const std::size_t own = subset == "gptA" ? 1 : 2, other = subset == "gptA" ? 2 : 1;
    EXPECT_EQ(scores[1].second, own) << subset;
    double other_score = 0;
    for (auto& [f, i] : scores) {
      if (i == other) other_score = f;
    }
    EXPECT_LT(other_score, 0.7) << subset;
  }
}

TEST(SubsetEval, ShuffledLabelsNearChance) {
  Rng rng(6);
  const auto tc = make_table_corpus(200, [&](const Document&, std::size_t) {
    std::vector<float> r(5);
    for (auto& v : r) v = static_cast<float>(rng.normal());
    return r;
  });
  SubsetEvalOptions opts;
  opts.grouping = Grouping::domain;
  for (const auto& r : evaluate_threshold_subsets(tc.corpus, tc.table, opts)) {
    EXPECT_GE(r.n_docs, 200u);
    EXPECT_GE(*r.macro_f1, 0.35);
    EXPECT_LE(*r.macro_f1, 0.65);
  }
}

TEST(SubsetEval, SingleClassSubsetHasNullScore) {
  const Corpus c({{"a", "t", Label::machine, "news", "gpt", Split::train},
                  {"b", "t", Label::machine, "news", "gpt", Split::train}});
  SubsetEvalOptions opts;
  opts.grouping = Grouping::domain;
  const auto rows = evaluate_threshold_subsets(c, make_feature_table({{"a", {1}}, {"b", {2}}}), opts);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].macro_f1.has_value());
}

TEST(SubsetEval, MissingFeatureRowIsDataError) {
  const Corpus c({{"a", "t", Label::machine, "news", "gpt", Split::train},
                  {"b", "t", Label::human, "news", "human", Split::train}});
  EXPECT_THROW(evaluate_threshold_subsets(c, make_feature_table({{"a", {1}}}), {}), DataError);
}

// ---------------------------------------------------------------------------
// GBDT

TEST(Gbdt, SeparableSingleFeatureWithinTenRounds) {
  std::vector<float> v;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    v.push_back(static_cast<float>(i));
    y.push_back(i >= 20);
  }
  GbdtParams p;
  p.rounds = 10;
  const auto fit = fit_gbdt(Tensor2D(40, 1, v), y, p);
  EXPECT_EQ(train_f1(fit.model, {Tensor2D(40, 1, v), y}), 1.0);
}

TEST(Gbdt, XorNeedsDepthTwo) {
  const auto d = xor_data(400, 7);
  GbdtParams p;
  p.max_depth = 1;
  EXPECT_LE(train_f1(fit_gbdt(d.x, d.y, p).model, d), 0.6);
  p.max_depth = 2;
  EXPECT_GE(train_f1(fit_gbdt(d.x, d.y, p).model, d), 0.95);
}

TEST(Gbdt, LossNeverIncreases) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto d = xor_data(300, seed);
    for (std::size_t depth : {1, 2, 4}) {
      GbdtParams p;
      p.max_depth = depth;
      const auto fit = fit_gbdt(d.x, d.y, p);
      for (std::size_t r = 1; r < fit.loss_history.size(); ++r) EXPECT_LE(fit.loss_history[r], fit.loss_history[r - 1]);
    }
  }
}

TEST(Gbdt, HeavyRegularisationFallsBackToBaseRate) {
  Rng rng(8);
  const std::size_t n = 300;
  std::vector<float> v(n * 4);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  std::vector<int> y(n);
  for (auto& t : y) t = rng.bernoulli(0.7);
  const Dataset d{Tensor2D(n, 4, v), y};
  const double base = std::max(std::count(y.begin(), y.end(), 1), std::count(y.begin(), y.end(), 0)) / double(n);
  auto accuracy = [&](double lambda) {
    GbdtParams p;
    p.max_depth = 1;
    p.lambda = lambda;
    const auto m = fit_gbdt(d.x, d.y, p).model;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) ok += m.predict(d.x.row(i)) == y[i];
    return ok / double(n);
  };
  EXPECT_NEAR(accuracy(1e9), base, 1e-12);
  EXPECT_GT(accuracy(0.0), base);
}

TEST(Gbdt, ZeroTreesIsSigmoidOfBase) {
  const GbdtModel m({}, 0.1, 0.7, 3);
  const std::vector<float> x{1, 2, 3};
  EXPECT_DOUBLE_EQ(m.predict_proba(x), 1.0 / (1.0 + std::exp(-0.7)));
  EXPECT_THROW(m.margin(std::vector<float>{1}), ShapeError);
}

TEST(Gbdt, SingleSplitTreeIsMonotone) {
  GbdtTree t;
  t.nodes = {{false, 0, 0.5, 1, 2, 0.0, 1.0}, {true, 0, 0, 0, 0, -1.0, 0}, {true, 0, 0, 0, 0, 2.0, 0}};
  const GbdtModel m({t}, 1.0, 0.0, 1);
  double prev = 0.0;
  for (float x = -2.0f; x <= 2.0f; x += 0.25f) {
    const double p = m.predict_proba(std::vector<float>{x});
    EXPECT_GE(p, prev);
    prev = p;
  }
  GbdtTree bad;
  bad.nodes = {{false, 3, 0.5, 1, 2, 0.0, 1.0}, {true}, {true}};
  EXPECT_THROW(GbdtModel({bad}, 1.0, 0.0, 1), ValidationError);
}

TEST(Gbdt, TrainPredictionsReproduceFitMargins) {
  const auto d = xor_data(250, 9);
  const auto fit = fit_gbdt(d.x, d.y, {});
  for (std::size_t i = 0; i < d.y.size(); ++i) EXPECT_EQ(fit.model.margin(d.x.row(i)), fit.train_margins[i]);
}

TEST(Gbdt, Deterministic) {
  const auto d = xor_data(200, 10);
  EXPECT_EQ(fit_gbdt(d.x, d.y, {}).model, fit_gbdt(d.x, d.y, {}).model);
}

TEST(Gbdt, SerializationRoundTrip) {
  TempDir tmp;
  const auto d = xor_data(200, 11);
  const auto m = fit_gbdt(d.x, d.y, {}).model;
  save_gbdt(m, tmp / "m.gbdt");
  const auto back = load_gbdt(tmp / "m.gbdt");
  EXPECT_EQ(back, m);
  EXPECT_EQ(serialize_gbdt(back), serialize_gbdt(m));
  EXPECT_THROW(parse_gbdt("saedet-gbdt 2\n"), ParseError);
  EXPECT_THROW(parse_gbdt(""), ParseError);
}

TEST(Gbdt, ParamValidation) {
  const auto d = xor_data(20, 1);
  GbdtParams p;
  p.max_depth = 0;
  EXPECT_THROW(fit_gbdt(d.x, d.y, p), ConfigError);
  EXPECT_THROW(fit_gbdt(d.x, std::vector<int>(20, 1), {}), DataError);
}

TEST(Importance, OnlyFeatureSevenThenZeroTies) {
  GbdtTree t;
  t.nodes = {{false, 7, 0.5, 1, 2, 0.0, 3.0}, {true, 0, 0, 0, 0, -1.0, 0}, {true, 0, 0, 0, 0, 1.0, 0}};
  const GbdtModel m({t}, 0.1, 0.0, 10);
  const auto imp = feature_importance(m, 1.0);
  ASSERT_EQ(imp.size(), 10u);
  EXPECT_EQ(imp[0].feature, 7u);
  EXPECT_EQ(imp[0].gain, 3.0);
  for (std::size_t r = 1; r < 10; ++r) {
    EXPECT_EQ(imp[r].gain, 0.0);
    EXPECT_EQ(imp[r].feature, r <= 7 ? r - 1 : r);
  }
  EXPECT_EQ(feature_importance(m, 0.1).size(), 1u);
  EXPECT_THROW(feature_importance(m, 0.0), ConfigError);
}

TEST(Importance, PlantedInformativeFeaturesRankFirst) {
  Rng rng(12);
  const std::size_t n = 600, f = 12;
  std::vector<float> v(n * f);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) v[i * f + j] = static_cast<float>(rng.normal());
    const double score = 1.5 * v[i * f + 2] - 1.2 * v[i * f + 5] + 1.0 * v[i * f + 9];
    y[i] = score + 0.3 * rng.normal() > 0;
  }
  GbdtParams p;
  p.max_depth = 3;
  const auto imp = feature_importance(fit_gbdt(Tensor2D(n, f, v), y, p).model, 3.0 / f);
  ASSERT_EQ(imp.size(), 3u);
  std::set<std::size_t> top;
  for (const auto& i : imp) top.insert(i.feature);
  EXPECT_EQ(top, (std::set<std::size_t>{2, 5, 9}));
}

TEST(ProbabilityCut, TunedCutSeparates) {
  const std::vector<double> p{0.1, 0.2, 0.3, 0.35};
  const std::vector<int> y{0, 0, 1, 1};
  const double cut = tune_probability_cut(p, y);
  EXPECT_GT(cut, 0.2);
  EXPECT_LE(cut, 0.3);
}
