#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "saedet/cli.hpp"
#include "saedet/corpus.hpp"
#include "saedet/csv.hpp"
#include "saedet/sae.hpp"
#include "saedet/tensor_io.hpp"
#include "support.hpp"

using namespace saedet;
using saedet::testing::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int rc;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = cli::run(args, out, err);
  return {rc, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return files;
}

std::vector<std::vector<std::string>> csv_of(const fs::path& p) { return parse_csv(slurp(p)); }

void gen_small(const fs::path& out, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"gen", "--out", out.string(), "--seed", "3"};
  if (std::find(extra.begin(), extra.end(), "--docs-per-cell") == extra.end()) extra.insert(extra.end(), {"--docs-per-cell", "12"});
  args.insert(args.end(), extra.begin(), extra.end());
  const auto r = run(args);
  ASSERT_EQ(r.rc, 0) << r.err;
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  EXPECT_EQ(run({"--help"}).rc, 0);
  EXPECT_EQ(run({"steer", "--help"}).rc, 0);
}

TEST(Cli, UsageErrorsExitTwo) {
  auto r = run({});
  EXPECT_EQ(r.rc, 2);
  r = run({"gen"});
  EXPECT_EQ(r.rc, 2);
  EXPECT_EQ(r.err.rfind("error[E_USAGE]: ", 0), 0u) << r.err;
  EXPECT_EQ(run({"frobnicate"}).rc, 2);
}

TEST(Cli, LibraryErrorsExitOneWithCode) {
  TempDir tmp;
  auto r = run({"scan", "--corpus", (tmp / "nope.jsonl").string(), "--out", (tmp / "o").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("error[E_IO]: ", 0), 0u) << r.err;

  std::ofstream(tmp / "bad.jsonl") << "{not json\n";
  r = run({"scan", "--corpus", (tmp / "bad.jsonl").string(), "--out", (tmp / "o").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("error[E_PARSE]: ", 0), 0u) << r.err;

  r = run({"attack", "--corpus", (tmp / "bad.jsonl").string(), "--kind", "teleport", "--out", (tmp / "a").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("error[E_CONFIG]: ", 0), 0u) << r.err;
}

TEST(Cli, EmptyCorpusIsDataError) {
  TempDir tmp;
  std::ofstream(tmp / "empty.jsonl") << "";
  const auto r = run({"scan", "--corpus", (tmp / "empty.jsonl").string(), "--out", (tmp / "o").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(r.err.rfind("error[E_DATA]: ", 0), 0u) << r.err;
}

TEST(Cli, GenIsByteIdenticalAcrossRuns) {
  TempDir a, b;
  gen_small(a.path());
  gen_small(b.path());
  const auto ta = tree(a.path()), tb = tree(b.path());
  EXPECT_EQ(ta, tb);
  EXPECT_TRUE(ta.count("corpus.jsonl"));
  EXPECT_TRUE(ta.count("markers.jsonl"));
  EXPECT_TRUE(ta.count("gen_manifest.json"));
  EXPECT_TRUE(ta.count("activations/gpt-news-00000.L0.saet"));
  EXPECT_TRUE(ta.count("activations/gpt-news-00000.L0.meta.json"));
}

TEST(Cli, PipelineIsIdempotent) {
  TempDir tmp;
  gen_small(tmp.path());
  const auto corpus = (tmp / "corpus.jsonl").string();
  for (const char* dir : {"r1", "r2"}) {
    const auto base = tmp / dir;
    ASSERT_EQ(run({"encode-pool", "--corpus", corpus, "--acts", (tmp / "activations").string(), "--sae",
                   (tmp / "sae").string(), "--out", (base / "pooled.saet").string()})
                  .rc,
              0);
    ASSERT_EQ(run({"train-eval", "--corpus", corpus, "--features", (base / "pooled.saet").string(), "--out",
                   (base / "eval").string(), "--rounds", "10"})
                  .rc,
              0);
    ASSERT_EQ(run({"sweep-thresholds", "--corpus", corpus, "--features", (base / "pooled.saet").string(), "--out",
                   (base / "sweep").string()})
                  .rc,
              0);
    ASSERT_EQ(run({"report", "--scores", (base / "sweep" / "subset_scores.csv").string(), "--out",
                   (base / "heatmap.csv").string(), "--top", "5"})
                  .rc,
              0);
  }
  EXPECT_EQ(tree(tmp / "r1"), tree(tmp / "r2"));
  const auto heat = csv_of(tmp / "r1" / "heatmap.csv");
  EXPECT_EQ(heat.size(), 6u);
  EXPECT_TRUE(fs::exists(tmp / "r1" / "heatmap.jsonl"));
  EXPECT_TRUE(fs::exists(tmp / "r1" / "eval" / "model.gbdt"));
  EXPECT_TRUE(fs::exists(tmp / "r1" / "eval" / "importance.csv"));
}

TEST(Cli, EncodePoolMatchesLibrary) {
  TempDir tmp;
  gen_small(tmp.path(), {"--domains", "news", "--profiles", "human=human"});
  const auto corpus_path = (tmp / "corpus.jsonl").string();
  for (const std::string pooling : {"sum", "mean"}) {
    const auto out = tmp / ("pooled_" + pooling + ".saet");
    ASSERT_EQ(run({"encode-pool", "--corpus", corpus_path, "--acts", (tmp / "activations").string(), "--sae",
                   (tmp / "sae").string(), "--pooling", pooling, "--out", out.string()})
                  .rc,
              0);
    const auto table = read_feature_table(out);
    const auto sae = load_sae(tmp / "sae");
    const auto corpus = load_corpus(corpus_path);
    ASSERT_EQ(table.n_docs(), corpus.size());
    for (std::size_t i = 0; i < 3; ++i) {
      const auto acts = read_tensor(cli::activation_path(tmp / "activations", corpus[i].id, 0));
      const auto feats = encode(sae, acts);
      const auto row = table.row(corpus[i].id);
      for (std::size_t j = 0; j < sae.n_features(); ++j) {
        double sum = 0.0;
        for (std::size_t t = 0; t < feats.n_tokens(); ++t) sum += feats(t, j);
        const double expected = pooling == "sum" ? sum : sum / static_cast<double>(feats.n_tokens());
        EXPECT_NEAR(row[j], expected, 1e-5 * std::max(1.0, std::abs(expected)));
      }
    }
  }
}

TEST(Cli, EncodePoolListsMissingActivations) {
  TempDir tmp;
  gen_small(tmp.path(), {"--no-activations", "--sae-features", "0"});
  fs::create_directories(tmp / "acts");
  const auto r = run({"encode-pool", "--corpus", (tmp / "corpus.jsonl").string(), "--acts", (tmp / "acts").string(),
                      "--raw", "--out", (tmp / "p.saet").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("E_DATA"), std::string::npos);
  EXPECT_NE(r.err.find("gpt-news-00000"), std::string::npos);
}

TEST(Cli, ScanOnMarkerFreeCorpusIsAllZero) {
  TempDir tmp;
  gen_small(tmp.path(), {"--profiles", "human=plain,gpt=plain", "--no-activations", "--sae-features", "0"});
  ASSERT_EQ(run({"scan", "--corpus", (tmp / "corpus.jsonl").string(), "--out", (tmp / "scan").string()}).rc, 0);
  const auto rows = csv_of(tmp / "scan" / "frequency.csv");
  ASSERT_GT(rows.size(), 1u);
  const auto& header = rows[0];
  const auto frac = std::find(header.begin(), header.end(), "fraction_at_least_once") - header.begin();
  const auto mean = std::find(header.begin(), header.end(), "mean_count") - header.begin();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_EQ(std::stod(rows[r][frac]), 0.0);
    EXPECT_EQ(std::stod(rows[r][mean]), 0.0);
  }
  EXPECT_TRUE(fs::exists(tmp / "scan" / "frequency.jsonl"));
}

TEST(Cli, SteerEmitsFourteenVariantsPerInput) {
  TempDir tmp;
  gen_small(tmp.path(), {"--domains", "news", "--docs-per-cell", "2"});
  const auto r = run({"steer", "--sae", (tmp / "sae").string(), "--inputs", (tmp / "activations").string(),
                      "--features", "3", "--out", (tmp / "steer").string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  std::size_t n_inputs = 0;
  for (const auto& e : fs::directory_iterator(tmp / "activations")) n_inputs += e.path().extension() == ".saet";
  std::size_t n_out = 0;
  for (const auto& e : fs::directory_iterator(tmp / "steer" / "steered")) n_out += e.path().extension() == ".saet";
  EXPECT_EQ(n_inputs, 4u);
  EXPECT_EQ(n_out, 14 * n_inputs);
  EXPECT_EQ(csv_of(tmp / "steer" / "steering_manifest.csv").size(), 15u);
  EXPECT_EQ(csv_of(tmp / "steer" / "steer_outputs.csv").size(), 1 + 14 * n_inputs);
  EXPECT_TRUE(fs::exists(tmp / "steer" / "steering_prompt.txt"));
}

TEST(Cli, SteerZeroShiftIsIdentity) {
  TempDir tmp;
  gen_small(tmp.path(), {"--domains", "news", "--docs-per-cell", "1"});
  const auto input = tmp / "activations" / "gpt-news-00000.L0.saet";
  ASSERT_EQ(run({"steer", "--sae", (tmp / "sae").string(), "--inputs", input.string(), "--features", "0,5",
                 "--shifts", "0", "--out", (tmp / "steer").string()})
                .rc,
            0);
  for (const char* f : {"0", "5"}) {
    const auto out = tmp / "steer" / "steered" / (std::string("gpt-news-00000.L0.f") + f + ".s+0.saet");
    EXPECT_EQ(slurp(out), slurp(input)) << out;
  }
}

TEST(Cli, SteerRejectsOutOfRangeFeature) {
  TempDir tmp;
  gen_small(tmp.path(), {"--domains", "news", "--docs-per-cell", "1"});
  const auto r = run({"steer", "--sae", (tmp / "sae").string(), "--inputs", (tmp / "activations").string(),
                      "--features", "999", "--out", (tmp / "steer").string()});
  EXPECT_EQ(r.rc, 1);
  EXPECT_NE(r.err.find("E_CONFIG"), std::string::npos);
}

TEST(Cli, SensitivityLengthRecoversPlantedFeature) {
  TempDir tmp;
  const auto r = run({"gen", "--out", tmp.path().string(), "--profiles", "human=human", "--domains", "a,b,c",
                      "--docs-per-cell", "120", "--length-coupling", "0.5", "--sae-bias", "0", "--seed", "4"});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto corpus = (tmp / "corpus.jsonl").string();
  ASSERT_EQ(run({"encode-pool", "--corpus", corpus, "--acts", (tmp / "activations").string(), "--sae",
                 (tmp / "sae").string(), "--out", (tmp / "pooled.saet").string()})
                .rc,
            0);
  const auto s = run({"sensitivity", "length", "--corpus", corpus, "--features", (tmp / "pooled.saet").string(),
                      "--out", (tmp / "sens").string()});
  ASSERT_EQ(s.rc, 0) << s.err;
  const auto rows = csv_of(tmp / "sens" / "sensitivity_length.csv");
  bool found = false;
  std::size_t rank0_hits = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] == "intersection" && rows[i][2] == std::to_string(kLengthAxis)) found = true;
    if (rows[i][0] != "intersection" && rows[i][1] == "1" && rows[i][2] == std::to_string(kLengthAxis)) ++rank0_hits;
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(rank0_hits, 3u);
}

TEST(Cli, ThresholdModeWritesScoresPerFeatureAndSplit) {
  TempDir tmp;
  gen_small(tmp.path());
  const auto corpus = (tmp / "corpus.jsonl").string();
  ASSERT_EQ(run({"encode-pool", "--corpus", corpus, "--acts", (tmp / "activations").string(), "--sae",
                 (tmp / "sae").string(), "--out", (tmp / "pooled.saet").string()})
                .rc,
            0);
  const auto r = run({"train-eval", "--mode", "thresholds", "--corpus", corpus, "--features",
                      (tmp / "pooled.saet").string(), "--out", (tmp / "t").string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  const auto rows = csv_of(tmp / "t" / "threshold_scores.csv");
  ASSERT_GT(rows.size(), 1u);
  EXPECT_EQ(rows[0][0], "feature_index");
  // 64 features x (3 domains + 1 model subset) x 4 splits
  EXPECT_EQ(rows.size() - 1, 64u * 4u * 4u);
}

TEST(Cli, AttackProducesAlignedCorpus) {
  TempDir tmp;
  gen_small(tmp.path(), {"--no-activations", "--sae-features", "0"});
  const auto out = tmp / "attacked.jsonl";
  ASSERT_EQ(run({"attack", "--corpus", (tmp / "corpus.jsonl").string(), "--kind", "zero_width_space", "--rate", "1",
                 "--out", out.string()})
                .rc,
            0);
  const auto clean = load_corpus(tmp / "corpus.jsonl");
  const auto attacked = load_corpus(out);
  ASSERT_EQ(clean.size(), attacked.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    EXPECT_EQ(clean[i].id, attacked[i].id);
    EXPECT_NE(attacked[i].text.find("\xE2\x80\x8B"), std::string::npos);
  }
}

TEST(Cli, MissingOutputDirectoryIsCreated) {
  TempDir tmp;
  gen_small(tmp.path(), {"--no-activations", "--sae-features", "0"});
  const auto deep = tmp / "x" / "y" / "z";
  ASSERT_EQ(run({"scan", "--corpus", (tmp / "corpus.jsonl").string(), "--out", deep.string()}).rc, 0);
  EXPECT_TRUE(fs::exists(deep / "frequency.csv"));
}

TEST(Cli, ConfigFileSuppliesOptions) {
  TempDir tmp;
  std::ofstream(tmp / "gen.toml") << "[gen]\ndocs-per-cell = 2\ndomains = [\"news\"]\nno-activations = true\nsae-features = 0\n";
  const auto r = run({"--config", (tmp / "gen.toml").string(), "gen", "--out", (tmp / "o").string()});
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(load_corpus(tmp / "o" / "corpus.jsonl").size(), 4u);
}

TEST(ActivationPath, RejectsUnsafeIds) {
  for (const std::string& bad : std::vector<std::string>{"", ".", "..", "a/b", "a\\b", std::string("a\0b", 3)}) {
    EXPECT_THROW(cli::activation_path("acts", bad, 0), DataError) << bad;
  }
  EXPECT_EQ(cli::activation_path("acts", "doc-1", 12), fs::path("acts") / "doc-1.L12.saet");
}
