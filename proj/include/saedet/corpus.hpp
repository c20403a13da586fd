#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "saedet/sae.hpp"
#include "saedet/tensor_io.hpp"

namespace saedet {

enum class Label { human = 0, machine = 1 };
enum class Split { train, dev, devtest, test };

std::string to_string(Label l);
std::string to_string(Split s);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);
inline constexpr std::array<Split, 4> kAllSplits = {Split::train, Split::dev, Split::devtest, Split::test};

struct Document {
  std::string id;
  std::string text;
  Label label = Label::human;
  std::string domain;
  std::string model;  // generator tag, "human" for human-written text
  Split split = Split::train;

  friend bool operator==(const Document&, const Document&) = default;
};

// Ordered document collection with unique ids.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Document> docs);

  // Throws ValidationError on an empty text or a duplicate id.
  void add(Document doc);

  std::size_t size() const noexcept { return docs_.size(); }
  bool empty() const noexcept { return docs_.empty(); }
  const Document& operator[](std::size_t i) const { return docs_[i]; }
  const std::vector<Document>& docs() const noexcept { return docs_; }
  auto begin() const noexcept { return docs_.begin(); }
  auto end() const noexcept { return docs_.end(); }

  const Document* find(const std::string& id) const;

 private:
  std::vector<Document> docs_;
  std::unordered_map<std::string, std::size_t> index_;
};

// JSONL, one {"id","text","label","domain","model","split"} object per line.
// Errors cite the 1-based line number; blank lines are skipped.
Corpus parse_corpus_jsonl(std::string_view text, const std::string& context = "<corpus>");
std::string corpus_to_jsonl(const Corpus& corpus);
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Tokenizer
//
// Byte-level splitter used everywhere a document length is needed:
//   * Unicode whitespace separates tokens and is dropped (ASCII \t\n\v\f\r and
//     space, U+0085, U+00A0, U+1680, U+2000-U+200A, U+2028, U+2029, U+202F,
//     U+205F, U+3000);
//   * a maximal run of ASCII punctuation (!"#$%&'()*+,-./:;<=>?@[\]^_`{|}~) is
//     one token, so "...." and " , " yield "...." and ",";
//   * every other maximal run of bytes (letters, digits, any other code point,
//     including U+200B) is one token.
// Malformed UTF-8 bytes are treated as word characters.

struct TokenSpan {
  std::size_t begin = 0;  // byte offsets into the text, [begin, end)
  std::size_t end = 0;
};

std::vector<TokenSpan> tokenize_spans(std::string_view text);
std::vector<std::string> tokenize(std::string_view text);
std::size_t token_count(std::string_view text);

// ---------------------------------------------------------------------------
// Synthetic corpus generation

enum class StyleMarker {
  numbered_lists,
  formal_connectives,
  repetition,
  space_before_comma,
  long_ellipsis,
  double_linebreak,
  triple_linebreak,
  markdown_heading,
};
inline constexpr std::size_t kStyleMarkerCount = 8;
inline constexpr std::array<StyleMarker, kStyleMarkerCount> kAllStyleMarkers = {
    StyleMarker::numbered_lists,   StyleMarker::formal_connectives, StyleMarker::repetition,
    StyleMarker::space_before_comma, StyleMarker::long_ellipsis,    StyleMarker::double_linebreak,
    StyleMarker::triple_linebreak, StyleMarker::markdown_heading};

std::string to_string(StyleMarker m);
StyleMarker parse_style_marker(const std::string& s);

struct SyntheticStyleProfile {
  std::array<double, kStyleMarkerCount> probability{};  // per-document injection probability
  std::size_t mean_length_tokens = 120;
  std::uint64_t seed = 0;

  double& operator[](StyleMarker m) { return probability[static_cast<std::size_t>(m)]; }
  double operator[](StyleMarker m) const { return probability[static_cast<std::size_t>(m)]; }

  void validate() const;

  // Built-in presets: "human", "gpt-like", "llama-like", "neox-like", "plain".
  static SyntheticStyleProfile preset(const std::string& name);
};

nlohmann::json to_json(const SyntheticStyleProfile& p);
SyntheticStyleProfile profile_from_json(const nlohmann::json& j);

struct MarkerSpan {
  StyleMarker marker;
  std::size_t token_start = 0;  // [token_start, token_end)
  std::size_t token_end = 0;

  friend bool operator==(const MarkerSpan&, const MarkerSpan&) = default;
};

struct DocMarkers {
  std::string id;
  std::vector<MarkerSpan> markers;

  std::size_t count(StyleMarker m) const;
  friend bool operator==(const DocMarkers&, const DocMarkers&) = default;
};

std::string markers_to_jsonl(const std::vector<DocMarkers>& markers);
std::vector<DocMarkers> parse_markers_jsonl(std::string_view text, const std::string& context = "<markers>");
void save_markers(const std::vector<DocMarkers>& markers, const std::filesystem::path& path);
std::vector<DocMarkers> load_markers(const std::filesystem::path& path);

struct GenerationSpec {
  // Model tag -> profile. The tag "human" produces human-labelled documents.
  std::map<std::string, SyntheticStyleProfile> profiles;
  std::vector<std::string> domains;
  std::size_t docs_per_cell = 10;
  std::map<std::string, std::size_t> docs_per_cell_by_model;  // overrides per model tag
  std::uint64_t seed = 0;

  std::size_t cell_count(const std::string& model) const;
};

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<DocMarkers> markers;  // parallel to corpus order
};

// Pure function of the spec. Cells are emitted model-major (map order), then
// domain order; splits cycle 6:2:1:1 train/dev/devtest/test within each cell.
GeneratedCorpus generate_corpus(const GenerationSpec& spec);

// ---------------------------------------------------------------------------
// Toy activations

struct ToyActivationSpec {
  std::size_t d = 32;
  std::map<StyleMarker, std::vector<float>> marker_directions;
  // Any token whose bytes contain the key gets the direction added.
  std::vector<std::pair<std::string, std::vector<float>>> trigger_directions;
  // Every token gets length_coupling * n_tokens / 100 * length_direction.
  std::vector<float> length_direction;
  double length_coupling = 0.0;
  double base_noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;

  // marker i -> e_i (i < 8), length -> e_8, U+200B trigger -> e_9.
  static ToyActivationSpec standard(std::size_t d, double noise_sigma, std::uint64_t seed);
};

inline constexpr std::size_t kLengthAxis = 8;
inline constexpr std::size_t kZeroWidthAxis = 9;

// Token t = N(0, sigma^2 I) + sum of directions of markers whose span covers t
// (+ trigger and length terms). Deterministic per (doc id, spec.seed).
Tensor2D synthesize_activations(const Document& doc, const DocMarkers& markers,
                                const ToyActivationSpec& spec);

// Rows 0..d-1 = e_i, rows d..2d-1 = -e_i, remaining rows random unit vectors;
// W_dec = W_enc^T, b_dec = 0, b_enc = encoder_bias (a negative bias gates
// token noise below |encoder_bias|), ReLU. Requires m >= 2d.
SaeModel make_identity_like_sae(std::size_t d, std::size_t m, std::uint64_t seed, float encoder_bias = 0.0f);

}  // namespace saedet
