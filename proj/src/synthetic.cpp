#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "saedet/corpus.hpp"
#include "saedet/rng.hpp"

namespace saedet {

std::string to_string(StyleMarker m) {
  switch (m) {
    case StyleMarker::numbered_lists: return "numbered_lists";
    case StyleMarker::formal_connectives: return "formal_connectives";
    case StyleMarker::repetition: return "repetition";
    case StyleMarker::space_before_comma: return "space_before_comma";
    case StyleMarker::long_ellipsis: return "long_ellipsis";
    case StyleMarker::double_linebreak: return "double_linebreak";
    case StyleMarker::triple_linebreak: return "triple_linebreak";
    case StyleMarker::markdown_heading: return "markdown_heading";
  }
  return "numbered_lists";
}

StyleMarker parse_style_marker(const std::string& s) {
  for (StyleMarker m : kAllStyleMarkers) {
    if (to_string(m) == s) return m;
  }
  throw ParseError("unknown style marker '" + s + "'");
}

void SyntheticStyleProfile::validate() const {
  for (StyleMarker m : kAllStyleMarkers) {
    const double p = (*this)[m];
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("probability for " + to_string(m) + " must be in [0,1]");
    }
  }
  if (mean_length_tokens == 0) throw ConfigError("mean_length_tokens must be >= 1");
}

SyntheticStyleProfile SyntheticStyleProfile::preset(const std::string& name) {
  SyntheticStyleProfile p;
  using M = StyleMarker;
  if (name == "plain") return p;
  if (name == "human") {
    p[M::numbered_lists] = 0.02;
    p[M::formal_connectives] = 0.03;
    p[M::repetition] = 0.05;
    p[M::space_before_comma] = 0.3;
    p[M::long_ellipsis] = 0.05;
    p[M::double_linebreak] = 0.1;
    p[M::triple_linebreak] = 0.02;
    p[M::markdown_heading] = 0.01;
    p.mean_length_tokens = 110;
  } else if (name == "gpt-like") {
    p[M::numbered_lists] = 0.7;
    p[M::formal_connectives] = 0.98;
    p[M::repetition] = 0.1;
    p[M::space_before_comma] = 0.02;
    p[M::long_ellipsis] = 0.02;
    p[M::double_linebreak] = 0.9;
    p[M::triple_linebreak] = 0.1;
    p[M::markdown_heading] = 0.5;
    p.mean_length_tokens = 150;
  } else if (name == "llama-like") {
    p[M::numbered_lists] = 0.4;
    p[M::formal_connectives] = 0.5;
    p[M::repetition] = 0.15;
    p[M::space_before_comma] = 0.02;
    p[M::long_ellipsis] = 0.05;
    p[M::double_linebreak] = 0.6;
    p[M::triple_linebreak] = 0.05;
    p[M::markdown_heading] = 0.2;
    p.mean_length_tokens = 140;
  } else if (name == "neox-like") {
    p[M::numbered_lists] = 0.1;
    p[M::formal_connectives] = 0.2;
    p[M::repetition] = 0.4;
    p[M::space_before_comma] = 0.05;
    p[M::long_ellipsis] = 0.5;
    p[M::double_linebreak] = 0.3;
    p[M::triple_linebreak] = 0.1;
    p[M::markdown_heading] = 0.02;
    p.mean_length_tokens = 100;
  } else {
    throw ConfigError("unknown profile preset '" + name + "'");
  }
  return p;
}

nlohmann::json to_json(const SyntheticStyleProfile& p) {
  nlohmann::json j;
  for (StyleMarker m : kAllStyleMarkers) j[to_string(m)] = p[m];
  j["mean_length_tokens"] = p.mean_length_tokens;
  j["seed"] = p.seed;
  return j;
}

SyntheticStyleProfile profile_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("profile must be a JSON object");
  SyntheticStyleProfile p;
  if (j.contains("preset")) p = SyntheticStyleProfile::preset(j["preset"].get<std::string>());
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "preset") continue;
    if (key == "mean_length_tokens") {
      p.mean_length_tokens = it->get<std::size_t>();
    } else if (key == "seed") {
      p.seed = it->get<std::uint64_t>();
    } else {
      try {
        p[parse_style_marker(key)] = it->get<double>();
      } catch (const ParseError&) {
        throw ConfigError("unknown profile key '" + key + "'");
      }
    }
  }
  p.validate();
  return p;
}

std::size_t DocMarkers::count(StyleMarker m) const {
  return static_cast<std::size_t>(
      std::count_if(markers.begin(), markers.end(), [m](const MarkerSpan& s) { return s.marker == m; }));
}

std::string markers_to_jsonl(const std::vector<DocMarkers>& all) {
  std::string out;
  for (const auto& dm : all) {
    nlohmann::ordered_json j;
    j["id"] = dm.id;
    j["markers"] = nlohmann::ordered_json::array();
    for (const auto& s : dm.markers) {
      nlohmann::ordered_json m;
      m["marker"] = to_string(s.marker);
      m["token_start"] = s.token_start;
      m["token_end"] = s.token_end;
      j["markers"].push_back(std::move(m));
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<DocMarkers> parse_markers_jsonl(std::string_view text, const std::string& context) {
  std::vector<DocMarkers> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const std::string where = context + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      DocMarkers dm;
      dm.id = j.at("id").get<std::string>();
      for (const auto& m : j.at("markers")) {
        dm.markers.push_back({parse_style_marker(m.at("marker").get<std::string>()),
                              m.at("token_start").get<std::size_t>(),
                              m.at("token_end").get<std::size_t>()});
      }
      out.push_back(std::move(dm));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return out;
}

void save_markers(const std::vector<DocMarkers>& markers, const std::filesystem::path& path) {
  write_file_atomic(path, markers_to_jsonl(markers));
}

std::vector<DocMarkers> load_markers(const std::filesystem::path& path) {
  return parse_markers_jsonl(read_file_text(path), path.string());
}

std::size_t GenerationSpec::cell_count(const std::string& model) const {
  const auto it = docs_per_cell_by_model.find(model);
  return it == docs_per_cell_by_model.end() ? docs_per_cell : it->second;
}

namespace {

constexpr const char* kCommonWords[] = {
    "the", "the", "a", "an", "of", "and", "to", "in", "is", "that", "for", "it", "with", "as",
    "was", "on", "by", "this", "from", "at", "which", "be", "are", "not", "or", "has", "its",
    "have", "more", "their", "also", "but", "all", "can", "into", "than", "other", "some"};

constexpr const char* kContentWords[] = {
    "model", "system", "water", "river", "market", "village", "engine", "signal", "theory",
    "garden", "patient", "court", "budget", "harbor", "recipe", "planet", "season", "network",
    "museum", "island", "student", "teacher", "protein", "circuit", "poem", "novel", "battle",
    "policy", "finance", "bridge", "forest", "mountain", "storm", "doctor", "contract", "window",
    "kitchen", "letter", "camera", "player", "league", "coach", "method", "sample", "energy",
    "memory", "vector", "matrix", "galaxy", "orbit", "climate", "harvest", "factory", "worker",
    "council", "voter", "senate", "treaty", "border", "castle", "church", "painter", "melody",
    "guitar", "singer", "album", "audience", "review", "journal", "editor", "report", "evidence",
    "witness", "judge", "verdict", "lawyer", "company", "product", "customer", "service", "price",
    "stock", "growth", "crisis", "reform", "history", "empire", "colony", "language", "dialect",
    "grammar", "sentence", "argument", "question", "answer", "problem", "solution", "result",
    "figure", "table", "region", "city", "street", "neighbor", "family", "mother", "father",
    "child", "friend", "stranger", "journey", "ticket", "station", "airport", "flight", "pilot",
    "ocean", "coral", "species", "insect", "bird", "wolf", "horse", "farm", "wheat", "bread",
    "coffee", "sugar", "spice", "flavor", "dinner", "holiday", "festival", "costume", "dance",
    "software", "server", "database", "query", "browser", "device", "battery", "sensor", "robot",
    "quickly", "slowly", "bright", "dark", "ancient", "modern", "large", "small", "careful",
    "strange", "simple", "complex", "early", "late", "strong", "quiet", "famous", "local"};

constexpr const char* kConnectives[] = {"Furthermore", "Moreover", "In addition", "Consequently",
                                        "Therefore", "Additionally"};

constexpr std::size_t kVocabPerDomain = 48;

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

struct ByteMark {
  StyleMarker marker;
  std::size_t begin;
  std::size_t end;
};

struct Sentence {
  std::vector<std::string> words;
  int comma_after = -1;             // plain "word," after this word
  int spaced_comma_after = -1;      // "word ," after this word
  std::string connective;
  std::size_t ellipsis_dots = 0;    // 0 = ordinary full stop

  std::size_t base_tokens() const { return words.size() + (comma_after >= 0 ? 1 : 0) + 1; }

  void render(std::string& out, std::vector<ByteMark>& marks) const {
    std::size_t first = 0;
    if (!connective.empty()) {
      const std::size_t b = out.size();
      out += connective + ",";
      marks.push_back({StyleMarker::formal_connectives, b, out.size()});
      out += ' ';
      out += words[0];
      first = 1;
    } else {
      out += capitalize(words[0]);
      first = 1;
    }
    auto after_word = [&](std::size_t i) {
      if (static_cast<int>(i) == comma_after) out += ',';
      if (static_cast<int>(i) == spaced_comma_after) {
        const std::size_t b = out.size();
        out += " ,";
        marks.push_back({StyleMarker::space_before_comma, b, out.size()});
      }
    };
    after_word(0);
    for (std::size_t i = first; i < words.size(); ++i) {
      out += ' ';
      out += words[i];
      after_word(i);
    }
    if (ellipsis_dots > 0) {
      const std::size_t b = out.size();
      out.append(ellipsis_dots, '.');
      marks.push_back({StyleMarker::long_ellipsis, b, out.size()});
    } else {
      out += '.';
    }
  }
};

struct Block {
  bool line = false;     // heading / list: rendered on its own line(s)
  std::string line_text;
  StyleMarker line_marker = StyleMarker::markdown_heading;
  Sentence sentence;
  bool repeated = false;  // sentence block that duplicates its predecessor
};

class DocBuilder {
 public:
  DocBuilder(Rng& rng, const std::vector<std::string>& vocab) : rng_(rng), vocab_(vocab) {}

  std::string word() {
    if (rng_.bernoulli(0.4)) {
      return kCommonWords[rng_.below(std::size(kCommonWords))];
    }
    return vocab_[rng_.below(vocab_.size())];
  }

  Sentence sentence() {
    Sentence s;
    const std::size_t n = 5 + rng_.below(10);
    for (std::size_t i = 0; i < n; ++i) s.words.push_back(word());
    if (rng_.bernoulli(0.3)) s.comma_after = static_cast<int>(1 + rng_.below(n - 2));
    return s;
  }

  std::string heading() {
    const std::size_t n = 2 + rng_.below(3);
    std::string out = "##";
    for (std::size_t i = 0; i < n; ++i) out += " " + capitalize(word());
    return out;
  }

  std::string numbered_list() {
    const std::size_t items = 2 + rng_.below(3);
    std::string out;
    for (std::size_t i = 0; i < items; ++i) {
      if (i) out += '\n';
      out += std::to_string(i + 1) + ".";
      const std::size_t n = 2 + rng_.below(4);
      for (std::size_t k = 0; k < n; ++k) out += " " + word();
    }
    return out;
  }

 private:
  Rng& rng_;
  const std::vector<std::string>& vocab_;
};

std::vector<std::string> domain_vocabulary(std::uint64_t seed, const std::string& domain) {
  Rng rng(derive_seed(seed, "vocab/" + domain));
  const auto picks = rng.sample_distinct(std::size(kContentWords), kVocabPerDomain);
  std::vector<std::string> out;
  for (auto i : picks) out.emplace_back(kContentWords[i]);
  return out;
}

bool valid_tag(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

std::pair<Document, DocMarkers> generate_document(const std::string& id, const std::string& model,
                                                  const std::string& domain,
                                                  const SyntheticStyleProfile& profile,
                                                  const std::vector<std::string>& vocab,
                                                  std::uint64_t seed) {
  Rng rng(derive_seed(seed ^ splitmix64(profile.seed), id));
  DocBuilder build(rng, vocab);

  const std::size_t mean = profile.mean_length_tokens;
  constexpr std::size_t kMinTokens = 8;
  std::size_t target = mean;
  if (mean > kMinTokens) {
    target = kMinTokens + rng.geometric(1.0 / static_cast<double>(mean - kMinTokens + 1));
  }

  // Which markers fire, and how often.
  std::array<std::size_t, kStyleMarkerCount> want{};
  for (StyleMarker m : kAllStyleMarkers) {
    const bool fire = rng.bernoulli(profile[m]);
    const std::size_t n = 1 + rng.below(2);
    if (fire) want[static_cast<std::size_t>(m)] = n;
  }
  auto wanted = [&](StyleMarker m) { return want[static_cast<std::size_t>(m)]; };

  std::vector<Block> blocks;
  std::size_t tokens = 0;
  while (tokens < target || blocks.size() < 2) {
    Block b;
    b.sentence = build.sentence();
    tokens += b.sentence.base_tokens();
    blocks.push_back(std::move(b));
  }

  // Sentence-level edits on distinct sentences.
  std::vector<std::size_t> order(blocks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto pick_sentences = [&](std::size_t n, auto&& eligible) {
    std::vector<std::size_t> cand;
    for (std::size_t i : order) {
      if (eligible(blocks[i].sentence)) cand.push_back(i);
    }
    rng.shuffle(cand);
    if (cand.size() > n) cand.resize(n);
    return cand;
  };
  for (std::size_t i : pick_sentences(wanted(StyleMarker::formal_connectives),
                                      [](const Sentence& s) { return s.connective.empty(); })) {
    blocks[i].sentence.connective = kConnectives[rng.below(std::size(kConnectives))];
  }
  for (std::size_t i : pick_sentences(wanted(StyleMarker::space_before_comma),
                                      [](const Sentence& s) { return s.spaced_comma_after < 0; })) {
    auto& s = blocks[i].sentence;
    int pos = static_cast<int>(rng.below(s.words.size() - 1));
    if (pos == s.comma_after) pos = (pos + 1) % static_cast<int>(s.words.size() - 1);
    s.spaced_comma_after = pos;
  }
  for (std::size_t i : pick_sentences(wanted(StyleMarker::long_ellipsis),
                                      [](const Sentence& s) { return s.ellipsis_dots == 0; })) {
    blocks[i].sentence.ellipsis_dots = 4 + rng.below(3);
  }

  // Structural blocks.
  for (std::size_t k = 0; k < wanted(StyleMarker::repetition); ++k) {
    const std::size_t i = rng.below(blocks.size());
    if (blocks[i].line) continue;
    Block copy = blocks[i];
    copy.repeated = true;
    blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::move(copy));
  }
  for (std::size_t k = 0; k < wanted(StyleMarker::numbered_lists); ++k) {
    Block b;
    b.line = true;
    b.line_text = build.numbered_list();
    b.line_marker = StyleMarker::numbered_lists;
    blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(1 + rng.below(blocks.size())), std::move(b));
  }
  for (std::size_t k = 0; k < wanted(StyleMarker::markdown_heading); ++k) {
    Block b;
    b.line = true;
    b.line_text = build.heading();
    b.line_marker = StyleMarker::markdown_heading;
    blocks.insert(blocks.begin() + static_cast<std::ptrdiff_t>(rng.below(blocks.size() + 1)), std::move(b));
  }

  // Separators: "\n" next to a line block, otherwise a space unless a
  // line-break marker claims the slot.
  std::vector<std::string> sep(blocks.size(), " ");
  std::vector<std::size_t> free_slots;
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    if (blocks[i].line || blocks[i - 1].line) {
      sep[i] = "\n";
    } else {
      free_slots.push_back(i);
    }
  }
  rng.shuffle(free_slots);
  std::vector<std::pair<std::size_t, StyleMarker>> breaks;
  std::size_t next_slot = 0;
  for (StyleMarker m : {StyleMarker::double_linebreak, StyleMarker::triple_linebreak}) {
    for (std::size_t k = 0; k < wanted(m) && next_slot < free_slots.size(); ++k) {
      const std::size_t slot = free_slots[next_slot++];
      sep[slot] = m == StyleMarker::double_linebreak ? "\n\n" : "\n\n\n";
      breaks.emplace_back(slot, m);
    }
  }

  std::string text;
  std::vector<ByteMark> marks;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i) {
      const std::size_t b = text.size();
      text += sep[i];
      for (const auto& [slot, m] : breaks) {
        if (slot == i) marks.push_back({m, b, text.size()});
      }
    }
    const std::size_t start = text.size();
    if (blocks[i].line) {
      text += blocks[i].line_text;
      marks.push_back({blocks[i].line_marker, start, text.size()});
    } else {
      blocks[i].sentence.render(text, marks);
      if (blocks[i].repeated) marks.push_back({StyleMarker::repetition, start, text.size()});
    }
  }

  // Byte ranges -> token ranges. A range holding no token (a separator) maps
  // to the token right after it.
  const auto spans = tokenize_spans(text);
  DocMarkers dm{id, {}};
  for (const auto& m : marks) {
    std::size_t first = spans.size();
    std::size_t last = 0;
    for (std::size_t t = 0; t < spans.size(); ++t) {
      if (spans[t].end > m.begin && spans[t].begin < m.end) {
        first = std::min(first, t);
        last = t + 1;
      }
    }
    if (first == spans.size()) {
      std::size_t t = 0;
      while (t < spans.size() && spans[t].begin < m.end) ++t;
      if (t == spans.size()) t = spans.empty() ? 0 : spans.size() - 1;
      first = t;
      last = t + 1;
    }
    dm.markers.push_back({m.marker, first, last});
  }
  std::stable_sort(dm.markers.begin(), dm.markers.end(), [](const MarkerSpan& a, const MarkerSpan& b) {
    return a.token_start < b.token_start;
  });

  Document doc;
  doc.id = id;
  doc.text = std::move(text);
  doc.label = model == "human" ? Label::human : Label::machine;
  doc.domain = domain;
  doc.model = model;
  return {std::move(doc), std::move(dm)};
}

}  // namespace

GeneratedCorpus generate_corpus(const GenerationSpec& spec) {
  if (spec.profiles.empty()) throw ConfigError("generation needs at least one profile");
  if (spec.domains.empty()) throw ConfigError("generation needs at least one domain");
  for (const auto& [model, profile] : spec.profiles) {
    if (!valid_tag(model)) throw ConfigError("invalid model tag '" + model + "'");
    profile.validate();
    if (spec.cell_count(model) == 0) throw ConfigError("document count for '" + model + "' must be >= 1");
  }
  for (const auto& domain : spec.domains) {
    if (!valid_tag(domain)) throw ConfigError("invalid domain tag '" + domain + "'");
  }

  constexpr Split kSplitCycle[10] = {Split::train, Split::train, Split::train, Split::train,
                                     Split::train, Split::train, Split::dev,   Split::dev,
                                     Split::devtest, Split::test};
  GeneratedCorpus out;
  for (const auto& [model, profile] : spec.profiles) {
    for (const auto& domain : spec.domains) {
      const auto vocab = domain_vocabulary(spec.seed, domain);
      const std::size_t n = spec.cell_count(model);
      for (std::size_t i = 0; i < n; ++i) {
        char suffix[24];
        std::snprintf(suffix, sizeof suffix, "%05zu", i);
        const std::string id = model + "-" + domain + "-" + suffix;
        auto [doc, markers] = generate_document(id, model, domain, profile, vocab, spec.seed);
        doc.split = kSplitCycle[i % 10];
        out.corpus.add(std::move(doc));
        out.markers.push_back(std::move(markers));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_direction(const std::vector<float>& v, std::size_t d, const std::string& what) {
  if (v.size() != d) {
    throw ConfigError(what + " has length " + std::to_string(v.size()) + ", expected " + std::to_string(d));
  }
  double n = 0.0;
  for (float x : v) n += double(x) * x;
  if (std::abs(std::sqrt(n) - 1.0) > 1e-6) throw ConfigError(what + " is not unit norm");
}

std::vector<float> basis(std::size_t d, std::size_t i) {
  std::vector<float> v(d, 0.0f);
  v[i] = 1.0f;
  return v;
}

}  // namespace

void ToyActivationSpec::validate() const {
  if (d == 0) throw ConfigError("activation width d must be >= 1");
  if (!(base_noise_sigma >= 0.0)) throw ConfigError("base_noise_sigma must be >= 0");
  for (const auto& [m, v] : marker_directions) check_direction(v, d, "direction for " + to_string(m));
  for (const auto& [key, v] : trigger_directions) check_direction(v, d, "trigger direction");
  if (!length_direction.empty()) check_direction(length_direction, d, "length direction");
}

ToyActivationSpec ToyActivationSpec::standard(std::size_t d, double noise_sigma, std::uint64_t seed) {
  if (d <= kZeroWidthAxis) throw ConfigError("standard toy spec needs d > 9");
  ToyActivationSpec spec;
  spec.d = d;
  for (std::size_t i = 0; i < kStyleMarkerCount; ++i) {
    spec.marker_directions[kAllStyleMarkers[i]] = basis(d, i);
  }
  spec.length_direction = basis(d, kLengthAxis);
  spec.trigger_directions.emplace_back("\xE2\x80\x8B", basis(d, kZeroWidthAxis));
  spec.base_noise_sigma = noise_sigma;
  spec.seed = seed;
  return spec;
}

Tensor2D synthesize_activations(const Document& doc, const DocMarkers& markers,
                                const ToyActivationSpec& spec) {
  spec.validate();
  const auto spans = tokenize_spans(doc.text);
  const std::size_t n = spans.size();
  if (n == 0) throw DataError("document '" + doc.id + "' has no tokens");
  const std::size_t d = spec.d;

  Tensor2D out(n, d);
  if (spec.base_noise_sigma > 0.0) {
    Rng rng(derive_seed(spec.seed, doc.id));
    for (auto& v : out.data()) v = static_cast<float>(spec.base_noise_sigma * rng.normal());
  }
  auto add = [&](std::size_t t, const std::vector<float>& dir, float scale) {
    auto r = out.row(t);
    for (std::size_t k = 0; k < d; ++k) r[k] += scale * dir[k];
  };
  for (const auto& m : markers.markers) {
    const auto it = spec.marker_directions.find(m.marker);
    if (it == spec.marker_directions.end()) continue;
    for (std::size_t t = m.token_start; t < std::min(m.token_end, n); ++t) add(t, it->second, 1.0f);
  }
  if (!spec.trigger_directions.empty()) {
    const std::string_view text = doc.text;
    for (std::size_t t = 0; t < n; ++t) {
      const auto tok = text.substr(spans[t].begin, spans[t].end - spans[t].begin);
      for (const auto& [key, dir] : spec.trigger_directions) {
        if (tok.find(key) != std::string_view::npos) add(t, dir, 1.0f);
      }
    }
  }
  if (!spec.length_direction.empty() && spec.length_coupling != 0.0) {
    const auto scale = static_cast<float>(spec.length_coupling * static_cast<double>(n) / 100.0);
    for (std::size_t t = 0; t < n; ++t) add(t, spec.length_direction, scale);
  }
  return out;
}

SaeModel make_identity_like_sae(std::size_t d, std::size_t m, std::uint64_t seed, float encoder_bias) {
  if (m < 2 * d) throw ConfigError("identity-like SAE needs n_features >= 2 * d_model");
  Tensor2D w_enc(m, d);
  for (std::size_t i = 0; i < d; ++i) {
    w_enc(i, i) = 1.0f;
    w_enc(d + i, i) = -1.0f;
  }
  Rng rng(derive_seed(seed, "identity-like-sae"));
  for (std::size_t j = 2 * d; j < m; ++j) {
    std::vector<double> v(d);
    double n = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      n += x * x;
    }
    n = std::sqrt(n);
    for (std::size_t k = 0; k < d; ++k) w_enc(j, k) = static_cast<float>(v[k] / n);
  }
  Tensor2D w_dec(d, m);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < d; ++k) w_dec(k, j) = w_enc(j, k);
  }
  return SaeModel(std::move(w_enc), Tensor2D::vector(std::vector<float>(m, encoder_bias)), std::move(w_dec),
                  Tensor2D::zeros_vector(d));
}

}  // namespace saedet
