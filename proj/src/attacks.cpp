#include "saedet/attacks.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "saedet/rng.hpp"
#include "saedet/utf8.hpp"

namespace saedet {

namespace detail {
extern const char* const kSynonymsTsv;
extern const char* const kMisspellingsTsv;
extern const char* const kUsUkTsv;
}  // namespace detail

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::article_deletion: return "article_deletion";
    case AttackKind::alt_spelling: return "alt_spelling";
    case AttackKind::paragraph_insert: return "paragraph_insert";
    case AttackKind::case_swap: return "case_swap";
    case AttackKind::zero_width_space: return "zero_width_space";
    case AttackKind::whitespace_insert: return "whitespace_insert";
    case AttackKind::homoglyph: return "homoglyph";
    case AttackKind::number_shuffle: return "number_shuffle";
    case AttackKind::misspelling: return "misspelling";
    case AttackKind::synonym: return "synonym";
  }
  return "article_deletion";
}

AttackKind parse_attack_kind(const std::string& s) {
  for (AttackKind k : kAllAttackKinds) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown attack kind '" + s + "'");
}

void AttackSpec::validate() const {
  if (!(rate > 0.0 && rate <= 1.0)) {
    throw ConfigError("attack rate must be in (0, 1], got " + std::to_string(rate));
  }
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ascii_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_word_byte(char c) { return is_ascii_letter(c) || static_cast<unsigned char>(c) >= 0x80; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string match_case(std::string_view source, std::string replacement) {
  const bool first_upper = std::isupper(static_cast<unsigned char>(source[0])) != 0;
  const bool all_upper =
      source.size() > 1 && std::all_of(source.begin(), source.end(), [](char c) {
        return std::isupper(static_cast<unsigned char>(c)) != 0;
      });
  if (all_upper) {
    for (auto& c : replacement) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  } else if (first_upper && !replacement.empty()) {
    replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
  }
  return replacement;
}

// Calls fn(word, out) for each maximal word (ASCII letters and non-ASCII
// bytes); fn appends the replacement. Everything else is copied through.
template <typename Fn>
std::string rewrite_words(std::string_view text, Fn&& fn) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_byte(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(text[j])) ++j;
    i = fn(text.substr(i, j - i), j, out);
  }
  return out;
}

bool ascii_word(std::string_view w) { return std::all_of(w.begin(), w.end(), is_ascii_letter); }

std::string table_attack(std::string_view text, const WordTable& table, double rate, Rng& rng) {
  return rewrite_words(text, [&](std::string_view w, std::size_t end, std::string& out) {
    if (ascii_word(w)) {
      const auto it = table.find(lower(w));
      if (it != table.end() && rng.bernoulli(rate)) {
        out += match_case(w, it->second);
        return end;
      }
    }
    out += w;
    return end;
  });
}

std::string article_deletion(std::string_view text, double rate, Rng& rng) {
  return rewrite_words(text, [&](std::string_view w, std::size_t end, std::string& out) {
    const std::string lw = lower(w);
    if ((lw == "the" || lw == "a" || lw == "an") && rng.bernoulli(rate)) {
      if (end < text.size() && text[end] == ' ') return end + 1;
      if (!out.empty() && out.back() == ' ') out.pop_back();
      return end;
    }
    out += w;
    return end;
  });
}

std::string case_swap(std::string_view text, double rate, Rng& rng) {
  return rewrite_words(text, [&](std::string_view w, std::size_t end, std::string& out) {
    std::string word(w);
    const auto c = static_cast<unsigned char>(word[0]);
    if (is_ascii_letter(word[0]) && rng.bernoulli(rate)) {
      word[0] = static_cast<char>(std::isupper(c) ? std::tolower(c) : std::toupper(c));
    }
    out += word;
    return end;
  });
}

std::string paragraph_insert(std::string_view text, double rate, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    out += c;
    ++i;
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i;
    while (j < text.size()) {
      const auto [cp, len] = utf8::decode(text, j);
      if (!utf8::is_space(cp)) break;
      j += len;
    }
    if (j == i) continue;
    const auto run = text.substr(i, j - i);
    if (run != "\n\n" && rng.bernoulli(rate)) {
      out += "\n\n";
    } else {
      out += run;
    }
    i = j;
  }
  return out;
}

constexpr std::string_view kZeroWidth = "\xE2\x80\x8B";

std::string zero_width_space(std::string_view text, double rate, Rng& rng) {
  const auto cps = utf8::code_points(text);
  std::string out;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    if (k > 0 && (rate >= 1.0 || rng.bernoulli(rate / 2.0))) out += kZeroWidth;
    out += cps[k];
  }
  return out;
}

bool space_slice(std::string_view cp) { return utf8::is_space(utf8::decode(cp, 0).first); }

std::string whitespace_insert(std::string_view text, double rate, Rng& rng) {
  const auto cps = utf8::code_points(text);
  std::string out;
  for (std::size_t k = 0; k < cps.size(); ++k) {
    if (k > 0 && !space_slice(cps[k - 1]) && !space_slice(cps[k]) && rng.bernoulli(rate)) out += ' ';
    out += cps[k];
  }
  return out;
}

constexpr std::array<Homoglyph, 21> kHomoglyphs = {{
    {'a', 0x0430}, {'c', 0x0441}, {'e', 0x0435}, {'o', 0x043E}, {'p', 0x0440}, {'x', 0x0445},
    {'y', 0x0443}, {'i', 0x0456}, {'j', 0x0458}, {'s', 0x0455}, {'A', 0x0410}, {'B', 0x0412},
    {'C', 0x0421}, {'E', 0x0415}, {'H', 0x041D}, {'K', 0x041A}, {'M', 0x041C}, {'O', 0x041E},
    {'P', 0x0420}, {'T', 0x0422}, {'X', 0x0425},
}};

std::string homoglyph(std::string_view text, double rate, Rng& rng) {
  std::string out;
  for (char c : text) {
    const auto it = std::find_if(kHomoglyphs.begin(), kHomoglyphs.end(),
                                 [c](const Homoglyph& h) { return h.ascii == c; });
    if (it != kHomoglyphs.end() && rng.bernoulli(rate)) {
      utf8::append(out, it->confusable);
    } else {
      out += c;
    }
  }
  return out;
}

std::string number_shuffle(std::string_view text, double rate, Rng& rng) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_digit(text[i])) {
      out += text[i++];
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_digit(text[j])) ++j;
    std::string run(text.substr(i, j - i));
    const bool eligible = std::any_of(run.begin(), run.end(), [&](char c) { return c != run[0]; });
    if (eligible && rng.bernoulli(rate)) {
      std::vector<char> digits(run.begin(), run.end());
      std::string shuffled = run;
      while (shuffled == run) {
        rng.shuffle(digits);
        shuffled.assign(digits.begin(), digits.end());
      }
      run = std::move(shuffled);
    }
    out += run;
    i = j;
  }
  return out;
}

}  // namespace

WordTable parse_word_table(std::string_view tsv, const std::string& context) {
  WordTable table;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < tsv.size()) {
    const std::size_t nl = tsv.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? tsv.size() : nl;
    ++line_no;
    std::string_view line = tsv.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 >= line.size() ||
        line.find('\t', tab + 1) != std::string_view::npos) {
      throw ParseError(context + ":" + std::to_string(line_no) + ": expected two tab-separated columns");
    }
    table[lower(line.substr(0, tab))] = std::string(line.substr(tab + 1));
  }
  return table;
}

WordTable load_word_table(const std::filesystem::path& path) {
  return parse_word_table(read_file_text(path), path.string());
}

const AttackResources& AttackResources::builtin() {
  static const AttackResources r{parse_word_table(detail::kSynonymsTsv, "synonyms.tsv"),
                                 parse_word_table(detail::kMisspellingsTsv, "misspellings.tsv"),
                                 parse_word_table(detail::kUsUkTsv, "us_uk.tsv")};
  return r;
}

AttackResources AttackResources::load_dir(const std::filesystem::path& dir) {
  AttackResources r = builtin();
  auto maybe = [&](const char* name, WordTable& table) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) table = load_word_table(p);
  };
  maybe("synonyms.tsv", r.synonyms);
  maybe("misspellings.tsv", r.misspellings);
  maybe("us_uk.tsv", r.us_uk);
  return r;
}

const std::array<Homoglyph, 21>& homoglyph_table() { return kHomoglyphs; }

std::string apply_attack(std::string_view text, const AttackSpec& spec, const AttackResources& resources) {
  spec.validate();
  if (text.empty()) throw ValidationError("cannot attack an empty text");
  Rng rng(derive_seed(spec.seed, to_string(spec.kind)));
  const double r = spec.rate;
  switch (spec.kind) {
    case AttackKind::article_deletion: return article_deletion(text, r, rng);
    case AttackKind::alt_spelling: return table_attack(text, resources.us_uk, r, rng);
    case AttackKind::paragraph_insert: return paragraph_insert(text, r, rng);
    case AttackKind::case_swap: return case_swap(text, r, rng);
    case AttackKind::zero_width_space: return zero_width_space(text, r, rng);
    case AttackKind::whitespace_insert: return whitespace_insert(text, r, rng);
    case AttackKind::homoglyph: return homoglyph(text, r, rng);
    case AttackKind::number_shuffle: return number_shuffle(text, r, rng);
    case AttackKind::misspelling: return table_attack(text, resources.misspellings, r, rng);
    case AttackKind::synonym: return table_attack(text, resources.synonyms, r, rng);
  }
  throw ConfigError("unknown attack kind");
}

std::string undo_character_attacks(std::string_view text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto [cp, len] = utf8::decode(text, pos);
    const auto slice = text.substr(pos, len);
    pos += len;
    if (slice == kZeroWidth) continue;
    const auto it = std::find_if(kHomoglyphs.begin(), kHomoglyphs.end(),
                                 [cp = cp](const Homoglyph& h) { return h.confusable == cp; });
    if (it != kHomoglyphs.end()) {
      out += it->ascii;
    } else {
      out += slice;
    }
  }
  return out;
}

Corpus attack_corpus(const Corpus& clean, const AttackSpec& spec, const AttackResources& resources) {
  spec.validate();
  Corpus out;
  for (const auto& doc : clean) {
    AttackSpec per_doc = spec;
    per_doc.seed = derive_seed(spec.seed, doc.id);
    Document d = doc;
    d.text = apply_attack(doc.text, per_doc, resources);
    if (d.text.empty()) throw DataError("attack " + to_string(spec.kind) + " emptied document '" + doc.id + "'");
    out.add(std::move(d));
  }
  return out;
}

}  // namespace saedet
