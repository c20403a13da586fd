#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

#include "saedet/corpus.hpp"

namespace saedet {

enum class AttackKind {
  article_deletion,
  alt_spelling,
  paragraph_insert,
  case_swap,
  zero_width_space,
  whitespace_insert,
  homoglyph,
  number_shuffle,
  misspelling,
  synonym,
};
inline constexpr std::array<AttackKind, 10> kAllAttackKinds = {
    AttackKind::article_deletion, AttackKind::alt_spelling,      AttackKind::paragraph_insert,
    AttackKind::case_swap,        AttackKind::zero_width_space,  AttackKind::whitespace_insert,
    AttackKind::homoglyph,        AttackKind::number_shuffle,    AttackKind::misspelling,
    AttackKind::synonym};

std::string to_string(AttackKind k);
AttackKind parse_attack_kind(const std::string& s);  // ConfigError on unknown names

struct AttackSpec {
  AttackKind kind = AttackKind::article_deletion;
  double rate = 0.5;  // (0, 1]
  std::uint64_t seed = 0;

  void validate() const;
};

// Lower-case key -> replacement. TSV: two tab-separated columns per line,
// blank lines and lines starting with '#' ignored.
using WordTable = std::unordered_map<std::string, std::string>;
WordTable parse_word_table(std::string_view tsv, const std::string& context = "<wordlist>");
WordTable load_word_table(const std::filesystem::path& path);

struct AttackResources {
  WordTable synonyms;
  WordTable misspellings;
  WordTable us_uk;

  // Tables compiled into the binary from data/wordlists.
  static const AttackResources& builtin();
  // synonyms.tsv, misspellings.tsv, us_uk.tsv from a directory; a missing
  // file falls back to the built-in table.
  static AttackResources load_dir(const std::filesystem::path& dir);
};

// Words are maximal runs of letters (ASCII letters and non-ASCII bytes); the
// table lookups only touch all-ASCII words. Word-level replacements keep the
// source capitalisation (lower, Capitalised, UPPER). Sentence boundaries are
// '.', '!' or '?' followed by whitespace. At rate 1 every eligible site is
// rewritten, so the output differs from the input iff a site exists.
//
//   article_deletion   drop the/a/an plus one adjacent space
//   alt_spelling       US -> UK table
//   paragraph_insert   whitespace after a sentence end becomes "\n\n"
//   case_swap          flip the case of a word's first letter
//   zero_width_space   U+200B between code points: all of them at rate 1,
//                      each with probability rate/2 otherwise
//   whitespace_insert  ' ' between two adjacent non-space code points
//   homoglyph          Latin -> Cyrillic look-alike per homoglyph_table()
//   number_shuffle     permute a digit run (>= 2 distinct digits) so it changes
//   misspelling        correct -> misspelled table
//   synonym            word -> synonym table
//
// Throws ValidationError on empty text.
std::string apply_attack(std::string_view text, const AttackSpec& spec,
                         const AttackResources& resources = AttackResources::builtin());

struct Homoglyph {
  char ascii;
  char32_t confusable;
};
const std::array<Homoglyph, 21>& homoglyph_table();

// Removes U+200B and maps confusables back to ASCII.
std::string undo_character_attacks(std::string_view text);

// Same ids, labels and splits; text attacked with a per-document seed derived
// from spec.seed and the id. DataError if an attack empties a document.
Corpus attack_corpus(const Corpus& clean, const AttackSpec& spec,
                     const AttackResources& resources = AttackResources::builtin());

}  // namespace saedet
