#include <gtest/gtest.h>

#include <cctype>

#include "saedet/attacks.hpp"
#include "saedet/utf8.hpp"
#include "support.hpp"

using namespace saedet;
using saedet::testing::TempDir;

namespace {

const std::string kZws = "\xE2\x80\x8B";

std::string letters_only(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

std::string random_text(Rng& rng) {
  static const std::vector<std::string> words{
      "the", "a", "an", "The", "color", "Color", "COLOR", "big", "house", "1234", "77", "908", "recieve",
      "receive", "happy", "Quick", "ZEBRA", "x", "12", "however", "organize", "café", "naïve"};
  static const std::vector<std::string> seps{" ", " ", ", ", ". ", "! ", "\n", "  ", "? "};
  std::string s;
  const auto n = 1 + rng.below(25);
  for (std::size_t i = 0; i < n; ++i) {
    s += words[rng.below(words.size())];
    if (i + 1 < n) s += seps[rng.below(seps.size())];
  }
  return s;
}

}  // namespace

TEST(Attacks, ArticleDeletionAtFullRate) {
  EXPECT_EQ(apply_attack("the cat saw a dog", {AttackKind::article_deletion, 1.0, 0}), "cat saw dog");
  EXPECT_EQ(apply_attack("The end.", {AttackKind::article_deletion, 1.0, 0}), "end.");
}

TEST(Attacks, ZeroWidthEveryOtherCharacter) {
  EXPECT_EQ(apply_attack("abcd", {AttackKind::zero_width_space, 1.0, 0}),
            "a" + kZws + "b" + kZws + "c" + kZws + "d");
}

TEST(Attacks, NumberShuffleFrozenSeed) {
  EXPECT_EQ(apply_attack("call 1234", {AttackKind::number_shuffle, 1.0, 9}), "call 4321");
}

TEST(Attacks, NumberShuffleIgnoresRepeatedDigits) {
  EXPECT_EQ(apply_attack("room 111", {AttackKind::number_shuffle, 1.0, 3}), "room 111");
}

TEST(Attacks, CaseSwap) {
  EXPECT_EQ(apply_attack("Hello world", {AttackKind::case_swap, 1.0, 0}), "hello World");
}

TEST(Attacks, TableReplacementsKeepCase) {
  AttackResources res;
  res.us_uk = {{"color", "colour"}};
  res.synonyms = {{"big", "large"}};
  res.misspellings = {{"receive", "recieve"}};
  EXPECT_EQ(apply_attack("Color color COLOR", {AttackKind::alt_spelling, 1.0, 0}, res), "Colour colour COLOUR");
  EXPECT_EQ(apply_attack("a big Big dog", {AttackKind::synonym, 1.0, 0}, res), "a large Large dog");
  EXPECT_EQ(apply_attack("receive", {AttackKind::misspelling, 1.0, 0}, res), "recieve");
}

TEST(Attacks, ParagraphInsert) {
  EXPECT_EQ(apply_attack("One. Two! Three", {AttackKind::paragraph_insert, 1.0, 0}), "One.\n\nTwo!\n\nThree");
  EXPECT_EQ(apply_attack("One.\n\nTwo", {AttackKind::paragraph_insert, 1.0, 0}), "One.\n\nTwo");
}

TEST(Attacks, WhitespaceInsert) {
  EXPECT_EQ(apply_attack("ab c", {AttackKind::whitespace_insert, 1.0, 0}), "a b c");
}

TEST(Attacks, HomoglyphFullRate) {
  const auto out = apply_attack("pace", {AttackKind::homoglyph, 1.0, 0});
  EXPECT_EQ(out, "\xD1\x80\xD0\xB0\xD1\x81\xD0\xB5");  // Cyrillic р а с е
  EXPECT_EQ(undo_character_attacks(out), "pace");
}

TEST(Attacks, HomoglyphTableIsInjective) {
  std::set<char> ascii;
  std::set<char32_t> glyphs;
  for (const auto& h : homoglyph_table()) {
    ascii.insert(h.ascii);
    glyphs.insert(h.confusable);
    EXPECT_GE(h.confusable, 0x400u);
    EXPECT_LT(h.confusable, 0x500u);
  }
  EXPECT_EQ(ascii.size(), homoglyph_table().size());
  EXPECT_EQ(glyphs.size(), homoglyph_table().size());
}

TEST(Attacks, Errors) {
  EXPECT_THROW(apply_attack("", {AttackKind::case_swap, 1.0, 0}), ValidationError);
  EXPECT_THROW((AttackSpec{AttackKind::case_swap, 0.0, 0}.validate()), ConfigError);
  EXPECT_THROW((AttackSpec{AttackKind::case_swap, 1.5, 0}.validate()), ConfigError);
  EXPECT_THROW(parse_attack_kind("dipper"), ConfigError);
  for (AttackKind k : kAllAttackKinds) EXPECT_EQ(parse_attack_kind(to_string(k)), k);
}

TEST(Attacks, WordTableParsing) {
  const auto t = parse_word_table("# header\n\nColor\tcolour\nbig\tlarge\n");
  EXPECT_EQ(t.at("color"), "colour");
  EXPECT_EQ(t.size(), 2u);
  try {
    parse_word_table("ok\tfine\nbroken line\n", "w.tsv");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("w.tsv:2"), std::string::npos);
  }
}

TEST(Attacks, BuiltinTablesAndDirectoryOverride) {
  const auto& b = AttackResources::builtin();
  EXPECT_GE(b.synonyms.size(), 50u);
  EXPECT_GE(b.misspellings.size(), 50u);
  EXPECT_GE(b.us_uk.size(), 50u);
  TempDir tmp;
  write_file_atomic(tmp / "synonyms.tsv", std::string("cat\tfeline\n"));
  const auto res = AttackResources::load_dir(tmp.path());
  EXPECT_EQ(res.synonyms.size(), 1u);
  EXPECT_EQ(res.us_uk.size(), b.us_uk.size());
  EXPECT_EQ(apply_attack("the cat", {AttackKind::synonym, 1.0, 0}, res), "the feline");
}

TEST(Attacks, CorpusKeepsIdsAndLabels) {
  const Corpus clean({{"a", "the cat", Label::human, "d", "human", Split::dev},
                      {"b", "Some text here", Label::machine, "d", "gpt", Split::test}});
  const auto out = attack_corpus(clean, {AttackKind::case_swap, 1.0, 1});
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out[i].id, clean[i].id);
    EXPECT_EQ(out[i].label, clean[i].label);
    EXPECT_EQ(out[i].split, clean[i].split);
    EXPECT_NE(out[i].text, clean[i].text);
  }
  const Corpus articles({{"a", "the", Label::human, "d", "human", Split::dev}});
  EXPECT_THROW(attack_corpus(articles, {AttackKind::article_deletion, 1.0, 1}), DataError);
}

// At rate 1 the output changes exactly when the text has an eligible site.
TEST(AttacksProperty, DiffersIffEligibleSiteAtFullRate) {
  Rng rng(55);
  const auto& res = AttackResources::builtin();
  for (int trial = 0; trial < 400; ++trial) {
    const std::string text = random_text(rng);
    for (AttackKind k : kAllAttackKinds) {
      const auto out = apply_attack(text, {k, 1.0, rng.next()}, res);
      bool eligible = false;
      std::string word;
      std::vector<std::string> words;
      for (std::size_t i = 0; i <= text.size(); ++i) {
        const bool letter = i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]));
        if (letter) {
          word += text[i];
        } else if (!word.empty()) {
          // A word touching a non-ASCII byte is not an ASCII word.
          const bool touches = (i < text.size() && static_cast<unsigned char>(text[i]) >= 0x80) ||
                               (i - word.size() > 0 && static_cast<unsigned char>(text[i - word.size() - 1]) >= 0x80);
          if (!touches) words.push_back(word);
          word.clear();
        }
      }
      auto lower = [](std::string w) {
        for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return w;
      };
      switch (k) {
        case AttackKind::article_deletion:
          eligible = std::any_of(words.begin(), words.end(), [&](auto& w) {
            const auto l = lower(w);
            return l == "the" || l == "a" || l == "an";
          });
          if (eligible && out.empty()) continue;
          break;
        case AttackKind::alt_spelling:
        case AttackKind::misspelling:
        case AttackKind::synonym: {
          const auto& table = k == AttackKind::alt_spelling ? res.us_uk : k == AttackKind::misspelling ? res.misspellings : res.synonyms;
          eligible = std::any_of(words.begin(), words.end(), [&](auto& w) {
            const auto it = table.find(lower(w));
            return it != table.end() && lower(it->second) != lower(w);
          });
          break;
        }
        case AttackKind::paragraph_insert:
          for (std::size_t i = 0; i + 1 < text.size(); ++i) {
            if ((text[i] == '.' || text[i] == '!' || text[i] == '?') && std::isspace(static_cast<unsigned char>(text[i + 1]))) {
              std::size_t j = i + 1;
              while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
              if (text.substr(i + 1, j - i - 1) != "\n\n") eligible = true;
            }
          }
          break;
        case AttackKind::case_swap:
          for (std::size_t i = 0; i < text.size(); ++i) {
            const auto prev = i ? static_cast<unsigned char>(text[i - 1]) : ' ';
            const bool starts = !(std::isalpha(prev) || prev >= 0x80);
            eligible = eligible || (starts && std::isalpha(static_cast<unsigned char>(text[i])));
          }
          break;
        case AttackKind::zero_width_space:
          eligible = utf8::code_points(text).size() >= 2;
          break;
        case AttackKind::whitespace_insert: {
          const auto cps = utf8::code_points(text);
          for (std::size_t i = 0; i + 1 < cps.size(); ++i) {
            if (!utf8::is_space(utf8::decode(cps[i], 0).first) && !utf8::is_space(utf8::decode(cps[i + 1], 0).first)) {
              eligible = true;
            }
          }
          break;
        }
        case AttackKind::homoglyph:
          for (char c : text) {
            for (const auto& h : homoglyph_table()) eligible = eligible || h.ascii == c;
          }
          break;
        case AttackKind::number_shuffle:
          for (std::size_t i = 0; i < text.size();) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
              ++i;
              continue;
            }
            std::size_t j = i;
            std::set<char> distinct;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) distinct.insert(text[j++]);
            eligible = eligible || distinct.size() >= 2;
            i = j;
          }
          break;
      }
      EXPECT_EQ(out != text, eligible) << to_string(k) << " on '" << text << "' -> '" << out << "'";
    }
  }
}

TEST(AttacksProperty, CharacterAttacksPreserveLetters) {
  Rng rng(56);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string text = random_text(rng);
    const double rate = 0.1 + 0.9 * rng.uniform();
    for (AttackKind k : {AttackKind::zero_width_space, AttackKind::homoglyph}) {
      const auto out = apply_attack(text, {k, rate, rng.next()});
      EXPECT_EQ(undo_character_attacks(out), text) << to_string(k);
    }
    const auto spaced = apply_attack(text, {AttackKind::whitespace_insert, rate, rng.next()});
    EXPECT_EQ(letters_only(spaced), letters_only(text));
  }
}

TEST(AttacksProperty, Deterministic) {
  Rng rng(57);
  for (int trial = 0; trial < 100; ++trial) {
    const std::string text = random_text(rng);
    for (AttackKind k : kAllAttackKinds) {
      const AttackSpec spec{k, 0.5, static_cast<std::uint64_t>(trial)};
      EXPECT_EQ(apply_attack(text, spec), apply_attack(text, spec));
    }
  }
}
