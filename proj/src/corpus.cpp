#include "saedet/corpus.hpp"
#include "saedet/utf8.hpp"

#include <sstream>

namespace saedet {

std::string to_string(Label l) { return l == Label::human ? "human" : "machine"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::devtest: return "devtest";
    case Split::test: return "test";
  }
  return "train";
}

Label parse_label(const std::string& s) {
  if (s == "human") return Label::human;
  if (s == "machine") return Label::machine;
  throw ParseError("unknown label '" + s + "' (expected human or machine)");
}

Split parse_split(const std::string& s) {
  for (Split sp : kAllSplits) {
    if (to_string(sp) == s) return sp;
  }
  throw ParseError("unknown split '" + s + "' (expected train, dev, devtest or test)");
}

Corpus::Corpus(std::vector<Document> docs) {
  docs_.reserve(docs.size());
  for (auto& d : docs) add(std::move(d));
}

void Corpus::add(Document doc) {
  if (doc.text.empty()) throw ValidationError("document '" + doc.id + "' has empty text");
  if (!index_.emplace(doc.id, docs_.size()).second) {
    throw ValidationError("duplicate document id '" + doc.id + "'");
  }
  docs_.push_back(std::move(doc));
}

const Document* Corpus::find(const std::string& id) const {
  const auto it = index_.find(id);
  return it == index_.end() ? nullptr : &docs_[it->second];
}

namespace {

std::string required_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ParseError(where + ": missing required field '" + key + "'");
  const auto& v = j.at(key);
  if (!v.is_string()) throw ParseError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line, line_no);
    pos = end + 1;
  }
}

std::string dump_line(const nlohmann::ordered_json& j) {
  try {
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  } catch (const nlohmann::json::type_error& e) {
    throw ValidationError(std::string("cannot serialize record: ") + e.what());
  }
}

}  // namespace

Corpus parse_corpus_jsonl(std::string_view text, const std::string& context) {
  Corpus corpus;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const std::string where = context + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw ParseError(where + ": expected a JSON object");
    Document doc;
    doc.id = required_string(j, "id", where);
    doc.text = required_string(j, "text", where);
    try {
      doc.label = parse_label(required_string(j, "label", where));
      doc.split = parse_split(required_string(j, "split", where));
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      throw ParseError(msg.rfind(where, 0) == 0 ? msg : where + ": " + msg);
    }
    doc.domain = required_string(j, "domain", where);
    doc.model = required_string(j, "model", where);
    if (doc.id.empty()) throw ParseError(where + ": empty id");
    if (doc.text.empty()) throw ParseError(where + ": empty text");
    if (corpus.find(doc.id)) throw ValidationError(where + ": duplicate id '" + doc.id + "'");
    corpus.add(std::move(doc));
  });
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& d : corpus) {
    nlohmann::ordered_json j;
    j["id"] = d.id;
    j["text"] = d.text;
    j["label"] = to_string(d.label);
    j["domain"] = d.domain;
    j["model"] = d.model;
    j["split"] = to_string(d.split);
    out += dump_line(j);
    out += '\n';
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) {
  return parse_corpus_jsonl(read_file_text(path), path.string());
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file_atomic(path, corpus_to_jsonl(corpus));
}

// ---------------------------------------------------------------------------
// Tokenizer

bool utf8::is_space(char32_t c) {
  switch (c) {
    case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

namespace {

bool is_ascii_punct(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
         (c >= 0x7B && c <= 0x7E);
}

enum class CharClass { space, punct, word };

CharClass classify(char32_t c) {
  if (utf8::is_space(c)) return CharClass::space;
  if (is_ascii_punct(c)) return CharClass::punct;
  return CharClass::word;
}

}  // namespace

std::vector<TokenSpan> tokenize_spans(std::string_view text) {
  std::vector<TokenSpan> out;
  std::size_t pos = 0;
  CharClass current = CharClass::space;
  std::size_t start = 0;
  while (pos < text.size()) {
    const auto [cp, len] = utf8::decode(text, pos);
    const CharClass cls = classify(cp);
    if (cls != current) {
      if (current != CharClass::space) out.push_back({start, pos});
      start = pos;
      current = cls;
    }
    pos += len;
  }
  if (current != CharClass::space) out.push_back({start, text.size()});
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const auto& s : tokenize_spans(text)) out.emplace_back(text.substr(s.begin, s.end - s.begin));
  return out;
}

std::size_t token_count(std::string_view text) { return tokenize_spans(text).size(); }

}  // namespace saedet
