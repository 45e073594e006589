#include "swd/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "json.hpp"

#include "swd/errors.hpp"
#include "swd/utf8.hpp"

namespace swd {

namespace {

const std::vector<std::string>& reserved_literals() {
  static const std::vector<std::string> lits = {"<pad>", "<unk>", "<bos>", "<eos>"};
  return lits;
}

bool is_delimiter(char32_t cp, const CorpusOptions& options) {
  return options.delimiters.find(cp) != std::u32string::npos;
}

}  // namespace

// ---- Vocab ----------------------------------------------------------------

Vocab::Vocab() {
  for (const auto& lit : reserved_literals()) {
    index_.emplace(lit, static_cast<int>(tokens_.size()));
    tokens_.push_back(lit);
  }
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  for (const auto& t : tokens) {
    if (t.empty()) throw FormatError("empty vocabulary entry");
    if (!v.index_.emplace(t, static_cast<int>(v.tokens_.size())).second) {
      throw FormatError("duplicate or reserved vocabulary entry '" + t + "'");
    }
    v.tokens_.push_back(t);
  }
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

// ---- Document -------------------------------------------------------------

std::vector<int> Document::flat_tokens() const {
  std::vector<int> out;
  out.reserve(total_words());
  for (const auto& s : sentences) out.insert(out.end(), s.begin(), s.end());
  return out;
}

// ---- text processing ------------------------------------------------------

std::string clean_text(std::string_view text) {
  const std::u32string in = utf8::decode(text);
  std::u32string out;
  out.reserve(in.size());
  std::size_t i = 0;
  while (i < in.size()) {
    if (!utf8::is_space(in[i])) {
      out.push_back(in[i++]);
      continue;
    }
    bool newline = false;
    while (i < in.size() && utf8::is_space(in[i])) newline |= utf8::is_newline(in[i++]);
    if (!out.empty() && i < in.size()) out.push_back(newline ? U'\n' : U' ');
  }
  return utf8::encode(out);
}

std::vector<std::string> split_sentences(std::string_view text, const CorpusOptions& options) {
  const std::u32string in = utf8::decode(clean_text(text));
  if (in.empty()) throw IngestionError("text is empty after cleaning");
  std::vector<std::string> out;
  std::u32string cur;
  std::size_t i = 0;
  while (i < in.size() && out.size() < options.max_sentences) {
    cur.push_back(in[i]);
    if (is_delimiter(in[i], options)) {
      ++i;
      while (i < in.size() && (is_delimiter(in[i], options) || utf8::is_space(in[i]))) cur.push_back(in[i++]);
      out.push_back(utf8::encode(cur));
      cur.clear();
      continue;
    }
    ++i;
  }
  if (!cur.empty() && out.size() < options.max_sentences) out.push_back(utf8::encode(cur));
  return out;
}

std::vector<std::string> token_strings(std::string_view sentence, const CorpusOptions& options) {
  const std::u32string in = utf8::decode(sentence);
  std::vector<std::string> out;
  if (options.tokenization == Tokenization::kWord) {
    std::u32string word;
    for (char32_t cp : in) {
      if (utf8::is_space(cp)) {
        if (!word.empty()) out.push_back(utf8::encode(word));
        word.clear();
      } else {
        word.push_back(cp);
      }
    }
    if (!word.empty()) out.push_back(utf8::encode(word));
    return out;
  }
  bool pending_space = false;
  for (char32_t cp : in) {
    if (utf8::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.emplace_back(" ");
    pending_space = false;
    out.push_back(utf8::encode(cp));
  }
  return out;
}

namespace {

std::vector<int> lookup(const std::vector<std::string>& tokens, const Vocab& vocab, std::size_t limit) {
  std::vector<int> ids;
  const std::size_t n = std::min(limit, tokens.size());
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(vocab.id(tokens[i]));
  return ids;
}

// The exact surface material the encoder sees: kept sentences, truncated.
template <class Visit>
void visit_encoded_tokens(const RawPair& pair, const CorpusOptions& options, Visit&& visit) {
  for (const auto& s : split_sentences(pair.text, options)) {
    auto toks = token_strings(s, options);
    if (toks.size() > options.max_sentence_len) toks.resize(options.max_sentence_len);
    for (const auto& t : toks) visit(t);
  }
  auto toks = token_strings(clean_text(pair.summary), options);
  if (toks.size() > options.max_summary_len) toks.resize(options.max_summary_len);
  for (const auto& t : toks) visit(t);
}

}  // namespace

std::vector<int> tokenize(std::string_view sentence, const Vocab& vocab, const CorpusOptions& options) {
  return lookup(token_strings(sentence, options), vocab, options.max_sentence_len);
}

std::vector<int> encode_summary(std::string_view summary, const Vocab& vocab,
                                const CorpusOptions& options) {
  return lookup(token_strings(clean_text(summary), options), vocab, options.max_summary_len);
}

std::string decode(std::span<const int> ids, const Vocab& vocab, const CorpusOptions& options) {
  std::string out;
  bool first = true;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (options.tokenization == Tokenization::kWord && !first) out.push_back(' ');
    out += vocab.token(id);
    first = false;
  }
  return out;
}

Vocab build_vocab(std::span<const RawPair> pairs, const CorpusOptions& options) {
  if (pairs.empty()) throw IngestionError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& p : pairs) {
    visit_encoded_tokens(p, options, [&](const std::string& t) { ++counts[t]; });
  }
  std::vector<std::pair<std::string, std::size_t>> entries;
  for (auto& [tok, n] : counts) {
    if (n >= options.min_count && !std::count(reserved_literals().begin(), reserved_literals().end(), tok)) {
      entries.emplace_back(tok, n);
    }
  }
  // Frequency descending, then byte order (= code point order for UTF-8).
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(entries.size());
  for (auto& e : entries) tokens.push_back(std::move(e.first));
  return Vocab::from_tokens(tokens);
}

Document assemble_document(std::vector<std::vector<int>> sentences, std::size_t max_sentences) {
  Document doc;
  for (auto& s : sentences) {
    if (s.empty()) continue;
    if (doc.sentences.size() == max_sentences) break;
    const std::size_t j = doc.sentences.size();
    std::vector<std::size_t> words;
    for (std::size_t k = 0; k < s.size(); ++k) {
      words.push_back(doc.word2sen.size());
      doc.word2sen.push_back(j);
    }
    doc.sen2word.push_back(std::move(words));
    doc.sentences.push_back(std::move(s));
  }
  if (doc.sentences.empty()) throw IngestionError("document has no non-empty sentences");
  return doc;
}

Document encode_document(std::string_view text, const Vocab& vocab, const CorpusOptions& options) {
  std::vector<std::vector<int>> sentences;
  for (const auto& s : split_sentences(text, options)) sentences.push_back(tokenize(s, vocab, options));
  return assemble_document(std::move(sentences), options.max_sentences);
}

EncodedPair encode_pair(const RawPair& pair, const Vocab& vocab, const CorpusOptions& options) {
  EncodedPair out{encode_document(pair.text, vocab, options), encode_summary(pair.summary, vocab, options)};
  if (out.summary.empty()) throw IngestionError("summary is empty after cleaning");
  return out;
}

std::vector<EncodedPair> encode_corpus(std::span<const RawPair> pairs, const Vocab& vocab,
                                       const CorpusOptions& options) {
  std::vector<EncodedPair> out(pairs.size());
  std::vector<std::string> errors(pairs.size());
  const auto n = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = encode_pair(pairs[i], vocab, options);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw IngestionError("pair " + std::to_string(i + 1) + ": " + errors[i]);
  }
  return out;
}

// ---- files ----------------------------------------------------------------

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  return in;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

void require_nonempty(const RawPair& p, const std::filesystem::path& path, std::size_t lineno) {
  if (clean_text(p.text).empty() || clean_text(p.summary).empty()) {
    throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": empty text or summary");
  }
}

}  // namespace

std::vector<RawPair> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<RawPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (clean_text(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j.contains("summary") || !j["text"].is_string() ||
        !j["summary"].is_string()) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) +
                           ": expected string fields \"text\" and \"summary\"");
    }
    RawPair p{j["text"].get<std::string>(), j["summary"].get<std::string>()};
    require_nonempty(p, path, lineno);
    out.push_back(std::move(p));
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const RawPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path.string());
  for (const auto& p : pairs) {
    out << nlohmann::json{{"text", p.text}, {"summary", p.summary}}.dump() << '\n';
  }
}

std::vector<RawPair> read_tsv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<RawPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (clean_text(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw IngestionError(path.string() + ":" + std::to_string(lineno) + ": missing TAB separator");
    }
    RawPair p{line.substr(tab + 1), line.substr(0, tab)};
    require_nonempty(p, path, lineno);
    out.push_back(std::move(p));
  }
  return out;
}

Vocab read_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open vocabulary " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    strip_cr(line);
    lines.push_back(line);
  }
  const auto& lits = reserved_literals();
  if (lines.size() < lits.size() || !std::equal(lits.begin(), lits.end(), lines.begin())) {
    throw FormatError("vocabulary " + path.string() + " must start with <pad>, <unk>, <bos>, <eos>");
  }
  try {
    return Vocab::from_tokens(std::vector<std::string>(lines.begin() + kNumReserved, lines.end()));
  } catch (const FormatError& e) {
    throw FormatError("vocabulary " + path.string() + ": " + e.what());
  }
}

void write_vocab(const std::filesystem::path& path, const Vocab& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

}  // namespace swd
