#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace swd {

inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kNumReserved = 4;

enum class Tokenization { kChar, kWord };

struct CorpusOptions {
  std::size_t max_sentences = 20;
  std::size_t max_sentence_len = 150;
  std::size_t max_summary_len = 150;
  std::size_t min_count = 1;
  Tokenization tokenization = Tokenization::kChar;
  // Each delimiter closes the sentence it ends; any run of delimiters and
  // whitespace right after it stays with that sentence.
  std::u32string delimiters = U"。！？；.!?;\n";
};

struct RawPair {
  std::string text;
  std::string summary;
};

class Vocab {
 public:
  /// Only the four reserved entries.
  Vocab();
  /// Reserved entries followed by `tokens` in id order. Throws FormatError on
  /// duplicates, empty tokens or tokens equal to a reserved literal.
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  std::size_t size() const { return tokens_.size(); }
  /// Every entry, reserved literals first.
  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Word <-> sentence bookkeeping for one encoded source text. Words are
/// numbered in reading order across sentences.
struct Document {
  std::vector<std::vector<int>> sentences;
  std::vector<std::vector<std::size_t>> sen2word;
  std::vector<std::size_t> word2sen;

  std::size_t num_sentences() const { return sentences.size(); }
  std::size_t total_words() const { return word2sen.size(); }
  std::vector<int> flat_tokens() const;
};

struct EncodedPair {
  Document doc;
  std::vector<int> summary;
};

/// Whitespace runs become one space, or one newline if the run contains a
/// line break; leading and trailing whitespace is removed.
std::string clean_text(std::string_view text);

std::vector<std::string> split_sentences(std::string_view text, const CorpusOptions& options);

/// Surface tokens of a sentence before vocabulary lookup and truncation.
std::vector<std::string> token_strings(std::string_view sentence, const CorpusOptions& options);

std::vector<int> tokenize(std::string_view sentence, const Vocab& vocab, const CorpusOptions& options);

/// Summary tokens (no sentence split), truncated to max_summary_len.
std::vector<int> encode_summary(std::string_view summary, const Vocab& vocab,
                                const CorpusOptions& options);

std::string decode(std::span<const int> ids, const Vocab& vocab, const CorpusOptions& options);

Vocab build_vocab(std::span<const RawPair> pairs, const CorpusOptions& options);

/// Drops empty sentences, keeps at most max_sentences and builds the index
/// maps. Throws IngestionError when nothing is left.
Document assemble_document(std::vector<std::vector<int>> sentences, std::size_t max_sentences);

Document encode_document(std::string_view text, const Vocab& vocab, const CorpusOptions& options);

EncodedPair encode_pair(const RawPair& pair, const Vocab& vocab, const CorpusOptions& options);

/// Parallel over pairs; output order matches input order.
std::vector<EncodedPair> encode_corpus(std::span<const RawPair> pairs, const Vocab& vocab,
                                       const CorpusOptions& options);

// ---- files ----------------------------------------------------------------

/// One JSON object per line with string fields "text" and "summary".
std::vector<RawPair> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const RawPair> pairs);
/// One pair per line: summary, TAB, text.
std::vector<RawPair> read_tsv(const std::filesystem::path& path);

/// One token per line; the first four lines are <pad>, <unk>, <bos>, <eos>
/// and a token's id is its zero-based line index.
Vocab read_vocab(const std::filesystem::path& path);
void write_vocab(const std::filesystem::path& path, const Vocab& vocab);

}  // namespace swd
