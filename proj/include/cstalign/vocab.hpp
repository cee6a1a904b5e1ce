#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cstalign {

inline constexpr std::size_t kDefaultContextLength = 77;
inline constexpr std::string_view kHealthy = "healthy";

struct ConceptRecord {
  std::string crop;
  std::string condition;
  std::string description;
};

/// A (crop, condition) class. `condition` is a disease name or "healthy".
struct Concept {
  int class_id = 0;
  std::string crop;
  std::string condition;
  std::string description;

  bool is_healthy() const { return condition == kHealthy; }
  bool operator==(const Concept&) const = default;
};

class ConceptVocabulary {
 public:
  ConceptVocabulary() = default;

  /// Case-folds and whitespace-normalizes every field, then assigns class ids
  /// in input order. Throws DuplicateConcept / InvalidConcept.
  static ConceptVocabulary build(const std::vector<ConceptRecord>& records);

  std::size_t size() const noexcept { return concepts_.size(); }
  bool empty() const noexcept { return concepts_.empty(); }
  const std::vector<Concept>& concepts() const noexcept { return concepts_; }

  const Concept& at(int class_id) const;
  std::optional<int> find(std::string_view crop, std::string_view condition) const;

  bool operator==(const ConceptVocabulary& other) const { return concepts_ == other.concepts_; }

 private:
  std::vector<Concept> concepts_;
  std::map<std::pair<std::string, std::string>, int, std::less<>> index_;
};

enum class ContextMode { long_context, short_context };

std::string_view to_string(ContextMode mode);
ContextMode parse_context_mode(std::string_view text);

struct Caption {
  std::string text;
  int concept_id = 0;
};

/// Renders the class caption. Long mode uses the symptom template (or the
/// healthy template); short mode is "prompt crop condition".
Caption render_caption(const Concept& concept_, ContextMode mode, std::string_view prompt);

struct TokenSequence {
  std::vector<int> ids;
  std::size_t pad_count = 0;

  bool operator==(const TokenSequence&) const = default;
};

// Word hash used by the tokenizer: 64-bit FNV-1a over the lowercase ASCII bytes.
std::uint64_t word_hash(std::string_view word);

/// Splits on any non-alphanumeric byte, lowercases, and maps each word to
/// 1 + word_hash(word) % (vocab_size - 1). Id 0 is padding. Output length is
/// exactly `max_len`; extra words are truncated.
TokenSequence tokenize(const Caption& caption, std::size_t max_len, std::size_t vocab_size);

// Lowercase, collapse whitespace runs to one space, trim.
std::string normalize_text(std::string_view text);

// Tab-separated crop, condition, description; one record per line.
std::vector<ConceptRecord> read_vocabulary_file(const std::filesystem::path& path);
void write_vocabulary_file(const ConceptVocabulary& vocab, const std::filesystem::path& path);

}  // namespace cstalign
