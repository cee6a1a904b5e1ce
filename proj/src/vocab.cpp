#include "cstalign/vocab.hpp"

#include <cctype>
#include <fstream>

#include "cstalign/error.hpp"

namespace cstalign {

std::string normalize_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

ConceptVocabulary ConceptVocabulary::build(const std::vector<ConceptRecord>& records) {
  constexpr const char* kOp = "concept-vocab/build_vocabulary";
  if (records.empty()) throw Error(ErrorKind::EmptySpec, kOp, "no concept records");
  ConceptVocabulary vocab;
  vocab.concepts_.reserve(records.size());
  for (const auto& record : records) {
    Concept c;
    c.class_id = static_cast<int>(vocab.concepts_.size());
    c.crop = normalize_text(record.crop);
    c.condition = normalize_text(record.condition);
    c.description = normalize_text(record.description);
    if (c.crop.empty() || c.condition.empty())
      throw Error(ErrorKind::InvalidConcept, kOp,
                  "record " + std::to_string(c.class_id) + " has an empty crop or condition");
    auto [it, inserted] = vocab.index_.emplace(std::pair{c.crop, c.condition}, c.class_id);
    if (!inserted)
      throw Error(ErrorKind::DuplicateConcept, kOp, "(" + c.crop + ", " + c.condition + ")");
    vocab.concepts_.push_back(std::move(c));
  }
  return vocab;
}

const Concept& ConceptVocabulary::at(int class_id) const {
  if (class_id < 0 || static_cast<std::size_t>(class_id) >= concepts_.size())
    throw Error(ErrorKind::DanglingReference, "concept-vocab/lookup",
                "class id " + std::to_string(class_id) + " outside [0, " +
                    std::to_string(concepts_.size()) + ")");
  return concepts_[static_cast<std::size_t>(class_id)];
}

std::optional<int> ConceptVocabulary::find(std::string_view crop,
                                           std::string_view condition) const {
  auto it = index_.find(std::pair{normalize_text(crop), normalize_text(condition)});
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string_view to_string(ContextMode mode) {
  return mode == ContextMode::long_context ? "long" : "short";
}

ContextMode parse_context_mode(std::string_view text) {
  if (text == "long") return ContextMode::long_context;
  if (text == "short") return ContextMode::short_context;
  throw Error(ErrorKind::ConfigError, "concept-vocab/parse_context_mode",
              "context mode must be long or short, got '" + std::string(text) + "'");
}

Caption render_caption(const Concept& concept_, ContextMode mode, std::string_view prompt) {
  std::string text(prompt);
  text += ' ';
  text += concept_.crop;
  if (mode == ContextMode::short_context) {
    text += ' ';
    text += concept_.condition;
  } else if (concept_.is_healthy()) {
    text += " healthy leaves with leaves appearing normal and healthy";
  } else {
    if (normalize_text(concept_.description).empty())
      throw Error(ErrorKind::MissingDescription, "concept-vocab/render_caption",
                  "(" + concept_.crop + ", " + concept_.condition + ") has no description");
    text += " leaves diseased by ";
    text += concept_.condition;
    text += " with symptoms of ";
    text += concept_.description;
  }
  return Caption{normalize_text(text), concept_.class_id};
}

std::uint64_t word_hash(std::string_view word) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : word) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TokenSequence tokenize(const Caption& caption, std::size_t max_len, std::size_t vocab_size) {
  if (max_len < 1 || vocab_size < 2)
    throw Error(ErrorKind::InvalidConfig, "concept-vocab/tokenize",
                "need max_len >= 1 and vocab_size >= 2");
  TokenSequence seq;
  seq.ids.reserve(max_len);
  std::string word;
  auto flush = [&] {
    if (!word.empty() && seq.ids.size() < max_len)
      seq.ids.push_back(1 + static_cast<int>(word_hash(word) % (vocab_size - 1)));
    word.clear();
  };
  for (unsigned char ch : caption.text) {
    if (std::isalnum(ch))
      word.push_back(static_cast<char>(std::tolower(ch)));
    else
      flush();
  }
  flush();
  seq.pad_count = max_len - seq.ids.size();
  seq.ids.resize(max_len, 0);
  return seq;
}

std::vector<ConceptRecord> read_vocabulary_file(const std::filesystem::path& path) {
  constexpr const char* kOp = "concept-vocab/read_vocabulary_file";
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, kOp, "cannot open " + path.string());
  std::vector<ConceptRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (normalize_text(line).empty()) continue;
    const auto t1 = line.find('\t');
    if (t1 == std::string::npos)
      throw Error(ErrorKind::ParseError, kOp, "line " + std::to_string(line_no) +
                                                  ": expected crop<TAB>condition[<TAB>description]");
    const auto t2 = line.find('\t', t1 + 1);
    ConceptRecord r;
    r.crop = line.substr(0, t1);
    r.condition = line.substr(t1 + 1, t2 == std::string::npos ? std::string::npos : t2 - t1 - 1);
    if (t2 != std::string::npos) r.description = line.substr(t2 + 1);
    records.push_back(std::move(r));
  }
  return records;
}

void write_vocabulary_file(const ConceptVocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out)
    throw Error(ErrorKind::IoError, "concept-vocab/write_vocabulary_file",
                "cannot open " + path.string());
  for (const auto& c : vocab.concepts())
    out << c.crop << '\t' << c.condition << '\t' << c.description << '\n';
}

}  // namespace cstalign
