#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clost::corpus {

/// Prompt assigned to standalone texts (jokes and headlines that have no
/// question of their own). Downstream builders treat it as "judge the
/// text itself".
inline constexpr const char* kNullPrompt = "(standalone)";

enum class Language { en, zh };
enum class Source { oogiri, semeval2021, semeval2020, inhouse, generic };

std::string to_string(Language lang);
std::string to_string(Source source);
Language language_from_string(std::string_view s);
Source source_from_string(std::string_view s);

struct RatedResponse {
  std::string text;
  double score = 0.0;  // corpus-native units, finite and >= 0
  std::string source_tag;

  friend bool operator==(const RatedResponse&, const RatedResponse&) = default;
};

struct RatedDialogue {
  std::string id;  // unique within a parsed corpus
  std::string prompt_text;
  std::vector<RatedResponse> responses;  // never empty
  Language language = Language::en;
  Source corpus = Source::generic;

  friend bool operator==(const RatedDialogue&, const RatedDialogue&) = default;
};

enum class ErrorKind { malformed, validation };

struct RecordError {
  std::size_t line = 0;  // 1-based
  ErrorKind kind = ErrorKind::malformed;
  std::string message;
};

struct ParseOptions {
  bool strict = false;  // any record error becomes fatal
  std::optional<Source> source_override;
};

struct ParseResult {
  std::vector<RatedDialogue> dialogues;
  std::vector<RecordError> errors;
};

/// CSV `id,text,is_humor,humor_rating`. Binary non-humor rows score 0;
/// rated rows must lie in [0,5].
ParseResult parse_semeval2021(std::istream& in, const ParseOptions& opts = {});

/// Edited-headline CSV. Subtask 1: `id,original,edit,meanGrade` with the
/// replaced word marked `<word/>` in `original`; the single response is the
/// edited headline scored by meanGrade in [0,3]. Subtask 2 rows carry two
/// edited variants and a funnier-label in {1,2}; responses score {1,0}.
ParseResult parse_semeval2020(std::istream& in, int subtask,
                              const ParseOptions& opts = {});

/// Generic JSONL: {"id", "question", "responses":[{"text","score"}],
/// "language"?}. Used for Oogiri-style and in-house rated data.
ParseResult parse_rated_jsonl(std::istream& in, const ParseOptions& opts = {});

struct CorpusSplit {
  std::vector<RatedDialogue> train;
  std::vector<RatedDialogue> test;
  std::uint64_t seed = 0;
  double ratio = 0.0;
};

/// Deterministic random partition: |train| = round(ratio * total), ids
/// disjoint and exhaustive. Pure function of (input order, ratio, seed).
CorpusSplit split(std::span<const RatedDialogue> dialogues, double ratio,
                  std::uint64_t seed);

/// Normalized JSONL with the RatedDialogue field names.
void write_normalized(std::ostream& out,
                      std::span<const RatedDialogue> dialogues);
ParseResult read_normalized(std::istream& in, const ParseOptions& opts = {});

}  // namespace clost::corpus
