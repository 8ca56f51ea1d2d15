#include "clost/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "clost/csv.hpp"
#include "clost/error.hpp"
#include "clost/rng.hpp"

namespace clost::corpus {
namespace {

using nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

// Shared per-file parse state: error isolation plus strict escalation.
class Collector {
 public:
  Collector(ParseResult& result, const ParseOptions& opts)
      : result_(result), strict_(opts.strict) {}

  void record(std::size_t line, ErrorKind kind, std::string message) {
    if (strict_) {
      throw ParseError(line, message);
    }
    result_.errors.push_back({line, kind, std::move(message)});
  }

  bool claim_id(const std::string& id, std::size_t line) {
    if (!seen_ids_.insert(id).second) {
      record(line, ErrorKind::validation, "duplicate dialogue id '" + id + "'");
      return false;
    }
    return true;
  }

 private:
  ParseResult& result_;
  bool strict_;
  std::unordered_set<std::string> seen_ids_;
};

void expect_header(const std::vector<csv::Record>& records,
                   std::span<const std::string_view> expected) {
  if (records.empty()) {
    throw ParseError(1, "empty file, expected a header row");
  }
  const auto& fields = records.front().fields;
  bool ok = fields.size() == expected.size();
  for (std::size_t i = 0; ok && i < fields.size(); ++i) {
    ok = trim(fields[i]) == expected[i];
  }
  if (!ok) {
    std::string want;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) want.push_back(',');
      want += expected[i];
    }
    throw ParseError(records.front().line, "expected header '" + want + "'");
  }
}

struct Marked {
  std::string stripped;  // original with <word/> -> word
  std::string edited;    // original with <word/> -> replacement
};

// The replaced word in a headline is wrapped as `<word/>`.
std::optional<Marked> apply_edit(std::string_view original,
                                 std::string_view replacement) {
  const auto open = original.find('<');
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = original.find("/>", open);
  if (close == std::string_view::npos) return std::nullopt;
  if (original.find('<', open + 1) < close) return std::nullopt;
  if (original.find('<', close + 2) != std::string_view::npos) {
    return std::nullopt;  // a second marker means a malformed row
  }
  const std::string_view word = original.substr(open + 1, close - open - 1);
  Marked out;
  out.stripped.append(original.substr(0, open));
  out.stripped.append(word);
  out.stripped.append(original.substr(close + 2));
  out.edited.append(original.substr(0, open));
  out.edited.append(replacement);
  out.edited.append(original.substr(close + 2));
  return out;
}

ParseResult parse_jsonl_impl(std::istream& in, const ParseOptions& opts,
                             bool normalized) {
  ParseResult result;
  Collector collector(result, opts);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      collector.record(line_no, ErrorKind::malformed, "invalid JSON object");
      continue;
    }
    RatedDialogue dialogue;
    const char* prompt_key = normalized ? "prompt_text" : "question";
    if (!obj.contains("id") || !obj["id"].is_string() ||
        !obj.contains(prompt_key) || !obj[prompt_key].is_string() ||
        !obj.contains("responses") || !obj["responses"].is_array()) {
      collector.record(line_no, ErrorKind::malformed,
                       std::string("expected fields id, ") + prompt_key +
                           ", responses");
      continue;
    }
    dialogue.id = obj["id"].get<std::string>();
    dialogue.prompt_text = obj[prompt_key].get<std::string>();
    if (obj.contains("language")) {
      try {
        dialogue.language =
            language_from_string(obj["language"].get<std::string>());
      } catch (const Error&) {
        collector.record(line_no, ErrorKind::malformed,
                         "language must be 'zh' or 'en'");
        continue;
      }
    }
    if (normalized && obj.contains("corpus")) {
      try {
        dialogue.corpus = source_from_string(obj["corpus"].get<std::string>());
      } catch (const Error&) {
        collector.record(line_no, ErrorKind::malformed, "unknown corpus tag");
        continue;
      }
    } else {
      dialogue.corpus = opts.source_override.value_or(Source::generic);
    }
    if (obj["responses"].empty()) {
      collector.record(line_no, ErrorKind::validation,
                       "responses array must be non-empty");
      continue;
    }
    bool ok = true;
    for (const auto& r : obj["responses"]) {
      if (!r.is_object() || !r.contains("text") || !r["text"].is_string() ||
          !r.contains("score") || !r["score"].is_number()) {
        collector.record(line_no, ErrorKind::malformed,
                         "response must be {\"text\": str, \"score\": number}");
        ok = false;
        break;
      }
      RatedResponse response;
      response.text = r["text"].get<std::string>();
      response.score = r["score"].get<double>();
      response.source_tag = (normalized && r.contains("source_tag"))
                                ? r["source_tag"].get<std::string>()
                                : to_string(dialogue.corpus);
      if (trim(response.text).empty()) {
        collector.record(line_no, ErrorKind::validation,
                         "response text is empty");
        ok = false;
        break;
      }
      if (!std::isfinite(response.score) || response.score < 0.0) {
        collector.record(line_no, ErrorKind::validation,
                         "score must be finite and >= 0");
        ok = false;
        break;
      }
      dialogue.responses.push_back(std::move(response));
    }
    if (!ok) continue;
    if (!collector.claim_id(dialogue.id, line_no)) continue;
    result.dialogues.push_back(std::move(dialogue));
  }
  return result;
}

}  // namespace

std::string to_string(Language lang) {
  return lang == Language::zh ? "zh" : "en";
}

std::string to_string(Source source) {
  switch (source) {
    case Source::oogiri:
      return "oogiri";
    case Source::semeval2021:
      return "semeval2021";
    case Source::semeval2020:
      return "semeval2020";
    case Source::inhouse:
      return "inhouse";
    case Source::generic:
      return "generic";
  }
  return "generic";
}

Language language_from_string(std::string_view s) {
  if (s == "zh") return Language::zh;
  if (s == "en") return Language::en;
  throw ValidationError("unknown language '" + std::string(s) + "'");
}

Source source_from_string(std::string_view s) {
  if (s == "oogiri") return Source::oogiri;
  if (s == "semeval2021") return Source::semeval2021;
  if (s == "semeval2020") return Source::semeval2020;
  if (s == "inhouse") return Source::inhouse;
  if (s == "generic") return Source::generic;
  throw ValidationError("unknown corpus '" + std::string(s) + "'");
}

ParseResult parse_semeval2021(std::istream& in, const ParseOptions& opts) {
  static constexpr std::string_view kHeader[] = {"id", "text", "is_humor",
                                                 "humor_rating"};
  const auto records = csv::read(in);
  expect_header(records, kHeader);

  ParseResult result;
  Collector collector(result, opts);
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.fields.size() != 4) {
      collector.record(rec.line, ErrorKind::malformed,
                       "expected 4 fields, got " +
                           std::to_string(rec.fields.size()));
      continue;
    }
    const std::string id(trim(rec.fields[0]));
    const std::string text(trim(rec.fields[1]));
    const std::string_view is_humor = trim(rec.fields[2]);
    const std::string_view rating_field = trim(rec.fields[3]);
    if (id.empty()) {
      collector.record(rec.line, ErrorKind::malformed, "empty id");
      continue;
    }
    if (text.empty()) {
      collector.record(rec.line, ErrorKind::validation, "empty text");
      continue;
    }
    if (is_humor != "0" && is_humor != "1") {
      collector.record(rec.line, ErrorKind::malformed,
                       "is_humor must be 0 or 1");
      continue;
    }
    double score = 0.0;
    if (is_humor == "1") {
      const auto rating = parse_double(rating_field);
      if (!rating) {
        collector.record(rec.line, ErrorKind::malformed,
                         "humor_rating required when is_humor=1");
        continue;
      }
      if (*rating < 0.0 || *rating > 5.0) {
        collector.record(rec.line, ErrorKind::validation,
                         "humor_rating outside [0,5]");
        continue;
      }
      score = *rating;
    } else if (!rating_field.empty() && !parse_double(rating_field)) {
      collector.record(rec.line, ErrorKind::malformed,
                       "unparseable humor_rating");
      continue;
    }
    if (!collector.claim_id(id, rec.line)) continue;
    RatedDialogue dialogue;
    dialogue.id = id;
    dialogue.prompt_text = kNullPrompt;
    dialogue.responses.push_back({text, score, "semeval2021"});
    dialogue.language = Language::en;
    dialogue.corpus = Source::semeval2021;
    result.dialogues.push_back(std::move(dialogue));
  }
  return result;
}

ParseResult parse_semeval2020(std::istream& in, int subtask,
                              const ParseOptions& opts) {
  if (subtask != 1 && subtask != 2) {
    throw ValidationError("semeval2020 subtask must be 1 or 2");
  }
  static constexpr std::string_view kHeader1[] = {"id", "original", "edit",
                                                  "meanGrade"};
  static constexpr std::string_view kHeader2[] = {
      "id",        "original1", "edit1", "meanGrade1",
      "original2", "edit2",     "meanGrade2", "label"};
  const auto records = csv::read(in);
  if (subtask == 1) {
    expect_header(records, kHeader1);
  } else {
    expect_header(records, kHeader2);
  }

  ParseResult result;
  Collector collector(result, opts);

  auto grade_of = [&](const csv::Record& rec,
                      std::string_view field) -> std::optional<double> {
    const auto grade = parse_double(field);
    if (!grade) {
      collector.record(rec.line, ErrorKind::malformed,
                       "unparseable meanGrade");
      return std::nullopt;
    }
    if (*grade < 0.0 || *grade > 3.0) {
      collector.record(rec.line, ErrorKind::validation,
                       "meanGrade outside [0,3]");
      return std::nullopt;
    }
    return grade;
  };
  auto edited_of = [&](const csv::Record& rec, std::string_view original,
                       std::string_view edit) -> std::optional<Marked> {
    auto marked = apply_edit(original, trim(edit));
    if (!marked) {
      collector.record(rec.line, ErrorKind::malformed,
                       "original lacks a single <word/> edit marker");
      return std::nullopt;
    }
    if (trim(marked->edited).empty()) {
      collector.record(rec.line, ErrorKind::validation,
                       "edited headline is empty");
      return std::nullopt;
    }
    return marked;
  };

  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& rec = records[i];
    const std::size_t want = subtask == 1 ? 4u : 8u;
    if (rec.fields.size() != want) {
      collector.record(rec.line, ErrorKind::malformed,
                       "expected " + std::to_string(want) + " fields, got " +
                           std::to_string(rec.fields.size()));
      continue;
    }
    const std::string id(trim(rec.fields[0]));
    if (id.empty()) {
      collector.record(rec.line, ErrorKind::malformed, "empty id");
      continue;
    }

    RatedDialogue dialogue;
    dialogue.id = id;
    dialogue.language = Language::en;
    dialogue.corpus = Source::semeval2020;

    if (subtask == 1) {
      const auto marked = edited_of(rec, rec.fields[1], rec.fields[2]);
      if (!marked) continue;
      const auto grade = grade_of(rec, rec.fields[3]);
      if (!grade) continue;
      dialogue.prompt_text = marked->stripped;
      dialogue.responses.push_back({marked->edited, *grade, "semeval2020"});
    } else {
      const auto marked1 = edited_of(rec, rec.fields[1], rec.fields[2]);
      if (!marked1) continue;
      const auto grade1 = grade_of(rec, rec.fields[3]);
      if (!grade1) continue;
      const auto marked2 = edited_of(rec, rec.fields[4], rec.fields[5]);
      if (!marked2) continue;
      const auto grade2 = grade_of(rec, rec.fields[6]);
      if (!grade2) continue;
      const std::string_view label = trim(rec.fields[7]);
      if (label != "1" && label != "2") {
        collector.record(rec.line, ErrorKind::malformed,
                         "label must be 1 or 2");
        continue;
      }
      dialogue.prompt_text = marked1->stripped;
      const bool first_funnier = label == "1";
      dialogue.responses.push_back(
          {marked1->edited, first_funnier ? 1.0 : 0.0, "semeval2020"});
      dialogue.responses.push_back(
          {marked2->edited, first_funnier ? 0.0 : 1.0, "semeval2020"});
    }
    if (!collector.claim_id(id, rec.line)) continue;
    result.dialogues.push_back(std::move(dialogue));
  }
  return result;
}

ParseResult parse_rated_jsonl(std::istream& in, const ParseOptions& opts) {
  return parse_jsonl_impl(in, opts, /*normalized=*/false);
}

CorpusSplit split(std::span<const RatedDialogue> dialogues, double ratio,
                  std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("split ratio must lie in (0,1)");
  }
  if (dialogues.size() < 2) {
    throw ValidationError("split requires at least 2 dialogues");
  }
  const std::size_t total = dialogues.size();
  const auto train_size = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(total)));

  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  rng::Engine eng(seed);
  rng::shuffle(order, eng);

  std::vector<bool> in_train(total, false);
  for (std::size_t i = 0; i < train_size; ++i) in_train[order[i]] = true;

  CorpusSplit result;
  result.seed = seed;
  result.ratio = ratio;
  for (std::size_t i = 0; i < total; ++i) {
    (in_train[i] ? result.train : result.test).push_back(dialogues[i]);
  }
  return result;
}

void write_normalized(std::ostream& out,
                      std::span<const RatedDialogue> dialogues) {
  for (const auto& d : dialogues) {
    ordered_json responses = ordered_json::array();
    for (const auto& r : d.responses) {
      responses.push_back({{"text", r.text},
                           {"score", r.score},
                           {"source_tag", r.source_tag}});
    }
    const ordered_json obj = {{"id", d.id},
                              {"prompt_text", d.prompt_text},
                              {"responses", std::move(responses)},
                              {"language", to_string(d.language)},
                              {"corpus", to_string(d.corpus)}};
    out << obj.dump() << '\n';
  }
}

ParseResult read_normalized(std::istream& in, const ParseOptions& opts) {
  return parse_jsonl_impl(in, opts, /*normalized=*/true);
}

}  // namespace clost::corpus
