#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "clost/agents.hpp"
#include "clost/gesit.hpp"
#include "clost/taskforge.hpp"

namespace clost::evalkit {

struct WordVectorTable {
  int dimension = 0;
  std::unordered_map<std::string, std::vector<double>> entries;
  std::vector<std::string> warnings;  // e.g. duplicate words (last wins)
};

/// Text format: optional `count dim` header, then `word v1 ... v_dim` per
/// line. Dimension mismatches and zero vectors are rejected with the line
/// number.
WordVectorTable load_word_vectors(std::istream& in);

/// Divergent-association score: 100 x mean pairwise cosine distance over
/// the deduplicated word list. Range [0, 200].
double dat_score(std::span<const std::string> words,
                 const WordVectorTable& table);

struct ChoicePrediction {
  int index = -1;  // -1 when abstained
  bool abstain = false;
  std::string raw;  // completion, for audit
};

/// Extraction rule: standalone option letters A-D scanned case-insensitively,
/// tolerating punctuation; two distinct letters (or none, or one outside the
/// option range) abstain. Returns -1 on abstain.
int extract_option_letter(std::string_view completion, int option_count);

/// Presents the rendered choice prompt to the backend and extracts the
/// predicted option.
ChoicePrediction judge_choice(agents::ChatBackend& backend,
                              const taskforge::ChoiceTask& task,
                              const prompts::PromptAssets& assets,
                              corpus::Language lang);

struct ItemResult {
  std::string id;
  int pred = -1;  // -1 = abstained
  int gold = 0;
  bool correct = false;
};

struct EvalReport {
  std::string task_family = "choice";
  std::size_t n_items = 0;
  std::size_t n_correct = 0;
  double accuracy = 0.0;
  std::vector<ItemResult> items;

  nlohmann::json to_json() const;
};

using ChoiceJudge =
    std::function<ChoicePrediction(const taskforge::ChoiceTask&)>;

/// Top-1 accuracy over the task set; abstentions count as incorrect.
EvalReport eval_choice(const ChoiceJudge& judge,
                       std::span<const taskforge::ChoiceTask> tasks);

/// Reads the gold index; scores 1.0 on any well-formed task set.
ChoiceJudge oracle_judge();
/// Always answers the given letter; calibration baseline.
ChoiceJudge constant_letter_judge(char letter);
ChoiceJudge backend_choice_judge(agents::ChatBackend& backend,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang);

/// Pairwise judge backed by the 2-option choice prompt; abstentions map to
/// ties.
gesit::PairwiseJudge backend_pairwise_judge(agents::ChatBackend& backend,
                                            const prompts::PromptAssets& assets,
                                            corpus::Language lang);

struct BestOfNResult {
  std::string winner;
  int winner_index = 0;  // into candidates
  std::vector<std::string> candidates;
  std::vector<std::string> warnings;
};

/// Generate one candidate per selected generation prompt, then pick the
/// winner by round-robin pairwise comparisons (win count, ties broken by
/// earlier prompt index). n=1 returns the sole candidate without judging.
BestOfNResult best_of_n_infer(agents::ChatBackend& generator,
                              const gesit::PairwiseJudge& judge,
                              const std::string& question,
                              const prompts::PromptAssets& assets,
                              corpus::Language lang, int n);

struct DatReportRow {
  std::string word_set_id;
  std::size_t n_words = 0;
  double score = 0.0;
};

/// CSV: word_set_id,n_words,score
void write_dat_report_csv(std::ostream& out,
                          std::span<const DatReportRow> rows);

}  // namespace clost::evalkit
