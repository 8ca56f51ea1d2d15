#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clost/corpus.hpp"
#include "clost/error.hpp"
#include "clost/prompts.hpp"

namespace clost::agents {
class ChatBackend;
}

namespace clost::taskforge {

enum class Difficulty { easy, hard };
enum class Family { choice, rank, rewrite, teacher_student, evolved };

std::string to_string(Difficulty d);
std::string to_string(Family f);
Difficulty difficulty_from_string(std::string_view s);
Family family_from_string(std::string_view s);

/// Pick-n-of-m choice task. Options are pairwise distinct; gold_index tracks
/// the gold text through the deterministic shuffle.
struct ChoiceTask {
  std::string id;
  std::string prompt_text;
  std::vector<std::string> options;
  int gold_index = 0;
  int n_select = 1;
  Difficulty difficulty = Difficulty::easy;
  std::uint64_t shuffle_seed = 0;
};

struct RankTask {
  std::string id;
  std::string prompt_text;
  std::vector<std::string> options;
  std::vector<int> gold_order;  // option indices by descending source score
};

struct InstructionRecord {
  std::string instruction;
  std::string input;
  std::string target;
  Family family = Family::choice;
  std::string provenance;  // dialogue id + builder parameters

  friend bool operator==(const InstructionRecord&,
                         const InstructionRecord&) = default;
};

/// Builds an mTn choice task (n=1). Easy pairs the highest- and
/// lowest-scored responses; hard picks the closest qualifying score gap;
/// m=3,4 add intermediate responses chosen by rank spacing.
ChoiceTask build_mtn(const corpus::RatedDialogue& dialogue, int m,
                     Difficulty difficulty, double gap_threshold,
                     std::uint64_t seed);

/// Ranking task over m tie-free responses; gold_order sorts by descending
/// score. Responses with tied scores are excluded rather than broken
/// arbitrarily.
RankTask build_rank(const corpus::RatedDialogue& dialogue, int m,
                    std::uint64_t seed);

/// Rewrite task: lowest-scored response in, highest-scored response out.
InstructionRecord build_rewrite(const corpus::RatedDialogue& dialogue,
                                const prompts::PromptAssets& assets);

/// Default hard-pair gap threshold for a corpus: 0.5 on the 0-5 rating
/// scale, 0.3 on the 0-3 scale, and the 20th percentile of positive
/// pairwise gaps for like-count corpora. Returns 0 when no positive gap
/// exists.
double default_gap_threshold(std::span<const corpus::RatedDialogue> dialogues);

inline constexpr const char* kSuccessMessage =
    "Congratulations, you got it right.";

struct TeacherStudentOptions {
  int max_attempts = 3;
  bool backend_alignment = false;  // default: exact-match check, fully offline
  corpus::Language language = corpus::Language::en;
  std::string provenance_id;
};

struct TeacherStudentResult {
  std::vector<InstructionRecord> records;  // alternating student/teacher turns
  bool matched = false;
  std::string ground_truth;
};

/// Carries the partial transcript when a backend fails mid-loop.
class LoopBackendError : public BackendError {
 public:
  LoopBackendError(const std::string& what,
                   std::vector<InstructionRecord> partial)
      : BackendError(what), partial_(std::move(partial)) {}
  const std::vector<InstructionRecord>& partial() const { return partial_; }

 private:
  std::vector<InstructionRecord> partial_;
};

/// Teacher-student prompt loop. The student answers, the alignment check
/// runs, and the teacher replies with feedback or the exact success
/// message. After max_attempts the student's last answer is accepted as
/// ground truth.
TeacherStudentResult teacher_student_loop(const std::string& question,
                                          const std::string& gold_answer,
                                          agents::ChatBackend& backend,
                                          const TeacherStudentOptions& options,
                                          const prompts::PromptAssets& assets);

/// One JSON object per line: {"instruction","input","output","family",
/// "provenance"}. Returns lines written.
std::size_t serialize_instructions(std::span<const InstructionRecord> records,
                                   std::ostream& out);
std::vector<InstructionRecord> read_instructions(std::istream& in);

/// "A) ...\nB) ...\n" options block.
std::string render_options_block(std::span<const std::string> options);
std::string render_choice_prompt(const ChoiceTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang);

InstructionRecord to_instruction(const ChoiceTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang);
InstructionRecord to_instruction(const RankTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang);

/// Evaluation JSONL: {"id","prompt","options","gold","difficulty"}; rank
/// tasks store gold as an index list with difficulty "rank".
void write_choice_tasks(std::ostream& out, std::span<const ChoiceTask> tasks);
std::vector<ChoiceTask> read_choice_tasks(std::istream& in);
void write_rank_tasks(std::ostream& out, std::span<const RankTask> tasks);

}  // namespace clost::taskforge
