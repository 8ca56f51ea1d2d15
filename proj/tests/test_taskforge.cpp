#include "clost/taskforge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "doctest.h"

#include "clost/agents.hpp"
#include "clost/error.hpp"
#include "test_util.hpp"

using namespace clost;
using corpus::RatedDialogue;
using taskforge::ChoiceTask;
using taskforge::Difficulty;
using taskforge::Family;
using testutil::make_dialogue;

namespace {

const prompts::PromptAssets kAssets = prompts::PromptAssets::builtin();

std::string gold_text(const ChoiceTask& task) {
  return task.options[static_cast<std::size_t>(task.gold_index)];
}

// independent oracle: the unique qualifying pair with the smallest
// positive gap
struct HardPair {
  std::size_t hi, lo;
};
std::optional<HardPair> brute_force_hard_pair(const RatedDialogue& d,
                                              double threshold) {
  double best = std::numeric_limits<double>::infinity();
  std::optional<HardPair> out;
  int at_best = 0;
  for (std::size_t i = 0; i < d.responses.size(); ++i) {
    for (std::size_t j = i + 1; j < d.responses.size(); ++j) {
      const double a = d.responses[i].score, b = d.responses[j].score;
      const double gap = std::abs(a - b);
      if (gap <= 0.0 || gap > threshold || std::min(a, b) <= 0.0) continue;
      if (gap < best) {
        best = gap;
        at_best = 1;
        out = a >= b ? HardPair{i, j} : HardPair{j, i};
      } else if (gap == best) {
        ++at_best;
      }
    }
  }
  REQUIRE((!out || at_best == 1));  // the examples below keep it unique
  return out;
}

}  // namespace

TEST_CASE("easy 2T1 pairs the extreme scores") {
  const auto d = make_dialogue("q1", {5.0, 0.0});
  const auto task = taskforge::build_mtn(d, 2, Difficulty::easy, 0.5, 42);
  CHECK(task.options.size() == 2);
  CHECK(gold_text(task) == d.responses[0].text);
  CHECK(task.id == "q1:2T1");
  CHECK(task.n_select == 1);
  const std::set<std::string> options(task.options.begin(),
                                      task.options.end());
  CHECK(options ==
        std::set<std::string>{d.responses[0].text, d.responses[1].text});
}

TEST_CASE("hard 2T1 picks the closest qualifying pair") {
  const auto d = make_dialogue("q2", {4.1, 3.9, 1.0});
  const auto oracle = brute_force_hard_pair(d, 0.5);
  REQUIRE(oracle.has_value());
  CHECK(oracle->hi == 0);
  CHECK(oracle->lo == 1);

  const auto task = taskforge::build_mtn(d, 2, Difficulty::hard, 0.5, 7);
  CHECK(gold_text(task) == d.responses[oracle->hi].text);
  const std::set<std::string> options(task.options.begin(),
                                      task.options.end());
  CHECK(options == std::set<std::string>{d.responses[0].text,
                                         d.responses[1].text});
  CHECK(task.id == "q2:2T1:hard");
  CHECK(task.difficulty == Difficulty::hard);
}

TEST_CASE("mtn error taxonomy") {
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {2.0, 2.0}), 2,
                                       Difficulty::easy, 0.5, 0),
                  NoGoldDistinction);
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {1.0}), 2,
                                       Difficulty::easy, 0.5, 0),
                  NotEnoughOptions);
  // wide gap only
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {5.0, 0.5}), 2,
                                       Difficulty::hard, 0.5, 0),
                  NoHardPair);
  // close gap but one score is 0
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {0.2, 0.0, 9.0}), 2,
                                       Difficulty::hard, 0.5, 0),
                  NoHardPair);
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {3.0, 2.0, 1.0}), 3,
                                       Difficulty::hard, 0.5, 0),
                  ValidationError);
  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {3.0, 2.0}), 5,
                                       Difficulty::easy, 0.5, 0),
                  ValidationError);
}

TEST_CASE("3T1 and 4T1 add intermediate scores") {
  const auto d = make_dialogue("q3", {5.0, 4.0, 3.0, 2.0, 0.0});

  const auto three = taskforge::build_mtn(d, 3, Difficulty::easy, 0.5, 11);
  CHECK(three.options.size() == 3);
  CHECK(gold_text(three) == d.responses[0].text);
  // middle-ranked intermediate
  CHECK(std::find(three.options.begin(), three.options.end(),
                  d.responses[2].text) != three.options.end());

  const auto four = taskforge::build_mtn(d, 4, Difficulty::easy, 0.5, 11);
  CHECK(four.options.size() == 4);
  CHECK(gold_text(four) == d.responses[0].text);
  for (const auto& option : four.options) {
    const auto it =
        std::find_if(d.responses.begin(), d.responses.end(),
                     [&](const auto& r) { return r.text == option; });
    REQUIRE(it != d.responses.end());
  }
  // intermediates lie strictly between the extremes
  int intermediates = 0;
  for (const auto& option : four.options) {
    const auto it =
        std::find_if(d.responses.begin(), d.responses.end(),
                     [&](const auto& r) { return r.text == option; });
    if (it->score > 0.0 && it->score < 5.0) ++intermediates;
  }
  CHECK(intermediates == 2);

  CHECK_THROWS_AS(taskforge::build_mtn(make_dialogue("t", {5.0, 0.0}), 3,
                                       Difficulty::easy, 0.5, 0),
                  NotEnoughOptions);
}

TEST_CASE("gold text is shuffle-invariant across seeds") {
  const auto d = make_dialogue("q4", {1.0, 7.0, 3.0, 5.0});
  std::set<int> positions;
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    const auto task = taskforge::build_mtn(d, 4, Difficulty::easy, 0.5, seed);
    CHECK(gold_text(task) == d.responses[1].text);
    positions.insert(task.gold_index);
    // pairwise distinct options
    const std::set<std::string> unique(task.options.begin(),
                                       task.options.end());
    CHECK(unique.size() == task.options.size());
  }
  CHECK(positions.size() > 1);  // the shuffle does move the gold around
}

TEST_CASE("task construction is deterministic") {
  const auto d = make_dialogue("q5", {9.0, 4.0, 2.0, 1.0, 0.0});
  const auto a = taskforge::build_mtn(d, 4, Difficulty::easy, 0.3, 99);
  const auto b = taskforge::build_mtn(d, 4, Difficulty::easy, 0.3, 99);
  CHECK(a.options == b.options);
  CHECK(a.gold_index == b.gold_index);

  const auto r1 = taskforge::build_rank(d, 4, 5);
  const auto r2 = taskforge::build_rank(d, 4, 5);
  CHECK(r1.options == r2.options);
  CHECK(r1.gold_order == r2.gold_order);
}

TEST_CASE("rank tasks order by descending score") {
  const auto d = make_dialogue("q6", {3.0, 1.0, 2.0});
  const auto task = taskforge::build_rank(d, 3, 17);
  REQUIRE(task.options.size() == 3);
  REQUIRE(task.gold_order.size() == 3);

  CHECK(task.options[static_cast<std::size_t>(task.gold_order[0])] ==
        d.responses[0].text);
  CHECK(task.options[static_cast<std::size_t>(task.gold_order[1])] ==
        d.responses[2].text);
  CHECK(task.options[static_cast<std::size_t>(task.gold_order[2])] ==
        d.responses[1].text);

  std::vector<int> sorted = task.gold_order;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2});
}

TEST_CASE("rank excludes ties instead of breaking them") {
  CHECK_THROWS_AS(taskforge::build_rank(make_dialogue("t", {3.0, 3.0, 1.0}), 2,
                                        0),
                  TiedScores);
  // enough tie-free responses left: {9,8,1} after dropping the 3s
  const auto d = make_dialogue("t2", {3.0, 9.0, 3.0, 8.0, 1.0});
  const auto task = taskforge::build_rank(d, 3, 2);
  for (const auto& option : task.options) {
    CHECK(option != d.responses[0].text);
    CHECK(option != d.responses[2].text);
  }
}

TEST_CASE("rewrite pairs argmin with argmax") {
  const auto d = make_dialogue("q7", {4.0, 1.0, 0.0});
  const auto record = taskforge::build_rewrite(d, kAssets);
  CHECK(record.input == d.responses[2].text);
  CHECK(record.target == d.responses[0].text);
  CHECK(record.family == Family::rewrite);
  CHECK(record.provenance == "q7:rewrite");

  CHECK_THROWS_AS(
      taskforge::build_rewrite(make_dialogue("t", {2.0}), kAssets),
      NoGoldDistinction);
  CHECK_THROWS_AS(
      taskforge::build_rewrite(make_dialogue("t", {2.0, 2.0}), kAssets),
      NoGoldDistinction);
}

TEST_CASE("default gap threshold per corpus") {
  auto tagged = [](corpus::Source source) {
    auto d = make_dialogue("x", {1.0, 2.0});
    d.corpus = source;
    return std::vector<RatedDialogue>{d};
  };
  CHECK(taskforge::default_gap_threshold(tagged(corpus::Source::semeval2021)) ==
        0.5);
  CHECK(taskforge::default_gap_threshold(tagged(corpus::Source::semeval2020)) ==
        0.3);

  // like counts: 20th percentile of positive pairwise gaps {1,2,3,4,6} -> 1
  std::vector<RatedDialogue> generic = {
      make_dialogue("a", {10.0, 8.0}), make_dialogue("b", {5.0, 1.0}),
      make_dialogue("c", {7.0, 7.0}),  make_dialogue("d", {3.0, 2.0}),
      make_dialogue("e", {9.0, 3.0}),  make_dialogue("f", {4.0, 1.0})};
  CHECK(taskforge::default_gap_threshold(generic) == doctest::Approx(1.0));
}

TEST_CASE("teacher-student loop, success on first attempt") {
  agents::ScriptedBackend backend(
      std::vector<std::string>{"To get to the other side."});
  taskforge::TeacherStudentOptions options;
  options.max_attempts = 3;
  options.provenance_id = "q1";
  const auto result = taskforge::teacher_student_loop(
      "Why did the chicken cross the road?", "To get to the other side.",
      backend, options, kAssets);

  REQUIRE(result.records.size() == 2);
  CHECK(result.matched);
  CHECK(result.records[1].target == taskforge::kSuccessMessage);
  CHECK(result.records[0].family == Family::teacher_student);
  CHECK(backend.calls() == 1);  // the success turn needs no backend call
}

TEST_CASE("teacher-student loop accepts the last answer at the cap") {
  agents::ScriptedBackend backend(std::vector<std::string>{
      "s1", "hint1", "s2", "hint2", "s3", "hint3"});
  taskforge::TeacherStudentOptions options;
  options.max_attempts = 3;
  const auto result = taskforge::teacher_student_loop("Q?", "never-matched",
                                                      backend, options,
                                                      kAssets);
  REQUIRE(result.records.size() == 6);
  CHECK_FALSE(result.matched);
  CHECK(result.ground_truth == "s3");
  CHECK(result.records[4].target == "s3");
  CHECK(result.records[4].provenance.ends_with(":accepted_ground_truth"));
  CHECK(backend.calls() == 6);
}

TEST_CASE("teacher-student loop preconditions and failure") {
  agents::ScriptedBackend backend(std::vector<std::string>{"s1"});
  taskforge::TeacherStudentOptions options;
  options.max_attempts = 0;
  CHECK_THROWS_AS(
      taskforge::teacher_student_loop("Q?", "gold", backend, options, kAssets),
      ValidationError);

  options.max_attempts = 2;
  try {
    taskforge::teacher_student_loop("Q?", "gold", backend, options, kAssets);
    FAIL("expected LoopBackendError");
  } catch (const taskforge::LoopBackendError& e) {
    CHECK(e.partial().size() == 1);  // the student turn survived
  }
}

TEST_CASE("teacher-student backend alignment check") {
  agents::ScriptedBackend backend(std::vector<std::string>{
      "s1", R"({"aligned": false})", "hint1",
      "s2", R"({"aligned": true})"});
  taskforge::TeacherStudentOptions options;
  options.max_attempts = 3;
  options.backend_alignment = true;
  const auto result = taskforge::teacher_student_loop("Q?", "ideal", backend,
                                                      options, kAssets);
  REQUIRE(result.records.size() == 4);
  CHECK(result.matched);
  CHECK(result.records[3].target == taskforge::kSuccessMessage);
  CHECK(backend.calls() == 5);
}

TEST_CASE("instruction serialization round-trips") {
  std::vector<taskforge::InstructionRecord> records = {
      {"do x", "in", "out", Family::choice, "q7:mtn(m=4)"},
      {"do y", "", "target", Family::evolved, "q8:aaie:round2"},
      {"do z", "im", "t2", Family::rewrite, "q9:rewrite"}};
  std::ostringstream out;
  CHECK(taskforge::serialize_instructions(records, out) == 3);

  std::istringstream in(out.str());
  const auto reread = taskforge::read_instructions(in);
  REQUIRE(reread.size() == 3);
  CHECK(reread == records);
  CHECK(reread[0].provenance == "q7:mtn(m=4)");

  std::ostringstream empty;
  CHECK(taskforge::serialize_instructions({}, empty) == 0);
  CHECK(empty.str().empty());
}

TEST_CASE("choice task rendering and instruction targets") {
  const auto d = make_dialogue("q8", {5.0, 0.0});
  const auto task = taskforge::build_mtn(d, 2, Difficulty::easy, 0.5, 3);
  const auto record =
      taskforge::to_instruction(task, kAssets, corpus::Language::en);
  CHECK(record.family == Family::choice);
  CHECK(record.target ==
        std::string(1, static_cast<char>('A' + task.gold_index)));
  CHECK(record.instruction.find("A) ") != std::string::npos);
  CHECK(record.instruction.find("What happened?") != std::string::npos);

  // the null prompt switches to the standalone template
  auto standalone = make_dialogue("q9", {5.0, 0.0}, corpus::kNullPrompt);
  const auto stask =
      taskforge::build_mtn(standalone, 2, Difficulty::easy, 0.5, 3);
  const auto srecord =
      taskforge::to_instruction(stask, kAssets, corpus::Language::en);
  CHECK(srecord.instruction.find("standalone") != std::string::npos);
  CHECK(srecord.instruction.find("Question:") == std::string::npos);
}

TEST_CASE("rank instruction target lists letters by gold order") {
  const auto d = make_dialogue("q10", {3.0, 1.0, 2.0});
  const auto task = taskforge::build_rank(d, 3, 17);
  const auto record =
      taskforge::to_instruction(task, kAssets, corpus::Language::en);
  CHECK(record.family == Family::rank);
  REQUIRE(record.target.size() == 7);  // "X > Y > Z"
  CHECK(record.target[0] == static_cast<char>('A' + task.gold_order[0]));
  CHECK(record.target[4] == static_cast<char>('A' + task.gold_order[1]));
}

TEST_CASE("choice task JSONL round-trip") {
  const auto d = make_dialogue("q11", {5.0, 2.0, 1.0, 0.0});
  std::vector<ChoiceTask> tasks = {
      taskforge::build_mtn(d, 2, Difficulty::easy, 0.5, 1),
      taskforge::build_mtn(d, 4, Difficulty::easy, 0.5, 2)};
  std::ostringstream out;
  taskforge::write_choice_tasks(out, tasks);

  std::istringstream in(out.str());
  const auto reread = taskforge::read_choice_tasks(in);
  REQUIRE(reread.size() == 2);
  CHECK(reread[0].id == tasks[0].id);
  CHECK(reread[0].options == tasks[0].options);
  CHECK(reread[0].gold_index == tasks[0].gold_index);
  CHECK(reread[1].difficulty == Difficulty::easy);
}
