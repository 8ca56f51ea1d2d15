#include "clost/taskforge.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "clost/agents.hpp"
#include "clost/rng.hpp"

namespace clost::taskforge {
namespace {

using corpus::RatedDialogue;
using corpus::RatedResponse;
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

std::size_t argmax_score(const std::vector<RatedResponse>& responses) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < responses.size(); ++i) {
    if (responses[i].score > responses[best].score) best = i;
  }
  return best;
}

std::size_t argmin_score(const std::vector<RatedResponse>& responses) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < responses.size(); ++i) {
    if (responses[i].score < responses[best].score) best = i;
  }
  return best;
}

bool all_scores_equal(const std::vector<RatedResponse>& responses) {
  for (const auto& r : responses) {
    if (r.score != responses.front().score) return false;
  }
  return true;
}

std::string task_id(const RatedDialogue& dialogue, int m,
                    Difficulty difficulty) {
  std::string id = dialogue.id + ":" + std::to_string(m) + "T1";
  if (difficulty == Difficulty::hard) id += ":hard";
  return id;
}

}  // namespace

std::string to_string(Difficulty d) {
  return d == Difficulty::hard ? "hard" : "easy";
}

std::string to_string(Family f) {
  switch (f) {
    case Family::choice:
      return "choice";
    case Family::rank:
      return "rank";
    case Family::rewrite:
      return "rewrite";
    case Family::teacher_student:
      return "teacher_student";
    case Family::evolved:
      return "evolved";
  }
  return "choice";
}

Difficulty difficulty_from_string(std::string_view s) {
  if (s == "easy") return Difficulty::easy;
  if (s == "hard") return Difficulty::hard;
  throw ValidationError("unknown difficulty '" + std::string(s) + "'");
}

Family family_from_string(std::string_view s) {
  if (s == "choice") return Family::choice;
  if (s == "rank") return Family::rank;
  if (s == "rewrite") return Family::rewrite;
  if (s == "teacher_student") return Family::teacher_student;
  if (s == "evolved") return Family::evolved;
  throw ValidationError("unknown family '" + std::string(s) + "'");
}

ChoiceTask build_mtn(const RatedDialogue& dialogue, int m,
                     Difficulty difficulty, double gap_threshold,
                     std::uint64_t seed) {
  if (m < 2 || m > 4) {
    throw ValidationError("m must be 2, 3, or 4");
  }
  if (difficulty == Difficulty::hard && m != 2) {
    throw ValidationError("hard tasks are defined for m=2 only");
  }
  const auto& responses = dialogue.responses;
  if (responses.size() < static_cast<std::size_t>(m)) {
    throw NotEnoughOptions("dialogue " + dialogue.id + " has " +
                           std::to_string(responses.size()) +
                           " responses, need " + std::to_string(m));
  }
  if (all_scores_equal(responses)) {
    throw NoGoldDistinction("all scores equal in dialogue " + dialogue.id);
  }

  std::string gold_text;
  std::vector<std::string> options;

  if (difficulty == Difficulty::hard) {
    // the closest positive gap with both scores > 0 and distinct texts
    std::size_t best_i = 0, best_j = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < responses.size(); ++i) {
      for (std::size_t j = i + 1; j < responses.size(); ++j) {
        const double gap = std::abs(responses[i].score - responses[j].score);
        if (gap <= 0.0 || gap > gap_threshold) continue;
        if (std::min(responses[i].score, responses[j].score) <= 0.0) continue;
        if (responses[i].text == responses[j].text) continue;
        if (gap < best_gap) {
          best_gap = gap;
          best_i = i;
          best_j = j;
        }
      }
    }
    if (!std::isfinite(best_gap)) {
      throw NoHardPair("no response pair within gap " +
                       std::to_string(gap_threshold) + " in dialogue " +
                       dialogue.id);
    }
    const auto& hi = responses[best_i].score >= responses[best_j].score
                         ? responses[best_i]
                         : responses[best_j];
    const auto& lo = responses[best_i].score >= responses[best_j].score
                         ? responses[best_j]
                         : responses[best_i];
    gold_text = hi.text;
    options = {hi.text, lo.text};
  } else {
    const std::size_t max_idx = argmax_score(responses);
    const double max_score = responses[max_idx].score;
    const double min_score = responses[argmin_score(responses)].score;
    gold_text = responses[max_idx].text;

    // first lowest-scored response whose text differs from the gold
    std::string min_text;
    bool found_min = false;
    for (const auto& r : responses) {
      if (r.score == min_score && r.text != gold_text) {
        min_text = r.text;
        found_min = true;
        break;
      }
    }
    if (!found_min) {
      throw NotEnoughOptions("no distinct lowest-scored text in dialogue " +
                             dialogue.id);
    }

    options = {gold_text};
    if (m > 2) {
      // intermediate candidates between min and max, by descending score
      std::vector<const RatedResponse*> mids;
      for (const auto& r : responses) {
        if (r.score <= min_score || r.score >= max_score) continue;
        if (r.text == gold_text || r.text == min_text) continue;
        const bool dup = std::any_of(
            mids.begin(), mids.end(),
            [&](const RatedResponse* p) { return p->text == r.text; });
        if (!dup) mids.push_back(&r);
      }
      std::stable_sort(mids.begin(), mids.end(),
                       [](const RatedResponse* a, const RatedResponse* b) {
                         return a->score > b->score;
                       });
      const std::size_t need = static_cast<std::size_t>(m - 2);
      if (mids.size() < need) {
        throw NotEnoughOptions("dialogue " + dialogue.id + " has " +
                               std::to_string(mids.size()) +
                               " intermediate-scored responses, need " +
                               std::to_string(need));
      }
      // evenly spaced score ranks between the extremes
      for (std::size_t j = 1; j <= need; ++j) {
        options.push_back(mids[j * mids.size() / (need + 1)]->text);
      }
    }
    options.push_back(min_text);
  }

  rng::Engine eng(seed);
  rng::shuffle(options, eng);

  ChoiceTask task;
  task.id = task_id(dialogue, m, difficulty);
  task.prompt_text = dialogue.prompt_text;
  task.options = std::move(options);
  task.gold_index = static_cast<int>(
      std::find(task.options.begin(), task.options.end(), gold_text) -
      task.options.begin());
  task.n_select = 1;
  task.difficulty = difficulty;
  task.shuffle_seed = seed;
  return task;
}

RankTask build_rank(const RatedDialogue& dialogue, int m, std::uint64_t seed) {
  if (m < 2) {
    throw ValidationError("rank tasks need m >= 2");
  }
  const auto& responses = dialogue.responses;

  // responses whose score is unique within the dialogue; tied groups are
  // excluded entirely
  bool had_ties = false;
  std::vector<const RatedResponse*> pool;
  for (const auto& r : responses) {
    const auto same_score =
        std::count_if(responses.begin(), responses.end(),
                      [&](const RatedResponse& o) { return o.score == r.score; });
    if (same_score > 1) {
      had_ties = true;
      continue;
    }
    const bool dup_text = std::any_of(
        pool.begin(), pool.end(),
        [&](const RatedResponse* p) { return p->text == r.text; });
    if (!dup_text) pool.push_back(&r);
  }
  if (pool.size() < static_cast<std::size_t>(m)) {
    if (had_ties) {
      throw TiedScores("dialogue " + dialogue.id +
                       " lacks " + std::to_string(m) +
                       " tie-free responses");
    }
    throw NotEnoughOptions("dialogue " + dialogue.id + " has " +
                           std::to_string(pool.size()) +
                           " usable responses, need " + std::to_string(m));
  }

  std::stable_sort(pool.begin(), pool.end(),
                   [](const RatedResponse* a, const RatedResponse* b) {
                     return a->score > b->score;
                   });
  pool.resize(static_cast<std::size_t>(m));

  std::vector<std::pair<std::string, double>> entries;
  entries.reserve(pool.size());
  for (const auto* r : pool) entries.emplace_back(r->text, r->score);
  rng::Engine eng(seed);
  rng::shuffle(entries, eng);

  RankTask task;
  task.id = dialogue.id + ":rank" + std::to_string(m);
  task.prompt_text = dialogue.prompt_text;
  task.gold_order.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    task.options.push_back(entries[i].first);
    task.gold_order[i] = static_cast<int>(i);
  }
  std::sort(task.gold_order.begin(), task.gold_order.end(),
            [&](int a, int b) { return entries[a].second > entries[b].second; });
  return task;
}

InstructionRecord build_rewrite(const RatedDialogue& dialogue,
                                const prompts::PromptAssets& assets) {
  const auto& responses = dialogue.responses;
  const std::size_t lo = argmin_score(responses);
  const std::size_t hi = argmax_score(responses);
  if (responses[lo].score == responses[hi].score ||
      responses[lo].text == responses[hi].text) {
    throw NoGoldDistinction("dialogue " + dialogue.id +
                            " has no score spread to rewrite across");
  }
  InstructionRecord record;
  record.instruction = assets.get("rewrite_template", dialogue.language);
  record.input = responses[lo].text;
  record.target = responses[hi].text;
  record.family = Family::rewrite;
  record.provenance = dialogue.id + ":rewrite";
  return record;
}

double default_gap_threshold(
    std::span<const corpus::RatedDialogue> dialogues) {
  if (dialogues.empty()) return 0.0;
  switch (dialogues.front().corpus) {
    case corpus::Source::semeval2021:
      return 0.5;
    case corpus::Source::semeval2020:
      return 0.3;
    default:
      break;
  }
  // like-count corpora: 20th percentile of positive pairwise gaps
  std::vector<double> gaps;
  for (const auto& d : dialogues) {
    for (std::size_t i = 0; i < d.responses.size(); ++i) {
      for (std::size_t j = i + 1; j < d.responses.size(); ++j) {
        const double gap =
            std::abs(d.responses[i].score - d.responses[j].score);
        if (gap > 0.0) gaps.push_back(gap);
      }
    }
  }
  if (gaps.empty()) return 0.0;
  std::sort(gaps.begin(), gaps.end());
  return gaps[(gaps.size() - 1) * 20 / 100];
}

TeacherStudentResult teacher_student_loop(const std::string& question,
                                          const std::string& gold_answer,
                                          agents::ChatBackend& backend,
                                          const TeacherStudentOptions& options,
                                          const prompts::PromptAssets& assets) {
  if (options.max_attempts < 1) {
    throw ValidationError("max_attempts must be >= 1");
  }
  using agents::Message;
  const corpus::Language lang = options.language;
  const std::string prov = options.provenance_id.empty()
                               ? std::string("teacher_student")
                               : options.provenance_id + ":teacher_student";

  TeacherStudentResult result;
  std::vector<std::string> feedbacks;

  auto run = [&](const std::string& system,
                 const std::string& user) -> std::string {
    std::string reply = backend.complete(
        {{Message::Role::system, system}, {Message::Role::user, user}},
        {0.7, 512});
    if (trim(reply).empty()) {
      throw EmptyCompletion("empty completion in teacher-student loop");
    }
    return std::string(trim(reply));
  };

  try {
    for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
      std::string student_input = "Question: " + question;
      if (!feedbacks.empty()) {
        student_input += "\nTeacher feedback so far:";
        for (const auto& f : feedbacks) student_input += "\n- " + f;
      }
      const std::string student_answer =
          run(assets.get("student_system", lang), student_input);
      result.records.push_back({assets.get("student_instruction", lang),
                                student_input, student_answer,
                                Family::teacher_student,
                                prov + ":attempt" + std::to_string(attempt) +
                                    ":student"});

      bool aligned = false;
      if (options.backend_alignment) {
        const nlohmann::json verdict = agents::parse_json_completion(
            run(assets.get("alignment_system", lang),
                "Question: " + question + "\nReference answer: " +
                    gold_answer + "\nStudent answer: " + student_answer));
        if (!verdict.contains("aligned") || !verdict["aligned"].is_boolean()) {
          throw FormatError("alignment check must return {\"aligned\": bool}");
        }
        aligned = verdict["aligned"].get<bool>();
      } else {
        aligned = trim(student_answer) == trim(gold_answer);
      }

      const std::string teacher_input =
          "Question: " + question + "\nIdeal answer: " + gold_answer +
          "\nStudent answer: " + student_answer;
      if (aligned) {
        result.records.push_back({assets.get("teacher_instruction", lang),
                                  teacher_input, kSuccessMessage,
                                  Family::teacher_student,
                                  prov + ":attempt" + std::to_string(attempt) +
                                      ":teacher"});
        result.matched = true;
        result.ground_truth = gold_answer;
        return result;
      }
      const std::string feedback =
          run(assets.get("teacher_system", lang), teacher_input);
      result.records.push_back({assets.get("teacher_instruction", lang),
                                teacher_input, feedback,
                                Family::teacher_student,
                                prov + ":attempt" + std::to_string(attempt) +
                                    ":teacher"});
      feedbacks.push_back(feedback);
    }
  } catch (const Error& e) {
    throw LoopBackendError(e.what(), std::move(result.records));
  }

  // cap reached: the student's last response becomes the ground truth
  for (auto it = result.records.rbegin(); it != result.records.rend(); ++it) {
    if (it->provenance.ends_with(":student")) {
      result.ground_truth = it->target;
      it->provenance += ":accepted_ground_truth";
      break;
    }
  }
  result.matched = false;
  return result;
}

std::size_t serialize_instructions(std::span<const InstructionRecord> records,
                                   std::ostream& out) {
  std::size_t written = 0;
  for (const auto& r : records) {
    if (trim(r.instruction).empty() || trim(r.target).empty()) {
      throw ValidationError(
          "instruction records need non-empty instruction and target (" +
          r.provenance + ")");
    }
    const ordered_json obj = {{"instruction", r.instruction},
                              {"input", r.input},
                              {"output", r.target},
                              {"family", to_string(r.family)},
                              {"provenance", r.provenance}};
    out << obj.dump() << '\n';
    ++written;
  }
  return written;
}

std::vector<InstructionRecord> read_instructions(std::istream& in) {
  std::vector<InstructionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError(line_no, "invalid instruction record");
    }
    InstructionRecord record;
    record.instruction = obj.at("instruction").get<std::string>();
    record.input = obj.value("input", std::string{});
    record.target = obj.at("output").get<std::string>();
    record.family = family_from_string(obj.at("family").get<std::string>());
    record.provenance = obj.value("provenance", std::string{});
    records.push_back(std::move(record));
  }
  return records;
}

std::string render_options_block(std::span<const std::string> options) {
  std::string block;
  for (std::size_t i = 0; i < options.size(); ++i) {
    block += static_cast<char>('A' + i);
    block += ") ";
    block += options[i];
    block += '\n';
  }
  return block;
}

std::string render_choice_prompt(const ChoiceTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang) {
  const bool standalone = task.prompt_text == corpus::kNullPrompt;
  const std::string& tmpl = assets.get(
      standalone ? "choice_template_standalone" : "choice_template", lang);
  return prompts::render(tmpl,
                         {{"m", std::to_string(task.options.size())},
                          {"question", task.prompt_text},
                          {"options", render_options_block(task.options)}});
}

InstructionRecord to_instruction(const ChoiceTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang) {
  InstructionRecord record;
  record.instruction = render_choice_prompt(task, assets, lang);
  record.target = std::string(1, static_cast<char>('A' + task.gold_index));
  record.family = Family::choice;
  record.provenance = task.id;
  return record;
}

InstructionRecord to_instruction(const RankTask& task,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang) {
  InstructionRecord record;
  record.instruction = prompts::render(
      assets.get("rank_template", lang),
      {{"m", std::to_string(task.options.size())},
       {"question", task.prompt_text},
       {"options", render_options_block(task.options)}});
  std::string target;
  for (std::size_t i = 0; i < task.gold_order.size(); ++i) {
    if (i) target += " > ";
    target += static_cast<char>('A' + task.gold_order[i]);
  }
  record.target = std::move(target);
  record.family = Family::rank;
  record.provenance = task.id;
  return record;
}

void write_choice_tasks(std::ostream& out, std::span<const ChoiceTask> tasks) {
  for (const auto& t : tasks) {
    const ordered_json obj = {{"id", t.id},
                              {"prompt", t.prompt_text},
                              {"options", t.options},
                              {"gold", t.gold_index},
                              {"difficulty", to_string(t.difficulty)}};
    out << obj.dump() << '\n';
  }
}

std::vector<ChoiceTask> read_choice_tasks(std::istream& in) {
  std::vector<ChoiceTask> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError(line_no, "invalid task record");
    }
    if (!obj.at("gold").is_number_integer()) {
      continue;  // rank rows share the file format but not the gold type
    }
    ChoiceTask task;
    task.id = obj.at("id").get<std::string>();
    task.prompt_text = obj.at("prompt").get<std::string>();
    task.options = obj.at("options").get<std::vector<std::string>>();
    task.gold_index = obj.at("gold").get<int>();
    task.difficulty =
        difficulty_from_string(obj.value("difficulty", "easy"));
    if (task.options.empty() || task.gold_index < 0 ||
        task.gold_index >= static_cast<int>(task.options.size())) {
      throw ParseError(line_no, "gold index out of range");
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void write_rank_tasks(std::ostream& out, std::span<const RankTask> tasks) {
  for (const auto& t : tasks) {
    const ordered_json obj = {{"id", t.id},
                              {"prompt", t.prompt_text},
                              {"options", t.options},
                              {"gold", t.gold_order},
                              {"difficulty", "rank"}};
    out << obj.dump() << '\n';
  }
}

}  // namespace clost::taskforge
