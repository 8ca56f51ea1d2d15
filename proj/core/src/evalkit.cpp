#include "clost/evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "clost/error.hpp"

namespace clost::evalkit {
namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string token;
  while (in >> token) tokens.push_back(std::move(token));
  return tokens;
}

bool parse_double_token(const std::string& token, double& out) {
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

double cosine_distance(const std::vector<double>& a,
                       const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

WordVectorTable load_word_vectors(std::istream& in) {
  WordVectorTable table;
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_ws(line);
    if (tokens.empty()) continue;

    if (first_content_line) {
      first_content_line = false;
      // optional `count dim` header
      if (tokens.size() == 2) {
        long count = 0, dim = 0;
        const bool c_ok =
            std::from_chars(tokens[0].data(),
                            tokens[0].data() + tokens[0].size(), count)
                    .ec == std::errc() &&
            count >= 0;
        const bool d_ok =
            std::from_chars(tokens[1].data(),
                            tokens[1].data() + tokens[1].size(), dim)
                    .ec == std::errc() &&
            dim > 0;
        if (c_ok && d_ok) {
          table.dimension = static_cast<int>(dim);
          continue;
        }
      }
    }

    if (tokens.size() < 2) {
      throw ParseError(line_no, "expected 'word v1 ... v_dim'");
    }
    std::vector<double> vec;
    vec.reserve(tokens.size() - 1);
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      double v = 0.0;
      if (!parse_double_token(tokens[i], v)) {
        throw ParseError(line_no, "unparseable component '" + tokens[i] + "'");
      }
      vec.push_back(v);
    }
    if (table.dimension == 0) {
      table.dimension = static_cast<int>(vec.size());
    } else if (static_cast<int>(vec.size()) != table.dimension) {
      throw ParseError(line_no, "dimension mismatch: expected " +
                                    std::to_string(table.dimension) +
                                    " components, got " +
                                    std::to_string(vec.size()));
    }
    if (std::all_of(vec.begin(), vec.end(),
                    [](double v) { return v == 0.0; })) {
      throw ParseError(line_no, "zero vector for word '" + tokens[0] + "'");
    }
    if (table.entries.contains(tokens[0])) {
      table.warnings.push_back("duplicate word '" + tokens[0] +
                               "' at line " + std::to_string(line_no) +
                               ", last occurrence wins");
    }
    table.entries[tokens[0]] = std::move(vec);
  }
  return table;
}

double dat_score(std::span<const std::string> words,
                 const WordVectorTable& table) {
  if (words.size() < 2) {
    throw ValidationError("dat_score needs at least 2 words");
  }
  // deduplicate, preserving first occurrence
  std::vector<std::string> unique;
  for (const auto& w : words) {
    if (std::find(unique.begin(), unique.end(), w) == unique.end()) {
      unique.push_back(w);
    }
  }
  std::string missing;
  for (const auto& w : unique) {
    if (!table.entries.contains(w)) {
      if (!missing.empty()) missing += ", ";
      missing += w;
    }
  }
  if (!missing.empty()) {
    throw MissingWord("words not in vector table: " + missing);
  }
  if (unique.size() < 2) return 0.0;

  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unique.size(); ++i) {
    for (std::size_t j = i + 1; j < unique.size(); ++j) {
      total += cosine_distance(table.entries.at(unique[i]),
                               table.entries.at(unique[j]));
      ++pairs;
    }
  }
  return 100.0 * total / static_cast<double>(pairs);
}

int extract_option_letter(std::string_view completion, int option_count) {
  int found = -1;
  for (std::size_t i = 0; i < completion.size(); ++i) {
    const char c = completion[i];
    const char upper =
        static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper < 'A' || upper > 'D') continue;
    const bool left_ok =
        i == 0 || !std::isalnum(static_cast<unsigned char>(completion[i - 1]));
    const bool right_ok =
        i + 1 == completion.size() ||
        !std::isalnum(static_cast<unsigned char>(completion[i + 1]));
    if (!left_ok || !right_ok) continue;
    const int index = upper - 'A';
    if (found == -1) {
      found = index;
    } else if (found != index) {
      return -1;  // two distinct letters
    }
  }
  if (found < 0 || found >= option_count) return -1;
  return found;
}

ChoicePrediction judge_choice(agents::ChatBackend& backend,
                              const taskforge::ChoiceTask& task,
                              const prompts::PromptAssets& assets,
                              corpus::Language lang) {
  using agents::Message;
  ChoicePrediction prediction;
  prediction.raw = backend.complete(
      {{Message::Role::user,
        taskforge::render_choice_prompt(task, assets, lang)}},
      {0.0, 16});
  prediction.index = extract_option_letter(
      prediction.raw, static_cast<int>(task.options.size()));
  prediction.abstain = prediction.index < 0;
  return prediction;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json item_array = nlohmann::json::array();
  for (const auto& item : items) {
    item_array.push_back(
        {{"id", item.id}, {"pred", item.pred}, {"gold", item.gold}});
  }
  return nlohmann::ordered_json{{"family", task_family},
                                {"n", n_items},
                                {"correct", n_correct},
                                {"accuracy", accuracy},
                                {"items", std::move(item_array)}};
}

EvalReport eval_choice(const ChoiceJudge& judge,
                       std::span<const taskforge::ChoiceTask> tasks) {
  if (tasks.empty()) {
    throw ValidationError("eval_choice needs at least one task");
  }
  EvalReport report;
  report.n_items = tasks.size();
  for (const auto& task : tasks) {
    const ChoicePrediction prediction = judge(task);
    ItemResult item;
    item.id = task.id;
    item.pred = prediction.abstain ? -1 : prediction.index;
    item.gold = task.gold_index;
    item.correct = !prediction.abstain && prediction.index == task.gold_index;
    if (item.correct) ++report.n_correct;
    report.items.push_back(std::move(item));
  }
  report.accuracy = static_cast<double>(report.n_correct) /
                    static_cast<double>(report.n_items);
  return report;
}

ChoiceJudge oracle_judge() {
  return [](const taskforge::ChoiceTask& task) {
    return ChoicePrediction{task.gold_index, false, "oracle"};
  };
}

ChoiceJudge constant_letter_judge(char letter) {
  const int index =
      std::toupper(static_cast<unsigned char>(letter)) - 'A';
  if (index < 0 || index > 3) {
    throw ValidationError("constant judge letter must be A-D");
  }
  return [index](const taskforge::ChoiceTask& task) {
    ChoicePrediction prediction;
    prediction.raw = std::string(1, static_cast<char>('A' + index));
    if (index < static_cast<int>(task.options.size())) {
      prediction.index = index;
    } else {
      prediction.abstain = true;
    }
    return prediction;
  };
}

ChoiceJudge backend_choice_judge(agents::ChatBackend& backend,
                                 const prompts::PromptAssets& assets,
                                 corpus::Language lang) {
  return [&backend, &assets, lang](const taskforge::ChoiceTask& task) {
    return judge_choice(backend, task, assets, lang);
  };
}

gesit::PairwiseJudge backend_pairwise_judge(agents::ChatBackend& backend,
                                            const prompts::PromptAssets& assets,
                                            corpus::Language lang) {
  return [&backend, &assets, lang](const std::string& question,
                                   const std::string& a,
                                   const std::string& b) {
    using agents::Message;
    const std::string prompt = prompts::render(
        assets.get("judge_pairwise_template", lang),
        {{"question", question},
         {"options",
          taskforge::render_options_block(std::array<std::string, 2>{a, b})}});
    const std::string completion =
        backend.complete({{Message::Role::user, prompt}}, {0.0, 16});
    switch (extract_option_letter(completion, 2)) {
      case 0:
        return gesit::JudgeOutcome::first;
      case 1:
        return gesit::JudgeOutcome::second;
      default:
        return gesit::JudgeOutcome::tie;
    }
  };
}

BestOfNResult best_of_n_infer(agents::ChatBackend& generator,
                              const gesit::PairwiseJudge& judge,
                              const std::string& question,
                              const prompts::PromptAssets& assets,
                              corpus::Language lang, int n) {
  if (n < 1) {
    throw ValidationError("best-of-n needs n >= 1");
  }
  const auto generation_prompts = assets.generation_prompts(lang);
  if (generation_prompts.size() < static_cast<std::size_t>(n)) {
    throw ValidationError("need " + std::to_string(n) +
                          " generation prompts, assets provide " +
                          std::to_string(generation_prompts.size()));
  }
  using agents::Message;
  BestOfNResult result;
  for (int i = 0; i < n; ++i) {
    const std::string prompt =
        prompts::render(generation_prompts[static_cast<std::size_t>(i)],
                        {{"question", question}});
    try {
      std::string candidate = generator.complete(
          {{Message::Role::user, prompt}}, {0.9, 256});
      if (candidate.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw EmptyCompletion("generator returned an empty candidate");
      }
      result.candidates.push_back(std::move(candidate));
    } catch (const Error& e) {
      result.warnings.push_back("prompt " + std::to_string(i + 1) +
                                " failed: " + e.what());
    }
  }
  if (result.candidates.empty()) {
    throw BackendError("generator failed on all " + std::to_string(n) +
                       " prompts");
  }
  if (result.candidates.size() == 1) {
    result.winner_index = 0;
    result.winner = result.candidates.front();
    return result;
  }

  std::vector<int> wins(result.candidates.size(), 0);
  for (std::size_t i = 0; i < result.candidates.size(); ++i) {
    for (std::size_t j = i + 1; j < result.candidates.size(); ++j) {
      switch (judge(question, result.candidates[i], result.candidates[j])) {
        case gesit::JudgeOutcome::first:
          ++wins[i];
          break;
        case gesit::JudgeOutcome::second:
          ++wins[j];
          break;
        case gesit::JudgeOutcome::tie:
          break;
      }
    }
  }
  // ties break toward the earlier prompt index
  std::size_t best = 0;
  for (std::size_t i = 1; i < wins.size(); ++i) {
    if (wins[i] > wins[best]) best = i;
  }
  result.winner_index = static_cast<int>(best);
  result.winner = result.candidates[best];
  return result;
}

void write_dat_report_csv(std::ostream& out,
                          std::span<const DatReportRow> rows) {
  out << "word_set_id,n_words,score\n";
  for (const auto& row : rows) {
    out << row.word_set_id << ',' << row.n_words << ',' << row.score << '\n';
  }
}

}  // namespace clost::evalkit
