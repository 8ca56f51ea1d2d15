#include "clost/agents.hpp"

#include <algorithm>
#include <fstream>
#include <thread>

#include "clost/error.hpp"

namespace clost::agents {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string render_conversation(const Conversation& conv) {
  return "Q: " + conv.question + "\nA: " + conv.answer;
}

std::string nonempty_completion(ChatBackend& backend,
                                const std::vector<Message>& messages,
                                const CompletionParams& params) {
  std::string reply = backend.complete(messages, params);
  if (trim(reply).empty()) {
    throw EmptyCompletion("backend '" + backend.label() +
                          "' returned an empty completion");
  }
  return reply;
}

/// Requests a structured completion, reprompting once with the expected
/// shape on any wire-format violation (unparseable JSON or bad fields).
template <typename Parse>
auto structured_completion(ChatBackend& backend, std::vector<Message> messages,
                           const CompletionParams& params,
                           const std::string& shape, Parse parse) {
  const std::string completion = backend.complete(messages, params);
  try {
    return parse(parse_json_completion(completion));
  } catch (const FormatError&) {
    messages.push_back({Message::Role::assistant, completion});
    messages.push_back({Message::Role::user,
                        "Reply with exactly one JSON object of the form " +
                            shape + " and nothing else."});
    return parse(parse_json_completion(backend.complete(messages, params)));
  }
}

Conversation parse_conversation(const nlohmann::json& obj) {
  if (!obj.contains("question") || !obj["question"].is_string() ||
      !obj.contains("answer") || !obj["answer"].is_string()) {
    throw FormatError("expected {\"question\": str, \"answer\": str}");
  }
  Conversation conv{obj["question"].get<std::string>(),
                    obj["answer"].get<std::string>()};
  if (trim(conv.question).empty() || trim(conv.answer).empty()) {
    throw FormatError("imagined conversation has an empty field");
  }
  return conv;
}

AnalystVerdict parse_verdict(const nlohmann::json& obj,
                             const EvolutionRule& rule) {
  if (!obj.contains("same_punchline") || !obj["same_punchline"].is_boolean() ||
      !obj.contains("more_complex") || !obj["more_complex"].is_boolean()) {
    throw FormatError(
        "expected {\"same_punchline\": bool, \"more_complex\": bool, "
        "\"new_rule\": str|null}");
  }
  AnalystVerdict verdict;
  verdict.same_punchline = obj["same_punchline"].get<bool>();
  verdict.more_complex = obj["more_complex"].get<bool>();
  if (!verdict.same_punchline && !verdict.more_complex) {
    if (!obj.contains("new_rule") || !obj["new_rule"].is_string() ||
        trim(obj["new_rule"].get<std::string>()).empty()) {
      throw FormatError(
          "analyst must supply new_rule when the instruction is neither "
          "convergent nor more complex");
    }
    verdict.new_rule =
        EvolutionRule{obj["new_rule"].get<std::string>(), rule.version + 1};
  }
  return verdict;
}

}  // namespace

std::string to_string(Message::Role role) {
  switch (role) {
    case Message::Role::system:
      return "system";
    case Message::Role::user:
      return "user";
    case Message::Role::assistant:
      return "assistant";
  }
  return "user";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::punchline_converged:
      return "punchline_converged";
    case StopReason::round_cap:
      return "round_cap";
    case StopReason::backend_error:
      return "backend_error";
  }
  return "backend_error";
}

ScriptedBackend::ScriptedBackend(std::vector<std::string> replies, Mode mode)
    : mode_(mode), replies_(std::move(replies)) {
  if (mode_ == Mode::rules) {
    throw ValidationError("rules mode requires Rule entries");
  }
}

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules,
                                 std::optional<std::string> fallback)
    : mode_(Mode::rules), rules_(std::move(rules)),
      fallback_(std::move(fallback)) {}

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& spec) {
  if (spec.is_array()) {
    return ScriptedBackend(spec.get<std::vector<std::string>>());
  }
  if (!spec.is_object()) {
    throw ValidationError("scripted backend spec must be an array or object");
  }
  const std::string mode = spec.value("mode", "sequence");
  if (mode == "rules") {
    std::vector<Rule> rules;
    for (const auto& r : spec.value("rules", nlohmann::json::array())) {
      rules.push_back({r.at("contains").get<std::string>(),
                       r.at("reply").get<std::string>()});
    }
    std::optional<std::string> fallback;
    if (spec.contains("default")) {
      fallback = spec["default"].get<std::string>();
    }
    return ScriptedBackend(std::move(rules), std::move(fallback));
  }
  auto replies = spec.value("replies", std::vector<std::string>{});
  if (mode == "cycle") {
    return ScriptedBackend(std::move(replies), Mode::cycle);
  }
  if (mode == "sequence") {
    return ScriptedBackend(std::move(replies), Mode::sequence);
  }
  throw ValidationError("unknown scripted backend mode '" + mode + "'");
}

ScriptedBackend ScriptedBackend::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open scripted backend file: " +
                          path.string());
  }
  nlohmann::json spec = nlohmann::json::parse(in, nullptr, false);
  if (spec.is_discarded()) {
    throw ValidationError("scripted backend file is not valid JSON: " +
                          path.string());
  }
  return from_json(spec);
}

std::string ScriptedBackend::complete(const std::vector<Message>& messages,
                                      const CompletionParams&) {
  call_log_.push_back(messages);
  if (mode_ == Mode::rules) {
    const auto last_user =
        std::find_if(messages.rbegin(), messages.rend(), [](const Message& m) {
          return m.role == Message::Role::user;
        });
    const std::string_view haystack =
        last_user == messages.rend() ? std::string_view{} : last_user->content;
    for (const auto& rule : rules_) {
      if (haystack.find(rule.contains) != std::string_view::npos) {
        return rule.reply;
      }
    }
    if (fallback_) return *fallback_;
    throw BackendError("scripted backend: no rule matched the user message");
  }
  if (replies_.empty()) {
    throw BackendError("scripted backend has no replies");
  }
  if (mode_ == Mode::cycle) {
    return replies_[next_++ % replies_.size()];
  }
  if (next_ >= replies_.size()) {
    throw BackendError("scripted backend exhausted after " +
                       std::to_string(replies_.size()) + " replies");
  }
  return replies_[next_++];
}

nlohmann::json parse_json_completion(const std::string& completion) {
  std::string_view text = trim(completion);
  if (text.starts_with("```")) {
    const auto first_newline = text.find('\n');
    const auto last_fence = text.rfind("```");
    if (first_newline != std::string_view::npos &&
        last_fence != std::string_view::npos && last_fence > first_newline) {
      text = trim(text.substr(first_newline + 1, last_fence - first_newline - 1));
    }
  }
  nlohmann::json obj = nlohmann::json::parse(text, nullptr, false);
  if (obj.is_discarded()) {
    // tolerate surrounding prose around a single object
    const auto open = text.find('{');
    const auto close = text.rfind('}');
    if (open != std::string_view::npos && close != std::string_view::npos &&
        close > open) {
      obj = nlohmann::json::parse(text.substr(open, close - open + 1), nullptr,
                                  false);
    }
  }
  if (obj.is_discarded() || !obj.is_object()) {
    throw FormatError("completion is not a single JSON object");
  }
  return obj;
}

std::pair<Instruction, std::string> rewriter_step(
    const Conversation& conv, const Instruction& instr,
    const EvolutionRule& rule, ChatBackend& backend,
    const prompts::PromptAssets& assets, corpus::Language lang,
    const AgentParams& params) {
  const CompletionParams cp{params.creative_temperature, params.max_tokens};
  const std::string& system = assets.get("rewriter_system", lang);

  const std::string rewritten = nonempty_completion(
      backend,
      {{Message::Role::system, system},
       {Message::Role::user,
        "Rewriting rule: " + rule.text + "\n\nConversation:\n" +
            render_conversation(conv) + "\n\nInstruction to rewrite: " +
            instr.text + "\n\nReply with the rewritten instruction only."}},
      cp);

  Instruction next{std::string(trim(rewritten)), instr.generation + 1};

  const std::string reply = nonempty_completion(
      backend,
      {{Message::Role::system, system},
       {Message::Role::user, "Conversation:\n" + render_conversation(conv) +
                                 "\n\nInstruction: " + next.text +
                                 "\n\nAnswer the instruction."}},
      cp);
  return {std::move(next), std::string(trim(reply))};
}

Conversation imaginator_step(const Instruction& instr,
                             const std::string& reply, ChatBackend& backend,
                             const prompts::PromptAssets& assets,
                             corpus::Language lang, const AgentParams& params) {
  if (instr.generation < 1) {
    throw ValidationError("imaginator requires an evolved instruction");
  }
  return structured_completion(
      backend,
      {{Message::Role::system, assets.get("imaginator_system", lang)},
       {Message::Role::user, "Instruction: " + instr.text + "\nAnswer: " +
                                 reply + "\n\nImagine one new conversation."}},
      {params.creative_temperature, params.max_tokens},
      "{\"question\": str, \"answer\": str}", parse_conversation);
}

AnalystVerdict analyst_step(const Conversation& original,
                            const Conversation& imagined,
                            const Instruction& seed_instruction,
                            const Instruction& current_instruction,
                            const EvolutionRule& rule, ChatBackend& backend,
                            const prompts::PromptAssets& assets,
                            corpus::Language lang, const AgentParams& params) {
  const std::string user =
      "Conversation 1 (original):\n" + render_conversation(original) +
      "\n\nConversation 2 (imagined):\n" + render_conversation(imagined) +
      "\n\nSeed instruction i0: " + seed_instruction.text +
      "\nCurrent instruction i" + std::to_string(current_instruction.generation) +
      ": " + current_instruction.text + "\nCurrent rewriting rule: " +
      rule.text;
  return structured_completion(
      backend,
      {{Message::Role::system, assets.get("analyst_system", lang)},
       {Message::Role::user, user}},
      {params.analyst_temperature, params.max_tokens},
      "{\"same_punchline\": bool, \"more_complex\": bool, \"new_rule\": "
      "str|null}",
      [&rule](const nlohmann::json& obj) { return parse_verdict(obj, rule); });
}

EvolutionTrace evolve(const std::string& dialogue_id,
                      const Conversation& original,
                      const Instruction& seed_instruction,
                      const EvolutionRule& seed_rule, ChatBackend& backend,
                      const prompts::PromptAssets& assets,
                      const EvolveOptions& options) {
  if (options.m_k < 1) {
    throw ValidationError("m_k must be >= 1");
  }
  EvolutionTrace trace;
  trace.dialogue_id = dialogue_id;
  trace.original = original;
  trace.m_k = options.m_k;

  Conversation working = original;
  Instruction instruction = seed_instruction;
  EvolutionRule rule = seed_rule;

  for (int round = 1; round <= options.m_k; ++round) {
    Round entry;
    try {
      auto [next_instruction, reply] = rewriter_step(
          working, instruction, rule, backend, assets, options.language,
          options.params);
      entry.instruction = next_instruction;
      entry.reply = reply;
      entry.conversation = imaginator_step(next_instruction, reply, backend,
                                           assets, options.language,
                                           options.params);
      entry.verdict = analyst_step(original, entry.conversation,
                                   seed_instruction, next_instruction, rule,
                                   backend, assets, options.language,
                                   options.params);
    } catch (const Error& e) {
      trace.stop_reason = StopReason::backend_error;
      trace.error = e.what();
      return trace;
    }
    instruction = entry.instruction;
    const AnalystVerdict verdict = entry.verdict;
    trace.rounds.push_back(std::move(entry));

    const bool stop = options.stop_on_same_punchline
                          ? verdict.same_punchline
                          : !verdict.same_punchline;
    if (stop) {
      trace.stop_reason = StopReason::punchline_converged;
      return trace;
    }
    if (verdict.same_punchline || verdict.more_complex) {
      working = trace.rounds.back().conversation;
    } else {
      rule = *verdict.new_rule;
    }
  }
  trace.stop_reason = StopReason::round_cap;
  return trace;
}

EvolveCorpusResult evolve_corpus(
    std::span<const corpus::RatedDialogue> dialogues,
    const EvolveCorpusConfig& config, ChatBackend& backend,
    const prompts::PromptAssets& assets) {
  EvolveCorpusResult result;
  result.traces.resize(dialogues.size());

  auto run_one = [&](std::size_t i) {
    const auto& dialogue = dialogues[i];
    const auto best = std::max_element(
        dialogue.responses.begin(), dialogue.responses.end(),
        [](const auto& a, const auto& b) { return a.score < b.score; });
    const Conversation original{dialogue.prompt_text, best->text};
    EvolveOptions options = config.options;
    options.language = dialogue.language;
    const Instruction seed{assets.get("seed_instruction", dialogue.language),
                           0};
    const EvolutionRule rule{assets.get("rule_initial", dialogue.language), 0};
    result.traces[i] =
        evolve(dialogue.id, original, seed, rule, backend, assets, options);
  };

  const std::size_t workers =
      backend.concurrent_safe()
          ? std::min(config.concurrency, std::max<std::size_t>(
                                             dialogues.size(), std::size_t{1}))
          : std::size_t{1};
  if (workers <= 1) {
    for (std::size_t i = 0; i < dialogues.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = cursor.fetch_add(1); i < dialogues.size();
             i = cursor.fetch_add(1)) {
          run_one(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (const auto& trace : result.traces) {
    if (trace.stop_reason == StopReason::backend_error) {
      ++result.failures;
      continue;
    }
    auto records = flatten_trace(trace);
    result.records.insert(result.records.end(),
                          std::make_move_iterator(records.begin()),
                          std::make_move_iterator(records.end()));
  }
  return result;
}

std::vector<taskforge::InstructionRecord> flatten_trace(
    const EvolutionTrace& trace) {
  std::vector<taskforge::InstructionRecord> records;
  records.reserve(trace.rounds.size());
  for (std::size_t j = 0; j < trace.rounds.size(); ++j) {
    const Round& round = trace.rounds[j];
    taskforge::InstructionRecord record;
    record.instruction = round.instruction.text;
    record.input = render_conversation(round.conversation);
    record.target = round.reply;
    record.family = taskforge::Family::evolved;
    record.provenance =
        trace.dialogue_id + ":aaie:round" + std::to_string(j + 1);
    records.push_back(std::move(record));
  }
  return records;
}

nlohmann::json trace_to_json(const EvolutionTrace& trace) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& round : trace.rounds) {
    nlohmann::json verdict = {
        {"same_punchline", round.verdict.same_punchline},
        {"more_complex", round.verdict.more_complex},
        {"new_rule", nullptr}};
    if (round.verdict.new_rule) {
      verdict["new_rule"] = {{"text", round.verdict.new_rule->text},
                             {"version", round.verdict.new_rule->version}};
    }
    rounds.push_back(
        {{"instruction",
          {{"text", round.instruction.text},
           {"generation", round.instruction.generation}}},
         {"reply", round.reply},
         {"conversation",
          {{"question", round.conversation.question},
           {"answer", round.conversation.answer}}},
         {"verdict", std::move(verdict)}});
  }
  nlohmann::json obj = {{"dialogue_id", trace.dialogue_id},
                        {"original",
                         {{"question", trace.original.question},
                          {"answer", trace.original.answer}}},
                        {"m_k", trace.m_k},
                        {"stop_reason", to_string(trace.stop_reason)},
                        {"rounds", std::move(rounds)}};
  if (!trace.error.empty()) obj["error"] = trace.error;
  return obj;
}

}  // namespace clost::agents
