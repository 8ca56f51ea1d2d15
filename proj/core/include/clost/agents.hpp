#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "clost/corpus.hpp"
#include "clost/prompts.hpp"
#include "clost/taskforge.hpp"

namespace clost::agents {

struct Message {
  enum class Role { system, user, assistant };
  Role role = Role::user;
  std::string content;
};

std::string to_string(Message::Role role);

struct CompletionParams {
  double temperature = 0.7;
  int max_tokens = 512;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<Message>& messages,
                               const CompletionParams& params) = 0;
  virtual std::string label() const = 0;
  /// Whether one instance may serve concurrent callers.
  virtual bool concurrent_safe() const { return false; }
};

/// Deterministic replay backend for tests and dry runs. Sequence mode
/// consumes replies in order, cycle mode wraps around, rules mode matches
/// substrings of the last user message.
class ScriptedBackend final : public ChatBackend {
 public:
  enum class Mode { sequence, cycle, rules };
  struct Rule {
    std::string contains;
    std::string reply;
  };

  explicit ScriptedBackend(std::vector<std::string> replies,
                           Mode mode = Mode::sequence);
  explicit ScriptedBackend(std::vector<Rule> rules,
                           std::optional<std::string> fallback = {});

  /// Accepts either a bare array of replies (sequence mode) or
  /// {"mode": str, "replies": [str], "rules": [{"contains","reply"}],
  ///  "default": str}.
  static ScriptedBackend from_json(const nlohmann::json& spec);
  static ScriptedBackend from_file(const std::filesystem::path& path);

  std::string complete(const std::vector<Message>& messages,
                       const CompletionParams& params) override;
  std::string label() const override { return "scripted"; }

  std::size_t calls() const { return call_log_.size(); }
  const std::vector<std::vector<Message>>& call_log() const {
    return call_log_;
  }

 private:
  Mode mode_ = Mode::sequence;
  std::vector<std::string> replies_;
  std::vector<Rule> rules_;
  std::optional<std::string> fallback_;
  std::size_t next_ = 0;
  std::vector<std::vector<Message>> call_log_;
};

struct HttpBackendConfig {
  std::string url;  // full endpoint, e.g. http://host:8080/v1/chat/completions
  std::string model;
  std::string api_key;     // empty -> no Authorization header
  int max_retries = 3;     // retries after the initial attempt
  int base_delay_ms = 200; // exponential backoff base
  int timeout_s = 60;
};

/// OpenAI-style chat-completion client. Requests are
/// {model, messages, temperature, max_tokens}; the reply is read from
/// choices[0].message.content. Retries 408/429/5xx and network errors with
/// exponential backoff.
class HttpBackend final : public ChatBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);

  std::string complete(const std::vector<Message>& messages,
                       const CompletionParams& params) override;
  std::string label() const override;
  bool concurrent_safe() const override { return true; }

  /// Total HTTP requests issued, retries included.
  std::size_t requests() const { return requests_.load(); }

 private:
  HttpBackendConfig config_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::atomic<std::size_t> requests_{0};
};

struct Instruction {
  std::string text;
  int generation = 0;  // 0 is the seed
};

struct EvolutionRule {
  std::string text;
  int version = 0;  // incremented only by analyst escalation
};

struct Conversation {
  std::string question;
  std::string answer;

  friend bool operator==(const Conversation&, const Conversation&) = default;
};

struct AnalystVerdict {
  bool same_punchline = false;
  bool more_complex = false;  // meaningful only when !same_punchline
  std::optional<EvolutionRule> new_rule;  // iff (!same && !more_complex)
};

enum class StopReason { punchline_converged, round_cap, backend_error };
std::string to_string(StopReason reason);

struct Round {
  Conversation conversation;  // imagined this round
  Instruction instruction;
  std::string reply;
  AnalystVerdict verdict;
};

struct EvolutionTrace {
  std::string dialogue_id;
  Conversation original;
  std::vector<Round> rounds;  // size <= m_k
  StopReason stop_reason = StopReason::round_cap;
  int m_k = 0;
  std::string error;  // set when stop_reason == backend_error
};

/// Parses a completion that must be a single JSON object, tolerating code
/// fences and surrounding prose. Throws clost::FormatError.
nlohmann::json parse_json_completion(const std::string& completion);

struct AgentParams {
  double creative_temperature = 0.9;  // rewriter and imaginator
  double analyst_temperature = 0.0;   // verdicts must be stable
  int max_tokens = 512;
};

/// Complexifies the instruction under the rule, then answers it. The
/// returned instruction's generation is instr.generation + 1.
std::pair<Instruction, std::string> rewriter_step(
    const Conversation& conv, const Instruction& instr,
    const EvolutionRule& rule, ChatBackend& backend,
    const prompts::PromptAssets& assets, corpus::Language lang,
    const AgentParams& params = {});

/// Imagines a new conversation from (instruction, reply). One reprompt on a
/// wire-format violation, then FormatError.
Conversation imaginator_step(const Instruction& instr, const std::string& reply,
                             ChatBackend& backend,
                             const prompts::PromptAssets& assets,
                             corpus::Language lang,
                             const AgentParams& params = {});

/// Compares original and imagined conversations; complexity is always judged
/// against the generation-0 instruction. new_rule carries version
/// rule.version + 1.
AnalystVerdict analyst_step(const Conversation& original,
                            const Conversation& imagined,
                            const Instruction& seed_instruction,
                            const Instruction& current_instruction,
                            const EvolutionRule& rule, ChatBackend& backend,
                            const prompts::PromptAssets& assets,
                            corpus::Language lang,
                            const AgentParams& params = {});

struct EvolveOptions {
  int m_k = 3;
  /// Default terminates on same_punchline=true; the opposite polarity is
  /// available for experimentation.
  bool stop_on_same_punchline = true;
  corpus::Language language = corpus::Language::en;
  AgentParams params;
};

/// Runs the rewriter -> imaginator -> analyst loop until convergence, the
/// round cap, or a backend failure (partial trace, stop_reason
/// backend_error).
EvolutionTrace evolve(const std::string& dialogue_id,
                      const Conversation& original,
                      const Instruction& seed_instruction,
                      const EvolutionRule& seed_rule, ChatBackend& backend,
                      const prompts::PromptAssets& assets,
                      const EvolveOptions& options);

struct EvolveCorpusConfig {
  EvolveOptions options;
  std::size_t concurrency = 1;  // honored only for concurrent-safe backends
};

struct EvolveCorpusResult {
  std::vector<EvolutionTrace> traces;
  std::vector<taskforge::InstructionRecord> records;  // family=evolved
  std::size_t failures = 0;
};

/// Evolves every dialogue (question + its highest-scored response). Seed
/// instruction and rule come from the assets for each dialogue's language.
/// Per-dialogue failures are isolated and counted.
EvolveCorpusResult evolve_corpus(
    std::span<const corpus::RatedDialogue> dialogues,
    const EvolveCorpusConfig& config, ChatBackend& backend,
    const prompts::PromptAssets& assets);

/// One InstructionRecord per round: the round's instruction applied to the
/// round's conversation, targeted at the rewriter's reply.
std::vector<taskforge::InstructionRecord> flatten_trace(
    const EvolutionTrace& trace);

nlohmann::json trace_to_json(const EvolutionTrace& trace);

}  // namespace clost::agents
