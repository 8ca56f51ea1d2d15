#include "clost/agents.hpp"

#include <sstream>

#include "doctest.h"

#include "clost/error.hpp"
#include "test_util.hpp"

using namespace clost;
using agents::AnalystVerdict;
using agents::Conversation;
using agents::EvolutionRule;
using agents::EvolutionTrace;
using agents::Instruction;
using agents::ScriptedBackend;
using agents::StopReason;

namespace {

const prompts::PromptAssets kAssets = prompts::PromptAssets::builtin();
const corpus::Language kEn = corpus::Language::en;

std::string imagined(const std::string& q, const std::string& a) {
  return std::string(R"({"question":")") + q + R"(","answer":")" + a + R"("})";
}

constexpr const char* kContinueComplex =
    R"({"same_punchline": false, "more_complex": true, "new_rule": null})";
constexpr const char* kConverged =
    R"({"same_punchline": true, "more_complex": false, "new_rule": null})";

std::string escalate(const std::string& rule) {
  return std::string(
             R"({"same_punchline": false, "more_complex": false, "new_rule": ")") +
         rule + R"("})";
}

const Conversation kOriginal{"seed question", "seed answer"};
const Instruction kSeed{"what is the punchline?", 0};
const EvolutionRule kSeedRule{"make it harder", 0};

}  // namespace

TEST_CASE("scripted backend modes") {
  SUBCASE("sequence is consumed in order and exhausts") {
    ScriptedBackend backend(std::vector<std::string>{"a", "b"});
    CHECK(backend.complete({{agents::Message::Role::user, "x"}}, {}) == "a");
    CHECK(backend.complete({{agents::Message::Role::user, "x"}}, {}) == "b");
    CHECK_THROWS_AS(backend.complete({{agents::Message::Role::user, "x"}}, {}),
                    BackendError);
    CHECK(backend.calls() == 3);
  }
  SUBCASE("cycle wraps around") {
    ScriptedBackend backend(std::vector<std::string>{"a", "b"},
                            ScriptedBackend::Mode::cycle);
    for (int i = 0; i < 3; ++i) {
      CHECK(backend.complete({}, {}) == "a");
      CHECK(backend.complete({}, {}) == "b");
    }
  }
  SUBCASE("rules match the last user message") {
    ScriptedBackend backend(
        std::vector<ScriptedBackend::Rule>{{"alpha", "got alpha"},
                                           {"beta", "got beta"}},
        std::string("fallback"));
    CHECK(backend.complete({{agents::Message::Role::user, "say beta now"}},
                           {}) == "got beta");
    CHECK(backend.complete({{agents::Message::Role::user, "alpha please"}},
                           {}) == "got alpha");
    CHECK(backend.complete({{agents::Message::Role::user, "nothing"}}, {}) ==
          "fallback");
  }
  SUBCASE("identical call sequences replay identically") {
    const std::vector<std::string> replies{"one", "two", "three"};
    ScriptedBackend first{replies};
    ScriptedBackend second{replies};
    const std::vector<agents::Message> msg{{agents::Message::Role::user, "m"}};
    for (int i = 0; i < 3; ++i) {
      CHECK(first.complete(msg, {}) == second.complete(msg, {}));
    }
  }
  SUBCASE("from_json accepts a bare array") {
    const auto backend_json = nlohmann::json::parse(R"(["r1", "r2"])");
    auto backend = ScriptedBackend::from_json(backend_json);
    CHECK(backend.complete({}, {}) == "r1");
  }
}

TEST_CASE("rewriter step increments the generation") {
  ScriptedBackend backend(
      std::vector<std::string>{"complex-i1", "reply-y1", "complex-i2",
                               "reply-y2"});
  auto [i1, y1] = agents::rewriter_step(kOriginal, kSeed, kSeedRule, backend,
                                        kAssets, kEn);
  CHECK(i1.text == "complex-i1");
  CHECK(i1.generation == 1);
  CHECK(y1 == "reply-y1");

  auto [i2, y2] =
      agents::rewriter_step(kOriginal, i1, kSeedRule, backend, kAssets, kEn);
  CHECK(i2.generation == 2);

  // the rewrite request carries rule, conversation, and instruction
  const auto& first_call = backend.call_log()[0];
  CHECK(first_call[1].content.find("make it harder") != std::string::npos);
  CHECK(first_call[1].content.find("seed question") != std::string::npos);
  CHECK(first_call[1].content.find("what is the punchline?") !=
        std::string::npos);
}

TEST_CASE("rewriter step rejects empty completions") {
  ScriptedBackend backend(std::vector<std::string>{"  \n "});
  CHECK_THROWS_AS(agents::rewriter_step(kOriginal, kSeed, kSeedRule, backend,
                                        kAssets, kEn),
                  EmptyCompletion);
}

TEST_CASE("imaginator step parses the wire format") {
  SUBCASE("direct hit") {
    ScriptedBackend backend(std::vector<std::string>{imagined("q1", "a1")});
    const auto conv = agents::imaginator_step({"i1", 1}, "y1", backend,
                                              kAssets, kEn);
    CHECK(conv == Conversation{"q1", "a1"});
    CHECK(backend.calls() == 1);
  }
  SUBCASE("one reprompt retry") {
    ScriptedBackend backend(
        std::vector<std::string>{"not json at all", imagined("q1", "a1")});
    const auto conv = agents::imaginator_step({"i1", 1}, "y1", backend,
                                              kAssets, kEn);
    CHECK(conv.question == "q1");
    CHECK(backend.calls() == 2);
  }
  SUBCASE("twice malformed fails") {
    ScriptedBackend backend(
        std::vector<std::string>{"bad", R"({"question": "q-only"})"});
    CHECK_THROWS_AS(
        agents::imaginator_step({"i1", 1}, "y1", backend, kAssets, kEn),
        FormatError);
  }
  SUBCASE("seed instructions are rejected") {
    ScriptedBackend backend(std::vector<std::string>{imagined("q", "a")});
    CHECK_THROWS_AS(
        agents::imaginator_step({"i0", 0}, "y0", backend, kAssets, kEn),
        ValidationError);
  }
  SUBCASE("fenced JSON is tolerated") {
    ScriptedBackend backend(std::vector<std::string>{
        "```json\n" + imagined("q1", "a1") + "\n```"});
    const auto conv = agents::imaginator_step({"i1", 1}, "y1", backend,
                                              kAssets, kEn);
    CHECK(conv.answer == "a1");
  }
}

TEST_CASE("analyst step verdict mapping") {
  const Instruction current{"i1", 1};
  SUBCASE("same punchline") {
    ScriptedBackend backend(std::vector<std::string>{kConverged});
    const auto verdict =
        agents::analyst_step(kOriginal, {"q1", "a1"}, kSeed, current,
                             kSeedRule, backend, kAssets, kEn);
    CHECK(verdict.same_punchline);
    CHECK_FALSE(verdict.new_rule.has_value());
  }
  SUBCASE("continue, more complex") {
    ScriptedBackend backend(std::vector<std::string>{kContinueComplex});
    const auto verdict =
        agents::analyst_step(kOriginal, {"q1", "a1"}, kSeed, current,
                             kSeedRule, backend, kAssets, kEn);
    CHECK_FALSE(verdict.same_punchline);
    CHECK(verdict.more_complex);
    CHECK_FALSE(verdict.new_rule.has_value());
  }
  SUBCASE("escalation bumps the rule version") {
    ScriptedBackend backend(std::vector<std::string>{escalate("R2")});
    const EvolutionRule rule{"R1", 4};
    const auto verdict = agents::analyst_step(
        kOriginal, {"q1", "a1"}, kSeed, current, rule, backend, kAssets, kEn);
    REQUIRE(verdict.new_rule.has_value());
    CHECK(verdict.new_rule->text == "R2");
    CHECK(verdict.new_rule->version == 5);
  }
  SUBCASE("missing new_rule on a failed check is a format error") {
    ScriptedBackend backend(std::vector<std::string>{
        R"({"same_punchline": false, "more_complex": false, "new_rule": null})",
        R"({"same_punchline": false, "more_complex": false, "new_rule": null})"});
    CHECK_THROWS_AS(
        agents::analyst_step(kOriginal, {"q1", "a1"}, kSeed, current,
                             kSeedRule, backend, kAssets, kEn),
        FormatError);
    CHECK(backend.calls() == 2);  // exactly one reprompt
  }
}

TEST_CASE("evolve stops on punchline convergence") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), kConverged});
  const auto trace = agents::evolve("d1", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, {.m_k = 5});
  CHECK(trace.stop_reason == StopReason::punchline_converged);
  REQUIRE(trace.rounds.size() == 1);
  CHECK(trace.rounds[0].instruction.text == "i1");
  CHECK(trace.rounds[0].instruction.generation == 1);
  CHECK(trace.rounds[0].conversation == Conversation{"iq1", "ia1"});
  CHECK(trace.dialogue_id == "d1");
}

TEST_CASE("evolve substitutes the conversation on more-complex verdicts") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), kContinueComplex,
      "i2", "y2", imagined("iq2", "ia2"), kContinueComplex,
      "i3", "y3", imagined("iq3", "ia3"), kConverged});
  const auto trace = agents::evolve("d2", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, {.m_k = 5});
  CHECK(trace.stop_reason == StopReason::punchline_converged);
  REQUIRE(trace.rounds.size() == 3);

  // round 2's rewriter works on round 1's imagined conversation, round 3's
  // on round 2's; the substitution happened exactly twice
  const auto& log = backend.call_log();
  REQUIRE(log.size() == 12);
  CHECK(log[0][1].content.find("Q: seed question") != std::string::npos);
  CHECK(log[4][1].content.find("Q: iq1") != std::string::npos);
  CHECK(log[8][1].content.find("Q: iq2") != std::string::npos);

  // instruction chain keeps evolving from the previous round's instruction
  CHECK(log[4][1].content.find("Instruction to rewrite: i1") !=
        std::string::npos);
  CHECK(log[8][1].content.find("Instruction to rewrite: i2") !=
        std::string::npos);
  CHECK(trace.rounds[2].instruction.generation == 3);
}

TEST_CASE("evolve escalates the rule without substitution") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), escalate("R1"),
      "i2", "y2", imagined("iq2", "ia2"), escalate("R2"),
      "i3", "y3", imagined("iq3", "ia3"), escalate("R3")});
  const auto trace = agents::evolve("d3", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, {.m_k = 3});
  CHECK(trace.stop_reason == StopReason::round_cap);
  REQUIRE(trace.rounds.size() == 3);
  CHECK(trace.rounds[2].verdict.new_rule->version == 3);

  // rule versions escalate monotonically through the verdicts
  for (std::size_t j = 0; j < trace.rounds.size(); ++j) {
    REQUIRE(trace.rounds[j].verdict.new_rule.has_value());
    CHECK(trace.rounds[j].verdict.new_rule->version == static_cast<int>(j) + 1);
  }

  // the working conversation never changes; the rule text does
  const auto& log = backend.call_log();
  CHECK(log[4][1].content.find("Q: seed question") != std::string::npos);
  CHECK(log[8][1].content.find("Q: seed question") != std::string::npos);
  CHECK(log[4][1].content.find("Rewriting rule: R1") != std::string::npos);
  CHECK(log[8][1].content.find("Rewriting rule: R2") != std::string::npos);
}

TEST_CASE("evolve respects the round cap for any verdict stream") {
  for (int m_k = 1; m_k <= 4; ++m_k) {
    std::vector<std::string> replies;
    for (int j = 0; j < m_k; ++j) {
      replies.push_back("i" + std::to_string(j + 1));
      replies.push_back("y" + std::to_string(j + 1));
      replies.push_back(imagined("iq" + std::to_string(j + 1), "ia"));
      replies.push_back(j % 2 == 0 ? kContinueComplex
                                   : escalate("R" + std::to_string(j)));
    }
    ScriptedBackend backend(std::move(replies));
    const auto trace = agents::evolve("d", kOriginal, kSeed, kSeedRule,
                                      backend, kAssets, {.m_k = m_k});
    CHECK(trace.rounds.size() == static_cast<std::size_t>(m_k));
    CHECK(trace.stop_reason == StopReason::round_cap);
  }
}

TEST_CASE("evolve is deterministic with a scripted backend") {
  auto run = [] {
    ScriptedBackend backend(std::vector<std::string>{
        "i1", "y1", imagined("iq1", "ia1"), kConverged});
    return agents::evolve("d", kOriginal, kSeed, kSeedRule, backend, kAssets,
                          {.m_k = 2});
  };
  const auto a = run();
  const auto b = run();
  CHECK(agents::trace_to_json(a).dump() == agents::trace_to_json(b).dump());
}

TEST_CASE("evolve aborts with a partial trace on backend failure") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), kContinueComplex, "i2"});
  const auto trace = agents::evolve("d4", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, {.m_k = 5});
  CHECK(trace.stop_reason == StopReason::backend_error);
  CHECK(trace.rounds.size() == 1);
  CHECK_FALSE(trace.error.empty());
}

TEST_CASE("inverted polarity stops on a different punchline") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), kConverged,
      "i2", "y2", imagined("iq2", "ia2"), kContinueComplex});
  agents::EvolveOptions options;
  options.m_k = 5;
  options.stop_on_same_punchline = false;
  const auto trace = agents::evolve("d5", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, options);
  // first verdict says same -> continue (substituting); second says not-same
  // -> stop
  CHECK(trace.stop_reason == StopReason::punchline_converged);
  CHECK(trace.rounds.size() == 2);
  CHECK(backend.call_log()[4][1].content.find("Q: iq1") != std::string::npos);
}

TEST_CASE("evolve_corpus flattens rounds into evolved records") {
  const std::vector<corpus::RatedDialogue> dialogues = {
      testutil::make_dialogue("d1", {3.0, 0.0}),
      testutil::make_dialogue("d2", {9.0, 1.0})};
  // d1: 2 rounds (continue, converge); d2: 3 rounds (continue x2, converge)
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("x1", "y"), kContinueComplex,
      "i2", "y2", imagined("x2", "y"), kConverged,
      "j1", "z1", imagined("w1", "y"), kContinueComplex,
      "j2", "z2", imagined("w2", "y"), kContinueComplex,
      "j3", "z3", imagined("w3", "y"), kConverged});
  agents::EvolveCorpusConfig config;
  config.options.m_k = 5;
  const auto result =
      agents::evolve_corpus(dialogues, config, backend, kAssets);
  CHECK(result.failures == 0);
  REQUIRE(result.traces.size() == 2);
  CHECK(result.traces[0].rounds.size() == 2);
  CHECK(result.traces[1].rounds.size() == 3);
  REQUIRE(result.records.size() == 5);

  CHECK(result.records[0].family == taskforge::Family::evolved);
  CHECK(result.records[0].instruction == "i1");
  CHECK(result.records[0].input == "Q: x1\nA: y");
  CHECK(result.records[0].target == "y1");
  CHECK(result.records[0].provenance == "d1:aaie:round1");
  CHECK(result.records[2].provenance == "d2:aaie:round1");

  // the rewriter saw d1's highest-scored response as the seed conversation
  CHECK(backend.call_log()[0][1].content.find("r0 of d1") !=
        std::string::npos);
}

TEST_CASE("evolve_corpus isolates per-dialogue failures") {
  const std::vector<corpus::RatedDialogue> dialogues = {
      testutil::make_dialogue("d1", {3.0, 0.0}),
      testutil::make_dialogue("d2", {9.0, 1.0})};
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("x1", "y"), kConverged});  // d2 exhausts
  agents::EvolveCorpusConfig config;
  config.options.m_k = 2;
  const auto result =
      agents::evolve_corpus(dialogues, config, backend, kAssets);
  CHECK(result.failures == 1);
  CHECK(result.traces[0].stop_reason == StopReason::punchline_converged);
  CHECK(result.traces[1].stop_reason == StopReason::backend_error);
  CHECK(result.records.size() == 1);
}

TEST_CASE("evolve_corpus on an empty corpus") {
  ScriptedBackend backend(std::vector<std::string>{});
  const auto result = agents::evolve_corpus({}, {}, backend, kAssets);
  CHECK(result.traces.empty());
  CHECK(result.records.empty());
  CHECK(result.failures == 0);
}

TEST_CASE("trace JSON serialization carries verdicts and stop reason") {
  ScriptedBackend backend(std::vector<std::string>{
      "i1", "y1", imagined("iq1", "ia1"), escalate("R1")});
  const auto trace = agents::evolve("d6", kOriginal, kSeed, kSeedRule, backend,
                                    kAssets, {.m_k = 1});
  const auto json = agents::trace_to_json(trace);
  CHECK(json["dialogue_id"] == "d6");
  CHECK(json["stop_reason"] == "round_cap");
  CHECK(json["m_k"] == 1);
  REQUIRE(json["rounds"].size() == 1);
  CHECK(json["rounds"][0]["verdict"]["new_rule"]["version"] == 1);
}
