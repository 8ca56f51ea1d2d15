#include "clost/gesit.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "clost/error.hpp"

namespace clost::gesit {
namespace {

using nlohmann::ordered_json;

/// log(1 + exp(-x)) without overflow.
double softplus_neg(double x) {
  return x >= 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

std::vector<std::string> string_list(const nlohmann::json& obj,
                                     const char* key) {
  if (!obj.contains(key) || !obj[key].is_array()) {
    throw FormatError(std::string("rationale field '") + key +
                      "' must be an array of strings");
  }
  std::vector<std::string> out;
  for (const auto& v : obj[key]) {
    if (!v.is_string()) {
      throw FormatError(std::string("rationale field '") + key +
                        "' must be an array of strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string training_text(const DpoRecord& record, bool concat, bool chosen) {
  const std::string& text = chosen ? record.chosen : record.rejected;
  const auto& rationale =
      chosen ? record.chosen_rationale : record.rejected_rationale;
  if (!concat || !rationale) return text;
  return text + kRationaleDelimiter + rationale->causal_chain;
}

}  // namespace

nlohmann::json rationale_to_json(const Rationale& r) {
  return ordered_json{{"question_entities", r.question_entities},
                      {"answer_entities", r.answer_entities},
                      {"bridge_entities", r.bridge_entities},
                      {"causal_chain", r.causal_chain}};
}

Rationale rationale_from_json(const nlohmann::json& obj) {
  if (!obj.is_object() || !obj.contains("causal_chain") ||
      !obj["causal_chain"].is_string()) {
    throw FormatError("rationale must carry a causal_chain string");
  }
  Rationale r;
  r.question_entities = string_list(obj, "question_entities");
  r.answer_entities = string_list(obj, "answer_entities");
  r.bridge_entities = string_list(obj, "bridge_entities");
  r.causal_chain = obj["causal_chain"].get<std::string>();
  return r;
}

ToyPolicy::ToyPolicy(std::vector<std::string> questions,
                     std::vector<std::string> answers)
    : questions_(std::move(questions)), answers_(std::move(answers)),
      logits_(questions_.size() * answers_.size(), 0.0) {
  if (questions_.empty() || answers_.empty()) {
    throw ValidationError("toy policy needs >= 1 question and >= 1 answer");
  }
}

std::size_t ToyPolicy::question_index(const std::string& question) const {
  const auto it = std::find(questions_.begin(), questions_.end(), question);
  if (it == questions_.end()) {
    throw UnsupportedQuestion("question not in policy support: " + question);
  }
  return static_cast<std::size_t>(it - questions_.begin());
}

std::size_t ToyPolicy::answer_index(const std::string& answer) const {
  const auto it = std::find(answers_.begin(), answers_.end(), answer);
  if (it == answers_.end()) {
    throw UnsupportedAnswer("answer not in policy support: " + answer);
  }
  return static_cast<std::size_t>(it - answers_.begin());
}

double& ToyPolicy::logit(std::size_t qi, std::size_t ai) {
  return logits_[qi * answers_.size() + ai];
}

double ToyPolicy::logit(std::size_t qi, std::size_t ai) const {
  return logits_[qi * answers_.size() + ai];
}

double ToyPolicy::logprob(const std::string& question,
                          const std::string& answer) const {
  const std::size_t qi = question_index(question);
  const std::size_t ai = answer_index(answer);
  const double* row = logits_.data() + qi * answers_.size();
  const double max = *std::max_element(row, row + answers_.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < answers_.size(); ++a) {
    sum += std::exp(row[a] - max);
  }
  return row[ai] - max - std::log(sum);
}

std::vector<double> ToyPolicy::row_probabilities(std::size_t qi) const {
  const double* row = logits_.data() + qi * answers_.size();
  const double max = *std::max_element(row, row + answers_.size());
  std::vector<double> probs(answers_.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < answers_.size(); ++a) {
    probs[a] = std::exp(row[a] - max);
    sum += probs[a];
  }
  for (auto& p : probs) p /= sum;
  return probs;
}

std::string ToyPolicy::sample(const std::string& question,
                              rng::Engine& rng) const {
  const auto probs = row_probabilities(question_index(question));
  const double u = rng::uniform_unit(rng);
  double cumulative = 0.0;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    cumulative += probs[a];
    if (u < cumulative) return answers_[a];
  }
  return answers_.back();
}

std::vector<double> ToyPolicy::parameters() const { return logits_; }

void ToyPolicy::apply_update(std::span<const double> delta) {
  if (delta.size() != logits_.size()) {
    throw ValidationError("update size mismatch: " +
                          std::to_string(delta.size()) + " vs " +
                          std::to_string(logits_.size()));
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] += delta[i];
}

std::unique_ptr<PolicyModel> ToyPolicy::clone() const {
  return std::make_unique<ToyPolicy>(*this);
}

std::vector<double> ToyPolicy::logprob_grad_row(const std::string& question,
                                                const std::string& answer) const {
  const std::size_t qi = question_index(question);
  const std::size_t ai = answer_index(answer);
  std::vector<double> grad = row_probabilities(qi);
  for (auto& g : grad) g = -g;
  grad[ai] += 1.0;
  return grad;
}

double dpo_loss(const PolicyModel& policy, const PolicyModel& reference,
                const PreferenceTriple& triple, double beta) {
  if (triple.chosen == triple.rejected) {
    throw ValidationError("preference triple has chosen == rejected");
  }
  const double margin =
      (policy.logprob(triple.question, triple.chosen) -
       reference.logprob(triple.question, triple.chosen)) -
      (policy.logprob(triple.question, triple.rejected) -
       reference.logprob(triple.question, triple.rejected));
  return softplus_neg(beta * margin);
}

std::vector<double> dpo_grad(const ToyPolicy& policy,
                             const ToyPolicy& reference,
                             const PreferenceTriple& triple, double beta) {
  const double margin =
      (policy.logprob(triple.question, triple.chosen) -
       reference.logprob(triple.question, triple.chosen)) -
      (policy.logprob(triple.question, triple.rejected) -
       reference.logprob(triple.question, triple.rejected));
  // dL/d margin = -beta * sigmoid(-beta * margin)
  const double coeff = -beta * sigmoid(-beta * margin);

  const auto chosen_grad =
      policy.logprob_grad_row(triple.question, triple.chosen);
  const auto rejected_grad =
      policy.logprob_grad_row(triple.question, triple.rejected);

  const std::size_t qi = policy.question_index(triple.question);
  const std::size_t width = policy.answer_count();
  std::vector<double> grad(policy.question_count() * width, 0.0);
  for (std::size_t a = 0; a < width; ++a) {
    grad[qi * width + a] = coeff * (chosen_grad[a] - rejected_grad[a]);
  }
  return grad;
}

double train_step(ToyPolicy& policy, const ToyPolicy& reference,
                  const PreferenceTriple& triple, double beta,
                  double learning_rate) {
  const double loss = dpo_loss(policy, reference, triple, beta);
  auto grad = dpo_grad(policy, reference, triple, beta);
  for (auto& g : grad) g *= -learning_rate;
  policy.apply_update(grad);
  return loss;
}

GesitResult gesit_train(ToyPolicy& policy, const PairwiseJudge& judge,
                        const ExpertFn& expert, std::vector<DpoRecord> d0,
                        const GesitConfig& config, rng::Engine& rng) {
  if (d0.empty()) {
    throw ValidationError("gesit needs a non-empty initial dataset");
  }
  if (config.steps < 1) {
    throw ValidationError("steps must be >= 1");
  }
  if (config.t_p < 1 || config.t_p > config.steps) {
    throw ValidationError("T_P must satisfy 1 <= T_P <= steps");
  }

  const auto reference_owner = policy.clone();
  const auto& reference = static_cast<const ToyPolicy&>(*reference_owner);

  GesitResult result;
  result.dataset = std::move(d0);
  const std::size_t offline_count = result.dataset.size();
  const int interval = (config.steps + config.t_p - 1) / config.t_p;
  int candidate_counter = 0;

  for (int t = 1; t <= config.steps; ++t) {
    const std::size_t idx = static_cast<std::size_t>(
        rng::uniform_below(rng, result.dataset.size()));
    const DpoRecord& record = result.dataset[idx];
    // offline records train without rationale concatenation regardless of
    // the flag
    const bool concat = config.concat_rationales && idx >= offline_count;
    const PreferenceTriple triple{record.question,
                                  training_text(record, concat, true),
                                  training_text(record, concat, false)};
    const double loss = train_step(policy, reference, triple, config.beta,
                                   config.learning_rate);
    result.audit.push_back({t, "dpo", loss, std::nullopt});

    if (t % interval != 0) continue;

    ++result.augmentation_events;
    const std::size_t qi = static_cast<std::size_t>(
        rng::uniform_below(rng, result.dataset.size()));
    const std::string question = result.dataset[qi].question;
    const std::string a1 = policy.sample(question, rng);
    const std::string a2 = policy.sample(question, rng);

    std::optional<std::string> candidate_id;
    if (a1 == a2) {
      ++result.skipped_ties;
    } else {
      const JudgeOutcome outcome = judge(question, a1, a2);
      if (outcome == JudgeOutcome::tie) {
        ++result.skipped_ties;
      } else {
        DpoRecord candidate;
        candidate.question = question;
        candidate.chosen = outcome == JudgeOutcome::first ? a1 : a2;
        candidate.rejected = outcome == JudgeOutcome::first ? a2 : a1;
        bool keep = true;
        try {
          candidate.chosen_rationale = expert(question, candidate.chosen);
          candidate.rejected_rationale = expert(question, candidate.rejected);
        } catch (const Error&) {
          ++result.skipped_expert_failures;
          if (config.lenient_expert) {
            candidate.chosen_rationale.reset();
            candidate.rejected_rationale.reset();
            candidate.rationale_missing = true;
          } else {
            keep = false;
          }
        }
        if (keep) {
          candidate_id = "cand-" + std::to_string(candidate_counter++);
          result.dataset.push_back(std::move(candidate));
        }
      }
    }
    result.audit.push_back({t, "augment", std::nullopt, candidate_id});
  }
  return result;
}

Rationale expert_rationale(agents::ChatBackend& backend,
                           const std::string& question,
                           const std::string& answer,
                           const prompts::PromptAssets& assets,
                           corpus::Language lang) {
  using agents::Message;
  std::vector<Message> messages = {
      {Message::Role::system, assets.get("expert_system", lang)},
      {Message::Role::user,
       "Question: " + question + "\nAnswer: " + answer}};
  const agents::CompletionParams params{0.0, 512};
  const std::string completion = backend.complete(messages, params);
  try {
    return rationale_from_json(agents::parse_json_completion(completion));
  } catch (const FormatError&) {
    messages.push_back({Message::Role::assistant, completion});
    messages.push_back(
        {Message::Role::user,
         "Reply with exactly one JSON object of the form "
         "{\"question_entities\": [str], \"answer_entities\": [str], "
         "\"bridge_entities\": [str], \"causal_chain\": str} and nothing "
         "else."});
    return rationale_from_json(
        agents::parse_json_completion(backend.complete(messages, params)));
  }
}

std::size_t export_dpo_dataset(std::span<const DpoRecord> records,
                               std::ostream& out, bool concat_rationales) {
  std::size_t written = 0;
  for (const auto& r : records) {
    ordered_json obj = {
        {"question", r.question},
        {"chosen", training_text(r, concat_rationales, true)},
        {"rejected", training_text(r, concat_rationales, false)},
        {"chosen_rationale",
         r.chosen_rationale ? rationale_to_json(*r.chosen_rationale)
                            : nlohmann::json(nullptr)},
        {"rejected_rationale",
         r.rejected_rationale ? rationale_to_json(*r.rejected_rationale)
                              : nlohmann::json(nullptr)}};
    out << obj.dump() << '\n';
    ++written;
  }
  return written;
}

std::vector<DpoRecord> read_dpo_dataset(std::istream& in) {
  std::vector<DpoRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    const nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw ParseError(line_no, "invalid DPO record");
    }
    DpoRecord record;
    record.question = obj.at("question").get<std::string>();
    record.chosen = obj.at("chosen").get<std::string>();
    record.rejected = obj.at("rejected").get<std::string>();
    if (record.chosen == record.rejected) {
      throw ParseError(line_no, "chosen == rejected");
    }
    if (obj.contains("chosen_rationale") && !obj["chosen_rationale"].is_null()) {
      record.chosen_rationale = rationale_from_json(obj["chosen_rationale"]);
    }
    if (obj.contains("rejected_rationale") &&
        !obj["rejected_rationale"].is_null()) {
      record.rejected_rationale =
          rationale_from_json(obj["rejected_rationale"]);
    }
    records.push_back(std::move(record));
  }
  return records;
}

void write_audit_log(std::ostream& out, std::span<const AuditEntry> entries) {
  for (const auto& e : entries) {
    const ordered_json obj = {
        {"step", e.step},
        {"event", e.event},
        {"loss", e.loss ? nlohmann::json(*e.loss) : nlohmann::json(nullptr)},
        {"candidate_id", e.candidate_id ? nlohmann::json(*e.candidate_id)
                                        : nlohmann::json(nullptr)}};
    out << obj.dump() << '\n';
  }
}

void write_policy(std::ostream& out, const ToyPolicy& policy) {
  nlohmann::json logits = nlohmann::json::array();
  for (std::size_t qi = 0; qi < policy.question_count(); ++qi) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t ai = 0; ai < policy.answer_count(); ++ai) {
      row.push_back(policy.logit(qi, ai));
    }
    logits.push_back(std::move(row));
  }
  const ordered_json obj = {{"questions", policy.questions()},
                            {"answers", policy.answers()},
                            {"logits", std::move(logits)}};
  out << obj.dump(2) << '\n';
}

ToyPolicy read_policy(std::istream& in) {
  nlohmann::json obj = nlohmann::json::parse(in, nullptr, false);
  if (obj.is_discarded() || !obj.is_object()) {
    throw ParseError("invalid policy file");
  }
  ToyPolicy policy(obj.at("questions").get<std::vector<std::string>>(),
                   obj.at("answers").get<std::vector<std::string>>());
  const auto& logits = obj.at("logits");
  if (logits.size() != policy.question_count()) {
    throw ParseError("logits row count mismatch");
  }
  for (std::size_t qi = 0; qi < policy.question_count(); ++qi) {
    if (logits[qi].size() != policy.answer_count()) {
      throw ParseError("logits column count mismatch");
    }
    for (std::size_t ai = 0; ai < policy.answer_count(); ++ai) {
      policy.logit(qi, ai) = logits[qi][ai].get<double>();
    }
  }
  return policy;
}

}  // namespace clost::gesit
