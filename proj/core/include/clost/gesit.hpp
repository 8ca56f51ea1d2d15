#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clost/agents.hpp"
#include "clost/rationale.hpp"
#include "clost/rng.hpp"

namespace clost::gesit {

struct PreferenceTriple {
  std::string question;
  std::string chosen;
  std::string rejected;  // always != chosen
};

/// Preference record with optional expert rationales; the unit of the
/// growing DPO dataset.
struct DpoRecord {
  std::string question;
  std::string chosen;
  std::string rejected;
  std::optional<Rationale> chosen_rationale;
  std::optional<Rationale> rejected_rationale;
  bool rationale_missing = false;  // lenient-mode marker

  friend bool operator==(const DpoRecord&, const DpoRecord&) = default;
};

/// Minimal policy surface the training loop needs.
class PolicyModel {
 public:
  virtual ~PolicyModel() = default;
  virtual double logprob(const std::string& question,
                         const std::string& answer) const = 0;
  virtual std::string sample(const std::string& question,
                             rng::Engine& rng) const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void apply_update(std::span<const double> delta) = 0;
  virtual std::unique_ptr<PolicyModel> clone() const = 0;
};

/// Finite tabular softmax policy: logits[question x answer],
/// logprob = log-softmax of the question's row. Every DPO quantity is
/// analytically checkable against it.
class ToyPolicy final : public PolicyModel {
 public:
  ToyPolicy(std::vector<std::string> questions,
            std::vector<std::string> answers);

  double logprob(const std::string& question,
                 const std::string& answer) const override;
  std::string sample(const std::string& question,
                     rng::Engine& rng) const override;
  std::vector<double> parameters() const override;
  void apply_update(std::span<const double> delta) override;
  std::unique_ptr<PolicyModel> clone() const override;

  std::size_t question_count() const { return questions_.size(); }
  std::size_t answer_count() const { return answers_.size(); }
  const std::vector<std::string>& questions() const { return questions_; }
  const std::vector<std::string>& answers() const { return answers_; }

  std::size_t question_index(const std::string& question) const;
  std::size_t answer_index(const std::string& answer) const;
  double& logit(std::size_t qi, std::size_t ai);
  double logit(std::size_t qi, std::size_t ai) const;

  /// Softmax probabilities of one question row.
  std::vector<double> row_probabilities(std::size_t qi) const;

  /// d logprob(answer|question) / d logits[question][*]: e_answer - softmax.
  std::vector<double> logprob_grad_row(const std::string& question,
                                       const std::string& answer) const;

 private:
  std::vector<std::string> questions_;
  std::vector<std::string> answers_;
  std::vector<double> logits_;  // row-major [question][answer]
};

struct GesitConfig {
  double beta = 0.1;          // DPO temperature
  int steps = 100;            // N
  int t_p = 10;               // augmentation events over the run
  double learning_rate = 2e-4;
  std::uint64_t seed = 0;
  bool lenient_expert = false;     // keep candidates when the expert fails
  bool concat_rationales = false;  // fold causal chains into training texts
};

/// -log sigmoid(beta * [(log pi(a+|q) - log ref(a+|q)) -
///                      (log pi(a-|q) - log ref(a-|q))])
double dpo_loss(const PolicyModel& policy, const PolicyModel& reference,
                const PreferenceTriple& triple, double beta);

/// Analytic gradient of dpo_loss over the toy policy's full logits vector.
std::vector<double> dpo_grad(const ToyPolicy& policy,
                             const ToyPolicy& reference,
                             const PreferenceTriple& triple, double beta);

/// One descent step: parameters -= learning_rate * gradient. Returns the
/// pre-update loss.
double train_step(ToyPolicy& policy, const ToyPolicy& reference,
                  const PreferenceTriple& triple, double beta,
                  double learning_rate);

enum class JudgeOutcome { first, second, tie };
using PairwiseJudge = std::function<JudgeOutcome(
    const std::string& question, const std::string& a, const std::string& b)>;
using ExpertFn = std::function<Rationale(const std::string& question,
                                         const std::string& answer)>;

struct AuditEntry {
  int step = 0;
  std::string event;  // "dpo" | "augment"
  std::optional<double> loss;
  std::optional<std::string> candidate_id;

  friend bool operator==(const AuditEntry&, const AuditEntry&) = default;
};

struct GesitResult {
  std::vector<DpoRecord> dataset;  // D_final; grows by appending only
  std::vector<AuditEntry> audit;
  int augmentation_events = 0;
  int skipped_ties = 0;
  int skipped_expert_failures = 0;
};

/// Online DPO: N steps sampling triples from the current dataset, with one
/// augmentation every ceil(N / T_P) steps (sample a question, draw two
/// policy answers, judge, add expert rationales, append). The reference is
/// a frozen copy of the initial policy.
GesitResult gesit_train(ToyPolicy& policy, const PairwiseJudge& judge,
                        const ExpertFn& expert, std::vector<DpoRecord> d0,
                        const GesitConfig& config, rng::Engine& rng);

/// Asks the expert backend for a structured rationale; one reprompt on a
/// wire-format violation.
Rationale expert_rationale(agents::ChatBackend& backend,
                           const std::string& question,
                           const std::string& answer,
                           const prompts::PromptAssets& assets,
                           corpus::Language lang);

/// DPO JSONL: {"question","chosen","rejected","chosen_rationale",
/// "rejected_rationale"}. With concat_rationales the causal chain is
/// appended to each answer text. Returns lines written.
std::size_t export_dpo_dataset(std::span<const DpoRecord> records,
                               std::ostream& out,
                               bool concat_rationales = false);
std::vector<DpoRecord> read_dpo_dataset(std::istream& in);

inline constexpr const char* kRationaleDelimiter = "\n[rationale] ";

void write_audit_log(std::ostream& out, std::span<const AuditEntry> entries);

/// Policy file: {"questions","answers","logits"}.
void write_policy(std::ostream& out, const ToyPolicy& policy);
ToyPolicy read_policy(std::istream& in);

}  // namespace clost::gesit
