#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "clost/rationale.hpp"

namespace clost::causal {

/// Knowledge-graph fragment: entities, labeled relations, and the
/// question/answer entity subsets.
struct EntityGraph {
  std::set<std::string> entities;
  std::set<std::tuple<std::string, std::string, std::string>>
      relations;  // (head, label, tail)
  std::set<std::string> question_entities;
  std::set<std::string> answer_entities;

  /// Throws clost::ValidationError when relation endpoints or the subsets
  /// fall outside `entities`.
  void validate() const;
};

/// Confounding entities: the intersection of question and answer entities.
std::set<std::string> confounders(const EntityGraph& graph);

/// Discrete backdoor-adjustment model: confounder prior P(z) and
/// conditional table P(a | q, z). Both the prior and every conditional row
/// must sum to 1 within 1e-12.
class DiscreteInterventionModel {
 public:
  DiscreteInterventionModel(
      std::map<std::string, double> prior,
      std::map<std::string, std::map<std::string, std::map<std::string, double>>>
          conditional);

  /// {"prior": {z: p}, "conditional": {q: {z: {a: p}}}}
  static DiscreteInterventionModel from_json(const nlohmann::json& obj);
  nlohmann::json to_json() const;

  const std::map<std::string, double>& prior() const { return prior_; }
  const std::map<std::string,
                 std::map<std::string, std::map<std::string, double>>>&
  conditional() const {
    return conditional_;
  }

 private:
  std::map<std::string, double> prior_;
  std::map<std::string, std::map<std::string, std::map<std::string, double>>>
      conditional_;
};

/// P(a | do(q)) = sum_z P(a | q, z) P(z).
std::map<std::string, double> intervene(const DiscreteInterventionModel& model,
                                        const std::string& question);

/// Independent oracle: enumerates the full joint over (z, a) and
/// marginalizes. Must agree with intervene within 1e-12.
std::map<std::string, double> brute_force_intervene(
    const DiscreteInterventionModel& model, const std::string& question);

/// Diagnostic over expert rationales, treating bridge entities as
/// confounder proxies.
struct OverlapStats {
  std::size_t n_records = 0;
  double mean_bridge_count = 0.0;
  /// Mean fraction of bridge entities found in question_entities union
  /// answer_entities (records with no bridge entities count as 0).
  double mean_overlap_fraction = 0.0;
  std::size_t n_bridge_subset = 0;  // records whose bridges are all covered
};

OverlapStats rationale_overlap(std::span<const gesit::Rationale> rationales);

}  // namespace clost::causal
