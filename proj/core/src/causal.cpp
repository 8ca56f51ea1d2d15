#include "clost/causal.hpp"

#include <algorithm>
#include <cmath>

#include "clost/error.hpp"

namespace clost::causal {
namespace {

constexpr double kTolerance = 1e-12;

void check_distribution(const std::map<std::string, double>& dist,
                        const std::string& what) {
  if (dist.empty()) {
    throw ValidationError(what + " is empty");
  }
  double sum = 0.0;
  for (const auto& [key, p] : dist) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ValidationError(what + " has invalid probability for '" + key +
                            "'");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw ValidationError(what + " sums to " + std::to_string(sum) +
                          ", expected 1");
  }
}

}  // namespace

void EntityGraph::validate() const {
  for (const auto& [head, label, tail] : relations) {
    if (!entities.contains(head) || !entities.contains(tail)) {
      throw ValidationError("relation (" + head + ", " + label + ", " + tail +
                            ") has endpoints outside the entity set");
    }
  }
  for (const auto& e : question_entities) {
    if (!entities.contains(e)) {
      throw ValidationError("question entity '" + e +
                            "' outside the entity set");
    }
  }
  for (const auto& e : answer_entities) {
    if (!entities.contains(e)) {
      throw ValidationError("answer entity '" + e +
                            "' outside the entity set");
    }
  }
}

std::set<std::string> confounders(const EntityGraph& graph) {
  std::set<std::string> out;
  std::set_intersection(graph.question_entities.begin(),
                        graph.question_entities.end(),
                        graph.answer_entities.begin(),
                        graph.answer_entities.end(),
                        std::inserter(out, out.begin()));
  return out;
}

DiscreteInterventionModel::DiscreteInterventionModel(
    std::map<std::string, double> prior,
    std::map<std::string, std::map<std::string, std::map<std::string, double>>>
        conditional)
    : prior_(std::move(prior)), conditional_(std::move(conditional)) {
  check_distribution(prior_, "confounder prior");
  for (const auto& [q, by_z] : conditional_) {
    if (by_z.size() != prior_.size()) {
      throw ValidationError("conditional for '" + q +
                            "' does not cover every confounder value");
    }
    for (const auto& [z, row] : by_z) {
      if (!prior_.contains(z)) {
        throw ValidationError("conditional for '" + q +
                              "' references unknown confounder '" + z + "'");
      }
      check_distribution(row, "conditional row P(a|" + q + "," + z + ")");
    }
  }
}

DiscreteInterventionModel DiscreteInterventionModel::from_json(
    const nlohmann::json& obj) {
  if (!obj.is_object() || !obj.contains("prior") ||
      !obj.contains("conditional")) {
    throw ParseError("model file must carry 'prior' and 'conditional'");
  }
  std::map<std::string, double> prior;
  for (const auto& [z, p] : obj["prior"].items()) {
    prior[z] = p.get<double>();
  }
  std::map<std::string, std::map<std::string, std::map<std::string, double>>>
      conditional;
  for (const auto& [q, by_z] : obj["conditional"].items()) {
    for (const auto& [z, row] : by_z.items()) {
      for (const auto& [a, p] : row.items()) {
        conditional[q][z][a] = p.get<double>();
      }
    }
  }
  return DiscreteInterventionModel(std::move(prior), std::move(conditional));
}

nlohmann::json DiscreteInterventionModel::to_json() const {
  nlohmann::json obj = {{"prior", nlohmann::json::object()},
                        {"conditional", nlohmann::json::object()}};
  for (const auto& [z, p] : prior_) obj["prior"][z] = p;
  for (const auto& [q, by_z] : conditional_) {
    for (const auto& [z, row] : by_z) {
      for (const auto& [a, p] : row) obj["conditional"][q][z][a] = p;
    }
  }
  return obj;
}

std::map<std::string, double> intervene(const DiscreteInterventionModel& model,
                                        const std::string& question) {
  const auto it = model.conditional().find(question);
  if (it == model.conditional().end()) {
    throw UnsupportedQuestion("question not in model support: " + question);
  }
  std::map<std::string, double> out;
  for (const auto& [z, row] : it->second) {
    const double pz = model.prior().at(z);
    for (const auto& [a, p] : row) {
      out[a] += p * pz;
    }
  }
  return out;
}

std::map<std::string, double> brute_force_intervene(
    const DiscreteInterventionModel& model, const std::string& question) {
  const auto it = model.conditional().find(question);
  if (it == model.conditional().end()) {
    throw UnsupportedQuestion("question not in model support: " + question);
  }
  // materialize the joint P(z, a | do(q)), then marginalize answer-major
  std::vector<std::pair<std::string, double>> joint;
  std::set<std::string> answers;
  for (const auto& [z, row] : it->second) {
    for (const auto& [a, p] : row) {
      joint.emplace_back(a, model.prior().at(z) * p);
      answers.insert(a);
    }
  }
  std::map<std::string, double> out;
  for (const auto& a : answers) {
    double mass = 0.0;
    for (const auto& [answer, p] : joint) {
      if (answer == a) mass += p;
    }
    out[a] = mass;
  }
  return out;
}

OverlapStats rationale_overlap(std::span<const gesit::Rationale> rationales) {
  OverlapStats stats;
  stats.n_records = rationales.size();
  if (rationales.empty()) return stats;

  double bridge_total = 0.0;
  double overlap_total = 0.0;
  for (const auto& r : rationales) {
    std::set<std::string> covered(r.question_entities.begin(),
                                  r.question_entities.end());
    covered.insert(r.answer_entities.begin(), r.answer_entities.end());
    bridge_total += static_cast<double>(r.bridge_entities.size());
    std::size_t hit = 0;
    for (const auto& b : r.bridge_entities) {
      if (covered.contains(b)) ++hit;
    }
    if (!r.bridge_entities.empty()) {
      overlap_total +=
          static_cast<double>(hit) /
          static_cast<double>(r.bridge_entities.size());
      if (hit == r.bridge_entities.size()) ++stats.n_bridge_subset;
    }
  }
  stats.mean_bridge_count =
      bridge_total / static_cast<double>(rationales.size());
  stats.mean_overlap_fraction =
      overlap_total / static_cast<double>(rationales.size());
  return stats;
}

}  // namespace clost::causal
