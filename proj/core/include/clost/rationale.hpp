#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace clost::gesit {

/// Structured causal explanation linking question entities to answer
/// entities via bridge entities.
struct Rationale {
  std::vector<std::string> question_entities;
  std::vector<std::string> answer_entities;
  std::vector<std::string> bridge_entities;
  std::string causal_chain;

  friend bool operator==(const Rationale&, const Rationale&) = default;
};

nlohmann::json rationale_to_json(const Rationale& r);

/// Throws clost::FormatError when the object does not match the wire
/// format. bridge_entities outside the question/answer union is permitted.
Rationale rationale_from_json(const nlohmann::json& obj);

}  // namespace clost::gesit
