#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clost/agents.hpp"
#include "clost/corpus.hpp"
#include "clost/gesit.hpp"

namespace clost::cli {

inline constexpr const char* kApiKeyEnvVar = "CLOST_API_KEY";

struct BackendSpec {
  enum class Kind { none, scripted, http };
  Kind kind = Kind::none;
  // scripted
  std::string path;
  // http
  std::string url;
  std::string model;
  std::string api_key_env = kApiKeyEnvVar;
  int max_retries = 3;
  int base_delay_ms = 200;
};

/// Instantiates the backend. HTTP backends read their bearer token from the
/// spec's environment variable and fail fast when it is unset.
std::unique_ptr<agents::ChatBackend> make_backend(const BackendSpec& spec);

struct CorpusInput {
  std::filesystem::path path;
  std::string format;  // semeval2021 | semeval2020_1 | semeval2020_2 | jsonl
  corpus::Source tag = corpus::Source::generic;
};

struct RunConfig {
  std::filesystem::path out_dir = "out";
  corpus::Language language = corpus::Language::en;
  std::optional<std::filesystem::path> asset_dir;
  bool strict = false;

  // ingest
  std::vector<CorpusInput> corpora;
  double split_ratio = 0.95;
  std::uint64_t split_seed = 7;

  // build-tasks
  std::vector<std::filesystem::path> task_inputs;  // normalized JSONL
  std::vector<int> m_values = {2, 3, 4};
  bool hard_tasks = true;
  std::optional<double> gap_threshold;  // default: per-corpus rule
  std::uint64_t task_seed = 13;
  bool balance_families = false;
  bool build_rewrite_tasks = true;
  bool build_rank_tasks = true;
  int rank_m = 3;
  bool teacher_student = false;
  int max_attempts = 3;
  BackendSpec tasks_backend;

  // evolve
  std::vector<std::filesystem::path> aaie_inputs;
  int m_k = 3;
  bool stop_on_same_punchline = true;
  std::size_t concurrency = 1;
  BackendSpec aaie_backend;

  // gesit
  std::filesystem::path gesit_dataset;
  gesit::GesitConfig gesit;
  bool export_only = false;
  std::optional<std::filesystem::path> policy_path;
  BackendSpec judge_backend;
  BackendSpec expert_backend;

  // eval + infer
  std::filesystem::path eval_tasks;
  std::string eval_judge = "oracle";  // "oracle" | "backend"
  BackendSpec eval_judge_backend;
  std::filesystem::path vectors_path;
  std::filesystem::path word_sets_path;
  int best_of_n = 3;
  BackendSpec generator_backend;

  nlohmann::json export_metadata;  // recorded for external trainers
  nlohmann::json raw;              // canonical config the hash covers
};

/// Applies a `--set dotted.path=value` override; the value is parsed as
/// JSON when possible, else taken as a string.
void apply_override(nlohmann::json& config, const std::string& spec);

RunConfig parse_config(const nlohmann::json& json);
RunConfig load_config(const std::filesystem::path& path,
                      std::span<const std::string> overrides);

/// Per-subcommand validation; referenced input paths must exist.
void validate_for(const RunConfig& config, const std::string& subcommand);

}  // namespace clost::cli
