#include "clost/config.hpp"

#include <cstdlib>
#include <fstream>

#include "clost/error.hpp"

namespace clost::cli {
namespace {

BackendSpec parse_backend(const nlohmann::json& obj, const std::string& where) {
  BackendSpec spec;
  if (obj.is_null()) return spec;
  if (!obj.is_object() || !obj.contains("kind")) {
    throw ValidationError(where + ": backend spec needs a 'kind'");
  }
  const std::string kind = obj["kind"].get<std::string>();
  if (kind == "scripted") {
    spec.kind = BackendSpec::Kind::scripted;
    spec.path = obj.at("path").get<std::string>();
  } else if (kind == "http") {
    spec.kind = BackendSpec::Kind::http;
    spec.url = obj.at("url").get<std::string>();
    spec.model = obj.value("model", std::string{"default"});
    spec.api_key_env = obj.value("api_key_env", std::string{kApiKeyEnvVar});
    spec.max_retries = obj.value("max_retries", 3);
    spec.base_delay_ms = obj.value("base_delay_ms", 200);
  } else {
    throw ValidationError(where + ": unknown backend kind '" + kind + "'");
  }
  return spec;
}

void require_file(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError(what + " not found: " + path.string());
  }
}

void require_backend(const BackendSpec& spec, const std::string& what) {
  if (spec.kind == BackendSpec::Kind::none) {
    throw ValidationError(what + " backend is not configured");
  }
  if (spec.kind == BackendSpec::Kind::scripted) {
    require_file(spec.path, what + " scripted transcript");
  }
}

}  // namespace

std::unique_ptr<agents::ChatBackend> make_backend(const BackendSpec& spec) {
  switch (spec.kind) {
    case BackendSpec::Kind::scripted:
      return std::make_unique<agents::ScriptedBackend>(
          agents::ScriptedBackend::from_file(spec.path));
    case BackendSpec::Kind::http: {
      const char* key = std::getenv(spec.api_key_env.c_str());
      if (key == nullptr || *key == '\0') {
        throw ValidationError("environment variable " + spec.api_key_env +
                              " must be set for the HTTP backend");
      }
      agents::HttpBackendConfig config;
      config.url = spec.url;
      config.model = spec.model;
      config.api_key = key;
      config.max_retries = spec.max_retries;
      config.base_delay_ms = spec.base_delay_ms;
      return std::make_unique<agents::HttpBackend>(std::move(config));
    }
    case BackendSpec::Kind::none:
      break;
  }
  throw ValidationError("backend is not configured");
}

void apply_override(nlohmann::json& config, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set expects key.path=value, got '" + spec + "'");
  }
  const std::string key = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
  if (parsed.is_discarded()) parsed = value;

  nlohmann::json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(
        start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) {
      throw ValidationError("--set key has an empty path segment: " + key);
    }
    if (dot == std::string::npos) {
      (*node)[part] = std::move(parsed);
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

RunConfig parse_config(const nlohmann::json& json) {
  if (!json.is_object()) {
    throw ValidationError("config must be a JSON object");
  }
  RunConfig config;
  config.raw = json;
  config.out_dir = json.value("out_dir", std::string{"out"});
  config.language =
      corpus::language_from_string(json.value("language", std::string{"en"}));
  if (json.contains("asset_dir") && !json["asset_dir"].is_null()) {
    config.asset_dir = json["asset_dir"].get<std::string>();
  }
  config.strict = json.value("strict", false);

  for (const auto& entry : json.value("corpora", nlohmann::json::array())) {
    CorpusInput input;
    input.path = entry.at("path").get<std::string>();
    input.format = entry.at("format").get<std::string>();
    if (entry.contains("corpus_tag")) {
      input.tag =
          corpus::source_from_string(entry["corpus_tag"].get<std::string>());
    } else if (input.format == "semeval2021") {
      input.tag = corpus::Source::semeval2021;
    } else if (input.format.starts_with("semeval2020")) {
      input.tag = corpus::Source::semeval2020;
    }
    config.corpora.push_back(std::move(input));
  }
  if (json.contains("split")) {
    config.split_ratio = json["split"].value("ratio", 0.95);
    config.split_seed = json["split"].value("seed", std::uint64_t{7});
  }

  if (json.contains("tasks")) {
    const auto& tasks = json["tasks"];
    for (const auto& p : tasks.value("inputs", std::vector<std::string>{})) {
      config.task_inputs.emplace_back(p);
    }
    config.m_values = tasks.value("m_values", std::vector<int>{2, 3, 4});
    config.hard_tasks = tasks.value("hard", true);
    if (tasks.contains("gap_threshold") && !tasks["gap_threshold"].is_null()) {
      config.gap_threshold = tasks["gap_threshold"].get<double>();
    }
    config.task_seed = tasks.value("seed", std::uint64_t{13});
    config.balance_families = tasks.value("balance_families", false);
    config.build_rewrite_tasks = tasks.value("rewrite", true);
    config.build_rank_tasks = tasks.value("rank", true);
    config.rank_m = tasks.value("rank_m", 3);
    config.teacher_student = tasks.value("teacher_student", false);
    config.max_attempts = tasks.value("max_attempts", 3);
    config.tasks_backend = parse_backend(
        tasks.value("backend", nlohmann::json(nullptr)), "tasks");
  }

  if (json.contains("aaie")) {
    const auto& aaie = json["aaie"];
    for (const auto& p : aaie.value("inputs", std::vector<std::string>{})) {
      config.aaie_inputs.emplace_back(p);
    }
    config.m_k = aaie.value("m_k", 3);
    config.stop_on_same_punchline =
        aaie.value("stop_on_same_punchline", true);
    config.concurrency = aaie.value("concurrency", std::size_t{1});
    config.aaie_backend =
        parse_backend(aaie.value("backend", nlohmann::json(nullptr)), "aaie");
  }

  if (json.contains("gesit")) {
    const auto& g = json["gesit"];
    config.gesit_dataset = g.value("dataset", std::string{});
    config.gesit.beta = g.value("beta", 0.1);
    config.gesit.steps = g.value("steps", 100);
    config.gesit.t_p = g.value("t_p", 10);
    config.gesit.learning_rate = g.value("learning_rate", 2e-4);
    config.gesit.seed = g.value("seed", std::uint64_t{0});
    config.gesit.lenient_expert = g.value("lenient_expert", false);
    config.gesit.concat_rationales = g.value("concat_rationales", false);
    config.export_only = g.value("export_only", false);
    if (g.contains("policy") && !g["policy"].is_null()) {
      config.policy_path = g["policy"].get<std::string>();
    }
    config.judge_backend = parse_backend(
        g.value("judge_backend", nlohmann::json(nullptr)), "gesit judge");
    config.expert_backend = parse_backend(
        g.value("expert_backend", nlohmann::json(nullptr)), "gesit expert");
  }

  if (json.contains("eval")) {
    const auto& e = json["eval"];
    config.eval_tasks = e.value("tasks", std::string{});
    config.eval_judge = e.value("judge", std::string{"oracle"});
    config.eval_judge_backend = parse_backend(
        e.value("judge_backend", nlohmann::json(nullptr)), "eval judge");
    config.vectors_path = e.value("vectors", std::string{});
    config.word_sets_path = e.value("word_sets", std::string{});
    config.best_of_n = e.value("n", 3);
    config.generator_backend = parse_backend(
        e.value("generator_backend", nlohmann::json(nullptr)), "generator");
  }

  config.export_metadata = json.value(
      "export_metadata",
      nlohmann::json{{"stage1_epochs", 6},
                     {"stage1_learning_rate", 3e-4},
                     {"stage2_epochs", 3},
                     {"stage2_learning_rate", 2e-4}});
  return config;
}

RunConfig load_config(const std::filesystem::path& path,
                      std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open config file: " + path.string());
  }
  nlohmann::json json = nlohmann::json::parse(in, nullptr, false);
  if (json.is_discarded()) {
    throw ValidationError("config file is not valid JSON: " + path.string());
  }
  for (const auto& spec : overrides) {
    apply_override(json, spec);
  }
  return parse_config(json);
}

void validate_for(const RunConfig& config, const std::string& subcommand) {
  if (!(config.split_ratio > 0.0 && config.split_ratio < 1.0)) {
    throw ValidationError("split.ratio must lie in (0,1)");
  }
  for (const int m : config.m_values) {
    if (m < 2 || m > 4) {
      throw ValidationError("tasks.m_values entries must be 2, 3, or 4");
    }
  }
  if (config.asset_dir &&
      !std::filesystem::is_directory(*config.asset_dir)) {
    throw ValidationError("asset_dir not found: " + config.asset_dir->string());
  }

  if (subcommand == "ingest") {
    if (config.corpora.empty()) {
      throw ValidationError("ingest needs at least one corpora entry");
    }
    for (const auto& input : config.corpora) {
      require_file(input.path, "corpus file");
      if (input.format != "semeval2021" && input.format != "semeval2020_1" &&
          input.format != "semeval2020_2" && input.format != "jsonl") {
        throw ValidationError("unknown corpus format '" + input.format + "'");
      }
    }
  } else if (subcommand == "build-tasks") {
    if (config.task_inputs.empty()) {
      throw ValidationError("tasks.inputs must list normalized corpus files");
    }
    for (const auto& p : config.task_inputs) {
      require_file(p, "task input");
    }
    if (config.teacher_student) {
      require_backend(config.tasks_backend, "teacher-student");
    }
    if (config.max_attempts < 1) {
      throw ValidationError("tasks.max_attempts must be >= 1");
    }
  } else if (subcommand == "evolve") {
    if (config.aaie_inputs.empty()) {
      throw ValidationError("aaie.inputs must list normalized corpus files");
    }
    for (const auto& p : config.aaie_inputs) {
      require_file(p, "aaie input");
    }
    if (config.m_k < 1) {
      throw ValidationError("aaie.m_k must be >= 1");
    }
    require_backend(config.aaie_backend, "aaie");
  } else if (subcommand == "gesit") {
    require_file(config.gesit_dataset, "gesit.dataset");
    if (config.policy_path) {
      require_file(*config.policy_path, "gesit.policy");
    }
    if (config.gesit.steps < 1) {
      throw ValidationError("gesit.steps must be >= 1");
    }
    if (config.gesit.t_p < 1 || config.gesit.t_p > config.gesit.steps) {
      throw ValidationError("gesit.t_p must satisfy 1 <= t_p <= steps");
    }
    if (!(config.gesit.beta > 0.0)) {
      throw ValidationError("gesit.beta must be > 0");
    }
    if (!config.export_only) {
      require_backend(config.judge_backend, "gesit judge");
      require_backend(config.expert_backend, "gesit expert");
    }
  } else if (subcommand == "eval-choice") {
    require_file(config.eval_tasks, "eval.tasks");
    if (config.eval_judge != "oracle" && config.eval_judge != "backend") {
      throw ValidationError("eval.judge must be 'oracle' or 'backend'");
    }
    if (config.eval_judge == "backend") {
      require_backend(config.eval_judge_backend, "eval judge");
    }
  } else if (subcommand == "eval-dat") {
    require_file(config.vectors_path, "eval.vectors");
    require_file(config.word_sets_path, "eval.word_sets");
  } else if (subcommand == "infer") {
    if (config.best_of_n < 1) {
      throw ValidationError("eval.n must be >= 1");
    }
    require_backend(config.generator_backend, "generator");
    require_backend(config.eval_judge_backend, "eval judge");
  } else {
    throw ValidationError("unknown subcommand '" + subcommand + "'");
  }
}

}  // namespace clost::cli
