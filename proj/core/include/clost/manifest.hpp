#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace clost::cli {

/// Reproducibility record emitted by every subcommand: config hash, seeds,
/// input/output digests, timings.
struct RunManifest {
  std::string command;
  std::string tool_version;
  std::string config_hash;  // sha256 of the canonical config JSON
  nlohmann::json seeds = nlohmann::json::object();
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  std::map<std::string, double> timings_ms;

  void set_config(const nlohmann::json& config);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  /// Writes <out_dir>/manifest-<command>.json and returns the path.
  std::filesystem::path write(const std::filesystem::path& out_dir) const;
};

/// Millisecond stopwatch for manifest timings.
class Stopwatch {
 public:
  Stopwatch();
  double elapsed_ms() const;

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace clost::cli
