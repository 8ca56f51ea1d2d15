#include "clost/manifest.hpp"

#include <chrono>
#include <fstream>

#include "clost/error.hpp"
#include "clost/hash.hpp"
#include "clost/version.hpp"

namespace clost::cli {

void RunManifest::set_config(const nlohmann::json& config) {
  config_hash = hash::sha256_hex(config.dump());
}

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs[path.string()] = hash::sha256_file(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  outputs[path.string()] = hash::sha256_file(path);
}

nlohmann::json RunManifest::to_json() const {
  return nlohmann::ordered_json{
      {"command", command},
      {"tool_version", tool_version.empty() ? kVersion : tool_version},
      {"config_hash", config_hash},
      {"seeds", nlohmann::ordered_json(seeds)},
      {"inputs", inputs},
      {"outputs", outputs},
      {"timings_ms", timings_ms}};
}

std::filesystem::path RunManifest::write(
    const std::filesystem::path& out_dir) const {
  const auto path = out_dir / ("manifest-" + command + ".json");
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write manifest: " + path.string());
  }
  out << to_json().dump(2) << '\n';
  return path;
}

Stopwatch::Stopwatch() : start_(std::chrono::steady_clock::now()) {}

double Stopwatch::elapsed_ms() const {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start_)
      .count();
}

}  // namespace clost::cli
