#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clost/corpus.hpp"

namespace clost::prompts {

/// Role prompts, seed instruction/rules, and task templates, keyed by
/// (name, language). Compiled-in defaults can be overridden by text files
/// laid out as `<dir>/<lang>/<name>.txt`.
class PromptAssets {
 public:
  static PromptAssets builtin();
  static PromptAssets load_dir(const std::filesystem::path& dir);

  const std::string& get(std::string_view name, corpus::Language lang) const;
  bool has(std::string_view name, corpus::Language lang) const;
  void set(std::string_view name, corpus::Language lang, std::string text);

  /// The ordered generation prompt variants (`generate_1`, `generate_2`, ...).
  std::vector<std::string> generation_prompts(corpus::Language lang) const;

 private:
  std::map<std::string, std::string> texts_;  // "<lang>/<name>" -> text
};

/// Replaces each `{key}` placeholder with its value.
std::string render(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> subs);

}  // namespace clost::prompts
