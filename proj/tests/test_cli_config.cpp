#include "clost/config.hpp"

#include <cstdlib>
#include <fstream>

#include "doctest.h"

#include "clost/error.hpp"
#include "clost/hash.hpp"
#include "clost/manifest.hpp"
#include "test_util.hpp"

using namespace clost;
using cli::RunConfig;

namespace {

nlohmann::json minimal_config() {
  return nlohmann::json{
      {"out_dir", "out"},
      {"corpora",
       {{{"path", testutil::fixture("rated.jsonl").string()},
         {"format", "jsonl"}}}},
      {"split", {{"ratio", 0.95}, {"seed", 7}}}};
}

}  // namespace

TEST_CASE("config parsing fills defaults") {
  const auto config = cli::parse_config(minimal_config());
  CHECK(config.split_ratio == 0.95);
  CHECK(config.m_values == std::vector<int>{2, 3, 4});
  CHECK(config.gesit.beta == 0.1);
  CHECK(config.gesit.learning_rate == 2e-4);
  CHECK(config.gesit.t_p == 10);
  CHECK(config.export_metadata["stage1_epochs"] == 6);
  CHECK(config.export_metadata["stage2_learning_rate"] == 2e-4);
  REQUIRE(config.corpora.size() == 1);
  CHECK(config.corpora[0].tag == corpus::Source::generic);
}

TEST_CASE("ingest validation") {
  auto json = minimal_config();
  CHECK_NOTHROW(cli::validate_for(cli::parse_config(json), "ingest"));

  SUBCASE("missing input path fails before any work") {
    json["corpora"][0]["path"] = "/no/such/file.jsonl";
    CHECK_THROWS_AS(cli::validate_for(cli::parse_config(json), "ingest"),
                    ValidationError);
  }
  SUBCASE("ratio bounds") {
    json["split"]["ratio"] = 1.5;
    CHECK_THROWS_AS(cli::validate_for(cli::parse_config(json), "ingest"),
                    ValidationError);
  }
  SUBCASE("unknown format") {
    json["corpora"][0]["format"] = "tsv";
    CHECK_THROWS_AS(cli::validate_for(cli::parse_config(json), "ingest"),
                    ValidationError);
  }
}

TEST_CASE("m value and gesit validation") {
  auto json = minimal_config();
  json["tasks"] = {{"inputs", {testutil::fixture("rated.jsonl").string()}},
                   {"m_values", {2, 5}}};
  CHECK_THROWS_AS(cli::validate_for(cli::parse_config(json), "build-tasks"),
                  ValidationError);

  auto gesit_json = minimal_config();
  gesit_json["gesit"] = {{"dataset", testutil::fixture("rated.jsonl").string()},
                         {"steps", 10},
                         {"t_p", 20},
                         {"export_only", true}};
  CHECK_THROWS_AS(cli::validate_for(cli::parse_config(gesit_json), "gesit"),
                  ValidationError);
  gesit_json["gesit"]["t_p"] = 5;
  CHECK_NOTHROW(cli::validate_for(cli::parse_config(gesit_json), "gesit"));
}

TEST_CASE("--set overrides dotted paths with JSON coercion") {
  auto json = minimal_config();
  cli::apply_override(json, "split.ratio=0.5");
  cli::apply_override(json, "gesit.steps=250");
  cli::apply_override(json, "language=zh");
  cli::apply_override(json, "tasks.m_values=[2,3]");
  const auto config = cli::parse_config(json);
  CHECK(config.split_ratio == 0.5);
  CHECK(config.gesit.steps == 250);
  CHECK(config.language == corpus::Language::zh);
  CHECK(config.m_values == std::vector<int>{2, 3});

  CHECK_THROWS_AS(cli::apply_override(json, "no-equals-sign"),
                  ValidationError);
}

TEST_CASE("scripted backend specs instantiate") {
  auto json = minimal_config();
  json["aaie"] = {
      {"inputs", {testutil::fixture("rated.jsonl").string()}},
      {"backend",
       {{"kind", "scripted"}, {"path", "/no/such/transcript.json"}}}};
  // validation checks the transcript exists
  CHECK_THROWS_AS(cli::validate_for(cli::parse_config(json), "evolve"),
                  ValidationError);
}

TEST_CASE("http backends require the api key variable") {
  ::unsetenv(cli::kApiKeyEnvVar);
  cli::BackendSpec spec;
  spec.kind = cli::BackendSpec::Kind::http;
  spec.url = "http://localhost:1/v1/chat/completions";
  try {
    cli::make_backend(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("CLOST_API_KEY") != std::string::npos);
  }

  ::setenv(cli::kApiKeyEnvVar, "k", 1);
  CHECK_NOTHROW(cli::make_backend(spec));
  ::unsetenv(cli::kApiKeyEnvVar);
}

TEST_CASE("sha256 digests match known vectors") {
  CHECK(hash::sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(hash::sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // > one block
  CHECK(hash::sha256_hex(std::string(1000, 'a')) ==
        "41edece42d63e8d9bf515a9ba6932e1c20cbc9f5a5d134645adb5db1b9737ea3");
}

TEST_CASE("manifests hash configs and files deterministically") {
  const auto json = minimal_config();
  cli::RunManifest manifest;
  manifest.command = "unit";
  manifest.set_config(json);
  manifest.add_input(testutil::fixture("rated.jsonl"));
  manifest.seeds["split"] = 7;

  cli::RunManifest again;
  again.command = "unit";
  again.set_config(json);
  again.add_input(testutil::fixture("rated.jsonl"));
  again.seeds["split"] = 7;

  CHECK(manifest.config_hash == again.config_hash);
  CHECK(manifest.to_json()["inputs"] == again.to_json()["inputs"]);
  CHECK(manifest.to_json()["command"] == "unit");
}
