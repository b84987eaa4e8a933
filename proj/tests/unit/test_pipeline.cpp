#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "nof/config.hpp"
#include "nof/error.hpp"
#include "nof/pipeline.hpp"
#include "paths.hpp"

using namespace nof;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFrontalRule = "SP_max_ROI=frontal&TI_max∈(276,550] -> CLUSTER=P300";

PipelineConfig demo_config(const fs::path& out, const std::string& expert_rules) {
  return load_config(testpaths::source_dir() / "configs" / "p300_demo.json",
                     {"out=" + out.string(), "partition.expert_rules=" + expert_rules});
}

std::string default_expert() { return (testpaths::source_dir() / "configs" / "expert_p300.json").string(); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  return json::parse(in);
}

std::vector<std::string> rule_texts(const json& entries) {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.at("rule").get<std::string>());
  return out;
}

bool contains(const std::vector<std::string>& texts, const std::string& text) {
  return std::find(texts.begin(), texts.end(), text) != texts.end();
}

std::vector<FileDigest> outputs_of(const std::vector<StageRecord>& records) {
  std::vector<FileDigest> out;
  for (const auto& r : records) out.insert(out.end(), r.outputs.begin(), r.outputs.end());
  return out;
}

}  // namespace

TEST(Pipeline, StageNamesRoundTrip) {
  for (const auto stage : kStages) EXPECT_EQ(parse_stage(stage_name(stage)), stage);
  EXPECT_EQ(stage_name(Stage::partition), "partition");
  EXPECT_THROW(parse_stage("assemble"), ConfigError);
}

TEST(Pipeline, MissingUpstreamArtifactIsInputError) {
  testpaths::ScratchDir dir("missing");
  try {
    run_stage(Stage::partition, demo_config(dir.path(), default_expert()));
    FAIL();
  } catch (const InputError& e) {
    const std::string what = e.what();
    EXPECT_EQ(what.rfind("partition: ", 0), 0u) << what;
    EXPECT_NE(what.find("rules.csv"), std::string::npos) << what;
    EXPECT_EQ(exit_code_for(e), 2);
  }
}

TEST(Pipeline, DemoRunsEndToEnd) {
  testpaths::ScratchDir dir("demo");
  const auto records = run_pipeline(demo_config(dir.path(), default_expert()));
  ASSERT_EQ(records.size(), kStages.size());

  const auto manifest = read_manifest(dir.path());
  ASSERT_EQ(manifest.size(), kStages.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    EXPECT_EQ(manifest[i].stage, stage_name(kStages[i]));
    EXPECT_FALSE(manifest[i].outputs.empty());
    for (const auto& d : manifest[i].outputs) {
      EXPECT_EQ(d.sha256.size(), 64u);
      EXPECT_TRUE(fs::exists(dir.path() / d.path)) << d.path;
    }
  }

  const auto report = read_json(dir / "partition/report.json");
  EXPECT_EQ(report.at("format"), "nof-partition/1");
  bool found = false;
  for (const auto& e : report.at("known_histr")) {
    if (e.at("rule") != kFrontalRule) continue;
    found = true;
    EXPECT_EQ(e.at("expert_ids"), json::array({"p300-frontal"}));
    EXPECT_GE(e.at("reliability").get<double>(), 0.3);
  }
  EXPECT_TRUE(found);
  EXPECT_TRUE(report.at("missing").empty());
}

TEST(Pipeline, SameSeedGivesIdenticalArtifacts) {
  testpaths::ScratchDir a("repro-a");
  testpaths::ScratchDir b("repro-b");
  run_pipeline(demo_config(a.path(), default_expert()));
  run_pipeline(demo_config(b.path(), default_expert()));
  EXPECT_EQ(outputs_of(read_manifest(a.path())), outputs_of(read_manifest(b.path())));
}

TEST(Pipeline, RerunningLateStagesReproducesThem) {
  testpaths::ScratchDir dir("rerun");
  const auto config = demo_config(dir.path(), default_expert());
  run_pipeline(config);
  const auto before = read_manifest(dir.path());
  fs::remove_all(dir / "mine");
  fs::remove_all(dir / "partition");
  run_stage(Stage::mine, config);
  run_stage(Stage::partition, config);
  const auto after = read_manifest(dir.path());
  ASSERT_EQ(after.size(), before.size());
  EXPECT_EQ(outputs_of(after), outputs_of(before));
}

TEST(Pipeline, ExpertRuleWithNoMinedCounterpartIsMissing) {
  testpaths::ScratchDir dir("absent");
  const auto expert = dir / "expert.json";
  std::ofstream(expert) << R"js({"rules": [
    {"id": "p300-frontal", "if": ["TI_max∈(300,500]", "SP_max_ROI=frontal"], "then": "P300"},
    {"id": "n400-occipital", "if": ["SP_max_ROI=occipital", "TI_max∈(900,+∞)"], "then": "N400"}
  ]})js";
  run_pipeline(demo_config(dir / "out", expert.string()));
  const auto report = read_json(dir / "out/partition/report.json");
  ASSERT_EQ(report.at("missing").size(), 1u);
  EXPECT_EQ(report.at("missing")[0].at("id"), "n400-occipital");
  EXPECT_TRUE(contains(rule_texts(report.at("known_histr")), kFrontalRule));
}

TEST(Pipeline, ExpertBaseDecidesKnownNovelOrContradicted) {
  testpaths::ScratchDir dir("variants");
  run_pipeline(demo_config(dir / "known", default_expert()));
  run_pipeline(demo_config(dir / "novel", ""));
  const auto negated = dir / "negated.json";
  std::ofstream(negated) << R"js({"rules": [
    {"id": "not-p300", "if": ["TI_max∈(300,500]", "SP_max_ROI=frontal"], "then": {"not": "P300"}}
  ]})js";
  run_pipeline(demo_config(dir / "contr", negated.string()));

  EXPECT_TRUE(contains(rule_texts(read_json(dir / "known/partition/report.json").at("known_histr")), kFrontalRule));
  EXPECT_TRUE(contains(rule_texts(read_json(dir / "novel/partition/report.json").at("novel_histr")), kFrontalRule));
  const auto contr = read_json(dir / "contr/partition/report.json");
  EXPECT_TRUE(contains(rule_texts(contr.at("contr")), kFrontalRule));
  EXPECT_FALSE(contains(rule_texts(contr.at("novel_histr")), kFrontalRule));
}
