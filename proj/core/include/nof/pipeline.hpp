#pragma once

// Stage orchestration. Every stage reads and writes files under the output
// directory only, so any stage can be rerun from the artifacts of the
// previous one.
//
//   synth/      montage.csv, templates.json, epochs/<subject>/
//   decompose/  <subject>.json
//   extract/    summary.csv, provenance.csv, warnings.txt
//   cluster/    clustered.csv, model.json, taxonomy.json, classes.json
//   classify/   tree.json, rules.json, rules.txt, split_points.json
//   mine/       transactions.csv, itemsets.csv, rules.csv
//   partition/  report.json, report.txt
//   run.json    one record per stage: inputs and outputs with sha256, wall time

#include <array>
#include <exception>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nof/config.hpp"

namespace nof {

enum class Stage { synth, decompose, extract, cluster, classify, mine, partition };

inline constexpr std::array<Stage, 7> kStages = {Stage::synth,    Stage::decompose, Stage::extract,  Stage::cluster,
                                                 Stage::classify, Stage::mine,      Stage::partition};

std::string_view stage_name(Stage stage);
Stage parse_stage(std::string_view name);

struct FileDigest {
  std::string path;  // relative to the output directory when inside it
  std::string sha256;

  bool operator==(const FileDigest&) const = default;
};

struct StageRecord {
  std::string stage;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  double wall_ms = 0.0;
};

/// Runs one stage and upserts its record in `<out>/run.json`. Errors keep
/// their class and gain a "<stage>: " prefix.
StageRecord run_stage(Stage stage, const PipelineConfig& config);

/// synth (when enabled) through partition, in order.
std::vector<StageRecord> run_pipeline(const PipelineConfig& config);

std::vector<StageRecord> read_manifest(const std::filesystem::path& out_dir);

/// 2 input, 3 config, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& error);

}  // namespace nof
