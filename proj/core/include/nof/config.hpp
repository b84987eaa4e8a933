#pragma once

// Pipeline configuration. The file format is JSON; every key has an explicit
// default and `--set a.b=value` style overrides address keys by dotted path.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nof/classification.hpp"
#include "nof/clustering.hpp"
#include "nof/decomposition.hpp"
#include "nof/testbed.hpp"

namespace nof {

struct SynthStageConfig {
  bool enabled = true;
  std::string patterns = "demo";  // "demo" (N150, P300, SW700) or "p300"
  std::size_t subjects = 6;
  std::size_t trials_per_subject = 60;
  double fs = 250.0;
  double t0_ms = -100.0;
  std::size_t n_times = 250;
  double snr = 1.0;
  double gain_jitter = 0.2;
  double topography_noise = 0.15;
  double latency_jitter_ms = 20.0;
  std::vector<TrialMeta> conditions = {{"stimon", "target", "visual"}, {"stimon", "standard", "visual"}};
};

struct InputConfig {
  std::vector<std::string> epochs;  // epoch directories; empty: synth output
  std::string templates;            // pattern library; empty: synth output
};

struct DecomposeStageConfig {
  std::size_t n_components = 3;
  double variance_fraction = 0.0;  // used instead of n_components when > 0
  Contrast contrast = Contrast::tanh;
  double tolerance = 1e-6;
  int max_iter = 500;
};

struct ExtractStageConfig {
  std::string target_pattern = "P300";
  std::vector<std::string> mean_channel_set;
  double min_pattern_correlation = 0.5;
};

struct ClusterStageConfig {
  EncodingConfig encoding;
  int k = 0;  // 0: choose by BIC up to k_max
  int k_max = 6;
  CovarianceType covariance = CovarianceType::diagonal;
  double cov_floor = 1e-3;
  int restarts = 5;
  int max_iter = 500;
  double tol = 1e-8;
  HierarchyKind hierarchy = HierarchyKind::agglomerative;
  Linkage linkage = Linkage::average;
  bool name_by_pattern = true;
};

struct ClassifyStageConfig {
  std::vector<std::string> attributes;  // empty: all summary attributes
  TreeConfig tree;
};

struct MineStageConfig {
  double beta_sup = 0.1;
  double beta_conf = 0.8;
  bool include_cluster = true;
  bool drop_catch_all = true;
  std::size_t max_length = 0;
  bool single_consequent = true;
  std::vector<std::string> consequent_attributes;
};

struct PartitionStageConfig {
  std::string expert_rules;  // empty: no expert knowledge
  std::optional<double> beta_sup;
  std::optional<double> beta_conf;
  std::optional<double> pi_min;
  bool subsumption = false;
};

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::string out = "nof-out";
  SynthStageConfig synth;
  InputConfig input;
  DecomposeStageConfig decompose;
  ExtractStageConfig extract;
  ClusterStageConfig cluster;
  ClassifyStageConfig classify;
  MineStageConfig mine;
  PartitionStageConfig partition;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Defaults, then the JSON document, then `key=value` overrides. Values are
/// read as JSON when they parse, otherwise as strings. Unknown keys throw.
PipelineConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides = {});
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
PipelineConfig default_config(const std::vector<std::string>& overrides = {});

std::string config_to_json(const PipelineConfig& config);

}  // namespace nof
