#pragma once

// The 13 spatiotemporal summary attributes computed per factor and
// condition. One FactorSummary row is the unit every mining stage uses.

#include <Eigen/Dense>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nof/decomposition.hpp"
#include "nof/testbed.hpp"

namespace nof {

struct FactorSummary {
  std::string sp_max;
  std::string sp_max_roi;
  std::string sp_min;
  std::string sp_min_roi;
  double in_min = 0.0;
  double in_max = 0.0;
  double in_mean = 0.0;
  std::string roi;
  double sp_cor = 0.0;
  double ti_max = 0.0;  // ms
  std::string event;
  std::string stim;
  std::string mod;

  bool operator==(const FactorSummary&) const = default;
};

/// Column names in CSV order.
inline constexpr std::array<std::string_view, 13> kSummaryColumns = {
    "SP_max", "SP_max_ROI", "SP_min", "SP_min_ROI", "IN_min", "IN_max", "IN_mean",
    "ROI",    "SP_cor",     "TI_max", "EVENT",      "STIM",   "MOD"};

bool is_numeric_attribute(std::string_view column);

/// Text value of a column, numbers in shortest round-trip form.
std::string attribute_text(const FactorSummary& row, std::string_view column);
double attribute_number(const FactorSummary& row, std::string_view column);

struct SummaryResult {
  FactorSummary row;
  std::vector<std::string> warnings;
};

/// `condition` selects trials by exact metadata match. `mean_channel_set`
/// empty means the channels of the factor's own ROI.
SummaryResult extract_summary(const FactorDecomposition& dec, const EpochTensor& epochs, Eigen::Index factor,
                              const TrialMeta& condition, const Eigen::VectorXd& target_topography,
                              const std::vector<std::string>& mean_channel_set = {});

/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SummarizeConfig {
  Eigen::VectorXd target_topography;
  std::vector<std::string> mean_channel_set;
};

struct SummaryTable {
  std::vector<FactorSummary> rows;
  std::vector<Eigen::Index> factor_of_row;
  std::vector<TrialMeta> condition_of_row;
  std::vector<std::string> warnings;
};

/// One row per factor x condition, factor-major.
SummaryTable summarize_dataset(const FactorDecomposition& dec, const EpochTensor& epochs,
                               const SummarizeConfig& config);

/// The summary CSV with its fixed 13-column header. An optional trailing
/// label column (e.g. CLUSTER) is written when `labels` is non-empty.
std::string summaries_to_csv(const std::vector<FactorSummary>& rows, const std::vector<std::string>& labels = {},
                             std::string_view label_column = "CLUSTER");

struct LabeledSummaries {
  std::vector<FactorSummary> rows;
  std::vector<std::string> labels;  // empty when the CSV has no label column
};

LabeledSummaries summaries_from_csv(std::string_view text, std::string_view label_column = "CLUSTER");

}  // namespace nof
