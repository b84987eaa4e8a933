#pragma once

// Unsupervised grouping of summary rows: Gaussian-mixture EM for flat
// clusters and divisive / agglomerative hierarchies for the pattern taxonomy.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nof/features.hpp"

namespace nof {

// --- observation encoding ------------------------------------------------------

struct EncodingConfig {
  std::vector<std::string> numeric = {"IN_min", "IN_max", "IN_mean", "SP_cor", "TI_max"};
  std::vector<std::string> categorical;  // one-hot encoded
  double categorical_weight = 1.0;
  bool standardize = true;
  std::size_t pca_components = 0;  // 0 keeps the encoded space
};

struct ObservationMatrix {
  Eigen::MatrixXd rows;  // observations x features
  std::vector<std::string> column_names;
  // z-scoring of the numeric columns that were kept (std > 0)
  std::vector<std::string> scaled_columns;
  Eigen::VectorXd scale_mean;
  Eigen::VectorXd scale_std;
  // PCA projection, empty unless pca_components > 0
  Eigen::MatrixXd pca_basis;  // encoded features x components
  Eigen::VectorXd pca_center;
};

/// Constant columns are dropped so the recorded scaling stays invertible.
ObservationMatrix encode_observations(const std::vector<FactorSummary>& rows, const EncodingConfig& config);

/// Column-wise z-score; columns with zero spread are left centred only.
Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& x);

// --- EM Gaussian mixture -----------------------------------------------------

enum class CovarianceType { diagonal, full };

struct EmConfig {
  std::uint64_t seed = 0;
  double tol = 1e-8;  // relative log-likelihood change
  int max_iter = 500;
  int n_restarts = 5;
  double cov_floor = 1e-6;  // times mean per-feature variance of the data
  CovarianceType covariance = CovarianceType::diagonal;
};

struct ClusterModel {
  int k = 0;
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;  // k x d
  std::vector<Eigen::MatrixXd> covariances;
  CovarianceType covariance = CovarianceType::diagonal;
  double variance_floor = 0.0;
  std::vector<int> assignments;
  double log_likelihood = 0.0;
  std::vector<double> log_likelihood_trace;  // of the returned restart
  int n_iter = 0;
  bool converged = false;
  int restart = 0;

  Eigen::Index dim() const { return means.cols(); }
  std::size_t n_parameters() const;
};

/// Best of n_restarts by final log-likelihood (lowest restart index on ties).
ClusterModel em_fit(const Eigen::MatrixXd& x, int k, const EmConfig& config);

struct EmPrediction {
  std::vector<int> assignments;
  Eigen::MatrixXd responsibilities;  // n x k, rows sum to 1
  double log_likelihood = 0.0;
};

EmPrediction em_predict(const ClusterModel& model, const Eigen::MatrixXd& x);

double bic(const ClusterModel& model, Eigen::Index n_rows);

struct ModelSelection {
  ClusterModel model;
  std::vector<double> bic_by_k;  // index k-1
};

/// Fits k = 1..k_max (capped at row count) and keeps the lowest BIC.
ModelSelection em_select_k(const Eigen::MatrixXd& x, int k_max, const EmConfig& config);

std::string cluster_model_to_json(const ClusterModel& model);

// --- hierarchies ---------------------------------------------------------------

struct TaxonomyNode {
  std::vector<std::size_t> members;  // sorted observation indices
  double height = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  std::string label;  // C1..Cm on leaves

  bool is_leaf() const { return left < 0; }
};

enum class HierarchyKind { agglomerative, divisive };

struct Taxonomy {
  HierarchyKind kind = HierarchyKind::agglomerative;
  std::vector<TaxonomyNode> nodes;
  int root = -1;

  std::vector<int> leaves() const;
  std::size_t n_observations() const { return root < 0 ? 0 : nodes[static_cast<std::size_t>(root)].members.size(); }
  /// Children partition parents, leaves partition everything, heights monotone.
  void validate() const;
};

enum class SplitMethod { kmeans, em };

struct DivisiveConfig {
  int max_depth = 8;
  std::size_t min_leaf = 1;
  double min_sse_reduction = 0.1;  // fraction of the parent's SSE
  std::uint64_t seed = 0;
  SplitMethod method = SplitMethod::kmeans;
  int n_init = 10;
  bool standardize = false;
};

/// Internal node height = within-node sum of squared deviations; leaves 0.
Taxonomy divisive_hierarchy(const Eigen::MatrixXd& x, const DivisiveConfig& config);

enum class Linkage { single, complete, average };

Linkage parse_linkage(std::string_view name);
std::string_view linkage_name(Linkage linkage);

/// Euclidean distances; node height = merge distance.
Taxonomy agglomerative_hierarchy(const Eigen::MatrixXd& x, Linkage linkage);

std::string taxonomy_to_json(const Taxonomy& taxonomy);

struct TaxonomyCut {
  enum class By { height, leaf_count };
  By by = By::leaf_count;
  double height = 0.0;
  std::size_t leaf_count = 1;

  static TaxonomyCut at_height(double h) { return {By::height, h, 0}; }
  static TaxonomyCut into(std::size_t n) { return {By::leaf_count, 0.0, n}; }
};

struct OntologyClass {
  std::string name;
  std::string parent;  // empty for the top class
  std::vector<std::size_t> members;

  bool operator==(const OntologyClass&) const = default;
};

struct ClassPartition {
  std::vector<std::string> labels;                 // C1..Cm ordered by smallest member
  std::vector<std::vector<std::size_t>> members;   // per label
  std::vector<std::string> label_of_observation;
  std::vector<OntologyClass> declarations;         // cut classes plus their ancestors
};

ClassPartition taxonomy_to_classes(const Taxonomy& taxonomy, const TaxonomyCut& cut);

}  // namespace nof
