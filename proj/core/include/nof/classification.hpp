#pragma once

// Gain-ratio decision trees (C4.5 family) mapping summary attributes to
// cluster labels, plus the rules and split points derived from them.
//
// This approximates C5.0: splits maximise gain ratio among candidates whose
// information gain is at least the mean gain, numeric thresholds sit at
// midpoints between sorted distinct values, and subtrees are replaced by
// leaves under C4.5's pessimistic (upper confidence bound) error estimate.
// Boosting, winnowing and soft thresholds are not implemented.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nof/features.hpp"

namespace nof {

enum class AttributeKind { numeric, categorical };

struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::numeric;
};

/// monostate marks a missing value.
using Value = std::variant<std::monostate, double, std::string>;

struct LabeledTable {
  std::vector<AttributeSpec> attributes;
  std::vector<std::vector<Value>> rows;
  std::vector<std::string> labels;

  void validate() const;
};

/// Builds a table over the given summary attributes (all 13 by default).
LabeledTable table_from_summaries(const std::vector<FactorSummary>& rows, const std::vector<std::string>& labels,
                                  const std::vector<std::string>& attributes = {});
std::vector<Value> record_from_summary(const FactorSummary& row, const std::vector<AttributeSpec>& attributes);

enum class MissingPolicy { error, majority_child };

struct TreeConfig {
  std::size_t min_leaf = 2;
  int max_depth = 12;
  bool prune = true;
  double prune_cf = 0.25;
  MissingPolicy missing = MissingPolicy::error;
};

struct TreeNode {
  std::string label;  // majority class (ties: smallest label)
  std::map<std::string, std::size_t> class_counts;
  std::size_t n = 0;
  double training_errors = 0.0;
  double estimated_errors = 0.0;  // pessimistic: errors + upper-bound allowance

  int attribute = -1;  // -1 for leaves
  double threshold = 0.0;               // numeric: child 0 takes value <= threshold
  std::vector<std::string> categories;  // categorical: one child per category
  std::vector<int> children;
  int majority_child = -1;

  bool is_leaf() const { return attribute < 0; }
};

struct DecisionTree {
  std::vector<AttributeSpec> attributes;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t n_training = 0;
  TreeConfig config;

  std::size_t leaf_count() const;
  int depth() const;
  std::vector<std::string> attributes_used() const;
};

/// Upper-confidence allowance on top of `errors` misclassifications among `n`
/// cases (C4.5's AddErrs), for confidence factor `cf`.
double pessimistic_extra_errors(double n, double errors, double cf);

/// Root split selection on its own, exposed for verification.
struct SplitChoice {
  int attribute = -1;  // -1: no admissible split
  double threshold = 0.0;
  double gain = 0.0;
  double gain_ratio = 0.0;
};
SplitChoice choose_split(const LabeledTable& table, std::span<const std::size_t> rows, std::size_t min_leaf);

DecisionTree build_tree(const LabeledTable& table, const TreeConfig& config);
/// Same tree without the pruning pass.
DecisionTree build_unpruned_tree(const LabeledTable& table, const TreeConfig& config);

struct Classification {
  std::string label;
  bool flagged = false;  // routed through a majority child (unseen or missing value)
};

Classification classify(const DecisionTree& tree, std::span<const Value> record);

struct RuleCondition {
  enum class Op { le, gt, eq };
  std::string attribute;
  Op op = Op::eq;
  double number = 0.0;
  std::string category;

  bool operator==(const RuleCondition&) const = default;
};

struct ClassificationRule {
  std::vector<RuleCondition> antecedent;
  std::string consequent;
  std::size_t coverage = 0;
  double confidence = 0.0;

  bool matches(const std::vector<AttributeSpec>& attributes, std::span<const Value> record) const;
};

/// One rule per leaf; interval bounds along a path are collapsed to the
/// tightest `>` and `<=` per attribute.
std::vector<ClassificationRule> extract_rules(const DecisionTree& tree);

/// `IF TI_max > 350 AND SP_max_ROI = frontal THEN C2 (cov=14, conf=0.93)`
std::string format_rule(const ClassificationRule& rule);

/// Distinct thresholds the tree uses on a numeric attribute, ascending.
std::vector<double> split_points(const DecisionTree& tree, std::string_view attribute);

std::string tree_to_json(const DecisionTree& tree);
std::string rules_to_json(const std::vector<ClassificationRule>& rules);

}  // namespace nof
