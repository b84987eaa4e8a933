#pragma once

// Expert rule base and the partition of mined rules into novel, known,
// missing and contradictory knowledge.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nof/clustering.hpp"
#include "nof/rulemining.hpp"

namespace nof {

struct Thresholds {
  double beta_sup = 0.1;
  double beta_conf = 0.8;
  double pi_min = 0.3;

  void validate() const;
  bool operator==(const Thresholds&) const = default;
};

struct ExpertRule {
  std::string id;
  Itemset antecedent;
  Itemset consequent;
  bool negated = false;  // consequent reads NOT consequent

  std::string text() const;
  bool operator==(const ExpertRule&) const = default;
};

struct OntologyRuleBase {
  Thresholds thresholds;
  std::vector<ExpertRule> rules;
  std::vector<OntologyClass> classes;
  std::vector<std::string> extra_attributes;  // declared beyond the summary columns and CLUSTER

  std::vector<std::string> declared_attributes() const;
  bool operator==(const OntologyRuleBase&) const = default;
};

/// A bare consequent name such as "P300" is read as `CLUSTER=P300`.
OntologyRuleBase parse_rule_base(std::string_view json_text);
OntologyRuleBase load_rule_base(const std::filesystem::path& path);
std::string rule_base_to_json(const OntologyRuleBase& base);

struct MatchOptions {
  bool subsumption = false;  // expert antecedent may be a subset of the mined one
};

/// Categorical items must be equal. Interval items align when each finite
/// expert bound lies in the closure of the mined interval and each infinite
/// expert bound faces an infinite mined bound.
bool items_align(const Item& mined, const Item& expert);

/// Ignores the expert rule's negation flag.
bool antecedents_match(const Itemset& mined, const Itemset& expert, const MatchOptions& options = {});

/// False for negated expert rules.
bool rule_match(const AssociationRule& mined, const ExpertRule& expert, const MatchOptions& options = {});

/// Expert rule is `A -> NOT x` and the mined rule is `A -> x`.
bool contradicts(const AssociationRule& mined, const ExpertRule& expert, const MatchOptions& options = {});

struct ReportEntry {
  AssociationRule rule;
  std::vector<std::string> expert_ids;  // matched or contradicted expert rules
};

struct PartitionReport {
  Thresholds thresholds;
  std::vector<AssociationRule> arec;
  std::vector<ReportEntry> novel_histr;
  std::vector<ReportEntry> known_histr;
  std::vector<ReportEntry> known_lwstr;
  std::vector<ExpertRule> missing;
  std::vector<ReportEntry> contr;
  /// Unmatched rules below pi_min; outside the five knowledge categories.
  std::vector<ReportEntry> residue;
};

/// Thresholds come from the rule base. Contradictory rules are kept out of
/// the novel and known sets. Negated expert rules never match a mined rule
/// and so always appear in `missing`.
PartitionReport partition(const std::vector<AssociationRule>& mined, const OntologyRuleBase& base,
                          const MatchOptions& options = {});

std::string report_to_json(const PartitionReport& report);
std::string report_to_text(const PartitionReport& report);

}  // namespace nof
