#pragma once

// Discretization of summary rows into transactions, Apriori frequent
// itemsets, and association rules with support, confidence and reliability.

#include <compare>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "nof/features.hpp"

namespace nof {

/// `attr=value` or `attr∈(lo,hi]`; an infinite upper bound prints as `+∞)`.
struct Item {
  enum class Kind { category, interval };

  std::string attribute;
  Kind kind = Kind::category;
  std::string value;  // category only
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  static Item category(std::string attribute, std::string value);
  static Item interval(std::string attribute, double lo, double hi);

  bool is_catch_all() const { return kind == Kind::category && value == "ANY"; }
  std::string text() const;

  /// Accepts the canonical forms plus `attr>v`, `attr≤v`, `attr<=v`,
  /// `attr in (lo,hi]`, with `inf`/`∞` for unbounded ends.
  static Item parse(std::string_view text);

  auto operator<=>(const Item&) const = default;
};

/// Sorted, duplicate-free.
using Itemset = std::vector<Item>;

std::string itemset_text(const Itemset& items);  // joined by '&'
Itemset parse_itemset(std::string_view text);
Itemset canonical(Itemset items);

struct TransactionSet {
  std::vector<Item> dictionary;          // sorted; ids index into it
  std::vector<std::vector<int>> rows;    // sorted item ids

  int id_of(const Item& item) const;     // -1 when absent
  std::size_t size() const { return rows.size(); }
  Itemset items_of(const std::vector<int>& ids) const;
};

/// Builds the dictionary from explicit itemsets.
TransactionSet make_transactions(const std::vector<Itemset>& rows);

using SplitPointMap = std::map<std::string, std::vector<double>, std::less<>>;

/// One item per summary attribute, plus `label_attribute=label` when labels
/// are given. Numeric attributes without split points become `attr=ANY`.
TransactionSet discretize(const std::vector<FactorSummary>& rows, const SplitPointMap& split_points,
                          const std::vector<std::string>& labels = {}, std::string_view label_attribute = "CLUSTER");

/// Removes `attr=ANY` items; supports of the remaining itemsets are unchanged.
TransactionSet drop_catch_all(const TransactionSet& transactions);

struct FrequentItemset {
  std::vector<int> items;  // sorted ids
  std::size_t count = 0;
  double support = 0.0;

  bool operator==(const FrequentItemset&) const = default;
};

struct AprioriOptions {
  std::size_t max_length = 0;  // 0: unbounded
};

/// Levelwise join/prune; an itemset is frequent when count >= ceil(beta_sup * n).
/// Output ordered by length, then lexicographically by id.
std::vector<FrequentItemset> apriori(const TransactionSet& transactions, double beta_sup,
                                     const AprioriOptions& options = {});

struct AssociationRule {
  Itemset antecedent;
  Itemset consequent;
  double support = 0.0;
  double confidence = 0.0;
  double reliability = 0.0;

  std::string text() const;  // `A&B -> C`
  bool operator==(const AssociationRule&) const = default;
};

struct RuleOptions {
  bool single_item_consequent = true;
  std::vector<std::string> consequent_attributes;  // empty: any attribute
};

/// |confidence - consequent support|.
double reliability(double confidence, double consequent_support);
/// Recounts from the transactions; throws when the antecedent never occurs.
double reliability(const AssociationRule& rule, const TransactionSet& transactions);

std::vector<AssociationRule> generate_rules(const std::vector<FrequentItemset>& itemsets, double beta_conf,
                                            const TransactionSet& transactions, const RuleOptions& options = {});

/// Orders rules by antecedent text, then consequent text.
void sort_rules(std::vector<AssociationRule>& rules);

std::string rules_to_csv(const std::vector<AssociationRule>& rules);
std::vector<AssociationRule> rules_from_csv(std::string_view text);

std::string itemsets_to_csv(const std::vector<FrequentItemset>& itemsets, const TransactionSet& transactions);
std::string transactions_to_csv(const TransactionSet& transactions);

}  // namespace nof
