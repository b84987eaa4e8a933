#include <gtest/gtest.h>

#include <random>
#include <set>

#include "nof/classification.hpp"
#include "nof/error.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace nof;
using gen::all_rows;

namespace {

LabeledTable one_numeric(const std::vector<double>& x, const std::vector<std::string>& labels) {
  LabeledTable t;
  t.attributes = {{"x", AttributeKind::numeric}};
  for (double v : x) t.rows.push_back({v});
  t.labels = labels;
  return t;
}

std::vector<Value> record(double x) { return {Value{x}}; }

std::vector<std::size_t> leaf_counts(const DecisionTree& t) {
  std::vector<std::size_t> out;
  for (const auto& n : t.nodes)
    if (n.is_leaf()) out.push_back(n.n);
  return out;
}

double training_errors(const DecisionTree& t) {
  double e = 0;
  for (const auto& n : t.nodes)
    if (n.is_leaf()) e += n.training_errors;
  return e;
}

}  // namespace

TEST(ChooseSplit, MatchesExhaustiveSearchOnSmallTables) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    const auto c = gen::random_tree_case(seed);
    for (std::size_t min_leaf : {1u, 2u}) {
      const auto rows = all_rows(c.table);
      const auto got = choose_split(c.table, rows, min_leaf);
      const auto want = oracle::exhaustive_root_split(c.columns, c.table.labels, min_leaf);
      ASSERT_EQ(got.attribute, want.attribute) << "seed " << seed << " min_leaf " << min_leaf;
      if (want.attribute < 0) continue;
      ++compared;
      EXPECT_NEAR(got.gain, want.gain, 1e-12);
      EXPECT_NEAR(got.gain_ratio, want.ratio, 1e-12);
      if (!c.columns[static_cast<std::size_t>(want.attribute)].is_categorical()) {
        EXPECT_DOUBLE_EQ(got.threshold, want.threshold);
      }
    }
  }
  EXPECT_GT(compared, 200);
}

TEST(BuildTree, SeparableLineSplitsBetweenClasses) {
  const auto t = one_numeric({1, 2, 3, 4, 6, 7, 8, 9}, {"A", "A", "A", "A", "B", "B", "B", "B"});
  const auto want = oracle::exhaustive_root_split({{{1, 2, 3, 4, 6, 7, 8, 9}, {}}}, t.labels, 2);
  const auto tree = build_tree(t, TreeConfig{});
  const auto& root = tree.nodes[0];
  ASSERT_FALSE(root.is_leaf());
  EXPECT_GT(root.threshold, 4.0);
  EXPECT_LT(root.threshold, 6.0);
  EXPECT_EQ(root.threshold, want.threshold);
  for (int c : root.children) {
    const auto& child = tree.nodes[static_cast<std::size_t>(c)];
    EXPECT_TRUE(child.is_leaf());
    EXPECT_EQ(child.training_errors, 0.0);
  }
  const auto pts = split_points(tree, "x");
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_EQ(pts[0], root.threshold);
}

TEST(BuildTree, SingleLabelGivesSingleLeaf) {
  const auto tree = build_tree(one_numeric({1, 5, 9}, {"C1", "C1", "C1"}), TreeConfig{});
  EXPECT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.leaf_count(), 1u);
  EXPECT_TRUE(split_points(tree, "x").empty());
  for (double v : {-100.0, 0.0, 1e9}) EXPECT_EQ(classify(tree, record(v)).label, "C1");
  const auto rules = extract_rules(tree);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_TRUE(rules[0].antecedent.empty());
  EXPECT_EQ(format_rule(rules[0]), "IF TRUE THEN C1 (cov=3, conf=1.00)");
}

TEST(BuildTree, ConflictingDuplicatesKeepMajority) {
  const auto tree = build_tree(one_numeric({2, 2, 2, 2, 2}, {"B", "A", "B", "A", "B"}), TreeConfig{});
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_EQ(tree.nodes[0].label, "B");
  EXPECT_EQ(tree.nodes[0].training_errors, 2.0);
  EXPECT_GT(tree.nodes[0].estimated_errors, 2.0);
}

TEST(BuildTree, MajorityTieTakesSmallestLabel) {
  const auto tree = build_tree(one_numeric({2, 2}, {"B", "A"}), TreeConfig{});
  EXPECT_EQ(tree.nodes[0].label, "A");
}

TEST(BuildTree, InputErrors) {
  EXPECT_THROW(build_tree(one_numeric({}, {}), TreeConfig{}), InputError);
  EXPECT_THROW(build_tree(one_numeric({1, 2}, {"A"}), TreeConfig{}), InputError);
  LabeledTable missing = one_numeric({1, 2}, {"A", "B"});
  missing.rows[0][0] = std::monostate{};
  missing.rows[1][0] = std::monostate{};
  EXPECT_THROW(build_tree(missing, TreeConfig{}), InputError);
  TreeConfig bad;
  bad.min_leaf = 0;
  EXPECT_THROW(build_tree(one_numeric({1, 2}, {"A", "B"}), bad), ConfigError);
}

TEST(Rules, HandBuiltDepthTwoTree) {
  DecisionTree tree;
  tree.attributes = {{"TI_max", AttributeKind::numeric}, {"ROI", AttributeKind::categorical}};
  auto leaf = [](std::string label, std::size_t n) {
    TreeNode l;
    l.label = label;
    l.n = n;
    l.class_counts[label] = n;
    return l;
  };
  TreeNode root;
  root.attribute = 0;
  root.threshold = 350;
  root.children = {1, 2};
  root.majority_child = 2;
  TreeNode inner;
  inner.attribute = 0;
  inner.threshold = 450;
  inner.children = {3, 4};
  inner.majority_child = 3;
  tree.nodes = {root, leaf("N150", 4), inner, leaf("P300", 5), leaf("SW700", 3)};

  const auto rules = extract_rules(tree);
  ASSERT_EQ(rules.size(), tree.leaf_count());
  ASSERT_EQ(rules.size(), 3u);
  using Op = RuleCondition::Op;
  EXPECT_EQ(rules[0].antecedent, (std::vector<RuleCondition>{{"TI_max", Op::le, 350, ""}}));
  EXPECT_EQ(rules[1].antecedent,
            (std::vector<RuleCondition>{{"TI_max", Op::gt, 350, ""}, {"TI_max", Op::le, 450, ""}}));
  EXPECT_EQ(rules[2].antecedent, (std::vector<RuleCondition>{{"TI_max", Op::gt, 450, ""}}));
  EXPECT_EQ(rules[1].consequent, "P300");
  EXPECT_EQ(format_rule(rules[1]), "IF TI_max > 350 AND TI_max <= 450 THEN P300 (cov=5, conf=1.00)");
  EXPECT_EQ(split_points(tree, "TI_max"), (std::vector<double>{350, 450}));
  EXPECT_THROW(split_points(tree, "ROI"), InputError);
  EXPECT_THROW(split_points(tree, "SP_cor"), InputError);
}

TEST(Rules, FidelityAndExclusivityOnRandomTables) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto c = gen::random_tree_case(seed);
    TreeConfig cfg;
    cfg.min_leaf = 1;
    cfg.prune = seed % 2 == 0;
    const auto tree = build_tree(c.table, cfg);
    const auto rules = extract_rules(tree);
    EXPECT_EQ(rules.size(), tree.leaf_count());
    std::size_t routed = 0;
    for (auto n : leaf_counts(tree)) routed += n;
    EXPECT_EQ(routed, c.table.rows.size());
    for (const auto& row : c.table.rows) {
      int matching = 0;
      std::string consequent;
      for (const auto& r : rules)
        if (r.matches(tree.attributes, row)) {
          ++matching;
          consequent = r.consequent;
        }
      ASSERT_EQ(matching, 1) << "seed " << seed;
      EXPECT_EQ(consequent, classify(tree, row).label);
    }
    for (const auto& r : rules) {
      EXPECT_GT(r.confidence, 0.0);
      EXPECT_LE(r.confidence, 1.0);
      EXPECT_GE(r.coverage, 1u);
    }
  }
}

TEST(Rules, ConsistentSeparableDataClassifiedPerfectly) {
  LabeledTable t;
  t.attributes = {{"TI_max", AttributeKind::numeric}, {"SP_max_ROI", AttributeKind::categorical}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> jitter(-30, 30);
  for (int i = 0; i < 60; ++i) {
    const int k = i % 3;
    const double ti = 150 + 250 * k + jitter(rng);
    t.rows.push_back({ti, std::string(k == 2 ? "parietal" : "frontal")});
    t.labels.push_back(k == 0 ? "N150" : k == 1 ? "P300" : "SW700");
  }
  const auto tree = build_tree(t, TreeConfig{});
  for (std::size_t i = 0; i < t.rows.size(); ++i) EXPECT_EQ(classify(tree, t.rows[i]).label, t.labels[i]);
  EXPECT_EQ(tree.leaf_count(), 3u);
}

TEST(Classify, UnseenCategoryAndMissingValues) {
  LabeledTable t;
  t.attributes = {{"ROI", AttributeKind::categorical}};
  for (int i = 0; i < 6; ++i) {
    t.rows.push_back({std::string(i < 4 ? "frontal" : "occipital")});
    t.labels.push_back(i < 4 ? "P300" : "N150");
  }
  TreeConfig cfg;
  cfg.prune = false;
  cfg.min_leaf = 1;
  const auto tree = build_tree(t, cfg);
  ASSERT_FALSE(tree.nodes[0].is_leaf());
  const std::vector<Value> unseen = {std::string("temporal")};
  const auto c = classify(tree, unseen);
  EXPECT_TRUE(c.flagged);
  EXPECT_EQ(c.label, "P300");
  const std::vector<Value> seen = {std::string("occipital")};
  EXPECT_FALSE(classify(tree, seen).flagged);

  const std::vector<Value> missing = {std::monostate{}};
  EXPECT_THROW(classify(tree, missing), InputError);
  cfg.missing = MissingPolicy::majority_child;
  const auto lenient = build_tree(t, cfg);
  EXPECT_TRUE(classify(lenient, missing).flagged);
  EXPECT_EQ(classify(lenient, missing).label, "P300");
  EXPECT_THROW(classify(tree, std::vector<Value>{}), InputError);
}

TEST(Pruning, NeverGrowsAndStaysWithinPessimisticBound) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::bernoulli_distribution flip(0.2);
    LabeledTable t;
    t.attributes = {{"x", AttributeKind::numeric}, {"y", AttributeKind::numeric}};
    for (int i = 0; i < 60; ++i) {
      const double x = g(rng), y = g(rng);
      bool pos = x + 0.5 * y > 0;
      if (flip(rng)) pos = !pos;
      t.rows.push_back({x, y});
      t.labels.push_back(pos ? "A" : "B");
    }
    TreeConfig cfg;
    cfg.min_leaf = 2;
    const auto full = build_unpruned_tree(t, cfg);
    const auto pruned = build_tree(t, cfg);
    EXPECT_LE(pruned.leaf_count(), full.leaf_count());
    double full_estimate = 0;
    for (const auto& n : full.nodes)
      if (n.is_leaf()) full_estimate += n.estimated_errors;
    const double slack = 0.1 * static_cast<double>(full.leaf_count() - pruned.leaf_count());
    EXPECT_LE(training_errors(pruned), full_estimate + slack + 1e-9);
    EXPECT_GE(training_errors(pruned), training_errors(full));
  }
}

TEST(Pruning, ExtraErrorsMatchUpperConfidenceBound) {
  const double z = 0.6744897501960817;  // standard normal quantile at 0.75
  for (double n : {3.0, 10.0, 57.0, 400.0}) {
    for (double e : {1.0, 2.0, 5.0}) {
      if (e + 0.5 >= n) continue;
      EXPECT_NEAR(pessimistic_extra_errors(n, e, 0.25), n * oracle::upper_error_rate(n, e, z) - e, 1e-9);
    }
    EXPECT_NEAR(pessimistic_extra_errors(n, 0.0, 0.25), n * (1 - std::pow(0.25, 1.0 / n)), 1e-12);
  }
  EXPECT_NEAR(pessimistic_extra_errors(4, 3.8, 0.25), 0.67 * 0.2, 1e-12);
  EXPECT_THROW(pessimistic_extra_errors(10, 1, 0.0), ConfigError);
  EXPECT_THROW(pessimistic_extra_errors(10, 1, 1.0), ConfigError);
}

TEST(Summaries, TableFromSummariesTypesColumns) {
  FactorSummary a{"Fz", "frontal", "Oz", "occipital", -1, 2, 0.5, "frontal", 0.9, 400, "stimon", "target", "visual"};
  const auto t = table_from_summaries({a, a}, {"C1", "C2"}, {"TI_max", "ROI"});
  ASSERT_EQ(t.attributes.size(), 2u);
  EXPECT_EQ(t.attributes[0].kind, AttributeKind::numeric);
  EXPECT_EQ(t.attributes[1].kind, AttributeKind::categorical);
  EXPECT_EQ(std::get<double>(t.rows[0][0]), 400.0);
  EXPECT_EQ(std::get<std::string>(t.rows[1][1]), "frontal");
  EXPECT_EQ(table_from_summaries({a}, {"C1"}).attributes.size(), 13u);
  EXPECT_THROW(table_from_summaries({a}, {"C1"}, {"TI_min"}), ConfigError);
  const auto json = tree_to_json(build_tree(t, TreeConfig{}));
  EXPECT_NE(json.find("nof-tree/1"), std::string::npos);
}
