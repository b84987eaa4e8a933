#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "nof/error.hpp"
#include "nof/ontology.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace nof;
using gen::random_universe;
using gen::indices;

namespace {

std::vector<std::string> texts(const std::vector<ReportEntry>& e) {
  std::vector<std::string> out;
  for (const auto& x : e) out.push_back(x.rule.text());
  return out;
}

std::vector<std::string> ids(const std::vector<ExpertRule>& e) {
  std::vector<std::string> out;
  for (const auto& x : e) out.push_back(x.id);
  return out;
}

std::set<std::string> text_set(const std::vector<ReportEntry>& e) {
  const auto v = texts(e);
  return {v.begin(), v.end()};
}

bool subset(const std::set<std::string>& a, const std::set<std::string>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST(Partition, WorkedExample) {
  OntologyRuleBase base;
  base.thresholds = {0.1, 0.8, 0.5};
  base.rules = {gen::expert_rule("r2", "SP_max_ROI=frontal", "CLUSTER=P300"), gen::expert_rule("r3", "SP_max_ROI=central", "CLUSTER=N150"),
                gen::expert_rule("r4", "SP_max_ROI=occipital", "CLUSTER=SW700")};
  const std::vector<AssociationRule> rules = {gen::mined_rule("ROI=parietal", "CLUSTER=P300", 0.3, 0.9, 0.8),
                                              gen::mined_rule("SP_max_ROI=frontal", "CLUSTER=P300", 0.3, 0.9, 0.9),
                                              gen::mined_rule("SP_max_ROI=central", "CLUSTER=N150", 0.3, 0.9, 0.1)};
  const auto rep = partition(rules, base);
  EXPECT_EQ(rep.arec.size(), 3u);
  EXPECT_EQ(texts(rep.novel_histr), (std::vector<std::string>{"ROI=parietal -> CLUSTER=P300"}));
  EXPECT_EQ(texts(rep.known_histr), (std::vector<std::string>{"SP_max_ROI=frontal -> CLUSTER=P300"}));
  EXPECT_EQ(texts(rep.known_lwstr), (std::vector<std::string>{"SP_max_ROI=central -> CLUSTER=N150"}));
  EXPECT_EQ(ids(rep.missing), (std::vector<std::string>{"r4"}));
  EXPECT_TRUE(rep.contr.empty());
  EXPECT_TRUE(rep.residue.empty());
  EXPECT_EQ(rep.known_histr[0].expert_ids, (std::vector<std::string>{"r2"}));
}

TEST(Partition, EmptyOntologyMakesStrongRulesNovel) {
  OntologyRuleBase base;
  base.thresholds = {0.1, 0.8, 0.3};
  const std::vector<AssociationRule> rules = {gen::mined_rule("ROI=frontal", "CLUSTER=P300", 0.3, 0.9, 0.5),
                                              gen::mined_rule("ROI=central", "CLUSTER=N150", 0.3, 0.9, 0.1),
                                              gen::mined_rule("ROI=occipital", "CLUSTER=N150", 0.05, 0.9, 0.9)};
  const auto rep = partition(rules, base);
  EXPECT_EQ(texts(rep.novel_histr), (std::vector<std::string>{"ROI=frontal -> CLUSTER=P300"}));
  EXPECT_EQ(texts(rep.residue), (std::vector<std::string>{"ROI=central -> CLUSTER=N150"}));
  EXPECT_TRUE(rep.known_histr.empty());
  EXPECT_TRUE(rep.known_lwstr.empty());
  EXPECT_TRUE(rep.missing.empty());
  EXPECT_TRUE(rep.contr.empty());
}

TEST(Partition, NegatedExpertRuleMakesContradiction) {
  OntologyRuleBase base;
  base.rules = {gen::expert_rule("neg", "ROI=frontal&TI_max>350", "CLUSTER=P300", true)};
  const std::vector<AssociationRule> rules = {gen::mined_rule("ROI=frontal&TI_max∈(350,+∞)", "CLUSTER=P300", 0.3, 0.9, 0.6)};
  const auto rep = partition(rules, base);
  EXPECT_EQ(texts(rep.contr), texts({ReportEntry{rules[0], {}}}));
  EXPECT_EQ(rep.contr[0].expert_ids, (std::vector<std::string>{"neg"}));
  EXPECT_TRUE(rep.novel_histr.empty());
  EXPECT_EQ(ids(rep.missing), (std::vector<std::string>{"neg"}));
}

TEST(Partition, InvalidThresholdsRejected) {
  OntologyRuleBase base;
  base.thresholds.pi_min = 1.5;
  EXPECT_THROW(partition({}, base), ConfigError);
  base.thresholds = {0.0, 0.8, 0.3};
  EXPECT_THROW(partition({}, base), ConfigError);
}

TEST(Matching, Examples) {
  const auto e = gen::expert_rule("e", "TI_max>350&SP_max_ROI=frontal", "CLUSTER=P300");
  EXPECT_TRUE(rule_match(gen::mined_rule("TI_max>350&SP_max_ROI=frontal", "CLUSTER=P300", 1, 1, 0), e));
  EXPECT_TRUE(rule_match(gen::mined_rule("TI_max∈(350,+∞)&SP_max_ROI=frontal", "CLUSTER=P300", 1, 1, 0), e));
  EXPECT_FALSE(rule_match(gen::mined_rule("TI_max>350&SP_max_ROI=frontal", "CLUSTER=N150", 1, 1, 0), e));
  EXPECT_FALSE(contradicts(gen::mined_rule("TI_max>350&SP_max_ROI=frontal", "CLUSTER=N150", 1, 1, 0), e));

  const auto neg = gen::expert_rule("n", "SP_max_ROI=frontal&TI_max>350", "CLUSTER=P300", true);
  const auto same = gen::mined_rule("SP_max_ROI=frontal&TI_max>350", "CLUSTER=P300", 1, 1, 0);
  EXPECT_TRUE(contradicts(same, neg));
  EXPECT_FALSE(rule_match(same, neg));
  EXPECT_FALSE(contradicts(gen::mined_rule("SP_max_ROI=parietal", "CLUSTER=P300", 1, 1, 0), neg));
  EXPECT_FALSE(contradicts(same, e));
}

TEST(Matching, IntervalAlignment) {
  const auto mined_mid = Item::parse("TI_max∈(276,550]");
  EXPECT_TRUE(items_align(mined_mid, Item::parse("TI_max∈(300,500]")));
  EXPECT_TRUE(items_align(mined_mid, Item::parse("TI_max∈(276,550]")));
  EXPECT_FALSE(items_align(mined_mid, Item::parse("TI_max∈(300,600]")));
  EXPECT_FALSE(items_align(mined_mid, Item::parse("TI_max>300")));
  EXPECT_FALSE(items_align(Item::parse("TI_max≤276"), Item::parse("TI_max∈(200,250]")));
  EXPECT_TRUE(items_align(Item::parse("TI_max≤276"), Item::parse("TI_max≤250")));
  EXPECT_FALSE(items_align(mined_mid, Item::parse("SP_cor∈(300,500]")));
  EXPECT_FALSE(items_align(Item::parse("ROI=frontal"), Item::parse("ROI=central")));
}

TEST(Matching, SubsumptionIsOptIn) {
  const auto e = gen::expert_rule("e", "SP_max_ROI=frontal", "CLUSTER=P300");
  const auto m = gen::mined_rule("SP_max_ROI=frontal&TI_max>350", "CLUSTER=P300", 1, 1, 0);
  EXPECT_FALSE(rule_match(m, e));
  EXPECT_TRUE(rule_match(m, e, {true}));
  EXPECT_FALSE(antecedents_match(e.antecedent, m.antecedent, {true}));
}

TEST(Partition, RandomUniversesMatchBruteForce) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto w = random_universe(seed);
    const auto& th = w.base.thresholds;
    const auto rep = partition(w.mined, w.base);
    const auto want = oracle::brute_force_partition(w.mined_sym, w.expert_sym, th.beta_sup, th.beta_conf, th.pi_min);
    std::set<int> arec;
    for (const auto& r : rep.arec)
      for (std::size_t i = 0; i < w.mined.size(); ++i)
        if (w.mined[i].text() == r.text()) arec.insert(static_cast<int>(i));
    EXPECT_EQ(arec, want.arec) << "seed " << seed;
    EXPECT_EQ(indices(rep.novel_histr, w.mined), want.novel) << "seed " << seed;
    EXPECT_EQ(indices(rep.known_histr, w.mined), want.known_hi) << "seed " << seed;
    EXPECT_EQ(indices(rep.known_lwstr, w.mined), want.known_lo) << "seed " << seed;
    EXPECT_EQ(indices(rep.contr, w.mined), want.contr) << "seed " << seed;
    EXPECT_EQ(indices(rep.residue, w.mined), want.residue) << "seed " << seed;
    std::set<int> missing;
    for (const auto& e : rep.missing) missing.insert(std::stoi(e.id.substr(1)) - 1);
    EXPECT_EQ(missing, want.missing) << "seed " << seed;

    const std::size_t total = rep.novel_histr.size() + rep.known_histr.size() + rep.known_lwstr.size() +
                              rep.contr.size() + rep.residue.size();
    EXPECT_EQ(total, rep.arec.size());
    for (const auto* set : {&rep.novel_histr, &rep.known_histr, &rep.known_lwstr, &rep.contr, &rep.residue}) {
      const auto t = texts(*set);
      EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
    }
  }
}

TEST(Partition, MonotoneInThresholds) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto w = random_universe(1000 + seed);
    auto lo = w.base, hi = w.base;
    hi.thresholds.pi_min = std::min(1.0, lo.thresholds.pi_min + 0.2);
    auto a = partition(w.mined, lo), b = partition(w.mined, hi);
    EXPECT_TRUE(subset(text_set(b.known_histr), text_set(a.known_histr)));
    EXPECT_TRUE(subset(text_set(b.novel_histr), text_set(a.novel_histr)));
    EXPECT_TRUE(subset(text_set(a.known_lwstr), text_set(b.known_lwstr)));

    for (int which = 0; which < 2; ++which) {
      auto raised = w.base;
      if (which == 0)
        raised.thresholds.beta_sup = std::min(1.0, raised.thresholds.beta_sup + 0.2);
      else
        raised.thresholds.beta_conf = std::min(1.0, raised.thresholds.beta_conf + 0.2);
      const auto r = partition(w.mined, raised);
      std::set<std::string> arec_a, arec_r;
      for (const auto& x : a.arec) arec_a.insert(x.text());
      for (const auto& x : r.arec) arec_r.insert(x.text());
      EXPECT_TRUE(subset(arec_r, arec_a));
      const auto ma = ids(a.missing), mr = ids(r.missing);
      EXPECT_TRUE(subset({ma.begin(), ma.end()}, {mr.begin(), mr.end()}));
    }
  }
}

TEST(Partition, DeterministicAcrossInputOrder) {
  const auto w = random_universe(77);
  auto shuffled = w.mined;
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(report_to_json(partition(w.mined, w.base)), report_to_json(partition(shuffled, w.base)));
}

TEST(RuleBase, ParsesExpertFile) {
  const std::string text = R"({
  "thresholds": {"beta_sup": 0.2, "beta_conf": 0.7, "pi_min": 0.4},
  "rules": [
    {"id": "p300", "if": ["TI_max∈(300,500]", "SP_max_ROI=frontal"], "then": "P300"},
    {"if": ["TI_max>350"], "then": {"not": "N150"}}
  ]
})";
  const auto base = parse_rule_base(text);
  EXPECT_EQ(base.thresholds, (Thresholds{0.2, 0.7, 0.4}));
  ASSERT_EQ(base.rules.size(), 2u);
  EXPECT_EQ(base.rules[0].text(), "SP_max_ROI=frontal&TI_max∈(300,500] -> CLUSTER=P300");
  EXPECT_EQ(base.rules[1].id, "R2");
  EXPECT_TRUE(base.rules[1].negated);
  EXPECT_EQ(base.rules[1].text(), "TI_max∈(350,+∞) -> NOT CLUSTER=N150");
}

TEST(RuleBase, RoundTrip) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto base = random_universe(seed).base;
    base.classes = {{"root", "", {0, 1, 2}}, {"C1", "root", {0}}, {"C2", "root", {1, 2}}};
    EXPECT_EQ(parse_rule_base(rule_base_to_json(base)), base);
  }
}

TEST(RuleBase, ErrorsNameLineAndAttribute) {
  const std::string unknown = R"({
  "rules": [
    {"id": "a", "if": ["ROI=frontal"], "then": "P300"},
    {"id": "b",
     "if": ["LATENCY>300"], "then": "P300"}
  ]
})";
  try {
    parse_rule_base(unknown);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_NE(std::string(e.what()).find("LATENCY"), std::string::npos);
  }
  try {
    parse_rule_base("{\n  \"rules\": [\n    {\"id\": \"a\", \"if\": [\"ROI=frontal\"], \"then\": \"P300\"},\n"
                    "    {\"id\": \"a\", \"if\": [\"ROI=central\"], \"then\": \"P300\"}\n  ]\n}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
  try {
    parse_rule_base("{\n  \"rules\": [\n    {\"id\": \"a\", \"if\": [\"ROI=frontal\"] \"then\": \"P300\"}\n  ]\n}");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW(parse_rule_base(R"({"thresholds": {"beta_sup": 2}})"), ParseError);
  EXPECT_THROW(parse_rule_base(R"({"rules": [{"if": ["ROI=a", "ROI=b"], "then": "P300"}]})"), ParseError);
  EXPECT_THROW(parse_rule_base(R"({"rules": [{"if": ["CLUSTER=P300"], "then": "P300"}]})"), ParseError);
  EXPECT_THROW(parse_rule_base(R"({"rules": [{"if": ["ROI=a"], "then": {"no": "P300"}}]})"), ParseError);
  EXPECT_THROW(parse_rule_base("[]"), ParseError);
  EXPECT_NO_THROW(parse_rule_base(R"({"attributes": ["LATENCY"], "rules": [{"if": ["LATENCY>3"], "then": "P300"}]})"));
}

TEST(Report, JsonAndTextListEverySet) {
  OntologyRuleBase base;
  base.rules = {gen::expert_rule("gone", "ROI=temporal", "CLUSTER=X")};
  const auto rep = partition({gen::mined_rule("ROI=frontal", "CLUSTER=P300", 0.3, 0.9, 0.5)}, base);
  const auto json = report_to_json(rep);
  EXPECT_NE(json.find("nof-partition/1"), std::string::npos);
  EXPECT_NE(json.find("ROI=frontal -> CLUSTER=P300"), std::string::npos);
  EXPECT_NE(json.find("gone"), std::string::npos);
  const auto text = report_to_text(rep);
  EXPECT_NE(text.find("ROI=frontal -> CLUSTER=P300"), std::string::npos);
  EXPECT_NE(text.find("ROI=temporal -> CLUSTER=X"), std::string::npos);
}
