#include "nof/classification.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

constexpr double kEps = 1e-12;

double entropy(const std::map<std::string, std::size_t>& counts, std::size_t n) {
  if (n == 0) return 0.0;
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

double entropy_of_sizes(const std::vector<std::size_t>& sizes, std::size_t n) {
  double h = 0.0;
  for (auto s : sizes) {
    if (s == 0) continue;
    const double p = static_cast<double>(s) / static_cast<double>(n);
    h -= p * std::log2(p);
  }
  return h;
}

std::map<std::string, std::size_t> count_labels(const LabeledTable& t, std::span<const std::size_t> rows) {
  std::map<std::string, std::size_t> counts;
  for (auto r : rows) ++counts[t.labels[r]];
  return counts;
}

std::string majority(const std::map<std::string, std::size_t>& counts) {
  std::string best;
  std::size_t best_n = 0;
  for (const auto& [label, c] : counts)
    if (c > best_n) {  // map order makes ties resolve to the smallest label
      best = label;
      best_n = c;
    }
  return best;
}

double numeric_value(const Value& v, const std::string& attr) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (std::holds_alternative<std::monostate>(v)) throw InputError("missing value for attribute " + attr);
  throw InputError("attribute " + attr + " expects a number");
}

const std::string& category_value(const Value& v, const std::string& attr) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  if (std::holds_alternative<std::monostate>(v)) throw InputError("missing value for attribute " + attr);
  throw InputError("attribute " + attr + " expects a category");
}

struct Candidate {
  double threshold = 0.0;
  double gain = 0.0;
  double ratio = 0.0;
  bool valid = false;
};

Candidate best_numeric(const LabeledTable& t, std::span<const std::size_t> rows, std::size_t a, double base_h,
                       std::size_t min_leaf) {
  const auto& attr = t.attributes[a].name;
  std::vector<std::pair<double, const std::string*>> vals;
  vals.reserve(rows.size());
  for (auto r : rows) vals.emplace_back(numeric_value(t.rows[r][a], attr), &t.labels[r]);
  std::sort(vals.begin(), vals.end(), [](const auto& x, const auto& y) { return x.first < y.first; });

  std::map<std::string, std::size_t> left, right;
  for (const auto& v : vals) ++right[*v.second];
  const std::size_t n = vals.size();
  Candidate best;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    ++left[*vals[i].second];
    --right[*vals[i].second];
    if (vals[i].first == vals[i + 1].first) continue;
    const std::size_t nl = i + 1;
    const std::size_t nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) continue;
    const double cond = (static_cast<double>(nl) * entropy(left, nl) + static_cast<double>(nr) * entropy(right, nr)) /
                        static_cast<double>(n);
    const double gain = base_h - cond;
    if (gain <= kEps) continue;
    const double ratio = gain / entropy_of_sizes({nl, nr}, n);
    if (!best.valid || ratio > best.ratio + kEps) {
      best = {0.5 * (vals[i].first + vals[i + 1].first), gain, ratio, true};
    }
  }
  return best;
}

Candidate best_categorical(const LabeledTable& t, std::span<const std::size_t> rows, std::size_t a, double base_h,
                           std::size_t min_leaf) {
  const auto& attr = t.attributes[a].name;
  std::map<std::string, std::map<std::string, std::size_t>> by_value;
  for (auto r : rows) ++by_value[category_value(t.rows[r][a], attr)][t.labels[r]];
  if (by_value.size() < 2) return {};
  std::size_t big_branches = 0;
  std::vector<std::size_t> sizes;
  double cond = 0.0;
  for (const auto& [value, counts] : by_value) {
    std::size_t s = 0;
    for (const auto& [l, c] : counts) s += c;
    sizes.push_back(s);
    if (s >= min_leaf) ++big_branches;
    cond += static_cast<double>(s) * entropy(counts, s);
  }
  if (big_branches < 2) return {};
  const double gain = base_h - cond / static_cast<double>(rows.size());
  if (gain <= kEps) return {};
  return {0.0, gain, gain / entropy_of_sizes(sizes, rows.size()), true};
}

class TreeBuilder {
 public:
  TreeBuilder(const LabeledTable& t, const TreeConfig& c) : table_(t), cfg_(c) {}

  DecisionTree build() {
    DecisionTree tree;
    tree.attributes = table_.attributes;
    tree.config = cfg_;
    tree.n_training = table_.rows.size();
    std::vector<std::size_t> all(table_.rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    grow(tree, all, 0);
    return tree;
  }

 private:
  int grow(DecisionTree& tree, const std::vector<std::size_t>& rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
      auto& node = tree.nodes.back();
      node.class_counts = count_labels(table_, rows);
      node.n = rows.size();
      node.label = majority(node.class_counts);
      node.training_errors = static_cast<double>(node.n - node.class_counts.at(node.label));
    }
    if (tree.nodes[static_cast<std::size_t>(id)].class_counts.size() < 2 || depth >= cfg_.max_depth ||
        rows.size() < 2 * cfg_.min_leaf)
      return id;

    SplitChoice split = choose_split(table_, rows, cfg_.min_leaf);
    if (split.attribute < 0) return id;

    const auto a = static_cast<std::size_t>(split.attribute);
    const auto& attr = table_.attributes[a];
    std::vector<std::vector<std::size_t>> parts;
    std::vector<std::string> categories;
    if (attr.kind == AttributeKind::numeric) {
      parts.resize(2);
      for (auto r : rows) parts[numeric_value(table_.rows[r][a], attr.name) <= split.threshold ? 0 : 1].push_back(r);
    } else {
      std::map<std::string, std::vector<std::size_t>> by_value;
      for (auto r : rows) by_value[category_value(table_.rows[r][a], attr.name)].push_back(r);
      for (auto& [value, part] : by_value) {
        categories.push_back(value);
        parts.push_back(std::move(part));
      }
    }

    std::vector<int> children;
    for (const auto& part : parts) children.push_back(grow(tree, part, depth + 1));

    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.attribute = split.attribute;
    node.threshold = split.threshold;
    node.categories = std::move(categories);
    node.children = std::move(children);
    std::size_t best_n = 0;
    for (int c : node.children) {
      const auto cn = tree.nodes[static_cast<std::size_t>(c)].n;
      if (cn > best_n) {
        best_n = cn;
        node.majority_child = c;
      }
    }
    return id;
  }

  const LabeledTable& table_;
  const TreeConfig& cfg_;
};

// Bottom-up subtree replacement; returns the subtree's estimated errors.
double prune_node(DecisionTree& tree, int id, double cf) {
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  const double as_leaf = node.training_errors + pessimistic_extra_errors(static_cast<double>(node.n), node.training_errors, cf);
  if (node.is_leaf()) {
    node.estimated_errors = as_leaf;
    return as_leaf;
  }
  double subtree = 0.0;
  const auto children = node.children;
  for (int c : children) subtree += prune_node(tree, c, cf);
  auto& again = tree.nodes[static_cast<std::size_t>(id)];
  if (as_leaf <= subtree + 0.1) {
    again.attribute = -1;
    again.children.clear();
    again.categories.clear();
    again.majority_child = -1;
    again.estimated_errors = as_leaf;
    return as_leaf;
  }
  again.estimated_errors = subtree;
  return subtree;
}

void annotate_estimates(DecisionTree& tree, int id, double cf) {
  auto& node = tree.nodes[static_cast<std::size_t>(id)];
  const double as_leaf = node.training_errors + pessimistic_extra_errors(static_cast<double>(node.n), node.training_errors, cf);
  if (node.is_leaf()) {
    node.estimated_errors = as_leaf;
    return;
  }
  double subtree = 0.0;
  for (int c : node.children) {
    annotate_estimates(tree, c, cf);
    subtree += tree.nodes[static_cast<std::size_t>(c)].estimated_errors;
  }
  tree.nodes[static_cast<std::size_t>(id)].estimated_errors = subtree;
}

// Drops unreachable nodes left behind by pruning.
void compact(DecisionTree& tree) {
  std::vector<TreeNode> out;
  std::function<int(int)> copy = [&](int id) {
    const int nid = static_cast<int>(out.size());
    out.push_back(tree.nodes[static_cast<std::size_t>(id)]);
    std::vector<int> kids;
    int majority_child = -1;
    for (int c : tree.nodes[static_cast<std::size_t>(id)].children) {
      int nc = copy(c);
      if (c == tree.nodes[static_cast<std::size_t>(id)].majority_child) majority_child = nc;
      kids.push_back(nc);
    }
    out[static_cast<std::size_t>(nid)].children = std::move(kids);
    out[static_cast<std::size_t>(nid)].majority_child = majority_child;
    return nid;
  };
  copy(0);
  tree.nodes = std::move(out);
}

std::string op_text(RuleCondition::Op op) {
  switch (op) {
    case RuleCondition::Op::le: return "<=";
    case RuleCondition::Op::gt: return ">";
    case RuleCondition::Op::eq: return "=";
  }
  return "?";
}

}  // namespace

void LabeledTable::validate() const {
  if (rows.empty()) throw InputError("decision tree: empty input");
  if (labels.size() != rows.size()) throw InputError("decision tree: label count does not match row count");
  std::set<std::string> names;
  for (const auto& a : attributes)
    if (!names.insert(a.name).second) throw InputError("decision tree: duplicate attribute " + a.name);
  for (const auto& r : rows)
    if (r.size() != attributes.size()) throw InputError("decision tree: row width does not match attributes");
  for (std::size_t a = 0; a < attributes.size(); ++a) {
    const bool all_missing = std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
      return std::holds_alternative<std::monostate>(r[a]);
    });
    if (all_missing) throw InputError("decision tree: attribute " + attributes[a].name + " is missing in every row");
  }
}

std::vector<Value> record_from_summary(const FactorSummary& row, const std::vector<AttributeSpec>& attributes) {
  std::vector<Value> rec;
  rec.reserve(attributes.size());
  for (const auto& a : attributes) {
    if (a.kind == AttributeKind::numeric)
      rec.emplace_back(attribute_number(row, a.name));
    else
      rec.emplace_back(attribute_text(row, a.name));
  }
  return rec;
}

LabeledTable table_from_summaries(const std::vector<FactorSummary>& rows, const std::vector<std::string>& labels,
                                  const std::vector<std::string>& attributes) {
  LabeledTable t;
  std::vector<std::string> names = attributes;
  if (names.empty()) names.assign(kSummaryColumns.begin(), kSummaryColumns.end());
  for (const auto& n : names) {
    if (std::find(kSummaryColumns.begin(), kSummaryColumns.end(), n) == kSummaryColumns.end())
      throw ConfigError("unknown summary attribute " + n);
    t.attributes.push_back({n, is_numeric_attribute(n) ? AttributeKind::numeric : AttributeKind::categorical});
  }
  for (const auto& r : rows) t.rows.push_back(record_from_summary(r, t.attributes));
  t.labels = labels;
  return t;
}

double pessimistic_extra_errors(double n, double e, double cf) {
  if (n <= 0) return 0.0;
  if (!(cf > 0.0 && cf < 1.0)) throw ConfigError("prune_cf must be in (0, 1)");
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - cf);
  const double coeff = z * z;
  if (e < 1e-6) return n * (1.0 - std::exp(std::log(cf) / n));
  if (e < 0.9999) {
    const double v0 = n * (1.0 - std::exp(std::log(cf) / n));
    return v0 + e * (pessimistic_extra_errors(n, 1.0, cf) - v0);
  }
  if (e + 0.5 >= n) return 0.67 * (n - e);
  const double pr =
      (e + 0.5 + coeff / 2.0 + std::sqrt(coeff * ((e + 0.5) * (1.0 - (e + 0.5) / n) + coeff / 4.0))) / (n + coeff);
  return n * pr - e;
}

SplitChoice choose_split(const LabeledTable& table, std::span<const std::size_t> rows, std::size_t min_leaf) {
  const auto counts = count_labels(table, rows);
  const double base_h = entropy(counts, rows.size());
  std::vector<Candidate> cands(table.attributes.size());
  double gain_sum = 0.0;
  std::size_t n_valid = 0;
  for (std::size_t a = 0; a < table.attributes.size(); ++a) {
    cands[a] = table.attributes[a].kind == AttributeKind::numeric ? best_numeric(table, rows, a, base_h, min_leaf)
                                                                  : best_categorical(table, rows, a, base_h, min_leaf);
    if (cands[a].valid) {
      gain_sum += cands[a].gain;
      ++n_valid;
    }
  }
  SplitChoice out;
  if (n_valid == 0) return out;
  const double mean_gain = gain_sum / static_cast<double>(n_valid);
  for (std::size_t a = 0; a < cands.size(); ++a) {
    const auto& c = cands[a];
    if (!c.valid || c.gain < mean_gain - kEps) continue;
    if (out.attribute < 0 || c.ratio > out.gain_ratio + kEps)
      out = {static_cast<int>(a), c.threshold, c.gain, c.ratio};
  }
  return out;
}

DecisionTree build_unpruned_tree(const LabeledTable& table, const TreeConfig& config) {
  table.validate();
  if (config.min_leaf < 1) throw ConfigError("decision tree: min_leaf must be >= 1");
  DecisionTree tree = TreeBuilder(table, config).build();
  annotate_estimates(tree, 0, config.prune_cf);
  return tree;
}

DecisionTree build_tree(const LabeledTable& table, const TreeConfig& config) {
  DecisionTree tree = build_unpruned_tree(table, config);
  if (config.prune) {
    prune_node(tree, 0, config.prune_cf);
    compact(tree);
  }
  return tree;
}

std::size_t DecisionTree::leaf_count() const {
  std::size_t n = 0;
  std::function<void(int)> walk = [&](int id) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      ++n;
      return;
    }
    for (int c : node.children) walk(c);
  };
  if (!nodes.empty()) walk(0);
  return n;
}

int DecisionTree::depth() const {
  std::function<int(int)> walk = [&](int id) {
    const auto& node = nodes[static_cast<std::size_t>(id)];
    int d = 0;
    for (int c : node.children) d = std::max(d, 1 + walk(c));
    return d;
  };
  return nodes.empty() ? 0 : walk(0);
}

std::vector<std::string> DecisionTree::attributes_used() const {
  std::set<int> used;
  for (const auto& n : nodes)
    if (!n.is_leaf()) used.insert(n.attribute);
  std::vector<std::string> out;
  for (int a : used) out.push_back(attributes[static_cast<std::size_t>(a)].name);
  return out;
}

Classification classify(const DecisionTree& tree, std::span<const Value> record) {
  if (record.size() != tree.attributes.size())
    throw InputError("classify: record has " + std::to_string(record.size()) + " values, tree expects " +
                     std::to_string(tree.attributes.size()));
  Classification out;
  int id = 0;
  while (!tree.nodes[static_cast<std::size_t>(id)].is_leaf()) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    const auto& attr = tree.attributes[static_cast<std::size_t>(node.attribute)];
    const Value& v = record[static_cast<std::size_t>(node.attribute)];
    if (std::holds_alternative<std::monostate>(v)) {
      if (tree.config.missing == MissingPolicy::error)
        throw InputError("classify: missing value for attribute " + attr.name);
      out.flagged = true;
      id = node.majority_child;
      continue;
    }
    if (attr.kind == AttributeKind::numeric) {
      id = node.children[numeric_value(v, attr.name) <= node.threshold ? 0 : 1];
    } else {
      const auto& cat = category_value(v, attr.name);
      auto it = std::find(node.categories.begin(), node.categories.end(), cat);
      if (it == node.categories.end()) {
        out.flagged = true;
        id = node.majority_child;
      } else {
        id = node.children[static_cast<std::size_t>(it - node.categories.begin())];
      }
    }
  }
  out.label = tree.nodes[static_cast<std::size_t>(id)].label;
  return out;
}

bool ClassificationRule::matches(const std::vector<AttributeSpec>& attributes, std::span<const Value> record) const {
  for (const auto& c : antecedent) {
    auto it = std::find_if(attributes.begin(), attributes.end(), [&](const auto& a) { return a.name == c.attribute; });
    if (it == attributes.end()) return false;
    const Value& v = record[static_cast<std::size_t>(it - attributes.begin())];
    switch (c.op) {
      case RuleCondition::Op::le:
        if (!std::holds_alternative<double>(v) || !(std::get<double>(v) <= c.number)) return false;
        break;
      case RuleCondition::Op::gt:
        if (!std::holds_alternative<double>(v) || !(std::get<double>(v) > c.number)) return false;
        break;
      case RuleCondition::Op::eq:
        if (!std::holds_alternative<std::string>(v) || std::get<std::string>(v) != c.category) return false;
        break;
    }
  }
  return true;
}

std::vector<ClassificationRule> extract_rules(const DecisionTree& tree) {
  std::vector<ClassificationRule> out;
  std::vector<RuleCondition> path;
  std::function<void(int)> walk = [&](int id) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) {
      // Collapse to the tightest bounds, keeping first-appearance order.
      std::vector<RuleCondition> simplified;
      for (const auto& c : path) {
        auto it = std::find_if(simplified.begin(), simplified.end(), [&](const auto& s) {
          return s.attribute == c.attribute && s.op == c.op;
        });
        if (it == simplified.end()) {
          simplified.push_back(c);
        } else if (c.op == RuleCondition::Op::le) {
          it->number = std::min(it->number, c.number);
        } else if (c.op == RuleCondition::Op::gt) {
          it->number = std::max(it->number, c.number);
        }
      }
      ClassificationRule r;
      r.antecedent = std::move(simplified);
      r.consequent = node.label;
      r.coverage = node.n;
      r.confidence = node.n ? static_cast<double>(node.class_counts.at(node.label)) / static_cast<double>(node.n) : 0.0;
      out.push_back(std::move(r));
      return;
    }
    const auto& attr = tree.attributes[static_cast<std::size_t>(node.attribute)];
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      RuleCondition c;
      c.attribute = attr.name;
      if (attr.kind == AttributeKind::numeric) {
        c.op = i == 0 ? RuleCondition::Op::le : RuleCondition::Op::gt;
        c.number = node.threshold;
      } else {
        c.op = RuleCondition::Op::eq;
        c.category = node.categories[i];
      }
      path.push_back(c);
      walk(node.children[i]);
      path.pop_back();
    }
  };
  if (!tree.nodes.empty()) walk(0);
  return out;
}

std::string format_rule(const ClassificationRule& rule) {
  std::ostringstream os;
  os << "IF ";
  if (rule.antecedent.empty()) os << "TRUE";
  for (std::size_t i = 0; i < rule.antecedent.size(); ++i) {
    const auto& c = rule.antecedent[i];
    if (i) os << " AND ";
    os << c.attribute << ' ' << op_text(c.op) << ' '
       << (c.op == RuleCondition::Op::eq ? c.category : io::format_double(c.number));
  }
  char conf[32];
  std::snprintf(conf, sizeof conf, "%.2f", rule.confidence);
  os << " THEN " << rule.consequent << " (cov=" << rule.coverage << ", conf=" << conf << ")";
  return os.str();
}

std::vector<double> split_points(const DecisionTree& tree, std::string_view attribute) {
  auto it = std::find_if(tree.attributes.begin(), tree.attributes.end(),
                         [&](const auto& a) { return a.name == attribute; });
  if (it == tree.attributes.end()) throw InputError("split_points: tree has no attribute " + std::string(attribute));
  if (it->kind != AttributeKind::numeric)
    throw InputError("split_points: attribute " + std::string(attribute) + " is categorical");
  const int a = static_cast<int>(it - tree.attributes.begin());
  std::set<double> pts;
  std::function<void(int)> walk = [&](int id) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    if (node.is_leaf()) return;
    if (node.attribute == a) pts.insert(node.threshold);
    for (int c : node.children) walk(c);
  };
  if (!tree.nodes.empty()) walk(0);
  return {pts.begin(), pts.end()};
}

std::string tree_to_json(const DecisionTree& tree) {
  json attrs = json::array();
  for (const auto& a : tree.attributes)
    attrs.push_back({{"name", a.name}, {"kind", a.kind == AttributeKind::numeric ? "numeric" : "categorical"}});
  json nodes = json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    json j{{"id", i},
           {"label", n.label},
           {"n", n.n},
           {"class_counts", n.class_counts},
           {"training_errors", n.training_errors},
           {"estimated_errors", n.estimated_errors}};
    if (!n.is_leaf()) {
      const auto& a = tree.attributes[static_cast<std::size_t>(n.attribute)];
      j["attribute"] = a.name;
      if (a.kind == AttributeKind::numeric)
        j["threshold"] = n.threshold;
      else
        j["categories"] = n.categories;
      j["children"] = n.children;
    }
    nodes.push_back(j);
  }
  json doc{{"format", "nof-tree/1"},
           {"n_training", tree.n_training},
           {"config",
            {{"min_leaf", tree.config.min_leaf},
             {"max_depth", tree.config.max_depth},
             {"prune", tree.config.prune},
             {"prune_cf", tree.config.prune_cf}}},
           {"attributes", attrs},
           {"nodes", nodes}};
  return doc.dump(1) + "\n";
}

std::string rules_to_json(const std::vector<ClassificationRule>& rules) {
  json arr = json::array();
  for (const auto& r : rules) {
    json conds = json::array();
    for (const auto& c : r.antecedent) {
      json cj{{"attribute", c.attribute}, {"op", op_text(c.op)}};
      if (c.op == RuleCondition::Op::eq)
        cj["value"] = c.category;
      else
        cj["value"] = c.number;
      conds.push_back(cj);
    }
    arr.push_back({{"if", conds},
                   {"then", r.consequent},
                   {"coverage", r.coverage},
                   {"confidence", r.confidence},
                   {"text", format_rule(r)}});
  }
  return json{{"format", "nof-classification-rules/1"}, {"rules", arr}}.dump(1) + "\n";
}

}  // namespace nof
