#include "nof/rulemining.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

namespace {

constexpr std::string_view kElementOf = "∈";
constexpr std::string_view kLessEq = "≤";
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string bound_text(double v) {
  if (v == kInf) return "+∞";
  if (v == -kInf) return "-∞";
  return io::format_double(v);
}

Item parse_interval_body(std::string attribute, std::string_view body) {
  const std::string b = io::trim(body);
  if (b.size() < 5 || b.front() != '(' || (b.back() != ']' && b.back() != ')'))
    throw InputError("malformed interval '" + b + "'");
  const auto parts = io::split(std::string_view(b).substr(1, b.size() - 2), ',');
  if (parts.size() != 2) throw InputError("malformed interval '" + b + "'");
  const double lo = io::parse_double(parts[0]);
  const double hi = io::parse_double(parts[1]);
  if (b.back() == ')' && hi != kInf) throw InputError("interval '" + b + "' must be closed on a finite upper bound");
  return Item::interval(std::move(attribute), lo, hi);
}

std::size_t min_count(double beta_sup, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(beta_sup * static_cast<double>(n) - 1e-9));
}

std::size_t count_containing(const TransactionSet& t, const std::vector<int>& items) {
  std::size_t c = 0;
  for (const auto& row : t.rows)
    if (std::includes(row.begin(), row.end(), items.begin(), items.end())) ++c;
  return c;
}

std::vector<int> ids_of(const TransactionSet& t, const Itemset& items) {
  std::vector<int> ids;
  for (const auto& it : items) {
    const int id = t.id_of(it);
    if (id < 0) throw InputError("item " + it.text() + " is not in the transaction dictionary");
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

Item Item::category(std::string attribute, std::string value) {
  Item it;
  it.attribute = std::move(attribute);
  it.kind = Kind::category;
  it.value = std::move(value);
  return it;
}

Item Item::interval(std::string attribute, double lo, double hi) {
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi) || lo == kInf || hi == -kInf)
    throw InputError("empty interval for " + attribute);
  Item it;
  it.attribute = std::move(attribute);
  it.kind = Kind::interval;
  it.lo = lo;
  it.hi = hi;
  return it;
}

std::string Item::text() const {
  if (kind == Kind::category) return attribute + "=" + value;
  return attribute + std::string(kElementOf) + "(" + bound_text(lo) + "," + bound_text(hi) + (hi == kInf ? ")" : "]");
}

Item Item::parse(std::string_view raw) {
  const std::string text = io::trim(raw);
  struct Op {
    std::string_view token;
    int kind;  // 0 interval, 1 le, 2 gt, 3 eq
  };
  static constexpr Op ops[] = {{kElementOf, 0}, {" in ", 0}, {"<=", 1}, {kLessEq, 1}, {">", 2}, {"=", 3}};
  std::size_t best_pos = std::string::npos;
  const Op* best = nullptr;
  for (const auto& op : ops) {
    const auto pos = text.find(op.token);
    if (pos != std::string::npos && (pos < best_pos || (pos == best_pos && op.token.size() > best->token.size()))) {
      best_pos = pos;
      best = &op;
    }
  }
  if (!best || best_pos == 0) throw InputError("cannot parse item '" + text + "'");
  std::string attribute = io::trim(std::string_view(text).substr(0, best_pos));
  const std::string_view rest = std::string_view(text).substr(best_pos + best->token.size());
  if (attribute.empty()) throw InputError("cannot parse item '" + text + "'");
  switch (best->kind) {
    case 0: return parse_interval_body(std::move(attribute), rest);
    case 1: return interval(std::move(attribute), -kInf, io::parse_double(rest));
    case 2: return interval(std::move(attribute), io::parse_double(rest), kInf);
    default: {
      std::string value = io::trim(rest);
      if (value.empty()) throw InputError("item '" + text + "' has no value");
      return category(std::move(attribute), std::move(value));
    }
  }
}

std::string itemset_text(const Itemset& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '&';
    out += items[i].text();
  }
  return out;
}

Itemset canonical(Itemset items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

Itemset parse_itemset(std::string_view text) {
  Itemset out;
  if (io::trim(text).empty()) return out;
  for (const auto& part : io::split(text, '&')) out.push_back(Item::parse(part));
  return canonical(std::move(out));
}

int TransactionSet::id_of(const Item& item) const {
  auto it = std::lower_bound(dictionary.begin(), dictionary.end(), item);
  if (it == dictionary.end() || !(*it == item)) return -1;
  return static_cast<int>(it - dictionary.begin());
}

Itemset TransactionSet::items_of(const std::vector<int>& ids) const {
  Itemset out;
  for (int id : ids) out.push_back(dictionary.at(static_cast<std::size_t>(id)));
  return out;
}

TransactionSet make_transactions(const std::vector<Itemset>& rows) {
  TransactionSet t;
  std::set<Item> all;
  for (const auto& r : rows) all.insert(r.begin(), r.end());
  t.dictionary.assign(all.begin(), all.end());
  for (const auto& r : rows) {
    std::vector<int> ids;
    for (const auto& it : r) ids.push_back(t.id_of(it));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    t.rows.push_back(std::move(ids));
  }
  return t;
}

TransactionSet discretize(const std::vector<FactorSummary>& rows, const SplitPointMap& split_points,
                          const std::vector<std::string>& labels, std::string_view label_attribute) {
  if (!labels.empty() && labels.size() != rows.size())
    throw InputError("discretize: label count does not match row count");
  for (const auto& [attr, points] : split_points) {
    if (std::find(kSummaryColumns.begin(), kSummaryColumns.end(), attr) == kSummaryColumns.end())
      throw InputError("discretize: split points for unknown attribute " + attr);
    if (!is_numeric_attribute(attr)) throw InputError("discretize: split points for categorical attribute " + attr);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!std::isfinite(points[i])) throw InputError("discretize: non-finite split point for " + attr);
      if (i && !(points[i - 1] < points[i]))
        throw InputError("discretize: split points for " + attr + " are not strictly ascending");
    }
  }
  std::vector<Itemset> out;
  out.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Itemset items;
    for (auto col : kSummaryColumns) {
      const std::string attr(col);
      if (!is_numeric_attribute(col)) {
        items.push_back(Item::category(attr, attribute_text(rows[r], col)));
        continue;
      }
      auto sp = split_points.find(col);
      if (sp == split_points.end() || sp->second.empty()) {
        items.push_back(Item::category(attr, "ANY"));
        continue;
      }
      const auto& s = sp->second;
      const double v = attribute_number(rows[r], col);
      const auto idx = static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), v) - s.begin());
      const double lo = idx == 0 ? -kInf : s[idx - 1];
      const double hi = idx == s.size() ? kInf : s[idx];
      items.push_back(Item::interval(attr, lo, hi));
    }
    if (!labels.empty()) items.push_back(Item::category(std::string(label_attribute), labels[r]));
    out.push_back(canonical(std::move(items)));
  }
  return make_transactions(out);
}

TransactionSet drop_catch_all(const TransactionSet& transactions) {
  std::vector<Itemset> rows;
  for (const auto& r : transactions.rows) {
    Itemset items;
    for (int id : r) {
      const auto& it = transactions.dictionary[static_cast<std::size_t>(id)];
      if (!it.is_catch_all()) items.push_back(it);
    }
    rows.push_back(std::move(items));
  }
  return make_transactions(rows);
}

std::vector<FrequentItemset> apriori(const TransactionSet& transactions, double beta_sup,
                                     const AprioriOptions& options) {
  if (!(beta_sup > 0.0 && beta_sup <= 1.0)) throw ConfigError("beta_sup must be in (0, 1]");
  if (transactions.rows.empty()) throw InputError("apriori: no transactions");
  const std::size_t n = transactions.size();
  const std::size_t need = std::max<std::size_t>(1, min_count(beta_sup, n));
  const auto support = [n](std::size_t c) { return static_cast<double>(c) / static_cast<double>(n); };

  std::vector<FrequentItemset> out;
  std::vector<std::size_t> singles(transactions.dictionary.size(), 0);
  for (const auto& row : transactions.rows)
    for (int id : row) ++singles[static_cast<std::size_t>(id)];
  std::vector<std::vector<int>> level;
  for (std::size_t id = 0; id < singles.size(); ++id)
    if (singles[id] >= need) {
      level.push_back({static_cast<int>(id)});
      out.push_back({{static_cast<int>(id)}, singles[id], support(singles[id])});
    }

  for (std::size_t k = 2; !level.empty() && (options.max_length == 0 || k <= options.max_length); ++k) {
    const std::set<std::vector<int>> previous(level.begin(), level.end());
    std::vector<std::vector<int>> candidates;
    for (std::size_t i = 0; i < level.size(); ++i) {
      for (std::size_t j = i + 1; j < level.size(); ++j) {
        if (!std::equal(level[i].begin(), level[i].end() - 1, level[j].begin())) break;
        std::vector<int> cand = level[i];
        cand.push_back(level[j].back());
        bool closed = true;
        for (std::size_t drop = 0; drop + 2 < cand.size() && closed; ++drop) {
          std::vector<int> sub;
          for (std::size_t m = 0; m < cand.size(); ++m)
            if (m != drop) sub.push_back(cand[m]);
          closed = previous.count(sub) > 0;
        }
        if (closed) candidates.push_back(std::move(cand));
      }
    }
    level.clear();
    for (auto& cand : candidates) {
      const std::size_t c = count_containing(transactions, cand);
      if (c >= need) {
        out.push_back({cand, c, support(c)});
        level.push_back(std::move(cand));
      }
    }
  }
  return out;
}

std::string AssociationRule::text() const { return itemset_text(antecedent) + " -> " + itemset_text(consequent); }

double reliability(double confidence, double consequent_support) { return std::abs(confidence - consequent_support); }

double reliability(const AssociationRule& rule, const TransactionSet& transactions) {
  if (transactions.rows.empty()) throw InputError("reliability: no transactions");
  const auto a = ids_of(transactions, rule.antecedent);
  const auto c = ids_of(transactions, rule.consequent);
  std::vector<int> ac;
  std::set_union(a.begin(), a.end(), c.begin(), c.end(), std::back_inserter(ac));
  const std::size_t na = count_containing(transactions, a);
  if (na == 0) throw InputError("reliability: antecedent " + itemset_text(rule.antecedent) + " never occurs");
  const double conf = static_cast<double>(count_containing(transactions, ac)) / static_cast<double>(na);
  return reliability(conf, static_cast<double>(count_containing(transactions, c)) /
                               static_cast<double>(transactions.size()));
}

std::vector<AssociationRule> generate_rules(const std::vector<FrequentItemset>& itemsets, double beta_conf,
                                            const TransactionSet& transactions, const RuleOptions& options) {
  if (!(beta_conf > 0.0 && beta_conf <= 1.0)) throw ConfigError("beta_conf must be in (0, 1]");
  const std::size_t n = transactions.size();
  if (n == 0) throw InputError("generate_rules: no transactions");
  std::map<std::vector<int>, std::size_t> counts;
  for (const auto& f : itemsets) counts[f.items] = f.count;
  const auto count_of = [&](const std::vector<int>& ids) {
    auto it = counts.find(ids);
    if (it != counts.end()) return it->second;
    const auto c = count_containing(transactions, ids);
    counts[ids] = c;
    return c;
  };
  const auto allowed = [&](const std::vector<int>& ids) {
    if (options.consequent_attributes.empty()) return true;
    for (int id : ids) {
      const auto& attr = transactions.dictionary[static_cast<std::size_t>(id)].attribute;
      if (std::find(options.consequent_attributes.begin(), options.consequent_attributes.end(), attr) ==
          options.consequent_attributes.end())
        return false;
    }
    return true;
  };

  std::vector<AssociationRule> out;
  for (const auto& f : itemsets) {
    const std::size_t m = f.items.size();
    if (m < 2) continue;
    if (m > 20) throw ConfigError("generate_rules: itemset too long for rule enumeration");
    for (std::uint32_t mask = 1; mask + 1 < (1u << m); ++mask) {
      std::vector<int> a, c;
      for (std::size_t b = 0; b < m; ++b) ((mask >> b) & 1u ? c : a).push_back(f.items[b]);
      if (options.single_item_consequent && c.size() != 1) continue;
      if (!allowed(c)) continue;
      const std::size_t na = count_of(a);
      if (na == 0) continue;
      const double conf = static_cast<double>(f.count) / static_cast<double>(na);
      if (conf < beta_conf - 1e-12) continue;
      AssociationRule r;
      r.antecedent = transactions.items_of(a);
      r.consequent = transactions.items_of(c);
      r.support = static_cast<double>(f.count) / static_cast<double>(n);
      r.confidence = conf;
      r.reliability = reliability(conf, static_cast<double>(count_of(c)) / static_cast<double>(n));
      out.push_back(std::move(r));
    }
  }
  sort_rules(out);
  return out;
}

void sort_rules(std::vector<AssociationRule>& rules) {
  std::stable_sort(rules.begin(), rules.end(), [](const AssociationRule& x, const AssociationRule& y) {
    const auto xa = itemset_text(x.antecedent), ya = itemset_text(y.antecedent);
    if (xa != ya) return xa < ya;
    return itemset_text(x.consequent) < itemset_text(y.consequent);
  });
}

std::string rules_to_csv(const std::vector<AssociationRule>& rules) {
  std::string out = "antecedent;consequent;support;confidence;reliability\n";
  for (const auto& r : rules) {
    out += itemset_text(r.antecedent) + ";" + itemset_text(r.consequent) + ";" + io::format_double(r.support) + ";" +
           io::format_double(r.confidence) + ";" + io::format_double(r.reliability) + "\n";
  }
  return out;
}

std::vector<AssociationRule> rules_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::vector<AssociationRule> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line != "antecedent;consequent;support;confidence;reliability")
        throw ParseError("expected rules header 'antecedent;consequent;support;confidence;reliability'", line_no);
      header = true;
      continue;
    }
    if (io::trim(line).empty()) continue;
    const auto f = io::split(line, ';');
    if (f.size() != 5) throw ParseError("expected 5 fields, found " + std::to_string(f.size()), line_no);
    try {
      AssociationRule r;
      r.antecedent = parse_itemset(f[0]);
      r.consequent = parse_itemset(f[1]);
      if (r.consequent.empty()) throw InputError("empty consequent");
      r.support = io::parse_double(f[2]);
      r.confidence = io::parse_double(f[3]);
      r.reliability = io::parse_double(f[4]);
      out.push_back(std::move(r));
    } catch (const ParseError&) {
      throw;
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!header) throw ParseError("empty rules file", 0);
  return out;
}

std::string itemsets_to_csv(const std::vector<FrequentItemset>& itemsets, const TransactionSet& transactions) {
  std::string out = "itemset;count;support\n";
  for (const auto& f : itemsets)
    out += itemset_text(transactions.items_of(f.items)) + ";" + std::to_string(f.count) + ";" +
           io::format_double(f.support) + "\n";
  return out;
}

std::string transactions_to_csv(const TransactionSet& transactions) {
  std::string out = "transaction\n";
  for (const auto& r : transactions.rows) out += itemset_text(transactions.items_of(r)) + "\n";
  return out;
}

}  // namespace nof
