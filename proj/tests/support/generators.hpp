#pragma once

// Seeded random instances shared by the unit tests and the acceptance suite.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "nof/classification.hpp"
#include "nof/ontology.hpp"
#include "nof/rulemining.hpp"
#include "oracles.hpp"

namespace gen {

/// Unit-variance Laplace rows.
inline Eigen::MatrixXd laplace_sources(Eigen::Index k, Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  std::bernoulli_distribution sign(0.5);
  Eigen::MatrixXd s(k, n);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = (sign(rng) ? 1.0 : -1.0) * ex(rng) / std::sqrt(2.0);
  return s;
}

inline Eigen::MatrixXd gaussian(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline std::vector<double> to_vec(const Eigen::RowVectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<int> truth;
};

/// Unit-variance blobs centred at (0,0) and (10,10), `per` rows each.
inline Blobs two_blobs(std::uint64_t seed, int per = 100) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Blobs b;
  b.x.resize(2 * per, 2);
  for (int i = 0; i < 2 * per; ++i) {
    const double c = i < per ? 0.0 : 10.0;
    b.x(i, 0) = c + g(rng);
    b.x(i, 1) = c + g(rng);
    b.truth.push_back(i < per ? 0 : 1);
  }
  return b;
}

inline Eigen::MatrixXd random_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng) * (1.0 + j) + (i % 3) * 2.0;
  return x;
}

inline Eigen::MatrixXd line(std::initializer_list<double> v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), 1);
  Eigen::Index i = 0;
  for (double d : v) x(i++, 0) = d;
  return x;
}

/// 1 to 14 points in the plane with anisotropic spread.
inline Eigen::MatrixXd random_points(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 14);
  std::normal_distribution<double> g;
  const int n = size(rng);
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = g(rng) + 4.0 * (i % 3);
    x(i, 1) = g(rng) * 10.0;
  }
  return x;
}

struct TreeCase {
  nof::LabeledTable table;
  std::vector<oracle::Column> columns;
};

/// Up to 8 rows with coarse numeric values (ties) and small category sets.
inline TreeCase random_tree_case(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> rows(2, 8), attrs(1, 3), coin(0, 1), small(0, 4), cls(0, 2);
  TreeCase c;
  const int n = rows(rng);
  const int a = attrs(rng);
  for (int j = 0; j < a; ++j) {
    const bool cat = coin(rng) == 1 && j > 0;
    c.table.attributes.push_back(
        {"a" + std::to_string(j), cat ? nof::AttributeKind::categorical : nof::AttributeKind::numeric});
    c.columns.emplace_back();
  }
  c.table.rows.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < a; ++j) {
      auto& col = c.columns[static_cast<std::size_t>(j)];
      if (c.table.attributes[static_cast<std::size_t>(j)].kind == nof::AttributeKind::categorical) {
        const std::string v(1, static_cast<char>('p' + small(rng) % 3));
        col.categorical.push_back(v);
        c.table.rows[static_cast<std::size_t>(i)].push_back(v);
      } else {
        const double v = small(rng) * 1.5;
        col.numeric.push_back(v);
        c.table.rows[static_cast<std::size_t>(i)].push_back(v);
      }
    }
    c.table.labels.push_back(std::string(1, static_cast<char>('A' + cls(rng))));
  }
  return c;
}

inline std::vector<std::size_t> all_rows(const nof::LabeledTable& t) {
  std::vector<std::size_t> r(t.rows.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
  return r;
}

struct MiningInstance {
  nof::TransactionSet tx;
  std::vector<oracle::Bitset> masks;
  int n_items = 0;
};

/// Bit i of a mask is the item whose dictionary id is i.
inline MiningInstance random_mining_instance(std::uint64_t seed, int max_items, int max_rows) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> items(3, max_items), rows(1, max_rows);
  std::uniform_real_distribution<double> u(0, 1);
  MiningInstance r;
  r.n_items = items(rng);
  const int n = rows(rng);
  std::vector<double> p(static_cast<std::size_t>(r.n_items));
  for (auto& x : p) x = 0.15 + 0.7 * u(rng);
  std::vector<nof::Itemset> sets;
  for (int t = 0; t < n; ++t) {
    nof::Itemset s;
    for (int i = 0; i < r.n_items; ++i)
      if (u(rng) < p[static_cast<std::size_t>(i)])
        s.push_back(nof::Item::category("I" + std::string(1, static_cast<char>('a' + i)), "1"));
    sets.push_back(nof::canonical(s));
  }
  r.tx = nof::make_transactions(sets);
  for (const auto& row : r.tx.rows) {
    oracle::Bitset m = 0;
    for (int id : row) m |= oracle::Bitset{1} << id;
    r.masks.push_back(m);
  }
  r.n_items = static_cast<int>(r.tx.dictionary.size());
  return r;
}

/// Frequent itemsets keyed by mask; `duplicates` counts repeated masks.
inline std::map<oracle::Bitset, std::size_t> as_masks(const std::vector<nof::FrequentItemset>& f,
                                                      std::size_t* duplicates = nullptr) {
  std::map<oracle::Bitset, std::size_t> out;
  for (const auto& s : f) {
    oracle::Bitset m = 0;
    for (int id : s.items) m |= oracle::Bitset{1} << id;
    if (out.count(m) && duplicates) ++*duplicates;
    out[m] = s.count;
  }
  return out;
}

inline bool downward_closed(const std::map<oracle::Bitset, std::size_t>& sets, int n_items) {
  for (const auto& [m, c] : sets)
    for (int b = 0; b < n_items; ++b) {
      const oracle::Bitset sub = m & ~(oracle::Bitset{1} << b);
      if ((m >> b & 1) && sub && (!sets.count(sub) || sets.at(sub) < c)) return false;
    }
  return true;
}

inline nof::AssociationRule mined_rule(const std::string& antecedent, const std::string& consequent, double supp,
                                       double conf, double rel) {
  nof::AssociationRule r;
  r.antecedent = nof::parse_itemset(antecedent);
  r.consequent = nof::parse_itemset(consequent);
  r.support = supp;
  r.confidence = conf;
  r.reliability = rel;
  return r;
}

inline nof::ExpertRule expert_rule(const std::string& id, const std::string& antecedent,
                                   const std::string& consequent, bool negated = false) {
  return {id, nof::parse_itemset(antecedent), nof::parse_itemset(consequent), negated};
}

/// Mined and expert rules over categorical items; consequents are CLUSTER labels.
struct Universe {
  std::vector<oracle::SymRule> mined_sym, expert_sym;
  std::vector<nof::AssociationRule> mined;
  nof::OntologyRuleBase base;
};

inline oracle::SymRule random_sym(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> attrs(1, 2), attr(0, 3), val(0, 1), cls(0, 2);
  oracle::SymRule s;
  const int k = attrs(rng);
  std::set<int> used;
  while (static_cast<int>(used.size()) < k) used.insert(attr(rng));
  for (int a : used) s.antecedent.insert("A" + std::to_string(a) + "=v" + std::to_string(val(rng)));
  s.consequent = "CLUSTER=P" + std::to_string(cls(rng));
  return s;
}

inline std::string sym_antecedent(const oracle::SymRule& s) {
  std::string out;
  for (const auto& i : s.antecedent) out += (out.empty() ? "" : "&") + i;
  return out;
}

/// At most 10 expert and 20 mined rules; expert ids are E1..En in order.
inline Universe random_universe(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(0, 10);
  std::uniform_real_distribution<double> u(0, 1);
  std::bernoulli_distribution coin(0.5), rare(0.2);
  Universe w;
  w.base.extra_attributes = {"A0", "A1", "A2", "A3"};
  w.base.thresholds = {0.05 + 0.4 * u(rng), 0.3 + 0.6 * u(rng), u(rng)};
  std::set<std::pair<std::string, std::string>> seen_expert;
  const int n_expert = count(rng);
  for (int e = 0; e < n_expert; ++e) {
    auto s = random_sym(rng);
    s.negated = rare(rng);
    if (!seen_expert.insert({sym_antecedent(s), (s.negated ? "!" : "") + s.consequent}).second) continue;
    w.expert_sym.push_back(s);
    w.base.rules.push_back(
        expert_rule("E" + std::to_string(w.expert_sym.size()), sym_antecedent(s), s.consequent, s.negated));
  }
  std::set<std::string> seen_mined;
  const int n_mined = count(rng) + count(rng);
  for (int m = 0; m < n_mined; ++m) {
    oracle::SymRule s = !w.expert_sym.empty() && coin(rng)
                            ? w.expert_sym[static_cast<std::size_t>(rng() % w.expert_sym.size())]
                            : random_sym(rng);
    s.negated = false;
    const auto key = sym_antecedent(s) + "->" + s.consequent;
    if (!seen_mined.insert(key).second) continue;
    s.support = u(rng);
    s.confidence = u(rng);
    s.reliability = u(rng);
    if (coin(rng)) s.support = w.base.thresholds.beta_sup;  // boundary values are included
    w.mined_sym.push_back(s);
    w.mined.push_back(mined_rule(sym_antecedent(s), s.consequent, s.support, s.confidence, s.reliability));
  }
  return w;
}

/// Indices into `mined` of the rules listed in `entries`.
inline std::set<int> indices(const std::vector<nof::ReportEntry>& entries,
                             const std::vector<nof::AssociationRule>& mined) {
  std::set<int> out;
  for (const auto& e : entries)
    for (std::size_t i = 0; i < mined.size(); ++i)
      if (mined[i].text() == e.rule.text()) out.insert(static_cast<int>(i));
  return out;
}

inline std::set<int> indices(const std::vector<nof::AssociationRule>& rules,
                             const std::vector<nof::AssociationRule>& mined) {
  std::set<int> out;
  for (const auto& r : rules)
    for (std::size_t i = 0; i < mined.size(); ++i)
      if (mined[i].text() == r.text()) out.insert(static_cast<int>(i));
  return out;
}

/// Expert ids E<k> map back to index k-1.
inline std::set<int> missing_indices(const std::vector<nof::ExpertRule>& missing) {
  std::set<int> out;
  for (const auto& e : missing) out.insert(std::stoi(e.id.substr(1)) - 1);
  return out;
}

inline bool same_as_brute_force(const Universe& w, const nof::PartitionReport& rep) {
  const auto& th = w.base.thresholds;
  const auto want = oracle::brute_force_partition(w.mined_sym, w.expert_sym, th.beta_sup, th.beta_conf, th.pi_min);
  return indices(rep.arec, w.mined) == want.arec && indices(rep.novel_histr, w.mined) == want.novel &&
         indices(rep.known_histr, w.mined) == want.known_hi && indices(rep.known_lwstr, w.mined) == want.known_lo &&
         indices(rep.contr, w.mined) == want.contr && indices(rep.residue, w.mined) == want.residue &&
         missing_indices(rep.missing) == want.missing;
}

}  // namespace gen
