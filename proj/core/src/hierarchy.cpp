#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include <json.hpp>

#include "nof/clustering.hpp"
#include "nof/error.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

double sse(const Eigen::MatrixXd& x, const std::vector<std::size_t>& members) {
  if (members.empty()) return 0.0;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
  for (auto i : members) mean += x.row(static_cast<Eigen::Index>(i));
  mean /= static_cast<double>(members.size());
  double s = 0.0;
  for (auto i : members) s += (x.row(static_cast<Eigen::Index>(i)) - mean).squaredNorm();
  return s;
}

struct TwoWaySplit {
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  double sse = std::numeric_limits<double>::infinity();
};

TwoWaySplit kmeans_split(const Eigen::MatrixXd& x, const std::vector<std::size_t>& members, int n_init,
                         std::mt19937_64& rng) {
  TwoWaySplit best;
  const std::size_t n = members.size();
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  for (int init = 0; init < n_init; ++init) {
    std::size_t i0 = pick(rng);
    std::size_t i1 = pick(rng);
    for (int guard = 0; i1 == i0 && guard < 16; ++guard) i1 = pick(rng);
    if (i1 == i0) i1 = (i0 + 1) % n;
    Eigen::RowVectorXd c0 = x.row(static_cast<Eigen::Index>(members[i0]));
    Eigen::RowVectorXd c1 = x.row(static_cast<Eigen::Index>(members[i1]));
    std::vector<int> side(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t m = 0; m < n; ++m) {
        auto row = x.row(static_cast<Eigen::Index>(members[m]));
        const int s = (row - c1).squaredNorm() < (row - c0).squaredNorm() ? 1 : 0;
        if (s != side[m]) {
          side[m] = s;
          changed = true;
        }
      }
      if (!changed) break;
      Eigen::RowVectorXd s0 = Eigen::RowVectorXd::Zero(x.cols());
      Eigen::RowVectorXd s1 = Eigen::RowVectorXd::Zero(x.cols());
      std::size_t n0 = 0, n1 = 0;
      for (std::size_t m = 0; m < n; ++m) {
        if (side[m] == 0) {
          s0 += x.row(static_cast<Eigen::Index>(members[m]));
          ++n0;
        } else {
          s1 += x.row(static_cast<Eigen::Index>(members[m]));
          ++n1;
        }
      }
      if (n0 == 0 || n1 == 0) break;
      c0 = s0 / static_cast<double>(n0);
      c1 = s1 / static_cast<double>(n1);
    }
    TwoWaySplit cand;
    for (std::size_t m = 0; m < n; ++m) (side[m] == 0 ? cand.a : cand.b).push_back(members[m]);
    if (cand.a.empty() || cand.b.empty()) continue;
    cand.sse = sse(x, cand.a) + sse(x, cand.b);
    if (cand.sse < best.sse) best = std::move(cand);
  }
  return best;
}

TwoWaySplit em_split(const Eigen::MatrixXd& x, const std::vector<std::size_t>& members, std::uint64_t seed,
                     int n_init) {
  TwoWaySplit out;
  Eigen::MatrixXd sub(static_cast<Eigen::Index>(members.size()), x.cols());
  for (std::size_t m = 0; m < members.size(); ++m) sub.row(static_cast<Eigen::Index>(m)) = x.row(static_cast<Eigen::Index>(members[m]));
  EmConfig cfg;
  cfg.seed = seed;
  cfg.n_restarts = std::max(1, n_init);
  cfg.cov_floor = 1e-3;
  ClusterModel model = em_fit(sub, 2, cfg);
  for (std::size_t m = 0; m < members.size(); ++m) (model.assignments[m] == 0 ? out.a : out.b).push_back(members[m]);
  if (out.a.empty() || out.b.empty()) return out;
  out.sse = sse(x, out.a) + sse(x, out.b);
  return out;
}

void assign_leaf_labels(Taxonomy& t) {
  auto leaves = t.leaves();
  std::sort(leaves.begin(), leaves.end(), [&](int a, int b) {
    return t.nodes[static_cast<std::size_t>(a)].members.front() < t.nodes[static_cast<std::size_t>(b)].members.front();
  });
  for (std::size_t i = 0; i < leaves.size(); ++i)
    t.nodes[static_cast<std::size_t>(leaves[i])].label = "C" + std::to_string(i + 1);
}

}  // namespace

std::vector<int> Taxonomy::leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_leaf()) out.push_back(static_cast<int>(i));
  return out;
}

void Taxonomy::validate() const {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes.size()) throw Error("taxonomy: invalid root");
  const std::size_t n = n_observations();
  std::vector<int> seen(n, 0);
  for (const auto& node : nodes) {
    if (node.is_leaf()) {
      for (auto m : node.members) {
        if (m >= n) throw Error("taxonomy: member index out of range");
        ++seen[m];
      }
      continue;
    }
    const auto& l = nodes[static_cast<std::size_t>(node.left)];
    const auto& r = nodes[static_cast<std::size_t>(node.right)];
    std::vector<std::size_t> merged;
    std::merge(l.members.begin(), l.members.end(), r.members.begin(), r.members.end(), std::back_inserter(merged));
    if (merged != node.members) throw Error("taxonomy: children do not partition their parent");
    if (l.height > node.height || r.height > node.height) throw Error("taxonomy: heights not monotone");
  }
  for (auto c : seen)
    if (c != 1) throw Error("taxonomy: leaves do not partition the observations");
}

Taxonomy divisive_hierarchy(const Eigen::MatrixXd& x_in, const DivisiveConfig& config) {
  if (x_in.rows() < 1) throw InputError("divisive_hierarchy: no observations");
  if (config.min_leaf < 1) throw ConfigError("divisive_hierarchy: min_leaf must be >= 1");
  const Eigen::MatrixXd x = config.standardize ? zscore_columns(x_in) : x_in;

  Taxonomy t;
  t.kind = HierarchyKind::divisive;
  std::mt19937_64 rng(config.seed);

  TaxonomyNode root;
  for (Eigen::Index i = 0; i < x.rows(); ++i) root.members.push_back(static_cast<std::size_t>(i));
  t.nodes.push_back(root);
  t.root = 0;

  std::function<void(int, int)> grow = [&](int id, int depth) {
    auto members = t.nodes[static_cast<std::size_t>(id)].members;
    const double parent_sse = sse(x, members);
    auto leaf = [&] { t.nodes[static_cast<std::size_t>(id)].height = 0.0; };
    if (depth >= config.max_depth || members.size() < 2 * config.min_leaf || parent_sse <= 0.0) return leaf();

    TwoWaySplit split = config.method == SplitMethod::kmeans ? kmeans_split(x, members, config.n_init, rng)
                                                             : em_split(x, members, rng(), config.n_init);
    if (split.a.empty() || split.b.empty() || split.a.size() < config.min_leaf || split.b.size() < config.min_leaf)
      return leaf();
    if ((parent_sse - split.sse) < config.min_sse_reduction * parent_sse) return leaf();

    std::sort(split.a.begin(), split.a.end());
    std::sort(split.b.begin(), split.b.end());
    if (split.b.front() < split.a.front()) std::swap(split.a, split.b);

    const int left = static_cast<int>(t.nodes.size());
    t.nodes.push_back(TaxonomyNode{split.a, 0.0, -1, -1, id, {}});
    const int right = static_cast<int>(t.nodes.size());
    t.nodes.push_back(TaxonomyNode{split.b, 0.0, -1, -1, id, {}});
    auto& node = t.nodes[static_cast<std::size_t>(id)];
    node.left = left;
    node.right = right;
    node.height = parent_sse;
    grow(left, depth + 1);
    grow(right, depth + 1);
  };
  grow(0, 0);
  assign_leaf_labels(t);
  return t;
}

Linkage parse_linkage(std::string_view name) {
  if (name == "single") return Linkage::single;
  if (name == "complete") return Linkage::complete;
  if (name == "average") return Linkage::average;
  throw ConfigError("unknown linkage '" + std::string(name) + "' (expected single, complete or average)");
}

std::string_view linkage_name(Linkage linkage) {
  switch (linkage) {
    case Linkage::single: return "single";
    case Linkage::complete: return "complete";
    case Linkage::average: return "average";
  }
  return "?";
}

Taxonomy agglomerative_hierarchy(const Eigen::MatrixXd& x, Linkage linkage) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 1) throw InputError("agglomerative_hierarchy: no observations");

  Taxonomy t;
  t.kind = HierarchyKind::agglomerative;
  for (std::size_t i = 0; i < n; ++i) t.nodes.push_back(TaxonomyNode{{i}, 0.0, -1, -1, -1, {}});

  // Distances between active clusters, keyed by node id; Lance-Williams updates.
  std::vector<int> active;
  for (std::size_t i = 0; i < n; ++i) active.push_back(static_cast<int>(i));
  // Node ids run to 2n - 2; the table is symmetric.
  const auto n_ids = static_cast<Eigen::Index>(2 * n - 1);
  Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n_ids, n_ids);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
      dist(a, b) = dist(b, a) = (x.row(a) - x.row(b)).norm();
    }
  auto d = [&](int a, int b) { return dist(a, b); };

  while (active.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    int ba = -1, bb = -1;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double v = d(active[i], active[j]);
        if (v < best) {
          best = v;
          ba = active[i];
          bb = active[j];
        }
      }
    const auto& na = t.nodes[static_cast<std::size_t>(ba)];
    const auto& nb = t.nodes[static_cast<std::size_t>(bb)];
    TaxonomyNode merged;
    std::merge(na.members.begin(), na.members.end(), nb.members.begin(), nb.members.end(),
               std::back_inserter(merged.members));
    merged.height = std::max({best, na.height, nb.height});
    merged.left = na.members.front() < nb.members.front() ? ba : bb;
    merged.right = merged.left == ba ? bb : ba;
    const int id = static_cast<int>(t.nodes.size());
    const double size_a = static_cast<double>(na.members.size());
    const double size_b = static_cast<double>(nb.members.size());
    t.nodes.push_back(std::move(merged));
    t.nodes[static_cast<std::size_t>(ba)].parent = id;
    t.nodes[static_cast<std::size_t>(bb)].parent = id;

    std::erase(active, ba);
    std::erase(active, bb);
    for (int other : active) {
      const double da = d(ba, other);
      const double db = d(bb, other);
      double v = 0.0;
      switch (linkage) {
        case Linkage::single: v = std::min(da, db); break;
        case Linkage::complete: v = std::max(da, db); break;
        case Linkage::average: v = (size_a * da + size_b * db) / (size_a + size_b); break;
      }
      dist(other, id) = dist(id, other) = v;
    }
    active.push_back(id);
  }
  t.root = active.front();
  assign_leaf_labels(t);
  return t;
}

std::string taxonomy_to_json(const Taxonomy& t) {
  json nodes = json::array();
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    json j{{"id", i}, {"height", n.height}, {"members", n.members}, {"parent", n.parent}};
    if (!n.is_leaf()) j["children"] = {n.left, n.right};
    if (!n.label.empty()) j["label"] = n.label;
    nodes.push_back(j);
  }
  json doc{{"format", "nof-taxonomy/1"},
           {"kind", t.kind == HierarchyKind::agglomerative ? "agglomerative" : "divisive"},
           {"root", t.root},
           {"nodes", nodes}};
  return doc.dump(1) + "\n";
}

ClassPartition taxonomy_to_classes(const Taxonomy& t, const TaxonomyCut& cut) {
  if (t.root < 0) throw InputError("taxonomy_to_classes: empty taxonomy");
  const auto& root = t.nodes[static_cast<std::size_t>(t.root)];

  std::vector<int> frontier;
  if (cut.by == TaxonomyCut::By::height) {
    if (!(cut.height >= 0.0) || cut.height > root.height)
      throw InputError("taxonomy_to_classes: cut height outside [0, " + std::to_string(root.height) + "]");
    std::function<void(int)> descend = [&](int id) {
      const auto& node = t.nodes[static_cast<std::size_t>(id)];
      if (node.is_leaf() || node.height <= cut.height) {
        frontier.push_back(id);
        return;
      }
      descend(node.left);
      descend(node.right);
    };
    descend(t.root);
  } else {
    const std::size_t n_leaves = t.leaves().size();
    if (cut.leaf_count < 1 || cut.leaf_count > n_leaves)
      throw InputError("taxonomy_to_classes: leaf count outside [1, " + std::to_string(n_leaves) + "]");
    frontier.push_back(t.root);
    while (frontier.size() < cut.leaf_count) {
      int pick = -1;
      for (int id : frontier) {
        const auto& node = t.nodes[static_cast<std::size_t>(id)];
        if (node.is_leaf()) continue;
        if (pick < 0 || node.height > t.nodes[static_cast<std::size_t>(pick)].height) pick = id;
      }
      const auto& node = t.nodes[static_cast<std::size_t>(pick)];
      std::erase(frontier, pick);
      frontier.push_back(node.left);
      frontier.push_back(node.right);
    }
  }

  std::sort(frontier.begin(), frontier.end(), [&](int a, int b) {
    return t.nodes[static_cast<std::size_t>(a)].members.front() < t.nodes[static_cast<std::size_t>(b)].members.front();
  });

  ClassPartition out;
  out.label_of_observation.assign(t.n_observations(), {});
  std::map<int, std::string> name_of;
  for (std::size_t c = 0; c < frontier.size(); ++c) {
    const auto& node = t.nodes[static_cast<std::size_t>(frontier[c])];
    std::string label = "C" + std::to_string(c + 1);
    name_of[frontier[c]] = label;
    out.labels.push_back(label);
    out.members.push_back(node.members);
    for (auto m : node.members) out.label_of_observation[m] = label;
  }

  // Ancestors of the cut classes become intermediate classes; the top one is "root".
  std::vector<int> ancestors;
  for (int id : frontier) {
    for (int p = t.nodes[static_cast<std::size_t>(id)].parent; p >= 0; p = t.nodes[static_cast<std::size_t>(p)].parent)
      if (std::find(ancestors.begin(), ancestors.end(), p) == ancestors.end()) ancestors.push_back(p);
  }
  std::sort(ancestors.begin(), ancestors.end(), [&](int a, int b) {
    const auto& na = t.nodes[static_cast<std::size_t>(a)];
    const auto& nb = t.nodes[static_cast<std::size_t>(b)];
    if (na.members.size() != nb.members.size()) return na.members.size() > nb.members.size();
    return na.members.front() < nb.members.front();
  });
  int group = 0;
  for (int id : ancestors) name_of[id] = id == t.root ? "root" : "G" + std::to_string(++group);

  auto parent_name = [&](int id) -> std::string {
    const int p = t.nodes[static_cast<std::size_t>(id)].parent;
    return p >= 0 && id != t.root ? name_of.at(p) : std::string{};
  };
  for (int id : ancestors)
    out.declarations.push_back({name_of.at(id), parent_name(id), t.nodes[static_cast<std::size_t>(id)].members});
  for (int id : frontier)
    out.declarations.push_back({name_of.at(id), parent_name(id), t.nodes[static_cast<std::size_t>(id)].members});
  return out;
}

}  // namespace nof
