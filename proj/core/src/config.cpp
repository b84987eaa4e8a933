#include "nof/config.hpp"

#include <json.hpp>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

std::string contrast_name(Contrast c) { return c == Contrast::tanh ? "tanh" : "cube"; }
std::string covariance_name(CovarianceType c) { return c == CovarianceType::diagonal ? "diagonal" : "full"; }
std::string hierarchy_name(HierarchyKind h) { return h == HierarchyKind::agglomerative ? "agglomerative" : "divisive"; }
std::string missing_name(MissingPolicy m) { return m == MissingPolicy::error ? "error" : "majority_child"; }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json to_json(const PipelineConfig& c) {
  json conditions = json::array();
  for (const auto& m : c.synth.conditions) conditions.push_back({{"event", m.event}, {"stim", m.stim}, {"mod", m.mod}});
  return {
      {"seed", c.seed},
      {"out", c.out},
      {"synth",
       {{"enabled", c.synth.enabled},
        {"patterns", c.synth.patterns},
        {"subjects", c.synth.subjects},
        {"trials_per_subject", c.synth.trials_per_subject},
        {"fs", c.synth.fs},
        {"t0_ms", c.synth.t0_ms},
        {"n_times", c.synth.n_times},
        {"snr", c.synth.snr},
        {"gain_jitter", c.synth.gain_jitter},
        {"topography_noise", c.synth.topography_noise},
        {"latency_jitter_ms", c.synth.latency_jitter_ms},
        {"conditions", conditions}}},
      {"input", {{"epochs", c.input.epochs}, {"templates", c.input.templates}}},
      {"decompose",
       {{"n_components", c.decompose.n_components},
        {"variance_fraction", c.decompose.variance_fraction},
        {"contrast", contrast_name(c.decompose.contrast)},
        {"tolerance", c.decompose.tolerance},
        {"max_iter", c.decompose.max_iter}}},
      {"extract",
       {{"target_pattern", c.extract.target_pattern},
        {"mean_channel_set", c.extract.mean_channel_set},
        {"min_pattern_correlation", c.extract.min_pattern_correlation}}},
      {"cluster",
       {{"numeric", c.cluster.encoding.numeric},
        {"categorical", c.cluster.encoding.categorical},
        {"categorical_weight", c.cluster.encoding.categorical_weight},
        {"standardize", c.cluster.encoding.standardize},
        {"pca_components", c.cluster.encoding.pca_components},
        {"k", c.cluster.k},
        {"k_max", c.cluster.k_max},
        {"covariance", covariance_name(c.cluster.covariance)},
        {"cov_floor", c.cluster.cov_floor},
        {"restarts", c.cluster.restarts},
        {"max_iter", c.cluster.max_iter},
        {"tol", c.cluster.tol},
        {"hierarchy", hierarchy_name(c.cluster.hierarchy)},
        {"linkage", std::string(linkage_name(c.cluster.linkage))},
        {"name_by_pattern", c.cluster.name_by_pattern}}},
      {"classify",
       {{"attributes", c.classify.attributes},
        {"min_leaf", c.classify.tree.min_leaf},
        {"max_depth", c.classify.tree.max_depth},
        {"prune", c.classify.tree.prune},
        {"prune_cf", c.classify.tree.prune_cf},
        {"missing", missing_name(c.classify.tree.missing)}}},
      {"mine",
       {{"beta_sup", c.mine.beta_sup},
        {"beta_conf", c.mine.beta_conf},
        {"include_cluster", c.mine.include_cluster},
        {"drop_catch_all", c.mine.drop_catch_all},
        {"max_length", c.mine.max_length},
        {"single_consequent", c.mine.single_consequent},
        {"consequent_attributes", c.mine.consequent_attributes}}},
      {"partition",
       {{"expert_rules", c.partition.expert_rules},
        {"beta_sup", optional_json(c.partition.beta_sup)},
        {"beta_conf", optional_json(c.partition.beta_conf)},
        {"pi_min", optional_json(c.partition.pi_min)},
        {"subsumption", c.partition.subsumption}}},
  };
}

void merge(json& target, const json& source, const std::string& path) {
  if (!source.is_object()) throw ConfigError((path.empty() ? "config" : path) + " must be an object");
  for (auto it = source.begin(); it != source.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!target.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = target[it.key()];
    if (slot.is_object())
      merge(slot, it.value(), key);
    else
      slot = it.value();
  }
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = io::trim(assignment.substr(0, eq));
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  json* node = &doc;
  const auto keys = io::split(path, '.');
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!node->is_object() || !node->contains(keys[i])) throw ConfigError("unknown config key '" + path + "'");
    node = &(*node)[keys[i]];
  }
  if (node->is_object()) {
    merge(*node, value, path);
  } else {
    *node = value;
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + (section.empty() ? std::string() : section + ".") + key + "' has the wrong type");
  }
}

std::optional<double> get_optional(const json& j, const char* key, const std::string& section) {
  if (j.at(key).is_null()) return std::nullopt;
  return get<double>(j, key, section);
}

template <class E>
E get_enum(const json& j, const char* key, const std::string& section,
           std::initializer_list<std::pair<const char*, E>> options) {
  const auto name = get<std::string>(j, key, section);
  for (const auto& [n, v] : options)
    if (name == n) return v;
  throw ConfigError("config key '" + section + "." + key + "' has unknown value '" + name + "'");
}

PipelineConfig from_json(const json& j) {
  PipelineConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "");
  c.out = get<std::string>(j, "out", "");

  const auto& s = j.at("synth");
  c.synth.enabled = get<bool>(s, "enabled", "synth");
  c.synth.patterns = get<std::string>(s, "patterns", "synth");
  c.synth.subjects = get<std::size_t>(s, "subjects", "synth");
  c.synth.trials_per_subject = get<std::size_t>(s, "trials_per_subject", "synth");
  c.synth.fs = get<double>(s, "fs", "synth");
  c.synth.t0_ms = get<double>(s, "t0_ms", "synth");
  c.synth.n_times = get<std::size_t>(s, "n_times", "synth");
  c.synth.snr = get<double>(s, "snr", "synth");
  c.synth.gain_jitter = get<double>(s, "gain_jitter", "synth");
  c.synth.topography_noise = get<double>(s, "topography_noise", "synth");
  c.synth.latency_jitter_ms = get<double>(s, "latency_jitter_ms", "synth");
  c.synth.conditions.clear();
  if (!s.at("conditions").is_array()) throw ConfigError("config key 'synth.conditions' must be a list");
  for (const auto& m : s.at("conditions"))
    c.synth.conditions.push_back({get<std::string>(m, "event", "synth.conditions"),
                                  get<std::string>(m, "stim", "synth.conditions"),
                                  get<std::string>(m, "mod", "synth.conditions")});

  const auto& in = j.at("input");
  c.input.epochs = get<std::vector<std::string>>(in, "epochs", "input");
  c.input.templates = get<std::string>(in, "templates", "input");

  const auto& d = j.at("decompose");
  c.decompose.n_components = get<std::size_t>(d, "n_components", "decompose");
  c.decompose.variance_fraction = get<double>(d, "variance_fraction", "decompose");
  c.decompose.contrast = get_enum<Contrast>(d, "contrast", "decompose", {{"tanh", Contrast::tanh}, {"cube", Contrast::cube}});
  c.decompose.tolerance = get<double>(d, "tolerance", "decompose");
  c.decompose.max_iter = get<int>(d, "max_iter", "decompose");

  const auto& e = j.at("extract");
  c.extract.target_pattern = get<std::string>(e, "target_pattern", "extract");
  c.extract.mean_channel_set = get<std::vector<std::string>>(e, "mean_channel_set", "extract");
  c.extract.min_pattern_correlation = get<double>(e, "min_pattern_correlation", "extract");

  const auto& k = j.at("cluster");
  c.cluster.encoding.numeric = get<std::vector<std::string>>(k, "numeric", "cluster");
  c.cluster.encoding.categorical = get<std::vector<std::string>>(k, "categorical", "cluster");
  c.cluster.encoding.categorical_weight = get<double>(k, "categorical_weight", "cluster");
  c.cluster.encoding.standardize = get<bool>(k, "standardize", "cluster");
  c.cluster.encoding.pca_components = get<std::size_t>(k, "pca_components", "cluster");
  c.cluster.k = get<int>(k, "k", "cluster");
  c.cluster.k_max = get<int>(k, "k_max", "cluster");
  c.cluster.covariance = get_enum<CovarianceType>(
      k, "covariance", "cluster", {{"diagonal", CovarianceType::diagonal}, {"full", CovarianceType::full}});
  c.cluster.cov_floor = get<double>(k, "cov_floor", "cluster");
  c.cluster.restarts = get<int>(k, "restarts", "cluster");
  c.cluster.max_iter = get<int>(k, "max_iter", "cluster");
  c.cluster.tol = get<double>(k, "tol", "cluster");
  c.cluster.hierarchy = get_enum<HierarchyKind>(
      k, "hierarchy", "cluster",
      {{"agglomerative", HierarchyKind::agglomerative}, {"divisive", HierarchyKind::divisive}});
  try {
    c.cluster.linkage = parse_linkage(get<std::string>(k, "linkage", "cluster"));
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(std::string("cluster.linkage: ") + err.what());
  }
  c.cluster.name_by_pattern = get<bool>(k, "name_by_pattern", "cluster");

  const auto& t = j.at("classify");
  c.classify.attributes = get<std::vector<std::string>>(t, "attributes", "classify");
  c.classify.tree.min_leaf = get<std::size_t>(t, "min_leaf", "classify");
  c.classify.tree.max_depth = get<int>(t, "max_depth", "classify");
  c.classify.tree.prune = get<bool>(t, "prune", "classify");
  c.classify.tree.prune_cf = get<double>(t, "prune_cf", "classify");
  c.classify.tree.missing = get_enum<MissingPolicy>(
      t, "missing", "classify", {{"error", MissingPolicy::error}, {"majority_child", MissingPolicy::majority_child}});

  const auto& m = j.at("mine");
  c.mine.beta_sup = get<double>(m, "beta_sup", "mine");
  c.mine.beta_conf = get<double>(m, "beta_conf", "mine");
  c.mine.include_cluster = get<bool>(m, "include_cluster", "mine");
  c.mine.drop_catch_all = get<bool>(m, "drop_catch_all", "mine");
  c.mine.max_length = get<std::size_t>(m, "max_length", "mine");
  c.mine.single_consequent = get<bool>(m, "single_consequent", "mine");
  c.mine.consequent_attributes = get<std::vector<std::string>>(m, "consequent_attributes", "mine");

  const auto& p = j.at("partition");
  c.partition.expert_rules = get<std::string>(p, "expert_rules", "partition");
  c.partition.beta_sup = get_optional(p, "beta_sup", "partition");
  c.partition.beta_conf = get_optional(p, "beta_conf", "partition");
  c.partition.pi_min = get_optional(p, "pi_min", "partition");
  c.partition.subsumption = get<bool>(p, "subsumption", "partition");
  return c;
}

void check_attributes(const std::vector<std::string>& names, const std::string& key, bool numeric_only) {
  for (const auto& n : names) {
    if (std::find(kSummaryColumns.begin(), kSummaryColumns.end(), n) == kSummaryColumns.end())
      throw ConfigError(key + ": unknown attribute '" + n + "'");
    if (numeric_only && !is_numeric_attribute(n)) throw ConfigError(key + ": '" + n + "' is not numeric");
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (out.empty()) throw ConfigError("out must not be empty");
  if (synth.patterns != "demo" && synth.patterns != "p300")
    throw ConfigError("synth.patterns must be 'demo' or 'p300'");
  if (synth.subjects < 1) throw ConfigError("synth.subjects must be >= 1");
  if (synth.trials_per_subject < 1) throw ConfigError("synth.trials_per_subject must be >= 1");
  if (!(synth.fs > 0)) throw ConfigError("synth.fs must be positive");
  if (synth.n_times < 2) throw ConfigError("synth.n_times must be >= 2");
  if (!(synth.snr > 0)) throw ConfigError("synth.snr must be positive");
  if (synth.gain_jitter < 0 || synth.topography_noise < 0 || synth.latency_jitter_ms < 0)
    throw ConfigError("synth jitter settings must be non-negative");
  if (synth.conditions.empty()) throw ConfigError("synth.conditions must not be empty");
  if (decompose.n_components < 1 && decompose.variance_fraction <= 0)
    throw ConfigError("decompose.n_components must be >= 1");
  if (decompose.variance_fraction < 0 || decompose.variance_fraction > 1)
    throw ConfigError("decompose.variance_fraction must be in [0, 1]");
  if (!(decompose.tolerance > 0) || decompose.max_iter < 1) throw ConfigError("decompose tolerance/max_iter invalid");
  if (extract.min_pattern_correlation < 0 || extract.min_pattern_correlation > 1)
    throw ConfigError("extract.min_pattern_correlation must be in [0, 1]");
  check_attributes(cluster.encoding.numeric, "cluster.numeric", true);
  check_attributes(cluster.encoding.categorical, "cluster.categorical", false);
  if (cluster.encoding.numeric.empty() && cluster.encoding.categorical.empty())
    throw ConfigError("cluster: no attributes to encode");
  if (cluster.k < 0 || cluster.k_max < 1) throw ConfigError("cluster.k must be >= 0 and cluster.k_max >= 1");
  if (!(cluster.cov_floor > 0) || cluster.restarts < 1 || cluster.max_iter < 1 || !(cluster.tol > 0))
    throw ConfigError("cluster EM settings invalid");
  check_attributes(classify.attributes, "classify.attributes", false);
  if (classify.tree.min_leaf < 1 || classify.tree.max_depth < 0) throw ConfigError("classify tree limits invalid");
  if (!(classify.tree.prune_cf > 0 && classify.tree.prune_cf < 1)) throw ConfigError("classify.prune_cf must be in (0, 1)");
  if (!(mine.beta_sup > 0 && mine.beta_sup <= 1)) throw ConfigError("mine.beta_sup must be in (0, 1]");
  if (!(mine.beta_conf > 0 && mine.beta_conf <= 1)) throw ConfigError("mine.beta_conf must be in (0, 1]");
  if (partition.beta_sup && !(*partition.beta_sup > 0 && *partition.beta_sup <= 1))
    throw ConfigError("partition.beta_sup must be in (0, 1]");
  if (partition.beta_conf && !(*partition.beta_conf > 0 && *partition.beta_conf <= 1))
    throw ConfigError("partition.beta_conf must be in (0, 1]");
  if (partition.pi_min && !(*partition.pi_min >= 0 && *partition.pi_min <= 1))
    throw ConfigError("partition.pi_min must be in [0, 1]");
}

PipelineConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  json doc = to_json(PipelineConfig{});
  if (!io::trim(json_text).empty()) {
    json file;
    try {
      file = json::parse(json_text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    merge(doc, file, "");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  PipelineConfig c = from_json(doc);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_config(text, overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

PipelineConfig default_config(const std::vector<std::string>& overrides) { return parse_config("", overrides); }

std::string config_to_json(const PipelineConfig& config) { return to_json(config).dump(2) + "\n"; }

}  // namespace nof
