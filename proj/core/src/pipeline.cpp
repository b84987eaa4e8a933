#include "nof/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "nof/classification.hpp"
#include "nof/clustering.hpp"
#include "nof/decomposition.hpp"
#include "nof/error.hpp"
#include "nof/features.hpp"
#include "nof/io.hpp"
#include "nof/ontology.hpp"
#include "nof/rulemining.hpp"
#include "nof/testbed.hpp"

namespace nof {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Stage stage, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = splitmix(seed ^ (static_cast<std::uint64_t>(stage) + 1) * 0x100000001b3ULL);
  s = splitmix(s ^ (a + 1));
  return splitmix(s ^ ((b + 1) << 20));
}

// Tracks files a stage touches so they can be checksummed for the manifest.
class StageIo {
 public:
  explicit StageIo(fs::path out) : out_(std::move(out)) {}

  fs::path dir(std::string_view stage) const { return out_ / stage; }

  fs::path require(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("missing input " + path.string());
    if (fs::is_regular_file(path)) inputs_.insert(path);
    return path;
  }

  std::string read(const fs::path& path) { return io::read_file(require(path)); }

  void note_input(const fs::path& path) {
    if (fs::is_regular_file(path)) inputs_.insert(path);
  }

  void write(const fs::path& path, std::string_view contents) {
    fs::create_directories(path.parent_path());
    io::write_file_atomic(path, contents);
    outputs_.insert(path);
  }

  void note_output_tree(const fs::path& root) {
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) outputs_.insert(e.path());
  }

  StageRecord record(Stage stage, double wall_ms) const {
    StageRecord r;
    r.stage = std::string(stage_name(stage));
    r.inputs = digests(inputs_);
    r.outputs = digests(outputs_);
    r.wall_ms = wall_ms;
    return r;
  }

 private:
  std::vector<FileDigest> digests(const std::set<fs::path>& files) const {
    std::vector<FileDigest> out;
    for (const auto& f : files) {
      const auto rel = f.lexically_relative(out_);
      const bool inside = !rel.empty() && rel.native().rfind("..", 0) != 0;
      out.push_back({(inside ? rel : f).generic_string(), io::sha256_file(f)});
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
    return out;
  }

  fs::path out_;
  std::set<fs::path> inputs_;
  std::set<fs::path> outputs_;
};

struct Subject {
  std::string name;
  fs::path epochs;
};

std::vector<Subject> subjects_of(const PipelineConfig& c, StageIo& io_) {
  std::vector<Subject> out;
  if (!c.input.epochs.empty()) {
    for (const auto& p : c.input.epochs) {
      fs::path dir(p);
      if (!fs::is_directory(dir)) throw InputError("missing input " + dir.string());
      out.push_back({dir.filename().string(), dir});
    }
  } else {
    const fs::path root = io_.dir("synth") / "epochs";
    if (!fs::is_directory(root)) throw InputError("missing input " + root.string());
    for (const auto& e : fs::directory_iterator(root))
      if (e.is_directory()) out.push_back({e.path().filename().string(), e.path()});
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  }
  if (out.empty()) throw InputError("no epoch directories to process");
  std::set<std::string> names;
  for (const auto& s : out)
    if (!names.insert(s.name).second) throw InputError("duplicate subject name " + s.name);
  return out;
}

EpochTensor read_subject(const Subject& s, StageIo& io_) {
  io_.require(s.epochs / "meta.json");
  io_.require(s.epochs / "data.bin");
  io_.note_input(s.epochs / "montage.csv");
  return read_epochs(s.epochs);
}

fs::path templates_path(const PipelineConfig& c, const StageIo& io_) {
  return c.input.templates.empty() ? io_.dir("synth") / "templates.json" : fs::path(c.input.templates);
}

std::string subject_label(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02zu", i + 1);
  return buf;
}

void stage_synth(const PipelineConfig& c, StageIo& io_) {
  const auto& s = c.synth;
  const ChannelMontage montage = standard_montage_32();
  std::vector<SourceTemplate> base;
  if (s.patterns == "p300")
    base.push_back(p300_preset(montage, s.fs, s.t0_ms, s.n_times));
  else
    base = demo_patterns(montage, s.fs, s.t0_ms, s.n_times);

  const fs::path dir = io_.dir("synth");
  if (fs::exists(dir / "epochs")) fs::remove_all(dir / "epochs");
  io_.write(dir / "montage.csv", montage_to_csv(montage));
  io_.write(dir / "templates.json", templates_to_json(base));

  for (std::size_t subj = 0; subj < s.subjects; ++subj) {
    std::vector<SourceTemplate> own;
    for (std::size_t i = 0; i < base.size(); ++i)
      own.push_back(perturb_template(base[i], s.topography_noise, s.latency_jitter_ms,
                                     derive_seed(c.seed, Stage::synth, subj, i + 1)));
    GenerateOptions opt;
    opt.gain_jitter = s.gain_jitter;
    opt.noise_std = noise_std_for_snr(own, s.snr);
    opt.n_trials = s.trials_per_subject;
    opt.seed = derive_seed(c.seed, Stage::synth, subj, 0);
    for (const auto& m : s.conditions) opt.conditions.push_back({m, {}});
    const EpochTensor epochs = generate_dataset(own, montage, opt);
    const fs::path target = dir / "epochs" / subject_label(subj);
    write_epochs(target, epochs);
    io_.note_output_tree(target);
  }
}

void stage_decompose(const PipelineConfig& c, StageIo& io_) {
  const auto subjects = subjects_of(c, io_);
  const fs::path dir = io_.dir("decompose");
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const EpochTensor epochs = read_subject(subjects[i], io_);
    const auto selection = c.decompose.variance_fraction > 0
                               ? ComponentSelection::variance(c.decompose.variance_fraction)
                               : ComponentSelection::fixed(c.decompose.n_components);
    const WhitenedData white = center_and_whiten(epochs, selection);
    FastIcaConfig ica;
    ica.contrast = c.decompose.contrast;
    ica.tolerance = c.decompose.tolerance;
    ica.max_iter = c.decompose.max_iter;
    ica.seed = derive_seed(c.seed, Stage::decompose, i);
    const FactorDecomposition dec = fastica(white, ica);
    io_.write(dir / (subjects[i].name + ".json"), decomposition_to_json(dec, false));
  }
}

void stage_extract(const PipelineConfig& c, StageIo& io_) {
  const auto subjects = subjects_of(c, io_);
  const auto templates = templates_from_json(io_.read(templates_path(c, io_)));
  auto target = std::find_if(templates.begin(), templates.end(),
                             [&](const SourceTemplate& t) { return t.name == c.extract.target_pattern; });
  if (target == templates.end())
    throw ConfigError("extract.target_pattern '" + c.extract.target_pattern + "' is not in the pattern library");

  SummarizeConfig sc;
  sc.target_topography = target->topography;
  sc.mean_channel_set = c.extract.mean_channel_set;

  std::vector<FactorSummary> rows;
  std::string provenance = "row,subject,factor,EVENT,STIM,MOD,pattern,correlation\n";
  std::string warnings;
  for (const auto& s : subjects) {
    const EpochTensor epochs = read_subject(s, io_);
    const FactorDecomposition dec = decomposition_from_json(io_.read(io_.dir("decompose") / (s.name + ".json")));
    for (const auto& t : templates)
      if (static_cast<std::size_t>(t.topography.size()) != epochs.n_channels())
        throw InputError("pattern " + t.name + " does not match the montage of " + s.name);
    const SummaryTable table = summarize_dataset(dec, epochs, sc);
    for (const auto& w : table.warnings) warnings += s.name + ": " + w + "\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto factor = table.factor_of_row[r];
      const Eigen::VectorXd topo = dec.topography(factor);
      std::string best;
      double best_r = 0.0;
      for (const auto& t : templates) {
        const auto corr = pearson(topo, t.topography);
        if (corr && std::abs(*corr) > best_r) {
          best_r = std::abs(*corr);
          best = t.name;
        }
      }
      const auto& m = table.condition_of_row[r];
      provenance += std::to_string(rows.size() + 1) + "," + s.name + "," + FactorDecomposition::factor_name(factor) +
                    "," + m.event + "," + m.stim + "," + m.mod + "," + best + "," + io::format_double(best_r) + "\n";
      rows.push_back(table.rows[r]);
    }
  }
  const fs::path dir = io_.dir("extract");
  io_.write(dir / "summary.csv", summaries_to_csv(rows));
  io_.write(dir / "provenance.csv", provenance);
  io_.write(dir / "warnings.txt", warnings);
}

struct Provenance {
  std::string pattern;
  double correlation = 0.0;
};

std::vector<Provenance> read_provenance(const std::string& text) {
  std::vector<Provenance> out;
  const auto lines = io::split(text, '\n');
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const auto f = io::split(lines[i], ',');
    if (f.size() != 8) throw ParseError("provenance: expected 8 fields", static_cast<int>(i + 1));
    out.push_back({f[6], io::parse_double(f[7])});
  }
  return out;
}

// Clusters ordered by smallest member are C1..Ck; with provenance a cluster
// takes the pattern name held by a strict majority of its members.
std::vector<std::string> name_clusters(const std::vector<int>& assignment, const std::vector<Provenance>* provenance,
                                       double min_correlation, std::vector<std::pair<int, std::string>>& names_out) {
  std::vector<int> order;
  for (int a : assignment)
    if (std::find(order.begin(), order.end(), a) == order.end()) order.push_back(a);
  std::map<int, std::string> name_of;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const int comp = order[i];
    std::string name = "C" + std::to_string(i + 1);
    if (provenance) {
      std::map<std::string, std::size_t> votes;
      std::size_t members = 0;
      for (std::size_t r = 0; r < assignment.size(); ++r) {
        if (assignment[r] != comp) continue;
        ++members;
        const auto& p = (*provenance)[r];
        if (!p.pattern.empty() && p.correlation >= min_correlation) ++votes[p.pattern];
      }
      for (const auto& [pattern, n] : votes)
        if (2 * n > members) name = pattern;
    }
    name_of[comp] = name;
    names_out.emplace_back(comp, name);
  }
  std::vector<std::string> labels;
  for (int a : assignment) labels.push_back(name_of[a]);
  return labels;
}

void stage_cluster(const PipelineConfig& c, StageIo& io_) {
  const fs::path in = io_.dir("extract");
  const LabeledSummaries data = summaries_from_csv(io_.read(in / "summary.csv"));
  if (data.rows.empty()) throw InputError("summary.csv has no rows");
  std::vector<Provenance> provenance;
  const bool named = c.cluster.name_by_pattern && fs::exists(in / "provenance.csv");
  if (named) {
    provenance = read_provenance(io_.read(in / "provenance.csv"));
    if (provenance.size() != data.rows.size()) throw InputError("provenance.csv does not match summary.csv");
  }

  const ObservationMatrix obs = encode_observations(data.rows, c.cluster.encoding);
  EmConfig em;
  em.seed = derive_seed(c.seed, Stage::cluster);
  em.tol = c.cluster.tol;
  em.max_iter = c.cluster.max_iter;
  em.n_restarts = c.cluster.restarts;
  em.cov_floor = c.cluster.cov_floor;
  em.covariance = c.cluster.covariance;
  ClusterModel model;
  std::vector<double> bic_by_k;
  if (c.cluster.k > 0) {
    model = em_fit(obs.rows, c.cluster.k, em);
  } else {
    auto sel = em_select_k(obs.rows, c.cluster.k_max, em);
    model = std::move(sel.model);
    bic_by_k = std::move(sel.bic_by_k);
  }
  std::vector<std::pair<int, std::string>> names;
  const auto labels = name_clusters(model.assignments, named ? &provenance : nullptr,
                                    c.extract.min_pattern_correlation, names);

  Taxonomy taxonomy;
  if (c.cluster.hierarchy == HierarchyKind::agglomerative) {
    taxonomy = agglomerative_hierarchy(obs.rows, c.cluster.linkage);
  } else {
    DivisiveConfig dc;
    dc.seed = derive_seed(c.seed, Stage::cluster, 1);
    taxonomy = divisive_hierarchy(obs.rows, dc);
  }
  const std::size_t distinct = std::set<std::string>(labels.begin(), labels.end()).size();
  const std::size_t cut = std::clamp<std::size_t>(distinct, 1, taxonomy.leaves().size());
  const ClassPartition classes = taxonomy_to_classes(taxonomy, TaxonomyCut::into(cut));

  json model_doc = json::parse(cluster_model_to_json(model));
  json name_arr = json::array();
  for (const auto& [comp, name] : names) name_arr.push_back({{"component", comp}, {"name", name}});
  json doc{{"model", model_doc}, {"names", name_arr}, {"columns", obs.column_names}, {"bic_by_k", bic_by_k}};
  json class_arr = json::array();
  for (const auto& d : classes.declarations)
    class_arr.push_back({{"name", d.name}, {"parent", d.parent}, {"members", d.members}});

  const fs::path dir = io_.dir("cluster");
  io_.write(dir / "clustered.csv", summaries_to_csv(data.rows, labels));
  io_.write(dir / "model.json", doc.dump(1) + "\n");
  io_.write(dir / "taxonomy.json", taxonomy_to_json(taxonomy));
  io_.write(dir / "classes.json", json{{"classes", class_arr}}.dump(1) + "\n");
}

LabeledSummaries read_clustered(StageIo& io_) {
  LabeledSummaries data = summaries_from_csv(io_.read(io_.dir("cluster") / "clustered.csv"));
  if (data.labels.empty()) throw InputError("clustered.csv has no CLUSTER column");
  return data;
}

void stage_classify(const PipelineConfig& c, StageIo& io_) {
  const LabeledSummaries data = read_clustered(io_);
  const LabeledTable table = table_from_summaries(data.rows, data.labels, c.classify.attributes);
  const DecisionTree tree = build_tree(table, c.classify.tree);
  const auto rules = extract_rules(tree);
  std::string text;
  for (const auto& r : rules) text += format_rule(r) + "\n";
  json splits = json::object();
  for (const auto& a : tree.attributes)
    if (a.kind == AttributeKind::numeric) splits[a.name] = split_points(tree, a.name);
  const fs::path dir = io_.dir("classify");
  io_.write(dir / "tree.json", tree_to_json(tree));
  io_.write(dir / "rules.json", rules_to_json(rules));
  io_.write(dir / "rules.txt", text);
  io_.write(dir / "split_points.json", splits.dump(1) + "\n");
}

void stage_mine(const PipelineConfig& c, StageIo& io_) {
  const LabeledSummaries data = read_clustered(io_);
  SplitPointMap splits;
  try {
    const json doc = json::parse(io_.read(io_.dir("classify") / "split_points.json"));
    for (auto it = doc.begin(); it != doc.end(); ++it) splits[it.key()] = it.value().get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InputError(std::string("split_points.json: ") + e.what());
  }
  TransactionSet tx = discretize(data.rows, splits, c.mine.include_cluster ? data.labels : std::vector<std::string>{});
  if (c.mine.drop_catch_all) tx = drop_catch_all(tx);
  AprioriOptions ao;
  ao.max_length = c.mine.max_length;
  const auto itemsets = apriori(tx, c.mine.beta_sup, ao);
  RuleOptions ro;
  ro.single_item_consequent = c.mine.single_consequent;
  ro.consequent_attributes = c.mine.consequent_attributes;
  const auto rules = generate_rules(itemsets, c.mine.beta_conf, tx, ro);
  const fs::path dir = io_.dir("mine");
  io_.write(dir / "transactions.csv", transactions_to_csv(tx));
  io_.write(dir / "itemsets.csv", itemsets_to_csv(itemsets, tx));
  io_.write(dir / "rules.csv", rules_to_csv(rules));
}

void stage_partition(const PipelineConfig& c, StageIo& io_) {
  const auto rules = rules_from_csv(io_.read(io_.dir("mine") / "rules.csv"));
  OntologyRuleBase base;
  if (!c.partition.expert_rules.empty()) base = parse_rule_base(io_.read(c.partition.expert_rules));
  if (c.partition.beta_sup) base.thresholds.beta_sup = *c.partition.beta_sup;
  if (c.partition.beta_conf) base.thresholds.beta_conf = *c.partition.beta_conf;
  if (c.partition.pi_min) base.thresholds.pi_min = *c.partition.pi_min;
  MatchOptions mo;
  mo.subsumption = c.partition.subsumption;
  const PartitionReport report = partition(rules, base, mo);
  const fs::path dir = io_.dir("partition");
  io_.write(dir / "report.json", report_to_json(report));
  io_.write(dir / "report.txt", report_to_text(report));
}

json record_json(const StageRecord& r) {
  const auto files = [](const std::vector<FileDigest>& v) {
    json arr = json::array();
    for (const auto& f : v) arr.push_back({{"path", f.path}, {"sha256", f.sha256}});
    return arr;
  };
  return {{"stage", r.stage}, {"inputs", files(r.inputs)}, {"outputs", files(r.outputs)}, {"wall_ms", r.wall_ms}};
}

void upsert_manifest(const fs::path& out, const StageRecord& record) {
  auto records = read_manifest(out);
  auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.stage == record.stage; });
  if (it != records.end())
    *it = record;
  else
    records.push_back(record);
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return parse_stage(a.stage) < parse_stage(b.stage);
  });
  json arr = json::array();
  for (const auto& r : records) arr.push_back(record_json(r));
  io::write_file_atomic(out / "run.json", json{{"format", "nof-run/1"}, {"stages", arr}}.dump(1) + "\n");
}

template <class E>
[[noreturn]] void rethrow_prefixed(const E& e, std::string_view stage) {
  throw E(std::string(stage) + ": " + e.what());
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::synth: return "synth";
    case Stage::decompose: return "decompose";
    case Stage::extract: return "extract";
    case Stage::cluster: return "cluster";
    case Stage::classify: return "classify";
    case Stage::mine: return "mine";
    case Stage::partition: return "partition";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (auto s : kStages)
    if (stage_name(s) == name) return s;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

StageRecord run_stage(Stage stage, const PipelineConfig& config) {
  config.validate();
  const fs::path out(config.out);
  fs::create_directories(out);
  StageIo io_(out);
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (stage) {
      case Stage::synth: stage_synth(config, io_); break;
      case Stage::decompose: stage_decompose(config, io_); break;
      case Stage::extract: stage_extract(config, io_); break;
      case Stage::cluster: stage_cluster(config, io_); break;
      case Stage::classify: stage_classify(config, io_); break;
      case Stage::mine: stage_mine(config, io_); break;
      case Stage::partition: stage_partition(config, io_); break;
    }
  } catch (const ConfigError& e) {
    rethrow_prefixed(e, stage_name(stage));
  } catch (const NumericalError& e) {
    rethrow_prefixed(e, stage_name(stage));
  } catch (const InputError& e) {
    rethrow_prefixed(e, stage_name(stage));
  } catch (const Error& e) {
    rethrow_prefixed(e, stage_name(stage));
  } catch (const fs::filesystem_error& e) {
    throw Error(std::string(stage_name(stage)) + ": " + e.what());
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  StageRecord record = io_.record(stage, ms);
  io::write_file_atomic(out / "config.json", config_to_json(config));
  upsert_manifest(out, record);
  return record;
}

std::vector<StageRecord> run_pipeline(const PipelineConfig& config) {
  std::vector<StageRecord> out;
  for (auto s : kStages) {
    if (s == Stage::synth && !config.synth.enabled) continue;
    out.push_back(run_stage(s, config));
  }
  return out;
}

std::vector<StageRecord> read_manifest(const fs::path& out_dir) {
  const fs::path path = out_dir / "run.json";
  std::vector<StageRecord> records;
  if (!fs::exists(path)) return records;
  try {
    const json doc = json::parse(io::read_file(path));
    for (const auto& j : doc.at("stages")) {
      StageRecord r;
      r.stage = j.at("stage").get<std::string>();
      for (const auto& f : j.at("inputs")) r.inputs.push_back({f.at("path"), f.at("sha256")});
      for (const auto& f : j.at("outputs")) r.outputs.push_back({f.at("path"), f.at("sha256")});
      r.wall_ms = j.at("wall_ms").get<double>();
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return records;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InputError*>(&error)) return 2;
  if (dynamic_cast<const ConfigError*>(&error)) return 3;
  if (dynamic_cast<const NumericalError*>(&error)) return 4;
  return 1;
}

}  // namespace nof
