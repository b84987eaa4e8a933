#include "nof/testbed.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

struct ChannelInfo {
  const char* name;
  double x;
  double y;
  const char* roi;
};

constexpr ChannelInfo kStandard32[] = {
    {"Fp1", -0.31, 0.95, "frontal"},        {"Fp2", 0.31, 0.95, "frontal"},
    {"AF3", -0.33, 0.77, "frontal"},        {"AF4", 0.33, 0.77, "frontal"},
    {"F7", -0.81, 0.59, "left-temporal"},   {"F3", -0.45, 0.55, "frontal"},
    {"Fz", 0.0, 0.50, "frontal"},           {"F4", 0.45, 0.55, "frontal"},
    {"F8", 0.81, 0.59, "right-temporal"},   {"FC5", -0.72, 0.26, "left-temporal"},
    {"FC1", -0.25, 0.26, "frontal"},        {"FC2", 0.25, 0.26, "frontal"},
    {"FC6", 0.72, 0.26, "right-temporal"},  {"T7", -1.0, 0.0, "left-temporal"},
    {"C3", -0.50, 0.0, "central"},          {"Cz", 0.0, 0.0, "central"},
    {"C4", 0.50, 0.0, "central"},           {"T8", 1.0, 0.0, "right-temporal"},
    {"CP5", -0.72, -0.26, "left-temporal"}, {"CP1", -0.25, -0.26, "central"},
    {"CP2", 0.25, -0.26, "central"},        {"CP6", 0.72, -0.26, "right-temporal"},
    {"P7", -0.81, -0.59, "left-temporal"},  {"P3", -0.45, -0.55, "parietal"},
    {"Pz", 0.0, -0.50, "parietal"},         {"P4", 0.45, -0.55, "parietal"},
    {"P8", 0.81, -0.59, "right-temporal"},  {"PO3", -0.33, -0.77, "occipital"},
    {"PO4", 0.33, -0.77, "occipital"},      {"O1", -0.31, -0.95, "occipital"},
    {"Oz", 0.0, -1.0, "occipital"},         {"O2", 0.31, -0.95, "occipital"},
};

constexpr const char* kEpochFormat = "nof-epochs/1";

double to_le(double v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = __builtin_bswap64(bits);
    std::memcpy(&v, &bits, sizeof bits);
  }
  return v;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  return v;
}

}  // namespace

// --- montage ----------------------------------------------------------------

void ChannelMontage::validate() const {
  if (channels.size() < 2) throw InputError("montage needs at least 2 channels");
  std::set<std::string> seen;
  for (const auto& c : channels) {
    if (!seen.insert(c).second) throw InputError("duplicate channel name: " + c);
    auto it = roi_of.find(c);
    if (it == roi_of.end() || it->second.empty()) throw InputError("channel without ROI: " + c);
  }
}

std::size_t ChannelMontage::index_of(std::string_view channel) const {
  auto it = std::find(channels.begin(), channels.end(), channel);
  if (it == channels.end()) throw InputError("unknown channel: " + std::string(channel));
  return static_cast<std::size_t>(it - channels.begin());
}

const std::string& ChannelMontage::roi(std::size_t channel_index) const {
  return roi_of.at(channels.at(channel_index));
}

std::vector<std::size_t> ChannelMontage::channels_in_roi(std::string_view roi_name) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (roi(i) == roi_name) out.push_back(i);
  return out;
}

ChannelMontage standard_montage_32() {
  ChannelMontage m;
  for (const auto& info : kStandard32) {
    m.channels.emplace_back(info.name);
    m.roi_of[info.name] = info.roi;
  }
  return m;
}

Eigen::Vector2d channel_position(std::string_view channel) {
  for (const auto& info : kStandard32)
    if (channel == info.name) return {info.x, info.y};
  throw InputError("no built-in scalp position for channel " + std::string(channel));
}

ChannelMontage parse_montage_csv(std::string_view text) {
  auto lines = io::split(text, '\n');
  if (lines.empty() || io::trim(lines[0]) != "channel,roi")
    throw ParseError("montage CSV must start with header 'channel,roi'", 1);
  ChannelMontage m;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto line = io::trim(lines[i]);
    if (line.empty()) continue;
    auto cols = io::split(line, ',');
    if (cols.size() != 2) throw ParseError("expected 'channel,roi'", static_cast<int>(i + 1));
    auto name = io::trim(cols[0]);
    if (m.roi_of.count(name)) throw ParseError("duplicate channel name: " + name, static_cast<int>(i + 1));
    m.channels.push_back(name);
    m.roi_of[name] = io::trim(cols[1]);
  }
  m.validate();
  return m;
}

std::string montage_to_csv(const ChannelMontage& montage) {
  std::string out = "channel,roi\n";
  for (const auto& c : montage.channels) out += c + "," + montage.roi_of.at(c) + "\n";
  return out;
}

// --- templates ----------------------------------------------------------------

void SourceTemplate::validate(std::size_t n_channels) const {
  if (fs <= 0) throw InputError("template " + name + ": fs must be positive");
  if (static_cast<std::size_t>(topography.size()) != n_channels)
    throw InputError("template " + name + ": topography length does not match montage");
  if (waveform.size() == 0) throw InputError("template " + name + ": empty waveform");
  if (peak_latency_ms < t0_ms || peak_latency_ms > t0_ms + duration_ms())
    throw InputError("template " + name + ": peak latency outside epoch window");
}

Eigen::VectorXd gaussian_waveform(double fs, double t0_ms, std::size_t n_times, double peak_ms, double width_ms,
                                  double amplitude) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(n_times));
  for (std::size_t i = 0; i < n_times; ++i) {
    double t = t0_ms + static_cast<double>(i) * 1000.0 / fs;
    double z = (t - peak_ms) / width_ms;
    w[static_cast<Eigen::Index>(i)] = amplitude * std::exp(-0.5 * z * z);
  }
  return w;
}

Eigen::VectorXd scalp_blob(const ChannelMontage& montage, const Eigen::Vector2d& center, double spread) {
  Eigen::VectorXd topo(static_cast<Eigen::Index>(montage.size()));
  for (std::size_t i = 0; i < montage.size(); ++i) {
    double d2 = (channel_position(montage.channels[i]) - center).squaredNorm();
    topo[static_cast<Eigen::Index>(i)] = std::exp(-0.5 * d2 / (spread * spread));
  }
  return topo;
}

SourceTemplate make_template(std::string name, const ChannelMontage& montage, const Eigen::Vector2d& center,
                             double spread, double fs, double t0_ms, std::size_t n_times, double peak_ms,
                             double width_ms, double amplitude) {
  SourceTemplate t;
  t.name = std::move(name);
  t.topography = scalp_blob(montage, center, spread);
  t.waveform = gaussian_waveform(fs, t0_ms, n_times, peak_ms, width_ms, amplitude);
  t.fs = fs;
  t.t0_ms = t0_ms;
  t.peak_latency_ms = peak_ms;
  t.polarity = amplitude >= 0 ? Polarity::positive : Polarity::negative;
  t.validate(montage.size());
  return t;
}

SourceTemplate p300_preset(const ChannelMontage& montage, double fs, double t0_ms, std::size_t n_times) {
  return make_template("P300", montage, channel_position("Fz"), 0.35, fs, t0_ms, n_times, 400.0, 50.0, 8.0);
}

std::vector<SourceTemplate> demo_patterns(const ChannelMontage& montage, double fs, double t0_ms,
                                          std::size_t n_times) {
  return {
      make_template("N150", montage, {-0.35, 0.68}, 0.35, fs, t0_ms, n_times, 150.0, 30.0, -6.0),
      p300_preset(montage, fs, t0_ms, n_times),
      make_template("SW700", montage, {0.35, 0.68}, 0.35, fs, t0_ms, n_times, 700.0, 60.0, 6.0),
  };
}

SourceTemplate perturb_template(const SourceTemplate& base, double topography_noise, double latency_jitter_ms,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  SourceTemplate out = base;
  const double scale = base.topography.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < out.topography.size(); ++i)
    out.topography[i] += topography_noise * scale * normal(rng);

  const double shift_ms = latency_jitter_ms * uniform(rng);
  const auto shift = static_cast<Eigen::Index>(std::lround(shift_ms * base.fs / 1000.0));
  const Eigen::Index n = base.waveform.size();
  out.waveform.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index src = i - shift;
    if (src >= 0 && src < n) out.waveform[i] = base.waveform[src];
  }
  out.peak_latency_ms = base.peak_latency_ms + static_cast<double>(shift) * 1000.0 / base.fs;
  return out;
}

double noise_std_for_snr(std::span<const SourceTemplate> templates, double snr) {
  if (templates.empty()) throw InputError("noise_std_for_snr: no templates");
  if (snr <= 0) throw InputError("noise_std_for_snr: snr must be positive");
  Eigen::MatrixXd signal = Eigen::MatrixXd::Zero(templates[0].topography.size(), templates[0].waveform.size());
  for (const auto& t : templates) signal += t.topography * t.waveform.transpose();
  const double power = signal.squaredNorm() / static_cast<double>(signal.size());
  return std::sqrt(power / snr);
}

// --- epochs -------------------------------------------------------------------

void EpochTensor::validate() const {
  montage.validate();
  if (fs <= 0) throw InputError("epochs: fs must be positive");
  if (meta.size() != trials.size()) throw InputError("epochs: metadata count does not match trial count");
  for (const auto& t : trials) {
    if (static_cast<std::size_t>(t.rows()) != montage.size())
      throw InputError("epochs: channel dimension does not match montage");
    if (t.cols() != trials.front().cols()) throw InputError("epochs: trials differ in length");
  }
}

Eigen::MatrixXd EpochTensor::concatenated() const {
  const auto n_t = static_cast<Eigen::Index>(n_times());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_channels()), n_t * static_cast<Eigen::Index>(trials.size()));
  for (std::size_t i = 0; i < trials.size(); ++i)
    out.middleCols(static_cast<Eigen::Index>(i) * n_t, n_t) = trials[i];
  return out;
}

std::vector<TrialMeta> EpochTensor::conditions() const {
  std::set<TrialMeta> distinct(meta.begin(), meta.end());
  return {distinct.begin(), distinct.end()};
}

EpochTensor generate_dataset(std::span<const SourceTemplate> templates, const ChannelMontage& montage,
                             const GenerateOptions& options) {
  if (templates.empty()) throw InputError("generate_dataset: empty template list");
  if (options.n_trials < 1) throw InputError("generate_dataset: n_trials must be >= 1");
  if (options.noise_std < 0) throw InputError("generate_dataset: noise_std must be >= 0");
  montage.validate();
  const auto& first = templates.front();
  for (const auto& t : templates) {
    t.validate(montage.size());
    if (t.fs != first.fs || t.t0_ms != first.t0_ms || t.waveform.size() != first.waveform.size())
      throw InputError("generate_dataset: template " + t.name + " has a different epoch window than " +
                       first.name);
  }

  std::vector<ConditionSpec> conditions = options.conditions;
  if (conditions.empty()) conditions.push_back({{"stimon", "stim", "visual"}, {}});

  EpochTensor out;
  out.fs = first.fs;
  out.t0_ms = first.t0_ms;
  out.montage = montage;

  std::vector<Eigen::MatrixXd> patterns;
  for (const auto& t : templates) patterns.push_back(t.topography * t.waveform.transpose());

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n_c = static_cast<Eigen::Index>(montage.size());
  const Eigen::Index n_t = first.waveform.size();

  for (std::size_t trial = 0; trial < options.n_trials; ++trial) {
    const auto& cond = conditions[trial % conditions.size()];
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_c, n_t);
    for (std::size_t k = 0; k < templates.size(); ++k) {
      double gain = 1.0 + options.gain_jitter * normal(rng);
      auto it = cond.gains.find(templates[k].name);
      if (it != cond.gains.end()) gain *= it->second;
      x += gain * patterns[k];
    }
    if (options.noise_std > 0) {
      for (Eigen::Index c = 0; c < n_c; ++c)
        for (Eigen::Index t = 0; t < n_t; ++t) x(c, t) += options.noise_std * normal(rng);
    }
    out.trials.push_back(std::move(x));
    out.meta.push_back(cond.meta);
  }
  return out;
}

std::vector<AveragedGroup> average_epochs(const EpochTensor& epochs, std::span<const MetaKey> group_by) {
  if (epochs.trials.empty()) throw InputError("average_epochs: empty epoch tensor");
  auto key_of = [&](const TrialMeta& m) {
    TrialMeta k;
    for (auto key : group_by) {
      switch (key) {
        case MetaKey::event: k.event = m.event; break;
        case MetaKey::stim: k.stim = m.stim; break;
        case MetaKey::mod: k.mod = m.mod; break;
      }
    }
    return k;
  };

  std::map<TrialMeta, AveragedGroup> groups;
  for (std::size_t i = 0; i < epochs.trials.size(); ++i) {
    auto key = key_of(epochs.meta[i]);
    auto [it, inserted] = groups.try_emplace(key);
    auto& g = it->second;
    if (inserted) {
      g.key = key;
      g.average = Eigen::MatrixXd::Zero(epochs.trials[i].rows(), epochs.trials[i].cols());
    }
    g.average += epochs.trials[i];
    ++g.n_trials;
  }
  std::vector<AveragedGroup> out;
  for (auto& [key, g] : groups) {
    g.average /= static_cast<double>(g.n_trials);
    out.push_back(std::move(g));
  }
  return out;
}

double rms(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return std::sqrt(m.squaredNorm() / static_cast<double>(m.size()));
}

// --- persistence --------------------------------------------------------------

void write_epochs(const std::filesystem::path& dir, const EpochTensor& epochs) {
  epochs.validate();
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "montage.csv", montage_to_csv(epochs.montage));

  json meta;
  meta["format"] = kEpochFormat;
  meta["fs"] = epochs.fs;
  meta["t0_ms"] = epochs.t0_ms;
  meta["n_trials"] = epochs.n_trials();
  meta["n_channels"] = epochs.n_channels();
  meta["n_times"] = epochs.n_times();
  meta["montage"] = "montage.csv";
  meta["data"] = "data.bin";
  meta["layout"] = "float64-le trial-major, then channel, then time";
  json trials = json::array();
  for (const auto& m : epochs.meta) trials.push_back({{"EVENT", m.event}, {"STIM", m.stim}, {"MOD", m.mod}});
  meta["trials"] = trials;
  io::write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

  std::string bytes;
  bytes.resize(epochs.n_trials() * epochs.n_channels() * epochs.n_times() * sizeof(double));
  std::size_t off = 0;
  for (const auto& t : epochs.trials)
    for (Eigen::Index c = 0; c < t.rows(); ++c)
      for (Eigen::Index s = 0; s < t.cols(); ++s) {
        double v = to_le(t(c, s));
        std::memcpy(bytes.data() + off, &v, sizeof v);
        off += sizeof v;
      }
  io::write_file_atomic(dir / "data.bin", bytes);
}

EpochTensor read_epochs(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "meta.json")) throw InputError("missing epochs metadata: " + (dir / "meta.json").string());
  json meta;
  try {
    meta = json::parse(io::read_file(dir / "meta.json"));
  } catch (const json::parse_error& e) {
    throw InputError("malformed " + (dir / "meta.json").string() + ": " + e.what());
  }
  if (meta.value("format", "") != kEpochFormat) throw InputError("unsupported epochs format in " + dir.string());

  EpochTensor out;
  out.fs = meta.at("fs").get<double>();
  out.t0_ms = meta.at("t0_ms").get<double>();
  out.montage = parse_montage_csv(io::read_file(dir / meta.at("montage").get<std::string>()));
  const auto n_trials = meta.at("n_trials").get<std::size_t>();
  const auto n_ch = meta.at("n_channels").get<std::size_t>();
  const auto n_t = meta.at("n_times").get<std::size_t>();
  for (const auto& t : meta.at("trials"))
    out.meta.push_back({t.at("EVENT").get<std::string>(), t.at("STIM").get<std::string>(),
                        t.at("MOD").get<std::string>()});

  const auto bytes = io::read_file(dir / meta.at("data").get<std::string>());
  if (bytes.size() != n_trials * n_ch * n_t * sizeof(double))
    throw InputError("data.bin size does not match meta.json dimensions in " + dir.string());
  std::size_t off = 0;
  for (std::size_t k = 0; k < n_trials; ++k) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n_ch), static_cast<Eigen::Index>(n_t));
    for (Eigen::Index c = 0; c < m.rows(); ++c)
      for (Eigen::Index s = 0; s < m.cols(); ++s) {
        double v;
        std::memcpy(&v, bytes.data() + off, sizeof v);
        off += sizeof v;
        m(c, s) = to_le(v);
      }
    out.trials.push_back(std::move(m));
  }
  out.validate();
  return out;
}

std::string templates_to_json(std::span<const SourceTemplate> templates) {
  json arr = json::array();
  for (const auto& t : templates) {
    arr.push_back({{"name", t.name},
                   {"fs", t.fs},
                   {"t0_ms", t.t0_ms},
                   {"peak_latency_ms", t.peak_latency_ms},
                   {"polarity", t.polarity == Polarity::positive ? "positive" : "negative"},
                   {"topography", vector_to_json(t.topography)},
                   {"waveform", vector_to_json(t.waveform)}});
  }
  return json{{"templates", arr}}.dump(2) + "\n";
}

std::vector<SourceTemplate> templates_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed templates JSON: ") + e.what());
  }
  std::vector<SourceTemplate> out;
  for (const auto& j : doc.at("templates")) {
    SourceTemplate t;
    t.name = j.at("name").get<std::string>();
    t.fs = j.at("fs").get<double>();
    t.t0_ms = j.at("t0_ms").get<double>();
    t.peak_latency_ms = j.at("peak_latency_ms").get<double>();
    t.polarity = j.at("polarity").get<std::string>() == "negative" ? Polarity::negative : Polarity::positive;
    t.topography = vector_from_json(j.at("topography"));
    t.waveform = vector_from_json(j.at("waveform"));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace nof
