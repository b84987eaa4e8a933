#pragma once

// Synthetic ERP datasets with known ground-truth sources, plus the trial
// averaging that turns epochs into an ERP.

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nof {

struct ChannelMontage {
  std::vector<std::string> channels;
  std::map<std::string, std::string> roi_of;

  /// Throws InputError on duplicate names, a channel without ROI, or < 2 channels.
  void validate() const;

  std::size_t size() const { return channels.size(); }
  std::size_t index_of(std::string_view channel) const;
  const std::string& roi(std::size_t channel_index) const;
  std::vector<std::size_t> channels_in_roi(std::string_view roi) const;
};

/// 32-channel 10-20 subset grouped into frontal, central, parietal,
/// occipital, left-temporal and right-temporal regions.
ChannelMontage standard_montage_32();

/// Approximate 2-D scalp position (unit disk, +y = nose) of a 10-20 channel.
/// Throws InputError for names outside the built-in table.
Eigen::Vector2d channel_position(std::string_view channel);

ChannelMontage parse_montage_csv(std::string_view text);
std::string montage_to_csv(const ChannelMontage& montage);

enum class Polarity { positive, negative };

struct SourceTemplate {
  std::string name;
  Eigen::VectorXd topography;  // one weight per channel
  Eigen::VectorXd waveform;    // microvolt-like, sampled at fs
  double fs = 250.0;
  double t0_ms = 0.0;
  double peak_latency_ms = 0.0;
  Polarity polarity = Polarity::positive;

  double duration_ms() const { return static_cast<double>(waveform.size()) * 1000.0 / fs; }
  void validate(std::size_t n_channels) const;
};

struct TrialMeta {
  std::string event;
  std::string stim;
  std::string mod;

  auto operator<=>(const TrialMeta&) const = default;
  bool operator==(const TrialMeta&) const = default;
};

enum class MetaKey { event, stim, mod };

struct EpochTensor {
  std::vector<Eigen::MatrixXd> trials;  // each channels x timepoints
  double fs = 250.0;
  double t0_ms = 0.0;
  std::vector<TrialMeta> meta;
  ChannelMontage montage;

  std::size_t n_trials() const { return trials.size(); }
  std::size_t n_channels() const { return montage.size(); }
  std::size_t n_times() const { return trials.empty() ? 0 : static_cast<std::size_t>(trials.front().cols()); }
  void validate() const;

  /// channels x (trials * timepoints), trials laid end to end.
  Eigen::MatrixXd concatenated() const;
  /// Distinct trial metadata in sorted order.
  std::vector<TrialMeta> conditions() const;
};

// --- template construction -------------------------------------------------

Eigen::VectorXd gaussian_waveform(double fs, double t0_ms, std::size_t n_times, double peak_ms,
                                  double width_ms, double amplitude);

/// Gaussian blob over the scalp centred at `center`, spread in unit-disk radii.
Eigen::VectorXd scalp_blob(const ChannelMontage& montage, const Eigen::Vector2d& center, double spread);

SourceTemplate make_template(std::string name, const ChannelMontage& montage, const Eigen::Vector2d& center,
                             double spread, double fs, double t0_ms, std::size_t n_times, double peak_ms,
                             double width_ms, double amplitude);

/// Frontal-positive component peaking at 400 ms.
SourceTemplate p300_preset(const ChannelMontage& montage, double fs = 250.0, double t0_ms = -100.0,
                           std::size_t n_times = 250);

/// Three frontally distributed patterns separated in latency: an early
/// negative N150, the P300 preset and a late positive slow wave (SW700).
std::vector<SourceTemplate> demo_patterns(const ChannelMontage& montage, double fs = 250.0,
                                          double t0_ms = -100.0, std::size_t n_times = 250);

/// Per-subject variant: additive Gaussian noise on the topography (relative
/// to its max |weight|) and an integer-sample latency shift.
SourceTemplate perturb_template(const SourceTemplate& base, double topography_noise, double latency_jitter_ms,
                                std::uint64_t seed);

/// Noise standard deviation giving the requested signal/noise power ratio
/// for the summed noise-free templates.
double noise_std_for_snr(std::span<const SourceTemplate> templates, double snr);

// --- generation and averaging ----------------------------------------------

struct ConditionSpec {
  TrialMeta meta;
  std::map<std::string, double> gains;  // template name -> gain, default 1
};

struct GenerateOptions {
  double gain_jitter = 0.0;  // sd of the multiplicative per-trial gain
  double noise_std = 0.0;
  std::size_t n_trials = 100;
  std::uint64_t seed = 0;
  std::vector<ConditionSpec> conditions;  // trials assigned round-robin; empty = one default condition
};

EpochTensor generate_dataset(std::span<const SourceTemplate> templates, const ChannelMontage& montage,
                             const GenerateOptions& options);

struct AveragedGroup {
  TrialMeta key;  // fields not in group_by are left empty
  std::size_t n_trials = 0;
  Eigen::MatrixXd average;  // channels x timepoints
};

std::vector<AveragedGroup> average_epochs(const EpochTensor& epochs, std::span<const MetaKey> group_by);

double rms(const Eigen::MatrixXd& m);

// --- persistence ------------------------------------------------------------

void write_epochs(const std::filesystem::path& dir, const EpochTensor& epochs);
EpochTensor read_epochs(const std::filesystem::path& dir);

std::string templates_to_json(std::span<const SourceTemplate> templates);
std::vector<SourceTemplate> templates_from_json(std::string_view text);

}  // namespace nof
