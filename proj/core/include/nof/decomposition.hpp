#pragma once

// PCA whitening followed by symmetric FastICA (spatial ICA over trials laid
// end to end in time).

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nof/testbed.hpp"

namespace nof {

/// Either a fixed component count or the smallest count whose eigenvalues
/// retain at least `variance_fraction` of the total variance.
struct ComponentSelection {
  std::size_t count = 0;
  double variance_fraction = 0.0;

  static ComponentSelection fixed(std::size_t n) { return {n, 0.0}; }
  static ComponentSelection variance(double fraction) { return {0, fraction}; }
};

struct WhitenedData {
  Eigen::MatrixXd whitened;     // components x samples
  Eigen::MatrixXd whitening;    // components x channels
  Eigen::MatrixXd dewhitening;  // channels x components
  Eigen::VectorXd mean;         // per-channel mean removed before whitening
  Eigen::VectorXd eigenvalues;  // retained, descending
  double retained_variance = 0.0;

  Eigen::Index n_components() const { return whitening.rows(); }
  Eigen::Index n_samples() const { return whitened.cols(); }
};

/// Channel names, when given, are used in the zero-variance error message.
WhitenedData center_and_whiten(const Eigen::MatrixXd& data, ComponentSelection selection,
                               const std::vector<std::string>& channel_names = {});
WhitenedData center_and_whiten(const EpochTensor& epochs, ComponentSelection selection);

/// Sample covariance with the (n - 1) normalisation used throughout.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows_are_variables);

enum class Contrast { tanh, cube };

struct FastIcaConfig {
  Contrast contrast = Contrast::tanh;
  double tolerance = 1e-6;
  int max_iter = 500;
  std::uint64_t seed = 0;
  std::size_t n_factors = 0;  // 0 = as many as whitened components
};

struct FactorDecomposition {
  Eigen::MatrixXd unmixing;     // factors x channels
  Eigen::MatrixXd mixing;       // channels x factors; columns are topographies
  Eigen::MatrixXd activations;  // factors x samples (may be empty after I/O)
  Eigen::MatrixXd rotation;     // factors x components, orthonormal rows
  Eigen::VectorXd mean;         // channel means subtracted before unmixing
  bool converged = false;
  int n_iter = 0;

  Eigen::Index n_factors() const { return unmixing.rows(); }
  Eigen::Index n_channels() const { return unmixing.cols(); }
  Eigen::VectorXd topography(Eigen::Index factor) const { return mixing.col(factor); }
  /// FA1..FAk.
  static std::string factor_name(Eigen::Index factor) { return "FA" + std::to_string(factor + 1); }

  /// Spatially filtered time courses of an arbitrary channels x samples block.
  Eigen::MatrixXd activations_of(const Eigen::MatrixXd& channel_data) const;
};

/// Non-convergence is not an error: the last iterate is returned with
/// `converged == false`.
FactorDecomposition fastica(const WhitenedData& white, const FastIcaConfig& config);

/// Channel-space contribution (mean excluded) of the selected factors.
Eigen::MatrixXd backproject(const FactorDecomposition& dec, const std::vector<Eigen::Index>& factor_subset,
                            const WhitenedData& white);

/// Splits a channels x (trials * n_times) block back into per-trial matrices.
std::vector<Eigen::MatrixXd> split_trials(const Eigen::MatrixXd& concatenated, Eigen::Index n_times);

std::string decomposition_to_json(const FactorDecomposition& dec, bool include_activations = true);
FactorDecomposition decomposition_from_json(std::string_view text);

}  // namespace nof
