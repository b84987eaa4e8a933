#include "nof/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "nof/error.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

// Flip each column so its largest-|entry| is positive (lowest index on ties).
void canonical_column_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Eigen::Index best = 0;
    vectors.col(j).cwiseAbs().maxCoeff(&best);
    if (vectors(best, j) < 0) vectors.col(j) *= -1.0;
  }
}

// (W W^T)^{-1/2} W
Eigen::MatrixXd symmetric_decorrelation(const Eigen::MatrixXd& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w * w.transpose());
  Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * w;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("matrix JSON: data size mismatch");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  return m;
}

}  // namespace

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  if (x.cols() < 2) throw InputError("covariance needs at least 2 samples");
  Eigen::MatrixXd centered = x.colwise() - x.rowwise().mean();
  return centered * centered.transpose() / static_cast<double>(x.cols() - 1);
}

WhitenedData center_and_whiten(const Eigen::MatrixXd& data, ComponentSelection selection,
                               const std::vector<std::string>& channel_names) {
  const Eigen::Index n_ch = data.rows();
  const Eigen::Index n_samples = data.cols();
  if (n_ch < 1) throw InputError("whitening: no channels");
  if (n_samples <= n_ch) throw InputError("whitening: need more samples than channels");
  if (selection.count > static_cast<std::size_t>(n_ch))
    throw InputError("whitening: n_components exceeds channel count");

  WhitenedData out;
  out.mean = data.rowwise().mean();
  Eigen::MatrixXd centered = data.colwise() - out.mean;

  for (Eigen::Index c = 0; c < n_ch; ++c) {
    if (centered.row(c).squaredNorm() == 0.0) {
      std::string name = static_cast<std::size_t>(c) < channel_names.size() ? channel_names[static_cast<std::size_t>(c)]
                                                                             : "#" + std::to_string(c);
      throw InputError("whitening: channel " + name + " has zero variance");
    }
  }

  Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(n_samples - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericalError("whitening: eigendecomposition failed");
  Eigen::VectorXd evals = es.eigenvalues().reverse();
  Eigen::MatrixXd evecs = es.eigenvectors().rowwise().reverse();
  canonical_column_signs(evecs);

  const double total = evals.sum();
  Eigen::Index k = 0;
  if (selection.count > 0) {
    k = static_cast<Eigen::Index>(selection.count);
  } else if (selection.variance_fraction > 0.0) {
    if (selection.variance_fraction > 1.0) throw InputError("whitening: variance fraction must be in (0, 1]");
    double acc = 0.0;
    while (k < n_ch) {
      acc += evals[k++];
      if (acc >= selection.variance_fraction * total * (1.0 - 1e-12)) break;
    }
  } else {
    k = n_ch;
  }
  const double rank_tol = 1e-12 * std::max(evals[0], 0.0);
  if (evals[k - 1] <= rank_tol)
    throw InputError("whitening: n_components (" + std::to_string(k) + ") exceeds data rank");

  Eigen::VectorXd kept = evals.head(k);
  Eigen::MatrixXd basis = evecs.leftCols(k);
  out.eigenvalues = kept;
  out.whitening = kept.cwiseSqrt().cwiseInverse().asDiagonal() * basis.transpose();
  out.dewhitening = basis * kept.cwiseSqrt().asDiagonal();
  out.whitened = out.whitening * centered;

  // One symmetric correction pass: the first pass leaves an O(eps * cond)
  // residual in the whitened covariance; C^{-1/2} of that residual is near
  // identity, so component order and signs are kept.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> refine(sample_covariance(out.whitened));
  if (refine.info() != Eigen::Success) throw NumericalError("whitening: refinement failed");
  const Eigen::VectorXd r = refine.eigenvalues().cwiseSqrt();
  const Eigen::MatrixXd& q = refine.eigenvectors();
  const Eigen::MatrixXd inv_sqrt = q * r.cwiseInverse().asDiagonal() * q.transpose();
  out.whitening = inv_sqrt * out.whitening;
  out.dewhitening = out.dewhitening * (q * r.asDiagonal() * q.transpose());
  out.whitened = inv_sqrt * out.whitened;
  out.retained_variance = kept.sum() / total;
  return out;
}

WhitenedData center_and_whiten(const EpochTensor& epochs, ComponentSelection selection) {
  epochs.validate();
  return center_and_whiten(epochs.concatenated(), selection, epochs.montage.channels);
}

Eigen::MatrixXd FactorDecomposition::activations_of(const Eigen::MatrixXd& channel_data) const {
  if (channel_data.rows() != n_channels()) throw InputError("activations_of: channel count mismatch");
  return unmixing * (channel_data.colwise() - mean);
}

FactorDecomposition fastica(const WhitenedData& white, const FastIcaConfig& config) {
  const Eigen::Index k = white.n_components();
  const Eigen::Index n = white.n_samples();
  if (k < 1) throw InputError("fastica: no whitened components");
  const Eigen::Index m = config.n_factors == 0 ? k : static_cast<Eigen::Index>(config.n_factors);
  if (m > k) throw InputError("fastica: requested more factors than whitened components");
  if (n < k) throw InputError("fastica: fewer samples than components");
  if (config.max_iter < 1) throw ConfigError("fastica: max_iter must be >= 1");

  const Eigen::MatrixXd& z = white.whitened;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w(m, k);
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < k; ++c) w(r, c) = normal(rng);
  w = symmetric_decorrelation(w);

  FactorDecomposition out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 1; it <= config.max_iter; ++it) {
    Eigen::MatrixXd y = w * z;
    Eigen::MatrixXd g(m, n);
    Eigen::VectorXd g_prime_mean(m);
    if (config.contrast == Contrast::tanh) {
      g = y.array().tanh().matrix();
      g_prime_mean = (1.0 - g.array().square()).rowwise().mean().matrix();
    } else {
      g = y.array().cube().matrix();
      g_prime_mean = (3.0 * y.array().square()).rowwise().mean().matrix();
    }
    Eigen::MatrixXd w_next = g * z.transpose() * inv_n - g_prime_mean.asDiagonal() * w;
    w_next = symmetric_decorrelation(w_next);
    const double lim = (1.0 - (w_next * w.transpose()).diagonal().array().abs()).abs().maxCoeff();
    w = std::move(w_next);
    out.n_iter = it;
    if (lim < config.tolerance) {
      out.converged = true;
      break;
    }
  }

  // Canonical order (descending topography energy) and sign.
  Eigen::MatrixXd mixing = white.dewhitening * w.transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return mixing.col(a).squaredNorm() > mixing.col(b).squaredNorm();
  });
  Eigen::MatrixXd w_sorted(m, k);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index src = order[static_cast<std::size_t>(i)];
    Eigen::Index peak = 0;
    mixing.col(src).cwiseAbs().maxCoeff(&peak);
    const double sign = mixing(peak, src) < 0 ? -1.0 : 1.0;
    w_sorted.row(i) = sign * w.row(src);
  }

  out.rotation = w_sorted;
  out.unmixing = w_sorted * white.whitening;
  out.mixing = white.dewhitening * w_sorted.transpose();
  out.activations = w_sorted * z;
  out.mean = white.mean;
  return out;
}

Eigen::MatrixXd backproject(const FactorDecomposition& dec, const std::vector<Eigen::Index>& factor_subset,
                            const WhitenedData& white) {
  if (factor_subset.empty()) throw InputError("backproject: empty factor subset");
  std::set<Eigen::Index> seen;
  for (auto id : factor_subset) {
    if (id < 0 || id >= dec.n_factors())
      throw InputError("backproject: unknown factor id " + FactorDecomposition::factor_name(id));
    if (!seen.insert(id).second)
      throw InputError("backproject: duplicate factor id " + FactorDecomposition::factor_name(id));
  }
  if (dec.rotation.cols() != white.n_components())
    throw InputError("backproject: decomposition does not match whitened data");

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dec.mixing.rows(), white.n_samples());
  for (auto id : factor_subset) out += dec.mixing.col(id) * (dec.rotation.row(id) * white.whitened);
  return out;
}

std::vector<Eigen::MatrixXd> split_trials(const Eigen::MatrixXd& concatenated, Eigen::Index n_times) {
  if (n_times <= 0 || concatenated.cols() % n_times != 0)
    throw InputError("split_trials: sample count is not a multiple of the epoch length");
  std::vector<Eigen::MatrixXd> out;
  for (Eigen::Index s = 0; s < concatenated.cols(); s += n_times) out.emplace_back(concatenated.middleCols(s, n_times));
  return out;
}

std::string decomposition_to_json(const FactorDecomposition& dec, bool include_activations) {
  json j;
  j["format"] = "nof-decomposition/1";
  json ids = json::array();
  for (Eigen::Index f = 0; f < dec.n_factors(); ++f) ids.push_back(FactorDecomposition::factor_name(f));
  j["factors"] = ids;
  j["converged"] = dec.converged;
  j["n_iter"] = dec.n_iter;
  j["unmixing"] = matrix_to_json(dec.unmixing);
  j["mixing"] = matrix_to_json(dec.mixing);
  j["rotation"] = matrix_to_json(dec.rotation);
  j["mean"] = matrix_to_json(dec.mean);
  if (include_activations) j["activations"] = matrix_to_json(dec.activations);
  return j.dump(1) + "\n";
}

FactorDecomposition decomposition_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed decomposition JSON: ") + e.what());
  }
  if (j.value("format", "") != "nof-decomposition/1") throw InputError("unsupported decomposition format");
  FactorDecomposition dec;
  dec.converged = j.at("converged").get<bool>();
  dec.n_iter = j.at("n_iter").get<int>();
  dec.unmixing = matrix_from_json(j.at("unmixing"));
  dec.mixing = matrix_from_json(j.at("mixing"));
  dec.rotation = matrix_from_json(j.at("rotation"));
  dec.mean = matrix_from_json(j.at("mean")).col(0);
  if (j.contains("activations")) dec.activations = matrix_from_json(j.at("activations"));
  if (dec.mixing.rows() != dec.unmixing.cols() || dec.mixing.cols() != dec.unmixing.rows())
    throw InputError("decomposition JSON: mixing/unmixing shapes disagree");
  return dec;
}

}  // namespace nof
