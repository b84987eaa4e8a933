#include "nof/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

#include "nof/error.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::VectorXd column_std(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mean) {
  Eigen::VectorXd sd(x.cols());
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    sd[j] = std::sqrt((x.col(j).array() - mean[j]).square().sum() / denom);
  return sd;
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

struct Params {
  Eigen::VectorXd weights;
  Eigen::MatrixXd means;
  std::vector<Eigen::MatrixXd> covs;
};

// Log of weight_j * N(x_i | mean_j, cov_j) for every row/component.
Eigen::MatrixXd component_log_densities(const Eigen::MatrixXd& x, const Params& p, CovarianceType type) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const auto k = static_cast<Eigen::Index>(p.weights.size());
  Eigen::MatrixXd out(n, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double log_w = p.weights[j] > 0 ? std::log(p.weights[j]) : -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd diff = x.rowwise() - p.means.row(j);
    if (type == CovarianceType::diagonal) {
      Eigen::VectorXd var = p.covs[static_cast<std::size_t>(j)].diagonal();
      const double log_det = var.array().log().sum();
      Eigen::VectorXd maha = (diff.array().square().rowwise() / var.transpose().array()).rowwise().sum();
      out.col(j) = (log_w - 0.5 * (static_cast<double>(d) * kLog2Pi + log_det)) - 0.5 * maha.array();
    } else {
      Eigen::LLT<Eigen::MatrixXd> llt(p.covs[static_cast<std::size_t>(j)]);
      if (llt.info() != Eigen::Success)
        throw NumericalError("EM: covariance of cluster " + std::to_string(j + 1) + " is singular");
      const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      Eigen::MatrixXd solved = llt.matrixL().solve(diff.transpose());
      Eigen::VectorXd maha = solved.colwise().squaredNorm().transpose();
      out.col(j) = (log_w - 0.5 * (static_cast<double>(d) * kLog2Pi + log_det)) - 0.5 * maha.array();
    }
  }
  return out;
}

struct EStep {
  Eigen::MatrixXd resp;
  double log_likelihood;
};

EStep e_step(const Eigen::MatrixXd& x, const Params& p, CovarianceType type) {
  Eigen::MatrixXd logp = component_log_densities(x, p, type);
  EStep out{Eigen::MatrixXd(logp.rows(), logp.cols()), 0.0};
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    const double lse = log_sum_exp(logp.row(i).transpose());
    out.log_likelihood += lse;
    out.resp.row(i) = (logp.row(i).array() - lse).exp();
    out.resp.row(i) /= out.resp.row(i).sum();
  }
  return out;
}

Eigen::MatrixXd floored_covariance(const Eigen::MatrixXd& scatter, CovarianceType type, double floor) {
  if (type == CovarianceType::diagonal) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(scatter.rows(), scatter.cols());
    c.diagonal() = scatter.diagonal().cwiseMax(floor);
    return c;
  }
  // Clamping eigenvalues is the constrained maximiser under an eigenvalue floor.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (scatter + scatter.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void m_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, Params& p, CovarianceType type, double floor) {
  const auto n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < resp.cols(); ++j) {
    const double nk = resp.col(j).sum();
    p.weights[j] = nk / n;
    if (nk < 1e-12) continue;  // empty component keeps its location
    p.means.row(j) = (resp.col(j).transpose() * x) / nk;
    Eigen::MatrixXd diff = x.rowwise() - p.means.row(j);
    Eigen::MatrixXd scatter = diff.transpose() * resp.col(j).asDiagonal() * diff / nk;
    p.covs[static_cast<std::size_t>(j)] = floored_covariance(scatter, type, floor);
  }
  p.weights /= p.weights.sum();
}

// k-means++ style seeding of component means.
Eigen::MatrixXd seed_means(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd means(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  means.row(0) = x.row(pick(rng));
  Eigen::VectorXd d2 = (x.rowwise() - means.row(0)).rowwise().squaredNorm();
  for (int j = 1; j < k; ++j) {
    const double total = d2.sum();
    Eigen::Index chosen = 0;
    if (total > 0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (chosen = 0; chosen < n - 1; ++chosen) {
        r -= d2[chosen];
        if (r <= 0) break;
      }
    } else {
      chosen = pick(rng);
    }
    means.row(j) = x.row(chosen);
    d2 = d2.cwiseMin((x.rowwise() - means.row(j)).rowwise().squaredNorm());
  }
  return means;
}

Eigen::MatrixXd mle_covariance(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd diff = x.rowwise() - x.colwise().mean();
  return diff.transpose() * diff / static_cast<double>(x.rows());
}

ClusterModel fit_once(const Eigen::MatrixXd& x, int k, const EmConfig& cfg, double floor, std::mt19937_64& rng) {
  Params p;
  p.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  p.means = seed_means(x, k, rng);
  const Eigen::MatrixXd init_cov = floored_covariance(mle_covariance(x), cfg.covariance, floor);
  p.covs.assign(static_cast<std::size_t>(k), init_cov);

  ClusterModel m;
  m.k = k;
  m.covariance = cfg.covariance;
  m.variance_floor = floor;

  EStep e = e_step(x, p, cfg.covariance);
  m.log_likelihood_trace.push_back(e.log_likelihood);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    m_step(x, e.resp, p, cfg.covariance, floor);
    EStep next = e_step(x, p, cfg.covariance);
    const double prev = e.log_likelihood;
    e = std::move(next);
    m.log_likelihood_trace.push_back(e.log_likelihood);
    m.n_iter = it;
    if (std::abs(e.log_likelihood - prev) <= cfg.tol * std::max(1.0, std::abs(e.log_likelihood))) {
      m.converged = true;
      break;
    }
  }
  m.weights = p.weights;
  m.means = p.means;
  m.covariances = p.covs;
  m.log_likelihood = e.log_likelihood;
  m.assignments.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    e.resp.row(i).maxCoeff(&best);
    m.assignments[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

// --- encoding -------------------------------------------------------------------

Eigen::MatrixXd zscore_columns(const Eigen::MatrixXd& x) {
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::VectorXd sd = column_std(x, mean);
  Eigen::MatrixXd out = x.rowwise() - mean;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (sd[j] > 0) out.col(j) /= sd[j];
  return out;
}

ObservationMatrix encode_observations(const std::vector<FactorSummary>& rows, const EncodingConfig& config) {
  if (rows.empty()) throw InputError("encode_observations: no rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  ObservationMatrix out;
  std::vector<Eigen::VectorXd> cols;

  for (const auto& name : config.numeric) {
    if (!is_numeric_attribute(name)) throw ConfigError("encoding: " + name + " is not a numeric attribute");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = attribute_number(rows[static_cast<std::size_t>(i)], name);
    if (!v.allFinite()) throw InputError("encoding: column " + name + " has missing or non-finite values");
    const double mean = v.mean();
    const double sd = n > 1 ? std::sqrt((v.array() - mean).square().sum() / static_cast<double>(n - 1)) : 0.0;
    if (!(sd > 0)) continue;
    out.scaled_columns.push_back(name);
    if (config.standardize) v = (v.array() - mean) / sd;
    cols.push_back(v);
    out.column_names.push_back(name);
    out.scale_mean.conservativeResize(out.scale_mean.size() + 1);
    out.scale_std.conservativeResize(out.scale_std.size() + 1);
    out.scale_mean[out.scale_mean.size() - 1] = config.standardize ? mean : 0.0;
    out.scale_std[out.scale_std.size() - 1] = config.standardize ? sd : 1.0;
  }

  for (const auto& name : config.categorical) {
    if (is_numeric_attribute(name)) throw ConfigError("encoding: " + name + " is numeric, not categorical");
    if (std::find(kSummaryColumns.begin(), kSummaryColumns.end(), name) == kSummaryColumns.end())
      throw ConfigError("encoding: unknown attribute " + name);
    std::set<std::string> values;
    for (const auto& r : rows) values.insert(attribute_text(r, name));
    if (values.size() < 2) continue;
    for (const auto& value : values) {
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i)
        v[i] = attribute_text(rows[static_cast<std::size_t>(i)], name) == value ? config.categorical_weight : 0.0;
      cols.push_back(v);
      out.column_names.push_back(name + "=" + value);
    }
  }

  if (cols.empty()) throw InputError("encoding: every selected attribute is constant");
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) x.col(static_cast<Eigen::Index>(j)) = cols[j];

  if (config.pca_components > 0) {
    const auto p = std::min<Eigen::Index>(static_cast<Eigen::Index>(config.pca_components), x.cols());
    out.pca_center = x.colwise().mean().transpose();
    Eigen::MatrixXd centered = x.rowwise() - out.pca_center.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered.transpose() * centered);
    Eigen::MatrixXd basis = es.eigenvectors().rowwise().reverse().leftCols(p);
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      Eigen::Index peak = 0;
      basis.col(j).cwiseAbs().maxCoeff(&peak);
      if (basis(peak, j) < 0) basis.col(j) *= -1.0;
    }
    out.pca_basis = basis;
    x = centered * basis;
    out.column_names.clear();
    for (Eigen::Index j = 0; j < p; ++j) out.column_names.push_back("PC" + std::to_string(j + 1));
  }
  out.rows = std::move(x);
  return out;
}

// --- EM ---------------------------------------------------------------------------

std::size_t ClusterModel::n_parameters() const {
  const auto d = static_cast<std::size_t>(dim());
  const auto kk = static_cast<std::size_t>(k);
  const std::size_t cov = covariance == CovarianceType::diagonal ? d : d * (d + 1) / 2;
  return (kk - 1) + kk * d + kk * cov;
}

ClusterModel em_fit(const Eigen::MatrixXd& x, int k, const EmConfig& config) {
  if (k < 1) throw InputError("em_fit: k must be >= 1");
  if (x.rows() < k) throw InputError("em_fit: k (" + std::to_string(k) + ") exceeds row count (" +
                                     std::to_string(x.rows()) + ")");
  if (x.cols() < 1) throw InputError("em_fit: no features");
  if (!x.allFinite()) throw InputError("em_fit: non-finite observations");
  if (config.n_restarts < 1 || config.max_iter < 1) throw ConfigError("em_fit: n_restarts and max_iter must be >= 1");
  if (!(config.cov_floor > 0)) throw ConfigError("em_fit: cov_floor must be positive");

  const double mean_var = mle_covariance(x).trace() / static_cast<double>(x.cols());
  const double floor = config.cov_floor * (mean_var > 0 ? mean_var : 1.0);

  std::mt19937_64 rng(config.seed);
  ClusterModel best;
  bool have = false;
  for (int r = 0; r < config.n_restarts; ++r) {
    ClusterModel m = fit_once(x, k, config, floor, rng);
    m.restart = r;
    if (!have || m.log_likelihood > best.log_likelihood) {
      best = std::move(m);
      have = true;
    }
  }
  return best;
}

EmPrediction em_predict(const ClusterModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.dim())
    throw InputError("em_predict: dimension mismatch (model " + std::to_string(model.dim()) + ", data " +
                     std::to_string(x.cols()) + ")");
  Params p{model.weights, model.means, model.covariances};
  EStep e = e_step(x, p, model.covariance);
  EmPrediction out;
  out.responsibilities = std::move(e.resp);
  out.log_likelihood = e.log_likelihood;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Index best = 0;
    out.responsibilities.row(i).maxCoeff(&best);
    out.assignments.push_back(static_cast<int>(best));
  }
  return out;
}

double bic(const ClusterModel& model, Eigen::Index n_rows) {
  return -2.0 * model.log_likelihood +
         static_cast<double>(model.n_parameters()) * std::log(static_cast<double>(n_rows));
}

ModelSelection em_select_k(const Eigen::MatrixXd& x, int k_max, const EmConfig& config) {
  if (k_max < 1) throw ConfigError("em_select_k: k_max must be >= 1");
  const int upper = std::min<int>(k_max, static_cast<int>(x.rows()));
  ModelSelection sel;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= upper; ++k) {
    ClusterModel m = em_fit(x, k, config);
    const double b = bic(m, x.rows());
    sel.bic_by_k.push_back(b);
    if (b < best) {
      best = b;
      sel.model = std::move(m);
    }
  }
  return sel;
}

std::string cluster_model_to_json(const ClusterModel& model) {
  json j;
  j["format"] = "nof-cluster-model/1";
  j["k"] = model.k;
  j["covariance"] = model.covariance == CovarianceType::diagonal ? "diagonal" : "full";
  j["variance_floor"] = model.variance_floor;
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  j["means"] = matrix_json(model.means);
  json covs = json::array();
  for (const auto& c : model.covariances) covs.push_back(matrix_json(c));
  j["covariances"] = covs;
  j["assignments"] = model.assignments;
  j["log_likelihood"] = model.log_likelihood;
  j["log_likelihood_trace"] = model.log_likelihood_trace;
  j["n_iter"] = model.n_iter;
  j["converged"] = model.converged;
  j["restart"] = model.restart;
  return j.dump(1) + "\n";
}

}  // namespace nof
