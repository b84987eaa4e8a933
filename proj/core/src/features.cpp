#include "nof/features.hpp"

#include <algorithm>
#include <cmath>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

namespace {

struct Extreme {
  Eigen::Index index = 0;
  bool tied = false;
};

template <typename Better>
Extreme extreme_index(const Eigen::VectorXd& v, Better better) {
  Extreme e;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (better(v[i], v[e.index])) {
      e.index = i;
      e.tied = false;
    } else if (v[i] == v[e.index]) {
      e.tied = true;
    }
  }
  return e;
}

void check_text_field(const std::string& value, std::string_view column) {
  if (value.find_first_of(",\n\r") != std::string::npos)
    throw InputError("summary column " + std::string(column) + " value contains a separator: '" + value + "'");
}

}  // namespace

bool is_numeric_attribute(std::string_view column) {
  return column == "IN_min" || column == "IN_max" || column == "IN_mean" || column == "SP_cor" ||
         column == "TI_max";
}

std::string attribute_text(const FactorSummary& r, std::string_view column) {
  if (column == "SP_max") return r.sp_max;
  if (column == "SP_max_ROI") return r.sp_max_roi;
  if (column == "SP_min") return r.sp_min;
  if (column == "SP_min_ROI") return r.sp_min_roi;
  if (column == "ROI") return r.roi;
  if (column == "EVENT") return r.event;
  if (column == "STIM") return r.stim;
  if (column == "MOD") return r.mod;
  return io::format_double(attribute_number(r, column));
}

double attribute_number(const FactorSummary& r, std::string_view column) {
  if (column == "IN_min") return r.in_min;
  if (column == "IN_max") return r.in_max;
  if (column == "IN_mean") return r.in_mean;
  if (column == "SP_cor") return r.sp_cor;
  if (column == "TI_max") return r.ti_max;
  throw InputError("attribute " + std::string(column) + " is not numeric");
}

std::optional<double> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  Eigen::VectorXd da = a.array() - a.mean();
  Eigen::VectorXd db = b.array() - b.mean();
  const double na = da.norm();
  const double nb = db.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return std::clamp(da.dot(db) / (na * nb), -1.0, 1.0);
}

SummaryResult extract_summary(const FactorDecomposition& dec, const EpochTensor& epochs, Eigen::Index factor,
                              const TrialMeta& condition, const Eigen::VectorXd& target_topography,
                              const std::vector<std::string>& mean_channel_set) {
  const auto& montage = epochs.montage;
  if (factor < 0 || factor >= dec.n_factors())
    throw InputError("extract_summary: unknown factor " + FactorDecomposition::factor_name(factor));
  if (dec.n_channels() != static_cast<Eigen::Index>(montage.size()))
    throw InputError("extract_summary: decomposition channel count does not match epochs");
  if (target_topography.size() != static_cast<Eigen::Index>(montage.size()))
    throw InputError("extract_summary: template length does not match channel count");

  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(montage.size()),
                                              static_cast<Eigen::Index>(epochs.n_times()));
  std::size_t n_sel = 0;
  for (std::size_t i = 0; i < epochs.n_trials(); ++i) {
    if (epochs.meta[i] == condition) {
      avg += epochs.trials[i];
      ++n_sel;
    }
  }
  if (n_sel == 0)
    throw InputError("extract_summary: condition EVENT=" + condition.event + " STIM=" + condition.stim +
                     " MOD=" + condition.mod + " selects no trials");
  avg /= static_cast<double>(n_sel);

  SummaryResult res;
  auto& row = res.row;
  const std::string fname = FactorDecomposition::factor_name(factor);
  const Eigen::VectorXd topo = dec.mixing.col(factor);

  auto imax = extreme_index(topo, [](double a, double b) { return a > b; });
  auto imin = extreme_index(topo, [](double a, double b) { return a < b; });
  if (imax.tied) res.warnings.push_back(fname + ": tie in SP_max, lowest channel index used");
  if (imin.tied) res.warnings.push_back(fname + ": tie in SP_min, lowest channel index used");
  row.sp_max = montage.channels[static_cast<std::size_t>(imax.index)];
  row.sp_min = montage.channels[static_cast<std::size_t>(imin.index)];
  row.sp_max_roi = montage.roi(static_cast<std::size_t>(imax.index));
  row.sp_min_roi = montage.roi(static_cast<std::size_t>(imin.index));
  row.roi = row.sp_max_roi;

  // Condition-averaged activation; the back-projection at channel c is topo[c] * activation.
  const Eigen::VectorXd activation = (dec.unmixing.row(factor) * (avg.colwise() - dec.mean)).transpose();
  const Eigen::VectorXd at_peak = topo[imax.index] * activation;

  if (activation.cwiseAbs().maxCoeff() == 0.0) {
    res.warnings.push_back(fname + ": all-zero activation, TI_max set to first sample");
    row.in_min = row.in_max = row.in_mean = 0.0;
    row.ti_max = epochs.t0_ms;
  } else {
    row.in_min = at_peak.minCoeff();
    row.in_max = at_peak.maxCoeff();
    auto tmax = extreme_index(at_peak.cwiseAbs(), [](double a, double b) { return a > b; });
    row.ti_max = epochs.t0_ms + static_cast<double>(tmax.index) * 1000.0 / epochs.fs;

    std::vector<std::size_t> mean_channels;
    if (mean_channel_set.empty()) {
      mean_channels = montage.channels_in_roi(row.roi);
    } else {
      for (const auto& c : mean_channel_set) mean_channels.push_back(montage.index_of(c));
    }
    double topo_sum = 0.0;
    for (auto c : mean_channels) topo_sum += topo[static_cast<Eigen::Index>(c)];
    row.in_mean = topo_sum / static_cast<double>(mean_channels.size()) * activation.mean();
  }

  if (auto r = pearson(topo, target_topography)) {
    row.sp_cor = *r;
  } else {
    row.sp_cor = 0.0;
    res.warnings.push_back(fname + ": SP_cor undefined (constant topography or template), set to 0");
  }

  row.event = condition.event;
  row.stim = condition.stim;
  row.mod = condition.mod;
  return res;
}

SummaryTable summarize_dataset(const FactorDecomposition& dec, const EpochTensor& epochs,
                               const SummarizeConfig& config) {
  epochs.validate();
  if (dec.n_channels() != static_cast<Eigen::Index>(epochs.n_channels()))
    throw InputError("summarize_dataset: decomposition does not match the epochs' channel space");
  SummaryTable table;
  const auto conditions = epochs.conditions();
  for (Eigen::Index f = 0; f < dec.n_factors(); ++f) {
    for (const auto& cond : conditions) {
      auto res = extract_summary(dec, epochs, f, cond, config.target_topography, config.mean_channel_set);
      table.rows.push_back(std::move(res.row));
      table.factor_of_row.push_back(f);
      table.condition_of_row.push_back(cond);
      for (auto& w : res.warnings) table.warnings.push_back(std::move(w));
    }
  }
  return table;
}

std::string summaries_to_csv(const std::vector<FactorSummary>& rows, const std::vector<std::string>& labels,
                             std::string_view label_column) {
  if (!labels.empty() && labels.size() != rows.size())
    throw InputError("summaries_to_csv: label count does not match row count");
  std::string out;
  for (std::size_t i = 0; i < kSummaryColumns.size(); ++i) {
    if (i) out += ',';
    out += kSummaryColumns[i];
  }
  if (!labels.empty()) {
    out += ',';
    out += label_column;
  }
  out += '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < kSummaryColumns.size(); ++i) {
      if (i) out += ',';
      auto text = attribute_text(rows[r], kSummaryColumns[i]);
      check_text_field(text, kSummaryColumns[i]);
      out += text;
    }
    if (!labels.empty()) {
      check_text_field(labels[r], label_column);
      out += ',' + labels[r];
    }
    out += '\n';
  }
  return out;
}

LabeledSummaries summaries_from_csv(std::string_view text, std::string_view label_column) {
  auto lines = io::split(text, '\n');
  if (lines.empty()) throw ParseError("empty summary CSV", 1);
  auto header = io::split(io::trim(lines[0]), ',');
  bool has_label = false;
  if (header.size() == kSummaryColumns.size() + 1 && header.back() == label_column) {
    has_label = true;
    header.pop_back();
  }
  if (header.size() != kSummaryColumns.size() ||
      !std::equal(header.begin(), header.end(), kSummaryColumns.begin()))
    throw ParseError("summary CSV header must be exactly " + io::join({kSummaryColumns.begin(), kSummaryColumns.end()}, ","), 1);

  LabeledSummaries out;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    auto line = io::trim(lines[ln]);
    if (line.empty()) continue;
    auto cols = io::split(line, ',');
    const auto line_no = static_cast<int>(ln + 1);
    if (cols.size() != header.size() + (has_label ? 1 : 0)) throw ParseError("wrong column count", line_no);
    FactorSummary r;
    try {
      r.sp_max = cols[0];
      r.sp_max_roi = cols[1];
      r.sp_min = cols[2];
      r.sp_min_roi = cols[3];
      r.in_min = io::parse_double(cols[4]);
      r.in_max = io::parse_double(cols[5]);
      r.in_mean = io::parse_double(cols[6]);
      r.roi = cols[7];
      r.sp_cor = io::parse_double(cols[8]);
      r.ti_max = io::parse_double(cols[9]);
      r.event = cols[10];
      r.stim = cols[11];
      r.mod = cols[12];
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
    out.rows.push_back(std::move(r));
    if (has_label) out.labels.push_back(cols.back());
  }
  return out;
}

}  // namespace nof
