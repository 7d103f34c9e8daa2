#include "rmw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace rmw {

std::size_t SurvivalDataset::num_events() const {
  return static_cast<std::size_t>(std::count(status.begin(), status.end(), 1));
}

SurvivalDataset SurvivalDataset::ungrouped(Eigen::VectorXd times, std::vector<int> status,
                                           Eigen::MatrixXd covariates,
                                           std::vector<std::string> covariate_names) {
  SurvivalDataset data;
  const auto n = static_cast<std::size_t>(times.size());
  data.times = std::move(times);
  data.status = std::move(status);
  data.covariates = std::move(covariates);
  if (covariate_names.empty()) {
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
      covariate_names.push_back(j == 0 ? "intercept" : "x" + std::to_string(j));
    }
  }
  data.covariate_names = std::move(covariate_names);
  data.unit_of_record.resize(n);
  std::iota(data.unit_of_record.begin(), data.unit_of_record.end(), std::size_t{0});
  data.unit_labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) data.unit_labels.push_back(std::to_string(i + 1));
  return data;
}

void validate(const SurvivalDataset& data) {
  std::ostringstream problems;
  const std::size_t n = data.size();
  if (n == 0) problems << "dataset is empty; ";
  if (data.status.size() != n) problems << "status has " << data.status.size() << " entries for " << n << " times; ";
  if (static_cast<std::size_t>(data.covariates.rows()) != n) {
    problems << "design matrix has " << data.covariates.rows() << " rows for " << n << " times; ";
  }
  std::vector<std::size_t> bad_times;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(data.times[static_cast<Eigen::Index>(i)] > 0.0) ||
        !std::isfinite(data.times[static_cast<Eigen::Index>(i)])) {
      bad_times.push_back(i + 1);
    }
  }
  if (!bad_times.empty()) {
    problems << "non-positive survival times at rows";
    for (auto r : bad_times) problems << ' ' << r;
    problems << "; ";
  }
  for (std::size_t i = 0; i < data.status.size(); ++i) {
    if (data.status[i] != 0 && data.status[i] != 1) {
      problems << "status at row " << i + 1 << " is " << data.status[i] << " (expected 0 or 1); ";
    }
  }
  const auto k = static_cast<std::size_t>(data.covariates.cols());
  if (k == 0) problems << "design matrix has no columns; ";
  if (n < k) problems << "n = " << n << " is smaller than k = " << k << "; ";
  if (k > 0 && static_cast<std::size_t>(data.covariates.rows()) == n && n >= k &&
      data.covariates.allFinite()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.covariates);
    if (static_cast<std::size_t>(qr.rank()) < k) {
      problems << "design matrix is rank deficient (rank " << qr.rank() << " < " << k << "); ";
    }
  } else if (!data.covariates.allFinite()) {
    problems << "design matrix has non-finite entries; ";
  }
  if (data.covariate_names.size() != k) problems << "covariate names do not match columns; ";
  if (data.unit_of_record.size() != n) {
    problems << "unit assignment has " << data.unit_of_record.size() << " entries; ";
  } else {
    std::vector<bool> seen(data.unit_labels.size(), false);
    for (auto u : data.unit_of_record) {
      if (u >= data.unit_labels.size()) {
        problems << "unit index " << u << " out of range; ";
        break;
      }
      seen[u] = true;
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) problems << "a unit has no records; ";
  }
  const auto text = problems.str();
  if (!text.empty()) throw PreconditionError("invalid survival dataset: " + text.substr(0, text.size() - 2));
}

UnitIndex::UnitIndex(const SurvivalDataset& data)
    : records(data.num_units()), events(data.num_units(), 0) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto u = data.unit_of_record[i];
    records[u].push_back(i);
    events[u] += data.status[i];
  }
}

SurvivalDataset subset(const SurvivalDataset& data, const std::vector<std::size_t>& records) {
  SurvivalDataset out;
  const auto m = static_cast<Eigen::Index>(records.size());
  out.times.resize(m);
  out.covariates.resize(m, data.covariates.cols());
  out.covariate_names = data.covariate_names;
  std::map<std::size_t, std::size_t> renumber;
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = records[static_cast<std::size_t>(r)];
    out.times[r] = data.times[static_cast<Eigen::Index>(i)];
    out.status.push_back(data.status[i]);
    out.covariates.row(r) = data.covariates.row(static_cast<Eigen::Index>(i));
    const auto u = data.unit_of_record[i];
    auto [it, inserted] = renumber.emplace(u, out.unit_labels.size());
    if (inserted) out.unit_labels.push_back(data.unit_labels[u]);
    out.unit_of_record.push_back(it->second);
  }
  return out;
}

}  // namespace rmw
