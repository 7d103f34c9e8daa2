#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rmw {

// A dataset violating a precondition of inference (non-positive times, rank
// deficient design, malformed censoring indicators).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Right-censored survival data. Each record belongs to a unit that carries
// one latent rate; without grouping every record is its own unit.
struct SurvivalDataset {
  Eigen::VectorXd times;
  std::vector<int> status;  // 1 = event observed, 0 = right-censored
  Eigen::MatrixXd covariates;  // n x k, first column the intercept
  std::vector<std::string> covariate_names;
  std::vector<std::size_t> unit_of_record;
  std::vector<std::string> unit_labels;

  std::size_t size() const { return static_cast<std::size_t>(times.size()); }
  std::size_t num_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
  std::size_t num_units() const { return unit_labels.size(); }
  std::size_t num_events() const;

  // Builds the dataset with one unit per record.
  static SurvivalDataset ungrouped(Eigen::VectorXd times, std::vector<int> status,
                                   Eigen::MatrixXd covariates,
                                   std::vector<std::string> covariate_names = {});
};

// Throws PreconditionError naming every violation: zero or negative times
// (listing row numbers, 1-based), status outside {0,1}, n < k or a design
// matrix without full column rank, inconsistent unit assignment.
void validate(const SurvivalDataset& data);

// Records grouped by unit, precomputed once for the samplers.
struct UnitIndex {
  std::vector<std::vector<std::size_t>> records;
  std::vector<int> events;

  explicit UnitIndex(const SurvivalDataset& data);
};

// Keeps the selected records (in order) and renumbers units.
SurvivalDataset subset(const SurvivalDataset& data, const std::vector<std::size_t>& records);

}  // namespace rmw
