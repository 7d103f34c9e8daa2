#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rmw/assessment.hpp"
#include "rmw/dataset.hpp"
#include "rmw/frailty.hpp"
#include "rmw/gibbs.hpp"
#include "rmw/model.hpp"
#include "rmw/path_sampling.hpp"

namespace rmw {

// A covariate taken from a column, either numerically or as the indicator
// (value == level).
struct CovariateColumn {
  std::string column;
  std::optional<std::string> level;
  std::string name;  // defaults to "column" or "column=level"
};

struct DatasetSchema {
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<CovariateColumn> covariates;
  std::optional<std::string> group_column;  // records sharing a value share a rate
  char delimiter = ',';
};

// Header-bearing delimited text; quoted fields are unquoted. An intercept
// column is prepended. Throws PreconditionError via validate().
SurvivalDataset parse_dataset(std::istream& in, const DatasetSchema& schema);
SurvivalDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema);
// Writes time, status, the non-intercept covariates and the unit label.
void write_dataset(std::ostream& out, const SurvivalDataset& data);

// %.17g, or "nan"/"inf" spelled out.
std::string format_number(double value);

// SHA-1 of "blob <size>\0" + content, as git hashes file contents.
std::string git_blob_sha1(std::string_view content);
std::string file_git_sha1(const std::filesystem::path& path);

struct DiagnosticSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct DiagnosticsResult {
  std::vector<DiagnosticSeries> series;
  std::vector<std::string> warnings;
};

// Kaplan-Meier step values at the distinct event times of each group
// ("km:<group>"), and log(-log S) against log t where 0 < S < 1
// ("cloglog:<group>"). Groups are the distinct values of covariate column
// `group_covariate`; without one the whole sample is a single group "all".
// Groups without events are skipped with a warning.
DiagnosticsResult km_and_cloglog(const SurvivalDataset& data,
                                 std::optional<std::size_t> group_covariate = std::nullopt);
void write_series_csv(std::ostream& out, const std::vector<DiagnosticSeries>& series);

enum class Track { Bayes, Classical, Both };
Track parse_track(std::string_view name);
std::string_view to_string(Track track);

struct ModelEntry {
  std::string label;
  MixingFamily family = MixingFamily::None;
  std::optional<double> gamma_fixed;
  std::vector<double> expected_cv{2.0};  // one Bayesian cell per value
};

struct RunConfig {
  std::filesystem::path dataset_path;
  DatasetSchema schema;
  std::vector<ModelEntry> models;
  RunPlan plan = RunPlan::desk();
  std::filesystem::path output_dir = "rmw_out";
  std::uint64_t seed = 20170101;
  Track track = Track::Both;
  double hpd_mass = 0.95;
  // Bayes factors against the exponential model by path sampling.
  bool bayes_factors = true;
  PathSamplingPlan path_sampling;
  // BF and PsBF are reported relative to this model label.
  std::string reference_label;
  std::optional<std::string> diagnostic_group;  // covariate name for KM groups
  std::size_t threads = 1;

  // Restrict to one model label and/or E(cv) (the "fit" verb).
  std::optional<std::string> only_label;
  std::optional<double> only_expected_cv;

  // Throws std::invalid_argument.
  void validate() const;
};

// Relative paths in the document resolve against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct BayesCellResult {
  std::string label;
  MixingFamily family = MixingFamily::None;
  std::optional<double> gamma_fixed;
  double expected_cv = 2.0;
  std::uint64_t seed = 0;
  std::vector<ParameterSummary> summaries;
  DicResult dic;
  CpoResult cpo;
  std::optional<PathSamplingResult> log_bf_vs_exponential;
  RcvSummary r_cv;
  OutlierReport outliers;
  AcceptanceRates acceptance;
  std::filesystem::path draws_file;
  std::optional<std::string> error;
};

struct ClassicalCellResult {
  std::string label;
  MixingFamily family = MixingFamily::None;
  std::optional<double> gamma_fixed;
  MleFit fit;
  std::optional<std::string> error;
};

struct RunResults {
  RunConfig config;
  std::string dataset_sha1;
  std::size_t records = 0;
  std::size_t units = 0;
  std::vector<BayesCellResult> bayes;
  std::vector<ClassicalCellResult> classical;
  DiagnosticsResult diagnostics;

  bool any_failed() const;
};

struct DrawsMeta {
  std::string label;
  double expected_cv = 2.0;
  std::optional<double> gamma_fixed;
  std::uint64_t seed = 0;
  RunPlan plan;
  std::filesystem::path dataset_path;
  std::string dataset_sha1;
};

// Writes draws.csv (iteration, betas, gamma, theta, loglik) and the
// draws.meta.json sidecar into `dir`.
void write_draws(const std::filesystem::path& dir, const PosteriorDraws& draws, const DrawsMeta& meta);

// Runs every configured cell. Cells run on config.threads workers; a cell
// that throws is recorded with its error and the others continue.
RunResults run_cells(const RunConfig& config);

// report.json, comparison_table.csv, dic_table.csv, model_comparison.csv and
// diagnostics.csv under config.output_dir. Throws std::runtime_error when a
// file cannot be written.
void export_report(const RunResults& results);

// run_cells + export_report; 0 on success, 1 if any cell failed, 2 if the
// report could not be written.
int orchestrate(const RunConfig& config);

}  // namespace rmw
