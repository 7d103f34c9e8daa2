#include "rmw/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>
#include <openssl/evp.h>

#include "rmw/heterogeneity.hpp"

namespace rmw {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(field));
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  out.push_back(std::move(field));
  return out;
}

double parse_double(const std::string& text, std::size_t row, const std::string& column) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE) {
    throw PreconditionError("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                            "' is not a number");
  }
  return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw PreconditionError("column '" + name + "' not found in header");
  return static_cast<std::size_t>(it - header.begin());
}

}  // namespace

SurvivalDataset parse_dataset(std::istream& in, const DatasetSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw PreconditionError("dataset has no header line");
  const auto header = split_line(line, schema.delimiter);
  const auto time_col = column_index(header, schema.time_column);
  const auto status_col = column_index(header, schema.status_column);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : schema.covariates) cov_cols.push_back(column_index(header, c.column));
  std::optional<std::size_t> group_col;
  if (schema.group_column) group_col = column_index(header, *schema.group_column);

  std::vector<double> times;
  std::vector<int> status;
  std::vector<std::vector<double>> cov_rows;
  std::vector<std::string> groups;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw PreconditionError("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                              " fields, header has " + std::to_string(header.size()));
    }
    times.push_back(parse_double(fields[time_col], row, schema.time_column));
    const double s = parse_double(fields[status_col], row, schema.status_column);
    status.push_back(s == std::floor(s) && std::abs(s) < 1e9 ? static_cast<int>(s) : -1);
    std::vector<double> x;
    for (std::size_t j = 0; j < cov_cols.size(); ++j) {
      const auto& c = schema.covariates[j];
      const auto& f = fields[cov_cols[j]];
      x.push_back(c.level ? (f == *c.level ? 1.0 : 0.0) : parse_double(f, row, c.column));
    }
    cov_rows.push_back(std::move(x));
    groups.push_back(group_col ? fields[*group_col] : std::to_string(row));
  }

  const auto n = times.size();
  const auto k = schema.covariates.size() + 1;
  SurvivalDataset data;
  data.times = Eigen::Map<const Eigen::VectorXd>(times.data(), static_cast<Eigen::Index>(n));
  data.status = std::move(status);
  data.covariates.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    data.covariates(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 1; j < k; ++j) {
      data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cov_rows[i][j - 1];
    }
  }
  data.covariate_names.push_back("intercept");
  for (const auto& c : schema.covariates) {
    data.covariate_names.push_back(!c.name.empty() ? c.name : (c.level ? c.column + "=" + *c.level : c.column));
  }
  std::map<std::string, std::size_t> unit_ids;
  for (const auto& g : groups) {
    const auto [it, inserted] = unit_ids.emplace(g, data.unit_labels.size());
    if (inserted) data.unit_labels.push_back(g);
    data.unit_of_record.push_back(it->second);
  }
  validate(data);
  return data;
}

SurvivalDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open dataset " + path.string());
  return parse_dataset(in, schema);
}

void write_dataset(std::ostream& out, const SurvivalDataset& data) {
  out << "time,status";
  for (std::size_t j = 1; j < data.num_covariates(); ++j) out << ',' << data.covariate_names[j];
  out << ",unit\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << format_number(data.times[r]) << ',' << data.status[i];
    for (Eigen::Index j = 1; j < data.covariates.cols(); ++j) out << ',' << format_number(data.covariates(r, j));
    out << ',' << data.unit_labels[data.unit_of_record[i]] << '\n';
  }
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string git_blob_sha1(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + '\0';
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("git_blob_sha1: EVP context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("git_blob_sha1: digest failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

std::string file_git_sha1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_sha1(buf.str());
}

DiagnosticsResult km_and_cloglog(const SurvivalDataset& data, std::optional<std::size_t> group_covariate) {
  if (group_covariate && *group_covariate >= data.num_covariates()) {
    throw std::invalid_argument("km_and_cloglog: group column out of range");
  }
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double key = group_covariate
                           ? data.covariates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(*group_covariate))
                           : 0.0;
    groups[key].push_back(i);
  }
  DiagnosticsResult out;
  for (auto& [key, idx] : groups) {
    const std::string name = group_covariate ? data.covariate_names[*group_covariate] + "=" + format_number(key) : "all";
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return data.times[static_cast<Eigen::Index>(a)] < data.times[static_cast<Eigen::Index>(b)];
    });
    DiagnosticSeries km{"km:" + name, {}, {}};
    DiagnosticSeries cl{"cloglog:" + name, {}, {}};
    double surv = 1.0;
    std::size_t at_risk = idx.size();
    std::size_t pos = 0;
    while (pos < idx.size()) {
      const double t = data.times[static_cast<Eigen::Index>(idx[pos])];
      std::size_t events = 0;
      std::size_t tied = 0;
      while (pos + tied < idx.size() && data.times[static_cast<Eigen::Index>(idx[pos + tied])] == t) {
        events += static_cast<std::size_t>(data.status[idx[pos + tied]] == 1);
        ++tied;
      }
      if (events > 0) {
        surv *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
        km.x.push_back(t);
        km.y.push_back(surv);
        if (surv > 0.0 && surv < 1.0) {
          cl.x.push_back(std::log(t));
          cl.y.push_back(std::log(-std::log(surv)));
        }
      }
      at_risk -= tied;
      pos += tied;
    }
    if (km.x.empty()) {
      out.warnings.push_back("group " + name + " has no events; series omitted");
      continue;
    }
    out.series.push_back(std::move(km));
    out.series.push_back(std::move(cl));
  }
  return out;
}

void write_series_csv(std::ostream& out, const std::vector<DiagnosticSeries>& series) {
  out << "label,x,y\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      out << s.label << ',' << format_number(s.x[i]) << ',' << format_number(s.y[i]) << '\n';
    }
  }
}

Track parse_track(std::string_view name) {
  if (name == "bayes") return Track::Bayes;
  if (name == "classical") return Track::Classical;
  if (name == "both") return Track::Both;
  throw std::invalid_argument("unknown track '" + std::string(name) + "' (expected bayes, classical or both)");
}

std::string_view to_string(Track track) {
  switch (track) {
    case Track::Bayes: return "bayes";
    case Track::Classical: return "classical";
    case Track::Both: return "both";
  }
  return "both";
}

void RunConfig::validate() const {
  if (models.empty()) throw std::invalid_argument("config: at least one model is required");
  std::set<std::string> labels;
  for (const auto& m : models) {
    if (m.label.empty()) throw std::invalid_argument("config: every model needs a label");
    if (!labels.insert(m.label).second) throw std::invalid_argument("config: duplicate model label " + m.label);
    if (m.expected_cv.empty()) throw std::invalid_argument("config: model " + m.label + " has no E(cv) values");
    if (m.gamma_fixed && !(*m.gamma_fixed > 0.0)) {
      throw std::invalid_argument("config: model " + m.label + " has a non-positive gamma");
    }
    for (double e : m.expected_cv) {
      const double floor = m.gamma_fixed ? cv_weibull(*m.gamma_fixed) : 1.0;
      if (has_theta(m.family) && !(e > floor)) {
        throw std::invalid_argument("config: model " + m.label + " needs E(cv) > " + format_number(floor));
      }
    }
  }
  if (!reference_label.empty() && !labels.count(reference_label)) {
    throw std::invalid_argument("config: reference model '" + reference_label + "' is not listed");
  }
  if (!(hpd_mass > 0.0 && hpd_mass <= 1.0)) throw std::invalid_argument("config: hpd_mass must lie in (0, 1]");
  if (threads == 0) throw std::invalid_argument("config: threads must be at least 1");
  plan.validate();
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  const json doc = json::parse(json_text);
  static const std::set<std::string> known{"dataset", "models", "run_plan", "output_dir", "seed", "track",
                                           "hpd_mass", "bayes_factors", "path_sampling", "reference",
                                           "diagnostic_group", "threads"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  RunConfig cfg;
  const json& ds = doc.at("dataset");
  std::filesystem::path p = ds.at("path").get<std::string>();
  cfg.dataset_path = p.is_absolute() ? p : base_dir / p;
  cfg.schema.time_column = ds.value("time", std::string("time"));
  cfg.schema.status_column = ds.value("status", std::string("status"));
  if (ds.contains("group") && !ds["group"].is_null()) cfg.schema.group_column = ds["group"].get<std::string>();
  if (ds.contains("delimiter")) {
    const auto d = ds["delimiter"].get<std::string>();
    if (d.size() != 1) throw std::invalid_argument("config: delimiter must be one character");
    cfg.schema.delimiter = d[0];
  }
  for (const auto& c : ds.value("covariates", json::array())) {
    CovariateColumn col;
    col.column = c.at("column").get<std::string>();
    if (c.contains("level") && !c["level"].is_null()) col.level = c["level"].get<std::string>();
    col.name = c.value("name", std::string());
    cfg.schema.covariates.push_back(std::move(col));
  }
  for (const auto& m : doc.at("models")) {
    ModelEntry e;
    e.label = m.at("label").get<std::string>();
    e.family = parse_mixing_family(m.at("family").get<std::string>());
    if (m.contains("gamma_fixed") && !m["gamma_fixed"].is_null()) e.gamma_fixed = m["gamma_fixed"].get<double>();
    if (m.contains("expected_cv")) {
      const auto& v = m["expected_cv"];
      e.expected_cv = v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
    }
    cfg.models.push_back(std::move(e));
  }
  if (doc.contains("run_plan")) {
    const json& rp = doc["run_plan"];
    cfg.plan.total_iterations = rp.value("total_iterations", cfg.plan.total_iterations);
    cfg.plan.burn_in_fraction = rp.value("burn_in_fraction", cfg.plan.burn_in_fraction);
    cfg.plan.thin = rp.value("thin", cfg.plan.thin);
    cfg.plan.target_acceptance = rp.value("target_acceptance", cfg.plan.target_acceptance);
    cfg.plan.adaptation_window = rp.value("adaptation_window", cfg.plan.adaptation_window);
  }
  if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
  cfg.seed = doc.value("seed", cfg.seed);
  if (doc.contains("track")) cfg.track = parse_track(doc["track"].get<std::string>());
  cfg.hpd_mass = doc.value("hpd_mass", cfg.hpd_mass);
  cfg.bayes_factors = doc.value("bayes_factors", cfg.bayes_factors);
  if (doc.contains("path_sampling")) {
    const json& ps = doc["path_sampling"];
    cfg.path_sampling.temperatures = ps.value("temperatures", cfg.path_sampling.temperatures);
    cfg.path_sampling.spacing_exponent = ps.value("spacing_exponent", cfg.path_sampling.spacing_exponent);
    cfg.path_sampling.burn_in = ps.value("burn_in", cfg.path_sampling.burn_in);
    cfg.path_sampling.samples = ps.value("samples", cfg.path_sampling.samples);
  }
  cfg.reference_label = doc.value("reference", std::string());
  if (doc.contains("diagnostic_group") && !doc["diagnostic_group"].is_null()) {
    cfg.diagnostic_group = doc["diagnostic_group"].get<std::string>();
  }
  cfg.threads = doc.value("threads", cfg.threads);
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path.parent_path());
}

bool RunResults::any_failed() const {
  return std::any_of(bayes.begin(), bayes.end(), [](const auto& c) { return c.error.has_value(); }) ||
         std::any_of(classical.begin(), classical.end(), [](const auto& c) { return c.error.has_value(); });
}

}  // namespace rmw
