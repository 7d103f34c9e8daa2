#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "rmw/io.hpp"

namespace rmw {

namespace {

using nlohmann::json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Depends only on the run seed and the cell identity, so a cell draws the
// same numbers whatever the worker count or cell order.
std::uint64_t cell_seed(std::uint64_t seed, const std::string& label, double expected_cv, bool classical) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : label) h = (h ^ ch) * 1099511628211ULL;
  std::uint64_t bits = 0;
  std::memcpy(&bits, &expected_cv, sizeof bits);
  return splitmix64(seed ^ splitmix64(h ^ splitmix64(bits + (classical ? 1 : 0))));
}

std::string slug(const std::string& label, std::optional<double> expected_cv) {
  std::string s;
  for (char ch : label) s += std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' ? ch : '_';
  if (expected_cv) s += "_ecv" + format_number(*expected_cv);
  return s;
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

json plan_json(const RunPlan& p) {
  return {{"total_iterations", p.total_iterations}, {"burn_in_fraction", p.burn_in_fraction},
          {"thin", p.thin}, {"target_acceptance", p.target_acceptance},
          {"adaptation_window", p.adaptation_window}, {"retained", p.retained()}};
}

void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t threads) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) tasks[i]();
  };
  const std::size_t n = std::min(threads, tasks.size());
  if (n <= 1) {
    worker();
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_densities(const std::filesystem::path& path, const PosteriorDraws& draws) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  const auto k = draws.draws.front().beta.size();
  for (Eigen::Index j = 0; j < k; ++j) {
    std::vector<double> v;
    for (const auto& d : draws.draws) v.push_back(d.beta[j]);
    cols.emplace_back(static_cast<std::size_t>(j) < draws.beta_names.size() ? draws.beta_names[static_cast<std::size_t>(j)]
                                                                             : "beta" + std::to_string(j),
                      std::move(v));
  }
  if (draws.gamma_free) {
    std::vector<double> v;
    for (const auto& d : draws.draws) v.push_back(d.gamma);
    cols.emplace_back("gamma", std::move(v));
  }
  if (has_theta(draws.family)) {
    std::vector<double> v;
    for (const auto& d : draws.draws) v.push_back(d.theta);
    cols.emplace_back("theta", std::move(v));
  }
  auto out = open_out(path);
  out << "parameter,x,density\n";
  constexpr int bins = 60;
  for (const auto& [name, v] : cols) {
    const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
    const double lo = *lo_it;
    const double width = (*hi_it - lo) / bins;
    if (!(width > 0.0)) continue;
    std::vector<double> counts(bins, 0.0);
    for (double x : v) counts[std::min(bins - 1, static_cast<int>((x - lo) / width))] += 1.0;
    for (int b = 0; b < bins; ++b) {
      out << name << ',' << format_number(lo + (b + 0.5) * width) << ','
          << format_number(counts[b] / (static_cast<double>(v.size()) * width)) << '\n';
    }
  }
}

BayesCellResult run_bayes_cell(const SurvivalDataset& data, const RunConfig& cfg, const ModelEntry& m,
                               double ecv, const std::string& sha1) {
  BayesCellResult r;
  r.label = m.label;
  r.family = m.family;
  r.gamma_fixed = m.gamma_fixed;
  r.expected_cv = ecv;
  r.seed = cell_seed(cfg.seed, m.label, ecv, false);
  try {
    const ModelSpec spec{m.label, m.family, m.gamma_fixed, ecv};
    RunPlan plan = cfg.plan;
    plan.seed = r.seed;
    const PosteriorDraws draws = run(data, spec, plan);
    const auto dir = cfg.output_dir / "cells" / slug(m.label, has_theta(m.family) ? std::optional(ecv) : std::nullopt);
    std::filesystem::create_directories(dir);
    write_draws(dir, draws, DrawsMeta{m.label, ecv, m.gamma_fixed, r.seed, plan, cfg.dataset_path, sha1});
    write_densities(dir / "densities.csv", draws);
    r.draws_file = dir / "draws.csv";
    r.summaries = summarize(draws, cfg.hpd_mass);
    r.dic = dic(draws, data);
    r.cpo = cpo(draws);
    r.r_cv = r_cv_posterior(draws, cfg.hpd_mass);
    r.r_cv.values.clear();
    r.outliers = outlier_bf(draws, data, reference_rate(draws));
    r.acceptance = draws.acceptance;
    if (cfg.bayes_factors) {
      if (m.family == MixingFamily::None && m.gamma_fixed && *m.gamma_fixed == 1.0) {
        r.log_bf_vs_exponential = PathSamplingResult{};
      } else {
        const ModelSpec reference{"exponential", MixingFamily::None, 1.0, ecv};
        PathSamplingPlan ps = cfg.path_sampling;
        ps.seed = splitmix64(r.seed);
        std::optional<ParameterPoint> start = posterior_median(draws);
        const PriorBundle priors(m.family, ecv);
        if (has_theta(m.family) && !(priors.log_prior_theta_given_gamma(start->theta, start->gamma) > -1e300)) {
          start.reset();
        }
        r.log_bf_vs_exponential = model_switch_log_bf(data, reference, spec, ps, start);
      }
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

ClassicalCellResult run_classical_cell(const SurvivalDataset& data, const RunConfig& cfg, const ModelEntry& m) {
  ClassicalCellResult r;
  r.label = m.label;
  r.family = m.family;
  r.gamma_fixed = m.gamma_fixed;
  try {
    MleOptions opt;
    opt.seed = cell_seed(cfg.seed, m.label, 0.0, true);
    r.fit = fit_aft_mle(data, m.family, m.gamma_fixed, opt);
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

const BayesCellResult* find_reference(const RunResults& res, const BayesCellResult& cell) {
  const BayesCellResult* any = nullptr;
  for (const auto& c : res.bayes) {
    if (c.label != res.config.reference_label || c.error) continue;
    if (c.expected_cv == cell.expected_cv) return &c;
    if (!any) any = &c;
  }
  return any;
}

}  // namespace

void write_draws(const std::filesystem::path& dir, const PosteriorDraws& draws, const DrawsMeta& meta) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "draws.csv");
    out << "iteration";
    for (const auto& n : draws.beta_names) out << ',' << n;
    out << ",gamma,theta,loglik\n";
    for (std::size_t s = 0; s < draws.size(); ++s) {
      const auto& d = draws.draws[s];
      out << draws.iterations[s];
      for (Eigen::Index j = 0; j < d.beta.size(); ++j) out << ',' << format_number(d.beta[j]);
      out << ',' << format_number(d.gamma) << ',' << format_number(d.theta) << ','
          << format_number(draws.per_draw_loglik[s]) << '\n';
    }
    if (!out) throw std::runtime_error("failed writing draws to " + dir.string());
  }
  const json doc = {{"label", meta.label},
                    {"family", std::string(to_string(draws.family))},
                    {"expected_cv", meta.expected_cv},
                    {"gamma_fixed", optional_number(meta.gamma_fixed)},
                    {"seed", meta.seed},
                    {"plan", plan_json(meta.plan)},
                    {"draws", draws.size()},
                    {"dataset", {{"path", meta.dataset_path.string()}, {"git_sha1", meta.dataset_sha1}}}};
  auto out = open_out(dir / "draws.meta.json");
  out << doc.dump(2) << '\n';
}

RunResults run_cells(const RunConfig& config) {
  config.validate();
  RunResults res;
  res.config = config;
  const SurvivalDataset data = load_dataset(config.dataset_path, config.schema);
  res.dataset_sha1 = file_git_sha1(config.dataset_path);
  res.records = data.size();
  res.units = data.num_units();

  std::optional<std::size_t> group;
  if (config.diagnostic_group) {
    const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), *config.diagnostic_group);
    if (it == data.covariate_names.end()) {
      throw std::invalid_argument("diagnostic group '" + *config.diagnostic_group + "' is not a covariate");
    }
    group = static_cast<std::size_t>(it - data.covariate_names.begin());
  }
  res.diagnostics = km_and_cloglog(data, group);

  std::vector<std::function<void()>> tasks;
  const bool bayes = config.track != Track::Classical;
  const bool classical = config.track != Track::Bayes;
  // Slots are sized up front so workers write to distinct elements.
  std::vector<std::pair<const ModelEntry*, double>> bayes_cells;
  std::vector<const ModelEntry*> classical_cells;
  for (const auto& m : config.models) {
    if (config.only_label && m.label != *config.only_label) continue;
    if (bayes) {
      for (double e : m.expected_cv) {
        if (config.only_expected_cv && e != *config.only_expected_cv) continue;
        bayes_cells.emplace_back(&m, e);
        if (!has_theta(m.family)) break;  // the prior on theta is absent; E(cv) values coincide
      }
    }
    if (classical) classical_cells.push_back(&m);
  }
  if (bayes_cells.empty() && classical_cells.empty()) throw std::invalid_argument("no cells selected");
  std::filesystem::create_directories(config.output_dir);
  res.bayes.resize(bayes_cells.size());
  res.classical.resize(classical_cells.size());
  for (std::size_t i = 0; i < bayes_cells.size(); ++i) {
    tasks.emplace_back([&, i] {
      res.bayes[i] = run_bayes_cell(data, config, *bayes_cells[i].first, bayes_cells[i].second, res.dataset_sha1);
    });
  }
  for (std::size_t i = 0; i < classical_cells.size(); ++i) {
    tasks.emplace_back([&, i] { res.classical[i] = run_classical_cell(data, config, *classical_cells[i]); });
  }
  run_parallel(tasks, config.threads);
  return res;
}

void export_report(const RunResults& res) {
  const auto& cfg = res.config;
  std::filesystem::create_directories(cfg.output_dir);
  json report;
  report["dataset"] = {{"path", cfg.dataset_path.string()},
                       {"git_sha1", res.dataset_sha1},
                       {"records", res.records},
                       {"units", res.units}};
  report["seed"] = cfg.seed;
  report["track"] = std::string(to_string(cfg.track));
  report["plan"] = plan_json(cfg.plan);
  report["hpd_mass"] = cfg.hpd_mass;
  report["reference"] = cfg.reference_label;

  auto comparison = open_out(cfg.output_dir / "comparison_table.csv");
  comparison << "model,expected_cv,track,parameter,estimate,lower,upper,interval\n";
  auto dic_table = open_out(cfg.output_dir / "dic_table.csv");
  dic_table << "model,expected_cv,dic,p_d,mean_deviance,plugin_deviance\n";
  auto model_cmp = open_out(cfg.output_dir / "model_comparison.csv");
  model_cmp << "model,expected_cv,log_bf_vs_exponential,log_bf_mc_se,log_bf_vs_reference,log_pseudo_marginal,"
               "log_psbf_vs_reference,r_cv_median,r_cv_lower,r_cv_upper\n";
  auto outliers = open_out(cfg.output_dir / "outlier_bf.csv");
  outliers << "model,expected_cv,unit,lambda_ref,bf01\n";

  json bayes = json::array();
  for (const auto& c : res.bayes) {
    json cell = {{"label", c.label},
                 {"family", std::string(to_string(c.family))},
                 {"gamma_fixed", optional_number(c.gamma_fixed)},
                 {"expected_cv", c.expected_cv},
                 {"seed", c.seed}};
    if (c.error) {
      cell["error"] = *c.error;
      bayes.push_back(std::move(cell));
      continue;
    }
    const std::string ecv = format_number(c.expected_cv);
    cell["draws_file"] = c.draws_file.string();
    json params = json::array();
    for (const auto& s : c.summaries) {
      params.push_back({{"name", s.name}, {"median", number(s.median)}, {"mean", number(s.mean)},
                        {"sd", number(s.sd)}, {"hpd_lower", number(s.hpd.lower)}, {"hpd_upper", number(s.hpd.upper)}});
      comparison << c.label << ',' << ecv << ",bayes," << s.name << ',' << format_number(s.median) << ','
                 << format_number(s.hpd.lower) << ',' << format_number(s.hpd.upper) << ",hpd\n";
    }
    cell["parameters"] = std::move(params);
    cell["dic"] = {{"dic", number(c.dic.dic)}, {"p_d", number(c.dic.p_d)},
                   {"mean_deviance", number(c.dic.mean_deviance)}, {"plugin_deviance", number(c.dic.plugin_deviance)}};
    dic_table << c.label << ',' << ecv << ',' << format_number(c.dic.dic) << ',' << format_number(c.dic.p_d) << ','
              << format_number(c.dic.mean_deviance) << ',' << format_number(c.dic.plugin_deviance) << '\n';
    cell["log_pseudo_marginal"] = number(c.cpo.log_pseudo_marginal);
    cell["cpo_flagged_units"] = c.cpo.flagged;

    const BayesCellResult* ref = find_reference(res, c);
    std::optional<double> bf_ref;
    std::optional<double> psbf_ref;
    if (ref) {
      psbf_ref = log_psbf(c.cpo, ref->cpo);
      if (c.log_bf_vs_exponential && ref->log_bf_vs_exponential) {
        bf_ref = c.log_bf_vs_exponential->log_bf - ref->log_bf_vs_exponential->log_bf;
      }
    }
    if (c.log_bf_vs_exponential) {
      cell["log_bf_vs_exponential"] = {{"value", number(c.log_bf_vs_exponential->log_bf)},
                                       {"mc_se", number(c.log_bf_vs_exponential->mc_se)}};
    }
    cell["log_bf_vs_reference"] = optional_number(bf_ref);
    cell["log_psbf_vs_reference"] = optional_number(psbf_ref);
    cell["r_cv"] = {{"median", number(c.r_cv.median)}, {"hpd_lower", number(c.r_cv.hpd.lower)},
                    {"hpd_upper", number(c.r_cv.hpd.upper)}, {"draws_used", c.r_cv.used},
                    {"draws_excluded", c.r_cv.excluded}};
    json bf = json::array();
    for (double b : c.outliers.bf) bf.push_back(number(b));
    cell["outlier_bf"] = {{"lambda_ref", number(c.outliers.lambda_ref)}, {"bf01", std::move(bf)},
                          {"trimmed", c.outliers.trimmed}, {"warnings", c.outliers.warnings}};
    for (std::size_t u = 0; u < c.outliers.bf.size(); ++u) {
      outliers << c.label << ',' << ecv << ',' << u + 1 << ',' << format_number(c.outliers.lambda_ref) << ','
               << format_number(c.outliers.bf[u]) << '\n';
    }
    cell["acceptance"] = {{"beta", c.acceptance.beta}, {"gamma", number(c.acceptance.gamma)},
                          {"theta", number(c.acceptance.theta)}, {"lambda", number(c.acceptance.lambda)}};
    auto opt_str = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    model_cmp << c.label << ',' << ecv << ','
              << (c.log_bf_vs_exponential ? format_number(c.log_bf_vs_exponential->log_bf) : "") << ','
              << (c.log_bf_vs_exponential ? format_number(c.log_bf_vs_exponential->mc_se) : "") << ','
              << opt_str(bf_ref) << ',' << format_number(c.cpo.log_pseudo_marginal) << ',' << opt_str(psbf_ref) << ','
              << format_number(c.r_cv.median) << ',' << format_number(c.r_cv.hpd.lower) << ','
              << format_number(c.r_cv.hpd.upper) << '\n';
    bayes.push_back(std::move(cell));
  }
  report["bayes"] = std::move(bayes);

  json classical = json::array();
  for (const auto& c : res.classical) {
    json cell = {{"label", c.label},
                 {"family", std::string(to_string(c.family))},
                 {"gamma_fixed", optional_number(c.gamma_fixed)}};
    if (c.error) {
      cell["error"] = *c.error;
      classical.push_back(std::move(cell));
      continue;
    }
    const auto& f = c.fit;
    json params = json::array();
    for (std::size_t i = 0; i < f.names.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      params.push_back({{"name", f.names[i]}, {"estimate", number(f.estimates[r])},
                        {"se", number(f.standard_errors[r])}, {"ci_lower", number(f.ci[i].lower)},
                        {"ci_upper", number(f.ci[i].upper)}});
      comparison << c.label << ",,classical," << f.names[i] << ',' << format_number(f.estimates[r]) << ','
                 << format_number(f.ci[i].lower) << ',' << format_number(f.ci[i].upper) << ",wald\n";
    }
    if (f.frailty_variance) {
      const Interval ci = f.frailty_variance_ci.value_or(Interval{std::nan(""), std::nan("")});
      comparison << c.label << ",,classical,frailty_variance," << format_number(*f.frailty_variance) << ','
                 << format_number(ci.lower) << ',' << format_number(ci.upper) << ",wald\n";
    }
    cell["parameters"] = std::move(params);
    cell["loglik"] = number(f.loglik);
    cell["converged"] = f.converged;
    cell["iterations"] = f.iterations;
    cell["boundary"] = f.boundary;
    cell["frailty_variance"] = optional_number(f.frailty_variance);
    if (f.frailty_variance_ci) {
      cell["frailty_variance_ci"] = {number(f.frailty_variance_ci->lower), number(f.frailty_variance_ci->upper)};
    }
    cell["warnings"] = f.warnings;
    classical.push_back(std::move(cell));
  }
  report["classical"] = std::move(classical);
  report["diagnostics"] = {{"series", res.diagnostics.series.size()}, {"warnings", res.diagnostics.warnings}};
  {
    auto diag = open_out(cfg.output_dir / "diagnostics.csv");
    write_series_csv(diag, res.diagnostics.series);
  }
  auto out = open_out(cfg.output_dir / "report.json");
  out << report.dump(2) << '\n';
  if (!out || !comparison || !dic_table || !model_cmp || !outliers) {
    throw std::runtime_error("failed writing reports under " + cfg.output_dir.string());
  }
}

int orchestrate(const RunConfig& config) {
  const RunResults res = run_cells(config);
  try {
    export_report(res);
  } catch (const std::exception&) {
    return 2;
  }
  return res.any_failed() ? 1 : 0;
}

}  // namespace rmw
