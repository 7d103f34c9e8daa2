// rmwfit: fit, compare and diagnose rate-mixture Weibull AFT models.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "rmw/distributions.hpp"
#include "rmw/io.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> track;
  bool paper_scale = false;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "override the run seed");
  cmd->add_option("--track", c.track, "bayes, classical or both")
      ->check(CLI::IsMember({"bayes", "classical", "both"}));
  cmd->add_flag("--paper-scale", c.paper_scale, "600,000 iterations, 25% burn-in, 9,000 retained draws");
  cmd->add_option("--out", c.out, "output directory");
}

std::size_t env_threads() {
  const char* v = std::getenv("RMW_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  const long n = std::strtol(v, nullptr, 10);
  return n > 0 ? static_cast<std::size_t>(n) : 1;
}

rmw::RunConfig resolve(const Common& c) {
  rmw::RunConfig cfg = rmw::load_run_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.track) cfg.track = rmw::parse_track(*c.track);
  if (c.paper_scale) cfg.plan = rmw::RunPlan::paper_scale();
  if (c.out) cfg.output_dir = *c.out;
  cfg.threads = env_threads();
  cfg.validate();
  return cfg;
}

int run_and_report(const rmw::RunConfig& cfg) {
  const rmw::RunResults res = rmw::run_cells(cfg);
  try {
    rmw::export_report(res);
  } catch (const std::exception& e) {
    std::cerr << "rmwfit: " << e.what() << '\n';
    return 2;
  }
  for (const auto& c : res.bayes) {
    if (c.error) std::cerr << "bayes cell " << c.label << " (E(cv)=" << c.expected_cv << ") failed: " << *c.error << '\n';
  }
  for (const auto& c : res.classical) {
    if (c.error) std::cerr << "classical cell " << c.label << " failed: " << *c.error << '\n';
  }
  std::cout << "wrote " << (cfg.output_dir / "report.json").string() << '\n';
  return res.any_failed() ? 1 : 0;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-mixture Weibull AFT models: Bayesian and classical fits"};
  app.require_subcommand(1);

  Common fit_opts;
  std::optional<std::string> fit_model;
  std::optional<double> fit_ecv;
  auto* fit = app.add_subcommand("fit", "run a single (model, E(cv)) cell");
  add_common(fit, fit_opts);
  fit->add_option("--model", fit_model, "model label (default: the first listed)");
  fit->add_option("--ecv", fit_ecv, "prior E(cv) (default: the model's first value)");

  Common cmp_opts;
  auto* compare = app.add_subcommand("compare", "run every configured cell and write the comparison tables");
  add_common(compare, cmp_opts);

  std::string diag_config;
  std::optional<std::string> diag_group;
  std::optional<std::string> diag_out;
  auto* diagnose = app.add_subcommand("diagnose", "export Kaplan-Meier and log(-log S) series");
  diagnose->add_option("--config", diag_config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--group", diag_group, "covariate name defining the groups");
  diagnose->add_option("--out", diag_out, "output file (default: stdout)");

  std::string sim_family = "gamma";
  double sim_theta = 2.0;
  double sim_gamma = 1.0;
  std::string sim_beta = "3,-0.3";
  std::size_t sim_n = 200;
  double sim_censor = 0.3;
  std::uint64_t sim_seed = 1;
  std::optional<std::string> sim_out;
  auto* simulate = app.add_subcommand("simulate", "draw a synthetic AFT dataset with one binary covariate");
  simulate->add_option("--family", sim_family, "mixing family");
  simulate->add_option("--theta", sim_theta, "mixing parameter");
  simulate->add_option("--gamma", sim_gamma, "Weibull shape");
  simulate->add_option("--beta", sim_beta, "intercept,slope");
  simulate->add_option("--n", sim_n, "number of subjects");
  simulate->add_option("--censor", sim_censor, "target censoring fraction (uniform censoring times)");
  simulate->add_option("--seed", sim_seed, "random seed");
  simulate->add_option("--out", sim_out, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fit) {
      rmw::RunConfig cfg = resolve(fit_opts);
      auto it = cfg.models.begin();
      if (fit_model) {
        it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const auto& e) { return e.label == *fit_model; });
        if (it == cfg.models.end()) throw std::invalid_argument("unknown model " + *fit_model);
      }
      const auto& m = *it;
      cfg.only_label = m.label;
      cfg.only_expected_cv = fit_ecv.value_or(m.expected_cv.front());
      return run_and_report(cfg);
    }
    if (*compare) return run_and_report(resolve(cmp_opts));
    if (*diagnose) {
      const rmw::RunConfig cfg = rmw::load_run_config(diag_config);
      const auto data = rmw::load_dataset(cfg.dataset_path, cfg.schema);
      std::optional<std::size_t> group;
      const auto name = diag_group ? diag_group : cfg.diagnostic_group;
      if (name) {
        const auto it = std::find(data.covariate_names.begin(), data.covariate_names.end(), *name);
        if (it == data.covariate_names.end()) throw std::invalid_argument("unknown covariate " + *name);
        group = static_cast<std::size_t>(it - data.covariate_names.begin());
      }
      const auto res = rmw::km_and_cloglog(data, group);
      for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
      if (diag_out) {
        std::ofstream out(*diag_out);
        if (!out) throw std::runtime_error("cannot write " + *diag_out);
        rmw::write_series_csv(out, res.series);
      } else {
        rmw::write_series_csv(std::cout, res.series);
      }
      return 0;
    }
    if (*simulate) {
      const auto beta = parse_list(sim_beta);
      if (beta.size() != 2) throw std::invalid_argument("--beta takes intercept,slope");
      const auto family = rmw::parse_mixing_family(sim_family);
      std::mt19937_64 rng(sim_seed);
      std::bernoulli_distribution group(0.5);
      std::ostream* os = &std::cout;
      std::ofstream file;
      if (sim_out) {
        file.open(*sim_out);
        if (!file) throw std::runtime_error("cannot write " + *sim_out);
        os = &file;
      }
      *os << "time,status,x\n";
      std::vector<double> t(sim_n);
      std::vector<int> x(sim_n);
      for (std::size_t i = 0; i < sim_n; ++i) {
        x[i] = group(rng) ? 1 : 0;
        const double eta[2] = {1.0, static_cast<double>(x[i])};
        const rmw::RmwParams p{rmw::aft_rate(eta, beta, sim_gamma), sim_gamma, family, sim_theta};
        t[i] = rmw::sample_rmw(p, 1, rng())[0];
      }
      // Uniform(0, c) censoring with c tuned by bisection to the target fraction.
      std::vector<double> u(sim_n);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      for (auto& v : u) v = unif(rng);
      auto frac = [&](double c) {
        std::size_t k = 0;
        for (std::size_t i = 0; i < sim_n; ++i) k += u[i] * c < t[i];
        return static_cast<double>(k) / static_cast<double>(sim_n);
      };
      double lo = 1e-12;
      double hi = *std::max_element(t.begin(), t.end()) * 1e3;
      for (int it = 0; it < 200 && sim_censor > 0.0; ++it) {
        const double mid = std::sqrt(lo * hi);
        (frac(mid) > sim_censor ? lo : hi) = mid;
      }
      for (std::size_t i = 0; i < sim_n; ++i) {
        const double c = sim_censor > 0.0 ? u[i] * hi : std::numeric_limits<double>::infinity();
        const bool event = t[i] <= c;
        *os << rmw::format_number(event ? t[i] : c) << ',' << (event ? 1 : 0) << ',' << x[i] << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "rmwfit: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
