#include "mlsar/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "mlsar/detail/csv.hpp"
#include "mlsar/diagnostics.hpp"
#include "mlsar/ingestion.hpp"
#include "mlsar/mcmc.hpp"
#include "mlsar/model.hpp"
#include "mlsar/networks.hpp"
#include "mlsar/spillovers.hpp"

namespace mlsar::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

volatile std::sig_atomic_t g_interrupted = 0;

void on_sigint(int) { g_interrupted = 1; }

struct Global {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string normalization = "row";
  std::string variance = "static";
  std::string lag = "contemporaneous";
};

struct IngestOptions {
  std::string events;
  std::string out;
  std::string date_format = "day_first";
  std::string date_column = "date";
  std::string cameo_column = "cameo";
  std::string intensity_column = "intensity";
  std::string source_column = "source";
  std::string target_column = "target";
  std::vector<std::string> countries = {"CA", "FR", "DE", "IT", "JP", "UK", "US"};
  std::string first_month;
  std::string last_month;
  std::string prices;
  std::string daily_returns;
  std::string controls;
  std::vector<int> control_lags;
};

struct SimulateOptions {
  std::string out;
  int n = 7;
  int d = 2;
  int periods = 300;
  int k = 1;
  double density = 0.5;
  std::vector<double> delta;
  std::vector<double> rho;
  std::vector<double> beta;
  double sigma2 = 0.5;
  double mu_h = -1.0;
  double phi_h = 0.9;
  double sigma2_h = 0.05;
};

struct EstimateOptions {
  std::string panel;
  std::string design;
  std::string out;
  int iterations = 5000;
  int burnin = 1000;
  int thin = 1;
  int tuning_iters = 500;
  std::vector<double> delta_proposal;
  int chains = 1;
  bool keep_h = false;
  bool prior_only = false;
  double beta_prior_mean = 0.0;
  double beta_prior_variance = 10.0;
  std::vector<double> dirichlet = {1.0};
  double a_rho = 1.0;
  double b_rho = 1.0;
  double sigma2_shape = 0.0;
  double sigma2_scale = 0.0;
  double mu_h_mean = 0.0;
  double mu_h_variance = 100.0;
  double phi_a = 5.0;
  double phi_b = 1.5;
  double sigma2_h_shape = 2.5;
  double sigma2_h_scale = 0.025;
  double slice_width = 0.25;
  int slice_max_steps = 100;
};

struct SpilloverOptions {
  std::string panel;
  std::string chain;
  std::string out;
  std::string external;
  bool neumann_check = false;
};

struct ReportOptions {
  std::string chain;
  std::string out;
  std::string panel;
  double level = 0.95;
  std::vector<std::string> densities;
  int grid_points = 512;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return kExitValidation;
    case ErrorKind::numerical: return kExitNumerical;
    case ErrorKind::io: return kExitIo;
  }
  return kExitValidation;
}

std::string kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::numerical: return "numerical";
    case ErrorKind::io: return "io";
  }
  return "validation";
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = detail::open_output(path);
  out << text;
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw IoError(fmt::format("{} '{}' does not exist", what, path));
}

std::uint64_t require_seed(const Global& g, const std::string& command) {
  if (!g.seed) throw ConfigError(fmt::format("{} needs --seed", command));
  return *g.seed;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// ingest ------------------------------------------------------------------------

int cmd_ingest(const IngestOptions& o, const Global& g, std::ostream& out, std::ostream& err) {
  require_file(o.events, "event file");
  if (!o.prices.empty()) require_file(o.prices, "price file");
  if (!o.daily_returns.empty()) require_file(o.daily_returns, "daily return file");
  if (!o.controls.empty()) require_file(o.controls, "control file");
  if (!o.prices.empty() && !o.daily_returns.empty())
    throw ConfigError("give either --prices or --daily-returns, not both");

  EventSchema schema;
  schema.date_format = parse_date_format(o.date_format);
  schema.date_column = o.date_column;
  schema.cameo_column = o.cameo_column;
  schema.intensity_column = o.intensity_column;
  schema.source_column = o.source_column;
  schema.target_column = o.target_column;

  AggregationConfig agg;
  agg.country_order = o.countries;
  agg.normalization = parse_normalization(g.normalization);
  auto month_option = [](const std::string& text, const char* flag) -> std::optional<YearMonth> {
    if (text.empty()) return std::nullopt;
    const auto m = parse_year_month(text);
    if (!m) throw ConfigError(fmt::format("{} expects YYYY-MM, got '{}'", flag, text));
    return m;
  };
  agg.first_month = month_option(o.first_month, "--first-month");
  agg.last_month = month_option(o.last_month, "--last-month");

  std::optional<AssembledDesign> design;
  if (!o.prices.empty() || !o.daily_returns.empty()) {
    const MonthlySeries responses =
        o.prices.empty()
            ? realized_volatility_by_month(read_dated_csv(o.daily_returns, schema.date_format))
            : monthly_log_returns(read_dated_csv(o.prices, schema.date_format));
    MonthlySeries controls;
    if (!o.controls.empty()) controls = to_monthly(read_dated_csv(o.controls, schema.date_format));
    std::vector<int> lags = o.control_lags;
    if (lags.empty()) lags.assign(static_cast<std::size_t>(controls.values.cols()), 0);
    design = assemble_design(responses, controls, lags);
    if (design->design.n() != static_cast<int>(agg.country_order.size()))
      throw ConstraintError(fmt::format("{} response series for {} countries",
                                        design->design.n(), agg.country_order.size()));
    if (!agg.first_month) agg.first_month = design->months.front();
    if (!agg.last_month) agg.last_month = design->months.back();
    if (*agg.first_month != design->months.front() || *agg.last_month != design->months.back())
      throw ConstraintError(fmt::format(
          "network months {}..{} differ from the design months {}..{}", agg.first_month->label(),
          agg.last_month->label(), design->months.front().label(), design->months.back().label()));
  }

  LayerAggregator aggregator(agg);
  AggregationConfig raw_config = agg;
  raw_config.normalization = Normalization::none;
  LayerAggregator raw_aggregator(raw_config);
  auto in = detail::open_input(o.events);
  const ParseReport parsed = for_each_event(in, schema, CountryAliases::g7(), [&](const EventRecord& e) {
    aggregator.add(e);
    raw_aggregator.add(e);
  });
  const MultilayerPanel panel = aggregator.finish();
  AggregationReport report = aggregator.report();
  for (const auto& label : panel.period_labels) report.per_month_counts.try_emplace(label, 0);

  const fs::path dir = o.out;
  write_panel_json(panel, dir / "panel.json");
  write_panel_json(raw_aggregator.finish(), dir / "panel_raw.json");
  write_text(dir / "aggregation_report.json", report.to_json());
  {
    auto errors = detail::open_output(dir / "parse_errors.csv");
    errors << "line,message\n";
    for (const auto& e : parsed.errors)
      errors << e.line << ",\"" << e.message << "\"\n";
  }
  if (design) write_design_csv(design->design, dir / "design.csv");

  out << fmt::format("ingested {} events ({} malformed rows) into {} months x {} countries\n",
                     parsed.accepted, parsed.errors.size(), panel.periods(), panel.n());
  const AssumptionReport check = validate_assumptions(panel);
  if (!check.a1_violations.empty())
    throw ConstraintError("aggregated panel has empty layer snapshots:\n" + check.describe());
  if (!check.passed)
    err << "warning: the panel will not pass estimation as is:\n" << check.describe() << '\n';
  return kExitOk;
}

// simulate ----------------------------------------------------------------------

int cmd_simulate(const SimulateOptions& o, const Global& g, std::ostream& out) {
  const std::uint64_t seed = require_seed(g, "simulate");
  if (o.n < 2 || o.d < 1 || o.periods < 2 || o.k < 0)
    throw ConfigError("need n >= 2, d >= 1, periods >= 2 and k >= 0");
  Rng rng(derive_seed(seed, 1));
  SimulationConfig cfg;
  cfg.n = o.n;
  cfg.d = o.d;
  cfg.periods = o.periods;
  cfg.k = o.k;
  cfg.density = o.density;
  cfg.seed = seed;
  cfg.lag = parse_lag_mode(g.lag);

  Eigen::VectorXd delta;
  if (!o.delta.empty())
    delta = to_vector(o.delta);
  else if (o.d == 2)
    delta = Eigen::Vector2d(0.3, 0.7);
  else
    delta = Eigen::VectorXd::Constant(o.d, 1.0 / o.d);
  Eigen::VectorXd rho(o.n);
  if (!o.rho.empty())
    rho = to_vector(o.rho);
  else
    for (int j = 0; j < o.n; ++j) rho[j] = 0.2 + 0.7 * rng.uniform();
  const int k_beta = o.n * (o.k + 1);
  Eigen::VectorXd beta(k_beta);
  if (!o.beta.empty())
    beta = to_vector(o.beta);
  else
    for (int i = 0; i < k_beta; ++i) beta[i] = rng.normal();
  cfg.truth = {beta, delta, rho};
  validate_params(cfg.truth, o.n, o.d, k_beta);
  if (parse_variance_mode(g.variance) == VarianceMode::static_variance) {
    if (!(o.sigma2 > 0.0)) throw ConfigError("--sigma2 must be positive");
    cfg.variance = StaticVariance{Eigen::VectorXd::Constant(o.n, o.sigma2)};
  } else {
    if (!(std::abs(o.phi_h) < 1.0) || !(o.sigma2_h > 0.0))
      throw ConfigError("need |phi_h| < 1 and sigma2_h > 0");
    VolatilityState v;
    v.mu_h = Eigen::VectorXd::Constant(o.n, o.mu_h);
    v.phi_h = Eigen::VectorXd::Constant(o.n, o.phi_h);
    v.sigma2_h = Eigen::VectorXd::Constant(o.n, o.sigma2_h);
    cfg.variance = v;
  }
  const SimulatedData data = simulate(cfg);
  const fs::path dir = o.out;
  write_panel_json(data.panel, dir / "panel.json");
  write_design_csv(data.design, dir / "design.csv");
  write_truth_json(data.truth, dir / "truth.json");
  out << fmt::format("simulated {} periods, {} nodes, {} layers into {}\n", o.periods, o.n, o.d,
                     dir.string());
  return kExitOk;
}

// estimate ----------------------------------------------------------------------

PriorConfig build_prior(const EstimateOptions& o, int k_beta, int d) {
  PriorConfig prior = PriorConfig::defaults(k_beta, d);
  prior.mu_beta.setConstant(o.beta_prior_mean);
  if (!(o.beta_prior_variance > 0.0)) throw ConfigError("--beta-prior-variance must be positive");
  prior.Sigma_beta = o.beta_prior_variance * Eigen::MatrixXd::Identity(k_beta, k_beta);
  if (o.dirichlet.size() == 1)
    prior.dirichlet_c.setConstant(o.dirichlet.front());
  else
    prior.dirichlet_c = to_vector(o.dirichlet);
  prior.a_rho = o.a_rho;
  prior.b_rho = o.b_rho;
  prior.sigma2_shape = o.sigma2_shape;
  prior.sigma2_scale = o.sigma2_scale;
  prior.sv.mu_mean = o.mu_h_mean;
  prior.sv.mu_variance = o.mu_h_variance;
  prior.sv.phi_a = o.phi_a;
  prior.sv.phi_b = o.phi_b;
  prior.sv.sigma2_shape = o.sigma2_h_shape;
  prior.sv.sigma2_scale = o.sigma2_h_scale;
  prior.validate(k_beta, d);
  return prior;
}

void write_h_mean(const ChainOutput& chain, const fs::path& path) {
  auto out = detail::open_output(path);
  out << "period";
  for (int j = 0; j < chain.n; ++j) out << ",h_" << j;
  out << '\n';
  for (Eigen::Index t = 0; t < chain.h_mean.rows(); ++t) {
    out << t;
    for (Eigen::Index j = 0; j < chain.h_mean.cols(); ++j)
      out << ',' << detail::format_double(chain.h_mean(t, j));
    out << '\n';
  }
}

struct ChainRun {
  std::optional<ChainOutput> output;
  std::exception_ptr error;
  int last_iteration = 0;
};

int cmd_estimate(const EstimateOptions& o, const Global& g, std::ostream& out, std::ostream& err) {
  const std::uint64_t seed = require_seed(g, "estimate");
  require_file(o.panel, "panel");
  require_file(o.design, "design");
  const VarianceMode variance = parse_variance_mode(g.variance);
  const LagMode lag = parse_lag_mode(g.lag);
  if (o.chains < 1) throw ConfigError("--chains must be at least 1");
  if (g.workers < 1) throw ConfigError("--workers must be at least 1");

  ChainConfig config;
  config.n_iter = o.iterations;
  config.n_burnin = o.burnin;
  config.thin = o.thin;
  config.seed = seed;
  config.tuning_iters = o.tuning_iters;
  config.slice_step_width = o.slice_width;
  config.slice_max_steps = o.slice_max_steps;
  config.keep_h = o.keep_h;
  config.prior_only = o.prior_only;
  if (!o.delta_proposal.empty()) config.delta_proposal_concentration = to_vector(o.delta_proposal);
  config.validate();

  const MultilayerPanel panel = read_panel(o.panel);
  const RegressionDesign design = read_design_csv(o.design, panel.n());
  const PriorConfig prior = build_prior(o, design.k_beta(), panel.d());
  if (!config.prior_only) {
    AssumptionReport report = validate_assumptions(panel);
    if (!report.passed) throw AssumptionFailure(std::move(report));
  }

  const fs::path dir = o.out;
  const auto names = parameter_names(panel.n(), panel.d(), design.k_beta(), variance,
                                     design.periods(), config.keep_h);
  std::stop_source stop;
  std::jthread watcher([&stop](std::stop_token own) {
    while (!own.stop_requested()) {
      if (g_interrupted) {
        stop.request_stop();
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });

  std::vector<ChainRun> runs(o.chains);
  auto chain_dir = [&](int c) { return o.chains == 1 ? dir : dir / fmt::format("chain_{}", c); };
  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < o.chains; c = next++) {
      ChainConfig local = config;
      local.seed = o.chains == 1 ? seed : derive_seed(seed, static_cast<std::uint64_t>(c));
      try {
        DrawWriter writer(chain_dir(c) / "draws.csv", names);
        RunHooks hooks;
        hooks.stop = stop.get_token();
        hooks.on_draw = [&](int it, const ModelState& s) {
          writer.write(it, s, variance, local.keep_h);
          runs[c].last_iteration = it;
        };
        try {
          runs[c].output = run_chain(design, panel, prior, local, variance, lag, hooks);
        } catch (...) {
          writer.truncate(runs[c].last_iteration);
          throw;
        }
        if (runs[c].output->truncated)
          writer.truncate(runs[c].last_iteration);
        else
          writer.finish();
      } catch (...) {
        runs[c].error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < std::min(g.workers, o.chains); ++w) pool.emplace_back(work);
    work();
  }
  watcher.request_stop();
  for (const auto& r : runs)
    if (r.error) std::rethrow_exception(r.error);

  bool truncated = false;
  for (int c = 0; c < o.chains; ++c) {
    const ChainOutput& chain = *runs[c].output;
    const fs::path cdir = chain_dir(c);
    ChainConfig local = config;
    local.seed = chain.seed;
    write_text(cdir / "diagnostics.json", diagnostics_json(chain, local, prior) + "\n");
    if (chain.draws.size() >= kMinSummaryDraws) {
      const PosteriorSummary summary = summarize(chain);
      write_summary_csv(summary, cdir / "summary.csv");
      write_text(cdir / "summary.txt", summary_text(summary));
    } else {
      err << fmt::format("chain {}: {} draws, too few for a summary\n", c, chain.draws.size());
    }
    if (variance == VarianceMode::stochastic_volatility && chain.h_mean.size() > 0)
      write_h_mean(chain, cdir / "h_mean.csv");
    if (!chain.tuning.warning.empty()) err << "warning: " << chain.tuning.warning << '\n';
    std::string line = fmt::format("chain {}: delta acceptance {:.3f}", c, chain.delta_acceptance_rate);
    if (variance == VarianceMode::stochastic_volatility)
      line += fmt::format(", phi acceptance {:.3f}", chain.phi_acceptance_rate);
    line += fmt::format(", {} draws kept{}", chain.draws.size(), chain.truncated ? " (interrupted)" : "");
    out << line << '\n';
    truncated = truncated || chain.truncated;
  }
  return truncated ? kExitInterrupted : kExitOk;
}

// spillover ---------------------------------------------------------------------

std::vector<double> read_external(const fs::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::vector<double> values;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const auto v = detail::parse_double(fields.back());
    if (!v) {
      if (values.empty() && line_no == 1) continue;  // header
      throw ParseError(fmt::format("{}:{}: '{}' is not a number", path.string(), line_no, fields.back()));
    }
    values.push_back(*v);
  }
  return values;
}

int cmd_spillover(const SpilloverOptions& o, const Global& g, std::ostream& out,
                  std::ostream& err) {
  require_file(o.panel, "panel");
  require_file(o.chain, "chain");
  if (!o.external.empty()) require_file(o.external, "external index");
  const MultilayerPanel panel = read_panel(o.panel);
  const DrawTable table = read_draws_csv(o.chain);
  if (!table.complete) err << "warning: the chain file is incomplete; using the draws it has\n";
  ChainOutput chain = chain_from_table(table);
  if (chain.n != panel.n() || chain.d != panel.d())
    throw ConstraintError(fmt::format("chain has {} nodes and {} layers, the panel {} and {}",
                                      chain.n, chain.d, panel.n(), panel.d()));
  chain.periods = panel.periods();
  const EffectSummary summary = effect_series(panel, chain, g.workers);
  const fs::path dir = o.out;
  write_effect_summary_csv(summary, dir / "effects.csv", panel.period_labels, panel.node_labels);

  const EffectSeries means = summary.mean_series();
  const CrossCorrelation cross = effect_crosscorrelation_matrix(means);
  write_correlation_csv(cross.overall, dir / "crosscorr_overall.csv", panel.node_labels);
  write_correlation_csv(cross.direct, dir / "crosscorr_direct.csv", panel.node_labels);
  write_correlation_csv(cross.indirect, dir / "crosscorr_indirect.csv", panel.node_labels);

  json report;
  report["draws_used"] = summary.draws_used;
  report["draws_excluded"] = summary.excluded_draws.size();
  report["excluded_draws"] = summary.excluded_draws;

  if (!o.external.empty()) {
    const auto external = read_external(o.external);
    const auto correlations = effect_external_correlation(means, external);
    auto csv = detail::open_output(dir / "external_correlation.csv");
    csv << "country,correlation,p_value,stars\n";
    for (std::size_t j = 0; j < correlations.size(); ++j)
      csv << (j < panel.node_labels.size() ? panel.node_labels[j] : std::to_string(j)) << ','
          << detail::format_double(correlations[j].correlation) << ','
          << detail::format_double(correlations[j].p_value) << ',' << correlations[j].stars << '\n';
  }

  if (o.neumann_check) {
    // Dense solve against the order-50 series on up to 100 evenly spaced
    // draws, in every period whose composite radius is at most 0.75.
    constexpr int kOrder = 50;
    const std::size_t draws = chain.draws.size();
    const std::size_t stride = std::max<std::size_t>(1, draws / 100);
    double worst = 0.0;
    int checked = 0, skipped = 0;
    for (std::size_t r = 0; r < draws; r += stride) {
      const ModelState& s = chain.draws[r];
      const StructuralParams p{s.beta, s.delta, s.rho};
      for (int t = 0; t < panel.periods(); ++t) {
        if (check_invertibility(composite_network(panel, p.delta, t), p.rho).spectral_radius > 0.75) {
          ++skipped;
          continue;
        }
        const Eigen::MatrixXd diff =
            spatial_multiplier(panel, p, t) - neumann_multiplier(panel, p, t, kOrder);
        worst = std::max(worst, diff.cwiseAbs().maxCoeff());
        ++checked;
      }
    }
    report["neumann_check"] = {{"order", kOrder},
                               {"instances_checked", checked},
                               {"instances_skipped_radius", skipped},
                               {"max_abs_discrepancy", worst},
                               {"passed", worst < 1e-6}};
    out << fmt::format("Neumann cross-check: max discrepancy {:.3g} over {} instances\n", worst,
                       checked);
  }
  write_text(dir / "spillover_report.json", report.dump(2) + "\n");
  out << fmt::format("effects for {} periods from {} draws ({} excluded as singular)\n",
                     panel.periods(), summary.draws_used, summary.excluded_draws.size());
  return kExitOk;
}

// report ------------------------------------------------------------------------

int cmd_report(const ReportOptions& o, std::ostream& out, std::ostream& err) {
  require_file(o.chain, "chain");
  std::vector<std::string> labels;
  if (!o.panel.empty()) {
    require_file(o.panel, "panel");
    labels = read_panel(o.panel).node_labels;
  }
  const DrawTable table = read_draws_csv(o.chain);
  if (!table.complete) err << "warning: the chain file is incomplete; summarizing the draws it has\n";
  const PosteriorSummary summary = summarize(table, o.level);
  const fs::path dir = o.out;
  write_summary_csv(summary, dir / "summary.csv");
  std::string text = summary_text(summary);
  text += "\nnetwork exposure\n" + node_table_text(summary, "rho_", labels);
  write_text(dir / "summary.txt", text);

  std::vector<std::string> params = o.densities;
  if (params.empty())
    for (const auto& name : table.names)
      if (name.starts_with("delta_") || name.starts_with("rho_")) params.push_back(name);
  GridSpec grid;
  grid.points = o.grid_points;
  for (const auto& name : params) {
    const DensityEstimate density = density_export(table, name, grid);
    write_density_csv(density, dir / fmt::format("density_{}.csv", name));
  }
  out << text;
  return kExitOk;
}

void write_error_json(const std::string& dir, const std::string& kind, int code,
                      const std::string& message) {
  if (dir.empty()) return;
  try {
    json j;
    j["error"] = kind;
    j["exit_code"] = code;
    j["message"] = message;
    write_text(fs::path(dir) / "error.json", j.dump(2) + "\n");
  } catch (...) {
    // The output directory itself may be the problem.
  }
}

/// Global options plus those of the invoked subcommand, with defaults, in
/// the format --config reads back.
std::string resolved_config(const CLI::App& app) {
  std::string prefix;
  for (const auto* sub : app.get_subcommands()) prefix = sub->get_name() + ".";
  std::istringstream all(app.config_to_str(true, false));
  std::string text, line;
  while (std::getline(all, line)) {
    const auto key = line.substr(0, line.find('='));
    if (line.ends_with("=\"\"")) continue;  // unset
    if (key.find('.') == std::string::npos || key.starts_with(prefix)) text += line + '\n';
  }
  return text;
}

}  // namespace

void install_interrupt_handler() { std::signal(SIGINT, on_sigint); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian multilayer network autoregression"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file of option values; command-line flags win");
  Global g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--workers", g.workers, "worker threads for chains and spillovers")
      ->capture_default_str();
  app.add_option("--normalization", g.normalization, "ingest normalization")
      ->check(CLI::IsMember({"row", "maxrow", "none"}))
      ->capture_default_str();
  app.add_option("--variance", g.variance, "variance model")
      ->check(CLI::IsMember({"static", "sv"}))
      ->capture_default_str();
  app.add_option("--lag", g.lag, "network timing")
      ->check(CLI::IsMember({"contemporaneous", "lagged"}))
      ->capture_default_str();

  IngestOptions ingest;
  auto* ci = app.add_subcommand("ingest", "aggregate events (and market data) into model inputs");
  ci->fallthrough();
  ci->add_option("--events", ingest.events, "event CSV")->required();
  ci->add_option("--out", ingest.out, "output directory")->required();
  ci->add_option("--date-format", ingest.date_format)
      ->check(CLI::IsMember({"day_first", "iso"}))
      ->capture_default_str();
  ci->add_option("--date-column", ingest.date_column)->capture_default_str();
  ci->add_option("--cameo-column", ingest.cameo_column)->capture_default_str();
  ci->add_option("--intensity-column", ingest.intensity_column)->capture_default_str();
  ci->add_option("--source-column", ingest.source_column)->capture_default_str();
  ci->add_option("--target-column", ingest.target_column)->capture_default_str();
  ci->add_option("--countries", ingest.countries, "country codes in node order")
      ->delimiter(',')
      ->capture_default_str();
  ci->add_option("--first-month", ingest.first_month, "YYYY-MM");
  ci->add_option("--last-month", ingest.last_month, "YYYY-MM");
  ci->add_option("--prices", ingest.prices, "month-end prices CSV (date, one column per country)");
  ci->add_option("--daily-returns", ingest.daily_returns, "daily returns CSV for realized volatility");
  ci->add_option("--controls", ingest.controls, "monthly controls CSV");
  ci->add_option("--control-lags", ingest.control_lags, "lag in months per control")->delimiter(',');

  SimulateOptions sim;
  auto* cs = app.add_subcommand("simulate", "simulate a panel, design and truth record");
  cs->fallthrough();
  cs->add_option("--out", sim.out, "output directory")->required();
  cs->add_option("--n", sim.n)->capture_default_str();
  cs->add_option("--d", sim.d)->capture_default_str();
  cs->add_option("--periods", sim.periods)->capture_default_str();
  cs->add_option("--k", sim.k, "number of factors")->capture_default_str();
  cs->add_option("--density", sim.density, "link probability per dyad")->capture_default_str();
  cs->add_option("--delta", sim.delta, "layer weights")->delimiter(',');
  cs->add_option("--rho", sim.rho, "network exposures")->delimiter(',');
  cs->add_option("--beta", sim.beta, "intercepts then loadings")->delimiter(',');
  cs->add_option("--sigma2", sim.sigma2)->capture_default_str();
  cs->add_option("--mu-h", sim.mu_h)->capture_default_str();
  cs->add_option("--phi-h", sim.phi_h)->capture_default_str();
  cs->add_option("--sigma2-h", sim.sigma2_h)->capture_default_str();

  EstimateOptions est;
  auto* ce = app.add_subcommand("estimate", "run the MCMC sampler");
  ce->fallthrough();
  ce->add_option("--panel", est.panel, "panel JSON or CSV directory")->required();
  ce->add_option("--design", est.design, "design CSV")->required();
  ce->add_option("--out", est.out, "output directory")->required();
  ce->add_option("--iterations", est.iterations)->capture_default_str();
  ce->add_option("--burnin", est.burnin)->capture_default_str();
  ce->add_option("--thin", est.thin)->capture_default_str();
  ce->add_option("--tuning-iters", est.tuning_iters)->capture_default_str();
  ce->add_option("--delta-proposal", est.delta_proposal, "fixed Dirichlet proposal (skips tuning)")
      ->delimiter(',');
  ce->add_option("--chains", est.chains)->capture_default_str();
  ce->add_flag("--keep-h", est.keep_h, "store log-volatility paths in the draws");
  ce->add_flag("--prior-only", est.prior_only, "ignore the likelihood");
  ce->add_option("--beta-prior-mean", est.beta_prior_mean)->capture_default_str();
  ce->add_option("--beta-prior-variance", est.beta_prior_variance)->capture_default_str();
  ce->add_option("--dirichlet", est.dirichlet, "prior concentration(s) of delta")
      ->delimiter(',')
      ->capture_default_str();
  ce->add_option("--a-rho", est.a_rho)->capture_default_str();
  ce->add_option("--b-rho", est.b_rho)->capture_default_str();
  ce->add_option("--sigma2-shape", est.sigma2_shape)->capture_default_str();
  ce->add_option("--sigma2-scale", est.sigma2_scale)->capture_default_str();
  ce->add_option("--mu-h-mean", est.mu_h_mean)->capture_default_str();
  ce->add_option("--mu-h-variance", est.mu_h_variance)->capture_default_str();
  ce->add_option("--phi-a", est.phi_a)->capture_default_str();
  ce->add_option("--phi-b", est.phi_b)->capture_default_str();
  ce->add_option("--sigma2-h-shape", est.sigma2_h_shape)->capture_default_str();
  ce->add_option("--sigma2-h-scale", est.sigma2_h_scale)->capture_default_str();
  ce->add_option("--slice-width", est.slice_width)->capture_default_str();
  ce->add_option("--slice-max-steps", est.slice_max_steps)->capture_default_str();

  SpilloverOptions spill;
  auto* cp = app.add_subcommand("spillover", "direct, indirect and total effects from draws");
  cp->fallthrough();
  cp->add_option("--panel", spill.panel)->required();
  cp->add_option("--chain", spill.chain, "draws CSV")->required();
  cp->add_option("--out", spill.out)->required();
  cp->add_option("--external", spill.external, "external index CSV, one value per period");
  cp->add_flag("--neumann-check", spill.neumann_check, "compare the dense solve with the series");

  ReportOptions rep;
  auto* cr = app.add_subcommand("report", "posterior summaries and densities");
  cr->fallthrough();
  cr->add_option("--chain", rep.chain, "draws CSV")->required();
  cr->add_option("--out", rep.out)->required();
  cr->add_option("--panel", rep.panel, "panel supplying node labels");
  cr->add_option("--level", rep.level)->capture_default_str();
  cr->add_option("--densities", rep.densities, "parameters to export densities for")->delimiter(',');
  cr->add_option("--grid-points", rep.grid_points)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  std::string out_dir;
  for (const auto* dir : {&ingest.out, &sim.out, &est.out, &spill.out, &rep.out})
    if (!dir->empty()) out_dir = *dir;

  try {
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      fs::remove(fs::path(out_dir) / "error.json");
      write_text(fs::path(out_dir) / "config.toml", resolved_config(app));
    }
    if (ci->parsed()) return cmd_ingest(ingest, g, out, err);
    if (cs->parsed()) return cmd_simulate(sim, g, out);
    if (ce->parsed()) return cmd_estimate(est, g, out, err);
    if (cp->parsed()) return cmd_spillover(spill, g, out, err);
    return cmd_report(rep, out, err);
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    err << "error: " << e.what() << '\n';
    write_error_json(out_dir, kind_name(e.kind()), code, e.what());
    return code;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    write_error_json(out_dir, "io", kExitIo, e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    write_error_json(out_dir, "numerical", kExitNumerical, e.what());
    return kExitNumerical;
  }
}

}  // namespace mlsar::cli
