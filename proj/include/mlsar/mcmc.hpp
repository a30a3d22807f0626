#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <functional>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/model.hpp"
#include "mlsar/networks.hpp"
#include "mlsar/random.hpp"
#include "mlsar/slice_sampler.hpp"
#include "mlsar/stochastic_volatility.hpp"

namespace mlsar {

/// Hyperparameters:
///   beta ~ N(mu_beta, Sigma_beta),  delta ~ Dirichlet(dirichlet_c),
///   (rho_j + 1) / 2 ~ Beta(a_rho, b_rho),
///   sigma2_j ~ InvGamma(sigma2_shape, sigma2_scale), where shape = scale = 0
///   is the improper p(sigma2_j) proportional to 1 / sigma2_j,
/// plus the priors of the log-volatility AR(1) parameters.
struct PriorConfig {
  Eigen::VectorXd mu_beta;
  Eigen::MatrixXd Sigma_beta;
  Eigen::VectorXd dirichlet_c;
  double a_rho = 1.0;
  double b_rho = 1.0;
  double sigma2_shape = 0.0;
  double sigma2_scale = 0.0;
  sv::Priors sv;

  /// mu_beta = 0, Sigma_beta = 10 I, c = 1, a_rho = b_rho = 1.
  static PriorConfig defaults(int k_beta, int d);
  void validate(int k_beta, int d) const;
};

struct ChainConfig {
  int n_iter = 5000;
  int n_burnin = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  /// Dirichlet proposal for delta; empty means "tune it first".
  Eigen::VectorXd delta_proposal_concentration;
  int tuning_iters = 500;
  double slice_step_width = 0.25;
  int slice_max_steps = 100;
  /// Store every retained log-volatility path (memory heavy).
  bool keep_h = false;
  /// Replace the likelihood by a constant; every block then targets its
  /// prior. Used to verify the samplers.
  bool prior_only = false;

  void validate() const;
};

/// One full parameter configuration. `sigma2` is used in static mode, the
/// volatility fields in stochastic-volatility mode.
struct ModelState {
  Eigen::VectorXd beta;
  Eigen::VectorXd delta;
  Eigen::VectorXd rho;
  Eigen::VectorXd sigma2;
  Eigen::MatrixXd h;
  Eigen::VectorXd mu_h;
  Eigen::VectorXd phi_h;
  Eigen::VectorXd sigma2_h;

  StructuralParams params() const { return {beta, delta, rho}; }
  VarianceSpec variance(VarianceMode mode) const;
};

/// Throws ConstraintError naming the first violated constraint.
void check_state_constraints(const ModelState& state, VarianceMode mode);

/// Raised when the identification checks fail before sampling starts.
class AssumptionFailure : public ConstraintError {
 public:
  explicit AssumptionFailure(AssumptionReport report)
      : ConstraintError("network panel violates the identification assumptions:\n" +
                        report.describe()),
        report(std::move(report)) {}
  AssumptionReport report;
};

/// Raised when a relational matrix turns singular mid-chain.
class ChainAborted : public SingularityError {
 public:
  ChainAborted(const std::string& what, int period, int iteration)
      : SingularityError(what, period), iteration(iteration) {}
  int iteration;
};

/// Full-conditional samplers for the multilayer SAR model. The object
/// caches the per-observation layer products W_{i,t} y_t, which do not
/// change during a run.
class PosteriorSampler {
 public:
  PosteriorSampler(RegressionDesign data, MultilayerPanel panel, PriorConfig prior,
                   VarianceMode variance_mode, LagMode lag_mode, bool prior_only = false);

  ModelState initial_state() const;

  /// beta | rest: Gaussian with precision Sigma_beta^{-1} + sum_t X_t'
  /// Sigma_t^{-1} X_t and mean solving against Sigma_beta^{-1} mu_beta +
  /// sum_t X_t' Sigma_t^{-1} A_t y_t.
  Eigen::VectorXd sample_beta(const ModelState& state, Rng& rng) const;
  /// Posterior mean of the beta full conditional.
  Eigen::VectorXd beta_conditional_mean(const ModelState& state) const;

  /// sigma2_j | rest ~ InvGamma(shape + N/2, scale + sum_t r_{j,t}^2 / 2).
  Eigen::VectorXd sample_sigma2(const ModelState& state, Rng& rng) const;

  /// Log-volatility paths, one node at a time.
  Eigen::MatrixXd sample_h(const ModelState& state, Rng& rng) const;
  /// Returns the number of accepted phi proposals.
  int sample_sv_params(ModelState& state, Rng& rng) const;

  /// Slice-sampling update of rho_j for every j in index order.
  void sample_rho(ModelState& state, Rng& rng, const SliceSettings& settings) const;
  /// Slice-sampling update of a single rho_j.
  void sample_rho(ModelState& state, int j, Rng& rng, const SliceSettings& settings) const;
  /// Log full conditional of rho_j (up to a constant) evaluated directly
  /// from the relational matrices.
  double rho_log_conditional(const ModelState& state, int j, double value) const;
  /// The same conditional in the factorized form used by the slice sampler:
  /// each det A_t is affine in rho_j, and the residual term is quadratic.
  /// Normalized to zero at the current value of rho_j.
  double rho_log_conditional_factorized(const ModelState& state, int j, double value) const;

  /// Independence Metropolis-Hastings update of delta with a
  /// Dirichlet(concentration) proposal. Returns whether it was accepted.
  bool sample_delta(ModelState& state, const Eigen::VectorXd& concentration, Rng& rng) const;
  /// log of [f(proposal) q(current)] / [f(current) q(proposal)].
  double delta_log_acceptance_ratio(const ModelState& state, const Eigen::VectorXd& proposal,
                                    const Eigen::VectorXd& concentration) const;

  /// Full log-likelihood of the state (zero in prior-only mode).
  double log_likelihood(const ModelState& state) const;

  const RegressionDesign& data() const { return data_; }
  const MultilayerPanel& panel() const { return panel_; }
  const PriorConfig& prior() const { return prior_; }
  VarianceMode variance_mode() const { return variance_mode_; }
  LagMode lag_mode() const { return lag_mode_; }
  bool prior_only() const { return prior_only_; }
  int observation_count() const { return static_cast<int>(obs_.size()); }

 private:
  double obs_variance(const ModelState& state, std::size_t o, int j) const;
  Eigen::VectorXd composite_times_y(const Eigen::VectorXd& delta, std::size_t o) const;
  Eigen::MatrixXd composite(const Eigen::VectorXd& delta, std::size_t o) const;
  /// Sum over observations of log|det A_o| - r'Sigma^{-1}r / 2 for a given
  /// delta; -infinity when some A_o is singular, with that period reported.
  double delta_log_likelihood(const ModelState& state, const Eigen::VectorXd& delta,
                              int* singular_period = nullptr) const;
  void sample_rho_indices(ModelState& state, std::span<const int> indices, Rng& rng,
                          const SliceSettings& settings) const;

  RegressionDesign data_;
  MultilayerPanel panel_;
  PriorConfig prior_;
  VarianceMode variance_mode_;
  LagMode lag_mode_;
  bool prior_only_;
  std::vector<Observation> obs_;
  std::vector<Eigen::MatrixXd> layer_y_;  // per observation: n x d, column l = W_l y
  std::vector<Eigen::VectorXd> x_rows_;   // per observation: regressor row
  Eigen::MatrixXd prior_precision_;
  Eigen::VectorXd prior_shift_;  // Sigma_beta^{-1} mu_beta
};

struct TuningReport {
  Eigen::VectorXd concentration;
  double acceptance_rate = 0.0;  // of the final tuning stage
  bool fell_back_to_prior = false;
  std::string warning;
};

/// Preliminary run: sample with the prior as the delta proposal, fit a
/// Dirichlet to the draws by moment matching, refit once from draws taken
/// under the fitted proposal, and halve its precision until acceptance
/// reaches 0.15. `state` is advanced by the tuning sweeps.
TuningReport tune_delta_proposal(const PosteriorSampler& sampler, ModelState& state,
                                 const ChainConfig& config, Rng& rng);

struct ChainOutput {
  std::vector<ModelState> draws;
  std::vector<int> iterations;
  VarianceMode variance_mode = VarianceMode::static_variance;
  LagMode lag_mode = LagMode::contemporaneous;
  int n = 0;
  int d = 0;
  int k_beta = 0;
  int periods = 0;
  double delta_acceptance_rate = 0.0;
  double phi_acceptance_rate = 0.0;
  TuningReport tuning;
  std::vector<std::pair<std::string, double>> ess;
  double runtime_seconds = 0.0;
  bool truncated = false;
  /// Posterior mean of the log-volatility paths (SV mode).
  Eigen::MatrixXd h_mean;
  std::uint64_t seed = 0;
};

struct RunHooks {
  /// Called for every retained draw, in order.
  std::function<void(int iteration, const ModelState&)> on_draw;
  /// When stop is requested the chain ends early and is marked truncated.
  std::stop_token stop;
};

/// Tuning, then n_iter sweeps of
///   beta -> sigma2 (static) or h (SV) -> delta -> rho_1..rho_n -> SV params,
/// keeping every thin-th draw after n_burnin. Refuses to start when the
/// panel fails the identification checks.
ChainOutput run_chain(const RegressionDesign& data, const MultilayerPanel& panel,
                      const PriorConfig& prior, const ChainConfig& config,
                      VarianceMode variance_mode, LagMode lag_mode,
                      const RunHooks& hooks = {});

/// Independent chains with seeds derived from config.seed, run on up to
/// `workers` threads. Results are in chain order regardless of scheduling.
std::vector<ChainOutput> run_chains(const RegressionDesign& data, const MultilayerPanel& panel,
                                    const PriorConfig& prior, const ChainConfig& config,
                                    VarianceMode variance_mode, LagMode lag_mode, int chains,
                                    int workers);

// Flattened draws and their files ----------------------------------------------

/// Column names: beta_i, delta_i, rho_j, then sigma2_j (static) or
/// mu_h_j, phi_h_j, sigma2_h_j (SV), then h_t_j when requested.
std::vector<std::string> parameter_names(int n, int d, int k_beta, VarianceMode mode,
                                         int periods = 0, bool include_h = false);

struct DrawTable {
  std::vector<std::string> names;
  std::vector<int> iterations;
  Eigen::MatrixXd values;  // draws x parameters
  bool complete = true;

  Eigen::Index column(const std::string& name) const;
  std::vector<double> column_values(const std::string& name) const;
};

DrawTable flatten(const ChainOutput& chain, bool include_h = false);

/// Rebuilds structural draws (beta, delta, rho and variance parameters)
/// from a table whose columns follow parameter_names().
ChainOutput chain_from_table(const DrawTable& table);

/// Streams draws to CSV, one flushed row per draw. finish() appends a
/// "# complete" marker, truncate() a "# truncated" marker; a file with no
/// marker was cut short by a crash.
class DrawWriter {
 public:
  DrawWriter(const std::filesystem::path& path, std::vector<std::string> names);
  void write(int iteration, std::span<const double> values);
  void write(int iteration, const ModelState& state, VarianceMode mode, bool include_h);
  void finish();
  void truncate(int last_iteration);

 private:
  std::ofstream out_;
  std::vector<std::string> names_;
  std::size_t rows_ = 0;
};

void write_draws_csv(const DrawTable& table, const std::filesystem::path& path);
DrawTable read_draws_csv(const std::filesystem::path& path);

/// {delta_acceptance_rate, phi_acceptance_rate, ess, runtime_seconds, seed,
///  truncated, tuning, config}
std::string diagnostics_json(const ChainOutput& chain, const ChainConfig& config,
                             const PriorConfig& prior);

}  // namespace mlsar
