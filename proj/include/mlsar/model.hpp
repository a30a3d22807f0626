#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/networks.hpp"

namespace mlsar {

enum class VarianceMode { static_variance, stochastic_volatility };
enum class LagMode { contemporaneous, lagged };

VarianceMode parse_variance_mode(const std::string& name);
LagMode parse_lag_mode(const std::string& name);
std::string to_string(VarianceMode mode);
std::string to_string(LagMode mode);

/// Responses y_t (T x n) and common factors f_t (T x k). The period-t design
/// matrix is X_t = (1, f_t') kron I_n, so beta stacks n intercepts followed by
/// vec(B) with B the n x k loading matrix: beta[n * (1 + m) + j] is the
/// loading of node j on factor m.
struct RegressionDesign {
  Eigen::MatrixXd factors;    // T x k
  Eigen::MatrixXd responses;  // T x n
  bool includes_intercept = true;
  std::vector<std::string> period_labels;
  std::vector<std::string> factor_names;
  std::vector<std::string> response_names;

  int periods() const { return static_cast<int>(responses.rows()); }
  int n() const { return static_cast<int>(responses.cols()); }
  int k() const { return static_cast<int>(factors.cols()); }
  int regressors() const { return k() + (includes_intercept ? 1 : 0); }
  int k_beta() const { return n() * regressors(); }

  /// (1, f_t') or f_t' when there is no intercept.
  Eigen::VectorXd regressor_row(int t) const;
  /// X_t beta without forming X_t.
  Eigen::VectorXd mean(int t, const Eigen::VectorXd& beta) const;
  /// Explicit n x k_beta matrix X_t.
  Eigen::MatrixXd design_matrix(int t) const;

  void validate() const;
};

struct StructuralParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd delta;  // on the simplex
  Eigen::VectorXd rho;    // each in (-1, 1)
};

struct StaticVariance {
  Eigen::VectorXd sigma2;
};

/// Log-variance paths h (T x n) following a stationary AR(1) per node.
struct VolatilityState {
  Eigen::MatrixXd h;
  Eigen::VectorXd mu_h;
  Eigen::VectorXd phi_h;
  Eigen::VectorXd sigma2_h;
};

using VarianceSpec = std::variant<StaticVariance, VolatilityState>;

VarianceMode variance_mode_of(const VarianceSpec& variance);

/// Smallest variance the likelihood accepts; anything lower is an error.
inline constexpr double kVarianceFloor = 1e-300;

/// Index triple of one modeled observation: the response period, and the
/// periods whose network and covariates enter its equation. Under lagged
/// mode the first period is conditioned upon and not modeled.
struct Observation {
  int response = 0;
  int network = 0;
  int design = 0;
};
std::vector<Observation> observations(int periods, LagMode lag);

void validate_params(const StructuralParams& params, int n, int d, int k_beta);

/// A_t = I_n - R (sum_i delta_i W_{i,t}).
Eigen::MatrixXd build_relational_matrix(const MultilayerPanel& panel,
                                        const StructuralParams& params, int t);

/// log|det A|, or nullopt when A is numerically singular.
std::optional<double> log_abs_determinant(const Eigen::MatrixXd& a);

/// Exact Gaussian log-likelihood of the structural form including the
/// log|det A_t| Jacobian terms. Under stochastic volatility Sigma_t =
/// diag(exp(h_t)); under lagged mode A_{t-1} and X_{t-1} enter the period-t
/// equation and the first observation is conditioned upon.
double log_likelihood(const RegressionDesign& data, const MultilayerPanel& panel,
                      const StructuralParams& params, const VarianceSpec& variance,
                      LagMode lag = LagMode::contemporaneous);

/// Order-L truncation of the network expansion of A_t^{-1} X_t beta.
struct NeumannTerms {
  Eigen::VectorXd direct;    // X_t beta
  Eigen::VectorXd indirect;  // sum_{l=1}^{L} (R W_t*)^l X_t beta
};
NeumannTerms neumann_effect_decomposition(const MultilayerPanel& panel,
                                          const StructuralParams& params,
                                          const RegressionDesign& data, int t,
                                          int order);

struct SimulationConfig {
  int n = 7;
  int d = 2;
  int periods = 300;
  int k = 1;
  StructuralParams truth;
  VarianceSpec variance = StaticVariance{};
  LagMode lag = LagMode::contemporaneous;
  /// Probability that an off-diagonal dyad is linked in a layer snapshot.
  double density = 0.5;
  std::uint64_t seed = 0;
};

struct SimulationTruth {
  StructuralParams params;
  VarianceSpec variance;
  LagMode lag = LagMode::contemporaneous;
  double density = 0.5;
  std::uint64_t seed = 0;
};

struct SimulatedData {
  RegressionDesign design;
  MultilayerPanel panel;  // row-normalized
  SimulationTruth truth;
};

/// Draws a row-normalized panel satisfying A1, A2 and A4, i.i.d. standard
/// normal factors and responses y_t = A_t^{-1}(X_t beta + eps_t).
/// For stochastic volatility only mu_h, phi_h and sigma2_h of the configured
/// variance are used; the h paths are simulated and recorded in the truth.
SimulatedData simulate(const SimulationConfig& config);

// Serialization --------------------------------------------------------------

/// Header row required: first column period label, then k factor columns,
/// then n response columns.
void write_design_csv(const RegressionDesign& design, const std::filesystem::path& path);
RegressionDesign read_design_csv(const std::filesystem::path& path, int n_responses);

std::string truth_to_json_string(const SimulationTruth& truth);
SimulationTruth truth_from_json_string(const std::string& text);
void write_truth_json(const SimulationTruth& truth, const std::filesystem::path& path);
SimulationTruth read_truth_json(const std::filesystem::path& path);

}  // namespace mlsar
