#include "mlsar/model.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "mlsar/random.hpp"

namespace mlsar {

VarianceMode parse_variance_mode(const std::string& name) {
  if (name == "static") return VarianceMode::static_variance;
  if (name == "sv") return VarianceMode::stochastic_volatility;
  throw ConfigError(fmt::format("unknown variance mode '{}' (expected static or sv)", name));
}

LagMode parse_lag_mode(const std::string& name) {
  if (name == "contemporaneous") return LagMode::contemporaneous;
  if (name == "lagged") return LagMode::lagged;
  throw ConfigError(
      fmt::format("unknown lag mode '{}' (expected contemporaneous or lagged)", name));
}

std::string to_string(VarianceMode mode) {
  return mode == VarianceMode::static_variance ? "static" : "sv";
}

std::string to_string(LagMode mode) {
  return mode == LagMode::contemporaneous ? "contemporaneous" : "lagged";
}

Eigen::VectorXd RegressionDesign::regressor_row(int t) const {
  Eigen::VectorXd x(regressors());
  int offset = 0;
  if (includes_intercept) x[offset++] = 1.0;
  x.tail(k()) = factors.row(t).transpose();
  return x;
}

Eigen::VectorXd RegressionDesign::mean(int t, const Eigen::VectorXd& beta) const {
  // X_t beta = B_full x_t with B_full the n x (k+1) reshaped beta
  const Eigen::Map<const Eigen::MatrixXd> coefficients(beta.data(), n(), regressors());
  return coefficients * regressor_row(t);
}

Eigen::MatrixXd RegressionDesign::design_matrix(int t) const {
  const Eigen::VectorXd x = regressor_row(t);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n(), k_beta());
  for (int m = 0; m < regressors(); ++m)
    out.block(0, m * n(), n(), n()).diagonal().setConstant(x[m]);
  return out;
}

void RegressionDesign::validate() const {
  if (responses.cols() < 1) throw ConstraintError("design has no response columns");
  if (periods() < 2) throw ConstraintError("design needs at least two periods");
  if (factors.rows() != responses.rows())
    throw ConstraintError(fmt::format("design has {} factor rows but {} response rows",
                                      factors.rows(), responses.rows()));
  if (!factors.allFinite() || !responses.allFinite())
    throw ConstraintError("design contains missing or non-finite values");
  if (regressors() < 1) throw ConstraintError("design has no regressors");
}

VarianceMode variance_mode_of(const VarianceSpec& variance) {
  return std::holds_alternative<StaticVariance>(variance) ? VarianceMode::static_variance
                                                          : VarianceMode::stochastic_volatility;
}

std::vector<Observation> observations(int periods, LagMode lag) {
  std::vector<Observation> out;
  if (lag == LagMode::contemporaneous) {
    for (int t = 0; t < periods; ++t) out.push_back({t, t, t});
  } else {
    for (int t = 1; t < periods; ++t) out.push_back({t, t - 1, t - 1});
  }
  return out;
}

void validate_params(const StructuralParams& params, int n, int d, int k_beta) {
  if (params.beta.size() != k_beta)
    throw ConstraintError(fmt::format("beta has {} entries, expected {}", params.beta.size(), k_beta));
  if (params.delta.size() != d)
    throw ConstraintError(fmt::format("delta has {} entries, expected {}", params.delta.size(), d));
  if (params.rho.size() != n)
    throw ConstraintError(fmt::format("rho has {} entries, expected {}", params.rho.size(), n));
  require_simplex(params.delta);
  if (!params.beta.allFinite()) throw ConstraintError("beta is not finite");
  for (int j = 0; j < n; ++j) {
    if (!(std::abs(params.rho[j]) < 1.0))
      throw ConstraintError(fmt::format("rho[{}] = {} is outside (-1, 1)", j, params.rho[j]));
  }
}

Eigen::MatrixXd build_relational_matrix(const MultilayerPanel& panel,
                                        const StructuralParams& params, int t) {
  if (params.rho.size() != panel.n())
    throw ConstraintError(fmt::format("rho has {} entries, expected {}", params.rho.size(), panel.n()));
  for (Eigen::Index j = 0; j < params.rho.size(); ++j) {
    if (!(std::abs(params.rho[j]) < 1.0))
      throw ConstraintError(fmt::format("rho[{}] = {} is outside (-1, 1)", j, params.rho[j]));
  }
  const CompositeNetwork composite = composite_network(panel, params.delta, t);
  Eigen::MatrixXd a = -(params.rho.asDiagonal() * composite.matrix);
  a.diagonal().setOnes();
  return a;
}

std::optional<double> log_abs_determinant(const Eigen::MatrixXd& a) {
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const auto diag = lu.matrixLU().diagonal();
  const double scale = std::max(diag.cwiseAbs().maxCoeff(), 1.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    const double u = std::abs(diag[i]);
    if (!(u > 1e-14 * scale)) return std::nullopt;
    total += std::log(u);
  }
  return total;
}

namespace {

Eigen::VectorXd observation_variances(const VarianceSpec& variance, int response, int n) {
  Eigen::VectorXd s(n);
  if (const auto* fixed = std::get_if<StaticVariance>(&variance)) {
    if (fixed->sigma2.size() != n)
      throw ConstraintError(fmt::format("sigma2 has {} entries, expected {}", fixed->sigma2.size(), n));
    s = fixed->sigma2;
  } else {
    const auto& sv = std::get<VolatilityState>(variance);
    if (sv.h.cols() != n || response >= sv.h.rows())
      throw ConstraintError("log-volatility paths do not match the design");
    s = sv.h.row(response).transpose().array().exp();
  }
  for (int j = 0; j < n; ++j) {
    if (!(s[j] >= kVarianceFloor) || !std::isfinite(s[j]))
      throw ConstraintError(fmt::format("variance of node {} at period {} is {} (must be positive)",
                                        j, response, s[j]));
  }
  return s;
}

}  // namespace

double log_likelihood(const RegressionDesign& data, const MultilayerPanel& panel,
                      const StructuralParams& params, const VarianceSpec& variance,
                      LagMode lag) {
  data.validate();
  const int n = data.n();
  if (panel.n() != n || panel.periods() != data.periods())
    throw ConstraintError("panel and design dimensions disagree");
  validate_params(params, n, panel.d(), data.k_beta());

  const auto obs = observations(data.periods(), lag);
  double total = 0.0;
  for (const auto& o : obs) {
    const Eigen::MatrixXd a = build_relational_matrix(panel, params, o.network);
    const auto log_det = log_abs_determinant(a);
    if (!log_det)
      throw SingularityError(fmt::format("relational matrix is singular at period {}", o.network),
                             o.network);
    const Eigen::VectorXd s = observation_variances(variance, o.response, n);
    const Eigen::VectorXd resid =
        a * data.responses.row(o.response).transpose() - data.mean(o.design, params.beta);
    total += *log_det - 0.5 * s.array().log().sum() -
             0.5 * (resid.array().square() / s.array()).sum();
  }
  total -= 0.5 * n * static_cast<double>(obs.size()) * std::log(2.0 * std::numbers::pi);
  return total;
}

NeumannTerms neumann_effect_decomposition(const MultilayerPanel& panel,
                                          const StructuralParams& params,
                                          const RegressionDesign& data, int t, int order) {
  if (order < 0) throw ConstraintError("expansion order must be non-negative");
  validate_params(params, panel.n(), panel.d(), data.k_beta());
  const CompositeNetwork composite = composite_network(panel, params.delta, t);
  const auto check = check_invertibility(composite, params.rho);
  if (!(check.spectral_radius < 1.0))
    throw NumericalError(fmt::format(
        "network expansion diverges at period {}: spectral radius {}", t, check.spectral_radius));
  const Eigen::MatrixXd rw = params.rho.asDiagonal() * composite.matrix;
  NeumannTerms out;
  out.direct = data.mean(t, params.beta);
  out.indirect = Eigen::VectorXd::Zero(out.direct.size());
  Eigen::VectorXd term = out.direct;
  for (int l = 1; l <= order; ++l) {
    term = rw * term;
    out.indirect += term;
  }
  return out;
}

namespace {

Eigen::MatrixXd random_layer(int n, double density, Rng& rng) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && rng.uniform() < density) w(i, j) = 0.1 + 0.9 * rng.uniform();
    }
  }
  return w;
}

}  // namespace

SimulatedData simulate(const SimulationConfig& config) {
  const int n = config.n, d = config.d, periods = config.periods, k = config.k;
  if (n < 2 || d < 1 || periods < 2 || k < 0)
    throw ConfigError("simulate: need n >= 2, d >= 1, T >= 2, k >= 0");
  if (!(config.density > 0.0 && config.density <= 1.0))
    throw ConfigError("simulate: density must lie in (0, 1]");
  validate_params(config.truth, n, d, n * (k + 1));

  Rng rng(config.seed);

  // Panel, with per-period rejection until A1, A2 and A4 hold.
  MultilayerPanel panel(n, d, periods);
  for (int t = 0; t < periods; ++t) {
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      MultilayerPanel slice(n, d, 1);
      for (int l = 0; l < d; ++l) slice.weights(l, 0) = random_layer(n, config.density, rng);
      slice = standard_row_normalize(slice);
      if (!validate_assumptions(slice).passed) continue;
      for (int l = 0; l < d; ++l) panel.weights(l, t) = slice.weights(l, 0);
      accepted = true;
    }
    if (!accepted)
      throw ConfigError(fmt::format(
          "simulate: could not draw a network satisfying the identification assumptions at "
          "period {} after 1000 attempts (density {} too low?)",
          t, config.density));
  }

  RegressionDesign design;
  design.includes_intercept = true;
  design.factors.resize(periods, k);
  for (int t = 0; t < periods; ++t)
    for (int m = 0; m < k; ++m) design.factors(t, m) = rng.normal();
  design.responses.resize(periods, n);

  SimulationTruth truth;
  truth.params = config.truth;
  truth.lag = config.lag;
  truth.density = config.density;
  truth.seed = config.seed;

  Eigen::MatrixXd variances(periods, n);
  if (const auto* fixed = std::get_if<StaticVariance>(&config.variance)) {
    if (fixed->sigma2.size() != n || (fixed->sigma2.array() <= 0.0).any())
      throw ConfigError("simulate: sigma2 must hold n positive values");
    variances = fixed->sigma2.transpose().replicate(periods, 1);
    truth.variance = *fixed;
  } else {
    VolatilityState sv = std::get<VolatilityState>(config.variance);
    if (sv.mu_h.size() != n || sv.phi_h.size() != n || sv.sigma2_h.size() != n)
      throw ConfigError("simulate: volatility parameters must hold n values each");
    sv.h.resize(periods, n);
    for (int j = 0; j < n; ++j) {
      if (!(std::abs(sv.phi_h[j]) < 1.0) || !(sv.sigma2_h[j] > 0.0))
        throw ConfigError("simulate: need |phi_h| < 1 and sigma2_h > 0");
      const double sd = std::sqrt(sv.sigma2_h[j]);
      sv.h(0, j) = sv.mu_h[j] + sd / std::sqrt(1.0 - sv.phi_h[j] * sv.phi_h[j]) * rng.normal();
      for (int t = 1; t < periods; ++t)
        sv.h(t, j) = sv.mu_h[j] + sv.phi_h[j] * (sv.h(t - 1, j) - sv.mu_h[j]) + sd * rng.normal();
    }
    variances = sv.h.array().exp();
    truth.variance = sv;
  }

  for (int t = 0; t < periods; ++t) {
    const int source = (config.lag == LagMode::lagged && t > 0) ? t - 1 : t;
    const Eigen::MatrixXd a = build_relational_matrix(panel, config.truth, source);
    Eigen::VectorXd rhs = design.mean(source, config.truth.beta);
    for (int j = 0; j < n; ++j) rhs[j] += std::sqrt(variances(t, j)) * rng.normal();
    design.responses.row(t) = a.partialPivLu().solve(rhs).transpose();
  }

  for (int t = 0; t < periods; ++t) design.period_labels.push_back(std::to_string(t));
  for (int m = 0; m < k; ++m) design.factor_names.push_back(fmt::format("f{}", m));
  for (int j = 0; j < n; ++j) design.response_names.push_back(fmt::format("y{}", j));
  return SimulatedData{std::move(design), std::move(panel), std::move(truth)};
}

}  // namespace mlsar
