#include "mlsar/mcmc.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include <fmt/format.h>

#include "mlsar/stats.hpp"

namespace mlsar {

// Configuration ---------------------------------------------------------------

PriorConfig PriorConfig::defaults(int k_beta, int d) {
  PriorConfig prior;
  prior.mu_beta = Eigen::VectorXd::Zero(k_beta);
  prior.Sigma_beta = 10.0 * Eigen::MatrixXd::Identity(k_beta, k_beta);
  prior.dirichlet_c = Eigen::VectorXd::Ones(d);
  return prior;
}

void PriorConfig::validate(int k_beta, int d) const {
  if (mu_beta.size() != k_beta)
    throw ConfigError(fmt::format("prior mean of beta has {} entries, expected {}", mu_beta.size(), k_beta));
  if (Sigma_beta.rows() != k_beta || Sigma_beta.cols() != k_beta)
    throw ConfigError(fmt::format("prior covariance of beta must be {}x{}", k_beta, k_beta));
  if (!Sigma_beta.isApprox(Sigma_beta.transpose(), 1e-12))
    throw ConfigError("prior covariance of beta must be symmetric");
  if (Eigen::LLT<Eigen::MatrixXd>(Sigma_beta).info() != Eigen::Success)
    throw ConfigError("prior covariance of beta must be positive definite");
  if (dirichlet_c.size() != d)
    throw ConfigError(fmt::format("Dirichlet prior has {} entries, expected {}", dirichlet_c.size(), d));
  if ((dirichlet_c.array() <= 0.0).any())
    throw ConfigError("Dirichlet prior concentrations must be positive");
  if (!(a_rho > 0.0) || !(b_rho > 0.0)) throw ConfigError("a_rho and b_rho must be positive");
  if (sigma2_shape < 0.0 || sigma2_scale < 0.0)
    throw ConfigError("sigma2 prior shape and scale must be non-negative");
  if (!(sv.mu_variance > 0.0) || !(sv.phi_a > 0.0) || !(sv.phi_b > 0.0) ||
      !(sv.sigma2_shape > 0.0) || !(sv.sigma2_scale > 0.0))
    throw ConfigError("volatility prior parameters must be positive");
}

void ChainConfig::validate() const {
  if (n_iter < 1 || n_burnin < 0 || thin < 1)
    throw ConfigError("need n_iter >= 1, n_burnin >= 0 and thin >= 1");
  if (n_burnin >= n_iter) throw ConfigError("n_burnin must be smaller than n_iter");
  if (!(slice_step_width > 0.0) || slice_max_steps < 1)
    throw ConfigError("slice step width must be positive and max steps >= 1");
  if (delta_proposal_concentration.size() == 0 && tuning_iters < 200)
    throw ConfigError("tuning needs at least 200 iterations");
  if ((delta_proposal_concentration.array() <= 0.0).any())
    throw ConfigError("delta proposal concentrations must be positive");
}

VarianceSpec ModelState::variance(VarianceMode mode) const {
  if (mode == VarianceMode::static_variance) return StaticVariance{sigma2};
  return VolatilityState{h, mu_h, phi_h, sigma2_h};
}

void check_state_constraints(const ModelState& state, VarianceMode mode) {
  if (!state.beta.allFinite()) throw ConstraintError("beta draw is not finite");
  require_simplex(state.delta, 1e-9);
  for (Eigen::Index j = 0; j < state.rho.size(); ++j)
    if (!(std::abs(state.rho[j]) < 1.0))
      throw ConstraintError(fmt::format("rho[{}] = {} left (-1, 1)", j, state.rho[j]));
  if (mode == VarianceMode::static_variance) {
    if (!((state.sigma2.array() > 0.0).all()) || !state.sigma2.allFinite())
      throw ConstraintError("sigma2 draw is not positive");
  } else {
    if (!state.h.allFinite() || !state.h.array().exp().allFinite())
      throw ConstraintError("log-volatility path is not finite");
    if (!((state.phi_h.array().abs() < 1.0).all()))
      throw ConstraintError("phi_h left (-1, 1)");
    if (!((state.sigma2_h.array() > 0.0).all()))
      throw ConstraintError("sigma2_h draw is not positive");
  }
}

// Sampler -----------------------------------------------------------------------

PosteriorSampler::PosteriorSampler(RegressionDesign data, MultilayerPanel panel, PriorConfig prior,
                                   VarianceMode variance_mode, LagMode lag_mode, bool prior_only)
    : data_(std::move(data)),
      panel_(std::move(panel)),
      prior_(std::move(prior)),
      variance_mode_(variance_mode),
      lag_mode_(lag_mode),
      prior_only_(prior_only) {
  data_.validate();
  panel_.validate();
  if (panel_.n() != data_.n() || panel_.periods() != data_.periods())
    throw ConstraintError(fmt::format("panel is {} nodes x {} periods but design is {} x {}",
                                      panel_.n(), panel_.periods(), data_.n(), data_.periods()));
  prior_.validate(data_.k_beta(), panel_.d());
  obs_ = observations(data_.periods(), lag_mode_);
  if (obs_.empty()) throw ConstraintError("no modeled observations");

  const int n = data_.n(), d = panel_.d();
  for (const auto& o : obs_) {
    Eigen::MatrixXd wy(n, d);
    const Eigen::VectorXd y = data_.responses.row(o.response).transpose();
    for (int l = 0; l < d; ++l) wy.col(l) = panel_.weights(l, o.network) * y;
    layer_y_.push_back(std::move(wy));
    x_rows_.push_back(data_.regressor_row(o.design));
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(prior_.Sigma_beta);
  prior_precision_ = llt.solve(Eigen::MatrixXd::Identity(data_.k_beta(), data_.k_beta()));
  prior_precision_ = 0.5 * (prior_precision_ + prior_precision_.transpose());
  prior_shift_ = llt.solve(prior_.mu_beta);
}

double PosteriorSampler::obs_variance(const ModelState& state, std::size_t o, int j) const {
  if (variance_mode_ == VarianceMode::static_variance) return state.sigma2[j];
  return std::exp(state.h(obs_[o].response, j));
}

Eigen::VectorXd PosteriorSampler::composite_times_y(const Eigen::VectorXd& delta,
                                                    std::size_t o) const {
  return layer_y_[o] * delta;
}

Eigen::MatrixXd PosteriorSampler::composite(const Eigen::VectorXd& delta, std::size_t o) const {
  Eigen::MatrixXd w = delta[0] * panel_.weights(0, obs_[o].network);
  for (int l = 1; l < panel_.d(); ++l) w.noalias() += delta[l] * panel_.weights(l, obs_[o].network);
  return w;
}

namespace {

Eigen::VectorXd node_mean(const Eigen::VectorXd& beta, const Eigen::VectorXd& x, int n) {
  const Eigen::Map<const Eigen::MatrixXd> b(beta.data(), n, x.size());
  return b * x;
}

}  // namespace

ModelState PosteriorSampler::initial_state() const {
  const int n = data_.n(), d = panel_.d();
  ModelState s;
  s.delta = Eigen::VectorXd::Constant(d, 1.0 / d);
  s.rho = Eigen::VectorXd::Zero(n);
  s.beta = prior_.mu_beta;
  s.sigma2 = Eigen::VectorXd::Ones(n);
  if (!prior_only_) {
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd col = data_.responses.col(j);
      const double v = (col.array() - col.mean()).square().sum() / (col.size() - 1.0);
      s.sigma2[j] = std::max(v, 1e-12);
    }
    s.h = s.sigma2.array().log().matrix().transpose().replicate(data_.periods(), 1);
    s.beta = beta_conditional_mean(s);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(n);
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::VectorXd r = data_.responses.row(obs_[o].response).transpose() -
                                node_mean(s.beta, x_rows_[o], n);
      ss += r.array().square().matrix();
    }
    s.sigma2 = (ss / static_cast<double>(obs_.size())).cwiseMax(1e-12);
  }
  s.h = s.sigma2.array().log().matrix().transpose().replicate(data_.periods(), 1);
  s.mu_h = s.sigma2.array().log();
  s.phi_h = Eigen::VectorXd::Constant(n, 0.5);
  s.sigma2_h = Eigen::VectorXd::Constant(n, 0.1);
  return s;
}

namespace {

struct GaussianConditional {
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd mean;
};

GaussianConditional solve_gaussian(Eigen::MatrixXd precision, const Eigen::VectorXd& shift) {
  GaussianConditional g;
  g.llt.compute(precision);
  if (g.llt.info() != Eigen::Success) {
    precision = 0.5 * (precision + precision.transpose());
    g.llt.compute(precision);
    if (g.llt.info() != Eigen::Success)
      throw NumericalError("beta full conditional precision is not positive definite");
  }
  g.mean = g.llt.solve(shift);
  return g;
}

}  // namespace

Eigen::VectorXd PosteriorSampler::beta_conditional_mean(const ModelState& state) const {
  const int n = data_.n(), regs = data_.regressors();
  Eigen::MatrixXd precision = prior_precision_;
  Eigen::VectorXd shift = prior_shift_;
  if (!prior_only_) {
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::VectorXd ay = data_.responses.row(obs_[o].response).transpose() -
                                 state.rho.cwiseProduct(composite_times_y(state.delta, o));
      const Eigen::VectorXd& x = x_rows_[o];
      for (int j = 0; j < n; ++j) {
        const double inv = 1.0 / obs_variance(state, o, j);
        for (int a = 0; a < regs; ++a) {
          shift[a * n + j] += x[a] * ay[j] * inv;
          for (int c = 0; c < regs; ++c) precision(a * n + j, c * n + j) += x[a] * x[c] * inv;
        }
      }
    }
  }
  return solve_gaussian(std::move(precision), shift).mean;
}

Eigen::VectorXd PosteriorSampler::sample_beta(const ModelState& state, Rng& rng) const {
  const int n = data_.n(), regs = data_.regressors();
  Eigen::MatrixXd precision = prior_precision_;
  Eigen::VectorXd shift = prior_shift_;
  if (!prior_only_) {
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::VectorXd ay = data_.responses.row(obs_[o].response).transpose() -
                                 state.rho.cwiseProduct(composite_times_y(state.delta, o));
      const Eigen::VectorXd& x = x_rows_[o];
      for (int j = 0; j < n; ++j) {
        const double inv = 1.0 / obs_variance(state, o, j);
        for (int a = 0; a < regs; ++a) {
          shift[a * n + j] += x[a] * ay[j] * inv;
          for (int c = 0; c < regs; ++c) precision(a * n + j, c * n + j) += x[a] * x[c] * inv;
        }
      }
    }
  }
  const GaussianConditional g = solve_gaussian(std::move(precision), shift);
  const Eigen::VectorXd z = rng.standard_normal_vector(g.mean.size());
  return g.mean + g.llt.matrixU().solve(z);
}

Eigen::VectorXd PosteriorSampler::sample_sigma2(const ModelState& state, Rng& rng) const {
  const int n = data_.n();
  Eigen::VectorXd shape = Eigen::VectorXd::Constant(n, prior_.sigma2_shape);
  Eigen::VectorXd scale = Eigen::VectorXd::Constant(n, prior_.sigma2_scale);
  if (!prior_only_) {
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::VectorXd r = data_.responses.row(obs_[o].response).transpose() -
                                state.rho.cwiseProduct(composite_times_y(state.delta, o)) -
                                node_mean(state.beta, x_rows_[o], n);
      scale += 0.5 * r.array().square().matrix();
      shape.array() += 0.5;
    }
  }
  Eigen::VectorXd out(n);
  for (int j = 0; j < n; ++j) {
    if (!(shape[j] > 0.0) || !(scale[j] > 0.0))
      throw NumericalError(fmt::format(
          "sigma2 full conditional for node {} is improper (shape {}, scale {})", j, shape[j],
          scale[j]));
    out[j] = rng.inverse_gamma(shape[j], scale[j]);
  }
  return out;
}

Eigen::MatrixXd PosteriorSampler::sample_h(const ModelState& state, Rng& rng) const {
  const int n = data_.n(), periods = data_.periods();
  std::vector<std::vector<std::optional<double>>> resid(
      n, std::vector<std::optional<double>>(periods));
  if (!prior_only_) {
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::VectorXd r = data_.responses.row(obs_[o].response).transpose() -
                                state.rho.cwiseProduct(composite_times_y(state.delta, o)) -
                                node_mean(state.beta, x_rows_[o], n);
      for (int j = 0; j < n; ++j) resid[j][obs_[o].response] = r[j];
    }
  }
  Eigen::MatrixXd h(periods, n);
  for (int j = 0; j < n; ++j) {
    const sv::Ar1Params p{state.mu_h[j], state.phi_h[j], state.sigma2_h[j]};
    h.col(j) = sv::sample_path(resid[j], state.h.col(j), p, rng);
  }
  return h;
}

int PosteriorSampler::sample_sv_params(ModelState& state, Rng& rng) const {
  int accepted = 0;
  for (int j = 0; j < data_.n(); ++j) {
    sv::Ar1Params p{state.mu_h[j], state.phi_h[j], state.sigma2_h[j]};
    if (sv::sample_params(state.h.col(j), p, prior_.sv, rng)) ++accepted;
    state.mu_h[j] = p.mu;
    state.phi_h[j] = p.phi;
    state.sigma2_h[j] = p.sigma2;
  }
  return accepted;
}

// rho ---------------------------------------------------------------------------

namespace {

/// Factorized full conditional of one rho_j. Row j of A_t is the only row
/// depending on rho_j, so det A_t(x) = det A_t(current) (1 - (x - current) g_t)
/// with g_t = W*_t[j, :] A_t^{-1}[:, j], and the residual term is quadratic.
struct RhoConditional {
  std::vector<double> g;
  double suu = 0.0, suv = 0.0, svv = 0.0;
  double current = 0.0;
  double a = 1.0, b = 1.0;
  bool prior_only = false;

  double log_prior(double x) const {
    return (a - 1.0) * std::log1p(x) + (b - 1.0) * std::log1p(-x);
  }
  double operator()(double x) const {
    if (!(x > -1.0 && x < 1.0)) return -std::numeric_limits<double>::infinity();
    double value = log_prior(x);
    if (prior_only) return value;
    const double shift = x - current;
    for (double gt : g) value += std::log(std::abs(1.0 - shift * gt));
    value -= 0.5 * (suu - 2.0 * x * suv + x * x * svv);
    return value;
  }
};

}  // namespace

void PosteriorSampler::sample_rho_indices(ModelState& state, std::span<const int> indices,
                                          Rng& rng, const SliceSettings& base) const {
  SliceSettings settings = base;
  settings.lower = -1.0;
  settings.upper = 1.0;
  const int n = data_.n();
  const std::size_t count = obs_.size();

  if (prior_only_) {
    for (int j : indices) {
      RhoConditional f;
      f.current = state.rho[j];
      f.a = prior_.a_rho;
      f.b = prior_.b_rho;
      f.prior_only = true;
      state.rho[j] = slice_sample(state.rho[j], f, rng, settings);
    }
    return;
  }

  std::vector<Eigen::MatrixXd> wstar(count), inverse(count);
  std::vector<Eigen::VectorXd> wy(count), mean(count);
  for (std::size_t o = 0; o < count; ++o) {
    wstar[o] = composite(state.delta, o);
    Eigen::MatrixXd a = -(state.rho.asDiagonal() * wstar[o]);
    a.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const auto diag = lu.matrixLU().diagonal().cwiseAbs();
    if (!(diag.minCoeff() > 1e-14 * std::max(diag.maxCoeff(), 1.0)))
      throw SingularityError(
          fmt::format("relational matrix is singular at period {}", obs_[o].network),
          obs_[o].network);
    inverse[o] = lu.inverse();
    wy[o] = composite_times_y(state.delta, o);
    mean[o] = node_mean(state.beta, x_rows_[o], n);
  }

  for (int j : indices) {
    RhoConditional f;
    f.current = state.rho[j];
    f.a = prior_.a_rho;
    f.b = prior_.b_rho;
    f.g.resize(count);
    for (std::size_t o = 0; o < count; ++o) {
      f.g[o] = wstar[o].row(j).dot(inverse[o].col(j));
      const double s = obs_variance(state, o, j);
      const double u = data_.responses(obs_[o].response, j) - mean[o][j];
      const double v = wy[o][j];
      f.suu += u * u / s;
      f.suv += u * v / s;
      f.svv += v * v / s;
    }
    const double updated = slice_sample(state.rho[j], f, rng, settings);
    const double change = updated - state.rho[j];
    if (change != 0.0) {
      // Sherman-Morrison: A loses change * e_j w_j' in row j.
      for (std::size_t o = 0; o < count; ++o) {
        const double denom = 1.0 - change * f.g[o];
        const Eigen::VectorXd column = inverse[o].col(j);
        const Eigen::RowVectorXd row = wstar[o].row(j) * inverse[o];
        inverse[o].noalias() += (change / denom) * column * row;
      }
    }
    state.rho[j] = updated;
  }
}

void PosteriorSampler::sample_rho(ModelState& state, Rng& rng,
                                  const SliceSettings& settings) const {
  std::vector<int> all(data_.n());
  for (int j = 0; j < data_.n(); ++j) all[j] = j;
  sample_rho_indices(state, all, rng, settings);
}

void PosteriorSampler::sample_rho(ModelState& state, int j, Rng& rng,
                                  const SliceSettings& settings) const {
  if (j < 0 || j >= data_.n()) throw ConstraintError("rho index out of range");
  const int one[] = {j};
  sample_rho_indices(state, one, rng, settings);
}

double PosteriorSampler::rho_log_conditional(const ModelState& state, int j, double value) const {
  if (!(value > -1.0 && value < 1.0)) return -std::numeric_limits<double>::infinity();
  double total = (prior_.a_rho - 1.0) * std::log1p(value) + (prior_.b_rho - 1.0) * std::log1p(-value);
  if (prior_only_) return total;
  ModelState s = state;
  s.rho[j] = value;
  const int n = data_.n();
  for (std::size_t o = 0; o < obs_.size(); ++o) {
    Eigen::MatrixXd a = -(s.rho.asDiagonal() * composite(s.delta, o));
    a.diagonal().array() += 1.0;
    const auto log_det = log_abs_determinant(a);
    if (!log_det) return -std::numeric_limits<double>::infinity();
    const double r = data_.responses(obs_[o].response, j) - value * composite_times_y(s.delta, o)[j] -
                     node_mean(s.beta, x_rows_[o], n)[j];
    total += *log_det - 0.5 * r * r / obs_variance(s, o, j);
  }
  return total;
}

double PosteriorSampler::rho_log_conditional_factorized(const ModelState& state, int j,
                                                        double value) const {
  const int n = data_.n();
  RhoConditional f;
  f.current = state.rho[j];
  f.a = prior_.a_rho;
  f.b = prior_.b_rho;
  f.prior_only = prior_only_;
  if (!prior_only_) {
    for (std::size_t o = 0; o < obs_.size(); ++o) {
      const Eigen::MatrixXd w = composite(state.delta, o);
      Eigen::MatrixXd a = -(state.rho.asDiagonal() * w);
      a.diagonal().array() += 1.0;
      const Eigen::VectorXd col = a.partialPivLu().solve(Eigen::VectorXd::Unit(n, j));
      f.g.push_back(w.row(j).dot(col));
      const double s = obs_variance(state, o, j);
      const double u = data_.responses(obs_[o].response, j) - node_mean(state.beta, x_rows_[o], n)[j];
      const double v = composite_times_y(state.delta, o)[j];
      f.suu += u * u / s;
      f.suv += u * v / s;
      f.svv += v * v / s;
    }
  }
  return f(value) - f(state.rho[j]);
}

// delta -------------------------------------------------------------------------

double PosteriorSampler::delta_log_likelihood(const ModelState& state, const Eigen::VectorXd& delta,
                                              int* singular_period) const {
  if (prior_only_) return 0.0;
  const int n = data_.n();
  double total = 0.0;
  for (std::size_t o = 0; o < obs_.size(); ++o) {
    Eigen::MatrixXd a = -(state.rho.asDiagonal() * composite(delta, o));
    a.diagonal().array() += 1.0;
    const auto log_det = log_abs_determinant(a);
    if (!log_det) {
      if (singular_period) *singular_period = obs_[o].network;
      return -std::numeric_limits<double>::infinity();
    }
    const Eigen::VectorXd r = data_.responses.row(obs_[o].response).transpose() -
                              state.rho.cwiseProduct(composite_times_y(delta, o)) -
                              node_mean(state.beta, x_rows_[o], n);
    double quad = 0.0;
    for (int j = 0; j < n; ++j) quad += r[j] * r[j] / obs_variance(state, o, j);
    total += *log_det - 0.5 * quad;
  }
  return total;
}

double PosteriorSampler::delta_log_acceptance_ratio(const ModelState& state,
                                                    const Eigen::VectorXd& proposal,
                                                    const Eigen::VectorXd& concentration) const {
  int period = -1;
  const double current_ll = delta_log_likelihood(state, state.delta, &period);
  if (!std::isfinite(current_ll))
    throw SingularityError(fmt::format("relational matrix is singular at period {}", period), period);
  const double proposal_ll = delta_log_likelihood(state, proposal);
  if (!std::isfinite(proposal_ll)) return -std::numeric_limits<double>::infinity();
  auto log_kernel = [](const Eigen::VectorXd& x, const Eigen::VectorXd& c) {
    return ((c.array() - 1.0) * x.array().log()).sum();
  };
  return (proposal_ll + log_kernel(proposal, prior_.dirichlet_c)) -
         (current_ll + log_kernel(state.delta, prior_.dirichlet_c)) +
         log_kernel(state.delta, concentration) - log_kernel(proposal, concentration);
}

bool PosteriorSampler::sample_delta(ModelState& state, const Eigen::VectorXd& concentration,
                                    Rng& rng) const {
  if (panel_.d() == 1) return false;
  const Eigen::VectorXd proposal = rng.dirichlet(concentration);
  const double log_ratio = delta_log_acceptance_ratio(state, proposal, concentration);
  if (std::log(rng.uniform()) < log_ratio) {
    state.delta = proposal;
    return true;
  }
  return false;
}

double PosteriorSampler::log_likelihood(const ModelState& state) const {
  if (prior_only_) return 0.0;
  const int n = data_.n();
  double total = 0.0;
  for (std::size_t o = 0; o < obs_.size(); ++o) {
    Eigen::MatrixXd a = -(state.rho.asDiagonal() * composite(state.delta, o));
    a.diagonal().array() += 1.0;
    const auto log_det = log_abs_determinant(a);
    if (!log_det)
      throw SingularityError(
          fmt::format("relational matrix is singular at period {}", obs_[o].network),
          obs_[o].network);
    const Eigen::VectorXd r = data_.responses.row(obs_[o].response).transpose() -
                              state.rho.cwiseProduct(composite_times_y(state.delta, o)) -
                              node_mean(state.beta, x_rows_[o], n);
    for (int j = 0; j < n; ++j) {
      const double s = obs_variance(state, o, j);
      total -= 0.5 * (std::log(s) + r[j] * r[j] / s);
    }
    total += *log_det;
  }
  return total - 0.5 * n * static_cast<double>(obs_.size()) * std::log(2.0 * std::numbers::pi);
}

// Chain -------------------------------------------------------------------------

namespace {

struct SweepCounts {
  bool delta_accepted = false;
  int phi_accepted = 0;
};

SweepCounts sweep(const PosteriorSampler& sampler, ModelState& state,
                  const Eigen::VectorXd& concentration, const SliceSettings& slice, Rng& rng) {
  SweepCounts counts;
  state.beta = sampler.sample_beta(state, rng);
  if (sampler.variance_mode() == VarianceMode::static_variance)
    state.sigma2 = sampler.sample_sigma2(state, rng);
  else
    state.h = sampler.sample_h(state, rng);
  counts.delta_accepted = sampler.sample_delta(state, concentration, rng);
  sampler.sample_rho(state, rng, slice);
  if (sampler.variance_mode() == VarianceMode::stochastic_volatility)
    counts.phi_accepted = sampler.sample_sv_params(state, rng);
  return counts;
}

SliceSettings slice_settings(const ChainConfig& config) {
  SliceSettings s;
  s.step_width = config.slice_step_width;
  s.max_steps = config.slice_max_steps;
  return s;
}

struct DirichletFit {
  Eigen::VectorXd mean;
  double precision = 0.0;
  bool ok = false;
};

DirichletFit moment_match(const std::vector<Eigen::VectorXd>& draws) {
  DirichletFit fit;
  if (draws.size() < 2) return fit;
  const Eigen::Index d = draws.front().size();
  fit.mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : draws) fit.mean += x;
  fit.mean /= static_cast<double>(draws.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& x : draws) var += (x - fit.mean).array().square().matrix();
  var /= static_cast<double>(draws.size() - 1);
  double sum = 0.0;
  int used = 0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (var[i] > 0.0) {
      sum += fit.mean[i] * (1.0 - fit.mean[i]) / var[i] - 1.0;
      ++used;
    }
  }
  if (used == 0) return fit;
  fit.precision = sum / used;
  fit.ok = std::isfinite(fit.precision) && fit.precision > 0.0;
  return fit;
}

}  // namespace

TuningReport tune_delta_proposal(const PosteriorSampler& sampler, ModelState& state,
                                 const ChainConfig& config, Rng& rng) {
  TuningReport report;
  const Eigen::VectorXd& prior_c = sampler.prior().dirichlet_c;
  report.concentration = prior_c;
  if (sampler.panel().d() == 1) {
    report.acceptance_rate = 1.0;
    return report;
  }
  const SliceSettings slice = slice_settings(config);

  auto run_stage = [&](const Eigen::VectorXd& concentration, int sweeps,
                       std::vector<Eigen::VectorXd>& draws) {
    int accepted = 0;
    for (int i = 0; i < sweeps; ++i) {
      if (sweep(sampler, state, concentration, slice, rng).delta_accepted) ++accepted;
      draws.push_back(state.delta);
    }
    return static_cast<double>(accepted) / sweeps;
  };

  // Stage 1: the prior as proposal.
  std::vector<Eigen::VectorXd> draws;
  const double first_rate = run_stage(prior_c, config.tuning_iters, draws);
  report.acceptance_rate = first_rate;
  if (first_rate == 0.0) {
    report.fell_back_to_prior = true;
    report.warning = "every tuning proposal was rejected; using the prior as proposal";
    return report;
  }
  // Discard the first half, which still carries the starting point.
  draws.erase(draws.begin(), draws.begin() + static_cast<std::ptrdiff_t>(draws.size() / 2));
  DirichletFit fit = moment_match(draws);
  if (!fit.ok) {
    report.fell_back_to_prior = true;
    report.warning = "tuning draws have no spread; using the prior as proposal";
    return report;
  }

  // Stage 2: refit from draws taken under the fitted proposal, then widen
  // it until acceptance reaches 0.15.
  constexpr double kTargetLow = 0.15;
  const int stage_sweeps = std::max(config.tuning_iters / 2, 100);
  Eigen::VectorXd concentration = fit.precision * fit.mean;
  draws.clear();
  double rate = run_stage(concentration, stage_sweeps, draws);
  if (const DirichletFit refit = moment_match(draws); refit.ok && rate > 0.0) {
    fit = refit;
    concentration = fit.precision * fit.mean;
  }
  for (int round = 0; round < 6; ++round) {
    draws.clear();
    rate = run_stage(concentration, stage_sweeps, draws);
    if (rate >= kTargetLow) break;
    concentration *= 0.5;
  }
  report.concentration = concentration;
  report.acceptance_rate = rate;
  if (rate < kTargetLow)
    report.warning = fmt::format("tuned delta proposal accepts only {:.3f}", rate);
  return report;
}

ChainOutput run_chain(const RegressionDesign& data, const MultilayerPanel& panel,
                      const PriorConfig& prior, const ChainConfig& config,
                      VarianceMode variance_mode, LagMode lag_mode, const RunHooks& hooks) {
  config.validate();
  if (!config.prior_only) {
    AssumptionReport report = validate_assumptions(panel);
    if (!report.passed) throw AssumptionFailure(std::move(report));
  }
  const auto started = std::chrono::steady_clock::now();
  PosteriorSampler sampler(data, panel, prior, variance_mode, lag_mode, config.prior_only);
  Rng rng(config.seed);
  ModelState state = sampler.initial_state();

  ChainOutput out;
  out.variance_mode = variance_mode;
  out.lag_mode = lag_mode;
  out.n = data.n();
  out.d = panel.d();
  out.k_beta = data.k_beta();
  out.periods = data.periods();
  out.seed = config.seed;
  if (config.delta_proposal_concentration.size() > 0) {
    if (config.delta_proposal_concentration.size() != panel.d())
      throw ConfigError("delta proposal concentration has the wrong length");
    out.tuning.concentration = config.delta_proposal_concentration;
  } else {
    out.tuning = tune_delta_proposal(sampler, state, config, rng);
  }
  const Eigen::VectorXd& concentration = out.tuning.concentration;
  const SliceSettings slice = slice_settings(config);

  int delta_accepts = 0, phi_accepts = 0, completed = 0;
  Eigen::MatrixXd h_sum;
  if (variance_mode == VarianceMode::stochastic_volatility)
    h_sum = Eigen::MatrixXd::Zero(data.periods(), data.n());
  for (int it = 1; it <= config.n_iter; ++it) {
    if (hooks.stop.stop_requested()) {
      out.truncated = true;
      break;
    }
    SweepCounts counts;
    try {
      counts = sweep(sampler, state, concentration, slice, rng);
    } catch (const SingularityError& e) {
      throw ChainAborted(fmt::format("chain aborted at iteration {}: {}", it, e.what()),
                         e.period(), it);
    }
    completed = it;
    if (counts.delta_accepted) ++delta_accepts;
    phi_accepts += counts.phi_accepted;
    if (it <= config.n_burnin || (it - config.n_burnin) % config.thin != 0) continue;
    check_state_constraints(state, variance_mode);
    if (variance_mode == VarianceMode::stochastic_volatility) h_sum += state.h;
    ModelState kept = state;
    if (!config.keep_h) kept.h.resize(0, 0);
    out.draws.push_back(std::move(kept));
    out.iterations.push_back(it);
    if (hooks.on_draw) hooks.on_draw(it, state);
  }
  if (completed > 0) {
    out.delta_acceptance_rate = panel.d() == 1 ? 1.0 : static_cast<double>(delta_accepts) / completed;
    out.phi_acceptance_rate = static_cast<double>(phi_accepts) / (completed * static_cast<double>(data.n()));
  }
  if (variance_mode == VarianceMode::stochastic_volatility && !out.draws.empty())
    out.h_mean = h_sum / static_cast<double>(out.draws.size());

  const DrawTable table = flatten(out, false);
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    const Eigen::VectorXd col = table.values.col(c);
    out.ess.emplace_back(table.names[c], stats::effective_sample_size({col.data(), static_cast<std::size_t>(col.size())}));
  }
  out.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<ChainOutput> run_chains(const RegressionDesign& data, const MultilayerPanel& panel,
                                    const PriorConfig& prior, const ChainConfig& config,
                                    VarianceMode variance_mode, LagMode lag_mode, int chains,
                                    int workers) {
  if (chains < 1) throw ConfigError("need at least one chain");
  std::vector<ChainOutput> results(chains);
  std::vector<std::exception_ptr> errors(chains);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int c = next++; c < chains; c = next++) {
      try {
        ChainConfig local = config;
        local.seed = chains == 1 ? config.seed : derive_seed(config.seed, static_cast<std::uint64_t>(c));
        results[c] = run_chain(data, panel, prior, local, variance_mode, lag_mode);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(workers, 1, chains);
  std::vector<std::jthread> pool;
  for (int w = 1; w < threads; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace mlsar
