#include "mlsar/stochastic_volatility.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>

#include "mlsar/error.hpp"

namespace mlsar::sv {

// Omori, Chib, Shephard and Nakajima (2007), Table 1.
const std::array<MixtureComponent, 10> kLogChiSquareMixture{{
    {0.00609, 1.92677, 0.11265},
    {0.04775, 1.34744, 0.17788},
    {0.13057, 0.73504, 0.26768},
    {0.20674, 0.02266, 0.40611},
    {0.22715, -0.85173, 0.62699},
    {0.18842, -1.97278, 0.98583},
    {0.12047, -3.46788, 1.57469},
    {0.05591, -5.55246, 2.54498},
    {0.01575, -8.68384, 4.16591},
    {0.00115, -14.65000, 7.33342},
}};

namespace {

void require_valid(const Ar1Params& p) {
  if (!(std::abs(p.phi) < 1.0)) throw ConstraintError("AR(1) coefficient outside (-1, 1)");
  if (!(p.sigma2 > 0.0)) throw ConstraintError("AR(1) innovation variance must be positive");
}

}  // namespace

Eigen::VectorXd ffbs(const Eigen::VectorXd& z, const Eigen::VectorXd& offset,
                     const Eigen::VectorXd& noise, const Ar1Params& params, Rng& rng) {
  require_valid(params);
  const Eigen::Index periods = z.size();
  Eigen::VectorXd filtered_mean(periods), filtered_var(periods);
  Eigen::VectorXd predicted_mean(periods), predicted_var(periods);

  double a = params.mu;
  double p = params.sigma2 / (1.0 - params.phi * params.phi);
  for (Eigen::Index t = 0; t < periods; ++t) {
    predicted_mean[t] = a;
    predicted_var[t] = p;
    double m = a, c = p;
    if (!std::isnan(z[t])) {
      const double gain = p / (p + noise[t]);
      m = a + gain * (z[t] - offset[t] - a);
      c = p * (1.0 - gain);
    }
    filtered_mean[t] = m;
    filtered_var[t] = c;
    a = params.mu + params.phi * (m - params.mu);
    p = params.phi * params.phi * c + params.sigma2;
  }

  Eigen::VectorXd h(periods);
  h[periods - 1] = filtered_mean[periods - 1] + std::sqrt(filtered_var[periods - 1]) * rng.normal();
  for (Eigen::Index t = periods - 2; t >= 0; --t) {
    const double c = filtered_var[t];
    const double next_var = predicted_var[t + 1];
    const double gain = c * params.phi / next_var;
    const double mean = filtered_mean[t] + gain * (h[t + 1] - predicted_mean[t + 1]);
    const double var = std::max(c - gain * params.phi * c, 0.0);
    h[t] = mean + std::sqrt(var) * rng.normal();
  }
  return h;
}

Eigen::VectorXd sample_path(std::span<const std::optional<double>> residuals,
                            const Eigen::VectorXd& current_h, const Ar1Params& params,
                            Rng& rng) {
  const auto periods = static_cast<Eigen::Index>(residuals.size());
  if (current_h.size() != periods) throw ConstraintError("path length does not match residuals");
  Eigen::VectorXd z(periods), offset(periods), noise(periods);
  std::array<double, 10> weights{};
  for (Eigen::Index t = 0; t < periods; ++t) {
    const auto& r = residuals[static_cast<std::size_t>(t)];
    if (!r) {
      z[t] = std::numeric_limits<double>::quiet_NaN();
      offset[t] = 0.0;
      noise[t] = 1.0;
      continue;
    }
    const double squared = (*r == 0.0) ? kZeroResidualOffset : (*r) * (*r);
    z[t] = std::log(squared);
    const double e = z[t] - current_h[t];
    for (std::size_t c = 0; c < weights.size(); ++c) {
      const auto& comp = kLogChiSquareMixture[c];
      const double dev = e - comp.mean;
      weights[c] = comp.probability / std::sqrt(comp.variance) *
                   std::exp(-0.5 * dev * dev / comp.variance);
    }
    std::size_t chosen = 0;
    if (std::accumulate(weights.begin(), weights.end(), 0.0) > 0.0) {
      chosen = rng.categorical(weights);
    } else {
      // far in a tail: every density underflowed, pick by log density
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < weights.size(); ++c) {
        const auto& comp = kLogChiSquareMixture[c];
        const double dev = e - comp.mean;
        const double lw = std::log(comp.probability) - 0.5 * std::log(comp.variance) -
                          0.5 * dev * dev / comp.variance;
        if (lw > best) {
          best = lw;
          chosen = c;
        }
      }
    }
    offset[t] = kLogChiSquareMixture[chosen].mean;
    noise[t] = kLogChiSquareMixture[chosen].variance;
  }
  return ffbs(z, offset, noise, params, rng);
}

double path_log_prior(const Eigen::VectorXd& h, const Ar1Params& params) {
  require_valid(params);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const double stationary = params.sigma2 / (1.0 - params.phi * params.phi);
  double total = -0.5 * (log2pi + std::log(stationary) +
                         (h[0] - params.mu) * (h[0] - params.mu) / stationary);
  for (Eigen::Index t = 1; t < h.size(); ++t) {
    const double e = h[t] - params.mu - params.phi * (h[t - 1] - params.mu);
    total -= 0.5 * (log2pi + std::log(params.sigma2) + e * e / params.sigma2);
  }
  return total;
}

bool sample_params(const Eigen::VectorXd& h, Ar1Params& params, const Priors& priors, Rng& rng) {
  require_valid(params);
  const Eigen::Index periods = h.size();
  if (periods < 2) throw ConstraintError("volatility parameters need a path of length >= 2");

  // sigma2 | mu, phi, h
  {
    const double phi = params.phi, mu = params.mu;
    double ss = (1.0 - phi * phi) * (h[0] - mu) * (h[0] - mu);
    for (Eigen::Index t = 1; t < periods; ++t) {
      const double e = h[t] - mu - phi * (h[t - 1] - mu);
      ss += e * e;
    }
    params.sigma2 = rng.inverse_gamma(priors.sigma2_shape + 0.5 * static_cast<double>(periods),
                                      priors.sigma2_scale + 0.5 * ss);
  }

  // phi | mu, sigma2, h
  bool accepted = false;
  {
    const double mu = params.mu;
    double sxx = 0.0, sxy = 0.0;
    for (Eigen::Index t = 1; t < periods; ++t) {
      sxx += (h[t - 1] - mu) * (h[t - 1] - mu);
      sxy += (h[t - 1] - mu) * (h[t] - mu);
    }
    auto log_rest = [&](double phi) {
      const double one_minus = 1.0 - phi * phi;
      return (priors.phi_a - 1.0) * std::log1p(phi) + (priors.phi_b - 1.0) * std::log1p(-phi) +
             0.5 * std::log(one_minus) -
             0.5 * one_minus * (h[0] - mu) * (h[0] - mu) / params.sigma2;
    };
    if (sxx > 0.0) {
      const double proposal_mean = sxy / sxx;
      const double proposal_sd = std::sqrt(params.sigma2 / sxx);
      const double candidate = rng.truncated_normal(proposal_mean, proposal_sd, -1.0, 1.0);
      if (std::log(rng.uniform()) < log_rest(candidate) - log_rest(params.phi)) {
        params.phi = candidate;
        accepted = true;
      }
    }
  }

  // mu | phi, sigma2, h
  {
    const double phi = params.phi, s2 = params.sigma2;
    double precision = 1.0 / priors.mu_variance + (1.0 - phi * phi) / s2 +
                       static_cast<double>(periods - 1) * (1.0 - phi) * (1.0 - phi) / s2;
    double weighted = priors.mu_mean / priors.mu_variance + (1.0 - phi * phi) * h[0] / s2;
    for (Eigen::Index t = 1; t < periods; ++t) weighted += (1.0 - phi) * (h[t] - phi * h[t - 1]) / s2;
    params.mu = weighted / precision + rng.normal() / std::sqrt(precision);
  }
  return accepted;
}

}  // namespace mlsar::sv
