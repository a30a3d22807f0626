#pragma once

#include <array>
#include <optional>
#include <span>

#include <Eigen/Dense>

#include "mlsar/random.hpp"

namespace mlsar::sv {

/// Ten-component normal mixture approximating the log chi-square(1)
/// distribution of log(eps^2), eps ~ N(0, 1) (Omori, Chib, Shephard and
/// Nakajima, 2007).
struct MixtureComponent {
  double probability;
  double mean;
  double variance;
};
extern const std::array<MixtureComponent, 10> kLogChiSquareMixture;

/// Added to a squared residual only when the residual is exactly zero, so
/// the log transform stays finite.
inline constexpr double kZeroResidualOffset = 1e-10;

struct Ar1Params {
  double mu = 0.0;
  double phi = 0.0;
  double sigma2 = 1.0;
};

struct Priors {
  double mu_mean = 0.0;
  double mu_variance = 100.0;
  /// (phi + 1) / 2 ~ Beta(phi_a, phi_b)
  double phi_a = 5.0;
  double phi_b = 1.5;
  /// sigma2 ~ InvGamma(sigma2_shape, sigma2_scale)
  double sigma2_shape = 2.5;
  double sigma2_scale = 0.025;
};

/// Draws a log-variance path h given structural residuals r_t ~ N(0, e^{h_t})
/// for one node. Each log(r_t^2) is linearized with the mixture above, the
/// component indicators are drawn given the current path, and the path is
/// redrawn jointly by forward filtering, backward sampling. An empty
/// optional residual marks a period with no observation.
Eigen::VectorXd sample_path(std::span<const std::optional<double>> residuals,
                            const Eigen::VectorXd& current_h, const Ar1Params& params,
                            Rng& rng);

/// Forward-filter backward-sample for the linear Gaussian model
///   z_t = h_t + offset_t + N(0, noise_t),  h AR(1) with `params`,
/// where periods with a NaN z_t carry no observation.
Eigen::VectorXd ffbs(const Eigen::VectorXd& z, const Eigen::VectorXd& offset,
                     const Eigen::VectorXd& noise, const Ar1Params& params, Rng& rng);

/// Updates (mu, phi, sigma2) given a path: Gaussian for mu, inverse gamma
/// for sigma2, and an independence Metropolis step for phi whose truncated
/// normal proposal is the AR regression posterior on (-1, 1).
/// Returns whether the phi proposal was accepted.
bool sample_params(const Eigen::VectorXd& h, Ar1Params& params, const Priors& priors,
                   Rng& rng);

/// Log density of the path under the stationary AR(1) prior.
double path_log_prior(const Eigen::VectorXd& h, const Ar1Params& params);

}  // namespace mlsar::sv
