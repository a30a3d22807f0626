#include "mlsar/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "mlsar/error.hpp"

namespace mlsar {

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  double u = 0.0;
  do {
    u = std::generate_canonical<double, 53>(engine_);
  } while (u <= 0.0 || u >= 1.0);
  return u;
}

double Rng::normal() { return normal_(engine_); }

double Rng::exponential() { return -std::log(uniform()); }

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ConstraintError("gamma: shape and scale must be positive");
  std::gamma_distribution<double> dist(shape, scale);
  return dist(engine_);
}

double Rng::inverse_gamma(double shape, double scale) {
  return 1.0 / gamma(shape, 1.0 / scale);
}

double Rng::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

Eigen::VectorXd Rng::dirichlet(const Eigen::VectorXd& alpha) {
  Eigen::VectorXd out(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) out[i] = gamma(alpha[i]);
  double total = out.sum();
  if (!(total > 0.0)) {
    // every gamma underflowed; fall back to the mean direction
    out = alpha / alpha.sum();
    total = 1.0;
  }
  out /= total;
  if (out.size() > 1) {
    constexpr double kFloor = 1e-12;
    out = out.cwiseMax(kFloor).cwiseMin(1.0 - kFloor);
    out /= out.sum();
  }
  return out;
}

double Rng::truncated_normal(double mean, double sd, double lo, double hi) {
  if (!(hi > lo)) throw ConstraintError("truncated_normal: empty interval");
  const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  // Work in whichever tail keeps the CDF values away from 1.
  double x = 0.0;
  if (a > 0.0) {
    const double qa = boost::math::cdf(boost::math::complement(std_normal, a));
    const double qb = boost::math::cdf(boost::math::complement(std_normal, b));
    const double q = qb + uniform() * (qa - qb);
    x = boost::math::quantile(boost::math::complement(std_normal, q));
  } else {
    const double pa = boost::math::cdf(std_normal, a);
    const double pb = boost::math::cdf(std_normal, b);
    const double p = pa + uniform() * (pb - pa);
    x = boost::math::quantile(std_normal, std::clamp(p, 1e-300, 1.0 - 1e-16));
  }
  const double value = mean + sd * x;
  // Guard the open interval against rounding at the ends.
  const double eps = 1e-12 * (hi - lo);
  return std::clamp(value, lo + eps, hi - eps);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw NumericalError("categorical: weights sum to zero");
  double target = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target <= 0.0) return i;
  }
  return weights.size() - 1;
}

Eigen::VectorXd Rng::standard_normal_vector(Eigen::Index size) {
  Eigen::VectorXd z(size);
  for (Eigen::Index i = 0; i < size; ++i) z[i] = normal();
  return z;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace mlsar
