#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Dense>

namespace mlsar {

/// Seeded random source used by every sampler in the library. All draws go
/// through one engine so a run is reproducible from its seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential();
  double gamma(double shape, double scale = 1.0);
  double inverse_gamma(double shape, double scale);
  double beta(double a, double b);
  /// Dirichlet draw; components are clamped to [1e-12, 1 - 1e-12] and
  /// renormalized so the result never touches the simplex boundary.
  Eigen::VectorXd dirichlet(const Eigen::VectorXd& alpha);
  /// Normal(mean, sd^2) restricted to (lo, hi), by inversion.
  double truncated_normal(double mean, double sd, double lo, double hi);
  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);
  Eigen::VectorXd standard_normal_vector(Eigen::Index size);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Derives a well-separated seed for an independent stream (e.g. chain c).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mlsar
