#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mlsar::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance (divisor n - 1).
double variance(std::span<const double> x);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted data.
double quantile(std::span<const double> x, double p);
/// Type-7 quantile of data already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double p);

/// Pearson correlation; empty when either series has zero variance.
std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y);

/// Two-sided p-value of H0: correlation = 0, using t = r sqrt((T-2)/(1-r^2))
/// with T - 2 degrees of freedom.
double correlation_p_value(double r, std::size_t sample_size);

/// "***" below 1%, "**" below 5%, "*" below 10%, empty otherwise.
std::string significance_stars(double p_value);

/// Effective sample size from Geyer's initial monotone sequence estimator.
double effective_sample_size(std::span<const double> x);

/// Mean and Monte-Carlo standard error by non-overlapping batch means.
struct BatchMeans {
  double mean = 0.0;
  double standard_error = 0.0;
};
BatchMeans batch_means(std::span<const double> x, std::size_t batches = 50);

}  // namespace mlsar::stats
