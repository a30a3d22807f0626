#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/mcmc.hpp"
#include "mlsar/spillovers.hpp"

namespace mlsar {

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double lo = 0.0;  // lower quantile of the credible interval
  double hi = 0.0;
  bool significant = false;  // interval excludes zero
  double ess = 0.0;
};

struct PosteriorSummary {
  double level = 0.95;
  std::size_t draws = 0;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary& at(const std::string& name) const;
};

inline constexpr std::size_t kMinSummaryDraws = 100;

/// Empirical mean and type-7 quantiles at (1 - level)/2 and (1 + level)/2.
/// Requires at least kMinSummaryDraws draws.
PosteriorSummary summarize(const DrawTable& table, double level = 0.95);
PosteriorSummary summarize(const ChainOutput& chain, double level = 0.95);

/// name,mean,lo,hi,significant,ess
void write_summary_csv(const PosteriorSummary& summary, const std::filesystem::path& path);
/// Aligned text table of every parameter.
std::string summary_text(const PosteriorSummary& summary);
/// Per-node block for parameters named `<prefix><j>`: a mean row and the
/// two interval rows, one column per node.
std::string node_table_text(const PosteriorSummary& summary, const std::string& prefix,
                            const std::vector<std::string>& node_labels);

struct GridSpec {
  int points = 512;
  std::optional<double> lower;
  std::optional<double> upper;
};

struct DensityEstimate {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
  /// Set when every draw is identical; grid and density are then empty.
  bool point_mass = false;
  double point = 0.0;
};

/// Gaussian kernel density with Silverman's bandwidth
/// 0.9 min(sd, IQR / 1.34) m^{-1/5}. The default grid spans the draws
/// padded by four bandwidths.
DensityEstimate kernel_density(std::span<const double> draws, const GridSpec& grid = {});
DensityEstimate density_export(const DrawTable& table, const std::string& parameter,
                               const GridSpec& grid = {});
/// grid,density, or a single "# point mass at x" line.
void write_density_csv(const DensityEstimate& density, const std::filesystem::path& path);

struct CorrelationCell {
  std::optional<double> correlation;  // empty when a series has zero variance
  double p_value = 1.0;
  std::string stars;
};
using CorrelationMatrix = std::vector<std::vector<CorrelationCell>>;

/// Pairwise Pearson correlations of the columns of a periods x nodes matrix.
CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& series);

struct CrossCorrelation {
  CorrelationMatrix overall;
  CorrelationMatrix direct;
  CorrelationMatrix indirect;
};
CrossCorrelation effect_crosscorrelation_matrix(const EffectSeries& effects);

/// Square layout with "r<stars>" cells and "NA" where undefined.
void write_correlation_csv(const CorrelationMatrix& matrix, const std::filesystem::path& path,
                           const std::vector<std::string>& labels = {});

}  // namespace mlsar
