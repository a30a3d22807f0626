#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/mcmc.hpp"
#include "mlsar/model.hpp"
#include "mlsar/networks.hpp"

namespace mlsar {

/// S_t = A_t^{-1} by dense LU solve. Throws SingularityError naming t.
Eigen::MatrixXd spatial_multiplier(const MultilayerPanel& panel, const StructuralParams& params,
                                   int t);
/// I + (R W*) + ... + (R W*)^order, for cross-checking the dense solve.
Eigen::MatrixXd neumann_multiplier(const MultilayerPanel& panel, const StructuralParams& params,
                                   int t, int order);

/// Own effects: the diagonal of S.
Eigen::VectorXd direct_effects(const Eigen::MatrixXd& multiplier);
/// Column sums of the off-diagonal part of S: what a shock to node j does
/// to everyone else.
Eigen::VectorXd indirect_effects(const Eigen::MatrixXd& multiplier);
/// direct + indirect.
Eigen::VectorXd total_effects(const Eigen::MatrixXd& multiplier);

/// periods x nodes.
struct EffectSeries {
  Eigen::MatrixXd direct;
  Eigen::MatrixXd indirect;
  Eigen::MatrixXd total;
  std::optional<int> draw_index;
};

EffectSeries effect_series(const MultilayerPanel& panel, const StructuralParams& params);

struct EffectBands {
  Eigen::MatrixXd mean, lo, hi;
};

/// Posterior summary of the effect series over the draws of a chain.
struct EffectSummary {
  EffectBands direct, indirect, total;
  int draws_used = 0;
  /// Draws with a singular relational matrix in some period; left out of
  /// every summary.
  std::vector<int> excluded_draws;

  EffectSeries mean_series() const;
};

/// Bands are the 2.5% and 97.5% posterior quantiles. Periods are split
/// over `workers` threads; the result does not depend on the split.
EffectSummary effect_series(const MultilayerPanel& panel, const ChainOutput& chain,
                            int workers = 1);

struct EffectCorrelation {
  double correlation = 0.0;
  double p_value = 1.0;
  std::string stars;
};

/// Pearson correlation of each node's indirect-effect series with an
/// external index, with a two-sided t-test. Throws NumericalError when a
/// series has zero variance.
std::vector<EffectCorrelation> effect_external_correlation(const EffectSeries& effects,
                                                           std::span<const double> external);

/// Long format, one row per (period, node):
/// period,country,direct_mean,direct_lo,direct_hi,indirect_mean,...,total_hi
void write_effect_summary_csv(const EffectSummary& summary, const std::filesystem::path& path,
                              const std::vector<std::string>& period_labels = {},
                              const std::vector<std::string>& node_labels = {});

}  // namespace mlsar
