#include "mlsar/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "mlsar/detail/csv.hpp"
#include "mlsar/stats.hpp"

namespace mlsar {

const ParameterSummary& PosteriorSummary::at(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw ConfigError(fmt::format("no parameter named '{}'", name));
}

PosteriorSummary summarize(const DrawTable& table, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  const auto draws = static_cast<std::size_t>(table.values.rows());
  if (draws < kMinSummaryDraws)
    throw ConstraintError(
        fmt::format("{} draws are too few to summarize (need {})", draws, kMinSummaryDraws));
  PosteriorSummary out;
  out.level = level;
  out.draws = draws;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    std::vector<double> x(draws);
    for (std::size_t r = 0; r < draws; ++r) x[r] = table.values(static_cast<Eigen::Index>(r), c);
    ParameterSummary p;
    p.name = table.names[c];
    p.mean = stats::mean(x);
    p.ess = stats::effective_sample_size(x);
    std::sort(x.begin(), x.end());
    p.lo = stats::quantile_sorted(x, (1.0 - level) / 2.0);
    p.hi = stats::quantile_sorted(x, (1.0 + level) / 2.0);
    p.significant = !(p.lo <= 0.0 && 0.0 <= p.hi);
    out.parameters.push_back(std::move(p));
  }
  return out;
}

PosteriorSummary summarize(const ChainOutput& chain, double level) {
  return summarize(flatten(chain), level);
}

void write_summary_csv(const PosteriorSummary& summary, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "name,mean,lo,hi,significant,ess\n";
  for (const auto& p : summary.parameters)
    out << p.name << ',' << detail::format_double(p.mean) << ',' << detail::format_double(p.lo)
        << ',' << detail::format_double(p.hi) << ',' << (p.significant ? "true" : "false") << ','
        << detail::format_double(p.ess) << '\n';
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

std::string summary_text(const PosteriorSummary& summary) {
  std::size_t width = 9;
  for (const auto& p : summary.parameters) width = std::max(width, p.name.size());
  const double tail = 100.0 * (1.0 - summary.level) / 2.0;
  std::string text = fmt::format("{:<{}}  {:>10}  {:>10}  {:>10}  {:>8}\n", "parameter", width,
                                 "mean", fmt::format("{:g}%", tail),
                                 fmt::format("{:g}%", 100.0 - tail), "ess");
  for (const auto& p : summary.parameters)
    text += fmt::format("{:<{}}  {:>10.4f}  {:>10.4f}  {:>10.4f}  {:>8.1f}{}\n", p.name, width,
                        p.mean, p.lo, p.hi, p.ess, p.significant ? "  *" : "");
  text += fmt::format("{} draws; * marks intervals excluding zero\n", summary.draws);
  return text;
}

std::string node_table_text(const PosteriorSummary& summary, const std::string& prefix,
                            const std::vector<std::string>& node_labels) {
  std::vector<const ParameterSummary*> cols;
  for (int j = 0;; ++j) {
    const auto it = std::find_if(summary.parameters.begin(), summary.parameters.end(),
                                 [&](const auto& p) { return p.name == prefix + std::to_string(j); });
    if (it == summary.parameters.end()) break;
    cols.push_back(&*it);
  }
  const double tail = 100.0 * (1.0 - summary.level) / 2.0;
  std::string text = fmt::format("{:<12}", "");
  for (std::size_t j = 0; j < cols.size(); ++j)
    text += fmt::format("{:>9}", j < node_labels.size() ? node_labels[j] : std::to_string(j));
  text += '\n';
  auto row = [&](const std::string& label, auto field) {
    text += fmt::format("{:<12}", label);
    for (const auto* p : cols) text += fmt::format("{:>9.4f}", field(*p));
    text += '\n';
  };
  row("mean", [](const ParameterSummary& p) { return p.mean; });
  row(fmt::format("CI {:g}", tail), [](const ParameterSummary& p) { return p.lo; });
  row(fmt::format("CI {:g}", 100.0 - tail), [](const ParameterSummary& p) { return p.hi; });
  return text;
}

// Densities ---------------------------------------------------------------------

DensityEstimate kernel_density(std::span<const double> draws, const GridSpec& spec) {
  if (draws.empty()) throw ConstraintError("no draws for density estimation");
  if (spec.points < 2) throw ConfigError("density grid needs at least two points");
  DensityEstimate out;
  std::vector<double> sorted(draws.begin(), draws.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    out.point_mass = true;
    out.point = sorted.front();
    return out;
  }
  const double m = static_cast<double>(sorted.size());
  const double sd = std::sqrt(stats::variance(sorted));
  const double iqr = stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  out.bandwidth = 0.9 * spread * std::pow(m, -0.2);
  const double lower = spec.lower.value_or(sorted.front() - 4.0 * out.bandwidth);
  const double upper = spec.upper.value_or(sorted.back() + 4.0 * out.bandwidth);
  if (!(upper > lower)) throw ConfigError("density grid upper bound must exceed the lower bound");
  const double step = (upper - lower) / (spec.points - 1);
  const double norm = 1.0 / (m * out.bandwidth * std::sqrt(2.0 * std::numbers::pi));
  for (int g = 0; g < spec.points; ++g) {
    const double x = lower + g * step;
    // Only draws within 8 bandwidths contribute measurably.
    const auto first = std::lower_bound(sorted.begin(), sorted.end(), x - 8.0 * out.bandwidth);
    const auto last = std::upper_bound(sorted.begin(), sorted.end(), x + 8.0 * out.bandwidth);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const double z = (x - *it) / out.bandwidth;
      sum += std::exp(-0.5 * z * z);
    }
    out.grid.push_back(x);
    out.density.push_back(sum * norm);
  }
  return out;
}

DensityEstimate density_export(const DrawTable& table, const std::string& parameter,
                               const GridSpec& grid) {
  const auto values = table.column_values(parameter);
  return kernel_density(values, grid);
}

void write_density_csv(const DensityEstimate& density, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  if (density.point_mass) {
    out << "# point mass at " << detail::format_double(density.point) << '\n';
    return;
  }
  out << "grid,density\n";
  for (std::size_t g = 0; g < density.grid.size(); ++g)
    out << detail::format_double(density.grid[g]) << ',' << detail::format_double(density.density[g])
        << '\n';
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

// Correlations ------------------------------------------------------------------

CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& series) {
  const auto n = static_cast<std::size_t>(series.cols());
  const auto periods = static_cast<std::size_t>(series.rows());
  CorrelationMatrix out(n, std::vector<CorrelationCell>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd a = series.col(static_cast<Eigen::Index>(i));
    for (std::size_t j = i; j < n; ++j) {
      const Eigen::VectorXd b = series.col(static_cast<Eigen::Index>(j));
      CorrelationCell cell;
      cell.correlation = stats::pearson({a.data(), periods}, {b.data(), periods});
      if (cell.correlation && i == j) cell.correlation = 1.0;
      if (cell.correlation) {
        cell.p_value = stats::correlation_p_value(*cell.correlation, periods);
        cell.stars = stats::significance_stars(cell.p_value);
      }
      out[i][j] = cell;
      out[j][i] = cell;
    }
  }
  return out;
}

CrossCorrelation effect_crosscorrelation_matrix(const EffectSeries& effects) {
  if (effects.direct.rows() != effects.indirect.rows() ||
      effects.direct.rows() != effects.total.rows())
    throw ConstraintError("effect series are not aligned");
  return {correlation_matrix(effects.total), correlation_matrix(effects.direct),
          correlation_matrix(effects.indirect)};
}

void write_correlation_csv(const CorrelationMatrix& matrix, const std::filesystem::path& path,
                           const std::vector<std::string>& labels) {
  auto out = detail::open_output(path);
  auto label = [&](std::size_t i) { return i < labels.size() ? labels[i] : std::to_string(i); };
  out << "node";
  for (std::size_t j = 0; j < matrix.size(); ++j) out << ',' << label(j);
  out << '\n';
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << label(i);
    for (const auto& cell : matrix[i]) {
      if (cell.correlation)
        out << ',' << fmt::format("{:.4f}", *cell.correlation) << cell.stars;
      else
        out << ",NA";
    }
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace mlsar
