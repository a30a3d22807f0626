#include "mlsar/spillovers.hpp"

#include <algorithm>
#include <functional>
#include <thread>

#include <fmt/format.h>

#include "mlsar/detail/csv.hpp"
#include "mlsar/stats.hpp"

namespace mlsar {

namespace {

std::optional<Eigen::MatrixXd> try_inverse(const Eigen::MatrixXd& a) {
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  if (!(diag.minCoeff() > 1e-14 * std::max(diag.maxCoeff(), 1.0))) return std::nullopt;
  Eigen::MatrixXd s = lu.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
  if (!s.allFinite()) return std::nullopt;
  return s;
}

}  // namespace

Eigen::MatrixXd spatial_multiplier(const MultilayerPanel& panel, const StructuralParams& params,
                                   int t) {
  auto s = try_inverse(build_relational_matrix(panel, params, t));
  if (!s) throw SingularityError(fmt::format("relational matrix is singular at period {}", t), t);
  return *s;
}

Eigen::MatrixXd neumann_multiplier(const MultilayerPanel& panel, const StructuralParams& params,
                                   int t, int order) {
  const Eigen::MatrixXd step =
      params.rho.asDiagonal() * composite_network(panel, params.delta, t).matrix;
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(panel.n(), panel.n());
  Eigen::MatrixXd sum = power;
  for (int l = 1; l <= order; ++l) {
    power = power * step;
    sum += power;
  }
  return sum;
}

Eigen::VectorXd direct_effects(const Eigen::MatrixXd& multiplier) {
  return multiplier.diagonal();
}

Eigen::VectorXd indirect_effects(const Eigen::MatrixXd& multiplier) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(multiplier.cols());
  for (Eigen::Index j = 0; j < multiplier.cols(); ++j)
    for (Eigen::Index i = 0; i < multiplier.rows(); ++i)
      if (i != j) out[j] += multiplier(i, j);
  return out;
}

Eigen::VectorXd total_effects(const Eigen::MatrixXd& multiplier) {
  return direct_effects(multiplier) + indirect_effects(multiplier);
}

EffectSeries effect_series(const MultilayerPanel& panel, const StructuralParams& params) {
  validate_params(params, panel.n(), panel.d(), static_cast<int>(params.beta.size()));
  const int periods = panel.periods(), n = panel.n();
  EffectSeries out;
  out.direct.resize(periods, n);
  out.indirect.resize(periods, n);
  out.total.resize(periods, n);
  for (int t = 0; t < periods; ++t) {
    const Eigen::MatrixXd s = spatial_multiplier(panel, params, t);
    const Eigen::VectorXd direct = direct_effects(s);
    const Eigen::VectorXd indirect = indirect_effects(s);
    out.direct.row(t) = direct.transpose();
    out.indirect.row(t) = indirect.transpose();
    out.total.row(t) = (direct + indirect).transpose();
  }
  return out;
}

EffectSeries EffectSummary::mean_series() const {
  return {direct.mean, indirect.mean, total.mean, std::nullopt};
}

namespace {

void parallel_periods(int periods, int workers, const std::function<void(int)>& body) {
  const int threads = std::clamp(workers, 1, std::max(periods, 1));
  if (threads == 1) {
    for (int t = 0; t < periods; ++t) body(t);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        try {
          for (int t = w; t < periods; t += threads) body(t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

StructuralParams draw_params(const ModelState& s) { return {s.beta, s.delta, s.rho}; }

}  // namespace

EffectSummary effect_series(const MultilayerPanel& panel, const ChainOutput& chain, int workers) {
  if (chain.draws.empty()) throw ConfigError("chain has no draws");
  const int periods = panel.periods(), n = panel.n();
  const int draws = static_cast<int>(chain.draws.size());
  if (chain.n != 0 && chain.n != n)
    throw ConstraintError(fmt::format("chain has {} nodes but the panel has {}", chain.n, n));

  // First pass: find draws whose relational matrix is singular anywhere.
  std::vector<std::vector<char>> singular_at(periods, std::vector<char>(draws, 0));
  parallel_periods(periods, workers, [&](int t) {
    for (int r = 0; r < draws; ++r) {
      const Eigen::MatrixXd a = build_relational_matrix(panel, draw_params(chain.draws[r]), t);
      if (!try_inverse(a)) singular_at[t][r] = 1;
    }
  });
  std::vector<int> used;
  EffectSummary out;
  for (int r = 0; r < draws; ++r) {
    bool bad = false;
    for (int t = 0; t < periods && !bad; ++t) bad = singular_at[t][r] != 0;
    if (bad)
      out.excluded_draws.push_back(r);
    else
      used.push_back(r);
  }
  out.draws_used = static_cast<int>(used.size());
  if (used.empty()) throw NumericalError("every draw has a singular relational matrix");

  for (EffectBands* b : {&out.direct, &out.indirect, &out.total}) {
    b->mean.resize(periods, n);
    b->lo.resize(periods, n);
    b->hi.resize(periods, n);
  }
  parallel_periods(periods, workers, [&](int t) {
    const std::size_t m = used.size();
    std::vector<std::vector<double>> direct(n, std::vector<double>(m)),
        indirect(n, std::vector<double>(m)), total(n, std::vector<double>(m));
    for (std::size_t k = 0; k < m; ++k) {
      const Eigen::MatrixXd a = build_relational_matrix(panel, draw_params(chain.draws[used[k]]), t);
      const Eigen::MatrixXd s = *try_inverse(a);
      const Eigen::VectorXd dv = direct_effects(s), iv = indirect_effects(s);
      for (int j = 0; j < n; ++j) {
        direct[j][k] = dv[j];
        indirect[j][k] = iv[j];
        total[j][k] = dv[j] + iv[j];
      }
    }
    auto fill = [&](EffectBands& b, std::vector<std::vector<double>>& values) {
      for (int j = 0; j < n; ++j) {
        b.mean(t, j) = stats::mean(values[j]);
        std::sort(values[j].begin(), values[j].end());
        b.lo(t, j) = stats::quantile_sorted(values[j], 0.025);
        b.hi(t, j) = stats::quantile_sorted(values[j], 0.975);
      }
    };
    fill(out.direct, direct);
    fill(out.indirect, indirect);
    fill(out.total, total);
  });
  return out;
}

std::vector<EffectCorrelation> effect_external_correlation(const EffectSeries& effects,
                                                           std::span<const double> external) {
  const auto periods = static_cast<std::size_t>(effects.indirect.rows());
  if (external.size() != periods)
    throw ConstraintError(fmt::format("external series has {} values for {} periods",
                                      external.size(), periods));
  for (double v : external)
    if (!std::isfinite(v)) throw ConstraintError("external series has missing values");
  std::vector<EffectCorrelation> out;
  for (Eigen::Index j = 0; j < effects.indirect.cols(); ++j) {
    const Eigen::VectorXd col = effects.indirect.col(j);
    const auto r = stats::pearson({col.data(), periods}, external);
    if (!r)
      throw NumericalError(fmt::format("correlation for node {} is undefined (zero variance)", j));
    EffectCorrelation c;
    c.correlation = *r;
    c.p_value = stats::correlation_p_value(*r, periods);
    c.stars = stats::significance_stars(c.p_value);
    out.push_back(c);
  }
  return out;
}

void write_effect_summary_csv(const EffectSummary& summary, const std::filesystem::path& path,
                              const std::vector<std::string>& period_labels,
                              const std::vector<std::string>& node_labels) {
  auto out = detail::open_output(path);
  out << "period,country,direct_mean,direct_lo,direct_hi,indirect_mean,indirect_lo,indirect_hi,"
         "total_mean,total_lo,total_hi\n";
  const auto& d = summary.direct;
  for (Eigen::Index t = 0; t < d.mean.rows(); ++t) {
    for (Eigen::Index j = 0; j < d.mean.cols(); ++j) {
      const std::string period =
          static_cast<std::size_t>(t) < period_labels.size() ? period_labels[t] : std::to_string(t);
      const std::string node =
          static_cast<std::size_t>(j) < node_labels.size() ? node_labels[j] : std::to_string(j);
      out << period << ',' << node;
      for (const EffectBands* b : {&summary.direct, &summary.indirect, &summary.total})
        out << ',' << detail::format_double(b->mean(t, j)) << ','
            << detail::format_double(b->lo(t, j)) << ',' << detail::format_double(b->hi(t, j));
      out << '\n';
    }
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

}  // namespace mlsar
