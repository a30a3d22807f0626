#include "mlsar/networks.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mlsar {

Normalization parse_normalization(const std::string& name) {
  if (name == "none") return Normalization::none;
  if (name == "row") return Normalization::row;
  if (name == "maxrow" || name == "max_row") return Normalization::max_row;
  throw ConfigError(fmt::format("unknown normalization '{}'", name));
}

std::string to_string(Normalization normalization) {
  switch (normalization) {
    case Normalization::none: return "none";
    case Normalization::row: return "row";
    case Normalization::max_row: return "maxrow";
  }
  return "none";
}

MultilayerPanel::MultilayerPanel(int n, int d, int periods)
    : n_(n), d_(d), periods_(periods) {
  if (n < 1 || d < 1 || periods < 1)
    throw ConstraintError("panel dimensions must be positive");
  matrices_.assign(static_cast<std::size_t>(d) * periods,
                   Eigen::MatrixXd::Zero(n, n));
}

MultilayerPanel::MultilayerPanel(std::vector<std::vector<Eigen::MatrixXd>> layers) {
  if (layers.empty() || layers.front().empty())
    throw ConstraintError("panel needs at least one layer and one period");
  d_ = static_cast<int>(layers.size());
  periods_ = static_cast<int>(layers.front().size());
  n_ = static_cast<int>(layers.front().front().rows());
  matrices_.reserve(static_cast<std::size_t>(d_) * periods_);
  for (int l = 0; l < d_; ++l) {
    if (static_cast<int>(layers[l].size()) != periods_)
      throw ConstraintError(fmt::format("layer {} has {} periods, expected {}", l,
                                        layers[l].size(), periods_));
    for (auto& m : layers[l]) {
      if (m.rows() != n_ || m.cols() != n_)
        throw ConstraintError(fmt::format("layer {} holds a {}x{} matrix, expected {}x{}",
                                          l, m.rows(), m.cols(), n_, n_));
      matrices_.push_back(std::move(m));
    }
  }
}

std::size_t MultilayerPanel::index(int layer, int t) const {
  if (layer < 0 || layer >= d_ || t < 0 || t >= periods_)
    throw ConstraintError(fmt::format("panel index (layer {}, t {}) out of range", layer, t));
  return static_cast<std::size_t>(layer) * periods_ + t;
}

const Eigen::MatrixXd& MultilayerPanel::weights(int layer, int t) const {
  return matrices_[index(layer, t)];
}

Eigen::MatrixXd& MultilayerPanel::weights(int layer, int t) {
  return matrices_[index(layer, t)];
}

LayerSnapshot MultilayerPanel::snapshot(int layer, int t) const {
  return LayerSnapshot{weights(layer, t), t, layer};
}

void MultilayerPanel::validate() const {
  if (n_ < 1) throw ConstraintError("empty panel");
  for (int l = 0; l < d_; ++l) {
    for (int t = 0; t < periods_; ++t) {
      const auto& w = weights(l, t);
      if (!w.allFinite())
        throw ConstraintError(fmt::format("layer {} period {}: non-finite weight", l, t));
      if ((w.array() < 0.0).any())
        throw ConstraintError(fmt::format("layer {} period {}: negative weight", l, t));
      if ((w.diagonal().array() != 0.0).any())
        throw ConstraintError(fmt::format("layer {} period {}: nonzero diagonal", l, t));
    }
  }
}

void require_simplex(const Eigen::VectorXd& delta, double tolerance) {
  if (delta.size() == 0) throw ConstraintError("layer weights are empty");
  if ((delta.array() < 0.0).any() || !delta.allFinite())
    throw ConstraintError("layer weights must be non-negative");
  if (std::abs(delta.sum() - 1.0) > tolerance)
    throw ConstraintError(
        fmt::format("layer weights sum to {:.17g}, not 1", delta.sum()));
}

MultilayerPanel standard_row_normalize(const MultilayerPanel& panel) {
  MultilayerPanel out = panel;
  for (int l = 0; l < panel.d(); ++l) {
    for (int t = 0; t < panel.periods(); ++t) {
      auto& w = out.weights(l, t);
      for (Eigen::Index j = 0; j < w.rows(); ++j) {
        const double sum = w.row(j).sum();
        if (sum > 0.0) w.row(j) /= sum;
      }
    }
  }
  return out;
}

MultilayerPanel max_row_normalize(const MultilayerPanel& panel) {
  MultilayerPanel out = panel;
  for (int l = 0; l < panel.d(); ++l) {
    for (int j = 0; j < panel.n(); ++j) {
      double largest = 0.0;
      for (int t = 0; t < panel.periods(); ++t)
        largest = std::max(largest, panel.weights(l, t).row(j).sum());
      if (!(largest > 0.0)) continue;  // surfaces as an A4 violation
      for (int t = 0; t < panel.periods(); ++t) out.weights(l, t).row(j) /= largest;
    }
  }
  return out;
}

MultilayerPanel normalize(const MultilayerPanel& panel, Normalization how) {
  switch (how) {
    case Normalization::row: return standard_row_normalize(panel);
    case Normalization::max_row: return max_row_normalize(panel);
    case Normalization::none: return panel;
  }
  return panel;
}

CompositeNetwork composite_network(const MultilayerPanel& panel,
                                   const Eigen::VectorXd& delta, int t) {
  if (delta.size() != panel.d())
    throw ConstraintError(fmt::format("{} layer weights for {} layers", delta.size(), panel.d()));
  require_simplex(delta);
  CompositeNetwork out{Eigen::MatrixXd::Zero(panel.n(), panel.n()), delta};
  for (int l = 0; l < panel.d(); ++l) out.matrix.noalias() += delta[l] * panel.weights(l, t);
  return out;
}

std::string AssumptionReport::describe() const {
  if (passed) return "all identification assumptions hold";
  std::string text;
  for (const auto& v : a1_violations)
    text += fmt::format("A1: layer {} is empty at period {}\n", v.layer, v.t);
  for (const auto& v : a2_violations)
    text += fmt::format("A2: layers {} and {} are identical at period {}\n", v.first,
                        v.second, v.t);
  for (const auto& v : a4_violations)
    text += fmt::format("A4: node {} has no links in any layer at period {}\n", v.row, v.t);
  return text;
}

AssumptionReport validate_assumptions(const MultilayerPanel& panel,
                                      const std::optional<Eigen::VectorXd>& delta_hint) {
  constexpr double kEqualityTolerance = 1e-12;
  if (delta_hint) {
    if (delta_hint->size() != panel.d())
      throw ConstraintError("delta hint has the wrong number of layers");
    require_simplex(*delta_hint);
  }
  AssumptionReport report;
  for (int t = 0; t < panel.periods(); ++t) {
    for (int l = 0; l < panel.d(); ++l) {
      if (panel.weights(l, t).isZero(0.0)) report.a1_violations.push_back({l, t});
    }
    for (int a = 0; a < panel.d(); ++a) {
      for (int b = a + 1; b < panel.d(); ++b) {
        const double gap =
            (panel.weights(a, t) - panel.weights(b, t)).cwiseAbs().maxCoeff();
        if (gap <= kEqualityTolerance) report.a2_violations.push_back({a, b, t});
      }
    }
    for (int k = 0; k < panel.n(); ++k) {
      bool linked = false;
      for (int l = 0; l < panel.d() && !linked; ++l) {
        // a layer with zero weight contributes nothing to the composite row
        if (delta_hint && (*delta_hint)[l] == 0.0) continue;
        linked = panel.weights(l, t).row(k).maxCoeff() > 0.0;
      }
      if (!linked) report.a4_violations.push_back({k, t});
    }
  }
  report.passed = report.a1_violations.empty() && report.a2_violations.empty() &&
                  report.a4_violations.empty();
  return report;
}

Eigen::VectorXd eigenvector_centrality(const Eigen::MatrixXd& weights,
                                       int max_iterations, double tolerance) {
  if (weights.rows() != weights.cols() || weights.rows() == 0)
    throw ConstraintError("centrality needs a non-empty square matrix");
  if ((weights.array() < 0.0).any())
    throw ConstraintError("centrality needs non-negative weights");
  if (weights.isZero(0.0))
    throw ConstraintError("centrality is undefined for an empty network");

  const Eigen::Index n = weights.rows();
  const Eigen::MatrixXd step =
      Eigen::MatrixXd::Identity(n, n) + weights.transpose();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd next = step * x;
    next /= next.sum();
    const double change = (next - x).cwiseAbs().sum();
    x = std::move(next);
    if (change < tolerance) return x;
  }
  throw CentralityNotConverged(
      fmt::format("eigenvector centrality did not converge in {} iterations",
                  max_iterations),
      x);
}

Eigen::VectorXd eigenvector_centrality(const LayerSnapshot& snapshot) {
  return eigenvector_centrality(snapshot.weights);
}

InvertibilityCheck check_invertibility(const CompositeNetwork& composite,
                                       const Eigen::VectorXd& rho) {
  const Eigen::Index n = composite.matrix.rows();
  if (rho.size() != n) throw ConstraintError("rho has the wrong length");
  const Eigen::MatrixXd rw = rho.asDiagonal() * composite.matrix;
  InvertibilityCheck out;
  if (rw.isZero(0.0)) {
    out.invertible = true;
    out.spectral_radius = 0.0;
    return out;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(rw, /*computeEigenvectors=*/false);
  out.spectral_radius = solver.eigenvalues().cwiseAbs().maxCoeff();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(n, n) - rw);
  lu.setThreshold(1e-12);
  out.invertible = lu.isInvertible();
  return out;
}

}  // namespace mlsar
