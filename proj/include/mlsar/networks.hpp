#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/error.hpp"

namespace mlsar {

/// One layer of the network observed in one period.
struct LayerSnapshot {
  Eigen::MatrixXd weights;  // n x n, non-negative, zero diagonal
  int time_index = 0;
  int layer_index = 0;
};

enum class Normalization { none, row, max_row };

Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization normalization);

/// d layers observed over T periods on a common set of n nodes.
class MultilayerPanel {
 public:
  MultilayerPanel() = default;
  /// Zero-filled panel.
  MultilayerPanel(int n, int d, int periods);
  /// layers[l][t] is the n x n weight matrix of layer l at period t.
  explicit MultilayerPanel(std::vector<std::vector<Eigen::MatrixXd>> layers);

  int n() const { return n_; }
  int d() const { return d_; }
  int periods() const { return periods_; }

  const Eigen::MatrixXd& weights(int layer, int t) const;
  Eigen::MatrixXd& weights(int layer, int t);
  LayerSnapshot snapshot(int layer, int t) const;

  /// Checks non-negativity, finiteness, square shape and zero diagonals.
  void validate() const;

  // Optional labels carried through serialization.
  std::vector<std::string> node_labels;
  std::vector<std::string> period_labels;
  std::vector<std::string> layer_labels;

 private:
  std::size_t index(int layer, int t) const;

  int n_ = 0;
  int d_ = 0;
  int periods_ = 0;
  std::vector<Eigen::MatrixXd> matrices_;  // layer-major
};

/// Sum over layers of delta_i W_{i,t}, together with the weights used.
struct CompositeNetwork {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd delta_used;
};

/// Throws ConstraintError unless delta is non-negative and sums to one
/// within `tolerance`.
void require_simplex(const Eigen::VectorXd& delta, double tolerance = 1e-12);

/// Rescales every row with positive sum to sum exactly one; zero rows stay
/// zero.
MultilayerPanel standard_row_normalize(const MultilayerPanel& panel);

/// Max-row normalization: within each layer, row j at every period is divided
/// by the largest row-j sum over all periods. A dyad weight that does not
/// change between periods therefore maps to the same normalized entry.
/// Rows that are zero at every period stay zero.
MultilayerPanel max_row_normalize(const MultilayerPanel& panel);

MultilayerPanel normalize(const MultilayerPanel& panel, Normalization how);

CompositeNetwork composite_network(const MultilayerPanel& panel,
                                   const Eigen::VectorXd& delta, int t);

struct LayerPeriod {
  int layer = 0;
  int t = 0;
  bool operator==(const LayerPeriod&) const = default;
};
struct LayerPair {
  int first = 0;
  int second = 0;
  int t = 0;
  bool operator==(const LayerPair&) const = default;
};
struct RowPeriod {
  int row = 0;
  int t = 0;
  bool operator==(const RowPeriod&) const = default;
};

/// Outcome of the identification checks on a panel:
///  - A1: no layer snapshot is entirely zero;
///  - A2: no two layers are identical at the same period;
///  - A4: every node has an outgoing link in at least one layer.
struct AssumptionReport {
  std::vector<LayerPeriod> a1_violations;
  std::vector<LayerPair> a2_violations;
  std::vector<RowPeriod> a4_violations;
  bool passed = true;

  std::string describe() const;
};

AssumptionReport validate_assumptions(
    const MultilayerPanel& panel,
    const std::optional<Eigen::VectorXd>& delta_hint = std::nullopt);

/// Thrown by eigenvector_centrality when power iteration stalls; carries the
/// final iterate.
class CentralityNotConverged : public NumericalError {
 public:
  CentralityNotConverged(const std::string& what, Eigen::VectorXd last)
      : NumericalError(what), last_iterate(std::move(last)) {}
  Eigen::VectorXd last_iterate;
};

/// In-influence eigenvector centrality: the dominant eigenvector of W^T
/// obtained by power iteration on (I + W^T) from the uniform vector, scaled
/// to sum to one. The identity shift removes oscillation on periodic graphs
/// without changing the dominant eigenvector.
Eigen::VectorXd eigenvector_centrality(const Eigen::MatrixXd& weights,
                                       int max_iterations = 10'000,
                                       double tolerance = 1e-10);
Eigen::VectorXd eigenvector_centrality(const LayerSnapshot& snapshot);

struct InvertibilityCheck {
  bool invertible = false;
  double spectral_radius = 0.0;  // of R W*
};

InvertibilityCheck check_invertibility(const CompositeNetwork& composite,
                                       const Eigen::VectorXd& rho);

// Panel serialization -------------------------------------------------------

/// JSON container {n, d, T, layers: [[matrix per period] per layer]} plus
/// optional label arrays.
void write_panel_json(const MultilayerPanel& panel,
                      const std::filesystem::path& path);
MultilayerPanel read_panel_json(const std::filesystem::path& path);
std::string panel_to_json_string(const MultilayerPanel& panel);
MultilayerPanel panel_from_json_string(const std::string& text);

/// Directory of `layer<L>_t<T>.csv` files, each n header-less rows of n
/// comma-separated values. Indices are zero-based.
void write_panel_csv_dir(const MultilayerPanel& panel,
                         const std::filesystem::path& dir);
MultilayerPanel read_panel_csv_dir(const std::filesystem::path& dir);

/// Reads either format depending on whether `path` is a directory.
MultilayerPanel read_panel(const std::filesystem::path& path);

}  // namespace mlsar
