#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "mlsar/diagnostics.hpp"
#include "mlsar/random.hpp"
#include "mlsar/spillovers.hpp"

using namespace mlsar;

namespace {

DrawTable table_of(const std::vector<std::vector<double>>& columns, const std::vector<std::string>& names) {
  DrawTable t;
  t.names = names;
  const auto rows = static_cast<Eigen::Index>(columns[0].size());
  t.values.resize(rows, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c)
    for (Eigen::Index r = 0; r < rows; ++r) t.values(r, static_cast<Eigen::Index>(c)) = columns[c][r];
  for (Eigen::Index r = 0; r < rows; ++r) t.iterations.push_back(static_cast<int>(r));
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("summary uses type-7 quantiles and flags intervals excluding zero") {
  std::vector<double> up, centered;
  for (int i = 0; i <= 200; ++i) {
    up.push_back(1.0 + i);
    centered.push_back(i - 100.0);
  }
  const auto s = summarize(table_of({up, centered}, {"rho_0", "beta_0"}));
  CHECK(s.draws == 201);
  CHECK(s.at("rho_0").mean == doctest::Approx(101.0));
  CHECK(s.at("rho_0").lo == doctest::Approx(6.0));
  CHECK(s.at("rho_0").hi == doctest::Approx(196.0));
  CHECK(s.at("rho_0").significant);
  CHECK_FALSE(s.at("beta_0").significant);
  CHECK_THROWS(s.at("missing"));
}

TEST_CASE("too few draws are refused") {
  std::vector<double> x(50, 1.0);
  CHECK_THROWS_AS(summarize(table_of({x}, {"a"})), ConstraintError);
}

TEST_CASE("summary files and tables") {
  std::vector<double> a, b;
  Rng rng(1);
  for (int i = 0; i < 300; ++i) {
    a.push_back(rng.normal());
    b.push_back(2 + rng.normal());
  }
  const auto s = summarize(table_of({a, b}, {"rho_0", "rho_1"}));
  const auto path = std::filesystem::temp_directory_path() / "mlsar_summary_test.csv";
  write_summary_csv(s, path);
  const std::string text = slurp(path);
  CHECK(text.rfind("name,mean,lo,hi,significant,ess\n", 0) == 0);
  CHECK(text.find("rho_1,") != std::string::npos);
  std::filesystem::remove(path);
  CHECK(summary_text(s).find("rho_0") != std::string::npos);
  const std::string nodes = node_table_text(s, "rho_", {"CA", "FR"});
  CHECK(nodes.find("CA") != std::string::npos);
  CHECK(nodes.find("FR") != std::string::npos);
}

TEST_CASE("kernel density integrates to one and tracks a normal") {
  Rng rng(2);
  std::vector<double> x;
  for (int i = 0; i < 20000; ++i) x.push_back(rng.normal());
  const auto d = kernel_density(x);
  REQUIRE(d.grid.size() == 512);
  double area = 0.0;
  for (std::size_t i = 1; i < d.grid.size(); ++i)
    area += 0.5 * (d.density[i] + d.density[i - 1]) * (d.grid[i] - d.grid[i - 1]);
  CHECK(area == doctest::Approx(1.0).epsilon(0.01));
  const auto mid = std::min_element(d.grid.begin(), d.grid.end(),
                                    [](double a, double b) { return std::abs(a) < std::abs(b); }) -
                   d.grid.begin();
  CHECK(d.density[mid] == doctest::Approx(1.0 / std::sqrt(2 * std::numbers::pi)).epsilon(0.05));
  CHECK(d.bandwidth == doctest::Approx(0.9 * std::pow(20000.0, -0.2)).epsilon(0.1));
}

TEST_CASE("identical draws give a point mass") {
  const std::vector<double> x(200, 0.25);
  const auto d = kernel_density(x);
  CHECK(d.point_mass);
  CHECK(d.point == 0.25);
  const auto path = std::filesystem::temp_directory_path() / "mlsar_density_test.csv";
  write_density_csv(d, path);
  CHECK(slurp(path).find("point mass") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("custom density grid is honored") {
  std::vector<double> x;
  Rng rng(3);
  for (int i = 0; i < 500; ++i) x.push_back(rng.uniform());
  const auto d = kernel_density(x, GridSpec{11, 0.0, 1.0});
  REQUIRE(d.grid.size() == 11);
  CHECK(d.grid.front() == 0.0);
  CHECK(d.grid.back() == 1.0);
}

TEST_CASE("correlation matrix is symmetric with a unit diagonal") {
  Rng rng(4);
  Eigen::MatrixXd series(60, 3);
  for (int t = 0; t < 60; ++t) {
    const double common = rng.normal();
    series(t, 0) = common + 0.1 * rng.normal();
    series(t, 1) = common + 0.1 * rng.normal();
    series(t, 2) = rng.normal();
  }
  const auto m = correlation_matrix(series);
  REQUIRE(m.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(*m[i][i].correlation == doctest::Approx(1.0));
    for (int j = 0; j < 3; ++j) CHECK(*m[i][j].correlation == doctest::Approx(*m[j][i].correlation));
  }
  CHECK(m[0][1].stars == "***");
  CHECK(m[0][1].p_value < 0.01);
}

TEST_CASE("constant series give undefined correlations written as NA") {
  Eigen::MatrixXd series(10, 2);
  for (int t = 0; t < 10; ++t) series.row(t) << t, 3.0;
  const auto m = correlation_matrix(series);
  CHECK_FALSE(m[0][1].correlation);
  const auto path = std::filesystem::temp_directory_path() / "mlsar_corr_test.csv";
  write_correlation_csv(m, path, {"A", "B"});
  const std::string text = slurp(path);
  CHECK(text.find("NA") != std::string::npos);
  CHECK(text.find("1.0000***") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("cross-correlation covers each effect type") {
  EffectSeries e;
  Rng rng(5);
  e.direct = Eigen::MatrixXd::Random(20, 3);
  e.indirect = Eigen::MatrixXd::Random(20, 3);
  e.total = e.direct + e.indirect;
  const auto c = effect_crosscorrelation_matrix(e);
  CHECK(c.overall.size() == 3);
  CHECK(c.direct.size() == 3);
  CHECK(c.indirect.size() == 3);
}
