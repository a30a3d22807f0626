#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlsar/mcmc.hpp"

using namespace mlsar;

namespace {

ChainOutput toy_chain(VarianceMode mode, int draws = 4) {
  ChainOutput c;
  c.n = 2;
  c.d = 2;
  c.k_beta = 4;
  c.periods = 3;
  c.variance_mode = mode;
  for (int r = 0; r < draws; ++r) {
    ModelState s;
    s.beta = Eigen::Vector4d(r, 1.5, -2.0, 0.125 * r);
    s.delta = Eigen::Vector2d(0.25, 0.75);
    s.rho = Eigen::Vector2d(0.1 * r, -0.3);
    if (mode == VarianceMode::static_variance) {
      s.sigma2 = Eigen::Vector2d(1.0 + r, 0.5);
    } else {
      s.mu_h = Eigen::Vector2d(-1.0, -0.5);
      s.phi_h = Eigen::Vector2d(0.9, 0.8);
      s.sigma2_h = Eigen::Vector2d(0.05, 0.1);
      s.h = Eigen::MatrixXd::Constant(3, 2, 0.1 * r);
    }
    c.draws.push_back(s);
    c.iterations.push_back(10 * (r + 1));
  }
  return c;
}

std::filesystem::path temp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("parameter names follow the documented order") {
  const auto names = parameter_names(2, 2, 4, VarianceMode::static_variance);
  CHECK(names == std::vector<std::string>{"beta_0", "beta_1", "beta_2", "beta_3", "delta_0", "delta_1",
                                          "rho_0", "rho_1", "sigma2_0", "sigma2_1"});
  const auto sv = parameter_names(2, 2, 4, VarianceMode::stochastic_volatility, 3, true);
  CHECK(sv.size() == 8 + 6 + 6);
  CHECK(sv[8] == "mu_h_0");
}

TEST_CASE("flattened draws round-trip through the structural form") {
  for (auto mode : {VarianceMode::static_variance, VarianceMode::stochastic_volatility}) {
    const auto chain = toy_chain(mode);
    const auto table = flatten(chain);
    CHECK(table.values.rows() == 4);
    CHECK(table.column_values("rho_0")[3] == doctest::Approx(0.3));
    const auto back = chain_from_table(table);
    REQUIRE(back.draws.size() == 4);
    CHECK(back.draws[2].beta == chain.draws[2].beta);
    CHECK(back.draws[2].rho == chain.draws[2].rho);
    CHECK(back.variance_mode == mode);
  }
}

TEST_CASE("draw files round-trip exactly") {
  const auto table = flatten(toy_chain(VarianceMode::static_variance));
  const auto path = temp("mlsar_draws_roundtrip.csv");
  write_draws_csv(table, path);
  const auto back = read_draws_csv(path);
  CHECK(back.complete);
  CHECK(back.names == table.names);
  CHECK(back.iterations == table.iterations);
  CHECK(back.values == table.values);
  std::filesystem::remove(path);
}

TEST_CASE("streamed files mark how they ended") {
  const auto chain = toy_chain(VarianceMode::static_variance);
  const auto names = parameter_names(2, 2, 4, VarianceMode::static_variance);
  const auto path = temp("mlsar_draws_stream.csv");
  {
    DrawWriter w(path, names);
    w.write(10, chain.draws[0], VarianceMode::static_variance, false);
    w.write(20, chain.draws[1], VarianceMode::static_variance, false);
    w.truncate(20);
  }
  auto table = read_draws_csv(path);
  CHECK_FALSE(table.complete);
  CHECK(table.values.rows() == 2);
  {
    DrawWriter w(path, names);
    w.write(10, chain.draws[0], VarianceMode::static_variance, false);
  }
  table = read_draws_csv(path);
  CHECK_FALSE(table.complete);
  {
    DrawWriter w(path, names);
    w.write(10, chain.draws[0], VarianceMode::static_variance, false);
    w.finish();
  }
  CHECK(read_draws_csv(path).complete);
  std::filesystem::remove(path);
}

TEST_CASE("malformed draw files are reported") {
  const auto path = temp("mlsar_draws_bad.csv");
  {
    std::ofstream out(path);
    out << "iteration,rho_0\n1,abc\n";
  }
  CHECK_THROWS(read_draws_csv(path));
  CHECK_THROWS_AS(read_draws_csv(temp("mlsar_no_such_file.csv")), IoError);
  std::filesystem::remove(path);
}

TEST_CASE("diagnostics JSON carries the run metadata") {
  auto chain = toy_chain(VarianceMode::static_variance);
  chain.delta_acceptance_rate = 0.4;
  chain.seed = 9;
  ChainConfig cfg;
  const auto j = nlohmann::json::parse(diagnostics_json(chain, cfg, PriorConfig::defaults(4, 2)));
  CHECK(j.at("delta_acceptance_rate").get<double>() == doctest::Approx(0.4));
  CHECK(j.at("seed").get<std::uint64_t>() == 9);
  CHECK(j.contains("runtime_seconds"));
  CHECK(j.contains("tuning"));
}
