#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mlsar/cli.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = MLSAR_FIXTURES_DIR;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "mlsar");
  std::ostringstream out, err;
  const int code = mlsar::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mlsar_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("ingest reproduces the fixture panel") {
  const auto dir = scratch("ingest");
  const auto r = run({"ingest", "--events", (kFixtures / "table1_with_domestic.csv").string(), "--out",
                      dir.string(), "--normalization", "none"});
  // one month with an all-zero layer is fine here: both layers have an entry
  CHECK(r.code == 0);
  const auto report = nlohmann::json::parse(slurp(dir / "aggregation_report.json"));
  CHECK(report.at("events_domestic_dropped").get<int>() == 1);
  CHECK(fs::exists(dir / "panel.json"));
  CHECK(fs::exists(dir / "config.toml"));
  fs::remove_all(dir);
}

TEST_CASE("simulate requires a seed and is deterministic") {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  CHECK(run({"simulate", "--out", a.string()}).code == mlsar::cli::kExitValidation);
  CHECK(fs::exists(a / "error.json"));
  REQUIRE(run({"--seed", "5", "simulate", "--out", a.string(), "--n", "3", "--periods", "20"}).code == 0);
  CHECK_FALSE(fs::exists(a / "error.json"));
  REQUIRE(run({"--seed", "5", "simulate", "--out", b.string(), "--n", "3", "--periods", "20"}).code == 0);
  for (const char* f : {"panel.json", "design.csv", "truth.json"})
    CHECK(slurp(a / f) == slurp(b / f));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("estimate, spillover and report run end to end and rerun identically") {
  const auto sim = scratch("e2e_sim");
  REQUIRE(run({"--seed", "3", "simulate", "--out", sim.string(), "--n", "3", "--periods", "30"}).code == 0);
  std::vector<fs::path> outs{scratch("e2e_a"), scratch("e2e_b")};
  for (const auto& out : outs) {
    const auto est = run({"--seed", "4", "estimate", "--panel", (sim / "panel.json").string(), "--design",
                          (sim / "design.csv").string(), "--out", (out / "est").string(), "--iterations",
                          "400", "--burnin", "100", "--tuning-iters", "200"});
    REQUIRE(est.code == 0);
    const auto sp = run({"--workers", "2", "spillover", "--panel", (sim / "panel.json").string(), "--chain",
                         (out / "est" / "draws.csv").string(), "--out", (out / "sp").string(),
                         "--neumann-check"});
    REQUIRE(sp.code == 0);
    const auto rep = run({"report", "--chain", (out / "est" / "draws.csv").string(), "--out",
                          (out / "rep").string(), "--panel", (sim / "panel.json").string()});
    REQUIRE(rep.code == 0);
  }
  CHECK(slurp(outs[0] / "est" / "draws.csv") == slurp(outs[1] / "est" / "draws.csv"));
  CHECK(slurp(outs[0] / "est" / "summary.csv") == slurp(outs[1] / "est" / "summary.csv"));
  CHECK(slurp(outs[0] / "sp" / "effects.csv") == slurp(outs[1] / "sp" / "effects.csv"));
  CHECK(slurp(outs[0] / "rep" / "summary.txt") == slurp(outs[1] / "rep" / "summary.txt"));
  CHECK(fs::exists(outs[0] / "rep" / "density_delta_0.csv"));

  // the echoed config reproduces the run
  const auto again = scratch("e2e_again");
  std::string toml = slurp(outs[0] / "est" / "config.toml");
  const auto cfg = again / "in.toml";
  fs::create_directories(again);
  std::ofstream(cfg) << toml;
  REQUIRE(run({"--config", cfg.string(), "estimate", "--out", (again / "est").string()}).code == 0);
  CHECK(slurp(again / "est" / "draws.csv") == slurp(outs[0] / "est" / "draws.csv"));

  const auto report = nlohmann::json::parse(slurp(outs[0] / "sp" / "spillover_report.json"));
  CHECK(report.at("neumann_check").at("passed").get<bool>());
  for (const auto& p : {sim, outs[0], outs[1], again}) fs::remove_all(p);
}

TEST_CASE("validation problems exit with the validation code and an error record") {
  const auto sim = scratch("bad_sim");
  REQUIRE(run({"--seed", "3", "simulate", "--out", sim.string(), "--n", "3", "--periods", "10"}).code == 0);
  const auto out = scratch("bad_est");
  const auto r = run({"--seed", "1", "estimate", "--panel", (sim / "panel.json").string(), "--design",
                      (sim / "design.csv").string(), "--out", out.string(), "--a-rho", "-1"});
  CHECK(r.code == mlsar::cli::kExitValidation);
  const auto err = nlohmann::json::parse(slurp(out / "error.json"));
  CHECK(err.contains("message"));
  CHECK(run({"--seed", "1", "--variance", "garch", "simulate", "--out", out.string()}).code ==
        mlsar::cli::kExitValidation);
  CHECK(run({"bogus"}).code == mlsar::cli::kExitValidation);
  fs::remove_all(sim);
  fs::remove_all(out);
}

TEST_CASE("missing inputs exit with the io code") {
  const auto out = scratch("io");
  const auto r = run({"--seed", "1", "estimate", "--panel", "/nonexistent/panel.json", "--design",
                      "/nonexistent/design.csv", "--out", out.string()});
  CHECK(r.code == mlsar::cli::kExitIo);
  fs::remove_all(out);
}

TEST_CASE("a truncated chain file is flagged by report") {
  const auto dir = scratch("trunc");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "draws.csv");
    out << "iteration,rho_0\n";
    for (int i = 0; i < 150; ++i) out << i << ',' << 0.001 * i << '\n';
  }
  const auto r = run({"report", "--chain", (dir / "draws.csv").string(), "--out", (dir / "rep").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("incomplete") != std::string::npos);
  fs::remove_all(dir);
}
