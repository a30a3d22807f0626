#include <algorithm>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "mlsar/detail/csv.hpp"
#include "mlsar/mcmc.hpp"

namespace mlsar {

std::vector<std::string> parameter_names(int n, int d, int k_beta, VarianceMode mode,
                                         int periods, bool include_h) {
  std::vector<std::string> names;
  for (int i = 0; i < k_beta; ++i) names.push_back(fmt::format("beta_{}", i));
  for (int i = 0; i < d; ++i) names.push_back(fmt::format("delta_{}", i));
  for (int j = 0; j < n; ++j) names.push_back(fmt::format("rho_{}", j));
  if (mode == VarianceMode::static_variance) {
    for (int j = 0; j < n; ++j) names.push_back(fmt::format("sigma2_{}", j));
  } else {
    for (int j = 0; j < n; ++j) names.push_back(fmt::format("mu_h_{}", j));
    for (int j = 0; j < n; ++j) names.push_back(fmt::format("phi_h_{}", j));
    for (int j = 0; j < n; ++j) names.push_back(fmt::format("sigma2_h_{}", j));
    if (include_h)
      for (int t = 0; t < periods; ++t)
        for (int j = 0; j < n; ++j) names.push_back(fmt::format("h_{}_{}", t, j));
  }
  return names;
}

namespace {

void append_state(std::vector<double>& row, const ModelState& s, VarianceMode mode,
                  bool include_h) {
  auto add = [&](const Eigen::VectorXd& v) { row.insert(row.end(), v.data(), v.data() + v.size()); };
  add(s.beta);
  add(s.delta);
  add(s.rho);
  if (mode == VarianceMode::static_variance) {
    add(s.sigma2);
    return;
  }
  add(s.mu_h);
  add(s.phi_h);
  add(s.sigma2_h);
  if (include_h)
    for (Eigen::Index t = 0; t < s.h.rows(); ++t)
      for (Eigen::Index j = 0; j < s.h.cols(); ++j) row.push_back(s.h(t, j));
}

}  // namespace

Eigen::Index DrawTable::column(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ConfigError(fmt::format("no column named '{}'", name));
  return it - names.begin();
}

std::vector<double> DrawTable::column_values(const std::string& name) const {
  const Eigen::VectorXd c = values.col(column(name));
  return {c.data(), c.data() + c.size()};
}

DrawTable flatten(const ChainOutput& chain, bool include_h) {
  if (include_h && chain.variance_mode == VarianceMode::stochastic_volatility)
    for (const auto& s : chain.draws)
      if (s.h.rows() != chain.periods)
        throw ConfigError("log-volatility paths were not kept for this chain");
  DrawTable table;
  table.names = parameter_names(chain.n, chain.d, chain.k_beta, chain.variance_mode, chain.periods,
                                include_h);
  table.iterations = chain.iterations;
  table.complete = !chain.truncated;
  table.values.resize(static_cast<Eigen::Index>(chain.draws.size()),
                      static_cast<Eigen::Index>(table.names.size()));
  std::vector<double> row;
  for (std::size_t i = 0; i < chain.draws.size(); ++i) {
    row.clear();
    append_state(row, chain.draws[i], chain.variance_mode, include_h);
    table.values.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
  }
  return table;
}

namespace {

int count_prefix(const std::vector<std::string>& names, const std::string& prefix) {
  int count = 0;
  while (std::find(names.begin(), names.end(), prefix + std::to_string(count)) != names.end())
    ++count;
  return count;
}

}  // namespace

ChainOutput chain_from_table(const DrawTable& table) {
  ChainOutput chain;
  chain.k_beta = count_prefix(table.names, "beta_");
  chain.d = count_prefix(table.names, "delta_");
  chain.n = count_prefix(table.names, "rho_");
  if (chain.k_beta == 0 || chain.d == 0 || chain.n == 0)
    throw ParseError("draw table lacks beta, delta or rho columns");
  const bool sv = count_prefix(table.names, "mu_h_") > 0;
  chain.variance_mode = sv ? VarianceMode::stochastic_volatility : VarianceMode::static_variance;
  chain.truncated = !table.complete;
  chain.iterations = table.iterations;
  auto block = [&](Eigen::Index r, const std::string& prefix, int count) {
    Eigen::VectorXd v(count);
    for (int i = 0; i < count; ++i) v[i] = table.values(r, table.column(prefix + std::to_string(i)));
    return v;
  };
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    ModelState s;
    s.beta = block(r, "beta_", chain.k_beta);
    s.delta = block(r, "delta_", chain.d);
    s.rho = block(r, "rho_", chain.n);
    if (sv) {
      s.mu_h = block(r, "mu_h_", chain.n);
      s.phi_h = block(r, "phi_h_", chain.n);
      s.sigma2_h = block(r, "sigma2_h_", chain.n);
    } else {
      s.sigma2 = block(r, "sigma2_", chain.n);
    }
    chain.draws.push_back(std::move(s));
  }
  return chain;
}

DrawWriter::DrawWriter(const std::filesystem::path& path, std::vector<std::string> names)
    : out_(detail::open_output(path)), names_(std::move(names)) {
  out_ << "iteration";
  for (const auto& n : names_) out_ << ',' << n;
  out_ << '\n';
  out_.flush();
}

void DrawWriter::write(int iteration, std::span<const double> values) {
  if (values.size() != names_.size())
    throw ConfigError(fmt::format("draw has {} values for {} columns", values.size(), names_.size()));
  std::string line = std::to_string(iteration);
  for (double v : values) {
    line.push_back(',');
    line += detail::format_double(v);
  }
  line.push_back('\n');
  out_ << line;
  out_.flush();
  if (!out_) throw IoError("failed writing draws");
  ++rows_;
}

void DrawWriter::write(int iteration, const ModelState& state, VarianceMode mode, bool include_h) {
  std::vector<double> row;
  append_state(row, state, mode, include_h);
  write(iteration, row);
}

void DrawWriter::finish() {
  out_ << "# complete\n";
  out_.flush();
}

void DrawWriter::truncate(int last_iteration) {
  out_ << fmt::format("# truncated after iteration {}\n", last_iteration);
  out_.flush();
}

void write_draws_csv(const DrawTable& table, const std::filesystem::path& path) {
  DrawWriter writer(path, table.names);
  std::vector<double> row(table.names.size());
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < table.values.cols(); ++c) row[c] = table.values(r, c);
    writer.write(table.iterations.empty() ? static_cast<int>(r + 1) : table.iterations[r], row);
  }
  if (table.complete)
    writer.finish();
  else
    writer.truncate(table.iterations.empty() ? static_cast<int>(table.values.rows())
                                             : table.iterations.back());
}

DrawTable read_draws_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("'{}' is empty", path.string()));
  auto header = detail::split_csv_line(line);
  if (header.empty() || header.front() != "iteration")
    throw ParseError(fmt::format("'{}' does not start with an iteration column", path.string()));
  DrawTable table;
  table.names.assign(header.begin() + 1, header.end());
  table.complete = false;
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (text.front() == '#') {
      table.complete = text.find("complete") != std::string_view::npos;
      continue;
    }
    const auto fields = detail::split_csv_line(text);
    if (fields.size() != header.size())
      throw ParseError(fmt::format("{}:{}: expected {} fields, found {}", path.string(), line_no,
                                   header.size(), fields.size()));
    const auto iter = detail::parse_integer(fields[0]);
    if (!iter) throw ParseError(fmt::format("{}:{}: bad iteration", path.string(), line_no));
    table.iterations.push_back(static_cast<int>(*iter));
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c)
      row.push_back(detail::require_double(fields[c], fmt::format("{}:{}", path.string(), line_no)));
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(r, c) = rows[r][c];
  return table;
}

std::string diagnostics_json(const ChainOutput& chain, const ChainConfig& config,
                             const PriorConfig& prior) {
  using json = nlohmann::ordered_json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json j;
  j["delta_acceptance_rate"] = chain.delta_acceptance_rate;
  if (chain.variance_mode == VarianceMode::stochastic_volatility)
    j["phi_acceptance_rate"] = chain.phi_acceptance_rate;
  json ess = json::object();
  for (const auto& [name, value] : chain.ess) ess[name] = value;
  j["ess"] = ess;
  j["draws"] = chain.draws.size();
  j["seed"] = chain.seed;
  j["truncated"] = chain.truncated;
  j["tuning"] = {{"concentration", vec(chain.tuning.concentration)},
                 {"acceptance_rate", chain.tuning.acceptance_rate},
                 {"fell_back_to_prior", chain.tuning.fell_back_to_prior},
                 {"warning", chain.tuning.warning}};
  j["config"] = {{"n_iter", config.n_iter},
                 {"n_burnin", config.n_burnin},
                 {"thin", config.thin},
                 {"tuning_iters", config.tuning_iters},
                 {"slice_step_width", config.slice_step_width},
                 {"slice_max_steps", config.slice_max_steps},
                 {"variance", to_string(chain.variance_mode)},
                 {"lag", to_string(chain.lag_mode)},
                 {"prior_only", config.prior_only},
                 {"dirichlet_c", vec(prior.dirichlet_c)},
                 {"a_rho", prior.a_rho},
                 {"b_rho", prior.b_rho}};
  j["runtime_seconds"] = chain.runtime_seconds;
  return j.dump(2);
}

}  // namespace mlsar
