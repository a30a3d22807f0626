#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mlsar/detail/csv.hpp"
#include "mlsar/model.hpp"

namespace mlsar {

using nlohmann::ordered_json;

void write_design_csv(const RegressionDesign& design, const std::filesystem::path& path) {
  design.validate();
  auto out = detail::open_output(path);
  out << "period";
  for (int m = 0; m < design.k(); ++m)
    out << ',' << (m < static_cast<int>(design.factor_names.size()) ? design.factor_names[m]
                                                                     : fmt::format("f{}", m));
  for (int j = 0; j < design.n(); ++j)
    out << ',' << (j < static_cast<int>(design.response_names.size()) ? design.response_names[j]
                                                                       : fmt::format("y{}", j));
  out << '\n';
  for (int t = 0; t < design.periods(); ++t) {
    out << (t < static_cast<int>(design.period_labels.size()) ? design.period_labels[t]
                                                              : std::to_string(t));
    for (int m = 0; m < design.k(); ++m) out << ',' << detail::format_double(design.factors(t, m));
    for (int j = 0; j < design.n(); ++j)
      out << ',' << detail::format_double(design.responses(t, j));
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

RegressionDesign read_design_csv(const std::filesystem::path& path, int n_responses) {
  auto in = detail::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(fmt::format("{}: missing header row", path.string()));
  const auto header = detail::split_csv_line(line);
  const int columns = static_cast<int>(header.size());
  const int k = columns - 1 - n_responses;
  if (n_responses < 1 || k < 0)
    throw ParseError(fmt::format("{}: {} columns cannot hold a period column and {} responses",
                                 path.string(), columns, n_responses));
  // A header made only of numbers means the file has no header at all.
  if (detail::parse_double(header.back()) && detail::parse_double(header.front()))
    throw ParseError(fmt::format("{}: header row required", path.string()));

  RegressionDesign design;
  design.factor_names.assign(header.begin() + 1, header.begin() + 1 + k);
  design.response_names.assign(header.begin() + 1 + k, header.end());
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = fmt::format("{}:{}", path.string(), line_no);
    if (static_cast<int>(fields.size()) != columns)
      throw ParseError(fmt::format("{}: {} fields, expected {}", where, fields.size(), columns));
    design.period_labels.push_back(fields[0]);
    std::vector<double> row;
    for (int c = 1; c < columns; ++c) row.push_back(detail::require_double(fields[c], where));
    rows.push_back(std::move(row));
  }
  const int periods = static_cast<int>(rows.size());
  design.factors.resize(periods, k);
  design.responses.resize(periods, n_responses);
  for (int t = 0; t < periods; ++t) {
    for (int m = 0; m < k; ++m) design.factors(t, m) = rows[t][m];
    for (int j = 0; j < n_responses; ++j) design.responses(t, j) = rows[t][k + j];
  }
  design.validate();
  return design;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_json_vector(const ordered_json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string truth_to_json_string(const SimulationTruth& truth) {
  ordered_json doc;
  doc["beta"] = to_vector(truth.params.beta);
  doc["delta"] = to_vector(truth.params.delta);
  doc["rho"] = to_vector(truth.params.rho);
  doc["variance"] = to_string(variance_mode_of(truth.variance));
  if (const auto* fixed = std::get_if<StaticVariance>(&truth.variance)) {
    doc["sigma2"] = to_vector(fixed->sigma2);
  } else {
    const auto& sv = std::get<VolatilityState>(truth.variance);
    doc["mu_h"] = to_vector(sv.mu_h);
    doc["phi_h"] = to_vector(sv.phi_h);
    doc["sigma2_h"] = to_vector(sv.sigma2_h);
    ordered_json h = ordered_json::array();
    for (Eigen::Index t = 0; t < sv.h.rows(); ++t) h.push_back(to_vector(sv.h.row(t).transpose()));
    doc["h"] = std::move(h);
  }
  doc["lag"] = to_string(truth.lag);
  doc["density"] = truth.density;
  doc["seed"] = truth.seed;
  return doc.dump(1);
}

SimulationTruth truth_from_json_string(const std::string& text) {
  try {
    const auto doc = ordered_json::parse(text);
    SimulationTruth truth;
    truth.params.beta = from_json_vector(doc.at("beta"));
    truth.params.delta = from_json_vector(doc.at("delta"));
    truth.params.rho = from_json_vector(doc.at("rho"));
    if (parse_variance_mode(doc.at("variance").get<std::string>()) ==
        VarianceMode::static_variance) {
      truth.variance = StaticVariance{from_json_vector(doc.at("sigma2"))};
    } else {
      VolatilityState sv;
      sv.mu_h = from_json_vector(doc.at("mu_h"));
      sv.phi_h = from_json_vector(doc.at("phi_h"));
      sv.sigma2_h = from_json_vector(doc.at("sigma2_h"));
      const auto& rows = doc.at("h");
      sv.h.resize(static_cast<Eigen::Index>(rows.size()), sv.mu_h.size());
      for (std::size_t t = 0; t < rows.size(); ++t)
        sv.h.row(static_cast<Eigen::Index>(t)) = from_json_vector(rows[t]).transpose();
      truth.variance = std::move(sv);
    }
    truth.lag = parse_lag_mode(doc.at("lag").get<std::string>());
    truth.density = doc.at("density").get<double>();
    truth.seed = doc.at("seed").get<std::uint64_t>();
    return truth;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("truth JSON: {}", e.what()));
  }
}

void write_truth_json(const SimulationTruth& truth, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << truth_to_json_string(truth) << '\n';
}

SimulationTruth read_truth_json(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return truth_from_json_string(buffer.str());
}

}  // namespace mlsar
