#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "mlsar/detail/csv.hpp"
#include "mlsar/networks.hpp"

namespace mlsar {

using nlohmann::ordered_json;

std::string panel_to_json_string(const MultilayerPanel& panel) {
  ordered_json doc;
  doc["n"] = panel.n();
  doc["d"] = panel.d();
  doc["T"] = panel.periods();
  if (!panel.node_labels.empty()) doc["nodes"] = panel.node_labels;
  if (!panel.period_labels.empty()) doc["periods"] = panel.period_labels;
  if (!panel.layer_labels.empty()) doc["layer_names"] = panel.layer_labels;
  ordered_json layers = ordered_json::array();
  for (int l = 0; l < panel.d(); ++l) {
    ordered_json series = ordered_json::array();
    for (int t = 0; t < panel.periods(); ++t) {
      const auto& w = panel.weights(l, t);
      ordered_json rows = ordered_json::array();
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        ordered_json row = ordered_json::array();
        for (Eigen::Index j = 0; j < w.cols(); ++j) row.push_back(w(i, j));
        rows.push_back(std::move(row));
      }
      series.push_back(std::move(rows));
    }
    layers.push_back(std::move(series));
  }
  doc["layers"] = std::move(layers);
  return doc.dump(1);
}

MultilayerPanel panel_from_json_string(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ParseError(fmt::format("panel JSON: {}", e.what()));
  }
  try {
    const int n = doc.at("n").get<int>();
    const int d = doc.at("d").get<int>();
    const int periods = doc.at("T").get<int>();
    const auto& layers = doc.at("layers");
    if (static_cast<int>(layers.size()) != d)
      throw ParseError(fmt::format("panel JSON: {} layers listed, d = {}", layers.size(), d));
    std::vector<std::vector<Eigen::MatrixXd>> data(d);
    for (int l = 0; l < d; ++l) {
      if (static_cast<int>(layers[l].size()) != periods)
        throw ParseError(fmt::format("panel JSON: layer {} has {} periods, T = {}", l,
                                     layers[l].size(), periods));
      for (int t = 0; t < periods; ++t) {
        const auto& rows = layers[l][t];
        if (static_cast<int>(rows.size()) != n)
          throw ParseError(fmt::format("panel JSON: layer {} period {} has {} rows", l, t,
                                       rows.size()));
        Eigen::MatrixXd w(n, n);
        for (int i = 0; i < n; ++i) {
          if (static_cast<int>(rows[i].size()) != n)
            throw ParseError(fmt::format("panel JSON: layer {} period {} row {} has {} entries",
                                         l, t, i, rows[i].size()));
          for (int j = 0; j < n; ++j) w(i, j) = rows[i][j].get<double>();
        }
        data[l].push_back(std::move(w));
      }
    }
    MultilayerPanel panel(std::move(data));
    if (doc.contains("nodes")) panel.node_labels = doc["nodes"].get<std::vector<std::string>>();
    if (doc.contains("periods"))
      panel.period_labels = doc["periods"].get<std::vector<std::string>>();
    if (doc.contains("layer_names"))
      panel.layer_labels = doc["layer_names"].get<std::vector<std::string>>();
    panel.validate();
    return panel;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(fmt::format("panel JSON: {}", e.what()));
  }
}

void write_panel_json(const MultilayerPanel& panel, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << panel_to_json_string(panel) << '\n';
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

MultilayerPanel read_panel_json(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return panel_from_json_string(buffer.str());
}

void write_panel_csv_dir(const MultilayerPanel& panel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int l = 0; l < panel.d(); ++l) {
    for (int t = 0; t < panel.periods(); ++t) {
      auto out = detail::open_output(dir / fmt::format("layer{}_t{}.csv", l, t));
      const auto& w = panel.weights(l, t);
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
          if (j > 0) out << ',';
          out << detail::format_double(w(i, j));
        }
        out << '\n';
      }
    }
  }
}

MultilayerPanel read_panel_csv_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  static const std::regex pattern(R"(layer(\d+)_t(\d+)\.csv)");
  std::map<std::pair<int, int>, std::filesystem::path> files;
  int d = 0, periods = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const int l = std::stoi(m[1]);
    const int t = std::stoi(m[2]);
    files[{l, t}] = entry.path();
    d = std::max(d, l + 1);
    periods = std::max(periods, t + 1);
  }
  if (files.empty()) throw ParseError(fmt::format("no layer files in '{}'", dir.string()));
  if (static_cast<int>(files.size()) != d * periods)
    throw ParseError(fmt::format("'{}': layer/period indices are not dense ({} files for {}x{})",
                                 dir.string(), files.size(), d, periods));

  std::vector<std::vector<Eigen::MatrixXd>> data(d, std::vector<Eigen::MatrixXd>(periods));
  int n = -1;
  for (const auto& [key, path] : files) {
    auto in = detail::open_input(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::trim(line).empty()) continue;
      std::vector<double> row;
      for (const auto& field : detail::split_csv_line(line))
        row.push_back(detail::require_double(
            field, fmt::format("{}:{}", path.filename().string(), line_no)));
      rows.push_back(std::move(row));
    }
    if (n < 0) n = static_cast<int>(rows.size());
    if (static_cast<int>(rows.size()) != n || n == 0)
      throw ParseError(fmt::format("{}: expected {} rows, found {}", path.string(), n, rows.size()));
    Eigen::MatrixXd w(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != n)
        throw ParseError(fmt::format("{}: row {} has {} values, expected {}", path.string(), i,
                                     rows[i].size(), n));
      for (int j = 0; j < n; ++j) w(i, j) = rows[i][j];
    }
    data[key.first][key.second] = std::move(w);
  }
  MultilayerPanel panel(std::move(data));
  panel.validate();
  return panel;
}

MultilayerPanel read_panel(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return read_panel_csv_dir(path);
  return read_panel_json(path);
}

}  // namespace mlsar
