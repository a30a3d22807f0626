#include "mlsar/ingestion.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "mlsar/detail/csv.hpp"

namespace mlsar {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool leap(int year) { return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr int days[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  return month == 2 && leap(year) ? 29 : days[month - 1];
}

std::optional<int> parse_digits(std::string_view s, std::size_t min_len, std::size_t max_len) {
  if (s.size() < min_len || s.size() > max_len) return std::nullopt;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
  return static_cast<int>(*detail::parse_integer(s));
}

std::vector<std::string_view> split_date(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == '-' || s[i] == '/' || s[i] == '.') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

}  // namespace

std::string YearMonth::label() const { return fmt::format("{:04d}-{:02d}", year, month); }

YearMonth month_of(const CivilDate& date) { return {date.year, date.month}; }

DateFormat parse_date_format(const std::string& name) {
  if (name == "day_first" || name == "dmy") return DateFormat::day_first;
  if (name == "iso") return DateFormat::iso;
  throw ConfigError(fmt::format("unknown date format '{}' (expected day_first or iso)", name));
}

std::optional<CivilDate> parse_date(std::string_view text, DateFormat format) {
  const auto parts = split_date(detail::trim(text));
  if (parts.size() != 3) return std::nullopt;
  std::optional<int> y, m, d;
  if (format == DateFormat::day_first) {
    d = parse_digits(parts[0], 1, 2);
    m = parse_digits(parts[1], 1, 2);
    y = parse_digits(parts[2], 4, 4);
  } else {
    y = parse_digits(parts[0], 4, 4);
    m = parse_digits(parts[1], 1, 2);
    d = parse_digits(parts[2], 1, 2);
  }
  if (!y || !m || !d || *m < 1 || *m > 12 || *d < 1 || *d > days_in_month(*y, *m))
    return std::nullopt;
  return CivilDate{*y, *m, *d};
}

std::string format_date(const CivilDate& date, DateFormat format) {
  if (format == DateFormat::day_first)
    return fmt::format("{:02d}-{:02d}-{:04d}", date.day, date.month, date.year);
  return fmt::format("{:04d}-{:02d}-{:02d}", date.year, date.month, date.day);
}

std::optional<YearMonth> parse_year_month(std::string_view text) {
  const auto parts = split_date(detail::trim(text));
  if (parts.size() != 2) return std::nullopt;
  const auto y = parse_digits(parts[0], 4, 4);
  const auto m = parse_digits(parts[1], 1, 2);
  if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
  return YearMonth{*y, *m};
}

// Countries ---------------------------------------------------------------------

CountryAliases CountryAliases::g7() {
  CountryAliases a;
  a.add("CA", "Canada");
  a.add("FR", "France");
  a.add("DE", "Germany");
  a.add("IT", "Italy");
  a.add("JP", "Japan");
  a.add("UK", "United Kingdom");
  a.add("US", "United States");
  a.lookup_["gb"] = "UK";
  a.lookup_["great britain"] = "UK";
  a.lookup_["united states of america"] = "US";
  a.lookup_["usa"] = "US";
  return a;
}

void CountryAliases::add(const std::string& code, const std::string& name) {
  if (code.empty()) throw ConfigError("country code must not be empty");
  if (std::find(codes_.begin(), codes_.end(), code) == codes_.end()) codes_.push_back(code);
  lookup_[lower(code)] = code;
  if (!name.empty()) {
    lookup_[lower(name)] = code;
    names_[code] = name;
  }
}

std::optional<std::string> CountryAliases::resolve(std::string_view text) const {
  const auto it = lookup_.find(lower(detail::trim(text)));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::string> CountryAliases::name_of(const std::string& code) const {
  const auto it = names_.find(code);
  if (it == names_.end()) return std::nullopt;
  return it->second;
}

// Events ------------------------------------------------------------------------

ParseReport for_each_event(std::istream& in, const EventSchema& schema,
                           const CountryAliases& aliases,
                           const std::function<void(const EventRecord&)>& sink) {
  ParseReport report;
  std::string line;
  int line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) return report;
  auto find_column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == lower(name)) return i;
    throw ParseError(fmt::format("event header lacks the column '{}'", name));
  };
  const std::size_t c_date = find_column(schema.date_column);
  const std::size_t c_cameo = find_column(schema.cameo_column);
  const std::size_t c_intensity = find_column(schema.intensity_column);
  const std::size_t c_source = find_column(schema.source_column);
  const std::size_t c_target = find_column(schema.target_column);

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++report.rows;
    const auto fields = detail::split_csv_line(line);
    auto fail = [&](std::string message) { report.errors.push_back({line_no, std::move(message)}); };
    if (fields.size() != header.size()) {
      fail(fmt::format("expected {} fields, found {}", header.size(), fields.size()));
      continue;
    }
    EventRecord r;
    const auto date = parse_date(fields[c_date], schema.date_format);
    if (!date) {
      fail(fmt::format("unparseable date '{}'", fields[c_date]));
      continue;
    }
    r.date = *date;
    const auto cameo = detail::parse_integer(fields[c_cameo]);
    if (!cameo) {
      fail(fmt::format("unparseable event code '{}'", fields[c_cameo]));
      continue;
    }
    r.cameo_code = static_cast<int>(*cameo);
    const auto intensity = detail::parse_double(fields[c_intensity]);
    if (!intensity || !std::isfinite(*intensity)) {
      fail(fmt::format("unparseable intensity '{}'", fields[c_intensity]));
      continue;
    }
    if (*intensity < -10.0 || *intensity > 10.0) {
      fail(fmt::format("intensity {} outside [-10, 10]", *intensity));
      continue;
    }
    r.intensity = *intensity;
    if (fields[c_source].empty() || fields[c_target].empty()) {
      fail("empty source or target");
      continue;
    }
    r.source = aliases.resolve(fields[c_source]).value_or(fields[c_source]);
    r.target = aliases.resolve(fields[c_target]).value_or(fields[c_target]);
    ++report.accepted;
    sink(r);
  }
  if (report.rows > 0 && report.errors.size() * 10 > report.rows) {
    std::string first;
    for (std::size_t i = 0; i < std::min<std::size_t>(report.errors.size(), 5); ++i)
      first += fmt::format("\n  line {}: {}", report.errors[i].line, report.errors[i].message);
    throw ParseError(fmt::format("{} of {} event rows are malformed (more than 10%):{}",
                                 report.errors.size(), report.rows, first));
  }
  return report;
}

ParsedEvents parse_events(std::istream& in, const EventSchema& schema,
                          const CountryAliases& aliases) {
  ParsedEvents out;
  out.report = for_each_event(in, schema, aliases,
                              [&](const EventRecord& r) { out.records.push_back(r); });
  return out;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos && detail::trim(s) == s) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void serialize_events(std::ostream& out, const std::vector<EventRecord>& records,
                      const EventSchema& schema) {
  out << quote(schema.date_column) << ',' << quote(schema.cameo_column) << ','
      << quote(schema.intensity_column) << ',' << quote(schema.source_column) << ','
      << quote(schema.target_column) << '\n';
  for (const auto& r : records)
    out << format_date(r.date, schema.date_format) << ',' << r.cameo_code << ','
        << detail::format_double(r.intensity) << ',' << quote(r.source) << ',' << quote(r.target)
        << '\n';
}

// Aggregation -------------------------------------------------------------------

void AggregationConfig::validate() const {
  if (country_order.empty()) throw ConfigError("country order is empty");
  std::set<std::string> seen;
  for (const auto& c : country_order)
    if (!seen.insert(c).second) throw ConfigError(fmt::format("country '{}' listed twice", c));
  if (first_month && last_month && *last_month < *first_month)
    throw ConfigError("last month precedes first month");
}

std::string AggregationReport::to_json() const {
  nlohmann::ordered_json j;
  j["events_total"] = events_total;
  j["events_domestic_dropped"] = events_domestic_dropped;
  j["events_unknown_country"] = events_unknown_country;
  j["events_out_of_range"] = events_out_of_range;
  j["events_zero_intensity"] = events_zero_intensity;
  nlohmann::ordered_json months = nlohmann::ordered_json::object();
  for (const auto& [month, count] : per_month_counts) months[month] = count;
  j["per_month_counts"] = months;
  return j.dump(2) + "\n";
}

LayerAggregator::LayerAggregator(AggregationConfig config) : config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i < config_.country_order.size(); ++i)
    position_[config_.country_order[i]] = static_cast<int>(i);
}

void LayerAggregator::add(const EventRecord& event) {
  ++report_.events_total;
  if (event.source == event.target) {
    ++report_.events_domestic_dropped;
    return;
  }
  const auto src = position_.find(event.source);
  const auto dst = position_.find(event.target);
  if (src == position_.end() || dst == position_.end()) {
    ++report_.events_unknown_country;
    return;
  }
  const YearMonth month = month_of(event.date);
  if ((config_.first_month && month < *config_.first_month) ||
      (config_.last_month && month > *config_.last_month)) {
    ++report_.events_out_of_range;
    return;
  }
  if (event.intensity == 0.0) {
    ++report_.events_zero_intensity;
    return;
  }
  const auto n = static_cast<Eigen::Index>(config_.country_order.size());
  auto [it, inserted] = months_.try_emplace(
      month.index(), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n));
  if (event.intensity < 0.0)
    it->second.first(src->second, dst->second) += -event.intensity;
  else
    it->second.second(src->second, dst->second) += event.intensity;
  ++report_.per_month_counts[month.label()];
}

MultilayerPanel LayerAggregator::finish() const {
  int first = 0, last = -1;
  if (config_.first_month) first = config_.first_month->index();
  else if (!months_.empty()) first = months_.begin()->first;
  if (config_.last_month) last = config_.last_month->index();
  else if (!months_.empty()) last = months_.rbegin()->first;
  if (last < first)
    throw ConstraintError(
        "no retained cross-border events and no month range: every layer would be empty");
  const int n = static_cast<int>(config_.country_order.size());
  MultilayerPanel panel(n, 2, last - first + 1);
  for (int t = 0; t < panel.periods(); ++t) {
    const auto it = months_.find(first + t);
    if (it == months_.end()) continue;
    panel.weights(kConflictualLayer, t) = it->second.first;
    panel.weights(kCooperativeLayer, t) = it->second.second;
  }
  panel = normalize(panel, config_.normalization);
  panel.node_labels = config_.country_order;
  panel.layer_labels = {"conflictual", "cooperative"};
  for (int t = 0; t < panel.periods(); ++t)
    panel.period_labels.push_back(YearMonth::from_index(first + t).label());
  return panel;
}

AggregatedPanel aggregate_to_layers(const std::vector<EventRecord>& events,
                                    const AggregationConfig& config) {
  LayerAggregator agg(config);
  for (const auto& e : events) agg.add(e);
  AggregatedPanel out{agg.finish(), agg.report()};
  for (int t = 0; t < out.panel.periods(); ++t) {
    const std::string label = out.panel.period_labels[t];
    out.report.per_month_counts.try_emplace(label, 0);
  }
  return out;
}

// Market data -------------------------------------------------------------------

DatedSeries read_dated_csv(const std::filesystem::path& path, DateFormat format) {
  auto in = detail::open_input(path);
  std::string line;
  DatedSeries out;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) break;
  }
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2)
    throw ParseError(fmt::format("'{}' needs a date column and at least one series", path.string()));
  out.columns.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = fmt::format("{}:{}", path.string(), line_no);
    if (fields.size() != header.size())
      throw ParseError(fmt::format("{}: expected {} fields, found {}", where, header.size(),
                                   fields.size()));
    const auto date = parse_date(fields[0], format);
    if (!date) throw ParseError(fmt::format("{}: unparseable date '{}'", where, fields[0]));
    if (!out.dates.empty() && !(out.dates.back() < *date))
      throw ParseError(fmt::format("{}: dates must be strictly increasing", where));
    out.dates.push_back(*date);
    std::vector<double> row;
    for (std::size_t c = 1; c < fields.size(); ++c) row.push_back(detail::require_double(fields[c], where));
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(out.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) out.values(r, c) = rows[r][c];
  return out;
}

Eigen::MatrixXd compute_log_returns(const Eigen::MatrixXd& prices) {
  if (prices.rows() < 2) throw ConstraintError("need at least two price rows for returns");
  for (Eigen::Index t = 0; t < prices.rows(); ++t)
    for (Eigen::Index j = 0; j < prices.cols(); ++j)
      if (!(prices(t, j) > 0.0) || !std::isfinite(prices(t, j)))
        throw ConstraintError(
            fmt::format("price at row {}, series {} is {}; prices must be positive", t, j,
                        prices(t, j)));
  const Eigen::MatrixXd logp = prices.array().log();
  return logp.bottomRows(prices.rows() - 1) - logp.topRows(prices.rows() - 1);
}

double compute_realized_volatility(std::span<const double> daily_returns) {
  if (daily_returns.empty()) throw ConstraintError("month has no daily returns");
  double rv = 0.0;
  for (double r : daily_returns) rv += r * r;
  return rv;
}

MonthlySeries realized_volatility_by_month(const DatedSeries& daily) {
  MonthlySeries out;
  out.columns = daily.columns;
  std::vector<std::pair<YearMonth, std::vector<Eigen::Index>>> groups;
  for (std::size_t r = 0; r < daily.dates.size(); ++r) {
    const YearMonth m = month_of(daily.dates[r]);
    if (groups.empty() || groups.back().first != m) groups.push_back({m, {}});
    groups.back().second.push_back(static_cast<Eigen::Index>(r));
  }
  out.values.resize(static_cast<Eigen::Index>(groups.size()), daily.values.cols());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    out.months.push_back(groups[g].first);
    for (Eigen::Index c = 0; c < daily.values.cols(); ++c) {
      std::vector<double> values;
      for (Eigen::Index r : groups[g].second) values.push_back(daily.values(r, c));
      out.values(static_cast<Eigen::Index>(g), c) = compute_realized_volatility(values);
    }
  }
  return out;
}

MonthlySeries to_monthly(const DatedSeries& series) {
  MonthlySeries out;
  out.columns = series.columns;
  out.values = series.values;
  for (const auto& d : series.dates) {
    const YearMonth m = month_of(d);
    if (!out.months.empty() && out.months.back() == m)
      throw ConstraintError(fmt::format("month {} appears twice", m.label()));
    out.months.push_back(m);
  }
  return out;
}

MonthlySeries monthly_log_returns(const DatedSeries& prices) {
  const MonthlySeries monthly = to_monthly(prices);
  MonthlySeries out;
  out.columns = monthly.columns;
  out.values = compute_log_returns(monthly.values);
  out.months.assign(monthly.months.begin() + 1, monthly.months.end());
  return out;
}

namespace {

void require_consecutive(const std::vector<YearMonth>& months, const std::string& what) {
  std::vector<std::string> gaps;
  for (std::size_t i = 1; i < months.size(); ++i) {
    const int step = months[i].index() - months[i - 1].index();
    if (step <= 0)
      throw ConstraintError(fmt::format("{} months are not increasing at {}", what, months[i].label()));
    for (int g = 1; g < step; ++g) gaps.push_back((months[i - 1] + g).label());
  }
  if (!gaps.empty()) {
    std::string list;
    for (const auto& g : gaps) list += (list.empty() ? "" : ", ") + g;
    throw ConstraintError(fmt::format("{} calendar has gaps: {}", what, list));
  }
}

}  // namespace

AssembledDesign assemble_design(const MonthlySeries& responses, const MonthlySeries& controls,
                                const std::vector<int>& lags) {
  if (lags.size() != static_cast<std::size_t>(controls.values.cols()))
    throw ConfigError(fmt::format("{} lags given for {} controls", lags.size(), controls.values.cols()));
  for (int l : lags)
    if (l < 0) throw ConfigError("lags must be non-negative");
  if (responses.months.empty()) throw ConstraintError("no response months");
  require_consecutive(responses.months, "response");
  if (!controls.months.empty()) require_consecutive(controls.months, "control");
  const int max_lag = lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());

  int first = responses.months.front().index();
  int last = responses.months.back().index();
  int control_first = first, control_last = last;
  if (controls.values.cols() > 0) {
    control_first = controls.months.front().index();
    control_last = controls.months.back().index();
    first = std::max(first, control_first);
    last = std::min(last, control_last);
  }
  const int start = first + max_lag;
  if (start > last) throw ConstraintError("responses and lagged controls share no months");

  AssembledDesign out;
  const int rows = last - start + 1;
  out.rows_dropped = static_cast<int>(responses.months.size()) - rows;
  out.design.factors.resize(rows, controls.values.cols());
  out.design.responses.resize(rows, responses.values.cols());
  const int r0 = responses.months.front().index();
  for (int i = 0; i < rows; ++i) {
    const int m = start + i;
    out.months.push_back(YearMonth::from_index(m));
    out.design.responses.row(i) = responses.values.row(m - r0);
    for (Eigen::Index c = 0; c < controls.values.cols(); ++c)
      out.design.factors(i, c) = controls.values(m - lags[c] - control_first, c);
  }
  out.design.factor_names = controls.columns;
  out.design.response_names = responses.columns;
  for (const auto& m : out.months) out.design.period_labels.push_back(m.label());
  return out;
}

}  // namespace mlsar
