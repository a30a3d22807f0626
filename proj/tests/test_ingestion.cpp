#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlsar/ingestion.hpp"

using namespace mlsar;

namespace {

const std::filesystem::path kFixtures = MLSAR_FIXTURES_DIR;

ParsedEvents parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  REQUIRE(in);
  return parse_events(in, EventSchema{});
}

ParsedEvents parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_events(in, EventSchema{});
}

int code_index(const std::string& code) {
  const std::vector<std::string> order{"CA", "FR", "DE", "IT", "JP", "UK", "US"};
  return static_cast<int>(std::find(order.begin(), order.end(), code) - order.begin());
}

const std::string kHeader = "date,cameo,description,intensity,source,target\n";

}  // namespace

TEST_CASE("dates parse in both layouts and reject impossible days") {
  CHECK(parse_date("04-01-1998", DateFormat::day_first) == CivilDate{1998, 1, 4});
  CHECK(parse_date("04/01/1998", DateFormat::day_first) == CivilDate{1998, 1, 4});
  CHECK(parse_date("1998-01-04", DateFormat::iso) == CivilDate{1998, 1, 4});
  CHECK_FALSE(parse_date("31-02-1998", DateFormat::day_first));
  CHECK(parse_date("29-02-2000", DateFormat::day_first));
  CHECK_FALSE(parse_date("29-02-1900", DateFormat::day_first));
  CHECK_FALSE(parse_date("1998-13-01", DateFormat::iso));
  CHECK_FALSE(parse_date("soon", DateFormat::iso));
  CHECK(format_date({1998, 1, 4}, DateFormat::day_first) == "04-01-1998");
  CHECK(parse_year_month("1998-01") == YearMonth{1998, 1});
  CHECK((YearMonth{1998, 12} + 1).label() == "1999-01");
}

TEST_CASE("country aliases resolve names and codes case-insensitively") {
  const auto g7 = CountryAliases::g7();
  CHECK(g7.resolve("Japan") == std::optional<std::string>("JP"));
  CHECK(g7.resolve("united kingdom") == std::optional<std::string>("UK"));
  CHECK(g7.resolve("USA") == std::optional<std::string>("US"));
  CHECK(g7.resolve("us") == std::optional<std::string>("US"));
  CHECK_FALSE(g7.resolve("Brazil"));
  CHECK(g7.codes().size() == 7);
}

TEST_CASE("Table 1 rows parse to the documented records") {
  const auto parsed = parse_file(kFixtures / "table1_events.csv");
  REQUIRE(parsed.records.size() == 2);
  CHECK(parsed.records[0] == EventRecord{{1998, 1, 4}, 111, 8.0, "JP", "US"});
  CHECK(parsed.records[1] == EventRecord{{1998, 1, 5}, 172, -5.0, "FR", "UK"});
  CHECK(parsed.report.errors.empty());
}

TEST_CASE("Table 1 aggregates to exactly two nonzero entries") {
  const auto parsed = parse_file(kFixtures / "table1_with_domestic.csv");
  const auto agg = aggregate_to_layers(parsed.records, AggregationConfig{});
  REQUIRE(agg.panel.periods() == 1);
  REQUIRE(agg.panel.d() == 2);
  const auto& coop = agg.panel.weights(kCooperativeLayer, 0);
  const auto& conf = agg.panel.weights(kConflictualLayer, 0);
  CHECK(coop(code_index("JP"), code_index("US")) == 8.0);
  CHECK(conf(code_index("FR"), code_index("UK")) == 5.0);
  CHECK(coop.cwiseAbs().sum() == 8.0);
  CHECK(conf.cwiseAbs().sum() == 5.0);
  CHECK(agg.report.events_domestic_dropped == 1);
  CHECK(agg.report.per_month_counts.at("1998-01") == 2);
  CHECK(agg.panel.period_labels == std::vector<std::string>{"1998-01"});
  CHECK(agg.report.to_json() == aggregate_to_layers(parsed.records, AggregationConfig{}).report.to_json());
}

TEST_CASE("events in a month accumulate per dyad") {
  const auto parsed = parse_text(kHeader +
                                 "01-03-2001,050,a,3,Japan,United States\n"
                                 "20-03-2001,050,b,4,Japan,United States\n"
                                 "21-03-2001,050,c,-2,Japan,United States\n"
                                 "22-03-2001,050,d,0,Japan,France\n");
  const auto agg = aggregate_to_layers(parsed.records, AggregationConfig{});
  CHECK(agg.panel.weights(kCooperativeLayer, 0)(code_index("JP"), code_index("US")) == 7.0);
  CHECK(agg.panel.weights(kConflictualLayer, 0)(code_index("JP"), code_index("US")) == 2.0);
  CHECK(agg.report.events_zero_intensity == 1);
}

TEST_CASE("empty months become zero snapshots and ranges drop events") {
  const auto parsed = parse_text(kHeader +
                                 "01-01-2001,050,a,3,Japan,Canada\n"
                                 "01-03-2001,050,b,-4,Italy,Germany\n"
                                 "01-06-2001,050,c,1,Italy,Germany\n");
  auto agg = aggregate_to_layers(parsed.records, AggregationConfig{});
  REQUIRE(agg.panel.periods() == 6);
  CHECK(agg.panel.weights(0, 1).isZero());
  CHECK(agg.report.per_month_counts.at("2001-02") == 0);

  AggregationConfig ranged;
  ranged.first_month = YearMonth{2001, 2};
  ranged.last_month = YearMonth{2001, 4};
  agg = aggregate_to_layers(parsed.records, ranged);
  CHECK(agg.panel.periods() == 3);
  CHECK(agg.report.events_out_of_range == 2);
}

TEST_CASE("unknown countries are counted and dropped") {
  const auto parsed = parse_text(kHeader + "01-01-2001,050,a,3,Japan,Brazil\n01-01-2001,050,a,3,Japan,Canada\n");
  REQUIRE(parsed.records.size() == 2);
  const auto agg = aggregate_to_layers(parsed.records, AggregationConfig{});
  CHECK(agg.report.events_unknown_country == 1);
  CHECK(agg.report.events_total == 2);
}

TEST_CASE("row-level errors carry line numbers") {
  std::string text = kHeader + "04-01-1998,111,x,11,Japan,United States\n";
  for (int i = 0; i < 20; ++i) text += "04-01-1998,111,x,1,Japan,United States\n";
  const auto parsed = parse_text(text);
  CHECK(parsed.records.size() == 20);
  REQUIRE(parsed.report.errors.size() == 1);
  CHECK(parsed.report.errors[0].line == 2);
}

TEST_CASE("too many malformed rows abort the parse") {
  std::string text = kHeader;
  for (int i = 0; i < 5; ++i) text += "04-01-1998,111,x,1,Japan,United States\n";
  text += "not a date,111,x,1,Japan,United States\n";
  CHECK_THROWS_AS(parse_text(text), ParseError);
  CHECK_THROWS_AS(parse_text("date,cameo,intensity,source\n"), ParseError);
}

TEST_CASE("serialized events parse back to the same records") {
  const auto parsed = parse_file(kFixtures / "table1_events.csv");
  std::ostringstream out;
  serialize_events(out, parsed.records, EventSchema{});
  CHECK(parse_text(out.str()).records == parsed.records);
}

TEST_CASE("streaming parse visits every record") {
  std::ifstream in(kFixtures / "table1_events.csv");
  int seen = 0;
  const auto report = for_each_event(in, EventSchema{}, CountryAliases::g7(),
                                     [&](const EventRecord&) { ++seen; });
  CHECK(seen == 2);
  CHECK(report.accepted == 2);
}

TEST_CASE("aggregation config is validated") {
  AggregationConfig c;
  c.country_order = {"US", "US"};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.country_order = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("log returns") {
  Eigen::MatrixXd prices(3, 2);
  prices << 100, 5, 110, 5, 121, 5;
  const Eigen::MatrixXd r = compute_log_returns(prices);
  REQUIRE(r.rows() == 2);
  CHECK(r(0, 0) == doctest::Approx(0.0953101798).epsilon(1e-9));
  CHECK(r.col(1).isZero());
  // cumulative sum reconstructs the prices
  double level = prices(0, 0);
  for (int t = 0; t < 2; ++t) {
    level *= std::exp(r(t, 0));
    CHECK(std::abs(level - prices(t + 1, 0)) < 1e-12 * prices(t + 1, 0));
  }
  prices(1, 1) = 0.0;
  CHECK_THROWS_AS(compute_log_returns(prices), ConstraintError);
}

TEST_CASE("realized volatility sums squared returns") {
  const std::vector<double> r{0.01, -0.02};
  CHECK(compute_realized_volatility(r) == doctest::Approx(0.0005).epsilon(1e-12));
  const std::vector<double> doubled{0.02, -0.04};
  CHECK(compute_realized_volatility(doubled) == doctest::Approx(4 * 0.0005).epsilon(1e-12));
  const std::vector<double> zeros{0.0, 0.0, 0.0};
  CHECK(compute_realized_volatility(zeros) == 0.0);
  CHECK_THROWS_AS(compute_realized_volatility(std::span<const double>{}), ConstraintError);

  DatedSeries daily;
  daily.columns = {"a"};
  daily.dates = {{2000, 1, 3}, {2000, 1, 4}, {2000, 2, 1}};
  daily.values.resize(3, 1);
  daily.values << 0.01, -0.02, 0.03;
  const auto monthly = realized_volatility_by_month(daily);
  REQUIRE(monthly.months.size() == 2);
  CHECK(monthly.values(0, 0) == doctest::Approx(0.0005));
  CHECK(monthly.values(1, 0) == doctest::Approx(0.0009));
}

TEST_CASE("design assembly lags controls and trims the head") {
  MonthlySeries responses, controls;
  for (int m = 0; m < 6; ++m) {
    responses.months.push_back(YearMonth{2000, 1} + m);
    controls.months.push_back(YearMonth{2000, 1} + m);
  }
  responses.columns = {"y1", "y2"};
  responses.values.resize(6, 2);
  controls.columns = {"c1", "c2"};
  controls.values.resize(6, 2);
  for (int m = 0; m < 6; ++m) {
    responses.values.row(m) << m, 10 + m;
    controls.values.row(m) << 100 + m, 200 + m;
  }
  auto assembled = assemble_design(responses, controls, {1, 0});
  REQUIRE(assembled.design.periods() == 5);
  CHECK(assembled.rows_dropped == 1);
  for (int t = 0; t < 5; ++t) {
    CHECK(assembled.design.responses(t, 0) == t + 1);
    CHECK(assembled.design.factors(t, 0) == 100 + t);  // one month back
    CHECK(assembled.design.factors(t, 1) == 201 + t);
  }
  assembled = assemble_design(responses, controls, {0, 0});
  CHECK(assembled.design.periods() == 6);

  MonthlySeries gappy = controls;
  gappy.months[3] = YearMonth{2000, 9};
  gappy.months[4] = YearMonth{2000, 10};
  gappy.months[5] = YearMonth{2000, 11};
  CHECK_THROWS_AS(assemble_design(responses, gappy, {0, 0}), ConstraintError);
}
