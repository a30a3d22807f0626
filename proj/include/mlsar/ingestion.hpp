#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlsar/model.hpp"
#include "mlsar/networks.hpp"

namespace mlsar {

struct CivilDate {
  int year = 0;
  int month = 0;
  int day = 0;
  auto operator<=>(const CivilDate&) const = default;
};

/// Calendar month; `index()` counts months so consecutive months differ by 1.
struct YearMonth {
  int year = 0;
  int month = 0;
  auto operator<=>(const YearMonth&) const = default;
  int index() const { return year * 12 + (month - 1); }
  static YearMonth from_index(int index) { return {index / 12, index % 12 + 1}; }
  YearMonth operator+(int months) const { return from_index(index() + months); }
  std::string label() const;  // YYYY-MM
};

YearMonth month_of(const CivilDate& date);

enum class DateFormat { day_first, iso };

DateFormat parse_date_format(const std::string& name);  // "day_first" | "iso"
/// DD-MM-YYYY (also with '/' or '.') or YYYY-MM-DD; nullopt when malformed
/// or not a real calendar date.
std::optional<CivilDate> parse_date(std::string_view text, DateFormat format);
std::string format_date(const CivilDate& date, DateFormat format);
/// YYYY-MM.
std::optional<YearMonth> parse_year_month(std::string_view text);

/// Maps country names and codes to codes. Lookup is case-insensitive.
class CountryAliases {
 public:
  /// Canada, France, Germany, Italy, Japan, United Kingdom, United States.
  static CountryAliases g7();
  void add(const std::string& code, const std::string& name);
  /// Code for a known name or code, nullopt otherwise.
  std::optional<std::string> resolve(std::string_view text) const;
  const std::vector<std::string>& codes() const { return codes_; }
  std::optional<std::string> name_of(const std::string& code) const;

 private:
  std::map<std::string, std::string> lookup_;
  std::map<std::string, std::string> names_;
  std::vector<std::string> codes_;
};

struct EventSchema {
  std::string date_column = "date";
  std::string cameo_column = "cameo";
  std::string intensity_column = "intensity";
  std::string source_column = "source";
  std::string target_column = "target";
  DateFormat date_format = DateFormat::day_first;
};

/// Source and target hold country codes when the alias table knows them
/// and the raw text otherwise.
struct EventRecord {
  CivilDate date;
  int cameo_code = 0;
  double intensity = 0.0;
  std::string source;
  std::string target;
  bool operator==(const EventRecord&) const = default;
};

struct RowError {
  int line = 0;
  std::string message;
};

struct ParseReport {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::vector<RowError> errors;
};

/// Streams records to `sink` one at a time. Malformed rows are recorded
/// with their line numbers; more than 10% malformed rows raises ParseError
/// once the stream is exhausted.
ParseReport for_each_event(std::istream& in, const EventSchema& schema,
                           const CountryAliases& aliases,
                           const std::function<void(const EventRecord&)>& sink);

struct ParsedEvents {
  std::vector<EventRecord> records;
  ParseReport report;
};
ParsedEvents parse_events(std::istream& in, const EventSchema& schema,
                          const CountryAliases& aliases = CountryAliases::g7());

/// Writes records with the schema's column names; parse_events reads the
/// result back to the same records.
void serialize_events(std::ostream& out, const std::vector<EventRecord>& records,
                      const EventSchema& schema);

struct AggregationConfig {
  std::vector<std::string> country_order = {"CA", "FR", "DE", "IT", "JP", "UK", "US"};
  Normalization normalization = Normalization::none;
  /// Inclusive month range; inferred from the retained events when unset.
  std::optional<YearMonth> first_month;
  std::optional<YearMonth> last_month;

  void validate() const;
};

inline constexpr int kConflictualLayer = 0;
inline constexpr int kCooperativeLayer = 1;

struct AggregationReport {
  std::size_t events_total = 0;
  std::size_t events_domestic_dropped = 0;
  std::size_t events_unknown_country = 0;
  std::size_t events_out_of_range = 0;
  std::size_t events_zero_intensity = 0;
  std::map<std::string, std::size_t> per_month_counts;  // retained cross-border events

  std::string to_json() const;
};

/// Builds the two monthly layers: conflictual entries sum |negative
/// intensities|, cooperative entries sum positive intensities, for each
/// ordered (source, target) pair.
class LayerAggregator {
 public:
  explicit LayerAggregator(AggregationConfig config);
  void add(const EventRecord& event);
  /// Panel with d = 2 and one period per month, normalized last.
  MultilayerPanel finish() const;
  const AggregationReport& report() const { return report_; }

 private:
  AggregationConfig config_;
  std::map<std::string, int> position_;
  std::map<int, std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> months_;
  AggregationReport report_;
};

struct AggregatedPanel {
  MultilayerPanel panel;
  AggregationReport report;
};
AggregatedPanel aggregate_to_layers(const std::vector<EventRecord>& events,
                                    const AggregationConfig& config);

// Market data ------------------------------------------------------------------

/// Rows are periods, columns series.
struct DatedSeries {
  std::vector<CivilDate> dates;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

/// First column a date, then one numeric column per series.
DatedSeries read_dated_csv(const std::filesystem::path& path, DateFormat format);

/// r_t = log p_t - log p_{t-1}; rows = prices rows - 1.
Eigen::MatrixXd compute_log_returns(const Eigen::MatrixXd& prices);

/// Sum of squared daily returns of one month.
double compute_realized_volatility(std::span<const double> daily_returns);

struct MonthlySeries {
  std::vector<YearMonth> months;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

/// Groups daily returns by calendar month and sums their squares.
MonthlySeries realized_volatility_by_month(const DatedSeries& daily_returns);
/// Month-end prices to monthly log returns, labelled by the later month.
MonthlySeries monthly_log_returns(const DatedSeries& monthly_prices);
/// One value per month; dates only supply the month.
MonthlySeries to_monthly(const DatedSeries& series);

struct AssembledDesign {
  RegressionDesign design;
  std::vector<YearMonth> months;
  int rows_dropped = 0;
};

/// Joins responses with controls, control c taken `lags[c]` months back.
/// The common calendar is trimmed at the head by the largest lag. Missing
/// months in either input raise ConstraintError listing the gaps.
AssembledDesign assemble_design(const MonthlySeries& responses, const MonthlySeries& controls,
                                const std::vector<int>& lags);

}  // namespace mlsar
