#pragma once

#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bikerisk::ingest {

using Date = std::chrono::year_month_day;

enum class Severity { Slight = 0, Severe = 1 };

std::string_view to_string(Severity s);
Severity severity_from_string(std::string_view s);

// Column layout and label partition for one accident feed.
struct SchemaDescriptor {
  std::string id;
  char delimiter = ',';
  std::string lat_column;
  std::string lon_column;
  std::string severity_column;
  std::string date_column;
  std::string date_format = "%Y-%m-%d";
  std::vector<std::string> slight_labels;
  std::vector<std::string> severe_labels;
};

class SchemaRegistry {
 public:
  // london, boston, pittsburgh and generic layouts.
  static SchemaRegistry builtin();
  // Built-ins overlaid with the descriptors in a JSON document.
  static SchemaRegistry from_file(const std::filesystem::path& path);
  static SchemaRegistry from_json_text(std::string_view text);

  const SchemaDescriptor& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  void add(SchemaDescriptor schema);
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, SchemaDescriptor, std::less<>> schemas_;
};

struct RawAccident {
  std::string schema;
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  std::string raw_severity;
  Date date{};
  std::size_t line = 0;  // source line, for reject reporting
  std::string content;   // the source row as read
};

struct AccidentRecord {
  std::string id;
  double latitude = 0.0;
  double longitude = 0.0;
  Severity severity = Severity::Slight;
  Date date{};
  std::string source_city;
  friend bool operator==(const AccidentRecord&, const AccidentRecord&) = default;
};

struct Reject {
  std::size_t line = 0;
  std::string reason;
  std::string content;
};

struct ParseResult {
  std::vector<RawAccident> accidents;
  std::vector<Reject> rejects;
  std::size_t rows = 0;
};

ParseResult parse_accident_file(const std::filesystem::path& path,
                                std::string_view schema_id,
                                const SchemaRegistry& registry = SchemaRegistry::builtin());

ParseResult parse_accident_stream(std::istream& in, const SchemaDescriptor& schema,
                                  std::string_view source_name);

// Maps the raw label through the schema's partition. Labels are compared
// after trimming and lowercasing. Throws DataError naming the offending label
// when it is not part of the partition.
AccidentRecord unify_severity(const RawAccident& raw,
                              const SchemaRegistry& registry = SchemaRegistry::builtin());

struct IngestResult {
  std::vector<AccidentRecord> records;
  std::vector<Reject> rejects;
  std::size_t rows = 0;
};

// parse + unify; unrecognized labels are moved to the rejects list so that
// records + rejects always equals rows.
IngestResult ingest_file(const std::filesystem::path& path, std::string_view schema_id,
                         const SchemaRegistry& registry = SchemaRegistry::builtin());

// Keeps records from the last `years` calendar years present in the input,
// sorted by date (stable).
std::vector<AccidentRecord> filter_window(std::vector<AccidentRecord> records, int years);

std::optional<Date> parse_date(std::string_view text, std::string_view format);
std::optional<Date> parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& d);

void write_jsonl(std::ostream& out, const std::vector<AccidentRecord>& records);
std::vector<AccidentRecord> read_jsonl(std::istream& in);

}  // namespace bikerisk::ingest
