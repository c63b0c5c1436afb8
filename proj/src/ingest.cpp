#include "bikerisk/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"
#include "builtin_schemas.hpp"

namespace bikerisk::ingest {

using nlohmann::json;

namespace {

std::string normalize_label(std::string_view s) { return csv::to_lower(csv::trim(s)); }

std::optional<double> parse_number(std::string_view text) {
  const std::string t = csv::trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = t.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

std::optional<int> parse_digits(std::string_view text, std::size_t& pos, std::size_t max_len) {
  std::size_t len = 0;
  int value = 0;
  while (pos < text.size() && len < max_len && text[pos] >= '0' && text[pos] <= '9') {
    value = value * 10 + (text[pos] - '0');
    ++pos;
    ++len;
  }
  if (len == 0) return std::nullopt;
  return value;
}

SchemaDescriptor schema_from_json(const json& j) {
  SchemaDescriptor s;
  s.id = csv::to_lower(j.at("id").get<std::string>());
  const std::string delim = j.value("delimiter", std::string(","));
  if (delim.size() != 1) throw UsageError("schema '" + s.id + "': delimiter must be one character");
  s.delimiter = delim.front();
  const json& cols = j.at("columns");
  s.lat_column = cols.at("lat").get<std::string>();
  s.lon_column = cols.at("lon").get<std::string>();
  s.severity_column = cols.at("severity").get<std::string>();
  s.date_column = cols.at("date").get<std::string>();
  s.date_format = j.value("date_format", std::string("%Y-%m-%d"));
  for (const auto& l : j.at("labels").at("slight")) s.slight_labels.push_back(normalize_label(l.get<std::string>()));
  for (const auto& l : j.at("labels").at("severe")) s.severe_labels.push_back(normalize_label(l.get<std::string>()));

  std::set<std::string> seen;
  for (const auto& l : s.slight_labels) seen.insert(l);
  for (const auto& l : s.severe_labels) {
    if (seen.count(l)) {
      throw UsageError("schema '" + s.id + "': label '" + l + "' mapped to both classes");
    }
  }
  return s;
}

void merge_json(std::map<std::string, SchemaDescriptor, std::less<>>& into, const json& doc) {
  for (const auto& entry : doc.at("schemas")) {
    SchemaDescriptor s = schema_from_json(entry);
    into.insert_or_assign(s.id, std::move(s));
  }
}

}  // namespace

std::string_view to_string(Severity s) { return s == Severity::Severe ? "severe" : "slight"; }

Severity severity_from_string(std::string_view s) {
  const std::string n = normalize_label(s);
  if (n == "slight") return Severity::Slight;
  if (n == "severe") return Severity::Severe;
  throw DataError("unknown severity value '" + std::string(s) + "'");
}

SchemaRegistry SchemaRegistry::builtin() {
  static const SchemaRegistry registry = [] {
    SchemaRegistry r;
    merge_json(r.schemas_, json::parse(detail::kBuiltinSchemas));
    return r;
  }();
  return registry;
}

SchemaRegistry SchemaRegistry::from_json_text(std::string_view text) {
  SchemaRegistry r = builtin();
  json doc;
  try {
    doc = json::parse(text);
    merge_json(r.schemas_, doc);
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid schema descriptor: ") + e.what());
  }
  return r;
}

SchemaRegistry SchemaRegistry::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open schema descriptor " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const SchemaDescriptor& SchemaRegistry::get(std::string_view id) const {
  auto it = schemas_.find(csv::to_lower(id));
  if (it == schemas_.end()) throw UsageError("unknown schema id '" + std::string(id) + "'");
  return it->second;
}

bool SchemaRegistry::contains(std::string_view id) const {
  return schemas_.find(csv::to_lower(id)) != schemas_.end();
}

void SchemaRegistry::add(SchemaDescriptor schema) {
  schema.id = csv::to_lower(schema.id);
  schemas_.insert_or_assign(schema.id, std::move(schema));
}

std::vector<std::string> SchemaRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : schemas_) out.push_back(id);
  return out;
}

std::optional<Date> parse_iso_date(std::string_view text) {
  return parse_date(text, "%Y-%m-%d");
}

std::optional<Date> parse_date(std::string_view text, std::string_view format) {
  const std::string t = csv::trim(text);
  std::size_t pos = 0;
  int y = -1, m = -1, d = -1;
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      const char spec = format[++f];
      std::optional<int> v;
      switch (spec) {
        case 'Y': v = parse_digits(t, pos, 4); if (v) y = *v; break;
        case 'm': v = parse_digits(t, pos, 2); if (v) m = *v; break;
        case 'd': v = parse_digits(t, pos, 2); if (v) d = *v; break;
        default: return std::nullopt;
      }
      if (!v) return std::nullopt;
    } else {
      if (pos >= t.size() || t[pos] != format[f]) return std::nullopt;
      ++pos;
    }
  }
  // A time-of-day suffix is tolerated.
  if (pos < t.size() && t[pos] != 'T' && t[pos] != ' ') return std::nullopt;
  if (y < 0 || m < 0 || d < 0) return std::nullopt;
  const Date date{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

std::string format_iso_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

ParseResult parse_accident_stream(std::istream& in, const SchemaDescriptor& schema,
                                  std::string_view source_name) {
  ParseResult result;
  std::size_t line_no = 0;
  auto header_line = csv::next_line(in, line_no);
  if (!header_line) throw DataError(std::string(source_name) + ": empty file");

  const auto header = csv::split_record(*header_line, schema.delimiter);
  auto column_index = [&](const std::string& name) {
    const std::string want = csv::to_lower(csv::trim(name));
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (csv::to_lower(csv::trim(header[i])) == want) return i;
    }
    throw DataError(std::string(source_name) + ": missing required column '" + name +
                    "' for schema " + schema.id);
  };
  const std::size_t lat_i = column_index(schema.lat_column);
  const std::size_t lon_i = column_index(schema.lon_column);
  const std::size_t sev_i = column_index(schema.severity_column);
  const std::size_t date_i = column_index(schema.date_column);
  const std::size_t needed = std::max({lat_i, lon_i, sev_i, date_i}) + 1;

  while (auto line = csv::next_line(in, line_no)) {
    ++result.rows;
    auto reject = [&](std::string reason) {
      result.rejects.push_back({line_no, std::move(reason), *line});
    };
    const auto fields = csv::split_record(*line, schema.delimiter);
    if (fields.size() < needed) {
      reject("expected at least " + std::to_string(needed) + " fields, got " +
             std::to_string(fields.size()));
      continue;
    }
    const auto lat = parse_number(fields[lat_i]);
    const auto lon = parse_number(fields[lon_i]);
    if (!lat || !lon) {
      reject("unparsable coordinates");
      continue;
    }
    if (*lat < -90.0 || *lat > 90.0 || *lon < -180.0 || *lon > 180.0) {
      reject("coordinate out of range");
      continue;
    }
    std::string severity = csv::trim(fields[sev_i]);
    if (severity.empty()) {
      reject("missing severity");
      continue;
    }
    auto date = parse_date(fields[date_i], schema.date_format);
    if (!date) date = parse_iso_date(fields[date_i]);
    if (!date) {
      reject("unparsable date '" + csv::trim(fields[date_i]) + "'");
      continue;
    }
    RawAccident raw;
    raw.schema = schema.id;
    raw.id = schema.id + "-" + std::to_string(line_no);
    raw.latitude = *lat;
    raw.longitude = *lon;
    raw.raw_severity = std::move(severity);
    raw.date = *date;
    raw.line = line_no;
    raw.content = *line;
    result.accidents.push_back(std::move(raw));
  }
  return result;
}

ParseResult parse_accident_file(const std::filesystem::path& path, std::string_view schema_id,
                                const SchemaRegistry& registry) {
  const SchemaDescriptor& schema = registry.get(schema_id);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open accident file " + path.string());
  return parse_accident_stream(in, schema, path.filename().string());
}

AccidentRecord unify_severity(const RawAccident& raw, const SchemaRegistry& registry) {
  const SchemaDescriptor& schema = registry.get(raw.schema);
  const std::string label = normalize_label(raw.raw_severity);
  AccidentRecord rec;
  rec.id = raw.id;
  rec.latitude = raw.latitude;
  rec.longitude = raw.longitude;
  rec.date = raw.date;
  rec.source_city = schema.id;
  if (std::find(schema.slight_labels.begin(), schema.slight_labels.end(), label) !=
      schema.slight_labels.end()) {
    rec.severity = Severity::Slight;
  } else if (std::find(schema.severe_labels.begin(), schema.severe_labels.end(), label) !=
             schema.severe_labels.end()) {
    rec.severity = Severity::Severe;
  } else {
    throw DataError("unrecognized severity label '" + raw.raw_severity + "' for schema " +
                    schema.id);
  }
  return rec;
}

IngestResult ingest_file(const std::filesystem::path& path, std::string_view schema_id,
                         const SchemaRegistry& registry) {
  ParseResult parsed = parse_accident_file(path, schema_id, registry);
  IngestResult out;
  out.rows = parsed.rows;
  out.rejects = std::move(parsed.rejects);
  for (const auto& raw : parsed.accidents) {
    try {
      out.records.push_back(unify_severity(raw, registry));
    } catch (const DataError& e) {
      out.rejects.push_back({raw.line, e.what(), raw.content});
    }
  }
  std::sort(out.rejects.begin(), out.rejects.end(),
            [](const Reject& a, const Reject& b) { return a.line < b.line; });
  return out;
}

std::vector<AccidentRecord> filter_window(std::vector<AccidentRecord> records, int years) {
  if (years < 1) throw UsageError("filter_window: years must be >= 1");
  if (records.empty()) throw DataError("filter_window: empty input");
  int latest = static_cast<int>(records.front().date.year());
  for (const auto& r : records) latest = std::max(latest, static_cast<int>(r.date.year()));
  const int first_kept = latest - years + 1;
  std::erase_if(records, [&](const AccidentRecord& r) {
    return static_cast<int>(r.date.year()) < first_kept;
  });
  std::stable_sort(records.begin(), records.end(),
                   [](const AccidentRecord& a, const AccidentRecord& b) {
                     return std::chrono::sys_days{a.date} < std::chrono::sys_days{b.date};
                   });
  return records;
}

void write_jsonl(std::ostream& out, const std::vector<AccidentRecord>& records) {
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["lat"] = r.latitude;
    j["lon"] = r.longitude;
    j["severity"] = to_string(r.severity);
    j["date"] = format_iso_date(r.date);
    j["source_city"] = r.source_city;
    out << j.dump() << '\n';
  }
}

std::vector<AccidentRecord> read_jsonl(std::istream& in) {
  std::vector<AccidentRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      AccidentRecord r;
      r.id = j.at("id").get<std::string>();
      r.latitude = j.at("lat").get<double>();
      r.longitude = j.at("lon").get<double>();
      r.severity = severity_from_string(j.at("severity").get<std::string>());
      auto d = parse_iso_date(j.at("date").get<std::string>());
      if (!d) throw DataError("bad date");
      r.date = *d;
      r.source_city = j.at("source_city").get<std::string>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace bikerisk::ingest
