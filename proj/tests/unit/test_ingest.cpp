#include "doctest.h"

#include <sstream>

#include "bikerisk/error.hpp"
#include "bikerisk/ingest.hpp"
#include "support.hpp"

using namespace bikerisk;
using namespace bikerisk::ingest;
using namespace std::chrono;

namespace {

ParseResult parse_text(const std::string& text, std::string_view schema) {
  std::istringstream in(text);
  return parse_accident_stream(in, SchemaRegistry::builtin().get(schema), "inline");
}

RawAccident raw(std::string schema, std::string label) {
  RawAccident r;
  r.schema = std::move(schema);
  r.id = "x";
  r.latitude = 40.0;
  r.longitude = -80.0;
  r.raw_severity = std::move(label);
  r.date = 2016y / 4 / 1;
  return r;
}

AccidentRecord record_in(int year, int month = 6) {
  AccidentRecord r;
  r.id = std::to_string(year) + "-" + std::to_string(month);
  r.date = year_month_day{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)}, 1d};
  return r;
}

}  // namespace

TEST_CASE("london row maps fields directly") {
  const auto r = parse_text("Latitude,Longitude,Accident_Severity,Date\n51.5,-0.12,serious,2016-04-01\n", "london");
  REQUIRE(r.accidents.size() == 1);
  const auto& a = r.accidents[0];
  CHECK(a.latitude == 51.5);
  CHECK(a.longitude == -0.12);
  CHECK(a.raw_severity == "serious");
  CHECK(a.date == 2016y / 4 / 1);
  CHECK(a.id == "london-2");
}

TEST_CASE("native date formats per schema") {
  CHECK(parse_text("Latitude,Longitude,Accident_Severity,Date\n51.5,-0.12,Slight,01/04/2016\n", "london")
            .accidents.at(0).date == 2016y / 4 / 1);
  CHECK(parse_text("DEC_LAT,DEC_LONG,MAX_SEVERITY,CRASH_DATE\n40.4,-80,killed,04/01/2016\n", "pittsburgh")
            .accidents.at(0).date == 2016y / 4 / 1);
  CHECK(parse_text("lat,long,injury_level,dispatch_ts\n42.3,-71,2,2016-04-01 17:45:00\n", "boston")
            .accidents.at(0).date == 2016y / 4 / 1);
  CHECK_FALSE(parse_date("2016-02-30", "%Y-%m-%d").has_value());
  CHECK(format_iso_date(2016y / 4 / 1) == "2016-04-01");
}

TEST_CASE("out of range latitude is rejected") {
  const auto r = parse_text("Latitude,Longitude,Accident_Severity,Date\n95.0,-0.12,slight,2016-04-01\n", "london");
  CHECK(r.accidents.empty());
  REQUIRE(r.rejects.size() == 1);
  CHECK(r.rejects[0].reason == "coordinate out of range");
  CHECK(r.rejects[0].line == 2);
}

TEST_CASE("three rows with one bad row conserve counts") {
  const auto r = parse_text(
      "Latitude,Longitude,Accident_Severity,Date\n"
      "51.5,-0.12,slight,2016-04-01\n"
      "51.5,oops,slight,2016-04-01\n"
      "51.6,-0.13,fatal,2016-05-01\n",
      "london");
  CHECK(r.rows == 3);
  CHECK(r.accidents.size() == 2);
  CHECK(r.rejects.size() == 1);
  CHECK(r.rejects[0].reason == "unparsable coordinates");
}

TEST_CASE("missing severity and bad dates are rejected with reasons") {
  const auto r = parse_text(
      "Latitude,Longitude,Accident_Severity,Date\n"
      "51.5,-0.12,,2016-04-01\n"
      "51.5,-0.12,slight,someday\n"
      "51.5,-0.12\n",
      "london");
  REQUIRE(r.rejects.size() == 3);
  CHECK(r.rejects[0].reason == "missing severity");
  CHECK(r.rejects[1].reason == "unparsable date 'someday'");
  CHECK(r.rejects[2].reason.find("fields") != std::string::npos);
}

TEST_CASE("file-level errors") {
  CHECK_THROWS_AS(parse_text("", "london"), DataError);
  CHECK_THROWS_WITH_AS(parse_text("Latitude,Longitude,Date\n1,2,2016-01-01\n", "london"),
                       doctest::Contains("missing required column"), DataError);
  CHECK_THROWS_AS(SchemaRegistry::builtin().get("paris"), UsageError);
  // header matching ignores case
  CHECK(parse_text("latitude,LONGITUDE,accident_severity,date\n51.5,-0.12,slight,2016-04-01\n", "london")
            .accidents.size() == 1);
}

TEST_CASE("severity partition per city") {
  CHECK(unify_severity(raw("london", "fatal")).severity == Severity::Severe);
  CHECK(unify_severity(raw("london", "Serious")).severity == Severity::Severe);
  CHECK(unify_severity(raw("london", "slight")).severity == Severity::Slight);
  CHECK(unify_severity(raw("boston", "1")).severity == Severity::Slight);
  CHECK(unify_severity(raw("boston", "0")).severity == Severity::Slight);
  for (const char* l : {"2", "3", "4"}) CHECK(unify_severity(raw("boston", l)).severity == Severity::Severe);
  CHECK(unify_severity(raw("pittsburgh", "moderate injury")).severity == Severity::Severe);
  CHECK(unify_severity(raw("pittsburgh", " Minor Injury ")).severity == Severity::Slight);
  CHECK(unify_severity(raw("pittsburgh", "not injured")).severity == Severity::Slight);
  CHECK(unify_severity(raw("pittsburgh", "Not Injures")).severity == Severity::Slight);
  CHECK(unify_severity(raw("pittsburgh", "major")).severity == Severity::Severe);
  CHECK(unify_severity(raw("pittsburgh", "killed")).severity == Severity::Severe);
}

TEST_CASE("unrecognized labels are reported with the value") {
  CHECK_THROWS_WITH_AS(unify_severity(raw("boston", "7")), doctest::Contains("'7'"), DataError);
  CHECK_THROWS_AS(unify_severity(raw("london", "minor")), DataError);
}

TEST_CASE("custom schema descriptors overlay the built-ins") {
  const auto reg = SchemaRegistry::from_json_text(R"({"schemas": [{
      "id": "paris", "delimiter": ";",
      "columns": {"lat": "y", "lon": "x", "severity": "grav", "date": "jour"},
      "date_format": "%d.%m.%Y",
      "labels": {"slight": ["leger"], "severe": ["grave", "tue"]}}]})");
  CHECK(reg.contains("paris"));
  CHECK(reg.contains("london"));
  std::istringstream in("x;y;grav;jour\n2.35;48.85;tue;14.07.2017\n");
  const auto r = parse_accident_stream(in, reg.get("paris"), "paris.csv");
  REQUIRE(r.accidents.size() == 1);
  CHECK(unify_severity(r.accidents[0], reg).severity == Severity::Severe);
  CHECK_THROWS_AS(SchemaRegistry::from_json_text(R"({"schemas": [{"id": "bad",
      "columns": {"lat": "a", "lon": "b", "severity": "c", "date": "d"},
      "labels": {"slight": ["x"], "severe": ["x"]}}]})"),
                  UsageError);
}

TEST_CASE("filter_window keeps the last calendar years") {
  std::vector<AccidentRecord> span;
  for (int y = 2004; y <= 2017; ++y) span.push_back(record_in(y));
  auto kept = filter_window(span, 4);
  REQUIRE(kept.size() == 4);
  CHECK(static_cast<int>(kept.front().date.year()) == 2014);
  CHECK(static_cast<int>(kept.back().date.year()) == 2017);

  CHECK(filter_window(span, 40).size() == span.size());

  std::vector<AccidentRecord> four{record_in(2013), record_in(2010), record_in(2012), record_in(2011)};
  kept = filter_window(four, 2);
  REQUIRE(kept.size() == 2);
  CHECK(static_cast<int>(kept[0].date.year()) == 2012);
  CHECK(static_cast<int>(kept[1].date.year()) == 2013);

  CHECK_THROWS_AS(filter_window({}, 4), DataError);
  CHECK_THROWS_AS(filter_window(span, 0), UsageError);
}

TEST_CASE("filter_window sorts stably by date") {
  std::vector<AccidentRecord> rs{record_in(2016, 5), record_in(2016, 2), record_in(2016, 5)};
  rs[0].id = "first";
  rs[2].id = "second";
  const auto kept = filter_window(rs, 1);
  CHECK(kept[0].date == 2016y / 2 / 1);
  CHECK(kept[1].id == "first");
  CHECK(kept[2].id == "second");
}

TEST_CASE("fixture feeds ingest with conserved counts") {
  for (const char* city : {"london", "boston", "pittsburgh"}) {
    const auto r = ingest_file(test_support::fixture(std::string(city) + "/accidents.csv"), city);
    CHECK(r.records.size() + r.rejects.size() == r.rows);
    CHECK(r.rejects.size() == 6);
    for (const auto& rec : r.records) CHECK(rec.source_city == city);
  }
}

TEST_CASE("JSON lines round trip") {
  const auto r = ingest_file(test_support::fixture("boston/accidents.csv"), "boston");
  std::stringstream s;
  write_jsonl(s, r.records);
  CHECK(read_jsonl(s) == r.records);
}
