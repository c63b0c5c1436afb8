// bikerisk command line: one binary, one subcommand per pipeline stage.
// Exit codes: 0 ok, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "bikerisk/betweenness.hpp"
#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"
#include "bikerisk/evaluation.hpp"
#include "bikerisk/ingest.hpp"
#include "bikerisk/json_io.hpp"
#include "bikerisk/locator.hpp"
#include "bikerisk/pipeline.hpp"
#include "bikerisk/provenance.hpp"
#include "bikerisk/risk_model.hpp"
#include "bikerisk/scenario.hpp"
#include "bikerisk/service.hpp"
#include "bikerisk/street_graph.hpp"

namespace fs = std::filesystem;
using namespace bikerisk;
using Json = nlohmann::ordered_json;

namespace {

// Collects what went into an output so it can be written beside it.
struct Provenance {
  explicit Provenance(std::string name) : subcommand(std::move(name)) {}

  std::string subcommand;
  Json inputs = Json::array();
  std::optional<std::uint64_t> seed;
  Json parameters = Json::object();

  void input(const fs::path& p) {
    if (p.empty()) return;
    Json j;
    j["file"] = p.filename().string();
    j["sha256"] = sha256_file(p);
    inputs.push_back(std::move(j));
  }
};

// "-" or empty writes to stdout without a sidecar.
void emit(const std::string& path, const std::string& content, const Provenance& prov,
          const Json& extra = Json::object()) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << content;
  }
  Json doc;
  doc["tool"] = "bikerisk";
  doc["version"] = std::string(version());
  doc["subcommand"] = prov.subcommand;
  doc["output_sha256"] = sha256_hex(content);
  doc["inputs"] = prov.inputs;
  doc["seed"] = prov.seed ? Json(*prov.seed) : Json(nullptr);
  doc["parameters"] = prov.parameters;
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  std::ofstream side(path + ".provenance.json", std::ios::binary);
  if (!side) throw DataError("cannot write " + path + ".provenance.json");
  side << doc.dump(2) << '\n';
}

std::optional<ingest::Date> date_option(const std::string& text, const char* flag) {
  if (text.empty()) return std::nullopt;
  auto d = ingest::parse_iso_date(text);
  if (!d) throw UsageError(std::string(flag) + " expects YYYY-MM-DD, got '" + text + "'");
  return d;
}

std::vector<model::LabeledRow> load_design(const std::string& path, const std::string& from,
                                           const std::string& to, const char* from_flag,
                                           const char* to_flag) {
  auto rows = model::read_design_csv(fs::path(path));
  auto f = date_option(from, from_flag);
  auto t = date_option(to, to_flag);
  if (f || t) rows = pipeline::filter_dates(rows, f, t);
  if (rows.empty()) throw DataError("no design rows in " + path + " for the requested window");
  return rows;
}

nlohmann::json read_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed JSON in " + path + ": " + e.what());
  }
}

struct PointRow {
  std::string id;
  geo::LatLon pos;
};

// CSV with lat and lon columns and an optional id column.
std::vector<PointRow> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::size_t line_no = 0;
  auto header = csv::next_line(in, line_no);
  if (!header) throw DataError(path + ": empty file");
  auto cols = csv::split_record(*header);
  int lat = -1, lon = -1, id = -1;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    const auto c = csv::to_lower(csv::trim(cols[i]));
    if (c == "lat" || c == "latitude") lat = static_cast<int>(i);
    if (c == "lon" || c == "lng" || c == "longitude") lon = static_cast<int>(i);
    if (c == "id") id = static_cast<int>(i);
  }
  if (lat < 0 || lon < 0) throw DataError(path + ": missing required column lat/lon");
  std::vector<PointRow> pts;
  while (auto line = csv::next_line(in, line_no)) {
    auto f = csv::split_record(*line);
    if (f.size() != cols.size()) throw DataError(path + ":" + std::to_string(line_no) + ": field count");
    PointRow p;
    p.id = id >= 0 ? f[id] : std::to_string(pts.size());
    try {
      std::size_t used = 0;
      p.pos.lat = std::stod(f[lat], &used);
      p.pos.lon = std::stod(f[lon], &used);
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": unparsable coordinates");
    }
    pts.push_back(std::move(p));
  }
  return pts;
}

struct GraphInputs {
  graph::StreetGraph graph;
  graph::BetweennessResult betweenness;
};

GraphInputs load_graph(const std::string& graph_path, const std::string& betweenness_path,
                       Provenance& prov) {
  GraphInputs g{graph::read_graph_json(fs::path(graph_path)), {}};
  g.betweenness = graph::read_betweenness_csv(fs::path(betweenness_path), g.graph.edges().size());
  prov.input(graph_path);
  prov.input(betweenness_path);
  return g;
}

// ---- subcommands ---------------------------------------------------------

struct IngestArgs {
  std::string input, schema, schemas, out, rejects;
  int years = 0;
};

int run_ingest(const IngestArgs& a) {
  Provenance prov{"ingest"};
  auto registry = a.schemas.empty() ? ingest::SchemaRegistry::builtin()
                                    : ingest::SchemaRegistry::from_file(a.schemas);
  if (!registry.contains(a.schema)) throw UsageError("unknown schema id '" + a.schema + "'");
  auto result = ingest::ingest_file(a.input, a.schema, registry);
  prov.input(a.input);
  prov.input(a.schemas);
  prov.parameters["schema"] = a.schema;
  prov.parameters["years"] = a.years > 0 ? Json(a.years) : Json(nullptr);
  auto records = std::move(result.records);
  if (a.years > 0) records = ingest::filter_window(std::move(records), a.years);

  std::ostringstream out;
  ingest::write_jsonl(out, records);
  Json extra;
  extra["rows"] = result.rows;
  extra["records"] = records.size();
  extra["rejected"] = result.rejects.size();
  emit(a.out, out.str(), prov, extra);

  if (!a.rejects.empty()) {
    std::ostringstream rj;
    csv::Writer w(rj);
    w.row({"line", "reason", "content"});
    for (const auto& r : result.rejects) w.row({std::to_string(r.line), r.reason, r.content});
    emit(a.rejects, rj.str(), prov);
  }
  std::cerr << "ingest: " << result.rows << " rows, " << records.size() << " records kept, "
            << result.rejects.size() << " rejected\n";
  for (std::size_t i = 0; i < result.rejects.size() && i < 5; ++i) {
    std::cerr << "  line " << result.rejects[i].line << ": " << result.rejects[i].reason << '\n';
  }
  return 0;
}

struct GraphBuildArgs {
  std::string osm, elevation, out;
};

int run_graph_build(const GraphBuildArgs& a) {
  Provenance prov{"graph-build"};
  auto g = graph::build_graph(a.osm);
  prov.input(a.osm);
  if (!a.elevation.empty()) {
    graph::load_elevation(g, fs::path(a.elevation));
    prov.input(a.elevation);
  }
  graph::impute_missing_attributes(g);
  std::ostringstream out;
  graph::write_graph_json(out, g);
  Json extra;
  extra["nodes"] = g.nodes().size();
  extra["edges"] = g.edges().size();
  emit(a.out, out.str(), prov, extra);
  std::cerr << "graph-build: " << g.nodes().size() << " nodes, " << g.edges().size() << " edges\n";
  return 0;
}

struct BetweennessArgs {
  std::string graph, out;
  int samples = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int run_betweenness(const BetweennessArgs& a) {
  Provenance prov{"betweenness"};
  auto g = graph::read_graph_json(fs::path(a.graph));
  prov.input(a.graph);
  graph::BetweennessOptions opts;
  opts.threads = a.threads;
  if (a.samples != 0) {
    opts.mode = graph::BetweennessOptions::Mode::Sampled;
    opts.samples = a.samples;
    opts.seed = a.seed;
    prov.seed = a.seed;
  }
  auto r = graph::edge_betweenness(g, opts);
  prov.parameters["mode"] = a.samples != 0 ? "sampled" : "exact";
  prov.parameters["samples"] = r.samples;
  std::ostringstream out;
  graph::write_betweenness_csv(out, r);
  emit(a.out, out.str(), prov);
  return 0;
}

struct FeaturesArgs {
  std::string graph, betweenness, records, out, skipped;
  double snap_radius_m = graph::kDefaultSnapRadiusM;
  double hilly_grade = 0.04;
  double curved_sinuosity = 1.05;
};

int run_features(const FeaturesArgs& a) {
  Provenance prov{"features"};
  auto g = load_graph(a.graph, a.betweenness, prov);
  std::ifstream in(a.records);
  if (!in) throw DataError("cannot open " + a.records);
  const auto records = ingest::read_jsonl(in);
  prov.input(a.records);
  graph::FeatureConfig cfg{a.curved_sinuosity, a.hilly_grade};
  prov.parameters["snap_radius_m"] = a.snap_radius_m;
  prov.parameters["hilly_grade"] = a.hilly_grade;
  prov.parameters["curved_sinuosity"] = a.curved_sinuosity;
  auto result = pipeline::featurize_records(g.graph, g.betweenness, records, a.snap_radius_m, cfg);
  std::ostringstream out;
  model::write_design_csv(out, result.rows);
  Json extra;
  extra["rows"] = result.rows.size();
  extra["skipped"] = result.skipped.size();
  emit(a.out, out.str(), prov, extra);
  if (!a.skipped.empty()) {
    std::ostringstream sk;
    csv::Writer w(sk);
    w.row({"record_id", "reason"});
    for (const auto& s : result.skipped) w.row({s.id, s.reason});
    emit(a.skipped, sk.str(), prov);
  }
  std::cerr << "features: " << result.rows.size() << " rows, " << result.skipped.size()
            << " records not snapped\n";
  return 0;
}

struct FitArgs {
  std::string design, city, from, to, out;
  double ridge = 0.0;
  double tolerance = 1e-8;
  int max_iterations = 100;
};

int run_fit(const FitArgs& a) {
  Provenance prov{"fit"};
  auto rows = load_design(a.design, a.from, a.to, "--from", "--to");
  prov.input(a.design);
  model::FitOptions opts{a.tolerance, a.max_iterations, a.ridge};
  model::FitDiagnostics diag;
  auto m = pipeline::fit_rows(rows, a.city, opts, &diag);
  prov.parameters["from"] = a.from.empty() ? Json(nullptr) : Json(a.from);
  prov.parameters["to"] = a.to.empty() ? Json(nullptr) : Json(a.to);
  prov.parameters["tolerance"] = a.tolerance;
  prov.parameters["max_iterations"] = a.max_iterations;
  std::ostringstream out;
  model::write_model_json(out, m);
  Json extra;
  extra["status"] = diag.status;
  extra["iterations"] = diag.iterations;
  extra["step_halvings"] = diag.step_halvings;
  extra["ridge_lambda"] = diag.ridge_lambda;
  extra["inactive_columns"] = diag.inactive_columns;
  extra["zero_variance_columns"] = m.scaling.zero_variance;
  emit(a.out, out.str(), prov, extra);
  if (!m.converged) std::cerr << "fit: warning: " << diag.status << " after " << diag.iterations << " iterations\n";
  for (const auto& c : diag.inactive_columns) std::cerr << "fit: column " << c << " is constant zero, held at 0\n";
  return 0;
}

struct EvalArgs {
  std::string model, design, train, from, to, train_from, train_to, test_city;
  std::string report, csv_out, reliability, svg;
};

int run_eval(const EvalArgs& a) {
  Provenance prov{"eval"};
  const auto m = model::read_model_json(fs::path(a.model));
  const auto test = load_design(a.design, a.from, a.to, "--from", "--to");
  const auto train = load_design(a.train, a.train_from, a.train_to, "--train-from", "--train-to");
  prov.input(a.model);
  prov.input(a.design);
  prov.input(a.train);
  for (const auto& [k, v] : std::map<std::string, std::string>{
           {"from", a.from}, {"to", a.to}, {"train_from", a.train_from}, {"train_to", a.train_to}}) {
    prov.parameters[k] = v.empty() ? Json(nullptr) : Json(v);
  }
  const auto report = eval::evaluate_features(m, pipeline::features_of(test), pipeline::labels_of(test),
                                              pipeline::labels_of(train),
                                              a.test_city.empty() ? m.city : a.test_city);
  bool wrote = false;
  if (!a.report.empty()) {
    std::ostringstream s;
    eval::write_report_json(s, report);
    emit(a.report, s.str(), prov);
    wrote = true;
  }
  if (!a.csv_out.empty()) {
    std::ostringstream s;
    eval::write_report_csv(s, std::span(&report, 1));
    emit(a.csv_out, s.str(), prov);
    wrote = true;
  }
  if (!a.reliability.empty()) {
    std::ostringstream s;
    eval::write_reliability_csv(s, report.reliability);
    emit(a.reliability, s.str(), prov);
    wrote = true;
  }
  if (!a.svg.empty()) {
    std::ostringstream s;
    eval::write_reliability_svg(s, report.reliability, report.train_city + " on " + report.test_city);
    emit(a.svg, s.str(), prov);
    wrote = true;
  }
  if (!wrote) {
    std::ostringstream s;
    eval::write_report_json(s, report);
    emit("-", s.str(), prov);
  }
  std::cerr << "eval: n=" << report.n_test << " accuracy=" << report.accuracy << " bs=" << report.brier
            << " bs_ref=" << report.brier_ref << '\n';
  return 0;
}

struct CrossEvalArgs {
  std::vector<std::string> models, train, test;
  std::string out;
};

int run_cross_eval(const CrossEvalArgs& a) {
  if (a.models.size() < 2) throw UsageError("cross-eval needs at least two models");
  if (a.train.size() != a.models.size() || a.test.size() != a.models.size()) {
    throw UsageError("--model, --train and --test must be given the same number of times");
  }
  Provenance prov{"cross-eval"};
  std::vector<eval::CityData> cities;
  for (std::size_t i = 0; i < a.models.size(); ++i) {
    eval::CityData c;
    c.model = model::read_model_json(fs::path(a.models[i]));
    c.city = c.model.city;
    const auto train = load_design(a.train[i], "", "", "", "");
    const auto test = load_design(a.test[i], "", "", "", "");
    c.train_labels = pipeline::labels_of(train);
    c.test_features = pipeline::features_of(test);
    c.test_labels = pipeline::labels_of(test);
    prov.input(a.models[i]);
    prov.input(a.train[i]);
    prov.input(a.test[i]);
    cities.push_back(std::move(c));
  }
  const auto reports = eval::cross_evaluate(cities);
  std::ostringstream s;
  eval::write_report_csv(s, reports);
  emit(a.out, s.str(), prov);
  return 0;
}

struct CompareArgs {
  std::vector<std::string> models;
  std::string out;
};

int run_compare(const CompareArgs& a) {
  if (a.models.size() < 2) throw UsageError("compare needs at least two models");
  Provenance prov{"compare"};
  std::vector<model::FittedModel> models;
  for (const auto& p : a.models) {
    models.push_back(model::read_model_json(fs::path(p)));
    prov.input(p);
  }
  std::ostringstream s;
  csv::Writer w(s);
  w.row({"model_a", "model_b", "column", "difference", "z", "p", "ci_overlap", "verdict"});
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      const auto rows = model::compare_models(models[i], models[j]);
      const auto overlap = model::ci_overlap(models[i], models[j]);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        auto num = [](double v) { return std::isfinite(v) ? csv::format_double(v) : std::string(); };
        w.row({models[i].city, models[j].city, r.column, num(r.difference), num(r.z), num(r.p),
               overlap[k].overlapping ? "true" : "false", std::string(r.verdict())});
      }
    }
  }
  emit(a.out, s.str(), prov);
  return 0;
}

struct ScoreArgs {
  std::string graph, betweenness, points, out;
  std::vector<std::string> models;
  double snap_radius_m = graph::kDefaultSnapRadiusM;
};

int run_score(const ScoreArgs& a) {
  Provenance prov{"score"};
  auto g = load_graph(a.graph, a.betweenness, prov);
  std::vector<model::FittedModel> models;
  for (const auto& p : a.models) {
    models.push_back(model::read_model_json(fs::path(p)));
    prov.input(p);
  }
  const auto points = read_points(a.points);
  prov.input(a.points);
  prov.parameters["snap_radius_m"] = a.snap_radius_m;
  graph::EdgeLocator locator(g.graph);

  std::ostringstream s;
  csv::Writer w(s);
  std::vector<std::string> header{"id", "lat", "lon", "edge_id", "snap_distance_m"};
  for (const auto& m : models) {
    header.push_back("risk_" + m.city);
    header.push_back("safety_" + m.city);
  }
  header.push_back("status");
  w.row(header);
  std::size_t missed = 0;
  for (const auto& p : points) {
    std::vector<std::string> row{p.id, csv::format_double(p.pos.lat), csv::format_double(p.pos.lon)};
    try {
      const auto snap = locator.nearest(p.pos, a.snap_radius_m);
      const auto f = graph::segment_features(g.graph, g.betweenness, snap.edge, snap.point);
      row.push_back(std::to_string(snap.edge));
      row.push_back(csv::format_double(snap.distance_m));
      for (const auto& m : models) {
        const double risk = model::predict_risk(m, f);
        row.push_back(csv::format_double(risk));
        row.push_back(csv::format_double(1.0 - risk));
      }
      row.push_back("ok");
    } catch (const graph::UnsnappableError& e) {
      row.resize(3 + 2 + 2 * models.size());
      row.push_back(e.what());
      ++missed;
    }
    w.row(row);
  }
  emit(a.out, s.str(), prov);
  if (missed) std::cerr << "score: " << missed << " points not snapped\n";
  return 0;
}

struct ScenarioArgs {
  std::string graph, betweenness, model, region, edits, points, out, geojson;
  double densify_m = 0.0;
  double snap_radius_m = graph::kDefaultSnapRadiusM;
  bool recompute_betweenness = false;
};

int run_scenario(const ScenarioArgs& a) {
  Provenance prov{"scenario"};
  auto g = load_graph(a.graph, a.betweenness, prov);
  const auto m = model::read_model_json(fs::path(a.model));
  prov.input(a.model);
  const auto region = json_io::region_from_json(read_json_file(a.region));
  prov.input(a.region);
  std::vector<scenario::Edit> edits;
  if (!a.edits.empty()) {
    auto doc = read_json_file(a.edits);
    if (doc.is_object() && doc.contains("edits")) doc = doc["edits"];
    edits = json_io::edits_from_json(doc);
    prov.input(a.edits);
  }
  scenario::CompareOptions opts;
  opts.sampling.densify_m = a.densify_m;
  opts.sampling.snap_radius_m = a.snap_radius_m;
  opts.recompute_betweenness = a.recompute_betweenness;
  if (!a.points.empty()) {
    std::vector<geo::LatLon> pts;
    for (const auto& p : read_points(a.points)) pts.push_back(p.pos);
    opts.sampling.supplied = std::move(pts);
    prov.input(a.points);
  }
  prov.parameters["densify_m"] = a.densify_m;
  prov.parameters["snap_radius_m"] = a.snap_radius_m;
  prov.parameters["recompute_betweenness"] = a.recompute_betweenness;

  const auto result = scenario::compare_scenarios(m, g.graph, g.betweenness, region, edits, opts);
  Json doc;
  doc["model"] = m.city;
  const Json body = json_io::scenario_result_json(result);
  for (const auto& [k, v] : body.items()) doc[k] = v;
  emit(a.out, doc.dump(2) + "\n", prov);
  if (!a.geojson.empty()) emit(a.geojson, json_io::scenario_geojson(result).dump(2) + "\n", prov);
  for (const auto& r : result.reports) {
    if (!r.warning.empty()) std::cerr << "scenario: warning: " << r.warning << '\n';
  }
  std::cerr << "scenario: mean safety " << result.mean_baseline << " -> " << result.mean_scenario << " ("
            << (result.relative_change >= 0 ? "+" : "") << scenario::format_percent(result.relative_change)
            << ")\n";
  return 0;
}

struct ServeArgs {
  std::string config, host, graph, betweenness;
  std::vector<std::string> models, cors;
  int port = -1;
  double snap_radius_m = -1.0;
};

int run_serve(const ServeArgs& a) {
  service::ServiceConfig cfg;
  if (!a.config.empty()) cfg = service::ServiceConfig::from_file(a.config);
  if (!a.host.empty()) cfg.host = a.host;
  if (a.port >= 0) cfg.port = a.port;
  if (!a.models.empty()) cfg.models.assign(a.models.begin(), a.models.end());
  if (!a.graph.empty()) cfg.graph = a.graph;
  if (!a.betweenness.empty()) cfg.betweenness = a.betweenness;
  if (a.snap_radius_m > 0.0) cfg.snap_radius_m = a.snap_radius_m;
  if (!a.cors.empty()) cfg.cors_origins = a.cors;

  auto svc = service::Service::load(cfg);
  service::HttpServer server(*svc, cfg.cors_origins);
  const int port = server.bind(cfg.host, cfg.port);
  if (port < 0) throw UsageError("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  std::cerr << "serve: listening on http://" << cfg.host << ":" << port << '\n';
  return server.listen_after_bind() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bicycle accident severity risk toolkit"};
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Parse an accident CSV into unified JSON-lines records");
  ingest_cmd->add_option("--input", ingest_args.input, "Accident CSV")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--schema", ingest_args.schema, "Schema id (london, boston, pittsburgh, generic)")->required();
  ingest_cmd->add_option("--schemas", ingest_args.schemas, "Extra schema descriptors (JSON)")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--years", ingest_args.years, "Keep the last N calendar years")->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--out", ingest_args.out, "Output JSON-lines (default stdout)");
  ingest_cmd->add_option("--rejects", ingest_args.rejects, "Write rejected rows as CSV");

  GraphBuildArgs gb_args;
  auto* gb_cmd = app.add_subcommand("graph-build", "Build the street graph from an OSM XML extract");
  gb_cmd->add_option("--osm", gb_args.osm, "OSM XML file")->required()->check(CLI::ExistingFile);
  gb_cmd->add_option("--elevation", gb_args.elevation, "CSV node_id,elevation_m")->check(CLI::ExistingFile);
  gb_cmd->add_option("--out", gb_args.out, "Graph JSON (default stdout)");

  BetweennessArgs bw_args;
  auto* bw_cmd = app.add_subcommand("betweenness", "Edge betweenness per segment");
  bw_cmd->add_option("--graph", bw_args.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  bw_cmd->add_option("--samples", bw_args.samples, "Sampled sources K (0: exact)");
  bw_cmd->add_option("--seed", bw_args.seed, "Seed for source sampling");
  bw_cmd->add_option("--threads", bw_args.threads, "Worker threads (0: all cores)");
  bw_cmd->add_option("--out", bw_args.out, "CSV edge_id,beta (default stdout)");

  FeaturesArgs ft_args;
  auto* ft_cmd = app.add_subcommand("features", "Snap records to segments and write a design CSV");
  ft_cmd->add_option("--graph", ft_args.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  ft_cmd->add_option("--betweenness", ft_args.betweenness, "Betweenness CSV")->required()->check(CLI::ExistingFile);
  ft_cmd->add_option("--records", ft_args.records, "JSON-lines records")->required()->check(CLI::ExistingFile);
  ft_cmd->add_option("--snap-radius-m", ft_args.snap_radius_m, "Snap radius in meters")->check(CLI::PositiveNumber);
  ft_cmd->add_option("--hilly-grade", ft_args.hilly_grade, "Grade above which a segment is hilly");
  ft_cmd->add_option("--curved-sinuosity", ft_args.curved_sinuosity, "Sinuosity above which a segment is curved");
  ft_cmd->add_option("--out", ft_args.out, "Design CSV (default stdout)");
  ft_cmd->add_option("--skipped", ft_args.skipped, "Write unsnapped records as CSV");

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the logistic risk model");
  fit_cmd->add_option("--design", fit_args.design, "Design CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--city", fit_args.city, "Model key")->required();
  fit_cmd->add_option("--from", fit_args.from, "First training date (YYYY-MM-DD)");
  fit_cmd->add_option("--to", fit_args.to, "Last training date (YYYY-MM-DD)");
  fit_cmd->add_option("--ridge", fit_args.ridge, "Ridge penalty, separation fallback only")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--tolerance", fit_args.tolerance, "Convergence tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-iterations", fit_args.max_iterations, "Iteration cap")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--out", fit_args.out, "Model JSON (default stdout)");

  EvalArgs ev_args;
  auto* ev_cmd = app.add_subcommand("eval", "Brier score, skill score and reliability of a model");
  ev_cmd->add_option("--model", ev_args.model, "Model JSON")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--design", ev_args.design, "Test design CSV")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--train", ev_args.train, "Training design CSV, for the climatology base rate")
      ->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--from", ev_args.from, "First test date");
  ev_cmd->add_option("--to", ev_args.to, "Last test date");
  ev_cmd->add_option("--train-from", ev_args.train_from, "First training date");
  ev_cmd->add_option("--train-to", ev_args.train_to, "Last training date");
  ev_cmd->add_option("--test-city", ev_args.test_city, "Label for the test set (default: model city)");
  ev_cmd->add_option("--report", ev_args.report, "Report JSON");
  ev_cmd->add_option("--csv", ev_args.csv_out, "Report CSV row");
  ev_cmd->add_option("--reliability", ev_args.reliability, "Reliability CSV");
  ev_cmd->add_option("--svg", ev_args.svg, "Reliability diagram SVG");

  CrossEvalArgs ce_args;
  auto* ce_cmd = app.add_subcommand("cross-eval", "Evaluate every model on every other city's test set");
  ce_cmd->add_option("--model", ce_args.models, "Model JSON, one per city")->required()->check(CLI::ExistingFile);
  ce_cmd->add_option("--train", ce_args.train, "Training design CSV per model, same order")->required()->check(CLI::ExistingFile);
  ce_cmd->add_option("--test", ce_args.test, "Test design CSV per model, same order")->required()->check(CLI::ExistingFile);
  ce_cmd->add_option("--out", ce_args.out, "Transfer CSV (default stdout)");

  CompareArgs cmp_args;
  auto* cmp_cmd = app.add_subcommand("compare", "Coefficient z-tests between model pairs");
  cmp_cmd->add_option("--model", cmp_args.models, "Model JSON (two or more)")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--out", cmp_args.out, "z-score CSV (default stdout)");

  ScoreArgs sc_args;
  auto* sc_cmd = app.add_subcommand("score", "Risk and safety at given points");
  sc_cmd->add_option("--graph", sc_args.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--betweenness", sc_args.betweenness, "Betweenness CSV")->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--model", sc_args.models, "Model JSON (repeatable)")->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--points", sc_args.points, "CSV with lat, lon and optional id")->required()->check(CLI::ExistingFile);
  sc_cmd->add_option("--snap-radius-m", sc_args.snap_radius_m, "Snap radius in meters")->check(CLI::PositiveNumber);
  sc_cmd->add_option("--out", sc_args.out, "Per-point CSV (default stdout)");

  ScenarioArgs sn_args;
  auto* sn_cmd = app.add_subcommand("scenario", "Mean safety over a region before and after edits");
  sn_cmd->add_option("--graph", sn_args.graph, "Graph JSON")->required()->check(CLI::ExistingFile);
  sn_cmd->add_option("--betweenness", sn_args.betweenness, "Betweenness CSV")->required()->check(CLI::ExistingFile);
  sn_cmd->add_option("--model", sn_args.model, "Model JSON")->required()->check(CLI::ExistingFile);
  sn_cmd->add_option("--region", sn_args.region, "Region polygon (JSON ring or GeoJSON Polygon)")
      ->required()->check(CLI::ExistingFile);
  sn_cmd->add_option("--edits", sn_args.edits, "Edits JSON")->check(CLI::ExistingFile);
  sn_cmd->add_option("--points", sn_args.points, "Sample points CSV instead of segment midpoints")
      ->check(CLI::ExistingFile);
  sn_cmd->add_option("--densify-m", sn_args.densify_m, "Sample every N meters along segments")
      ->check(CLI::NonNegativeNumber);
  sn_cmd->add_option("--snap-radius-m", sn_args.snap_radius_m, "Snap radius for supplied points")
      ->check(CLI::PositiveNumber);
  sn_cmd->add_flag("--recompute-betweenness", sn_args.recompute_betweenness,
                   "Recompute betweenness on the edited graph");
  sn_cmd->add_option("--out", sn_args.out, "Result JSON (default stdout)");
  sn_cmd->add_option("--geojson", sn_args.geojson, "Per-point deltas as GeoJSON");

  ServeArgs sv_args;
  auto* sv_cmd = app.add_subcommand("serve", "Run the HTTP API");
  sv_cmd->add_option("--config", sv_args.config, "Service config JSON")->check(CLI::ExistingFile);
  sv_cmd->add_option("--host", sv_args.host, "Bind address");
  sv_cmd->add_option("--port", sv_args.port, "Port (0: any free port)")->check(CLI::Range(0, 65535));
  sv_cmd->add_option("--model", sv_args.models, "Model JSON (repeatable)")->check(CLI::ExistingFile);
  sv_cmd->add_option("--graph", sv_args.graph, "Graph JSON")->check(CLI::ExistingFile);
  sv_cmd->add_option("--betweenness", sv_args.betweenness, "Betweenness CSV")->check(CLI::ExistingFile);
  sv_cmd->add_option("--snap-radius-m", sv_args.snap_radius_m, "Snap radius in meters")->check(CLI::PositiveNumber);
  sv_cmd->add_option("--cors-origin", sv_args.cors, "Allowed browser origin (repeatable, * for any)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest_cmd) return run_ingest(ingest_args);
    if (*gb_cmd) return run_graph_build(gb_args);
    if (*bw_cmd) return run_betweenness(bw_args);
    if (*ft_cmd) return run_features(ft_args);
    if (*fit_cmd) return run_fit(fit_args);
    if (*ev_cmd) return run_eval(ev_args);
    if (*ce_cmd) return run_cross_eval(ce_args);
    if (*cmp_cmd) return run_compare(cmp_args);
    if (*sc_cmd) return run_score(sc_args);
    if (*sn_cmd) return run_scenario(sn_args);
    if (*sv_cmd) return run_serve(sv_args);
  } catch (const UsageError& e) {
    std::cerr << "bikerisk: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "bikerisk: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
