#include "bikerisk/service.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "httplib.h"
#include "json.hpp"

#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"
#include "bikerisk/features.hpp"
#include "bikerisk/ingest.hpp"
#include "bikerisk/json_io.hpp"
#include "bikerisk/scenario.hpp"

namespace bikerisk::service {

using json_io::Json;

namespace {

std::optional<double> parse_number(std::string_view raw) {
  const std::string t = csv::trim(raw);
  std::string_view s = t;
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

Response json_response(const Json& j) { return {200, j.dump()}; }

Json train_window(const model::FittedModel& m) {
  Json w;
  w["from"] = m.train_from ? Json(ingest::format_iso_date(*m.train_from)) : Json(nullptr);
  w["to"] = m.train_to ? Json(ingest::format_iso_date(*m.train_to)) : Json(nullptr);
  return w;
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

Response error_response(int status, std::string_view reason) {
  Json j;
  j["status"] = status;
  j["reason"] = reason;
  return {status, j.dump()};
}

ServiceConfig ServiceConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("malformed config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  ServiceConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "host") c.host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else if (key == "models") {
        for (const auto& m : value) c.models.push_back(resolve(m.get<std::string>()));
      } else if (key == "graph") c.graph = resolve(value.get<std::string>());
      else if (key == "betweenness") c.betweenness = resolve(value.get<std::string>());
      else if (key == "snap_radius_m") c.snap_radius_m = value.get<double>();
      else if (key == "cors_origins") c.cors_origins = value.get<std::vector<std::string>>();
      else throw UsageError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return c;
}

Service::Service(std::vector<model::FittedModel> models, graph::StreetGraph graph,
                 graph::BetweennessResult betweenness, double snap_radius_m)
    : graph_(std::move(graph)),
      betweenness_(std::move(betweenness)),
      locator_(graph_),
      snap_radius_m_(snap_radius_m) {
  if (!(snap_radius_m_ > 0.0)) throw UsageError("snap radius must be positive");
  if (betweenness_.beta.size() != graph_.edges().size()) {
    throw DataError("betweenness covers " + std::to_string(betweenness_.beta.size()) +
                    " edges, graph has " + std::to_string(graph_.edges().size()));
  }
  for (auto& m : models) {
    if (m.city.empty()) throw DataError("model without a city key");
    std::string key = m.city;
    if (!models_.emplace(key, std::move(m)).second) throw DataError("duplicate model key '" + key + "'");
  }
}

std::unique_ptr<Service> Service::load(const ServiceConfig& config) {
  if (config.graph.empty()) throw UsageError("a graph file is required");
  if (config.betweenness.empty()) throw UsageError("a betweenness file is required");
  auto g = graph::read_graph_json(config.graph);
  auto b = graph::read_betweenness_csv(config.betweenness, g.edges().size());
  std::vector<model::FittedModel> models;
  for (const auto& p : config.models) models.push_back(model::read_model_json(p));
  return std::make_unique<Service>(std::move(models), std::move(g), std::move(b), config.snap_radius_m);
}

const model::FittedModel* Service::find_model(const std::optional<std::string>& key,
                                              Response& error) const {
  if (!key || key->empty()) {
    if (models_.size() == 1) return &models_.begin()->second;
    error = error_response(400, "model parameter required");
    return nullptr;
  }
  auto it = models_.find(*key);
  if (it == models_.end()) {
    error = error_response(404, "unknown model '" + *key + "'");
    return nullptr;
  }
  return &it->second;
}

Response Service::models() const {
  Json list = Json::array();
  for (const auto& [key, m] : models_) {
    Json j;
    j["city"] = key;
    j["columns"] = m.columns;
    Json coef = Json::array(), se = Json::array(), ci = Json::array();
    for (const auto& row : model::wald_table(m)) {
      coef.push_back(number_or_null(row.estimate));
      se.push_back(number_or_null(row.se));
      ci.push_back({number_or_null(row.ci_low), number_or_null(row.ci_high)});
    }
    j["coefficients"] = std::move(coef);
    j["standard_errors"] = std::move(se);
    j["ci95"] = std::move(ci);
    j["train_window"] = train_window(m);
    j["n_train"] = m.n_train;
    j["converged"] = m.converged;
    list.push_back(std::move(j));
  }
  Json out;
  out["models"] = std::move(list);
  out["graph"] = json_io::provenance_json(graph_.provenance(), graph_.edges().size());
  return json_response(out);
}

Response Service::score(const std::optional<std::string>& lat, const std::optional<std::string>& lon,
                        const std::optional<std::string>& model_key) const {
  Response err;
  const auto* m = find_model(model_key, err);
  if (!m) return err;
  if (!lat || !lon) return error_response(400, "lat and lon are required");
  auto la = parse_number(*lat), lo = parse_number(*lon);
  if (!la || !lo || std::abs(*la) > 90.0 || std::abs(*lo) > 180.0) {
    return error_response(400, "lat/lon must be numbers within range");
  }
  graph::Snap snap;
  try {
    snap = locator_.nearest({*la, *lo}, snap_radius_m_);
  } catch (const graph::UnsnappableError& e) {
    return error_response(422, e.what());
  }
  const auto f = graph::segment_features(graph_, betweenness_, snap.edge, snap.point);
  double risk = 0.0;
  try {
    risk = model::predict_risk(*m, f);
  } catch (const std::exception& e) {
    return error_response(422, e.what());
  }
  Json j;
  j["model"] = m->city;
  j["graph"] = json_io::provenance_json(graph_.provenance(), graph_.edges().size());
  j["risk"] = risk;
  j["safety"] = 1.0 - risk;
  j["features"] = json_io::features_json(f);
  j["edge_id"] = snap.edge;
  j["snap_distance_m"] = snap.distance_m;
  j["snapped"] = {snap.point.lon, snap.point.lat};
  return json_response(j);
}

Response Service::scenario(std::string_view body) const {
  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (!req.is_object()) return error_response(400, "request body must be a JSON object");

  Response err;
  std::optional<std::string> key;
  if (req.contains("model")) {
    if (!req["model"].is_string()) return error_response(400, "model must be a string");
    key = req["model"].get<std::string>();
  }
  const auto* m = find_model(key, err);
  if (!m) return err;

  scenario::CompareOptions opts;
  opts.sampling.snap_radius_m = snap_radius_m_;
  std::vector<geo::LatLon> region;
  std::vector<scenario::Edit> edits;
  try {
    if (!req.contains("region")) throw UsageError("region is required");
    region = json_io::polygon_from_json(req["region"]);
    if (req.contains("edits")) edits = json_io::edits_from_json(req["edits"]);
    if (req.contains("densify_m")) {
      const auto& d = req["densify_m"];
      if (!d.is_number() || d.get<double>() < 0.0) throw UsageError("densify_m must be a non-negative number");
      opts.sampling.densify_m = d.get<double>();
    }
    if (req.contains("points")) opts.sampling.supplied = json_io::polygon_from_json(req["points"]);
  } catch (const UsageError& e) {
    return error_response(400, e.what());
  }

  try {
    auto result = scenario::compare_scenarios(*m, graph_, betweenness_, region, edits, opts);
    Json j;
    j["model"] = m->city;
    j["graph"] = json_io::provenance_json(graph_.provenance(), graph_.edges().size());
    const Json body_json = json_io::scenario_result_json(result);
    for (const auto& [k, v] : body_json.items()) j[k] = v;
    return json_response(j);
  } catch (const UsageError& e) {
    return error_response(400, e.what());
  } catch (const std::exception& e) {
    return error_response(422, e.what());
  }
}

Response Service::segments(const std::optional<std::string>& bbox,
                           const std::optional<std::string>& model_key) const {
  Response err;
  const auto* m = find_model(model_key, err);
  if (!m) return err;
  if (!bbox) return error_response(422, "bbox is required as minlon,minlat,maxlon,maxlat");
  std::vector<double> v;
  std::string_view rest = *bbox;
  while (true) {
    auto pos = rest.find(',');
    auto n = parse_number(rest.substr(0, pos));
    if (!n) return error_response(422, "malformed bbox '" + *bbox + "'");
    v.push_back(*n);
    if (pos == std::string_view::npos) break;
    rest.remove_prefix(pos + 1);
  }
  if (v.size() != 4 || v[0] > v[2] || v[1] > v[3] || std::abs(v[1]) > 90.0 || std::abs(v[3]) > 90.0 ||
      std::abs(v[0]) > 180.0 || std::abs(v[2]) > 180.0) {
    return error_response(422, "malformed bbox '" + *bbox + "'");
  }
  geo::BBox box{v[1], v[0], v[3], v[2]};

  Json features = Json::array();
  for (auto id : locator_.edges_in_bbox(box)) {
    const auto& e = graph_.edge(id);
    const auto mid = geo::interpolate(e.geometry, e.length_m / 2.0);
    const auto f = graph::segment_features(graph_, betweenness_, id, mid);
    double risk = 0.0;
    try {
      risk = model::predict_risk(*m, f);
    } catch (const std::exception& ex) {
      return error_response(422, ex.what());
    }
    Json coords = Json::array();
    for (const auto& p : e.geometry) coords.push_back({p.lon, p.lat});
    Json props;
    props["edge_id"] = id;
    props["highway"] = e.attrs.highway;
    props["safety_midpoint"] = 1.0 - risk;
    props["risk_midpoint"] = risk;
    props["midpoint"] = {mid.lon, mid.lat};
    props["features"] = json_io::features_json(f);
    Json feat;
    feat["type"] = "Feature";
    feat["geometry"] = {{"type", "LineString"}, {"coordinates", std::move(coords)}};
    feat["properties"] = std::move(props);
    features.push_back(std::move(feat));
  }
  Json j;
  j["type"] = "FeatureCollection";
  j["model"] = m->city;
  j["graph"] = json_io::provenance_json(graph_.provenance(), graph_.edges().size());
  j["features"] = std::move(features);
  return json_response(j);
}

struct HttpServer::Impl {
  const Service& service;
  std::set<std::string> origins;
  httplib::Server server;
  Impl(const Service& s, std::vector<std::string> o) : service(s), origins(o.begin(), o.end()) {}
};

namespace {

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

void reply(httplib::Response& res, const Response& r) {
  res.status = r.status;
  res.set_content(r.body, "application/json");
}

}  // namespace

HttpServer::HttpServer(const Service& service, std::vector<std::string> cors_origins)
    : impl_(std::make_unique<Impl>(service, std::move(cors_origins))) {
  auto& svr = impl_->server;
  auto* impl = impl_.get();
  svr.set_post_routing_handler([impl](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_header("Origin")) return;
    const auto origin = req.get_header_value("Origin");
    if (impl->origins.count("*")) {
      res.set_header("Access-Control-Allow-Origin", "*");
    } else if (impl->origins.count(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
    }
  });
  svr.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Max-Age", "600");
  });
  svr.Get("/v1/models", [impl](const httplib::Request&, httplib::Response& res) {
    reply(res, impl->service.models());
  });
  svr.Get("/v1/score", [impl](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl->service.score(param(req, "lat"), param(req, "lon"), param(req, "model")));
  });
  svr.Post("/v1/scenario", [impl](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl->service.scenario(req.body));
  });
  svr.Get("/v1/segments", [impl](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl->service.segments(param(req, "bbox"), param(req, "model")));
  });
  svr.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    reply(res, error_response(res.status, res.status == 404 ? "not found" : "request failed"));
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string reason = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reason = e.what();
    } catch (...) {
    }
    reply(res, error_response(500, reason));
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace bikerisk::service
