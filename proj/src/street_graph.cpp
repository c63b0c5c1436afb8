#include "bikerisk/street_graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <expat.h>
#include "json.hpp"

#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"
#include "bikerisk/provenance.hpp"

namespace bikerisk::graph {

using nlohmann::json;

// ---------------------------------------------------------------------------
// StreetGraph

StreetGraph::StreetGraph(std::vector<Node> nodes, std::vector<Edge> edges, Provenance provenance)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), provenance_(std::move(provenance)) {
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second) {
      throw DataError("duplicate node id " + std::to_string(nodes_[i].id));
    }
  }
  incident_.assign(nodes_.size(), {});
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Edge& e = edges_[i];
    if (e.id != i) throw DataError("edge ids must be dense and ordered");
    auto iu = index_.find(e.u);
    auto iv = index_.find(e.v);
    if (iu == index_.end() || iv == index_.end()) {
      throw DataError("edge " + std::to_string(e.id) + " references a missing node");
    }
    incident_[iu->second].push_back(e.id);
    incident_[iv->second].push_back(e.id);  // self loops count twice
  }
}

const Edge& StreetGraph::edge(EdgeId id) const {
  if (id >= edges_.size()) throw DataError("no edge " + std::to_string(id));
  return edges_[id];
}

std::size_t StreetGraph::node_index(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw DataError("no node " + std::to_string(id));
  return it->second;
}

const Node& StreetGraph::node(NodeId id) const { return nodes_[node_index(id)]; }

std::size_t StreetGraph::degree(NodeId id) const { return incident_[node_index(id)].size(); }

const std::vector<EdgeId>& StreetGraph::incident(NodeId id) const {
  return incident_[node_index(id)];
}

void StreetGraph::set_attributes(EdgeId id, EdgeAttributes attrs) {
  if (id >= edges_.size()) throw DataError("no edge " + std::to_string(id));
  edges_[id].attrs = std::move(attrs);
}

void StreetGraph::set_elevation(NodeId id, std::optional<double> meters) {
  nodes_[node_index(id)].elevation_m = meters;
}

// ---------------------------------------------------------------------------
// Tag handling

namespace {

const std::map<std::string, double, std::less<>>& speed_table() {
  static const std::map<std::string, double, std::less<>> table = {
      {"motorway", 100}, {"motorway_link", 60}, {"trunk", 80},     {"trunk_link", 50},
      {"primary", 50},   {"primary_link", 50},  {"secondary", 50}, {"secondary_link", 50},
      {"tertiary", 40},  {"tertiary_link", 40}, {"unclassified", 40}, {"residential", 30},
      {"living_street", 10}, {"service", 20},   {"road", 40}};
  return table;
}

const std::map<std::string, double, std::less<>>& width_table() {
  static const std::map<std::string, double, std::less<>> table = {
      {"motorway", 14}, {"motorway_link", 6}, {"trunk", 12},     {"trunk_link", 6},
      {"primary", 10},  {"primary_link", 6},  {"secondary", 9},  {"secondary_link", 6},
      {"tertiary", 8},  {"tertiary_link", 6}, {"unclassified", 6}, {"residential", 6},
      {"living_street", 5}, {"service", 4},   {"road", 6}};
  return table;
}

// Leading number of a tag value, e.g. "30 mph" -> 30, "7.5m" -> 7.5.
std::optional<std::pair<double, std::string>> leading_number(std::string_view value) {
  const std::string v = csv::to_lower(csv::trim(value));
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc{} || ptr == v.data()) return std::nullopt;
  return std::make_pair(x, csv::trim(std::string_view(ptr, v.data() + v.size() - ptr)));
}

}  // namespace

bool is_road_class(std::string_view highway) { return speed_table().count(highway) != 0; }

bool is_local_class(std::string_view highway) {
  return highway == "residential" || highway == "living_street" || highway == "service";
}

std::optional<double> parse_maxspeed_kmh(std::string_view value) {
  // Multi-valued tags ("30;50") use the first value.
  const auto semi = value.find(';');
  auto parsed = leading_number(value.substr(0, semi));
  if (!parsed || parsed->first <= 0.0) return std::nullopt;
  const auto& [number, unit] = *parsed;
  if (unit.empty() || unit == "km/h" || unit == "kmh" || unit == "kph") return number;
  if (unit == "mph") return number * 1.609344;
  return std::nullopt;
}

std::optional<double> parse_width_m(std::string_view value) {
  auto parsed = leading_number(value);
  if (!parsed || parsed->first <= 0.0) return std::nullopt;
  const auto& [number, unit] = *parsed;
  if (unit.empty() || unit == "m") return number;
  if (unit == "ft" || unit == "'") return number * 0.3048;
  return std::nullopt;
}

double default_speed_kmh(std::string_view highway) {
  auto it = speed_table().find(highway);
  return it == speed_table().end() ? 40.0 : it->second;
}

double default_width_m(std::string_view highway) {
  auto it = width_table().find(highway);
  return it == width_table().end() ? 6.0 : it->second;
}

// ---------------------------------------------------------------------------
// OSM XML reading

namespace {

struct OsmWay {
  std::int64_t id = 0;
  std::vector<NodeId> refs;
  std::map<std::string, std::string> tags;
};

struct OsmDocument {
  std::unordered_map<NodeId, geo::LatLon> nodes;
  std::vector<OsmWay> ways;
  std::optional<geo::BBox> bounds;
};

const char* attr(const XML_Char** atts, std::string_view name) {
  for (int i = 0; atts[i]; i += 2) {
    if (name == atts[i]) return atts[i + 1];
  }
  return nullptr;
}

template <class T>
T number_attr(const XML_Char** atts, std::string_view name) {
  const char* s = attr(atts, name);
  if (!s) throw DataError("OSM element missing attribute '" + std::string(name) + "'");
  T value{};
  const std::string_view sv(s);
  auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
  if (ec != std::errc{} || ptr != sv.data() + sv.size()) {
    throw DataError("OSM attribute '" + std::string(name) + "' is not a number: " + std::string(sv));
  }
  return value;
}

struct ParserState {
  OsmDocument doc;
  OsmWay* current_way = nullptr;
  std::string error;
};

void on_start(void* user, const XML_Char* name, const XML_Char** atts) {
  auto* st = static_cast<ParserState*>(user);
  if (!st->error.empty()) return;
  try {
    const std::string_view el(name);
    if (el == "node") {
      const auto id = number_attr<std::int64_t>(atts, "id");
      st->doc.nodes[id] = {number_attr<double>(atts, "lat"), number_attr<double>(atts, "lon")};
    } else if (el == "way") {
      st->doc.ways.push_back({number_attr<std::int64_t>(atts, "id"), {}, {}});
      st->current_way = &st->doc.ways.back();
    } else if (el == "nd" && st->current_way) {
      st->current_way->refs.push_back(number_attr<std::int64_t>(atts, "ref"));
    } else if (el == "tag" && st->current_way) {
      const char* k = attr(atts, "k");
      const char* v = attr(atts, "v");
      if (k && v) st->current_way->tags[k] = v;
    } else if (el == "bounds") {
      st->doc.bounds = geo::BBox{number_attr<double>(atts, "minlat"),
                                 number_attr<double>(atts, "minlon"),
                                 number_attr<double>(atts, "maxlat"),
                                 number_attr<double>(atts, "maxlon")};
    }
  } catch (const std::exception& e) {
    st->error = e.what();
  }
}

void on_end(void* user, const XML_Char* name) {
  auto* st = static_cast<ParserState*>(user);
  if (std::string_view(name) == "way") st->current_way = nullptr;
}

OsmDocument parse_osm(std::string_view xml) {
  ParserState state;
  std::unique_ptr<std::remove_pointer_t<XML_Parser>, decltype(&XML_ParserFree)> parser(
      XML_ParserCreate(nullptr), &XML_ParserFree);
  XML_SetUserData(parser.get(), &state);
  XML_SetElementHandler(parser.get(), on_start, on_end);
  // Ways are appended while current_way points into the vector; reserve so
  // the pointer stays valid. Upper bound: one way per "<way" occurrence.
  std::size_t way_count = 0;
  for (std::size_t p = xml.find("<way"); p != std::string_view::npos; p = xml.find("<way", p + 4)) {
    ++way_count;
  }
  state.doc.ways.reserve(way_count);
  if (XML_Parse(parser.get(), xml.data(), static_cast<int>(xml.size()), XML_TRUE) ==
      XML_STATUS_ERROR) {
    throw DataError("malformed OSM XML at line " +
                    std::to_string(XML_GetCurrentLineNumber(parser.get())) + ": " +
                    XML_ErrorString(XML_GetErrorCode(parser.get())));
  }
  if (!state.error.empty()) throw DataError("malformed OSM XML: " + state.error);
  return std::move(state.doc);
}

bool tag_is(const OsmWay& w, const std::string& key, std::initializer_list<std::string_view> values) {
  auto it = w.tags.find(key);
  if (it == w.tags.end()) return false;
  return std::find(values.begin(), values.end(), it->second) != values.end();
}

bool tagged_bikelane(const OsmWay& w) {
  for (const char* key : {"cycleway", "cycleway:left", "cycleway:right", "cycleway:both"}) {
    if (tag_is(w, key, {"lane", "track"})) return true;
  }
  return tag_is(w, "bicycle", {"designated"});
}

bool is_cycleway(const OsmWay& w) {
  return tag_is(w, "highway", {"cycleway"}) ||
         (tag_is(w, "highway", {"path"}) && tag_is(w, "bicycle", {"designated"}));
}

double axis_difference_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 180.0);
  return std::min(d, 180.0 - d);
}

// Runs of consecutive refs that exist in the extract, duplicates collapsed.
std::vector<std::vector<NodeId>> present_runs(const OsmWay& way, const OsmDocument& doc) {
  std::vector<std::vector<NodeId>> runs;
  std::vector<NodeId> cur;
  for (NodeId ref : way.refs) {
    if (!doc.nodes.count(ref)) {
      if (cur.size() >= 2) runs.push_back(std::move(cur));
      cur.clear();
      continue;
    }
    if (!cur.empty() && cur.back() == ref) continue;
    cur.push_back(ref);
  }
  if (cur.size() >= 2) runs.push_back(std::move(cur));
  return runs;
}

}  // namespace

StreetGraph build_graph_from_xml(std::string_view xml, const BuildOptions& options) {
  const OsmDocument doc = parse_osm(xml);

  struct RoadPiece {
    const OsmWay* way;
    std::vector<NodeId> refs;
  };
  std::vector<RoadPiece> pieces;
  std::vector<geo::Polyline> cycleways;
  for (const auto& way : doc.ways) {
    auto hw = way.tags.find("highway");
    if (hw == way.tags.end()) continue;
    if (is_cycleway(way)) {
      for (auto& run : present_runs(way, doc)) {
        geo::Polyline line;
        for (NodeId r : run) line.push_back(doc.nodes.at(r));
        cycleways.push_back(std::move(line));
      }
      continue;
    }
    if (!is_road_class(hw->second) || tag_is(way, "area", {"yes"})) continue;
    for (auto& run : present_runs(way, doc)) pieces.push_back({&way, std::move(run)});
  }
  if (pieces.empty()) throw DataError("OSM extract contains no road ways");

  std::unordered_map<NodeId, int> degree;
  std::unordered_set<NodeId> endpoints;
  for (const auto& p : pieces) {
    for (std::size_t i = 0; i + 1 < p.refs.size(); ++i) {
      ++degree[p.refs[i]];
      ++degree[p.refs[i + 1]];
    }
    endpoints.insert(p.refs.front());
    endpoints.insert(p.refs.back());
  }
  auto is_graph_node = [&](NodeId id) { return endpoints.count(id) || degree[id] >= 3; };

  std::vector<Edge> edges;
  std::vector<NodeId> node_order;
  std::unordered_set<NodeId> seen_nodes;
  auto note_node = [&](NodeId id) {
    if (seen_nodes.insert(id).second) node_order.push_back(id);
  };
  for (const auto& p : pieces) {
    std::size_t start = 0;
    for (std::size_t i = 1; i < p.refs.size(); ++i) {
      if (!is_graph_node(p.refs[i])) continue;
      Edge e;
      e.id = static_cast<EdgeId>(edges.size());
      e.u = p.refs[start];
      e.v = p.refs[i];
      e.way_id = p.way->id;
      for (std::size_t k = start; k <= i; ++k) e.geometry.push_back(doc.nodes.at(p.refs[k]));
      e.length_m = geo::arc_length_m(e.geometry);
      const auto& tags = p.way->tags;
      e.attrs.highway = tags.at("highway");
      if (auto it = tags.find("maxspeed"); it != tags.end()) {
        e.attrs.speed_limit_kmh = parse_maxspeed_kmh(it->second);
      }
      if (auto it = tags.find("width"); it != tags.end()) e.attrs.width_m = parse_width_m(it->second);
      e.attrs.bikelane = tagged_bikelane(*p.way);
      note_node(e.u);
      note_node(e.v);
      edges.push_back(std::move(e));
      start = i;
    }
  }

  // A separately mapped cycleway running alongside the street.
  for (auto& e : edges) {
    if (e.attrs.bikelane || cycleways.empty()) continue;
    const geo::LatLon mid = geo::interpolate(e.geometry, e.length_m / 2.0);
    const geo::Projection on_edge = geo::project_onto(e.geometry, mid);
    const std::size_t s = std::min(on_edge.segment, e.geometry.size() - 2);
    const double edge_bearing = geo::bearing_deg(e.geometry[s], e.geometry[s + 1]);
    for (const auto& cw : cycleways) {
      const geo::Projection pr = geo::project_onto(cw, mid);
      if (pr.distance_m > options.parallel_cycleway_m) continue;
      const double cw_bearing = geo::bearing_deg(cw[pr.segment], cw[pr.segment + 1]);
      if (axis_difference_deg(edge_bearing, cw_bearing) <= options.parallel_bearing_tolerance_deg) {
        e.attrs.bikelane = true;
        break;
      }
    }
  }

  std::vector<Node> nodes;
  nodes.reserve(node_order.size());
  for (NodeId id : node_order) nodes.push_back({id, doc.nodes.at(id), std::nullopt});

  Provenance prov;
  prov.source_sha256 = sha256_hex(xml);
  if (doc.bounds) {
    prov.bbox = *doc.bounds;
  } else {
    bool first = true;
    for (const auto& [id, p] : doc.nodes) {
      if (first) {
        prov.bbox = {p.lat, p.lon, p.lat, p.lon};
        first = false;
      }
      prov.bbox.min_lat = std::min(prov.bbox.min_lat, p.lat);
      prov.bbox.max_lat = std::max(prov.bbox.max_lat, p.lat);
      prov.bbox.min_lon = std::min(prov.bbox.min_lon, p.lon);
      prov.bbox.max_lon = std::max(prov.bbox.max_lon, p.lon);
    }
  }
  return StreetGraph(std::move(nodes), std::move(edges), std::move(prov));
}

StreetGraph build_graph(const std::filesystem::path& osm_file, const BuildOptions& options) {
  return build_graph_from_xml(read_file(osm_file), options);
}

void impute_missing_attributes(StreetGraph& graph) {
  std::map<std::string, std::vector<double>> tagged_widths;
  for (const auto& e : graph.edges()) {
    if (e.attrs.width_m && !e.attrs.width_imputed) tagged_widths[e.attrs.highway].push_back(*e.attrs.width_m);
  }
  std::map<std::string, double> width_by_class;
  for (auto& [cls, widths] : tagged_widths) {
    std::sort(widths.begin(), widths.end());
    const std::size_t n = widths.size();
    width_by_class[cls] = n % 2 ? widths[n / 2] : 0.5 * (widths[n / 2 - 1] + widths[n / 2]);
  }

  Provenance& prov = graph.provenance();
  for (const auto& e : graph.edges()) {
    EdgeAttributes a = e.attrs;
    bool changed = false;
    if (!a.speed_limit_kmh) {
      a.speed_limit_kmh = default_speed_kmh(a.highway);
      a.speed_imputed = true;
      prov.speed_imputation_kmh[a.highway] = *a.speed_limit_kmh;
      ++prov.speed_imputed;
      changed = true;
    }
    if (!a.width_m) {
      auto it = width_by_class.find(a.highway);
      a.width_m = it != width_by_class.end() ? it->second : default_width_m(a.highway);
      a.width_imputed = true;
      prov.width_imputation_m[a.highway] = *a.width_m;
      ++prov.width_imputed;
      changed = true;
    }
    if (changed) graph.set_attributes(e.id, std::move(a));
  }
}

std::size_t load_elevation(StreetGraph& graph, std::istream& in) {
  std::size_t line_no = 0;
  auto header = csv::next_line(in, line_no);
  if (!header) throw DataError("elevation file is empty");
  const auto cols = csv::split_record(*header);
  if (cols.size() < 2 || csv::to_lower(csv::trim(cols[0])) != "node_id" ||
      csv::to_lower(csv::trim(cols[1])) != "elevation_m") {
    throw DataError("elevation file header must be node_id,elevation_m");
  }
  std::size_t applied = 0;
  while (auto line = csv::next_line(in, line_no)) {
    const auto f = csv::split_record(*line);
    if (f.size() < 2) throw DataError("elevation line " + std::to_string(line_no) + ": expected 2 fields");
    NodeId id = 0;
    double elev = 0.0;
    const std::string a = csv::trim(f[0]);
    const std::string b = csv::trim(f[1]);
    auto r1 = std::from_chars(a.data(), a.data() + a.size(), id);
    auto r2 = std::from_chars(b.data(), b.data() + b.size(), elev);
    if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
      throw DataError("elevation line " + std::to_string(line_no) + ": not numeric");
    }
    if (graph.has_node(id)) {
      graph.set_elevation(id, elev);
      ++applied;
    }
  }
  graph.provenance().elevation_nodes = applied;
  return applied;
}

std::size_t load_elevation(StreetGraph& graph, const std::filesystem::path& csv_file) {
  std::ifstream in(csv_file);
  if (!in) throw DataError("cannot open elevation file " + csv_file.string());
  return load_elevation(graph, in);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void write_graph_json(std::ostream& out, const StreetGraph& graph) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : graph.nodes()) {
    nlohmann::ordered_json j;
    j["id"] = n.id;
    j["lat"] = n.pos.lat;
    j["lon"] = n.pos.lon;
    j["elevation_m"] = optional_json(n.elevation_m);
    doc["nodes"].push_back(std::move(j));
  }
  doc["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges()) {
    nlohmann::ordered_json j;
    j["id"] = e.id;
    j["u"] = e.u;
    j["v"] = e.v;
    j["way_id"] = e.way_id;
    j["highway"] = e.attrs.highway;
    j["speed_limit_kmh"] = optional_json(e.attrs.speed_limit_kmh);
    j["width_m"] = optional_json(e.attrs.width_m);
    j["bikelane"] = e.attrs.bikelane;
    j["length_m"] = e.length_m;
    j["speed_imputed"] = e.attrs.speed_imputed;
    j["width_imputed"] = e.attrs.width_imputed;
    auto geom = nlohmann::ordered_json::array();
    for (const auto& p : e.geometry) geom.push_back({p.lon, p.lat});
    j["geometry"] = std::move(geom);
    doc["edges"].push_back(std::move(j));
  }
  const Provenance& p = graph.provenance();
  nlohmann::ordered_json prov;
  prov["source_sha256"] = p.source_sha256;
  prov["bbox"] = {p.bbox.min_lon, p.bbox.min_lat, p.bbox.max_lon, p.bbox.max_lat};
  prov["speed_imputation_kmh"] = p.speed_imputation_kmh;
  prov["width_imputation_m"] = p.width_imputation_m;
  prov["speed_imputed"] = p.speed_imputed;
  prov["width_imputed"] = p.width_imputed;
  prov["elevation_nodes"] = p.elevation_nodes;
  doc["provenance"] = std::move(prov);
  out << doc.dump(1) << '\n';
}

StreetGraph read_graph_json(std::istream& in) {
  try {
    const json doc = json::parse(in);
    std::vector<Node> nodes;
    for (const auto& j : doc.at("nodes")) {
      nodes.push_back({j.at("id").get<NodeId>(),
                       {j.at("lat").get<double>(), j.at("lon").get<double>()},
                       optional_from(j, "elevation_m")});
    }
    std::vector<Edge> edges;
    for (const auto& j : doc.at("edges")) {
      Edge e;
      e.id = j.at("id").get<EdgeId>();
      e.u = j.at("u").get<NodeId>();
      e.v = j.at("v").get<NodeId>();
      e.way_id = j.value("way_id", std::int64_t{0});
      e.attrs.highway = j.at("highway").get<std::string>();
      e.attrs.speed_limit_kmh = optional_from(j, "speed_limit_kmh");
      e.attrs.width_m = optional_from(j, "width_m");
      e.attrs.bikelane = j.at("bikelane").get<bool>();
      e.attrs.speed_imputed = j.value("speed_imputed", false);
      e.attrs.width_imputed = j.value("width_imputed", false);
      for (const auto& p : j.at("geometry")) e.geometry.push_back({p.at(1).get<double>(), p.at(0).get<double>()});
      e.length_m = j.at("length_m").get<double>();
      edges.push_back(std::move(e));
    }
    Provenance prov;
    if (doc.contains("provenance")) {
      const json& p = doc.at("provenance");
      prov.source_sha256 = p.value("source_sha256", std::string{});
      if (p.contains("bbox")) {
        const json& b = p.at("bbox");
        prov.bbox = {b.at(1).get<double>(), b.at(0).get<double>(), b.at(3).get<double>(),
                     b.at(2).get<double>()};
      }
      if (p.contains("speed_imputation_kmh")) {
        prov.speed_imputation_kmh = p.at("speed_imputation_kmh").get<std::map<std::string, double>>();
      }
      if (p.contains("width_imputation_m")) {
        prov.width_imputation_m = p.at("width_imputation_m").get<std::map<std::string, double>>();
      }
      prov.speed_imputed = p.value("speed_imputed", std::size_t{0});
      prov.width_imputed = p.value("width_imputed", std::size_t{0});
      prov.elevation_nodes = p.value("elevation_nodes", std::size_t{0});
    }
    return StreetGraph(std::move(nodes), std::move(edges), std::move(prov));
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid graph JSON: ") + e.what());
  }
}

StreetGraph read_graph_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open graph file " + path.string());
  return read_graph_json(in);
}

}  // namespace bikerisk::graph
