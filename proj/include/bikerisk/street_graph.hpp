#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bikerisk/geo.hpp"

namespace bikerisk::graph {

using NodeId = std::int64_t;  // OSM node id
using EdgeId = std::uint32_t;

struct Node {
  NodeId id = 0;
  geo::LatLon pos;
  std::optional<double> elevation_m;
  friend bool operator==(const Node&, const Node&) = default;
};

// Attributes that scenario edits may change. Geometry and topology live on
// Edge and are fixed after build.
struct EdgeAttributes {
  std::string highway;
  std::optional<double> speed_limit_kmh;
  std::optional<double> width_m;
  bool bikelane = false;
  bool speed_imputed = false;
  bool width_imputed = false;
  friend bool operator==(const EdgeAttributes&, const EdgeAttributes&) = default;
};

struct Edge {
  EdgeId id = 0;
  NodeId u = 0;
  NodeId v = 0;
  std::int64_t way_id = 0;
  geo::Polyline geometry;
  double length_m = 0.0;
  EdgeAttributes attrs;
  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Provenance {
  std::string source_sha256;
  geo::BBox bbox;
  std::map<std::string, double> speed_imputation_kmh;  // class -> value used
  std::map<std::string, double> width_imputation_m;    // class -> value used
  std::size_t speed_imputed = 0;
  std::size_t width_imputed = 0;
  std::size_t elevation_nodes = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

class StreetGraph {
 public:
  StreetGraph() = default;
  // Validates that edge ids are 0..m-1 in order and every endpoint exists.
  StreetGraph(std::vector<Node> nodes, std::vector<Edge> edges, Provenance provenance = {});

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Provenance& provenance() const { return provenance_; }
  Provenance& provenance() { return provenance_; }

  const Edge& edge(EdgeId id) const;
  const Node& node(NodeId id) const;
  bool has_node(NodeId id) const { return index_.count(id) != 0; }
  std::size_t node_index(NodeId id) const;
  std::size_t degree(NodeId id) const;
  const std::vector<EdgeId>& incident(NodeId id) const;

  void set_attributes(EdgeId id, EdgeAttributes attrs);
  void set_elevation(NodeId id, std::optional<double> meters);

  friend bool operator==(const StreetGraph& a, const StreetGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_ && a.provenance_ == b.provenance_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  Provenance provenance_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<EdgeId>> incident_;
};

struct BuildOptions {
  double parallel_cycleway_m = 10.0;
  double parallel_bearing_tolerance_deg = 30.0;
};

// Parses an OSM XML extract. Intersections (degree >= 3) and way endpoints
// become nodes; ways are split there. Missing speed/width tags stay unset.
StreetGraph build_graph(const std::filesystem::path& osm_file, const BuildOptions& options = {});
StreetGraph build_graph_from_xml(std::string_view xml, const BuildOptions& options = {});

bool is_road_class(std::string_view highway);
bool is_local_class(std::string_view highway);

// Tag value parsers; nullopt when the value has no usable number.
std::optional<double> parse_maxspeed_kmh(std::string_view value);
std::optional<double> parse_width_m(std::string_view value);

double default_speed_kmh(std::string_view highway);
double default_width_m(std::string_view highway);

// Fills unset speed limits from the class table and unset widths with the
// class median of tagged widths (table value when a class has none). The
// values used are recorded in the graph provenance.
void impute_missing_attributes(StreetGraph& graph);

// CSV sidecar with columns node_id, elevation_m. Returns the number of graph
// nodes that received an elevation.
std::size_t load_elevation(StreetGraph& graph, const std::filesystem::path& csv_file);
std::size_t load_elevation(StreetGraph& graph, std::istream& csv);

void write_graph_json(std::ostream& out, const StreetGraph& graph);
StreetGraph read_graph_json(std::istream& in);
StreetGraph read_graph_json(const std::filesystem::path& path);

}  // namespace bikerisk::graph
