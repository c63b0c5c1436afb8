#pragma once

// HTTP JSON API over immutable state loaded at startup. Handlers are plain
// member functions returning status + body so they can be exercised without
// a socket; HttpServer binds them to cpp-httplib.

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bikerisk/betweenness.hpp"
#include "bikerisk/locator.hpp"
#include "bikerisk/risk_model.hpp"
#include "bikerisk/street_graph.hpp"

namespace bikerisk::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::vector<std::filesystem::path> models;
  std::filesystem::path graph;
  std::filesystem::path betweenness;
  double snap_radius_m = graph::kDefaultSnapRadiusM;
  std::vector<std::string> cors_origins;

  // Keys: host, port, models, graph, betweenness, snap_radius_m,
  // cors_origins. Relative paths resolve against the config file's directory.
  static ServiceConfig from_file(const std::filesystem::path& path);
};

struct Response {
  int status = 200;
  std::string body;
};

class Service {
 public:
  Service(std::vector<model::FittedModel> models, graph::StreetGraph graph,
          graph::BetweennessResult betweenness, double snap_radius_m = graph::kDefaultSnapRadiusM);
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  static std::unique_ptr<Service> load(const ServiceConfig& config);

  Response models() const;
  // Query values as received; missing ones are nullopt.
  Response score(const std::optional<std::string>& lat, const std::optional<std::string>& lon,
                 const std::optional<std::string>& model) const;
  Response scenario(std::string_view body) const;
  Response segments(const std::optional<std::string>& bbox,
                    const std::optional<std::string>& model) const;

  const graph::StreetGraph& graph() const { return graph_; }
  double snap_radius_m() const { return snap_radius_m_; }

 private:
  const model::FittedModel* find_model(const std::optional<std::string>& key, Response& error) const;

  std::map<std::string, model::FittedModel> models_;
  graph::StreetGraph graph_;
  graph::BetweennessResult betweenness_;
  graph::EdgeLocator locator_;
  double snap_radius_m_;
};

Response error_response(int status, std::string_view reason);

class HttpServer {
 public:
  HttpServer(const Service& service, std::vector<std::string> cors_origins);
  ~HttpServer();

  // Port 0 picks a free port; returns the bound port or -1.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace bikerisk::service
