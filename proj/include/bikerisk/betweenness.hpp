#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bikerisk/street_graph.hpp"

namespace bikerisk::graph {

struct BetweennessOptions {
  enum class Mode { Exact, Sampled };
  Mode mode = Mode::Exact;
  int samples = 0;          // K, sampled mode only
  std::uint64_t seed = 0;   // source selection, sampled mode only
  unsigned threads = 0;     // 0: hardware concurrency
};

// Edge betweenness over unordered node pairs with length-weighted shortest
// paths. `raw` holds the pair sums (rescaled by n/K when sampled); `beta`
// divides them by n(n-1)/2.
struct BetweennessResult {
  std::vector<double> raw;
  std::vector<double> beta;
  BetweennessOptions::Mode mode = BetweennessOptions::Mode::Exact;
  int samples = 0;
  std::uint64_t seed = 0;
  double normalization = 1.0;

  double value(EdgeId id) const;
};

struct WeightedEdge {
  std::size_t u = 0;
  std::size_t v = 0;
  double length = 0.0;
};

// Core routine on a plain multigraph with nodes 0..n-1. Self loops never lie
// on a shortest path and receive zero.
BetweennessResult edge_betweenness(std::size_t node_count, std::span<const WeightedEdge> edges,
                                   const BetweennessOptions& options = {});

BetweennessResult edge_betweenness(const StreetGraph& graph,
                                   const BetweennessOptions& options = {});

// CSV with header edge_id,beta.
void write_betweenness_csv(std::ostream& out, const BetweennessResult& result);
BetweennessResult read_betweenness_csv(std::istream& in, std::size_t edge_count);
BetweennessResult read_betweenness_csv(const std::filesystem::path& path, std::size_t edge_count);

}  // namespace bikerisk::graph
