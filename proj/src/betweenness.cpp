#include "bikerisk/betweenness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <thread>

#include "bikerisk/csv.hpp"
#include "bikerisk/error.hpp"

namespace bikerisk::graph {

namespace {

struct Arc {
  std::size_t to;
  std::size_t edge;
  double length;
};

bool same_distance(double a, double b) {
  return std::abs(a - b) <= 1e-10 * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Per-source scratch space reused across sources of one block.
class SourcePass {
 public:
  SourcePass(const std::vector<std::vector<Arc>>& adj)
      : adj_(adj),
        dist_(adj.size()),
        sigma_(adj.size()),
        delta_(adj.size()),
        done_(adj.size()),
        preds_(adj.size()) {}

  void run(std::size_t source, std::vector<double>& edge_acc) {
    const double inf = std::numeric_limits<double>::infinity();
    std::fill(dist_.begin(), dist_.end(), inf);
    std::fill(sigma_.begin(), sigma_.end(), 0.0);
    std::fill(delta_.begin(), delta_.end(), 0.0);
    std::fill(done_.begin(), done_.end(), char{0});
    for (auto& p : preds_) p.clear();
    order_.clear();

    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    dist_[source] = 0.0;
    sigma_[source] = 1.0;
    queue.emplace(0.0, source);
    while (!queue.empty()) {
      const auto [d, v] = queue.top();
      queue.pop();
      if (done_[v] || d > dist_[v]) continue;
      done_[v] = 1;
      order_.push_back(v);
      for (const Arc& a : adj_[v]) {
        if (done_[a.to]) continue;
        const double nd = dist_[v] + a.length;
        if (dist_[a.to] == inf || (nd < dist_[a.to] && !same_distance(nd, dist_[a.to]))) {
          dist_[a.to] = nd;
          sigma_[a.to] = sigma_[v];
          preds_[a.to].assign(1, {v, a.edge});
          queue.emplace(nd, a.to);
        } else if (same_distance(nd, dist_[a.to])) {
          sigma_[a.to] += sigma_[v];
          preds_[a.to].push_back({v, a.edge});
        }
      }
    }
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
      const std::size_t w = *it;
      for (const auto& [v, e] : preds_[w]) {
        const double c = sigma_[v] / sigma_[w] * (1.0 + delta_[w]);
        edge_acc[e] += c;
        delta_[v] += c;
      }
    }
  }

 private:
  const std::vector<std::vector<Arc>>& adj_;
  std::vector<double> dist_;
  std::vector<double> sigma_;
  std::vector<double> delta_;
  std::vector<char> done_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> preds_;
  std::vector<std::size_t> order_;
};

// Fixed block count so the floating-point reduction order does not depend on
// the number of worker threads.
constexpr std::size_t kBlocks = 64;

}  // namespace

double BetweennessResult::value(EdgeId id) const {
  if (id >= beta.size()) throw DataError("no betweenness for edge " + std::to_string(id));
  return beta[id];
}

BetweennessResult edge_betweenness(std::size_t node_count, std::span<const WeightedEdge> edges,
                                   const BetweennessOptions& options) {
  using Mode = BetweennessOptions::Mode;
  if (options.mode == Mode::Sampled && options.samples <= 0) {
    throw UsageError("sampled betweenness needs K > 0");
  }
  std::vector<std::vector<Arc>> adj(node_count);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto& e = edges[i];
    if (e.u >= node_count || e.v >= node_count) throw DataError("edge endpoint out of range");
    if (!(e.length > 0.0)) throw DataError("edge lengths must be positive");
    if (e.u == e.v) continue;
    adj[e.u].push_back({e.v, i, e.length});
    adj[e.v].push_back({e.u, i, e.length});
  }

  std::vector<std::size_t> sources(node_count);
  std::iota(sources.begin(), sources.end(), std::size_t{0});
  double rescale = 1.0;
  BetweennessResult result;
  result.mode = options.mode;
  if (options.mode == Mode::Sampled) {
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(options.samples), node_count);
    std::mt19937_64 rng(options.seed);
    std::shuffle(sources.begin(), sources.end(), rng);
    sources.resize(k);
    std::sort(sources.begin(), sources.end());
    rescale = k ? static_cast<double>(node_count) / static_cast<double>(k) : 0.0;
    result.samples = static_cast<int>(k);
    result.seed = options.seed;
  }

  const std::size_t blocks = std::max<std::size_t>(1, std::min(kBlocks, sources.size()));
  std::vector<std::vector<double>> partial(blocks, std::vector<double>(edges.size(), 0.0));
  std::atomic<std::size_t> next_block{0};
  auto worker = [&] {
    SourcePass pass(adj);
    for (std::size_t b = next_block++; b < blocks; b = next_block++) {
      for (std::size_t i = b; i < sources.size(); i += blocks) pass.run(sources[i], partial[b]);
    }
  };
  unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, blocks));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  result.raw.assign(edges.size(), 0.0);
  for (const auto& p : partial) {
    for (std::size_t e = 0; e < edges.size(); ++e) result.raw[e] += p[e];
  }
  // Every unordered pair was accumulated from both of its endpoints.
  for (double& v : result.raw) v *= 0.5 * rescale;

  const double n = static_cast<double>(node_count);
  result.normalization = node_count >= 2 ? n * (n - 1.0) / 2.0 : 1.0;
  result.beta.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    result.beta[e] = result.raw[e] / result.normalization;
  }
  return result;
}

BetweennessResult edge_betweenness(const StreetGraph& graph, const BetweennessOptions& options) {
  std::vector<WeightedEdge> edges;
  edges.reserve(graph.edges().size());
  for (const auto& e : graph.edges()) {
    edges.push_back({graph.node_index(e.u), graph.node_index(e.v), e.length_m});
  }
  return edge_betweenness(graph.nodes().size(), edges, options);
}

void write_betweenness_csv(std::ostream& out, const BetweennessResult& result) {
  csv::Writer w(out);
  w.row({"edge_id", "beta"});
  for (std::size_t e = 0; e < result.beta.size(); ++e) {
    w.row({std::to_string(e), csv::format_double(result.beta[e])});
  }
}

BetweennessResult read_betweenness_csv(std::istream& in, std::size_t edge_count) {
  std::size_t line_no = 0;
  auto header = csv::next_line(in, line_no);
  if (!header || csv::to_lower(csv::trim(*header)) != "edge_id,beta") {
    throw DataError("betweenness CSV must start with header edge_id,beta");
  }
  BetweennessResult r;
  r.beta.assign(edge_count, std::numeric_limits<double>::quiet_NaN());
  while (auto line = csv::next_line(in, line_no)) {
    const auto f = csv::split_record(*line);
    if (f.size() != 2) throw DataError("betweenness line " + std::to_string(line_no) + ": expected 2 fields");
    std::size_t id = 0;
    double beta = 0.0;
    const std::string a = csv::trim(f[0]);
    const std::string b = csv::trim(f[1]);
    if (std::from_chars(a.data(), a.data() + a.size(), id).ec != std::errc{} ||
        std::from_chars(b.data(), b.data() + b.size(), beta).ec != std::errc{}) {
      throw DataError("betweenness line " + std::to_string(line_no) + ": not numeric");
    }
    if (id >= edge_count) throw DataError("betweenness references unknown edge " + a);
    if (beta < 0.0 || beta > 1.0) throw DataError("betweenness value outside [0,1] for edge " + a);
    r.beta[id] = beta;
  }
  for (std::size_t e = 0; e < edge_count; ++e) {
    if (std::isnan(r.beta[e])) throw DataError("betweenness missing for edge " + std::to_string(e));
  }
  return r;
}

BetweennessResult read_betweenness_csv(const std::filesystem::path& path, std::size_t edge_count) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open betweenness file " + path.string());
  return read_betweenness_csv(in, edge_count);
}

}  // namespace bikerisk::graph
