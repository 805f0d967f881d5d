#pragma once

#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mconv/metric.hpp"
#include "mconv/rat.hpp"

namespace mconv {

// Undirected weighted graph; the finite-approximation substrate.
template <class S>
struct WeightedGraph {
  using scalar_type = S;
  std::vector<std::string> vertex_names;
  std::map<std::string, int> vertex_index;
  struct Edge {
    int u, v;
    S length;
  };
  std::vector<Edge> edges;

  int add_vertex(const std::string& name) {
    auto it = vertex_index.find(name);
    if (it != vertex_index.end()) return it->second;
    int id = static_cast<int>(vertex_names.size());
    vertex_names.push_back(name);
    vertex_index.emplace(name, id);
    return id;
  }
  void add_edge(int u, int v, S length) { edges.push_back({u, v, std::move(length)}); }
  int size() const { return static_cast<int>(vertex_names.size()); }
};

struct GraphToMetricError {
  std::string message;
};

// All-pairs shortest paths by Dijkstra from every source. Exact in rational
// mode. Fails on disconnected graphs or nonpositive edge lengths.
template <class S>
std::optional<FiniteMetricSpace<S>> graph_to_metric(const WeightedGraph<S>& g,
                                                    GraphToMetricError* err = nullptr) {
  int n = g.size();
  if (n == 0) {
    if (err) err->message = "empty graph";
    return std::nullopt;
  }
  for (const auto& e : g.edges)
    if (!(e.length > S{})) {
      if (err) err->message = "nonpositive edge length";
      return std::nullopt;
    }
  std::vector<std::vector<std::pair<int, S>>> adj(n);
  for (const auto& e : g.edges) {
    adj[e.u].push_back({e.v, e.length});
    adj[e.v].push_back({e.u, e.length});
  }
  std::vector<S> dist(static_cast<size_t>(n) * n);
  for (int src = 0; src < n; ++src) {
    std::vector<char> done(n, 0);
    std::vector<std::optional<S>> d(n);
    d[src] = S{};
    using QE = std::pair<S, int>;
    auto cmp = [](const QE& a, const QE& b) { return a.first > b.first; };
    std::priority_queue<QE, std::vector<QE>, decltype(cmp)> pq(cmp);
    pq.push({S{}, src});
    int reached = 0;
    while (!pq.empty()) {
      auto [du, u] = pq.top();
      pq.pop();
      if (done[u]) continue;
      done[u] = 1;
      ++reached;
      for (auto& [v, w] : adj[u]) {
        S nd = du + w;
        if (!d[v] || nd < *d[v]) {
          d[v] = nd;
          pq.push({nd, v});
        }
      }
    }
    if (reached != n) {
      if (err) err->message = "graph is disconnected";
      return std::nullopt;
    }
    for (int j = 0; j < n; ++j) dist[static_cast<size_t>(src) * n + j] = *d[j];
  }
  return FiniteMetricSpace<S>(n, std::move(dist), g.vertex_names);
}

// Text format: one record per line,
//   vertex <name>
//   edge <u> <v> <length>
// lengths as exact fractions "p/q" or decimals. '#' starts a comment.
inline std::optional<WeightedGraph<Rat>> parse_graph_text(const std::string& text,
                                                          std::string* err = nullptr) {
  WeightedGraph<Rat> g;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& m) {
    if (err) *err = "line " + std::to_string(lineno) + ": " + m;
    return std::nullopt;
  };
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    if (kind == "vertex") {
      std::string name;
      if (!(ls >> name)) return fail("vertex needs a name");
      g.add_vertex(name);
    } else if (kind == "edge") {
      std::string u, v, len;
      if (!(ls >> u >> v >> len)) return fail("edge needs <u> <v> <length>");
      auto l = rat_from_string(len);
      if (!l || *l <= 0) return fail("bad edge length '" + len + "'");
      g.add_edge(g.add_vertex(u), g.add_vertex(v), *l);
    } else {
      return fail("unknown record '" + kind + "'");
    }
  }
  return g;
}

template <class S>
std::string graph_to_text(const WeightedGraph<S>& g) {
  std::ostringstream out;
  for (const auto& name : g.vertex_names) out << "vertex " << name << "\n";
  for (const auto& e : g.edges) {
    out << "edge " << g.vertex_names[e.u] << " " << g.vertex_names[e.v] << " ";
    if constexpr (std::is_same_v<S, Rat>)
      out << rat_to_string(e.length);
    else
      out << e.length;
    out << "\n";
  }
  return out.str();
}

// CSV export of a distance matrix, first row/column are labels.
template <class Space>
std::string metric_to_csv(const Space& m) {
  std::ostringstream out;
  out << "label";
  for (int j = 0; j < m.size(); ++j) out << "," << m.label(j);
  out << "\n";
  for (int i = 0; i < m.size(); ++i) {
    out << m.label(i);
    for (int j = 0; j < m.size(); ++j) {
      out << ",";
      if constexpr (std::is_same_v<typename Space::scalar_type, Rat>)
        out << rat_to_string(m.dist(i, j));
      else
        out << m.dist(i, j);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace mconv
