#include "uda/graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "uda/error.hpp"

namespace uda {

bool RingGraph::has_edge(int i, int j) const {
  return std::binary_search(edges.begin(), edges.end(), std::pair{i, j});
}

RingGraph build_ring(int n, bool self_loops) {
  if (n < 2) throw Error(ErrorKind::Graph, "ring needs at least 2 nodes, got " + std::to_string(n));
  RingGraph g;
  g.n = n;
  g.neighbors.resize(n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    g.edges.emplace_back(i, j);
    g.edges.emplace_back(j, i);
    if (self_loops) g.edges.emplace_back(i, i);
  }
  // n = 2: forward and reverse sets coincide, keep one copy of each direction.
  std::sort(g.edges.begin(), g.edges.end());
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
  for (const auto& [i, j] : g.edges) g.neighbors[i].push_back(j);
  return g;
}

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& q, const Eigen::Ref<const Eigen::VectorXd>& p) {
  if (q.size() != p.size()) throw Error(ErrorKind::Shape, "cosine similarity of vectors with different lengths");
  const double nq = q.norm(), np = p.norm();
  if (!(nq > 0.0) || !(np > 0.0)) throw Error(ErrorKind::Numeric, "cosine similarity of a zero-norm vector");
  return std::clamp(q.dot(p) / (nq * np), -1.0, 1.0);
}

StarGraph build_star(const Eigen::VectorXd& query, const std::vector<Eigen::VectorXd>& prototypes, int k) {
  if (prototypes.empty()) throw Error(ErrorKind::Graph, "star graph needs at least one prototype");
  if (k < 1) throw Error(ErrorKind::Graph, "star graph needs k >= 1");
  std::vector<double> sims(prototypes.size());
  for (std::size_t p = 0; p < prototypes.size(); ++p) sims[p] = cosine_similarity(query, prototypes[p]);
  std::vector<int> order(prototypes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sims[a] > sims[b]; });
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), prototypes.size());
  StarGraph star;
  for (std::size_t r = 0; r < take; ++r) {
    star.prototypes.push_back(order[r]);
    star.scores.push_back(sims[order[r]]);
  }
  return star;
}

}  // namespace uda
