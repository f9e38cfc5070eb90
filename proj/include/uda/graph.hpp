#ifndef UDA_GRAPH_HPP
#define UDA_GRAPH_HPP

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace uda {

// Batch-level ring: node i links to (i +/- 1) mod n in both directions.
struct RingGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;  // directed, sorted
  std::vector<std::vector<int>> neighbors;  // sorted per node

  bool has_edge(int i, int j) const;
};

RingGraph build_ring(int n, bool self_loops = false);

// Query node 0 linked to its top-k prototypes by cosine similarity.
struct StarGraph {
  static constexpr int kQuery = 0;
  std::vector<int> prototypes;  // indices into the prototype list
  std::vector<double> scores;   // non-increasing

  int k() const { return static_cast<int>(prototypes.size()); }
};

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& q, const Eigen::Ref<const Eigen::VectorXd>& p);

StarGraph build_star(const Eigen::VectorXd& query, const std::vector<Eigen::VectorXd>& prototypes, int k);

}  // namespace uda

#endif  // UDA_GRAPH_HPP
