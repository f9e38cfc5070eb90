#ifndef UDA_BANK_HPP
#define UDA_BANK_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "uda/graph.hpp"
#include "uda/model.hpp"

namespace uda {

// Per-class prototype embeddings in the post-GAT space, each slot an EMA of
// batch class means. Slots are stored class-major: slot(c, m) = c * M + m.
class PrototypeBank {
 public:
  PrototypeBank() = default;
  PrototypeBank(int num_classes, int slots_per_class, int dim, float momentum);

  int num_classes() const { return num_classes_; }
  int slots_per_class() const { return slots_per_class_; }
  int dim() const { return dim_; }
  float momentum() const { return momentum_; }

  bool occupied(int c, int m) const { return occupied_[index(c, m)] != 0; }
  Eigen::Ref<const Eigen::VectorXf> slot(int c, int m) const { return slots_.col(index(c, m)); }
  bool empty() const;
  int occupied_count() const;

  // One EMA update per class present in the batch; with M > 1 the target
  // slot rotates round-robin per class.
  void update(const Eigen::MatrixXf& embeddings, const std::vector<int>& labels);

  friend bool operator==(const PrototypeBank& a, const PrototypeBank& b);

  void write(std::ostream& os) const;
  static PrototypeBank read(std::istream& is);

 private:
  int index(int c, int m) const { return c * slots_per_class_ + m; }

  int num_classes_ = 0;
  int slots_per_class_ = 1;
  int dim_ = 0;
  float momentum_ = 0.9f;
  Eigen::MatrixXf slots_;
  std::vector<std::uint8_t> occupied_;
  std::vector<int> cursor_;
};

void save_bank(const PrototypeBank& bank, const std::filesystem::path& path);
PrototypeBank load_bank(const std::filesystem::path& path);

struct Retrieval {
  Eigen::VectorXf query_embedding;
  StarGraph star;                  // indices into `slots`
  std::vector<int> slots;          // occupied slot ids, class-major
  std::vector<int> slot_classes;
};

// Projects the query and links it to its top-k occupied prototypes.
Retrieval retrieve(const Eigen::VectorXf& query, const ModelParams<float>& model, const PrototypeBank& bank, int k);

// Class probabilities for a single query: star graph over the retrieved
// prototypes, GAT update of the query node, task head, softmax.
Eigen::VectorXd infer_single(const Eigen::VectorXf& query, const ModelParams<float>& model, const PrototypeBank& bank,
                             int k);

}  // namespace uda

#endif  // UDA_BANK_HPP
