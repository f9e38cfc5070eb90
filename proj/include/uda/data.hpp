#ifndef UDA_DATA_HPP
#define UDA_DATA_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

namespace uda {

enum class Domain : std::uint8_t { Source = 0, Target = 1 };

struct EmbeddingRecord {
  Eigen::VectorXf features;
  std::optional<int> label;
  Domain domain = Domain::Source;
};

// Read-only view over labeled or unlabeled records. The trainer consumes
// datasets only through this interface.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual std::size_t size() const = 0;
  virtual int dim() const = 0;
  virtual int num_classes() const = 0;
  virtual const Eigen::VectorXf& features(std::size_t i) const = 0;
  virtual std::optional<int> label(std::size_t i) const = 0;
};

class Dataset final : public RecordSource {
 public:
  Dataset() = default;
  // Validates every record: uniform dim, finite features, labels in range.
  Dataset(std::vector<EmbeddingRecord> records, int dim, int num_classes);

  std::size_t size() const override { return records_.size(); }
  int dim() const override { return dim_; }
  int num_classes() const override { return num_classes_; }
  const Eigen::VectorXf& features(std::size_t i) const override { return records_[i].features; }
  std::optional<int> label(std::size_t i) const override { return records_[i].label; }

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  // Domain of the first record, Source when empty.
  Domain domain() const;
  bool fully_labeled() const;

  friend bool operator==(const Dataset&, const Dataset&);

 private:
  std::vector<EmbeddingRecord> records_;
  int dim_ = 0;
  int num_classes_ = 0;
};

enum class DatasetFormat { Csv, Bin };

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, DatasetFormat format);
// Picks the format from the extension: .csv or anything else as binary.
DatasetFormat format_for(const std::filesystem::path& path);

struct SyntheticConfig {
  int num_classes = 4;
  int dim = 16;
  int samples_per_class = 500;
  double separation = 2.0;
  double cov_scale = 0.05;
  double shift = 2.0;
  double rotation = 0.6;
  double scale = 1.5;
  std::uint64_t seed = 7;

  void validate() const;
};

// Class means sit on a seeded orthonormal frame scaled by `separation`;
// samples are mean + sqrt(cov_scale) * N(0, I). Target records run the same
// process, then scale -> rotate (seeded 2-D plane) -> translate. Target
// records keep their labels for evaluation.
std::pair<Dataset, Dataset> generate_synthetic(const SyntheticConfig& config);

// Seeded permutation of [0, n) chunked into batches; a trailing singleton is
// dropped.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, int batch_size, std::uint64_t seed,
                                                   std::uint64_t epoch);

inline std::vector<std::vector<std::size_t>> make_batches(const RecordSource& dataset, int batch_size,
                                                          std::uint64_t seed, std::uint64_t epoch) {
  return make_batches(dataset.size(), batch_size, seed, epoch);
}

// Gathers the features of `indices` into the columns of a dim x n matrix.
Eigen::MatrixXf gather(const RecordSource& dataset, const std::vector<std::size_t>& indices);

}  // namespace uda

#endif  // UDA_DATA_HPP
