#ifndef UDA_METRICS_HPP
#define UDA_METRICS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace uda {

// Rows are true classes, columns predicted classes.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes);

enum class Averaging { Macro, Micro };

struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double auc = 0;
  std::int64_t n_samples = 0;
  // Classes present in the data but never predicted (precision taken as 0).
  std::vector<int> unpredicted_classes;
  // Classes absent from the data, excluded from macro means.
  std::vector<int> unsupported_classes;
  bool auc_defined = true;
};

// scores: classes x samples, per-sample class probabilities (any score with
// a consistent ordering works; AUC only depends on ranks).
Metrics summarize(const ConfusionMatrix& cm, const Eigen::MatrixXd& scores, const std::vector<int>& truth,
                  Averaging averaging = Averaging::Macro);

// One-vs-rest AUC of one class by the Mann-Whitney statistic with midranks.
double one_vs_rest_auc(const Eigen::VectorXd& class_scores, const std::vector<int>& truth, int positive_class);

void write_metrics_json(const Metrics& m, const std::filesystem::path& path);
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& path);

}  // namespace uda

#endif  // UDA_METRICS_HPP
