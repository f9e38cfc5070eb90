#ifndef UDA_TRAINER_HPP
#define UDA_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "uda/bank.hpp"
#include "uda/data.hpp"
#include "uda/losses.hpp"
#include "uda/metrics.hpp"
#include "uda/model.hpp"
#include "uda/optim.hpp"

namespace uda {

struct TrainConfig {
  // input_dim and num_classes are taken from the source dataset.
  ModelConfig model;
  int batch_size = 64;
  int epochs = 32;
  double lambda_align = 1.0;
  ScheduleConfig schedule;
  AdamWConfig optimizer;
  KernelConfig kernel;
  std::uint64_t seed = 0;
  bool use_grl = true;
  bool use_coral = true;
  bool use_mmd = true;
  // One ring over [source batch, target batch] instead of one ring each.
  bool mixed_graph = false;
  int bank_slots = 1;
  float bank_momentum = 0.9f;
  int bank_k = 5;

  void validate() const;
};

struct HistoryRow {
  long step = 0;
  int epoch = 0;
  LossReport losses;
  double lr = 0;
};

struct EpochMetrics {
  int epoch = 0;
  Metrics metrics;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::vector<EpochMetrics> evaluations;
};

struct EvalResult {
  Metrics metrics;
  ConfusionMatrix confusion;
  std::vector<int> predictions;
  Eigen::MatrixXd probabilities;  // classes x samples
};

struct TrainResult {
  ModelParams<float> model;
  PrototypeBank bank;
  TrainHistory history;
  // Best model by evaluation accuracy, when an evaluation set was given.
  std::optional<ModelParams<float>> best_model;
  int best_epoch = -1;
};

template <typename Scalar>
struct StepOutcome {
  LossReport report;
  MatrixX<Scalar> source_embeddings;
};

// Forward, losses and backward for one (source, target) batch pair under the
// configured ablation switches. Gradients of L_total accumulate into `grads`
// (encoder gradients of the domain loss pass through the reversal layer).
// Instantiated for float and double.
template <typename Scalar>
StepOutcome<Scalar> compute_step(const ModelParams<Scalar>& params, const TrainConfig& cfg, const MatrixX<Scalar>& Xs,
                                 const std::vector<int>& ys, const MatrixX<Scalar>& Xt, ModelParams<Scalar>& grads);

// Called after each epoch with the current parameters and bank.
using EpochCallback = std::function<void(int epoch, const ModelParams<float>&, const PrototypeBank&)>;

// Target labels are never read. The evaluation set, when given, only feeds
// per-epoch metrics and best-model selection.
TrainResult train(const RecordSource& source, const RecordSource& target, const TrainConfig& cfg,
                  const RecordSource* eval = nullptr, const EpochCallback& on_epoch = {});

// Unshuffled ring batches of batch_size; a trailing singleton joins the
// previous batch.
EvalResult evaluate(const ModelParams<float>& model, const RecordSource& data, int batch_size);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace uda

#endif  // UDA_TRAINER_HPP
