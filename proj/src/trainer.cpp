#include "uda/trainer.hpp"

#include <charconv>
#include <numeric>
#include <fstream>
#include <string>

#include "uda/error.hpp"
#include "uda/rng.hpp"

namespace uda {

void TrainConfig::validate() const {
  if (batch_size < 2) throw Error(ErrorKind::Config, "batch size must be >= 2");
  if (epochs < 1) throw Error(ErrorKind::Config, "epochs must be >= 1");
  if (schedule.total_epochs() != epochs) {
    throw Error(ErrorKind::Config, "warm-up + cosine epochs (" + std::to_string(schedule.total_epochs()) +
                                       ") must equal epochs (" + std::to_string(epochs) + ")");
  }
  schedule.validate();
  if (!std::isfinite(lambda_align) || lambda_align < 0) throw Error(ErrorKind::Config, "lambda_align must be >= 0");
  if (bank_slots < 1 || bank_k < 1) throw Error(ErrorKind::Config, "bank slots and k must be >= 1");
}

namespace {

std::vector<int> labels_of(const RecordSource& data, const std::vector<std::size_t>& indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (auto i : indices) {
    const auto y = data.label(i);
    if (!y) throw Error(ErrorKind::Data, "record " + std::to_string(i) + " has no label");
    labels.push_back(*y);
  }
  return labels;
}

Adjacency ring_adjacency(Eigen::Index n, bool self_loops) {
  return Adjacency::from(build_ring(static_cast<int>(n), self_loops));
}

}  // namespace

template <typename Scalar>
StepOutcome<Scalar> compute_step(const ModelParams<Scalar>& params, const TrainConfig& cfg, const MatrixX<Scalar>& Xs,
                                 const std::vector<int>& ys, const MatrixX<Scalar>& Xt, ModelParams<Scalar>& grads) {
  using Mat = MatrixX<Scalar>;
  const auto& mc = params.config;
  const bool need_target = cfg.use_grl || cfg.use_coral || cfg.use_mmd || cfg.mixed_graph;
  const Eigen::Index ns = Xs.cols(), nt = Xt.cols();

  Forward<Scalar> fs, ft, fm;
  Mat emb_s, emb_t, tap_s, tap_t, task_s;
  RowVectorX<Scalar> dom_s, dom_t;
  if (cfg.mixed_graph) {
    Mat X(Xs.rows(), ns + nt);
    X << Xs, Xt;
    fm = forward_full<Scalar>(X, params, ring_adjacency(ns + nt, mc.self_loops));
    const Mat& tap = fm.tap(mc.domain_tap);
    emb_s = fm.embeddings.leftCols(ns);
    tap_s = tap.leftCols(ns);
    tap_t = tap.rightCols(nt);
    task_s = fm.task_logits.leftCols(ns);
    dom_s = fm.domain_logits.leftCols(ns);
    dom_t = fm.domain_logits.rightCols(nt);
  } else {
    fs = forward_full<Scalar>(Xs, params, ring_adjacency(ns, mc.self_loops));
    emb_s = fs.embeddings;
    tap_s = fs.tap(mc.domain_tap);
    task_s = fs.task_logits;
    dom_s = fs.domain_logits;
    if (need_target) {
      ft = forward_full<Scalar>(Xt, params, ring_adjacency(nt, mc.self_loops));
      tap_t = ft.tap(mc.domain_tap);
      dom_t = ft.domain_logits;
    }
  }

  LossComponents c;
  OutputGrads<Scalar> up_s, up_t;
  const auto task = task_loss<Scalar>(task_s, ys);
  c.task = task.value;
  up_s.task_logits = task.grad;
  if (cfg.use_grl) {
    const auto ds = domain_loss<Scalar>(dom_s, 0);
    const auto dt = domain_loss<Scalar>(dom_t, 1);
    c.domain_source = ds.value;
    c.domain_target = dt.value;
    up_s.domain_logits = ds.grad;
    up_t.domain_logits = dt.grad;
  }
  const Scalar la = static_cast<Scalar>(cfg.lambda_align);
  bool coral_skipped = false;
  auto add_tap = [](OutputGrads<Scalar>& up, const Mat& g) {
    if (up.tap.size() == 0) {
      up.tap = g;
    } else {
      up.tap += g;
    }
  };
  if (cfg.use_coral) {
    if (ns >= 2 && nt >= 2) {
      const auto coral = coral_loss<Scalar>(tap_s, tap_t);
      c.coral = coral.value;
      add_tap(up_s, la * coral.grad_source);
      add_tap(up_t, la * coral.grad_target);
    } else {
      coral_skipped = true;
    }
  }
  if (cfg.use_mmd) {
    const auto mmd = mmd_loss<Scalar>(tap_s, tap_t, cfg.kernel);
    c.mmd = mmd.value;
    add_tap(up_s, la * mmd.grad_source);
    add_tap(up_t, la * mmd.grad_target);
  }

  if (cfg.mixed_graph) {
    OutputGrads<Scalar> up;
    up.task_logits = Mat::Zero(mc.num_classes, ns + nt);
    up.task_logits.leftCols(ns) = up_s.task_logits;
    if (cfg.use_grl) {
      up.domain_logits.resize(ns + nt);
      up.domain_logits << up_s.domain_logits, up_t.domain_logits;
    }
    if (up_s.tap.size() > 0) {
      up.tap.resize(mc.hidden_dim, ns + nt);
      up.tap << up_s.tap, up_t.tap;
    }
    backward_full(fm, params, up, grads);
  } else {
    backward_full(fs, params, up_s, grads);
    if (need_target && (up_t.domain_logits.size() > 0 || up_t.tap.size() > 0)) {
      backward_full(ft, params, up_t, grads);
    }
  }

  StepOutcome<Scalar> out{total_loss(c, cfg.lambda_align), std::move(emb_s)};
  out.report.coral_skipped = coral_skipped;
  out.report.stats = tap_t.size() > 0 ? batch_stats<Scalar>(tap_s, tap_t) : DomainBatchStats{};
  return out;
}

template StepOutcome<float> compute_step(const ModelParams<float>&, const TrainConfig&, const Eigen::MatrixXf&,
                                         const std::vector<int>&, const Eigen::MatrixXf&, ModelParams<float>&);
template StepOutcome<double> compute_step(const ModelParams<double>&, const TrainConfig&, const Eigen::MatrixXd&,
                                          const std::vector<int>&, const Eigen::MatrixXd&, ModelParams<double>&);

TrainResult train(const RecordSource& source, const RecordSource& target, const TrainConfig& cfg,
                  const RecordSource* eval, const EpochCallback& on_epoch) {
  cfg.validate();
  if (source.dim() != target.dim()) {
    throw Error(ErrorKind::Config, "source dim " + std::to_string(source.dim()) + " != target dim " +
                                       std::to_string(target.dim()));
  }
  if (source.size() < 2 || target.size() < 2) throw Error(ErrorKind::Data, "each domain needs at least 2 records");
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (!source.label(i)) throw Error(ErrorKind::Data, "source record " + std::to_string(i) + " is unlabeled");
  }
  if (eval && eval->dim() != source.dim()) throw Error(ErrorKind::Config, "evaluation set dim mismatch");

  ModelConfig mc = cfg.model;
  mc.input_dim = source.dim();
  mc.num_classes = source.num_classes();

  TrainResult result{ModelParams<float>::initialize(mc, cfg.seed),
                     PrototypeBank(mc.num_classes, cfg.bank_slots, mc.hidden_dim, cfg.bank_momentum),
                     {},
                     std::nullopt,
                     -1};
  auto& params = result.model;
  auto state = AdamWState<float>::for_params(params);
  const auto source_seed = derive_seed(cfg.seed, stream::kShuffleSource);
  const auto target_seed = derive_seed(cfg.seed, stream::kShuffleTarget);
  double best_accuracy = -1;
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto sb = make_batches(source, cfg.batch_size, source_seed, static_cast<std::uint64_t>(epoch));
    const auto tb = make_batches(target, cfg.batch_size, target_seed, static_cast<std::uint64_t>(epoch));
    const std::size_t steps = std::max(sb.size(), tb.size());
    for (std::size_t s = 0; s < steps; ++s) {
      const auto& is = sb[s % sb.size()];
      const auto& it = tb[s % tb.size()];
      const Eigen::MatrixXf Xs = gather(source, is);
      const Eigen::MatrixXf Xt = gather(target, it);
      const auto ys = labels_of(source, is);

      auto grads = ModelParams<float>::zeros(params.config);
      auto outcome = compute_step<float>(params, cfg, Xs, ys, Xt, grads);
      const double lr = cfg.schedule.per_step
                            ? lr_at_position(epoch + static_cast<double>(s) / static_cast<double>(steps), cfg.schedule)
                            : lr_at(epoch, cfg.schedule);
      adamw_step(params, grads, state, lr, cfg.optimizer);
      result.bank.update(outcome.source_embeddings, ys);
      result.history.rows.push_back({step++, epoch, std::move(outcome.report), lr});
    }
    if (eval) {
      const auto er = evaluate(params, *eval, cfg.batch_size);
      result.history.evaluations.push_back({epoch, er.metrics});
      if (er.metrics.accuracy > best_accuracy) {
        best_accuracy = er.metrics.accuracy;
        result.best_model = params;
        result.best_epoch = epoch;
      }
    }
    if (on_epoch) on_epoch(epoch, params, result.bank);
  }
  return result;
}

EvalResult evaluate(const ModelParams<float>& model, const RecordSource& data, int batch_size) {
  if (batch_size < 2) throw Error(ErrorKind::Config, "batch size must be >= 2");
  const std::size_t n = data.size();
  if (n == 0) throw Error(ErrorKind::Eval, "empty evaluation set");
  if (data.dim() != model.config.input_dim) {
    throw Error(ErrorKind::Config, "dataset dim " + std::to_string(data.dim()) + " does not match model input dim " +
                                       std::to_string(model.config.input_dim));
  }
  if (data.num_classes() != model.config.num_classes) {
    throw Error(ErrorKind::Config, "dataset has " + std::to_string(data.num_classes()) + " classes, model has " +
                                       std::to_string(model.config.num_classes));
  }
  if (n == 1 && model.config.use_gat) throw Error(ErrorKind::Eval, "a single record cannot form a ring");

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::vector<int> truth = labels_of(data, all);

  EvalResult r;
  r.predictions.resize(n);
  r.probabilities.resize(model.config.num_classes, static_cast<Eigen::Index>(n));
  const auto bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n;) {
    std::size_t end = std::min(n, start + bs);
    if (n - end == 1) end = n;
    const std::vector<std::size_t> idx(all.begin() + start, all.begin() + end);
    const Eigen::MatrixXf X = gather(data, idx);
    const Adjacency adj = model.config.use_gat ? ring_adjacency(X.cols(), model.config.self_loops) : Adjacency{};
    const auto f = forward_full<float>(X, model, adj);
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const Eigen::VectorXd logits = f.task_logits.col(static_cast<Eigen::Index>(c)).cast<double>();
      const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
      r.probabilities.col(static_cast<Eigen::Index>(idx[c])) = e / e.sum();
      Eigen::Index arg = 0;
      logits.maxCoeff(&arg);
      r.predictions[idx[c]] = static_cast<int>(arg);
    }
    start = end;
  }
  r.confusion = confusion(truth, r.predictions, model.config.num_classes);
  r.metrics = summarize(r.confusion, r.probabilities, truth);
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << "step,epoch,L_task,L_dom_s,L_dom_t,L_coral,L_mmd,L_total,lr\n";
  for (const auto& row : history.rows) {
    const auto& l = row.losses;
    out << row.step << ',' << row.epoch << ',' << fmt(l.task) << ',' << fmt(l.domain_source) << ','
        << fmt(l.domain_target) << ',' << fmt(l.coral) << ',' << fmt(l.mmd) << ',' << fmt(l.total) << ','
        << fmt(row.lr) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace uda
