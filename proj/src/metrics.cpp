#include "uda/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include <json.hpp>

#include "uda/error.hpp"

namespace uda {

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes) {
  if (truth.size() != predicted.size()) throw Error(ErrorKind::Shape, "truth and prediction lengths differ");
  ConfusionMatrix cm = ConfusionMatrix::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= num_classes || predicted[i] < 0 || predicted[i] >= num_classes) {
      throw Error(ErrorKind::Range, "label out of range at sample " + std::to_string(i));
    }
    ++cm(truth[i], predicted[i]);
  }
  return cm;
}

double one_vs_rest_auc(const Eigen::VectorXd& class_scores, const std::vector<int>& truth, int positive_class) {
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return class_scores[a] < class_scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && class_scores[order[j + 1]] == class_scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t r = i; r <= j; ++r) rank[order[r]] = mid;
    i = j + 1;
  }
  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (truth[i] == positive_class) {
      pos += 1;
      rank_sum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) return std::nan("");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

Metrics summarize(const ConfusionMatrix& cm, const Eigen::MatrixXd& scores, const std::vector<int>& truth,
                  Averaging averaging) {
  const int C = static_cast<int>(cm.rows());
  Metrics m;
  m.n_samples = cm.sum();
  if (static_cast<std::int64_t>(truth.size()) != m.n_samples || scores.cols() != static_cast<Eigen::Index>(truth.size()) ||
      scores.rows() != C) {
    throw Error(ErrorKind::Shape, "confusion matrix, scores and labels disagree");
  }
  if (m.n_samples == 0) throw Error(ErrorKind::Eval, "no samples to summarize");
  m.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(m.n_samples);

  double p_sum = 0, r_sum = 0, f_sum = 0;
  int present = 0;
  for (int c = 0; c < C; ++c) {
    const auto support = cm.row(c).sum();
    const auto predicted = cm.col(c).sum();
    if (support == 0) {
      m.unsupported_classes.push_back(c);
      continue;
    }
    ++present;
    const double tp = static_cast<double>(cm(c, c));
    double precision = 0;
    if (predicted == 0) {
      m.unpredicted_classes.push_back(c);
    } else {
      precision = tp / static_cast<double>(predicted);
    }
    const double recall = tp / static_cast<double>(support);
    p_sum += precision;
    r_sum += recall;
    f_sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  if (averaging == Averaging::Micro) {
    // Single-label multiclass: micro P = micro R = micro F1 = accuracy.
    m.precision = m.recall = m.f1 = m.accuracy;
  } else {
    m.precision = p_sum / present;
    m.recall = r_sum / present;
    m.f1 = f_sum / present;
  }

  double auc_sum = 0;
  int auc_count = 0;
  for (int c = 0; c < C; ++c) {
    const double auc = one_vs_rest_auc(scores.row(c).transpose(), truth, c);
    if (!std::isnan(auc)) {
      auc_sum += auc;
      ++auc_count;
    }
  }
  m.auc_defined = auc_count > 0;
  m.auc = m.auc_defined ? auc_sum / auc_count : 0.5;
  return m;
}

void write_metrics_json(const Metrics& m, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["accuracy"] = m.accuracy;
  j["precision_macro"] = m.precision;
  j["recall_macro"] = m.recall;
  j["f1_macro"] = m.f1;
  j["auc_ovr_macro"] = m.auc;
  j["n_samples"] = m.n_samples;
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  for (Eigen::Index r = 0; r < cm.rows(); ++r) {
    for (Eigen::Index c = 0; c < cm.cols(); ++c) out << (c ? "," : "") << cm(r, c);
    out << '\n';
  }
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::vector<std::int64_t>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    rows.emplace_back();
    while (std::getline(ss, cell, ',')) {
      std::int64_t v = 0;
      const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || end != cell.data() + cell.size()) throw Error(ErrorKind::Parse, "bad count '" + cell + "'");
      rows.back().push_back(v);
    }
  }
  ConfusionMatrix cm(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.size()) throw Error(ErrorKind::Parse, "confusion matrix is not square");
    for (std::size_t c = 0; c < rows.size(); ++c) cm(r, c) = rows[r][c];
  }
  return cm;
}

}  // namespace uda
