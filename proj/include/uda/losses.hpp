#ifndef UDA_LOSSES_HPP
#define UDA_LOSSES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "uda/error.hpp"
#include "uda/model.hpp"

namespace uda {

// All feature batches are (feature dim) x (batch size): samples in columns.

template <typename Scalar>
struct LossGrad {
  Scalar value = 0;
  MatrixX<Scalar> grad;
};

template <typename Scalar>
struct PairLossGrad {
  Scalar value = 0;
  MatrixX<Scalar> grad_source;
  MatrixX<Scalar> grad_target;
};

// Mean cross-entropy of softmax(logits) against integer labels.
template <typename Scalar>
LossGrad<Scalar> task_loss(const MatrixX<Scalar>& logits, const std::vector<int>& labels) {
  const Eigen::Index n = logits.cols();
  if (n == 0) throw Error(ErrorKind::Loss, "task loss on an empty batch");
  if (static_cast<Eigen::Index>(labels.size()) != n) throw Error(ErrorKind::Shape, "labels and logits disagree");
  LossGrad<Scalar> out;
  out.grad.resize(logits.rows(), n);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= logits.rows()) throw Error(ErrorKind::Range, "label " + std::to_string(y) + " out of range");
    const Scalar m = logits.col(i).maxCoeff();
    const VectorX<Scalar> e = (logits.col(i).array() - m).exp();
    const Scalar z = e.sum();
    out.value += (std::log(z) + m - logits(y, i)) * inv_n;
    out.grad.col(i) = e / z;
    out.grad(y, i) -= Scalar(1);
  }
  out.grad *= inv_n;
  return out;
}

// Mean binary cross-entropy with logits against a constant domain label,
// loss = max(z, 0) - z*y + log1p(exp(-|z|)).
template <typename Scalar>
LossGrad<Scalar> domain_loss(const RowVectorX<Scalar>& logits, int domain_label) {
  const Eigen::Index n = logits.size();
  if (n == 0) throw Error(ErrorKind::Loss, "domain loss on an empty batch");
  const Scalar y = domain_label ? Scalar(1) : Scalar(0);
  LossGrad<Scalar> out;
  out.grad.resize(1, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar z = logits[i];
    out.value += std::max(z, Scalar(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
    const Scalar sig = z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z)) : std::exp(z) / (Scalar(1) + std::exp(z));
    out.grad(0, i) = (sig - y) / static_cast<Scalar>(n);
  }
  out.value /= static_cast<Scalar>(n);
  return out;
}

// Sample covariance with 1/(n-1) normalization.
template <typename Scalar>
MatrixX<Scalar> covariance(const MatrixX<Scalar>& F) {
  if (F.cols() < 2) throw Error(ErrorKind::Loss, "covariance needs at least 2 samples");
  const MatrixX<Scalar> centered = F.colwise() - F.rowwise().mean();
  return (centered * centered.transpose()) / static_cast<Scalar>(F.cols() - 1);
}

// (1 / 4d^2) * ||C_s - C_t||_F^2.
template <typename Scalar>
PairLossGrad<Scalar> coral_loss(const MatrixX<Scalar>& Fs, const MatrixX<Scalar>& Ft) {
  if (Fs.cols() < 2 || Ft.cols() < 2) throw Error(ErrorKind::Loss, "CORAL needs at least 2 samples per domain");
  if (Fs.rows() != Ft.rows()) throw Error(ErrorKind::Shape, "CORAL feature dims differ");
  const Scalar d = static_cast<Scalar>(Fs.rows());
  const MatrixX<Scalar> cs = Fs.colwise() - Fs.rowwise().mean();
  const MatrixX<Scalar> ct = Ft.colwise() - Ft.rowwise().mean();
  const Scalar ns1 = static_cast<Scalar>(Fs.cols() - 1), nt1 = static_cast<Scalar>(Ft.cols() - 1);
  const MatrixX<Scalar> diff = (cs * cs.transpose()) / ns1 - (ct * ct.transpose()) / nt1;
  PairLossGrad<Scalar> out;
  out.value = diff.squaredNorm() / (Scalar(4) * d * d);
  // dL/dC_s = diff / (2 d^2); the centering projection is absorbed because
  // the centered columns already sum to zero.
  const MatrixX<Scalar> dC = diff / (Scalar(2) * d * d);
  out.grad_source = (Scalar(2) / ns1) * dC * cs;
  out.grad_target = (Scalar(-2) / nt1) * dC * ct;
  return out;
}

enum class MmdEstimator { Biased, Unbiased };

struct KernelConfig {
  // Empty: median heuristic over the joint batch, recomputed per call.
  std::optional<double> fixed_bandwidth;
  MmdEstimator estimator = MmdEstimator::Biased;
};

template <typename Scalar>
MatrixX<Scalar> squared_distances(const MatrixX<Scalar>& A, const MatrixX<Scalar>& B) {
  const VectorX<Scalar> na = A.colwise().squaredNorm().transpose();
  const RowVectorX<Scalar> nb = B.colwise().squaredNorm();
  MatrixX<Scalar> D = (-Scalar(2) * (A.transpose() * B)).eval();
  D.colwise() += na;
  D.rowwise() += nb;
  return D.cwiseMax(Scalar(0));
}

// sigma = sqrt(median squared distance over distinct pairs of the joint
// batch); falls back to 1.0 when every pair coincides.
template <typename Scalar>
double median_bandwidth(const MatrixX<Scalar>& Fs, const MatrixX<Scalar>& Ft) {
  MatrixX<Scalar> joint(Fs.rows(), Fs.cols() + Ft.cols());
  joint << Fs, Ft;
  const MatrixX<Scalar> D = squared_distances(joint, joint);
  std::vector<double> pairs;
  for (Eigen::Index j = 1; j < D.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) pairs.push_back(static_cast<double>(D(i, j)));
  }
  if (pairs.empty()) return 1.0;
  std::sort(pairs.begin(), pairs.end());
  const std::size_t m = pairs.size();
  const double med = m % 2 ? pairs[m / 2] : 0.5 * (pairs[m / 2 - 1] + pairs[m / 2]);
  return med > 0.0 ? std::sqrt(med) : 1.0;
}

template <typename Scalar>
struct MmdResult : PairLossGrad<Scalar> {
  double bandwidth = 1.0;
};

// Squared RKHS distance between kernel mean embeddings with the Gaussian RBF
// kernel k(x, y) = exp(-||x - y||^2 / (2 sigma^2)). The bandwidth is a
// constant for differentiation.
template <typename Scalar>
MmdResult<Scalar> mmd_loss(const MatrixX<Scalar>& Fs, const MatrixX<Scalar>& Ft, const KernelConfig& kernel = {}) {
  const Eigen::Index ns = Fs.cols(), nt = Ft.cols();
  if (ns < 1 || nt < 1) throw Error(ErrorKind::Loss, "MMD needs at least one sample per domain");
  if (Fs.rows() != Ft.rows()) throw Error(ErrorKind::Shape, "MMD feature dims differ");
  const bool unbiased = kernel.estimator == MmdEstimator::Unbiased;
  if (unbiased && (ns < 2 || nt < 2)) throw Error(ErrorKind::Loss, "unbiased MMD needs at least 2 samples per domain");
  MmdResult<Scalar> out;
  if (kernel.fixed_bandwidth) {
    if (!(*kernel.fixed_bandwidth > 0.0)) throw Error(ErrorKind::Numeric, "MMD bandwidth must be positive");
    out.bandwidth = *kernel.fixed_bandwidth;
  } else {
    out.bandwidth = median_bandwidth(Fs, Ft);
  }
  const Scalar inv_two_var = Scalar(1) / static_cast<Scalar>(2.0 * out.bandwidth * out.bandwidth);
  const Scalar inv_var = Scalar(2) * inv_two_var;
  auto gram = [&](const MatrixX<Scalar>& A, const MatrixX<Scalar>& B) {
    return (-inv_two_var * squared_distances(A, B)).array().exp().matrix().eval();
  };
  MatrixX<Scalar> Kss = gram(Fs, Fs), Ktt = gram(Ft, Ft);
  const MatrixX<Scalar> Kst = gram(Fs, Ft);
  Scalar ws = Scalar(1) / static_cast<Scalar>(ns * ns), wt = Scalar(1) / static_cast<Scalar>(nt * nt);
  if (unbiased) {
    Kss.diagonal().setZero();
    Ktt.diagonal().setZero();
    ws = Scalar(1) / static_cast<Scalar>(ns * (ns - 1));
    wt = Scalar(1) / static_cast<Scalar>(nt * (nt - 1));
  }
  const Scalar wst = Scalar(2) / static_cast<Scalar>(ns * nt);
  out.value = ws * Kss.sum() + wt * Ktt.sum() - wst * Kst.sum();

  // d/da k(a, b) = -k(a, b) (a - b) / sigma^2.
  auto self_grad = [&](const MatrixX<Scalar>& F, const MatrixX<Scalar>& K, Scalar w) {
    const VectorX<Scalar> row_sums = K.rowwise().sum();
    return (-Scalar(2) * w * inv_var * (F * row_sums.asDiagonal() - F * K)).eval();
  };
  out.grad_source = self_grad(Fs, Kss, ws);
  out.grad_target = self_grad(Ft, Ktt, wt);
  const VectorX<Scalar> st_rows = Kst.rowwise().sum();
  const VectorX<Scalar> st_cols = Kst.colwise().sum().transpose();
  out.grad_source += wst * inv_var * (Fs * st_rows.asDiagonal() - Ft * Kst.transpose());
  out.grad_target += wst * inv_var * (Ft * st_cols.asDiagonal() - Fs * Kst);
  return out;
}

// Second-order domain statistics of one step.
struct DomainBatchStats {
  Eigen::MatrixXd cov_source, cov_target;
  Eigen::VectorXd mean_source, mean_target;
  int n_source = 0;
  int n_target = 0;
};

template <typename Scalar>
DomainBatchStats batch_stats(const MatrixX<Scalar>& Fs, const MatrixX<Scalar>& Ft) {
  DomainBatchStats s;
  s.n_source = static_cast<int>(Fs.cols());
  s.n_target = static_cast<int>(Ft.cols());
  s.mean_source = Fs.rowwise().mean().template cast<double>();
  s.mean_target = Ft.rowwise().mean().template cast<double>();
  if (Fs.cols() >= 2) s.cov_source = covariance(Fs).template cast<double>();
  if (Ft.cols() >= 2) s.cov_target = covariance(Ft).template cast<double>();
  return s;
}

struct LossComponents {
  double task = 0;
  double domain_source = 0;
  double domain_target = 0;
  double coral = 0;
  double mmd = 0;
};

struct LossReport {
  double task = 0;
  double domain_source = 0;
  double domain_target = 0;
  double coral = 0;
  double mmd = 0;
  double total = 0;
  double lambda_align = 1.0;
  bool coral_skipped = false;
  DomainBatchStats stats;
};

// L_total = L_task + L_domain_s + L_domain_t + lambda_align * (L_CORAL + L_MMD).
LossReport total_loss(const LossComponents& components, double lambda_align);

}  // namespace uda

#endif  // UDA_LOSSES_HPP
