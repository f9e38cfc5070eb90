#ifndef UDA_OPTIM_HPP
#define UDA_OPTIM_HPP

#include <cmath>
#include <string>

#include "uda/error.hpp"
#include "uda/model.hpp"

namespace uda {

// Linear warm-up to lr_max over warmup_epochs, then cosine annealing to
// eta_min over cosine_epochs.
struct ScheduleConfig {
  double lr_max = 1e-4;
  int warmup_epochs = 5;
  int cosine_epochs = 27;
  double eta_min = 0.0;
  bool per_step = false;

  int total_epochs() const { return warmup_epochs + cosine_epochs; }
  void validate() const;
};

// Warm-up epoch e: lr_max * (e + 1) / warmup_epochs.
// Cosine epoch e: eta_min + (lr_max - eta_min) * (1 + cos(pi * (e - warmup) / cosine)) / 2.
double lr_at(int epoch, const ScheduleConfig& cfg);

// Same curve at a fractional epoch position, for per-step scheduling.
double lr_at_position(double position, const ScheduleConfig& cfg);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

template <typename Scalar>
struct AdamWState {
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;
  long step = 0;

  static AdamWState for_params(const ModelParams<Scalar>& params) {
    return {ModelParams<Scalar>::zeros(params.config), ModelParams<Scalar>::zeros(params.config), 0};
  }
};

// Elementwise AdamW on a single tensor; t is the already-incremented step.
template <typename Derived>
void adamw_update(Eigen::MatrixBase<Derived>& theta, const Eigen::MatrixBase<Derived>& grad,
                  Eigen::MatrixBase<Derived>& m, Eigen::MatrixBase<Derived>& v, long t, double lr,
                  const AdamWConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  const Scalar b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar bc1 = static_cast<Scalar>(1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const Scalar bc2 = static_cast<Scalar>(1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  const Scalar step = static_cast<Scalar>(lr);
  const Scalar decay = static_cast<Scalar>(1.0 - lr * cfg.weight_decay);
  const Scalar eps = static_cast<Scalar>(cfg.eps);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const Scalar g = grad.derived().data()[i];
    Scalar& mi = m.derived().data()[i];
    Scalar& vi = v.derived().data()[i];
    mi = b1 * mi + (Scalar(1) - b1) * g;
    vi = b2 * vi + (Scalar(1) - b2) * g * g;
    const Scalar m_hat = mi / bc1;
    const Scalar v_hat = vi / bc2;
    // theta - lr * wd * theta == theta * (1 - lr * wd): decay stays decoupled
    // from the adaptive term.
    Scalar& th = theta.derived().data()[i];
    th = th * decay - step * (m_hat / (std::sqrt(v_hat) + eps));
  }
}

template <typename Scalar>
void adamw_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamWState<Scalar>& state, double lr,
                const AdamWConfig& cfg) {
  zip_tensors(
      [&](const std::string& name, const auto& g, auto&...) {
        if (!g.allFinite()) throw Error(ErrorKind::Numeric, "non-finite gradient in tensor " + name);
      },
      grads);
  const long t = ++state.step;
  zip_tensors([&](const std::string&, auto& theta, const auto& g, auto& m,
                  auto& v) { adamw_update(theta, g, m, v, t, lr, cfg); },
              params, grads, state.m, state.v);
}

}  // namespace uda

#endif  // UDA_OPTIM_HPP
