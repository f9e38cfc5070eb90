#include "uda/optim.hpp"

#include <algorithm>
#include <numbers>

namespace uda {

void ScheduleConfig::validate() const {
  if (warmup_epochs < 0 || cosine_epochs < 0 || total_epochs() < 1) {
    throw Error(ErrorKind::Schedule, "schedule needs a non-negative warm-up and cosine length, total >= 1");
  }
  if (!(lr_max > 0.0) || !std::isfinite(lr_max) || !std::isfinite(eta_min) || eta_min < 0.0) {
    throw Error(ErrorKind::Schedule, "lr_max must be positive and eta_min non-negative");
  }
}

double lr_at(int epoch, const ScheduleConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.total_epochs()) {
    throw Error(ErrorKind::Schedule, "epoch " + std::to_string(epoch) + " outside schedule of " +
                                         std::to_string(cfg.total_epochs()) + " epochs");
  }
  if (epoch < cfg.warmup_epochs) return cfg.lr_max * (static_cast<double>(epoch + 1) / cfg.warmup_epochs);
  const double phase = std::numbers::pi * (epoch - cfg.warmup_epochs) / cfg.cosine_epochs;
  return cfg.eta_min + 0.5 * (cfg.lr_max - cfg.eta_min) * (1.0 + std::cos(phase));
}

double lr_at_position(double position, const ScheduleConfig& cfg) {
  if (!(position >= 0.0) || position >= cfg.total_epochs()) {
    throw Error(ErrorKind::Schedule, "position outside schedule");
  }
  if (position < cfg.warmup_epochs) {
    return cfg.lr_max * (std::min(position + 1.0, static_cast<double>(cfg.warmup_epochs)) / cfg.warmup_epochs);
  }
  const double phase = std::numbers::pi * (position - cfg.warmup_epochs) / cfg.cosine_epochs;
  return cfg.eta_min + 0.5 * (cfg.lr_max - cfg.eta_min) * (1.0 + std::cos(phase));
}

}  // namespace uda
