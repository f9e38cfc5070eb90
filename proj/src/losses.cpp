#include "uda/losses.hpp"

namespace uda {

LossReport total_loss(const LossComponents& c, double lambda_align) {
  const std::pair<const char*, double> named[] = {{"task", c.task},
                                                  {"domain_source", c.domain_source},
                                                  {"domain_target", c.domain_target},
                                                  {"coral", c.coral},
                                                  {"mmd", c.mmd},
                                                  {"lambda_align", lambda_align}};
  for (const auto& [name, value] : named) {
    if (!std::isfinite(value)) throw Error(ErrorKind::Numeric, std::string("non-finite loss component ") + name);
  }
  LossReport r;
  r.task = c.task;
  r.domain_source = c.domain_source;
  r.domain_target = c.domain_target;
  r.coral = c.coral;
  r.mmd = c.mmd;
  r.lambda_align = lambda_align;
  r.total = c.task + c.domain_source + c.domain_target + lambda_align * (c.coral + c.mmd);
  return r;
}

}  // namespace uda
