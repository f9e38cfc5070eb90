#include "uda/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uda/error.hpp"

namespace uda {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::Config, "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_num(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value);
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string fmt(float v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Elu: return "elu";
    case Activation::Identity: return "identity";
  }
  return "leaky_relu";
}

}  // namespace

RunConfig::RunConfig() {
  train.model.hidden_dim = 512;
  train.model.heads = 4;
}

void RunConfig::set(std::string_view key_in, std::string_view value_in) {
  const std::string_view key = trim(key_in);
  const std::string_view value = trim(value_in);
  auto& t = train;
  auto& m = train.model;
  auto& s = synthetic;
  using Setter = std::function<void()>;
  const std::map<std::string_view, Setter> setters = {
      {"seed", [&] { seed = parse_num<std::uint64_t>(key, value); }},
      // synthetic data
      {"classes", [&] { s.num_classes = parse_num<int>(key, value); }},
      {"dim", [&] { s.dim = parse_num<int>(key, value); }},
      {"samples_per_class", [&] { s.samples_per_class = parse_num<int>(key, value); }},
      {"separation", [&] { s.separation = parse_num<double>(key, value); }},
      {"cov_scale", [&] { s.cov_scale = parse_num<double>(key, value); }},
      {"shift", [&] { s.shift = parse_num<double>(key, value); }},
      {"rotation", [&] { s.rotation = parse_num<double>(key, value); }},
      {"scale", [&] { s.scale = parse_num<double>(key, value); }},
      // model
      {"hidden_dim", [&] { m.hidden_dim = parse_num<int>(key, value); }},
      {"heads", [&] { m.heads = parse_num<int>(key, value); }},
      {"domain_hidden", [&] { m.domain_hidden = parse_num<int>(key, value); }},
      {"lambda_grl", [&] { m.lambda_grl = parse_num<double>(key, value); }},
      {"activation",
       [&] {
         if (value == "leaky_relu") m.activation = Activation::LeakyRelu;
         else if (value == "elu") m.activation = Activation::Elu;
         else if (value == "identity") m.activation = Activation::Identity;
         else bad_value(key, value);
       }},
      {"domain_tap",
       [&] {
         if (value == "post_gat") m.domain_tap = DomainTap::PostGat;
         else if (value == "post_projection") m.domain_tap = DomainTap::PostProjection;
         else bad_value(key, value);
       }},
      {"self_loops", [&] { m.self_loops = parse_bool(key, value); }},
      {"use_gat", [&] { m.use_gat = parse_bool(key, value); }},
      // training
      {"batch_size", [&] { t.batch_size = parse_num<int>(key, value); }},
      {"epochs", [&] { t.epochs = parse_num<int>(key, value); }},
      {"lambda_align", [&] { t.lambda_align = parse_num<double>(key, value); }},
      {"lr", [&] { t.schedule.lr_max = parse_num<double>(key, value); }},
      {"warmup_epochs", [&] { t.schedule.warmup_epochs = parse_num<int>(key, value); }},
      {"cosine_epochs", [&] { t.schedule.cosine_epochs = parse_num<int>(key, value); }},
      {"eta_min", [&] { t.schedule.eta_min = parse_num<double>(key, value); }},
      {"per_step_schedule", [&] { t.schedule.per_step = parse_bool(key, value); }},
      {"beta1", [&] { t.optimizer.beta1 = parse_num<double>(key, value); }},
      {"beta2", [&] { t.optimizer.beta2 = parse_num<double>(key, value); }},
      {"eps", [&] { t.optimizer.eps = parse_num<double>(key, value); }},
      {"weight_decay", [&] { t.optimizer.weight_decay = parse_num<double>(key, value); }},
      {"use_grl", [&] { t.use_grl = parse_bool(key, value); }},
      {"use_coral", [&] { t.use_coral = parse_bool(key, value); }},
      {"use_mmd", [&] { t.use_mmd = parse_bool(key, value); }},
      {"mixed_graph", [&] { t.mixed_graph = parse_bool(key, value); }},
      {"mmd_bandwidth",
       [&] {
         if (value == "median") {
           t.kernel.fixed_bandwidth.reset();
         } else {
           const double bw = parse_num<double>(key, value);
           if (!(bw > 0)) bad_value(key, value);
           t.kernel.fixed_bandwidth = bw;
         }
       }},
      {"mmd_estimator",
       [&] {
         if (value == "biased") t.kernel.estimator = MmdEstimator::Biased;
         else if (value == "unbiased") t.kernel.estimator = MmdEstimator::Unbiased;
         else bad_value(key, value);
       }},
      // prototype bank
      {"bank_slots", [&] { t.bank_slots = parse_num<int>(key, value); }},
      {"bank_momentum", [&] { t.bank_momentum = parse_num<float>(key, value); }},
      {"bank_k", [&] { t.bank_k = parse_num<int>(key, value); }},
      // paths
      {"source", [&] { source = std::string(value); }},
      {"target", [&] { target = std::string(value); }},
      {"eval", [&] { eval = std::string(value); }},
      {"out", [&] { out = std::string(value); }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
  it->second();
  explicit_keys_.insert(std::string(key));
}

void RunConfig::finalize() {
  synthetic.seed = seed;
  train.seed = seed;
  if (was_set("epochs") && !was_set("cosine_epochs")) {
    if (!was_set("warmup_epochs")) train.schedule.warmup_epochs = std::min(train.schedule.warmup_epochs, train.epochs);
    train.schedule.cosine_epochs = train.epochs - train.schedule.warmup_epochs;
  } else if (!was_set("epochs") && (was_set("warmup_epochs") || was_set("cosine_epochs"))) {
    train.epochs = train.schedule.total_epochs();
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::settings() const {
  const auto& t = train;
  const auto& m = train.model;
  const auto& s = synthetic;
  return {
      {"seed", std::to_string(seed)},
      {"classes", std::to_string(s.num_classes)},
      {"dim", std::to_string(s.dim)},
      {"samples_per_class", std::to_string(s.samples_per_class)},
      {"separation", fmt(s.separation)},
      {"cov_scale", fmt(s.cov_scale)},
      {"shift", fmt(s.shift)},
      {"rotation", fmt(s.rotation)},
      {"scale", fmt(s.scale)},
      {"hidden_dim", std::to_string(m.hidden_dim)},
      {"heads", std::to_string(m.heads)},
      {"domain_hidden", std::to_string(m.domain_hidden)},
      {"lambda_grl", fmt(m.lambda_grl)},
      {"activation", activation_name(m.activation)},
      {"domain_tap", m.domain_tap == DomainTap::PostGat ? "post_gat" : "post_projection"},
      {"self_loops", fmt(m.self_loops)},
      {"use_gat", fmt(m.use_gat)},
      {"batch_size", std::to_string(t.batch_size)},
      {"epochs", std::to_string(t.epochs)},
      {"lambda_align", fmt(t.lambda_align)},
      {"lr", fmt(t.schedule.lr_max)},
      {"warmup_epochs", std::to_string(t.schedule.warmup_epochs)},
      {"cosine_epochs", std::to_string(t.schedule.cosine_epochs)},
      {"eta_min", fmt(t.schedule.eta_min)},
      {"per_step_schedule", fmt(t.schedule.per_step)},
      {"beta1", fmt(t.optimizer.beta1)},
      {"beta2", fmt(t.optimizer.beta2)},
      {"eps", fmt(t.optimizer.eps)},
      {"weight_decay", fmt(t.optimizer.weight_decay)},
      {"use_grl", fmt(t.use_grl)},
      {"use_coral", fmt(t.use_coral)},
      {"use_mmd", fmt(t.use_mmd)},
      {"mixed_graph", fmt(t.mixed_graph)},
      {"mmd_bandwidth", t.kernel.fixed_bandwidth ? fmt(*t.kernel.fixed_bandwidth) : "median"},
      {"mmd_estimator", t.kernel.estimator == MmdEstimator::Biased ? "biased" : "unbiased"},
      {"bank_slots", std::to_string(t.bank_slots)},
      {"bank_momentum", fmt(t.bank_momentum)},
      {"bank_k", std::to_string(t.bank_k)},
      {"source", source.string()},
      {"target", target.string()},
      {"eval", eval.string()},
      {"out", out.string()},
  };
}

void apply_config_text(RunConfig& config, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    l = trim(l);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected key=value");
    }
    config.set(l.substr(0, eq), l.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

}  // namespace uda
