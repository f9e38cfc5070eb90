// Command-line front end: gen, train, eval, infer, inspect.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "uda/bank.hpp"
#include "uda/checkpoint.hpp"
#include "uda/config.hpp"
#include "uda/data.hpp"
#include "uda/error.hpp"
#include "uda/metrics.hpp"
#include "uda/trainer.hpp"

namespace fs = std::filesystem;
using namespace uda;

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config_path, "key=value config file");
  app->add_option("--seed", o.seed, "RNG seed");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--set", o.overrides, "override any config key (key=value), repeatable");
}

// Built-in defaults < config file < command-line flags.
RunConfig resolve(const CommonOptions& o, const std::vector<std::pair<std::string, std::string>>& flag_settings) {
  RunConfig cfg;
  if (!o.config_path.empty()) apply_config_file(cfg, o.config_path);
  for (const auto& kv : o.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Usage, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (o.seed) cfg.set("seed", std::to_string(*o.seed));
  if (o.out) cfg.set("out", *o.out);
  for (const auto& [k, v] : flag_settings) cfg.set(k, v);
  cfg.finalize();
  return cfg;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::Io, "cannot create directory " + dir.string());
}

Dataset load_any(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::Io, "no such file " + path.string());
  return load_dataset(path, format_for(path));
}

int cmd_gen(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const auto [source, target] = generate_synthetic(cfg.synthetic);
  save_dataset(source, cfg.out / "source.bin", DatasetFormat::Bin);
  save_dataset(target, cfg.out / "target.bin", DatasetFormat::Bin);
  nlohmann::ordered_json manifest;
  for (const auto& [k, v] : cfg.settings()) manifest["config"][k] = v;
  manifest["seed"] = cfg.seed;
  manifest["source_records"] = source.size();
  manifest["target_records"] = target.size();
  std::ofstream out(cfg.out / "manifest.json");
  if (!out) throw Error(ErrorKind::Io, "cannot write manifest");
  out << manifest.dump(2) << '\n';
  std::cout << "wrote " << source.size() << " source and " << target.size() << " target records to "
            << cfg.out.string() << '\n';
  return 0;
}

void write_eval(const EvalResult& r, const fs::path& dir) {
  write_metrics_json(r.metrics, dir / "metrics.json");
  write_confusion_csv(r.confusion, dir / "confusion.csv");
}

int cmd_train(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  const fs::path source_path = cfg.source.empty() ? cfg.out / "source.bin" : cfg.source;
  const fs::path target_path = cfg.target.empty() ? cfg.out / "target.bin" : cfg.target;
  const Dataset source = load_any(source_path);
  const Dataset target = load_any(target_path);
  std::optional<Dataset> eval;
  if (!cfg.eval.empty()) {
    eval = load_any(cfg.eval);
  } else if (target.size() > 0 && target.fully_labeled()) {
    eval = target;
  }
  ensure_dir(cfg.out / "checkpoints");
  char name[64];
  auto on_epoch = [&](int epoch, const ModelParams<float>& model, const PrototypeBank&) {
    std::snprintf(name, sizeof(name), "epoch_%03d.udam", epoch);
    save_checkpoint(model, cfg.out / "checkpoints" / name);
  };
  const auto result = train(source, target, cfg.train, eval ? &*eval : nullptr, on_epoch);
  save_checkpoint(result.model, cfg.out / "model.udam");
  if (result.best_model) save_checkpoint(*result.best_model, cfg.out / "best.udam");
  save_bank(result.bank, cfg.out / "bank.udab");
  write_history_csv(result.history, cfg.out / "history.csv");
  std::cout << "trained " << cfg.train.epochs << " epochs, " << result.history.rows.size() << " steps\n";
  if (eval) {
    const auto r = evaluate(result.model, *eval, cfg.train.batch_size);
    write_eval(r, cfg.out);
    std::cout << "accuracy " << r.metrics.accuracy << " (best epoch " << result.best_epoch << ")\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& data) {
  const auto model = load_checkpoint(checkpoint);
  const Dataset ds = load_any(data);
  const auto r = evaluate(model, ds, cfg.train.batch_size);
  ensure_dir(cfg.out);
  write_eval(r, cfg.out);
  std::cout << "accuracy " << r.metrics.accuracy << " f1_macro " << r.metrics.f1 << " auc " << r.metrics.auc << '\n';
  return 0;
}

Eigen::VectorXf parse_floats(const std::string& text) {
  std::vector<float> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::stringstream cs(cell);
    float v;
    if (!(cs >> v)) throw Error(ErrorKind::Parse, "bad float '" + cell + "' in query");
    values.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXf>(values.data(), static_cast<Eigen::Index>(values.size()));
}

int cmd_infer(const std::string& checkpoint, const std::string& bank_path, const std::string& query,
              const std::string& query_file, int k) {
  if (k < 1) throw Error(ErrorKind::Usage, "k must be >= 1");
  if (query.empty() == query_file.empty()) throw Error(ErrorKind::Usage, "give exactly one of --query, --query-file");
  const auto model = load_checkpoint(checkpoint);
  if (!fs::exists(bank_path)) throw Error(ErrorKind::Inference, "missing bank file " + bank_path);
  const auto bank = load_bank(bank_path);
  std::string text = query;
  if (!query_file.empty()) {
    std::ifstream in(query_file);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + query_file);
    std::getline(in, text);
  }
  const Eigen::VectorXd probs = infer_single(parse_floats(text), model, bank, k);
  Eigen::Index arg = 0;
  probs.maxCoeff(&arg);
  for (Eigen::Index c = 0; c < probs.size(); ++c) std::printf("class %ld: %.9f\n", static_cast<long>(c), probs[c]);
  std::printf("argmax: %ld\n", static_cast<long>(arg));
  return 0;
}

int cmd_inspect(const std::string& checkpoint) {
  const auto p = load_checkpoint(checkpoint);
  const auto& c = p.config;
  const char* act[] = {"leaky_relu", "elu", "identity"};
  std::printf("input_dim      %d\nhidden_dim     %d\nclasses        %d\nheads          %d\ndomain_hidden  %d\n",
              c.input_dim, c.hidden_dim, c.num_classes, c.heads, c.domain_hidden);
  std::printf("lambda_grl     %g\nactivation     %s\ndomain_tap     %s\nself_loops     %s\nuse_gat        %s\n",
              c.lambda_grl, act[static_cast<int>(c.activation)],
              c.domain_tap == DomainTap::PostGat ? "post_gat" : "post_projection", c.self_loops ? "true" : "false",
              c.use_gat ? "true" : "false");
  std::printf("parameters     %zu\n", p.parameter_count());
  zip_tensors(
      [](const std::string& name, const auto& t) {
        std::printf("%-12s %6ld x %-6ld norm %.6g\n", name.c_str(), static_cast<long>(t.rows()),
                    static_cast<long>(t.cols()), static_cast<double>(t.norm()));
      },
      p);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised domain adaptation with batch graph attention"};
  app.require_subcommand(1);

  CommonOptions gen_o, train_o, eval_o;
  auto* gen = app.add_subcommand("gen", "generate synthetic source/target datasets");
  add_common(gen, gen_o);

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, train_o);
  std::optional<int> epochs, batch_size;
  bool no_grl = false, no_coral = false, no_mmd = false, no_gat = false;
  tr->add_option("--epochs", epochs, "number of epochs");
  tr->add_option("--batch-size", batch_size, "mini-batch size");
  tr->add_flag("--no-grl", no_grl, "disable the adversarial domain branch");
  tr->add_flag("--no-coral", no_coral, "disable CORAL");
  tr->add_flag("--no-mmd", no_mmd, "disable MMD");
  tr->add_flag("--no-gat", no_gat, "bypass the graph attention module");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a labeled dataset");
  add_common(ev, eval_o);
  std::string eval_ckpt, eval_data;
  std::optional<int> eval_bs;
  ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  ev->add_option("--data", eval_data, "labeled dataset (.bin or .csv)")->required();
  ev->add_option("--batch-size", eval_bs, "ring batch size");

  auto* inf = app.add_subcommand("infer", "classify a single query with the prototype bank");
  std::string inf_ckpt, inf_bank, inf_query, inf_query_file;
  int inf_k = 5;
  inf->add_option("--checkpoint", inf_ckpt, "model checkpoint")->required();
  inf->add_option("--bank", inf_bank, "prototype bank file")->required();
  inf->add_option("--query", inf_query, "comma-separated feature values");
  inf->add_option("--query-file", inf_query_file, "file whose first line holds the comma-separated features");
  inf->add_option("--k", inf_k, "number of prototypes to connect");

  auto* ins = app.add_subcommand("inspect", "summarize a checkpoint");
  std::string ins_ckpt;
  ins->add_option("checkpoint", ins_ckpt, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return cmd_gen(resolve(gen_o, {}));
    if (*tr) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (epochs) flags.emplace_back("epochs", std::to_string(*epochs));
      if (batch_size) flags.emplace_back("batch_size", std::to_string(*batch_size));
      if (no_grl) flags.emplace_back("use_grl", "false");
      if (no_coral) flags.emplace_back("use_coral", "false");
      if (no_mmd) flags.emplace_back("use_mmd", "false");
      if (no_gat) flags.emplace_back("use_gat", "false");
      return cmd_train(resolve(train_o, flags));
    }
    if (*ev) {
      std::vector<std::pair<std::string, std::string>> flags;
      if (eval_bs) flags.emplace_back("batch_size", std::to_string(*eval_bs));
      return cmd_eval(resolve(eval_o, flags), eval_ckpt, eval_data);
    }
    if (*inf) return cmd_infer(inf_ckpt, inf_bank, inf_query, inf_query_file, inf_k);
    if (*ins) return cmd_inspect(ins_ckpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
