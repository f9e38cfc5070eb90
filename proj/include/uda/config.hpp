#ifndef UDA_CONFIG_HPP
#define UDA_CONFIG_HPP

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uda/data.hpp"
#include "uda/trainer.hpp"

namespace uda {

// Everything a CLI invocation can configure. Built-in defaults reproduce the
// reference training setup (32 epochs, AdamW at 1e-4, 5 + 27 schedule, four
// heads, batch 64, both lambdas 1.0).
struct RunConfig {
  SyntheticConfig synthetic;
  TrainConfig train;
  std::uint64_t seed = 7;
  std::filesystem::path source;
  std::filesystem::path target;
  std::filesystem::path eval;
  std::filesystem::path out = ".";

  RunConfig();

  // Throws a config error for unknown keys or unparseable values.
  void set(std::string_view key, std::string_view value);
  bool was_set(std::string_view key) const { return explicit_keys_.count(std::string(key)) > 0; }

  // Resolves derived values: seeds, and the schedule split when only
  // `epochs` was changed (warm-up clamps to epochs, cosine takes the rest).
  void finalize();

  // Canonical key=value echo of every setting, in a fixed order.
  std::vector<std::pair<std::string, std::string>> settings() const;

 private:
  std::set<std::string> explicit_keys_;
};

// Plain-text config: one key=value per line, '#' starts a comment.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);
void apply_config_text(RunConfig& config, std::string_view text);

}  // namespace uda

#endif  // UDA_CONFIG_HPP
