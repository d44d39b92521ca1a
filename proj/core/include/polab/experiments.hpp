#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace polab {

// Loads and syntax-checks a config file (io_error if unreadable,
// config_error if not valid JSON).
nlohmann::json load_config(const std::string& path);

struct RunOptions {
  std::optional<uint64_t> seed_override;
  bool quiet = false;
};

struct RunSummary {
  std::string kind;
  bool pass = true;  // theorem kinds: all claims passed
  std::vector<std::string> artifacts;
  std::string message;
};

// Validates the config (config_error on any unknown key, bad type, or bad
// value), runs the experiment, and writes its artifacts plus manifest.json
// into out_dir. Reruns with the same config and seed produce byte-identical
// artifacts.
RunSummary run_experiment(const nlohmann::json& config,
                          const std::string& out_dir, const RunOptions& opts);

// Human-readable description of every supported algorithm with its
// hyperparameter keys and defaults.
std::string catalog_text();

}  // namespace polab
