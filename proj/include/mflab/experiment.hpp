#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mflab/io.hpp"
#include "mflab/model.hpp"

namespace mflab {

inline constexpr const char* kVersion = "0.1.0";

// One schema default: path, value and the reason the value was chosen.
struct DefaultEntry {
  std::string path;
  json value;
  std::string rationale;
};
const std::vector<DefaultEntry>& config_defaults();

// Parses config text; syntax errors become ConfigError with the byte offset.
json parse_config_text(const std::string& text);

// Validated configuration with every default filled in.
struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  json resolved;  // full tree after defaults

  const json& at(const std::string& dotted_path) const;
};

// Throws ConfigError naming the offending field.
ExperimentConfig resolve_config(const json& user);
ModelSpec model_from_config(const json& model_block, const std::filesystem::path& base_dir = {});

struct Invariant {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunResult {
  bool all_pass = false;
  std::vector<Invariant> invariants;
  json manifest;
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::filesystem::path base_dir;  // resolves relative dataset paths
};

// Executes the experiment and writes CSVs, manifest.json and summary.md into `out`.
RunResult run_experiment(const json& user_config, const std::filesystem::path& out, const RunOverrides& overrides = {});

// Re-renders summary.md of a finished run; ConfigError when the manifest is missing.
std::string render_report(const std::filesystem::path& result_dir);

}  // namespace mflab
