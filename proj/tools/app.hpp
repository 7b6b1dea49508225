#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace tess {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kNumerical = 1, kConfig = 2, kGate = 3 };

// Every recognised key with its default value.
json default_config();

// Defaults overlaid with the user's fields; throws ConfigError on unknown keys or wrong types and
// InadmissibleParams on an inadmissible model.
json resolve_config(const json& user);

// Sets the field named by key (dotted path or short alias such as kappa, box, hmax, seed) from the
// command-line text; numbers, booleans, JSON arrays and comma lists are recognised.
void apply_override(json& cfg, const std::string& key, const std::string& value);

struct Outcome {
  // Whether the experiment has a gate and whether it passed; soft gates never fail the run.
  bool gated = false;
  bool pass = true;
  json report;
};

// Runs cfg["experiment"], writing data CSVs, report JSON and manifest.json into cfg["output_dir"].
Outcome run(const json& cfg);

// Re-runs the configuration recorded in a manifest into out_dir (the manifest's own directory when empty)
// and compares the output hashes. Returns true when every output is byte-identical.
bool replay(const std::string& manifest_path, const std::string& out_dir, json* comparison = nullptr);

// Command-line entry point; returns the process exit code.
int main_cli(int argc, char** argv);

}  // namespace tess
