#pragma once

// Run configuration: a plain key = value file with [section] headers.
//
//   [provider.g]          one section per provider id
//   dialect = openai_compat
//   endpoint = https://api.example.com/v1
//   model = some-model
//   api_key_env = EXAMPLE_API_KEY
//
//   [roles]
//   abstract = g
//   check = g
//   conclude = g
//
// Lines starting with '#' or ';' are comments. Unknown sections or keys are
// errors. Secrets never appear here, only the names of environment variables.

#include "unac/checking.hpp"
#include "unac/provider.hpp"
#include "unac/toolclient.hpp"

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace unac {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::vector<provider::ProviderConfig> providers;
  provider::StageRoles roles;
  PipelineConfig pipeline;
  std::string tool_endpoint;  // empty: no tool server
  int tool_timeout_ms = 30000;
  bool cache_enabled = true;
  std::filesystem::path cache_dir = ".unac_cache";
  int workers = 4;
  bool allow_nonzero_temperature = false;
  std::filesystem::path output_root = "runs";
  // Directory relative paths in the file resolve against.
  std::filesystem::path base_dir;
};

/// Parses config text. Relative paths (scripted fixtures, cache and output
/// directories) resolve against base_dir. Throws ConfigError naming the line.
RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});

/// Throws ConfigError naming the path when it cannot be read.
RunConfig load_config(const std::filesystem::path& path);

/// Applies one "section.key" = value setting, as a command-line override would.
/// Provider keys use "provider.<id>.<key>". Throws ConfigError.
void apply_setting(RunConfig& config, const std::string& dotted_key, const std::string& value);

/// Cross-field checks: providers valid, roles bound to known providers.
void validate(const RunConfig& config);

/// Canonical text form, loadable by parse_config.
std::string render_config(const RunConfig& config);

/// Builds every provider with its backend (reading API keys from the
/// environment) and the response cache when enabled.
provider::ProviderSet build_providers(const RunConfig& config);

/// HttpToolClient for the configured endpoint, NullToolClient without one.
std::unique_ptr<tools::ToolClient> build_tool_client(const RunConfig& config);

/// Parses "#rrggbb,#rrggbb,...".
std::vector<Rgb> parse_hues(std::string_view s);

}  // namespace unac
