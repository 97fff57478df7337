#pragma once

// Per-site executor configuration file:
//
//   {
//     "default_executor": "cluster",
//     "executors": {
//       "cluster": {
//         "executor": "slurm",            // registry name; defaults to the key
//         "poll_interval": "PT10S",       // ISO-8601 durations
//         "submit_window": "PT0.1S",
//         "command_timeout": "PT60S",
//         "command_prefix": ["ssh", "login1"],
//         "work_directory": "/scratch/me/psij",
//         "failure_limit": 10,
//         "environment": {"SLURM_CONF": "/etc/slurm/slurm.conf"},
//         "options": {"profile": "pbs"}
//       }
//     }
//   }

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "json.hpp"
#include "psij/executor.hpp"

namespace psij {

struct ExecutorEntry {
  std::string executor;  // registry name
  ExecutorConfig config;
};

struct SiteConfig {
  std::optional<std::string> default_executor;
  std::map<std::string, ExecutorEntry> executors;

  /// The configured entry for `name`, or the registry executor of that name
  /// with default settings.
  ExecutorEntry resolve(const std::string& name) const;
};

/// Throws ParseError naming the offending field.
SiteConfig parse_site_config(const nlohmann::json& j);

/// Missing file yields an empty configuration. Throws ParseError.
SiteConfig load_site_config(const std::filesystem::path& path);

/// $PSIJ_KIT_CONFIG, else $XDG_CONFIG_HOME/psij-kit/config.json, else
/// ~/.config/psij-kit/config.json.
std::filesystem::path default_site_config_path();

}  // namespace psij
