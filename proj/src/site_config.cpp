#include "psij/site_config.hpp"

#include <cstdlib>
#include <fstream>

#include "psij/errors.hpp"
#include "psij/job_model.hpp"

namespace psij {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::chrono::milliseconds duration_field(const json& j, const std::string& where) {
  if (!j.is_string()) throw ParseError(where + ": expected an ISO-8601 duration string");
  const auto d = parse_iso8601_duration(j.get<std::string>());
  if (!d) throw ParseError(where + ": invalid ISO-8601 duration '" + j.get<std::string>() + "'");
  return *d;
}

std::map<std::string, std::string> string_map(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object of strings");
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ParseError(where + "." + k + ": expected a string");
    out[k] = v.get<std::string>();
  }
  return out;
}

ExecutorEntry parse_entry(const std::string& key, const json& j) {
  const std::string where = "executors." + key;
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  ExecutorEntry e;
  e.executor = key;
  for (const auto& [field, v] : j.items()) {
    const std::string at = where + "." + field;
    if (field == "executor") {
      if (!v.is_string()) throw ParseError(at + ": expected a string");
      e.executor = v.get<std::string>();
    } else if (field == "poll_interval") {
      e.config.poll_interval = duration_field(v, at);
    } else if (field == "submit_window") {
      e.config.submit_window = duration_field(v, at);
    } else if (field == "command_timeout") {
      e.config.command_timeout = duration_field(v, at);
    } else if (field == "command_prefix") {
      if (!v.is_array()) throw ParseError(at + ": expected an array of strings");
      for (const auto& t : v) {
        if (!t.is_string()) throw ParseError(at + ": expected an array of strings");
        e.config.command_prefix.push_back(t.get<std::string>());
      }
    } else if (field == "work_directory") {
      if (!v.is_string()) throw ParseError(at + ": expected a string");
      e.config.work_directory = v.get<std::string>();
    } else if (field == "failure_limit") {
      if (!v.is_number_integer()) throw ParseError(at + ": expected an integer");
      e.config.failure_limit = v.get<int>();
    } else if (field == "environment") {
      e.config.environment = string_map(v, at);
    } else if (field == "options") {
      e.config.options = string_map(v, at);
    } else {
      throw ParseError(at + ": unknown field");
    }
  }
  if (auto problems = e.config.validate(); !problems.empty()) throw ParseError(where + ": " + problems.front());
  return e;
}

}  // namespace

ExecutorEntry SiteConfig::resolve(const std::string& name) const {
  if (auto it = executors.find(name); it != executors.end()) return it->second;
  return ExecutorEntry{name, {}};
}

SiteConfig parse_site_config(const json& j) {
  if (!j.is_object()) throw ParseError("site config: expected a JSON object");
  SiteConfig c;
  for (const auto& [field, v] : j.items()) {
    if (field == "default_executor") {
      if (!v.is_string()) throw ParseError("default_executor: expected a string");
      c.default_executor = v.get<std::string>();
    } else if (field == "executors") {
      if (!v.is_object()) throw ParseError("executors: expected an object");
      for (const auto& [name, entry] : v.items()) c.executors[name] = parse_entry(name, entry);
    } else {
      throw ParseError(field + ": unknown field");
    }
  }
  return c;
}

SiteConfig load_site_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return {};
  std::ifstream in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_site_config(j);
}

fs::path default_site_config_path() {
  if (const char* p = std::getenv("PSIJ_KIT_CONFIG"); p && *p) return p;
  if (const char* x = std::getenv("XDG_CONFIG_HOME"); x && *x) return fs::path(x) / "psij-kit" / "config.json";
  if (const char* h = std::getenv("HOME"); h && *h) return fs::path(h) / ".config" / "psij-kit" / "config.json";
  return "psij-kit-config.json";
}

}  // namespace psij
