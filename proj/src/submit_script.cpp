#include "psij/submit_script.hpp"

#include <fstream>
#include <sstream>

#include "psij/errors.hpp"

namespace psij {

namespace {

bool has_space(const std::string& v) { return v.find_first_of(" \t") != std::string::npos; }

std::string directive_value(const std::string& field, const std::string& v) {
  if (v.find_first_of("\n\r\"") != std::string::npos) {
    throw UnrenderableAttribute(field + ": value contains a newline or double quote");
  }
  return has_space(v) ? "\"" + v + "\"" : v;
}

bool legal_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) return false;
  }
  return key.front() != '-';
}

// Custom attribute keys may be scoped as "<scheduler>.<key>"; scoped keys
// for other schedulers are skipped.
std::vector<std::pair<std::string, std::string>> custom_for(const JobSpec& spec, const std::string& scheduler) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [raw_key, value] : spec.attributes.custom) {
    std::string key = raw_key;
    const auto dot = raw_key.find('.');
    if (dot != std::string::npos) {
      const std::string scope = raw_key.substr(0, dot);
      if (scope == "slurm" || scope == "pbs" || scope == "lsf") {
        if (scope != scheduler) continue;
        key = raw_key.substr(dot + 1);
      }
    }
    if (!legal_key(key)) {
      throw UnrenderableAttribute("custom attribute key '" + raw_key + "' cannot be rendered as a directive");
    }
    out.emplace_back(key, directive_value("attributes.custom." + raw_key, value));
  }
  return out;
}

bool exclusive(const JobSpec& spec) {
  return spec.resources.node_count && spec.resources.exclusive_node_use.value_or(true);
}

std::string slurm_custom(const std::string& key, const std::string& value) {
  if (key.size() == 1) return value.empty() ? "-" + key : "-" + key + " " + value;
  return value.empty() ? "--" + key : "--" + key + "=" + value;
}

std::vector<std::string> slurm_directives(const JobSpec& spec, const std::string& p, const ScriptContext& ctx) {
  const auto& r = spec.resources;
  const auto& a = spec.attributes;
  std::vector<std::string> d;
  if (spec.name) d.push_back(p + " --job-name=" + directive_value("name", *spec.name));
  if (r.node_count) d.push_back(p + " --nodes=" + std::to_string(*r.node_count));
  if (r.processes_per_node) d.push_back(p + " --ntasks-per-node=" + std::to_string(*r.processes_per_node));
  if (r.process_count) d.push_back(p + " --ntasks=" + std::to_string(*r.process_count));
  if (r.cpu_cores_per_process) d.push_back(p + " --cpus-per-task=" + std::to_string(*r.cpu_cores_per_process));
  if (r.gpu_cores_per_process && *r.gpu_cores_per_process > 0) {
    d.push_back(p + " --gpus-per-task=" + std::to_string(*r.gpu_cores_per_process));
  }
  if (exclusive(spec)) d.push_back(p + " --exclusive");
  if (a.duration) d.push_back(p + " --time=" + format_hms(*a.duration));
  if (a.queue_name) d.push_back(p + " --partition=" + directive_value("queue_name", *a.queue_name));
  if (a.account) d.push_back(p + " --account=" + directive_value("account", *a.account));
  if (a.reservation) d.push_back(p + " --reservation=" + directive_value("reservation", *a.reservation));
  for (const auto& [k, v] : custom_for(spec, "slurm")) d.push_back(p + " " + slurm_custom(k, v));
  const std::string base = (ctx.work_directory / ctx.job_id).string();
  d.push_back(p + " --output=" + directive_value("work_directory", base + ".out"));
  d.push_back(p + " --error=" + directive_value("work_directory", base + ".err"));
  return d;
}

std::vector<std::string> pbs_directives(const JobSpec& spec, const std::string& p, const ScriptContext& ctx) {
  const auto& r = spec.resources;
  const auto& a = spec.attributes;
  std::vector<std::string> d;
  if (spec.name) d.push_back(p + " -N " + directive_value("name", *spec.name));
  const int cpp = r.cpu_cores_per_process.value_or(1);
  const int gpp = r.gpu_cores_per_process.value_or(0);
  if (r.node_count) {
    std::string sel = "select=" + std::to_string(*r.node_count);
    if (const auto ppn = r.resolved_processes_per_node()) {
      sel += ":mpiprocs=" + std::to_string(*ppn) + ":ncpus=" + std::to_string(*ppn * cpp);
      if (gpp > 0) sel += ":ngpus=" + std::to_string(*ppn * gpp);
    } else {
      if (r.cpu_cores_per_process) sel += ":ncpus=" + std::to_string(cpp);
      if (gpp > 0) sel += ":ngpus=" + std::to_string(gpp);
    }
    d.push_back(p + " -l " + sel);
  } else if (r.process_count) {
    std::string sel = "select=" + std::to_string(*r.process_count) + ":ncpus=" + std::to_string(cpp);
    if (gpp > 0) sel += ":ngpus=" + std::to_string(gpp);
    d.push_back(p + " -l " + sel);
  } else if (r.cpu_cores_per_process || gpp > 0) {
    std::string sel = "select=1:ncpus=" + std::to_string(cpp);
    if (gpp > 0) sel += ":ngpus=" + std::to_string(gpp);
    d.push_back(p + " -l " + sel);
  }
  if (exclusive(spec)) d.push_back(p + " -l place=scatter:excl");
  if (a.duration) d.push_back(p + " -l walltime=" + format_hms(*a.duration));
  if (a.queue_name) d.push_back(p + " -q " + directive_value("queue_name", *a.queue_name));
  if (a.account) d.push_back(p + " -A " + directive_value("account", *a.account));
  if (a.reservation) d.push_back(p + " -W x=ADVRES:" + directive_value("reservation", *a.reservation));
  for (const auto& [k, v] : custom_for(spec, "pbs")) d.push_back(p + " -" + k + (v.empty() ? "" : " " + v));
  const std::string base = (ctx.work_directory / ctx.job_id).string();
  d.push_back(p + " -o " + directive_value("work_directory", base + ".out"));
  d.push_back(p + " -e " + directive_value("work_directory", base + ".err"));
  return d;
}

std::vector<std::string> lsf_directives(const JobSpec& spec, const std::string& p, const ScriptContext& ctx) {
  const auto& r = spec.resources;
  const auto& a = spec.attributes;
  std::vector<std::string> d;
  if (spec.name) d.push_back(p + " -J " + directive_value("name", *spec.name));
  if (const auto nproc = r.total_processes()) {
    d.push_back(p + " -n " + std::to_string(*nproc));
  } else if (r.node_count) {
    d.push_back(p + " -nnodes " + std::to_string(*r.node_count));
  }
  if (r.processes_per_node) d.push_back(p + " -R \"span[ptile=" + std::to_string(*r.processes_per_node) + "]\"");
  if (r.cpu_cores_per_process) {
    d.push_back(p + " -R \"affinity[core(" + std::to_string(*r.cpu_cores_per_process) + ")]\"");
  }
  if (r.gpu_cores_per_process && *r.gpu_cores_per_process > 0) {
    d.push_back(p + " -gpu \"num=" + std::to_string(*r.gpu_cores_per_process) + "\"");
  }
  if (exclusive(spec)) d.push_back(p + " -x");
  if (a.duration) d.push_back(p + " -W " + std::to_string(duration_minutes(*a.duration)));
  if (a.queue_name) d.push_back(p + " -q " + directive_value("queue_name", *a.queue_name));
  if (a.account) d.push_back(p + " -P " + directive_value("account", *a.account));
  if (a.reservation) d.push_back(p + " -U " + directive_value("reservation", *a.reservation));
  for (const auto& [k, v] : custom_for(spec, "lsf")) d.push_back(p + " -" + k + (v.empty() ? "" : " " + v));
  const std::string base = (ctx.work_directory / ctx.job_id).string();
  d.push_back(p + " -o " + directive_value("work_directory", base + ".out"));
  d.push_back(p + " -e " + directive_value("work_directory", base + ".err"));
  return d;
}

std::string join_quoted(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += shell_quote(t);
  }
  return out;
}

std::vector<std::string> env_prefix(const JobSpec& spec) {
  const auto policy = spec.environment_policy.value_or(EnvironmentPolicy::kInheritNone);
  std::vector<std::string> out;
  if (policy == EnvironmentPolicy::kInheritNone) {
    out = {"env", "-i"};
  } else if (!spec.environment_overrides.empty()) {
    out = {"env"};
  }
  for (const auto& [k, v] : spec.environment_overrides) out.push_back(k + "=" + v);
  return out;
}

std::string output_redirects(const JobSpec& spec) {
  std::string out;
  if (spec.stdout_path) out += " >" + shell_quote(*spec.stdout_path);
  if (spec.attributes.merge_output) {
    out += " 2>&1";
  } else if (spec.stderr_path) {
    out += " 2>" + shell_quote(*spec.stderr_path);
  }
  return out;
}

std::string input_redirect(const JobSpec& spec) {
  return spec.stdin_path ? " <" + shell_quote(*spec.stdin_path) : "";
}

}  // namespace

std::filesystem::path exit_code_path(const std::filesystem::path& work_directory, const std::string& job_id) {
  return work_directory / (job_id + ".ec");
}

std::optional<int> read_exit_code_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  if (!std::getline(in, line) || in.eof()) return std::nullopt;  // no trailing newline yet
  try {
    std::size_t used = 0;
    const int code = std::stoi(line, &used);
    if (used != line.size()) return std::nullopt;
    return code;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string format_hms(std::chrono::milliseconds d) {
  const long long secs = (d.count() + 999) / 1000;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", secs / 3600, (secs / 60) % 60, secs % 60);
  return buf;
}

long long duration_minutes(std::chrono::milliseconds d) {
  const long long mins = (d.count() + 59'999) / 60'000;
  return mins < 1 ? 1 : mins;
}

std::vector<std::string> render_directives(const JobSpec& spec, const SchedulerProfile& profile,
                                           const ScriptContext& context) {
  if (profile.name == "slurm") return slurm_directives(spec, profile.directive_prefix, context);
  if (profile.name == "pbs") return pbs_directives(spec, profile.directive_prefix, context);
  if (profile.name == "lsf") return lsf_directives(spec, profile.directive_prefix, context);
  throw UnrenderableAttribute("no directive renderer for scheduler " + profile.name);
}

std::string render_submit_script(const JobSpec& spec, const SchedulerProfile& profile,
                                 const LauncherDescriptor& launcher, const ScriptContext& context) {
  const LaunchLine line = render_launch_line(launcher, spec);
  std::vector<std::string> command = env_prefix(spec);
  command.insert(command.end(), line.tokens.begin(), line.tokens.end());

  std::ostringstream s;
  s << "#!/bin/sh\n";
  for (const auto& d : render_directives(spec, profile, context)) s << d << "\n";
  s << "\n";

  const std::string cd = spec.directory ? "cd " + shell_quote(*spec.directory) + " && " : "";
  if (line.copies == 1) {
    s << cd << join_quoted(command) << input_redirect(spec) << output_redirects(spec) << "\n";
  } else {
    s << cd << "{\n"
      << "psij_pids=\n"
      << "psij_i=0\n"
      << "while [ \"$psij_i\" -lt " << line.copies << " ]; do\n"
      << "  " << join_quoted(command) << input_redirect(spec) << " &\n"
      << "  psij_pids=\"$psij_pids $!\"\n"
      << "  psij_i=$((psij_i + 1))\n"
      << "done\n"
      << "psij_worst=0\n"
      << "for psij_pid in $psij_pids; do\n"
      << "  wait \"$psij_pid\"\n"
      << "  psij_c=$?\n"
      << "  if [ \"$psij_c\" -gt \"$psij_worst\" ]; then psij_worst=$psij_c; fi\n"
      << "done\n"
      << "(exit \"$psij_worst\")\n"
      << "}" << output_redirects(spec) << "\n";
  }
  const std::string ec = exit_code_path(context.work_directory, context.job_id).string();
  s << "psij_rc=$?\n"
    << "printf '%s\\n' \"$psij_rc\" >" << shell_quote(ec + ".tmp") << " && mv -f " << shell_quote(ec + ".tmp")
    << " " << shell_quote(ec) << "\n"
    << "exit \"$psij_rc\"\n";
  return s.str();
}

}  // namespace psij
