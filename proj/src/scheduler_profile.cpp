#include "psij/scheduler_profile.hpp"

#include <regex>
#include <sstream>

#include "psij/errors.hpp"

namespace psij {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto end = nl == std::string_view::npos ? text.size() : nl;
    lines.emplace_back(text.substr(start, end - start));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> cols;
  for (std::string c; in >> c;) cols.push_back(c);
  return cols;
}

// PBS prints server-qualified ids and may shorten the suffix; match on the
// sequence number.
std::string id_key(const std::string& id) { return id.substr(0, id.find('.')); }

SchedulerProfile make_slurm() {
  SchedulerProfile p;
  p.name = "slurm";
  p.submit_command = {"sbatch", "{SCRIPTS}"};
  p.status_command = {"squeue", "--noheader", "--format=%i %T", "--states=all", "--jobs={ID_LIST}"};
  p.cancel_command = {"scancel", "{ID}"};
  p.directive_prefix = "#SBATCH";
  p.native_id_pattern = R"(Submitted batch job ([0-9]+))";
  p.state_map = {
      {"PENDING", JobState::kQueued},     {"CONFIGURING", JobState::kQueued},
      {"REQUEUED", JobState::kQueued},    {"RESV_DEL_HOLD", JobState::kQueued},
      {"REQUEUE_HOLD", JobState::kQueued}, {"REQUEUE_FED", JobState::kQueued},
      {"RUNNING", JobState::kActive},     {"COMPLETING", JobState::kActive},
      {"SUSPENDED", JobState::kActive},   {"STAGE_OUT", JobState::kActive},
      {"SIGNALING", JobState::kActive},   {"RESIZING", JobState::kActive},
      {"STOPPED", JobState::kActive},     {"COMPLETED", JobState::kCompleted},
      {"FAILED", JobState::kFailed},      {"TIMEOUT", JobState::kFailed},
      {"NODE_FAIL", JobState::kFailed},   {"OUT_OF_MEMORY", JobState::kFailed},
      {"BOOT_FAIL", JobState::kFailed},   {"DEADLINE", JobState::kFailed},
      {"PREEMPTED", JobState::kFailed},   {"SPECIAL_EXIT", JobState::kFailed},
      {"REVOKED", JobState::kFailed},     {"CANCELLED", JobState::kCanceled},
  };
  p.status_skip_pattern = "";
  p.status_id_column = 0;
  p.status_state_column = 1;
  p.cancel_unknown_pattern = "(?:[Ii]nvalid job id|[Uu]nknown job|already completing or completed)";
  p.job_id_variable = "SLURM_JOB_ID";
  return p;
}

SchedulerProfile make_pbs() {
  SchedulerProfile p;
  p.name = "pbs";
  p.submit_command = {"qsub", "{SCRIPTS}"};
  p.status_command = {"qstat", "-x", "{IDS}"};
  p.cancel_command = {"qdel", "{ID}"};
  p.directive_prefix = "#PBS";
  p.native_id_pattern = R"(^\s*([0-9]+(?:\.[A-Za-z0-9_.-]+)?)\s*$)";
  // F (finished) does not distinguish success from failure; the exit-code
  // file settles it.
  p.state_map = {
      {"Q", JobState::kQueued}, {"H", JobState::kQueued}, {"W", JobState::kQueued},
      {"T", JobState::kQueued}, {"M", JobState::kQueued}, {"S", JobState::kActive},
      {"U", JobState::kActive}, {"R", JobState::kActive}, {"E", JobState::kActive},
      {"B", JobState::kActive}, {"X", JobState::kCompleted}, {"F", JobState::kCompleted},
  };
  p.status_skip_pattern = R"(^(Job id|Job ID|---))";
  p.status_id_column = 0;
  p.status_state_column = 4;
  // qstat exits 153 (PBSE_UNKJOBID) when some requested ids are unknown but
  // still prints the known ones.
  p.status_ok_exit_codes = {0, 153};
  p.cancel_unknown_pattern = "(?:[Uu]nknown [Jj]ob [Ii]d|[Uu]nknown job|[Jj]ob has finished)";
  p.job_id_variable = "PBS_JOBID";
  return p;
}

SchedulerProfile make_lsf() {
  SchedulerProfile p;
  p.name = "lsf";
  p.submit_command = {"bsub"};
  p.submit_reads_stdin = true;
  p.status_command = {"bjobs", "-noheader", "-o", "jobid stat", "{IDS}"};
  p.cancel_command = {"bkill", "{ID}"};
  p.directive_prefix = "#BSUB";
  p.native_id_pattern = R"(Job <([0-9]+)> is submitted)";
  p.state_map = {
      {"PEND", JobState::kQueued},  {"WAIT", JobState::kQueued},   {"PSUSP", JobState::kQueued},
      {"PROV", JobState::kQueued},  {"RUN", JobState::kActive},    {"USUSP", JobState::kActive},
      {"SSUSP", JobState::kActive}, {"DONE", JobState::kCompleted}, {"EXIT", JobState::kFailed},
      {"ZOMBI", JobState::kFailed},
  };
  p.status_skip_pattern = R"(^JOBID)";
  p.status_id_column = 0;
  p.status_state_column = 1;
  p.cancel_unknown_pattern = "(?:[Jj]ob has already finished|[Nn]o matching job|is not found|[Uu]nknown job)";
  p.job_id_variable = "LSB_JOBID";
  return p;
}

}  // namespace

const SchedulerProfile& slurm_profile() {
  static const SchedulerProfile p = make_slurm();
  return p;
}

const SchedulerProfile& pbs_profile() {
  static const SchedulerProfile p = make_pbs();
  return p;
}

const SchedulerProfile& lsf_profile() {
  static const SchedulerProfile p = make_lsf();
  return p;
}

std::optional<SchedulerProfile> find_profile(std::string_view name) {
  if (name == "slurm") return slurm_profile();
  if (name == "pbs") return pbs_profile();
  if (name == "lsf") return lsf_profile();
  return std::nullopt;
}

void validate_profile(const SchedulerProfile& profile) {
  if (profile.name != "slurm" && profile.name != "pbs" && profile.name != "lsf") {
    throw PluginError("scheduler profile name must be slurm, pbs or lsf: " + profile.name);
  }
  std::regex re;
  try {
    re = std::regex(profile.native_id_pattern);
  } catch (const std::regex_error& e) {
    throw PluginError("profile " + profile.name + ": bad native_id_pattern: " + e.what());
  }
  if (re.mark_count() != 1) {
    throw PluginError("profile " + profile.name + ": native_id_pattern must have exactly one capture group");
  }
  if (profile.submit_command.empty() || profile.status_command.empty() || profile.cancel_command.empty()) {
    throw PluginError("profile " + profile.name + ": command templates must be non-empty");
  }
  if (profile.state_map.empty()) throw PluginError("profile " + profile.name + ": empty state_map");
  for (const auto& [token, state] : profile.state_map) {
    if (state == JobState::kNew) {
      throw PluginError("profile " + profile.name + ": token " + token + " maps to NEW");
    }
  }
}

std::vector<std::string> parse_native_ids(std::string_view submit_stdout, const SchedulerProfile& profile) {
  const std::regex re(profile.native_id_pattern);
  std::vector<std::string> ids;
  for (const auto& line : split_lines(submit_stdout)) {
    std::smatch m;
    if (std::regex_search(line, m, re)) {
      auto id = trim(m[1].str());
      if (!id.empty()) ids.push_back(std::move(id));
    }
  }
  return ids;
}

std::string parse_native_id(std::string_view submit_stdout, const SchedulerProfile& profile) {
  auto ids = parse_native_ids(submit_stdout, profile);
  if (ids.empty()) {
    throw UnparseableSubmitOutput("no " + profile.name + " job id in submit output: '" +
                                  trim(submit_stdout) + "'");
  }
  return ids.front();
}

std::map<std::string, StatusObservation> parse_status_output(std::string_view status_stdout,
                                                             const std::vector<std::string>& ids,
                                                             const SchedulerProfile& profile) {
  std::map<std::string, std::string> wanted;  // id key -> requested id
  std::map<std::string, StatusObservation> out;
  for (const auto& id : ids) {
    wanted.emplace(id_key(id), id);
    out[id] = StatusObservation{};
  }
  std::optional<std::regex> skip;
  if (!profile.status_skip_pattern.empty()) skip.emplace(profile.status_skip_pattern);
  const auto needed = static_cast<std::size_t>(std::max(profile.status_id_column, profile.status_state_column)) + 1;

  for (const auto& raw : split_lines(status_stdout)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (skip && std::regex_search(line, *skip)) continue;
    const auto cols = split_ws(line);
    if (cols.size() < needed) continue;
    const auto it = wanted.find(id_key(cols[static_cast<std::size_t>(profile.status_id_column)]));
    if (it == wanted.end()) continue;
    const std::string& token = cols[static_cast<std::size_t>(profile.status_state_column)];
    StatusObservation obs;
    obs.token = token;
    obs.metadata["native_state"] = token;
    if (const auto m = profile.state_map.find(token); m != profile.state_map.end()) {
      obs.kind = StatusObservation::Kind::kKnown;
      obs.state = m->second;
    } else {
      obs.kind = StatusObservation::Kind::kUnmapped;
    }
    out[it->second] = std::move(obs);
  }
  return out;
}

std::vector<std::string> expand_command(const std::vector<std::string>& tmpl,
                                        const std::vector<std::string>& scripts,
                                        const std::vector<std::string>& ids) {
  std::string id_list;
  for (const auto& id : ids) {
    if (!id_list.empty()) id_list += ",";
    id_list += id;
  }
  std::vector<std::string> out;
  for (const auto& tok : tmpl) {
    if (tok == "{SCRIPTS}") {
      out.insert(out.end(), scripts.begin(), scripts.end());
      continue;
    }
    if (tok == "{IDS}") {
      out.insert(out.end(), ids.begin(), ids.end());
      continue;
    }
    std::string t = tok;
    for (auto [ph, val] : {std::pair<std::string, std::string>{"{ID_LIST}", id_list},
                           std::pair<std::string, std::string>{"{ID}", ids.empty() ? "" : ids.front()}}) {
      for (auto pos = t.find(ph); pos != std::string::npos; pos = t.find(ph, pos + val.size())) {
        t.replace(pos, ph.size(), val);
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace psij
