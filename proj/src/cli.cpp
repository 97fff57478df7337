#include "psij/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "psij/ci_report.hpp"
#include "logging.hpp"
#include "psij/errors.hpp"
#include "psij/executor.hpp"
#include "psij/launcher.hpp"
#include "psij/registry.hpp"
#include "psij/serialization.hpp"
#include "psij/site_config.hpp"

namespace psij {

namespace {

using nlohmann::json;
using std::chrono::milliseconds;

constexpr milliseconds kCliPollInterval{1000};

// ISO-8601 ("PT30S") or plain seconds ("30", "0.5").
std::optional<milliseconds> parse_duration_arg(const std::string& text) {
  if (auto d = parse_iso8601_duration(text)) return d;
  double seconds = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, seconds);
  if (ec != std::errc() || ptr != end || !(seconds >= 0) || !std::isfinite(seconds)) return std::nullopt;
  return milliseconds(static_cast<std::int64_t>(std::llround(seconds * 1000)));
}

std::pair<std::string, std::string> split_kv(const std::string& kv, const std::string& flag) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw CLI::ValidationError(flag, "expected KEY=VALUE, got '" + kv + "'");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

std::string status_line(const JobStatus& s) {
  std::string line(to_string(s.state));
  if (s.exit_code) line += " " + std::to_string(*s.exit_code);
  return line;
}

int exit_for(const JobStatus& s) { return s.state == JobState::kCompleted ? kExitOk : kExitJobNotCompleted; }

struct Globals {
  std::string config_path;
  std::string executor;
  std::string poll_interval;
  bool json = false;
};

struct InlineSpec {
  std::string spec_file;
  std::string exe;
  std::vector<std::string> args;
  std::string dir;
  std::vector<std::string> env;
  std::string inherit_env;
  std::string stdin_path, stdout_path, stderr_path;
  bool merge_output = false;
  std::string name, launcher;
  std::optional<int> nodes, ppn, nproc, cpus, gpus;
  std::optional<bool> exclusive;
  std::string duration, queue, account, reservation;
  std::vector<std::string> attrs;
};

void add_spec_options(CLI::App* cmd, InlineSpec& s) {
  cmd->add_option("--spec", s.spec_file, "Job file (canonical JobSpec JSON)");
  cmd->add_option("--exe", s.exe, "Executable");
  cmd->add_option("--arg", s.args, "Argument (repeatable)")->allow_extra_args(false);
  cmd->add_option("--dir", s.dir, "Working directory");
  cmd->add_option("--env", s.env, "Environment override KEY=VALUE (repeatable)")->allow_extra_args(false);
  cmd->add_option("--inherit-env", s.inherit_env, "Environment policy")->check(CLI::IsMember({"all", "none"}));
  cmd->add_option("--stdin", s.stdin_path);
  cmd->add_option("--stdout", s.stdout_path);
  cmd->add_option("--stderr", s.stderr_path);
  cmd->add_flag("--merge-output", s.merge_output, "Send stderr to stdout");
  cmd->add_option("--name", s.name);
  cmd->add_option("--launcher", s.launcher);
  cmd->add_option("--nodes", s.nodes);
  cmd->add_option("--ppn", s.ppn, "Processes per node");
  cmd->add_option("--nproc", s.nproc, "Total process count");
  cmd->add_option("--cpus", s.cpus, "CPU cores per process");
  cmd->add_option("--gpus", s.gpus, "GPUs per process");
  cmd->add_option("--exclusive", s.exclusive, "Exclusive node use (true/false)");
  cmd->add_option("--duration", s.duration, "Wall time (ISO-8601 or seconds)");
  cmd->add_option("--queue", s.queue);
  cmd->add_option("--account", s.account);
  cmd->add_option("--reservation", s.reservation);
  cmd->add_option("--attr", s.attrs, "Custom attribute KEY=VALUE (repeatable)")->allow_extra_args(false);
}

JobSpec build_spec(const InlineSpec& s) {
  JobSpec spec;
  if (!s.spec_file.empty()) spec = load_job_spec(s.spec_file);
  if (!s.exe.empty()) spec.executable = s.exe;
  if (!s.args.empty()) spec.arguments = s.args;
  if (!s.dir.empty()) spec.directory = s.dir;
  for (const auto& kv : s.env) {
    auto [k, v] = split_kv(kv, "--env");
    spec.environment_overrides[k] = v;
  }
  if (!s.inherit_env.empty()) spec.environment_policy = s.inherit_env == "all" ? EnvironmentPolicy::kInheritAll : EnvironmentPolicy::kInheritNone;
  if (!s.stdin_path.empty()) spec.stdin_path = s.stdin_path;
  if (!s.stdout_path.empty()) spec.stdout_path = s.stdout_path;
  if (!s.stderr_path.empty()) spec.stderr_path = s.stderr_path;
  if (s.merge_output) spec.attributes.merge_output = true;
  if (!s.name.empty()) spec.name = s.name;
  if (!s.launcher.empty()) spec.launcher = s.launcher;
  if (s.nodes) spec.resources.node_count = s.nodes;
  if (s.ppn) spec.resources.processes_per_node = s.ppn;
  if (s.nproc) spec.resources.process_count = s.nproc;
  if (s.cpus) spec.resources.cpu_cores_per_process = s.cpus;
  if (s.gpus) spec.resources.gpu_cores_per_process = s.gpus;
  if (s.exclusive) spec.resources.exclusive_node_use = s.exclusive;
  if (!s.duration.empty()) {
    const auto d = parse_duration_arg(s.duration);
    if (!d) throw ParseError("--duration: invalid duration '" + s.duration + "'");
    spec.attributes.duration = d;
  }
  if (!s.queue.empty()) spec.attributes.queue_name = s.queue;
  if (!s.account.empty()) spec.attributes.account = s.account;
  if (!s.reservation.empty()) spec.attributes.reservation = s.reservation;
  for (const auto& kv : s.attrs) {
    auto [k, v] = split_kv(kv, "--attr");
    spec.attributes.custom[k] = v;
  }
  return spec;
}

class Session {
 public:
  Session(const Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

  std::unique_ptr<Executor> open(bool background_polling) {
    const SiteConfig site = load_site_config(g_.config_path.empty() ? default_site_config_path() : std::filesystem::path(g_.config_path));
    std::string name = g_.executor;
    if (name.empty()) name = site.default_executor.value_or("local");
    const bool configured = site.executors.count(name) > 0;
    ExecutorEntry entry = site.resolve(name);
    if (!g_.poll_interval.empty()) {
      const auto d = parse_duration_arg(g_.poll_interval);
      if (!d || d->count() <= 0) throw CLI::ValidationError("--poll-interval", "invalid duration '" + g_.poll_interval + "'");
      entry.config.poll_interval = *d;
    } else if (!configured) {
      entry.config.poll_interval = kCliPollInterval;
    }
    entry.config.background_polling = background_polling;
    return PluginRegistry::global().get_executor(entry.executor, entry.config);
  }

  // Client ids recorded by an earlier submit map to native ids; anything
  // else is taken to be a native id.
  static std::string native_for(const Executor& ex, const std::string& id) {
    return ex.recorded_native_id(id).value_or(id);
  }

  std::ostream& out() { return out_; }
  std::ostream& err() { return err_; }
  const Globals& globals() const { return g_; }

 private:
  const Globals& g_;
  std::ostream& out_;
  std::ostream& err_;
};

void print_ids(Session& s, const Job& job) {
  if (s.globals().json) {
    s.out() << to_json(job).dump(2) << "\n";
    return;
  }
  s.out() << "id=" << job.id() << "\n";
  s.out() << "native_id=" << job.native_id().value_or("") << "\n";
}

void print_final(Session& s, const JobStatus& st) {
  if (s.globals().json) {
    s.out() << to_json(st).dump(2) << "\n";
  } else {
    s.out() << status_line(st) << "\n";
  }
}

// Returns an exit code, or -1 with `job` set on success.
int do_submit(Session& s, Executor& ex, const InlineSpec& is, std::shared_ptr<Job>& job) {
  JobSpec spec;
  try {
    spec = build_spec(is);
  } catch (const ParseError& e) {
    s.err() << "invalid job spec: " << e.what() << "\n";
    return kExitUsage;
  }
  if (auto v = validate_spec(spec); !v.empty()) {
    s.err() << "invalid job spec:\n";
    for (const auto& x : v) s.err() << "  " << x.to_string() << "\n";
    return kExitUsage;
  }
  job = Job::create(std::move(spec));
  try {
    ex.submit(job);
  } catch (const InvalidSpec& e) {
    s.err() << "invalid job spec:\n";
    for (const auto& x : e.violations()) s.err() << "  " << x << "\n";
    return kExitUsage;
  } catch (const SubmitFailed& e) {
    s.err() << "submit failed: " << e.what() << "\n";
    return kExitSchedulerFailure;
  }
  return -1;
}

int wait_and_report(Session& s, Job& job, const std::string& timeout) {
  std::optional<milliseconds> limit;
  if (!timeout.empty()) {
    limit = parse_duration_arg(timeout);
    if (!limit) {
      s.err() << "invalid --timeout '" << timeout << "'\n";
      return kExitUsage;
    }
  }
  try {
    const JobStatus st = job.wait(limit);
    print_final(s, st);
    if (st.message && st.state != JobState::kCompleted) s.err() << st.message.value() << "\n";
    return exit_for(st);
  } catch (const Timeout&) {
    s.err() << "timed out waiting for " << job.id() << " (state " << to_string(job.state()) << ")\n";
    return kExitTimeout;
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  detail::init_logging();
  CLI::App app{"Submit, monitor and cancel jobs through PSI/J executors", "psij"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Site configuration file");

  auto executor_opt = [&](CLI::App* cmd) {
    cmd->add_option("-x,--executor", g.executor, "Executor name (default: site default, else local)");
  };
  auto json_flag = [&](CLI::App* cmd) { cmd->add_flag("--json", g.json, "Emit canonical JSON"); };

  InlineSpec inline_spec;
  std::string timeout;
  std::vector<std::string> ids;

  auto* submit = app.add_subcommand("submit", "Submit a job; prints id= and native_id= lines");
  executor_opt(submit);
  json_flag(submit);
  add_spec_options(submit, inline_spec);

  auto* run = app.add_subcommand("run", "Submit a job and wait for it");
  executor_opt(run);
  json_flag(run);
  add_spec_options(run, inline_spec);
  run->add_option("--timeout", timeout, "ISO-8601 duration or seconds");
  run->add_option("--poll-interval", g.poll_interval);

  auto* wait = app.add_subcommand("wait", "Wait for a job; prints STATE [exit_code]");
  executor_opt(wait);
  json_flag(wait);
  std::string wait_id;
  wait->add_option("id", wait_id, "Client id or native id")->required();
  wait->add_option("--timeout", timeout, "ISO-8601 duration or seconds");
  wait->add_option("--poll-interval", g.poll_interval);

  auto* status = app.add_subcommand("status", "Print 'id STATE [exit_code]' per job");
  executor_opt(status);
  json_flag(status);
  status->add_option("ids", ids, "Client ids or native ids")->required();

  auto* cancel = app.add_subcommand("cancel", "Request cancellation");
  executor_opt(cancel);
  cancel->add_option("ids", ids, "Client ids or native ids")->required();

  auto* attach = app.add_subcommand("attach", "Reattach to a job by native id");
  executor_opt(attach);
  json_flag(attach);
  std::string attach_id;
  attach->add_option("native_id", attach_id)->required();

  auto* executors = app.add_subcommand("executors", "List registered executors and launchers");
  json_flag(executors);

  auto* report = app.add_subcommand("report", "Test report upload");
  report->require_subcommand(1);
  std::string endpoint, outbox, results, site_id, email, profile;
  auto* upload = report->add_subcommand("upload", "Collect a JSON-lines result file and upload it");
  upload->add_option("--endpoint", endpoint)->required();
  upload->add_option("--results", results, "JSON-lines results; - for stdin")->required();
  upload->add_option("--site", site_id)->required();
  upload->add_option("--email", email)->required();
  upload->add_option("--profile", profile, "Scheduler profile under test");
  upload->add_option("--outbox", outbox);
  auto* resend = report->add_subcommand("resend", "Re-send spooled reports");
  resend->add_option("--endpoint", endpoint)->required();
  resend->add_option("--outbox", outbox);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "psij: " << e.what() << "\n";
    return kExitUsage;
  }

  Session s(g, out, err);
  try {
    if (submit->parsed() || run->parsed()) {
      auto ex = s.open(run->parsed());
      std::shared_ptr<Job> job;
      if (int rc = do_submit(s, *ex, inline_spec, job); rc >= 0) return rc;
      if (submit->parsed()) {
        print_ids(s, *job);
        return kExitOk;
      }
      if (!g.json) print_ids(s, *job);
      return wait_and_report(s, *job, timeout);
    }

    if (wait->parsed()) {
      auto ex = s.open(true);
      std::shared_ptr<Job> job;
      try {
        job = ex->attach(Session::native_for(*ex, wait_id));
      } catch (const UnknownNativeId&) {
        err << "unknown job id " << wait_id << "\n";
        return kExitUnknownId;
      }
      return wait_and_report(s, *job, timeout);
    }

    if (status->parsed()) {
      auto ex = s.open(false);
      std::vector<std::string> natives;
      for (const auto& id : ids) natives.push_back(Session::native_for(*ex, id));
      const auto found = ex->attach_all(natives);
      int rc = kExitOk;
      json arr = json::array();
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = found.find(natives[i]);
        if (it == found.end()) {
          err << "unknown job id " << ids[i] << "\n";
          rc = kExitUnknownId;
          continue;
        }
        if (g.json) {
          arr.push_back(to_json(*it->second));
        } else {
          out << ids[i] << " " << status_line(it->second->status()) << "\n";
        }
      }
      if (g.json) out << arr.dump(2) << "\n";
      return rc;
    }

    if (cancel->parsed()) {
      auto ex = s.open(false);
      std::vector<std::string> natives;
      for (const auto& id : ids) natives.push_back(Session::native_for(*ex, id));
      const auto found = ex->attach_all(natives);
      int rc = kExitOk;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = found.find(natives[i]);
        if (it == found.end()) {
          err << "unknown job id " << ids[i] << "\n";
          rc = kExitUnknownId;
          continue;
        }
        Job& job = *it->second;
        if (is_terminal(job.state())) {
          out << ids[i] << " already " << to_string(job.state()) << "\n";
          continue;
        }
        try {
          ex->cancel(job);
          out << ids[i] << " cancel requested\n";
        } catch (const SchedulerUnavailable& e) {
          err << ids[i] << ": cancel failed: " << e.what() << "\n";
          if (rc == kExitOk) rc = kExitSchedulerFailure;
        }
      }
      return rc;
    }

    if (attach->parsed()) {
      auto ex = s.open(false);
      std::shared_ptr<Job> job;
      try {
        job = ex->attach(attach_id);
      } catch (const UnknownNativeId&) {
        err << "unknown job id " << attach_id << "\n";
        return kExitUnknownId;
      }
      if (g.json) {
        out << to_json(*job).dump(2) << "\n";
      } else {
        print_ids(s, *job);
        out << "state=" << status_line(job->status()) << "\n";
      }
      return kExitOk;
    }

    if (executors->parsed()) {
      auto& reg = PluginRegistry::global();
      if (g.json) {
        json j{{"executors", json::array()}, {"launchers", json::array()}};
        for (const auto& d : reg.executors())
          j["executors"].push_back({{"name", d.name}, {"version", d.version.to_string()}, {"origin", d.origin}});
        for (const auto& l : builtin_launchers()) j["launchers"].push_back({{"name", l.name}, {"version", "builtin"}});
        for (const auto& [l, v] : reg.launchers()) j["launchers"].push_back({{"name", l.name}, {"version", v.to_string()}});
        out << j.dump(2) << "\n";
      } else {
        for (const auto& d : reg.executors()) out << "executor " << d.name << " " << d.version.to_string() << " " << d.origin << "\n";
        for (const auto& l : builtin_launchers()) out << "launcher " << l.name << " builtin\n";
        for (const auto& [l, v] : reg.launchers()) out << "launcher " << l.name << " " << v.to_string() << "\n";
      }
      return kExitOk;
    }

    if (upload->parsed() || resend->parsed()) {
      UploadOptions opts;
      if (!outbox.empty()) opts.outbox = outbox;
      ReportUploader uploader(endpoint, opts);
      auto print = [&](const UploadResult& r) {
        out << to_string(r.outcome) << " " << r.content_hash << " attempts=" << r.attempts;
        if (!r.outbox_file.empty()) out << " file=" << r.outbox_file.string();
        out << "\n";
        if (r.outcome != UploadOutcome::kAccepted) err << r.message << "\n";
      };
      auto code = [](const UploadResult& r) {
        switch (r.outcome) {
          case UploadOutcome::kAccepted: return int(kExitOk);
          case UploadOutcome::kRejected: return int(kExitUsage);
          case UploadOutcome::kSpooled: return int(kExitSchedulerFailure);
        }
        return int(kExitSchedulerFailure);
      };
      if (upload->parsed()) {
        ReportContext ctx{site_id, email, now_ms(), {host_os_fingerprint(), profile}};
        TestReport r;
        std::size_t skipped = 0;
        if (results == "-") {
          r = collect_report(std::cin, ctx, &skipped);
        } else {
          std::ifstream in(results);
          if (!in) {
            err << "cannot open " << results << "\n";
            return kExitUsage;
          }
          r = collect_report(in, ctx, &skipped);
        }
        if (skipped) err << "skipped " << skipped << " malformed result line(s)\n";
        const auto res = uploader.upload(r);
        print(res);
        return code(res);
      }
      int rc = kExitOk;
      for (const auto& res : uploader.resend()) {
        print(res);
        rc = std::max(rc, code(res));
      }
      return rc;
    }
  } catch (const CLI::ValidationError& e) {
    err << "psij: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSpec& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "psij: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnknownExecutor& e) {
    err << "psij: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchedulerUnavailable& e) {
    err << "psij: " << e.what() << "\n";
    return kExitSchedulerFailure;
  } catch (const std::exception& e) {
    err << "psij: " << e.what() << "\n";
    return kExitSchedulerFailure;
  }
  return kExitUsage;
}

}  // namespace psij
