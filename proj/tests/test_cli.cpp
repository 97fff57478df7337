#include <gtest/gtest.h>

#include <sstream>

#include "psij/cli.hpp"
#include "psij/errors.hpp"
#include "psij/serialization.hpp"
#include "psij/site_config.hpp"
#include "stub_dashboard.hpp"
#include "test_support.hpp"

using namespace psij;
using namespace psij::testing;

namespace {

struct Transcript {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = tmp_ / "config.json";
    nlohmann::json cfg = {
        {"default_executor", "fast-local"},
        {"executors",
         {{"fast-local", {{"executor", "local"}, {"poll_interval", "PT0.05S"}}},
          {"mock", {{"poll_interval", "PT0.05S"}, {"options", {{"state_dir", (tmp_ / "lrm").string()}}}}},
          {"held",
           {{"executor", "mock"},
            {"poll_interval", "PT0.05S"},
            {"options", {{"state_dir", (tmp_ / "lrm-held").string()}}}}}}}};
    write_file(config_, cfg.dump(2));
    // Jobs on "held" never leave the queue.
    MockLrm(tmp_ / "lrm-held").configure({"--clock", "virtual", "--queue-latency-ms", "100000"});
  }

  Transcript cli(std::vector<std::string> args) {
    args.insert(args.begin(), {"--config", config_.string()});
    std::ostringstream out, err;
    Transcript t;
    t.code = cli_main(args, out, err);
    t.out = out.str();
    t.err = err.str();
    return t;
  }

  static std::string value_of(const std::string& text, const std::string& key) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
    }
    return {};
  }

  TempDir tmp_;
  ScopedEnv work_{"PSIJ_WORK_DIR", (tmp_ / "work").string()};
  fs::path config_;
};

}  // namespace

TEST_F(CliTest, SubmitPrintsIds) {
  const auto t = cli({"submit", "--exe", "/bin/true"});
  EXPECT_EQ(t.code, 0) << t.err;
  EXPECT_FALSE(value_of(t.out, "id").empty());
  EXPECT_FALSE(value_of(t.out, "native_id").empty());
  EXPECT_EQ(std::count(t.out.begin(), t.out.end(), '\n'), 2);
}

TEST_F(CliTest, MalformedSpecFile) {
  write_file(tmp_ / "bad.json", R"({"executable": "", "resources": {"node_count": 2, "processes_per_node": 4, "process_count": 9}})");
  const auto t = cli({"submit", "--spec", (tmp_ / "bad.json").string()});
  EXPECT_EQ(t.code, kExitUsage);
  EXPECT_NE(t.err.find("invalid job spec"), std::string::npos);
  EXPECT_NE(t.err.find("executable"), std::string::npos);
  EXPECT_NE(t.err.find("process_count"), std::string::npos);
  EXPECT_TRUE(t.out.empty());

  write_file(tmp_ / "typo.json", R"({"executable": "/bin/true", "argumnets": []})");
  EXPECT_EQ(cli({"submit", "--spec", (tmp_ / "typo.json").string()}).code, kExitUsage);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(cli({"submit", "--exe", "/bin/true", "--inherit-env", "some"}).code, kExitUsage);
  EXPECT_EQ(cli({"submit", "--exe", "/bin/true", "--duration", "soon"}).code, kExitUsage);
  EXPECT_EQ(cli({"submit", "-x", "no-such-executor", "--exe", "/bin/true"}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, SubmitFailureExitCode) {
  ScopedEnv faults("MOCK_LRM_FAULTS", "submit:1");
  const auto t = cli({"submit", "-x", "mock", "--exe", "/bin/true"});
  EXPECT_EQ(t.code, kExitSchedulerFailure);
  EXPECT_NE(t.err.find("submit failed"), std::string::npos);
}

TEST_F(CliTest, WaitReportsFinalState) {
  const auto ok = cli({"submit", "--exe", "/bin/true"});
  const auto w = cli({"wait", value_of(ok.out, "id")});
  EXPECT_EQ(w.code, 0) << w.err;
  EXPECT_EQ(w.out, "COMPLETED 0\n");

  const auto bad = cli({"submit", "--exe", "/bin/false"});
  const auto wf = cli({"wait", value_of(bad.out, "native_id")});
  EXPECT_EQ(wf.code, kExitJobNotCompleted);
  EXPECT_EQ(wf.out, "FAILED 1\n");

  const auto unknown = cli({"wait", "no-such-job"});
  EXPECT_EQ(unknown.code, kExitUnknownId);
  EXPECT_EQ(unknown.err, "unknown job id no-such-job\n");
}

TEST_F(CliTest, WaitTimeout) {
  const auto sub = cli({"submit", "--exe", "/bin/sleep", "--arg", "30"});
  const auto w = cli({"wait", value_of(sub.out, "id"), "--timeout", "0.2"});
  EXPECT_EQ(w.code, kExitTimeout);
  cli({"cancel", value_of(sub.out, "id")});
}

TEST_F(CliTest, RunWaitsAndMapsExitCode) {
  const auto t = cli({"run", "--exe", "/bin/sh", "--arg", "-c", "--arg", "exit 7"});
  EXPECT_EQ(t.code, kExitJobNotCompleted);
  EXPECT_NE(t.out.find("FAILED 7\n"), std::string::npos);
  const auto ok = cli({"run", "-x", "mock", "--exe", "/bin/true"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("COMPLETED 0\n"), std::string::npos);
}

TEST_F(CliTest, StatusOfSeveralJobs) {
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) ids.push_back(value_of(cli({"submit", "-x", "held", "--exe", "/bin/true"}).out, "id"));
  const auto t = cli({"status", "-x", "held", ids[0], ids[1], ids[2]});
  EXPECT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(t.out, ids[0] + " QUEUED\n" + ids[1] + " QUEUED\n" + ids[2] + " QUEUED\n");
  EXPECT_EQ(MockLrm(tmp_ / "lrm-held").counter("status"), 1);

  const auto mixed = cli({"status", "-x", "held", ids[0], "4242"});
  EXPECT_EQ(mixed.code, kExitUnknownId);
  EXPECT_EQ(mixed.out, ids[0] + " QUEUED\n");
  EXPECT_EQ(mixed.err, "unknown job id 4242\n");

  const auto js = cli({"status", "-x", "held", "--json", ids[1]});
  const auto arr = nlohmann::json::parse(js.out);
  ASSERT_EQ(arr.size(), 1u);
  EXPECT_EQ(arr[0]["id"], ids[1]);
}

TEST_F(CliTest, CancelThenStatus) {
  const auto sub = cli({"submit", "-x", "held", "--exe", "/bin/true"});
  const auto id = value_of(sub.out, "id");
  const auto c = cli({"cancel", "-x", "held", id});
  EXPECT_EQ(c.code, 0) << c.err;
  EXPECT_EQ(c.out, id + " cancel requested\n");
  const auto s = cli({"status", "-x", "held", id});
  EXPECT_EQ(s.out, id + " CANCELED\n");
  const auto again = cli({"cancel", "-x", "held", id});
  EXPECT_EQ(again.out, id + " already CANCELED\n");
  EXPECT_EQ(cli({"cancel", "-x", "held", "999"}).code, kExitUnknownId);
}

TEST_F(CliTest, AttachByNativeId) {
  const auto sub = cli({"submit", "-x", "held", "--exe", "/bin/true"});
  const auto a = cli({"attach", "-x", "held", value_of(sub.out, "native_id")});
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(value_of(a.out, "id"), value_of(sub.out, "id"));
  EXPECT_EQ(value_of(a.out, "state"), "QUEUED");
  EXPECT_EQ(cli({"attach", "-x", "held", "12345"}).code, kExitUnknownId);
}

TEST_F(CliTest, JsonSubmitIsCanonicalJob) {
  const auto t = cli({"submit", "--json", "--exe", "/bin/echo", "--arg", "hi", "--env", "A=b=c"});
  ASSERT_EQ(t.code, 0) << t.err;
  const auto j = nlohmann::json::parse(t.out);
  EXPECT_EQ(j["spec"]["executable"], "/bin/echo");
  EXPECT_EQ(j["spec"]["environment_overrides"]["A"], "b=c");
}

TEST_F(CliTest, ExecutorsListing) {
  const auto t = cli({"executors"});
  EXPECT_EQ(t.code, 0);
  for (const char* name : {"local", "slurm", "pbs", "lsf", "mock"}) {
    EXPECT_NE(t.out.find(std::string("executor ") + name + " "), std::string::npos) << name;
  }
  EXPECT_NE(t.out.find("launcher mpirun builtin\n"), std::string::npos);
}

TEST_F(CliTest, ReportUploadAndResend) {
  StubDashboard dash;
  write_file(tmp_ / "results.jsonl",
             "{\"name\": \"a\", \"outcome\": \"pass\"}\n{\"name\": \"b\", \"outcome\": \"fail\", \"stderr\": \"boom\"}\n");
  const std::string outbox = (tmp_ / "outbox").string();
  const auto up = cli({"report", "upload", "--endpoint", dash.endpoint(), "--results", (tmp_ / "results.jsonl").string(),
                       "--site", "site-a", "--email", "ci@example.org", "--outbox", outbox});
  EXPECT_EQ(up.code, 0) << up.err;
  EXPECT_EQ(up.out.rfind("accepted ", 0), 0u) << up.out;
  ASSERT_EQ(dash.accepted_bodies().size(), 1u);
  EXPECT_EQ(nlohmann::json::parse(dash.accepted_bodies()[0])["totals"]["fail"], 1);

  const auto bad = cli({"report", "upload", "--endpoint", dash.endpoint(), "--results", (tmp_ / "results.jsonl").string(),
                        "--site", "site-a", "--email", "not-an-email", "--outbox", outbox});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_EQ(bad.out.rfind("rejected ", 0), 0u);

  const auto spooled = cli({"report", "upload", "--endpoint", "http://127.0.0.1:1", "--results",
                            (tmp_ / "results.jsonl").string(), "--site", "site-b", "--email", "ci@example.org",
                            "--outbox", outbox});
  EXPECT_EQ(spooled.code, kExitSchedulerFailure);
  EXPECT_EQ(spooled.out.rfind("spooled ", 0), 0u);
  const auto resent = cli({"report", "resend", "--endpoint", dash.endpoint(), "--outbox", outbox});
  EXPECT_EQ(resent.code, 0) << resent.err;
  EXPECT_EQ(dash.accepted_bodies().size(), 2u);
}

TEST(SiteConfig, ParsesEntries) {
  const auto cfg = parse_site_config(nlohmann::json::parse(R"({
    "default_executor": "cluster",
    "executors": {
      "cluster": {"executor": "slurm", "poll_interval": "PT10S", "submit_window": "PT0.1S",
                  "command_prefix": ["ssh", "login1"], "failure_limit": 3,
                  "environment": {"SLURM_CONF": "/etc/slurm.conf"}, "options": {"k": "v"}},
      "pbs": {}
    }})"));
  EXPECT_EQ(cfg.default_executor, "cluster");
  const auto c = cfg.resolve("cluster");
  EXPECT_EQ(c.executor, "slurm");
  EXPECT_EQ(c.config.poll_interval, std::chrono::seconds(10));
  EXPECT_EQ(c.config.submit_window, std::chrono::milliseconds(100));
  EXPECT_EQ(c.config.command_prefix, (std::vector<std::string>{"ssh", "login1"}));
  EXPECT_EQ(c.config.failure_limit, 3);
  EXPECT_EQ(c.config.environment.at("SLURM_CONF"), "/etc/slurm.conf");
  EXPECT_EQ(cfg.resolve("pbs").executor, "pbs");
  EXPECT_EQ(cfg.resolve("lsf").executor, "lsf");
}

TEST(SiteConfig, RejectsBadFields) {
  for (const char* bad : {R"({"executors": {"x": {"poll_interval": "ten"}}})", R"({"executors": {"x": {"bogus": 1}}})",
                          R"({"executors": []})", R"({"default_executor": 3})",
                          R"({"executors": {"x": {"failure_limit": 0}}})"}) {
    EXPECT_THROW(parse_site_config(nlohmann::json::parse(bad)), ParseError) << bad;
  }
  TempDir tmp;
  EXPECT_TRUE(load_site_config(tmp / "missing.json").executors.empty());
}

TEST(CliBinary, RunsAsProcess) {
  TempDir tmp;
  CommandRequest req;
  req.argv = {PSIJ_CLI_BIN, "run", "--poll-interval", "0.05", "--exe", "/bin/sh", "--arg", "-c", "--arg", "exit 3"};
  req.environment = {{"PSIJ_WORK_DIR", (tmp / "work").string()}, {"PSIJ_KIT_CONFIG", (tmp / "none.json").string()}};
  const auto r = ProcessCommandRunner().run(req);
  EXPECT_EQ(r.exit_code, 1) << r.err;
  EXPECT_NE(r.out.find("FAILED 3"), std::string::npos);
}
