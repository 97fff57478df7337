#include <gtest/gtest.h>

#include <signal.h>
#include <unistd.h>

#include <set>

#include "psij/errors.hpp"
#include "psij/local_executor.hpp"
#include "test_support.hpp"

using namespace psij;
using namespace psij::testing;
using namespace std::chrono_literals;

namespace {

class LocalExecutorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ExecutorConfig c;
    c.work_directory = tmp_.path() / "work";
    c.poll_interval = 50ms;
    ex_ = std::make_unique<LocalExecutor>(c);
  }

  std::shared_ptr<Job> run(JobSpec spec) {
    auto job = Job::create(std::move(spec));
    ex_->submit(job);
    return job;
  }

  TempDir tmp_;
  std::unique_ptr<LocalExecutor> ex_;
};

}  // namespace

TEST_F(LocalExecutorTest, TrueCompletes) {
  auto job = run(JobSpec{"/bin/true"});
  const auto st = job->wait(10s);
  EXPECT_EQ(st.state, JobState::kCompleted);
  EXPECT_EQ(st.exit_code, 0);
  EXPECT_FALSE(job->native_id().value_or("").empty());
}

TEST_F(LocalExecutorTest, FalseFails) {
  auto job = run(JobSpec{"/bin/false"});
  const auto st = job->wait(10s);
  EXPECT_EQ(st.state, JobState::kFailed);
  EXPECT_EQ(st.exit_code, 1);
}

TEST_F(LocalExecutorTest, HistoryIsLegalPath) {
  auto job = run(JobSpec{"/bin/true"});
  job->wait(10s);
  std::vector<JobState> states;
  for (const auto& s : job->history()) states.push_back(s.state);
  EXPECT_EQ(states, (std::vector<JobState>{JobState::kNew, JobState::kQueued, JobState::kActive, JobState::kCompleted}));
}

TEST_F(LocalExecutorTest, StdoutBytesExact) {
  JobSpec s = shell_spec("printf 'line one\\n\\001\\377 tail'");
  s.stdout_path = (tmp_ / "out.bin").string();
  run(s)->wait(10s);
  EXPECT_EQ(read_file(tmp_ / "out.bin"), std::string("line one\n\001\377 tail"));
}

TEST_F(LocalExecutorTest, DefaultCaptureAndMerge) {
  auto job = run(shell_spec("echo o; echo e >&2"));
  job->wait(10s);
  EXPECT_EQ(read_file(ex_->work_directory() / (job->id() + ".out")), "o\n");
  EXPECT_EQ(read_file(ex_->work_directory() / (job->id() + ".err")), "e\n");

  JobSpec s = shell_spec("echo o; echo e >&2");
  s.stdout_path = (tmp_ / "both").string();
  s.attributes.merge_output = true;
  run(s)->wait(10s);
  EXPECT_EQ(read_file(tmp_ / "both"), "o\ne\n");
}

TEST_F(LocalExecutorTest, StdinDirectoryAndEnvironment) {
  write_file(tmp_ / "in.txt", "from stdin\n");
  JobSpec s = shell_spec("cat; pwd; echo \"$GREETING\"; echo \"${HOME:-unset}\"");
  s.stdin_path = (tmp_ / "in.txt").string();
  s.directory = tmp_.path().string();
  s.stdout_path = "rel.out";
  s.environment_policy = EnvironmentPolicy::kInheritNone;
  s.environment_overrides = {{"GREETING", "hi there"}};
  run(s)->wait(10s);
  EXPECT_EQ(read_file(tmp_ / "rel.out"), "from stdin\n" + fs::canonical(tmp_.path()).string() + "\nhi there\nunset\n");
}

TEST_F(LocalExecutorTest, InheritsEnvironmentByDefault) {
  ScopedEnv env("PSIJ_TEST_MARK", "inherited");
  JobSpec s = shell_spec("echo \"$PSIJ_TEST_MARK\"");
  s.stdout_path = (tmp_ / "o").string();
  run(s)->wait(10s);
  EXPECT_EQ(read_file(tmp_ / "o"), "inherited\n");
}

TEST_F(LocalExecutorTest, MultiNodeRejected) {
  JobSpec s{"/bin/true"};
  s.resources.node_count = 2;
  auto job = Job::create(s);
  EXPECT_THROW(ex_->submit(job), InvalidSpec);
  EXPECT_EQ(job->state(), JobState::kNew);
}

TEST_F(LocalExecutorTest, MissingExecutableFailsSubmission) {
  auto job = Job::create(JobSpec{"/nonexistent/binary"});
  EXPECT_THROW(ex_->submit(job), SubmitFailed);
  EXPECT_EQ(job->state(), JobState::kFailed);
  EXPECT_TRUE(job->status().message.has_value());
}

TEST_F(LocalExecutorTest, SubmitTwice) {
  auto job = run(JobSpec{"/bin/true"});
  EXPECT_THROW(ex_->submit(job), InvalidJobState);
}

TEST_F(LocalExecutorTest, CancelSleepingJob) {
  auto job = run(JobSpec{"/bin/sleep", {"60"}});
  std::this_thread::sleep_for(100ms);
  const auto t0 = std::chrono::steady_clock::now();
  ex_->cancel(*job);
  const auto st = job->wait(6s);
  EXPECT_EQ(st.state, JobState::kCanceled);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 6s);
  EXPECT_FALSE(fs::exists(ex_->work_directory() / (job->id() + ".ec")));
}

TEST_F(LocalExecutorTest, CancelAfterExit) {
  auto job = run(JobSpec{"/bin/true"});
  job->wait(10s);
  EXPECT_THROW(ex_->cancel(*job), InvalidJobState);
}

TEST_F(LocalExecutorTest, IgnoredTermIsForceKilled) {
  const fs::path ready = tmp_ / "ready";
  auto job = run(shell_spec("trap '' TERM; touch '" + ready.string() + "'; while :; do sleep 0.05; done"));
  ASSERT_TRUE(wait_until([&] { return fs::exists(ready); }, 10s));
  const auto t0 = std::chrono::steady_clock::now();
  ex_->cancel(*job);
  const auto st = job->wait(LocalExecutor::kCancelGrace + 1s);
  EXPECT_EQ(st.state, JobState::kCanceled);
  EXPECT_LE(std::chrono::steady_clock::now() - t0, LocalExecutor::kCancelGrace + 1s);
}

TEST_F(LocalExecutorTest, NoOrphansAfterTerminal) {
  // The payload leaves background children behind.
  auto job = run(shell_spec("sleep 30 & sleep 30 & exit 0"));
  job->wait(10s);
  const pid_t pgid = static_cast<pid_t>(std::stol(*job->native_id()));
  EXPECT_TRUE(wait_until([&] { return live_processes_in_group(pgid).empty(); }, 2s));

  auto canceled = run(shell_spec("sleep 30 & sleep 30 & wait"));
  std::this_thread::sleep_for(100ms);
  ex_->cancel(*canceled);
  canceled->wait(7s);
  const pid_t pg2 = static_cast<pid_t>(std::stol(*canceled->native_id()));
  EXPECT_TRUE(wait_until([&] { return live_processes_in_group(pg2).empty(); }, 2s));
}

TEST_F(LocalExecutorTest, ExitCodesPreserved) {
  std::vector<std::shared_ptr<Job>> jobs;
  for (int k = 0; k <= 255; ++k) jobs.push_back(run(shell_spec("exit " + std::to_string(k))));
  const auto results = wait_all(jobs, 60s);
  for (int k = 0; k <= 255; ++k) {
    EXPECT_EQ(results[k].state, k == 0 ? JobState::kCompleted : JobState::kFailed) << k;
    EXPECT_EQ(results[k].exit_code, k);
  }
}

TEST_F(LocalExecutorTest, SignalDeathReported) {
  auto job = run(shell_spec("kill -KILL $$"));
  const auto st = job->wait(10s);
  EXPECT_EQ(st.state, JobState::kFailed);
  EXPECT_EQ(st.exit_code, 128 + SIGKILL);
}

TEST_F(LocalExecutorTest, AttachFromAnotherInstance) {
  const fs::path go = tmp_ / "go";
  auto job = run(shell_spec("while [ ! -e '" + go.string() + "' ]; do sleep 0.02; done; exit 9"));
  const std::string nid = *job->native_id();

  ExecutorConfig c = ex_->config();
  LocalExecutor other(c);
  auto attached = other.attach(nid);
  EXPECT_EQ(attached->id(), job->id());
  EXPECT_EQ(attached->state(), JobState::kActive);
  EXPECT_FALSE(attached->spec().has_value());
  write_file(go, "");
  EXPECT_EQ(attached->wait(10s).exit_code, 9);
  EXPECT_EQ(job->wait(10s).exit_code, 9);

  auto late = other.attach(nid);
  EXPECT_EQ(late->state(), JobState::kFailed);
  EXPECT_EQ(late->status().exit_code, 9);
  EXPECT_THROW(other.attach("does-not-exist"), UnknownNativeId);
  EXPECT_THROW(other.attach("999999"), UnknownNativeId);
}

TEST_F(LocalExecutorTest, RecordedNativeId) {
  auto job = run(JobSpec{"/bin/true"});
  EXPECT_EQ(ex_->recorded_native_id(job->id()), job->native_id());
  EXPECT_FALSE(ex_->recorded_native_id("nope"));
}

TEST_F(LocalExecutorTest, ExecutorCallbackSeesEveryTransition) {
  std::mutex m;
  std::map<std::string, std::vector<JobState>> seen;
  ex_->set_status_callback([&](Job& j, const JobStatus& s) {
    std::lock_guard lock(m);
    seen[j.id()].push_back(s.state);
  });
  std::vector<std::shared_ptr<Job>> jobs;
  for (int i = 0; i < 20; ++i) jobs.push_back(run(shell_spec("exit " + std::to_string(i % 2))));
  wait_all(jobs, 30s);
  std::lock_guard lock(m);
  for (const auto& j : jobs) {
    const auto& s = seen[j->id()];
    ASSERT_EQ(s.size(), 3u) << j->id();
    EXPECT_EQ(s[0], JobState::kQueued);
    EXPECT_EQ(s[1], JobState::kActive);
    EXPECT_TRUE(is_terminal(s[2]));
  }
}

TEST_F(LocalExecutorTest, ReplicatedLauncherRunsCopies) {
  JobSpec s = shell_spec("echo x >>\"$0\"; exit 3");
  s.arguments.push_back((tmp_ / "copies").string());
  s.launcher = "multi";
  s.resources.process_count = 4;
  const auto st = run(s)->wait(10s);
  EXPECT_EQ(st.exit_code, 3);
  EXPECT_EQ(read_file(tmp_ / "copies"), "x\nx\nx\nx\n");
}

TEST(LocalExecutorConfig, InvalidConfigRejected) {
  ExecutorConfig c;
  c.poll_interval = 0ms;
  EXPECT_THROW(LocalExecutor{c}, InvalidSpec);
}
