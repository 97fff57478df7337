#include <gtest/gtest.h>

#include <cstdlib>

#include "golden_matrix.hpp"
#include "psij/command.hpp"
#include "psij/errors.hpp"
#include "test_support.hpp"

using namespace psij;
using namespace psij::testing;

namespace {

bool has_line(const std::string& text, const std::string& line) {
  return ("\n" + text).find("\n" + line + "\n") != std::string::npos;
}

}  // namespace

TEST(Goldens, TwelveScriptsAreByteIdentical) {
  const fs::path dir = PSIJ_GOLDEN_DIR;
  const bool update = std::getenv("PSIJ_UPDATE_GOLDENS") != nullptr;
  const auto cases = golden_cases();
  ASSERT_EQ(cases.size(), 12u);
  for (const auto& c : cases) {
    const std::string rendered = render_golden(c);
    if (update) write_file(dir / c.file, rendered);
    ASSERT_TRUE(fs::exists(dir / c.file)) << c.file;
    EXPECT_EQ(rendered, read_file(dir / c.file)) << c.file;
  }
}

TEST(Directives, SlurmSizedExample) {
  JobSpec s{"/bin/true"};
  s.resources.node_count = 2;
  s.resources.processes_per_node = 4;
  s.attributes.duration = std::chrono::minutes(10);
  s.attributes.queue_name = "batch";
  const auto script = render_submit_script(s, slurm_profile(), *find_builtin_launcher("single"), {"j1", "/w"});
  EXPECT_TRUE(has_line(script, "#SBATCH --nodes=2"));
  EXPECT_TRUE(has_line(script, "#SBATCH --ntasks-per-node=4"));
  EXPECT_TRUE(has_line(script, "#SBATCH --time=00:10:00"));
  EXPECT_TRUE(has_line(script, "#SBATCH --partition=batch"));
}

TEST(Directives, AbsentResourcesOmitted) {
  const ScriptContext ctx{"j1", "/w"};
  for (const auto* p : {&slurm_profile(), &pbs_profile(), &lsf_profile()}) {
    const auto d = render_directives(JobSpec{"/bin/true"}, *p, ctx);
    // Only the scheduler's own output/error capture remains.
    ASSERT_EQ(d.size(), 2u) << p->name;
    EXPECT_NE(d[0].find("/w/j1.out"), std::string::npos);
    EXPECT_NE(d[1].find("/w/j1.err"), std::string::npos);
  }
}

TEST(Directives, PbsAndLsfSized) {
  JobSpec s{"/bin/true"};
  s.resources.node_count = 2;
  s.resources.processes_per_node = 4;
  s.attributes.duration = std::chrono::minutes(10);
  const ScriptContext ctx{"j", "/w"};
  const auto pbs = render_directives(s, pbs_profile(), ctx);
  EXPECT_EQ(pbs[0], "#PBS -l select=2:mpiprocs=4:ncpus=4");
  EXPECT_EQ(pbs[1], "#PBS -l place=scatter:excl");
  EXPECT_EQ(pbs[2], "#PBS -l walltime=00:10:00");
  const auto lsf = render_directives(s, lsf_profile(), ctx);
  EXPECT_EQ(lsf[0], "#BSUB -n 8");
  EXPECT_EQ(lsf[1], "#BSUB -R \"span[ptile=4]\"");
  EXPECT_EQ(lsf[2], "#BSUB -x");
  EXPECT_EQ(lsf[3], "#BSUB -W 10");
}

TEST(Script, Deterministic) {
  for (const auto& c : golden_cases()) EXPECT_EQ(render_golden(c), render_golden(c)) << c.file;
}

TEST(Script, UnrenderableAttribute) {
  JobSpec s{"/bin/true"};
  s.attributes.custom["bad key!"] = "v";
  EXPECT_THROW(render_directives(s, slurm_profile(), {"j", "/w"}), UnrenderableAttribute);
  s.attributes.custom.clear();
  s.attributes.custom["comment"] = "say \"hi\"";
  EXPECT_THROW(render_directives(s, pbs_profile(), {"j", "/w"}), UnrenderableAttribute);
}

TEST(Script, WallTimeRendering) {
  using std::chrono::milliseconds;
  EXPECT_EQ(format_hms(milliseconds(600'000)), "00:10:00");
  EXPECT_EQ(format_hms(milliseconds(1)), "00:00:01");
  EXPECT_EQ(format_hms(milliseconds(100LL * 3600'000)), "100:00:00");
  EXPECT_EQ(duration_minutes(milliseconds(1)), 1);
  EXPECT_EQ(duration_minutes(milliseconds(90'500)), 2);
}

TEST(ExitCodeFile, Reading) {
  TempDir tmp;
  EXPECT_FALSE(read_exit_code_file(tmp / "missing.ec"));
  write_file(tmp / "a.ec", "42\n");
  EXPECT_EQ(read_exit_code_file(tmp / "a.ec"), 42);
  write_file(tmp / "b.ec", "42");
  EXPECT_FALSE(read_exit_code_file(tmp / "b.ec"));
  write_file(tmp / "c.ec", "4x\n");
  EXPECT_FALSE(read_exit_code_file(tmp / "c.ec"));
  EXPECT_EQ(exit_code_path("/w", "id"), fs::path("/w/id.ec"));
}

// The rendered script, run by a plain shell, preserves argv and writes the
// payload's exit code.
TEST(Script, RunsUnderShell) {
  TempDir tmp;
  JobSpec s;
  s.executable = "/bin/sh";
  s.arguments = {"-c", "printf '%s|' \"$@\" >\"$0\"; exit 5", (tmp / "argv").string(), "a b", "it's", "$X", ""};
  s.environment_policy = EnvironmentPolicy::kInheritNone;
  const ScriptContext ctx{"job", tmp.path()};
  write_file(tmp / "job.sh", render_submit_script(s, slurm_profile(), *find_builtin_launcher("single"), ctx));
  CommandRequest req;
  req.argv = {"/bin/sh", (tmp / "job.sh").string()};
  const auto r = ProcessCommandRunner().run(req);
  EXPECT_EQ(r.exit_code, 5);
  EXPECT_EQ(read_file(tmp / "argv"), "a b|it's|$X||");
  EXPECT_EQ(read_exit_code_file(tmp / "job.ec"), 5);
}
