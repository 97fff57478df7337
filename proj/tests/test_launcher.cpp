#include <gtest/gtest.h>

#include "psij/errors.hpp"
#include "psij/launcher.hpp"

using namespace psij;

namespace {

JobSpec app_spec() {
  JobSpec s;
  s.executable = "app";
  s.arguments = {"-x"};
  return s;
}

LaunchLine render(const std::string& name, const JobSpec& spec) {
  return render_launch_line(*find_builtin_launcher(name), spec);
}

}  // namespace

TEST(Launcher, SingleIsIdentity) {
  EXPECT_EQ(render("single", app_spec()), (LaunchLine{{"app", "-x"}, 1}));
}

TEST(Launcher, MpirunWithProcessCount) {
  JobSpec s = app_spec();
  s.resources.process_count = 8;
  EXPECT_EQ(render("mpirun", s), (LaunchLine{{"mpirun", "-np", "8", "app", "-x"}, 1}));
}

TEST(Launcher, MpirunWithoutGeometry) {
  EXPECT_THROW(render("mpirun", app_spec()), UnresolvablePlaceholder);
}

TEST(Launcher, GoldenTable) {
  JobSpec s = app_spec();
  s.arguments = {"a b", "", "$HOME"};
  s.resources.node_count = 2;
  s.resources.processes_per_node = 3;
  EXPECT_EQ(render("single", s).tokens, (std::vector<std::string>{"app", "a b", "", "$HOME"}));
  EXPECT_EQ(render("multi", s), (LaunchLine{{"app", "a b", "", "$HOME"}, 6}));
  EXPECT_EQ(render("mpirun", s).tokens, (std::vector<std::string>{"mpirun", "-np", "6", "app", "a b", "", "$HOME"}));
  EXPECT_EQ(render("srun", s).tokens, (std::vector<std::string>{"srun", "--ntasks=6", "app", "a b", "", "$HOME"}));
  EXPECT_EQ(render("aprun", s).tokens,
            (std::vector<std::string>{"aprun", "-n", "6", "-N", "3", "app", "a b", "", "$HOME"}));
  EXPECT_EQ(render("jsrun", s).tokens, (std::vector<std::string>{"jsrun", "--np", "6", "app", "a b", "", "$HOME"}));
}

TEST(Launcher, PpnFromEvenDivision) {
  JobSpec s = app_spec();
  s.resources.node_count = 2;
  s.resources.process_count = 8;
  EXPECT_EQ(render("aprun", s).tokens[4], "4");
  s.resources.process_count = 7;
  EXPECT_THROW(render("aprun", s), UnresolvablePlaceholder);
}

TEST(Launcher, MultiNeedsCount) {
  EXPECT_THROW(render("multi", app_spec()), UnresolvablePlaceholder);
}

TEST(Launcher, TemplateRules) {
  EXPECT_THROW(validate_launcher({"bad", {"{ARGS}"}, false}), PluginError);
  EXPECT_THROW(validate_launcher({"bad", {"{EXECUTABLE}", "{EXECUTABLE}", "{ARGS}"}, false}), PluginError);
  EXPECT_THROW(validate_launcher({"bad", {"{ARGS}", "{EXECUTABLE}"}, false}), PluginError);
  EXPECT_THROW(validate_launcher({"", {"{EXECUTABLE}", "{ARGS}"}, false}), PluginError);
  EXPECT_NO_THROW(validate_launcher({"wrap", {"env", "OMP={PPN}", "{EXECUTABLE}", "{ARGS}"}, false}));
  for (const auto& l : builtin_launchers()) EXPECT_NO_THROW(validate_launcher(l)) << l.name;
}

TEST(Launcher, ResolveDefaultsToSingle) {
  EXPECT_EQ(resolve_launcher(app_spec()).name, "single");
  JobSpec s = app_spec();
  s.launcher = "nope";
  EXPECT_THROW(resolve_launcher(s), UnknownLauncher);
}

TEST(ShellQuote, Goldens) {
  EXPECT_EQ(shell_quote("plain/path-1.0"), "plain/path-1.0");
  EXPECT_EQ(shell_quote(""), "''");
  EXPECT_EQ(shell_quote("a b"), "'a b'");
  EXPECT_EQ(shell_quote("it's"), "'it'\\''s'");
  EXPECT_EQ(shell_quote("$HOME;rm"), "'$HOME;rm'");
}
