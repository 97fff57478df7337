#pragma once

// Fixed (spec x profile x launcher) matrix for the submit-script goldens.

#include <string>
#include <vector>

#include "psij/launcher.hpp"
#include "psij/scheduler_profile.hpp"
#include "psij/submit_script.hpp"

namespace psij::testing {

struct GoldenCase {
  std::string file;  // under the golden directory
  JobSpec spec;
  std::string profile;
  std::string launcher;
};

inline std::vector<GoldenCase> golden_cases() {
  using namespace std::chrono_literals;

  JobSpec minimal;
  minimal.executable = "/bin/date";

  JobSpec sized;
  sized.executable = "/opt/app/bin/solver";
  sized.arguments = {"--input", "case 1.dat"};
  sized.resources.node_count = 2;
  sized.resources.processes_per_node = 4;
  sized.attributes.duration = 10min;
  sized.attributes.queue_name = "batch";
  sized.name = "solver";

  JobSpec mpi;
  mpi.executable = "app";
  mpi.arguments = {"-x", "it's $HOME"};
  mpi.directory = "/scratch/run 7";
  mpi.environment_policy = EnvironmentPolicy::kInheritAll;
  mpi.environment_overrides = {{"OMP_NUM_THREADS", "2"}, {"GREETING", "hello world"}};
  mpi.resources.process_count = 8;
  mpi.resources.cpu_cores_per_process = 2;
  mpi.resources.gpu_cores_per_process = 1;
  mpi.attributes.duration = 90s + 500ms;
  mpi.attributes.account = "proj42";

  JobSpec multi;
  multi.executable = "/usr/bin/env";
  multi.stdin_path = "/data/in.txt";
  multi.stdout_path = "/data/out.txt";
  multi.stderr_path = "/data/out.txt";
  multi.attributes.merge_output = true;
  multi.resources.node_count = 1;
  multi.resources.process_count = 3;
  multi.resources.exclusive_node_use = false;
  multi.attributes.reservation = "maint window";
  multi.attributes.custom = {{"slurm.constraint", "haswell"}, {"pbs.m", "abe"}, {"lsf.B", ""}};
  multi.name = "fan out";

  std::vector<GoldenCase> cases;
  for (const std::string profile : {"slurm", "pbs", "lsf"}) {
    cases.push_back({profile + "_minimal_single.sh", minimal, profile, "single"});
    cases.push_back({profile + "_sized_single.sh", sized, profile, "single"});
    cases.push_back({profile + "_env_mpirun.sh", mpi, profile, "mpirun"});
    cases.push_back({profile + "_merged_multi.sh", multi, profile, "multi"});
  }
  return cases;
}

inline ScriptContext golden_context() { return {"00000000-0000-4000-8000-000000000001", "/home/user/.psij-kit/work/mock"}; }

inline std::string render_golden(const GoldenCase& c) {
  return render_submit_script(c.spec, *find_profile(c.profile), *find_builtin_launcher(c.launcher), golden_context());
}

}  // namespace psij::testing
