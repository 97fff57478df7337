#include <gtest/gtest.h>

#include <random>

#include "psij/errors.hpp"
#include "psij/scheduler_profile.hpp"

using namespace psij;
using Kind = StatusObservation::Kind;

TEST(NativeId, SlurmSubmitOutput) {
  EXPECT_EQ(parse_native_id("Submitted batch job 12345\n", slurm_profile()), "12345");
}

TEST(NativeId, PbsSubmitOutput) {
  EXPECT_EQ(parse_native_id("12345.servername\n", pbs_profile()), "12345.servername");
  EXPECT_EQ(parse_native_id("  77  \n", pbs_profile()), "77");
}

TEST(NativeId, LsfSubmitOutput) {
  EXPECT_EQ(parse_native_id("Job <981> is submitted to default queue <normal>.\n", lsf_profile()), "981");
}

TEST(NativeId, EmptyOutputIsUnparseable) {
  for (const auto* p : {&slurm_profile(), &pbs_profile(), &lsf_profile()}) {
    EXPECT_THROW(parse_native_id("", *p), UnparseableSubmitOutput) << p->name;
    EXPECT_THROW(parse_native_id("sbatch: error: invalid partition\n", *p), UnparseableSubmitOutput) << p->name;
  }
}

TEST(NativeId, ManyIdsInOrder) {
  EXPECT_EQ(parse_native_ids("Submitted batch job 4\nSubmitted batch job 5\nSubmitted batch job 6\n", slurm_profile()),
            (std::vector<std::string>{"4", "5", "6"}));
}

TEST(StatusOutput, SlurmMapsAndMarksAbsent) {
  const auto obs = parse_status_output("1 PENDING\n2 RUNNING\n3 COMPLETED\n", {"1", "2", "3", "4"}, slurm_profile());
  EXPECT_EQ(obs.at("1").state, JobState::kQueued);
  EXPECT_EQ(obs.at("2").state, JobState::kActive);
  EXPECT_EQ(obs.at("3").state, JobState::kCompleted);
  EXPECT_EQ(obs.at("3").metadata.at("native_state"), "COMPLETED");
  EXPECT_EQ(obs.at("4").kind, Kind::kAbsent);
}

TEST(StatusOutput, PbsSkipsHeadersAndMatchesShortIds) {
  const std::string out =
      "Job id            Name             User              Time Use S Queue\n"
      "----------------  ---------------- ----------------  -------- - -----\n"
      "12.mockserver     job              user              00:00:00 R batch\n"
      "13.mock           job              user              00:00:00 F batch\n";
  const auto obs = parse_status_output(out, {"12.mockserver", "13.mockserver"}, pbs_profile());
  EXPECT_EQ(obs.at("12.mockserver").state, JobState::kActive);
  EXPECT_EQ(obs.at("13.mockserver").state, JobState::kCompleted);
}

TEST(StatusOutput, LsfTokens) {
  const auto obs = parse_status_output("7 PEND\n8 EXIT\n", {"7", "8"}, lsf_profile());
  EXPECT_EQ(obs.at("7").state, JobState::kQueued);
  EXPECT_EQ(obs.at("8").state, JobState::kFailed);
}

TEST(StatusOutput, UnmappedTokenIsNeverDefaulted) {
  const auto obs = parse_status_output("1 %3?\n", {"1"}, slurm_profile());
  EXPECT_EQ(obs.at("1").kind, Kind::kUnmapped);
  EXPECT_EQ(obs.at("1").token, "%3?");
}

TEST(StatusOutput, MockAlphabetIsTotal) {
  const std::map<std::string, std::vector<std::string>> alphabet = {
      {"slurm", {"PENDING", "RUNNING", "COMPLETED", "FAILED", "CANCELLED"}},
      {"pbs", {"Q", "R", "F"}},
      {"lsf", {"PEND", "RUN", "DONE", "EXIT"}},
  };
  for (const auto& [name, tokens] : alphabet) {
    const auto profile = *find_profile(name);
    for (const auto& t : tokens) EXPECT_TRUE(profile.state_map.count(t)) << name << " " << t;
  }
}

// Random lines over a token alphabet that mixes valid tokens, garbled ones
// and junk: every present id is either mapped exactly per state_map or
// reported unmapped with its raw token.
TEST(StatusOutput, FuzzNeverSilentlyDefaults) {
  std::mt19937 rng(99);
  for (const auto* p : {&slurm_profile(), &pbs_profile(), &lsf_profile()}) {
    std::vector<std::string> tokens;
    for (const auto& [t, s] : p->state_map) tokens.push_back(t);
    for (const char* junk : {"%1?", "??", "RUNNINGX", "pend", "0", "-", "\xff\xfe", "CANCELLED+"}) tokens.push_back(junk);
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    std::uniform_int_distribution<int> count(0, 8);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<std::string> ids;
      std::map<std::string, std::string> truth;
      std::string out;
      if (p->name == "pbs") out += "Job id  Name  User  Time Use S Queue\n---- ---- ----\n";
      const int n = count(rng);
      for (int i = 0; i < n; ++i) {
        const std::string id = std::to_string(100 + i);
        ids.push_back(id);
        if (rng() % 4 == 0) continue;  // absent
        const std::string tok = tokens[pick(rng)];
        truth[id] = tok;
        if (p->name == "pbs") {
          out += id + " job user 00:00:00 " + tok + " batch\n";
        } else {
          out += id + " " + tok + "\n";
        }
      }
      if (rng() % 3 == 0) out += "garbage line without enough\n";
      const auto obs = parse_status_output(out, ids, *p);
      ASSERT_EQ(obs.size(), ids.size());
      for (const auto& id : ids) {
        const auto& o = obs.at(id);
        auto t = truth.find(id);
        if (t == truth.end()) {
          ASSERT_EQ(o.kind, Kind::kAbsent);
          continue;
        }
        ASSERT_EQ(o.token, t->second);
        auto m = p->state_map.find(t->second);
        if (m == p->state_map.end()) {
          ASSERT_EQ(o.kind, Kind::kUnmapped) << p->name << " " << t->second;
        } else {
          ASSERT_EQ(o.kind, Kind::kKnown);
          ASSERT_EQ(o.state, m->second);
        }
      }
    }
  }
}

TEST(Profiles, BuiltinsValidate) {
  for (const auto* p : {&slurm_profile(), &pbs_profile(), &lsf_profile()}) EXPECT_NO_THROW(validate_profile(*p));
  auto bad = slurm_profile();
  bad.native_id_pattern = "([0-9]+)-([0-9]+)";
  EXPECT_THROW(validate_profile(bad), PluginError);
  bad = slurm_profile();
  bad.state_map["X"] = JobState::kNew;
  EXPECT_THROW(validate_profile(bad), PluginError);
  EXPECT_FALSE(find_profile("sge"));
}

TEST(Commands, Expansion) {
  EXPECT_EQ(expand_command(slurm_profile().status_command, {}, {"1", "2"}),
            (std::vector<std::string>{"squeue", "--noheader", "--format=%i %T", "--states=all", "--jobs=1,2"}));
  EXPECT_EQ(expand_command(pbs_profile().status_command, {}, {"1.s", "2.s"}),
            (std::vector<std::string>{"qstat", "-x", "1.s", "2.s"}));
  EXPECT_EQ(expand_command(slurm_profile().submit_command, {"/a.sh", "/b.sh"}, {}),
            (std::vector<std::string>{"sbatch", "/a.sh", "/b.sh"}));
  EXPECT_EQ(expand_command(lsf_profile().cancel_command, {}, {"9"}), (std::vector<std::string>{"bkill", "9"}));
}
