// Runs the command-line binary end to end.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "test_util.h"

namespace {

namespace fs = std::filesystem;
using crowdfair::testing::read_file;
using crowdfair::testing::write_file;

// Exit code of the binary; its stderr is echoed when the run fails.
int run(const std::string& args) {
  const auto err = fs::temp_directory_path() / "crowdfair_tests" / "cli_stderr.txt";
  const std::string cmd = std::string(CROWDFAIR_CLI) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) std::cerr << "[" << args << "] -> " << code << ": " << read_file(err);
  return code;
}

fs::path dir() {
  const auto d = fs::temp_directory_path() / "crowdfair_tests" / "cli";
  fs::create_directories(d);
  return d;
}

std::string p(const std::string& name) { return (dir() / name).string(); }

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("aggregate --votes x.csv"), 2);
}

TEST(Cli, AggregateMajorityVote) {
  const auto votes = write_file("cli_v.csv", "task_id,annotator_id,label\nt1,r1,1\nt1,r2,1\nt1,r3,0\n");
  const auto groups = write_file("cli_g.csv", "task_id,a\nt1,1\n");
  ASSERT_EQ(run("aggregate --votes " + votes.string() + " --groups " + groups.string() +
                " --method mv --out " + p("mv.csv")),
            0);
  const auto text = read_file(p("mv.csv"));
  EXPECT_EQ(first_line(text), "task_id,phi1,label,source");
  EXPECT_NE(text.find("t1,0.66666666666666"), std::string::npos);
  EXPECT_NE(text.find(",1,mv"), std::string::npos);
}

TEST(Cli, BayesWithoutTruthIsAUsageError) {
  const auto votes = write_file("cli_v2.csv", "task_id,annotator_id,label\nt1,r1,1\nt2,r1,0\n");
  const auto groups = write_file("cli_g2.csv", "task_id,a\nt1,1\nt2,0\n");
  EXPECT_EQ(run("aggregate --votes " + votes.string() + " --groups " + groups.string() +
                " --method bayes --out " + p("b.csv")),
            2);
  EXPECT_EQ(run("aggregate --votes " + p("missing.csv") + " --groups " + groups.string() +
                " --method mv --out " + p("b.csv")),
            1);
}

TEST(Cli, PipelineFromGeneratedData) {
  const auto d = dir() / "gen";
  ASSERT_EQ(run("generate --tasks 400 --pool 20 --votes-per-task 5 --seed 3 --out " + d.string()), 0);
  for (const char* f : {"votes.csv", "groups.csv", "truth.csv", "skills.csv"}) {
    EXPECT_TRUE(fs::exists(d / f)) << f;
  }
  const std::string data = " --votes " + (d / "votes.csv").string() + " --groups " +
                           (d / "groups.csv").string() + " --truth " + (d / "truth.csv").string();
  for (const char* method : {"mv", "bayes", "ds"}) {
    EXPECT_EQ(run("aggregate" + data + " --method " + method + " --out " + p(std::string("post_") + method + ".csv")),
              0)
        << method;
  }
  const std::string side = " --groups " + (d / "groups.csv").string() + " --truth " + (d / "truth.csv").string();
  ASSERT_EQ(run("fairify --posteriors " + p("post_ds.csv") + side + " --epsilon 0.05 --classifier " +
                p("rc.csv") + " --seed 2 --out " + p("fc.csv")),
            0);
  EXPECT_EQ(first_line(read_file(p("fc.csv"))), "task_id,q,label");
  EXPECT_EQ(first_line(read_file(p("rc.csv"))), "a,tau,omega,pi_hat,beta_star,delta");
  ASSERT_EQ(run("post-td --posteriors " + p("post_mv.csv") + side + " --epsilon 0.05 --out " + p("td.csv")), 0);
  EXPECT_EQ(first_line(read_file(p("td.csv"))), "task_id,q,label");

  // Same flags, same bytes.
  ASSERT_EQ(run("fairify --posteriors " + p("post_ds.csv") + side + " --epsilon 0.05 --seed 2 --out " +
                p("fc2.csv")),
            0);
  EXPECT_EQ(read_file(p("fc.csv")), read_file(p("fc2.csv")));
  EXPECT_EQ(run("fairify --posteriors " + p("post_ds.csv") + side + " --epsilon -1 --out " + p("fc3.csv")), 2);
}

TEST(Cli, ExperimentsAreDeterministic) {
  const std::string conv = "convergence --scenario uninformative --R 3,5 --tasks 500 --reps 2 --seed 9 --out ";
  ASSERT_EQ(run(conv + p("conv1.csv")), 0);
  ASSERT_EQ(run(conv + p("conv2.csv")), 0);
  EXPECT_EQ(read_file(p("conv1.csv")), read_file(p("conv2.csv")));

  const std::string trade =
      "tradeoff --synthetic --epsilons 0.05 --methods mv --fairifiers fc,post_td --resamples 2 --seed 4 --out ";
  ASSERT_EQ(run(trade + p("trade1.csv") + " --raw " + p("raw.csv")), 0);
  ASSERT_EQ(run(trade + p("trade2.csv")), 0);
  EXPECT_EQ(read_file(p("trade1.csv")), read_file(p("trade2.csv")));
  EXPECT_TRUE(fs::exists(p("raw.csv")));
}

TEST(Cli, VerifyTheory) {
  ASSERT_EQ(run("verify-theory --seed 0 --out " + p("theory.csv")), 0);
  const auto text = read_file(p("theory.csv"));
  EXPECT_EQ(first_line(text), "check_name,lhs,rhs,holds");
  EXPECT_NE(text.find("baillon_eta,0.4688"), std::string::npos);
  EXPECT_NE(text.find("feature_shift_dp_gap,0.3"), std::string::npos);
  EXPECT_EQ(text.find(",false"), std::string::npos);
}

}  // namespace
