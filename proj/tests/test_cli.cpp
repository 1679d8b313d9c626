#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <string>

#include "helpers.hpp"

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(IFSD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("synth"), 2);
    EXPECT_EQ(run("synth --out x --preset nope"), 2);
    EXPECT_EQ(run("correlate --trace a --out b --window sideways"), 2);
}

TEST(Cli, VersionAndHelpExitZero) {
    EXPECT_EQ(run("--version"), 0);
    EXPECT_EQ(run("--help"), 0);
    EXPECT_EQ(run("stats --help"), 0);
}

TEST(Cli, StageFailuresExitOne) {
    const auto dir = testutil::scratch("cli_fail");
    EXPECT_EQ(run("label --trace " + (dir / "missing.txt").string() + " --out " + (dir / "l.txt").string()), 1);
    EXPECT_EQ(run("synth --preset fig1_scene --out " + (dir / "t.txt").string()), 0);
    EXPECT_EQ(run("correlate --trace " + (dir / "t.txt").string() + " --out " + (dir / "s.csv").string() +
                  " --active-timeout 1"),
              0);
    // m in the space file is 10; asking for 5 is a mismatch.
    EXPECT_EQ(run("label --trace " + (dir / "t.txt").string() + " --out " + (dir / "l.txt").string()), 0);
    EXPECT_EQ(run("featurize --labels " + (dir / "l.txt").string() + " --space " + (dir / "s.csv").string() +
                  " --m 5 --out " + (dir / "x.csv").string()),
              1);
}

TEST(Cli, StagesChainEndToEnd) {
    const auto d = testutil::scratch("cli_chain");
    auto p = [&](const char* name) { return (d / name).string(); };
    ASSERT_EQ(run("synth --preset alignment_lag --seed 3 --out " + p("t.txt") + " --truth " + p("truth.csv")), 0);
    ASSERT_EQ(run("label --trace " + p("t.txt") + " --out " + p("l.txt") + " --threads 2"), 0);
    ASSERT_EQ(run("correlate --trace " + p("t.txt") + " --out " + p("s.csv") + " --threads 2"), 0);
    ASSERT_EQ(run("stats --labels " + p("l.txt") + " --space " + p("s.csv") + " --out " + p("stats")), 0);
    ASSERT_EQ(run("featurize --labels " + p("l.txt") + " --space " + p("s.csv") + " --out " + p("m.csv")), 0);
    ASSERT_EQ(run("split --matrix " + p("m.csv") + " --train " + p("tr.csv") + " --test " + p("te.csv")), 0);
    ASSERT_EQ(run("train --matrix " + p("tr.csv") + " --out " + p("model.txt")), 0);
    ASSERT_EQ(run("eval --model " + p("model.txt") + " --matrix " + p("te.csv") + " --out " + p("metrics.txt")), 0);
    const auto metrics = testutil::slurp(d / "metrics.txt");
    EXPECT_EQ(metrics.rfind("# ifsd-metrics v1", 0), 0u);
    EXPECT_NE(metrics.find("auroc="), std::string::npos);
    EXPECT_TRUE(std::filesystem::exists(d / "m.schema"));
}
