#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(NNCALC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, ExitCodes) {
    EXPECT_EQ(run("generate --npts 10"), 0);
    EXPECT_EQ(run("generate --npts 2"), 2);
    EXPECT_EQ(run("generate --pattern moons"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("train --npts 60 --epochs 20 --learning-rate 1e6 --activation linear --output-activation linear"), 3);
}

TEST(Cli, TrainThenAnalyze) {
    const auto dir = std::filesystem::path(::testing::TempDir()) / "nncalc_cli";
    std::filesystem::remove_all(dir);
    ASSERT_EQ(run("train --npts 60 --epochs 5 --layers 4,4 --output " + dir.string()), 0);
    ASSERT_TRUE(std::filesystem::exists(dir / "model.json"));
    ASSERT_EQ(run("analyze --npts 60 --model " + (dir / "model.json").string() + " --output " + dir.string()), 0);
    const std::string csv = slurp(dir / "analytics.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "layer,class,k,n,m,D_hat,D_exact_or_NA,bound,nonzero_bins");
}

TEST(Cli, SweepIsByteIdentical) {
    const auto a = std::filesystem::path(::testing::TempDir()) / "nncalc_sw_a";
    const auto b = std::filesystem::path(::testing::TempDir()) / "nncalc_sw_b";
    const std::string args = "sweep --seeds 1,2 --noise-values 0,0.3 --node-values 2,3 --npts 60 --epochs 3 --layers 3,3";
    ASSERT_EQ(run(args + " --output " + a.string()), 0);
    ASSERT_EQ(run(args + " --output " + b.string()), 0);
    EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
    EXPECT_FALSE(slurp(a / "sweep.csv").empty());
}
