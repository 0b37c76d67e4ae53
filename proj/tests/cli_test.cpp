#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "octseg/io.hpp"
#include "octseg/phantom.hpp"
#include "temp_dir.hpp"

namespace octseg {
namespace {

using testing_support::TempDir;

int run(const std::string& args) {
  const std::string cmd = std::string(OCTSEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_spec(const fs::path& p) {
  PhantomSpec s;
  s.width = 64;
  s.height = 96;
  s.slices = 6;
  s.ilm_base = 25;
  s.rpe_base = 65;
  s.rpe_amp_x = 4;
  s.noise_std = 6;
  s.shadow_fraction = 0.02;
  std::ofstream(p) << encode_phantom_spec(s);
}

TEST(Cli, ConvertOneSliceTwoByTwo) {
  TempDir d;
  fs::create_directories(d / "in");
  std::ofstream(d / "in/s.txt") << "0 255\n128 64\n";
  ASSERT_EQ(run("convert --input " + (d / "in").string() + " --out " + (d / "ppm").string()), 0);
  const std::string bytes = slurp(d / "ppm/slice_0000.ppm");
  EXPECT_EQ(bytes.substr(0, 11), "P6\n2 2\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 12u);
}

TEST(Cli, PhantomThenEvalIdentity) {
  TempDir d;
  write_spec(d / "spec.kv");
  ASSERT_EQ(run("phantom --spec " + (d / "spec.kv").string() + " --out " + (d / "ph").string()), 0);
  const std::string truth = (d / "ph/rpe_truth.txt").string();
  ASSERT_EQ(run("eval --detected " + truth + " --truth " + truth + " --out " + (d / "m.txt").string()), 0);
  EXPECT_NE(slurp(d / "m.txt").find("mae = 0\n"), std::string::npos);
  EXPECT_EQ(load_ascan_text(d / "ph/volume").slices(), 6u);
}

TEST(Cli, SegmentThreadCountsAgreeByteForByte) {
  TempDir d;
  write_spec(d / "spec.kv");
  const std::string base = "segment --phantom " + (d / "spec.kv").string() + " --detector both --emit obj ";
  ASSERT_EQ(run(base + "--threads 1 --out " + (d / "t1").string()), 0);
  ASSERT_EQ(run(base + "--threads 4 --out " + (d / "t4").string()), 0);
  for (const char* f : {"rpe_surface.txt", "ilm_surface.txt", "rpe.obj", "ilm.obj"}) {
    const std::string a = slurp(d / "t1" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(d / "t4" / f)) << f;
  }
  EXPECT_TRUE(fs::exists(d / "t1/report.txt"));
}

TEST(Cli, SegmentWithConfigFileAndMetrics) {
  TempDir d;
  write_spec(d / "spec.kv");
  std::ofstream(d / "run.kv") << "phantom = " << (d / "spec.kv").string() << "\ndetector = canny\nemit = metrics\n";
  ASSERT_EQ(run("segment --config " + (d / "run.kv").string() + " --align --out " + (d / "o").string()), 0);
  EXPECT_NE(slurp(d / "o/metrics.txt").find("[canny]"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  TempDir d;
  write_spec(d / "spec.kv");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("segment --phantom " + (d / "spec.kv").string() + " --detector nonsense --out " + (d / "x").string()), 1);
  EXPECT_EQ(run("segment --out " + (d / "x").string()), 1);
  EXPECT_EQ(run("segment --input " + (d / "missing").string() + " --out " + (d / "x").string()), 2);
  EXPECT_EQ(run("convert --input " + (d / "missing").string()), 2);
  std::ofstream(d / "dark.kv") << "background_intensity = 0\ntissue_intensity = 0\nrpe_intensity = 0\nbelow_intensity = 0\n";
  EXPECT_EQ(run("segment --phantom " + (d / "dark.kv").string() + " --detector ilm --out " + (d / "x").string()), 3);
}

}  // namespace
}  // namespace octseg
