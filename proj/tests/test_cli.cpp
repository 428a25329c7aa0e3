// Runs the skewsplat binary end to end.

#include "skewsplat/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

using namespace skewsplat;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "skewsplat_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(SKEWSPLAT_CLI) + " " + args + " >/dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path fresh(const std::string& name) {
  const auto p = kRoot / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("fit1d --no-such-flag"), 2);
  EXPECT_EQ(run("fit1d --families cauchy --iters 1"), 2);
  EXPECT_EQ(run("fit1d --components 0"), 2);
  EXPECT_EQ(run("--threads 0 verify"), 2);
  EXPECT_EQ(run("verify --suites nope"), 2);
  EXPECT_EQ(run("fit-scene --kernel lorentz --iters 1"), 2);
  EXPECT_EQ(run("fit-scene --prims 0 --iters 1"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, ConfigFileRejectsUnknownKeys) {
  const auto dir = fresh("config");
  write_file_atomic(dir / "ok.toml", "seed = 3\n");
  write_file_atomic(dir / "bad.toml", "seed = 3\nsede = 4\n");
  EXPECT_EQ(run("--config " + q(dir / "ok.toml") + " verify --suites kernel --samples 5"), 0);
  EXPECT_EQ(run("--config " + q(dir / "bad.toml") + " verify --suites kernel --samples 5"), 2);
}

TEST(Cli, MissingInputExitsFour) {
  const auto dir = fresh("missing");
  EXPECT_EQ(run("--out-dir " + q(dir / "out") + " render --scene " + q(dir / "nope.txt") + " --cameras " +
                q(dir / "nope2.txt")),
            4);
}

TEST(Cli, CorruptSceneWritesNothing) {
  const auto dir = fresh("corrupt");
  write_cameras(dir / "cams.txt", {CameraModel{}});
  write_file_atomic(dir / "scene.txt", "skewsplat-scene 1 text 2\n0 0 0 1 0 0 0 0 0 0 0 0 0 0 0 0 0 0\n");
  EXPECT_EQ(run("--out-dir " + q(dir / "out") + " render --scene " + q(dir / "scene.txt") + " --cameras " +
                q(dir / "cams.txt")),
            4);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, EmptySceneRendersBackground) {
  const auto dir = fresh("empty");
  CameraModel cam;
  cam.width = 5;
  cam.height = 4;
  write_cameras(dir / "cams.txt", {cam});
  write_file_atomic(dir / "scene.txt", "skewsplat-scene 1 text 0\n");
  ASSERT_EQ(run("--out-dir " + q(dir / "out") + " render --background 0.2,0.4,1 --scene " + q(dir / "scene.txt") +
                " --cameras " + q(dir / "cams.txt")),
            0);
  const auto png = read_png(dir / "out" / "render_0.png");
  EXPECT_EQ(png.width, 5);
  EXPECT_NEAR(png.pixel(3, 2).y(), 0.4, 0.5 / 255);
  const auto f32 = parse_float_dump(read_file(dir / "out" / "render_0.f32"), 5, 4);
  EXPECT_EQ(f32.pixel(4, 3), Vec3(0.2f, 0.4f, 1.0f).cast<double>());
}

TEST(Cli, Fit1DOutputs) {
  const auto dir = fresh("fit1d");
  ASSERT_EQ(run("--out-dir " + q(dir) + " fit1d --iters 100 --seeds 2 --curve-samples 64"), 0);
  for (const char* f : {"summary.csv", "timings.csv", "curves.csv", "curves.svg", "report_skewnormal_seed1.txt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto summary = read_file(dir / "summary.csv");
  EXPECT_EQ(summary.find("time"), std::string::npos);
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 7);
  const auto curves = read_file(dir / "curves.csv");
  EXPECT_EQ(curves.substr(0, curves.find('\n')), "x,target,gaussian,skewnormal,halfgaussian");
}

TEST(Cli, FitSceneResumeMatchesStraightRun) {
  const auto a = fresh("scene_a"), b = fresh("scene_b");
  const std::string common = "fit-scene --prims 10 --synthetic-views 2 --synthetic-size 20 --bcd-t-start 5 "
                             "--bcd-cycle 4 --bcd-base 2";
  ASSERT_EQ(run("--seed 3 --out-dir " + q(a) + " " + common + " --iters 16"), 0);
  ASSERT_EQ(run("--seed 3 --out-dir " + q(b) + " " + common + " --iters 9"), 0);
  ASSERT_EQ(run("--seed 3 --out-dir " + q(b) + " " + common + " --iters 16 --resume " + q(b / "checkpoint")), 0);
  EXPECT_EQ(read_file(a / "metrics.csv"), read_file(b / "metrics.csv"));
  EXPECT_EQ(read_file(a / "scene.txt"), read_file(b / "scene.txt"));
  // The resumed loss log starts at the absolute iteration index.
  const auto loss = read_file(b / "loss.csv");
  EXPECT_EQ(loss.substr(0, 12), "iter,loss\n9,");
  EXPECT_TRUE(fs::exists(b / "render_view1.png"));
  EXPECT_TRUE(fs::exists(b / "cameras.txt"));
}

TEST(Cli, FitSceneFromFiles) {
  const auto synth = fresh("scene_synth"), dir = fresh("scene_files");
  ASSERT_EQ(run("--out-dir " + q(synth) + " fit-scene --prims 6 --synthetic-views 2 --synthetic-size 16 --iters 2"), 0);
  const std::string targets = q(synth / "target_view0.png") + "," + q(synth / "target_view1.png");
  EXPECT_EQ(run("--out-dir " + q(dir) + " fit-scene --prims 6 --iters 3 --cameras " + q(synth / "cameras.txt") +
                " --targets " + targets),
            0);
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
  // One target for two cameras.
  EXPECT_EQ(run("--out-dir " + q(dir) + " fit-scene --iters 1 --cameras " + q(synth / "cameras.txt") +
                " --targets " + q(synth / "target_view0.png")),
            2);
}

TEST(Cli, VerifyReducedMode) {
  EXPECT_EQ(run("verify --suites kernel,optimizer --samples 20"), 0);
}
