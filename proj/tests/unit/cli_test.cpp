#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(NVDNP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nvdnp_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("codes");
  EXPECT_EQ(run_cli("presets list"), 0);
  EXPECT_EQ(run_cli("presets show fig4d"), 0);
  EXPECT_EQ(run_cli("presets show nope"), 2);
  EXPECT_EQ(run_cli("toy --pa 0.5 --pb 0.2 --n 6"), 0);
  EXPECT_EQ(run_cli("toy --pa 1.5 --pb 0.2 --n 6"), 2);
  EXPECT_EQ(run_cli("toy --pa 0.5"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run fig1c --out " + (dir / "fig1c").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "fig1c" / "manifest.json"));
  EXPECT_EQ(run_cli("sweep fig4d --out " + (dir / "fig4d").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "fig4d" / "sweep.csv"));
  EXPECT_EQ(run_cli("sweep fig1c --out " + (dir / "x").string()), 2);

  std::ofstream(dir / "bad.ini") << "[system]\nb_mt = 0\n";
  EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
  std::ofstream(dir / "unknown.ini") << "[system]\nflux = 3\n";
  EXPECT_EQ(run_cli("run " + (dir / "unknown.ini").string()), 2);
  EXPECT_EQ(run_cli("run " + (dir / "missing.ini").string()), 2);

  std::ofstream(dir / "ok.seq") << "laser 250 ns\n";
  std::ofstream(dir / "bad.seq") << "laser 250 parsecs\n";
  EXPECT_EQ(run_cli("parse " + (dir / "ok.seq").string()), 0);
  EXPECT_EQ(run_cli("fmt " + (dir / "ok.seq").string()), 0);
  EXPECT_EQ(run_cli("parse " + (dir / "bad.seq").string()), 2);
  EXPECT_EQ(run_cli("parse " + (dir / "absent.seq").string()), 1);

  // An output path that is a regular file cannot become a directory.
  std::ofstream(dir / "blocker") << "x";
  EXPECT_EQ(run_cli("run fig1c --out " + (dir / "blocker").string()), 1);
}

TEST(Cli, FmtWriteIsCanonical) {
  const fs::path dir = scratch("fmt");
  std::ofstream(dir / "p.seq") << "laser 250 ns\nrepeat 2 { readout x }\n";
  ASSERT_EQ(run_cli("fmt -w " + (dir / "p.seq").string()), 0);
  std::ifstream in(dir / "p.seq");
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "laser 0.25 us walk\nrepeat 2 {\n  readout x\n}\n");
}
