#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(NPC_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), int(buf.size()), p)) r.out += buf.data();
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(NPC_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("npc_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

// Small, short, frozen-pump config derived from the shipped single-pump config.
fs::path tiny_config(const fs::path& dir, double r_abs) {
  std::ifstream in(config("single_pump.json"));
  auto j = nlohmann::json::parse(in);
  j["crystal"]["length_mm"] = 0.8;
  j["pump"]["ratio_r_abs"] = r_abs;
  j["simulation"] = {{"nx", 64},        {"ny", 16}, {"nt", 16}, {"x_cells_per_Gx", 8}, {"Ly_um", 200.0},
                     {"T_ps", 0.3},     {"trajectories", 2},    {"seed", 4},         {"frozen_pump", true},
                     {"snapshots_z_mm", {0.0, 0.4, 0.8}}};
  fs::create_directories(dir);
  const fs::path p = dir / ("tiny_" + std::to_string(int(r_abs)) + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("bogus").code, 2);
  EXPECT_EQ(run("qpm").code, 2);
  EXPECT_EQ(run("modes").code, 2);
  EXPECT_EQ(run("modes --point 1").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ModesAtSinglePump) {
  const auto r = run("modes --point 0,0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gamma_S0 = 1.0000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Lambda+/gbar = 1.6180"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Lambda-/gbar = 0.6180"), std::string::npos) << r.out;
}

TEST(Cli, ModesAtBalancedPumps) {
  const auto r = run("modes --point 1,0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gamma_S0 = 1.4142"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("gamma_S11 = 0.7071"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Lambda+/gbar = 2.1213"), std::string::npos) << r.out;
  const auto a = run("modes --point 1,3.141592653589793");
  EXPECT_NE(a.out.find("gamma_S0 = 0.0000"), std::string::npos) << a.out;
}

TEST(Cli, LandscapeExtrema) {
  const auto dir = scratch("landscape");
  const auto r = run("modes --landscape --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("max 2.121320, min 0.707107"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "fig5_landscape.txt"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Cli, QpmWritesBranchesAndManifest) {
  const auto dir = scratch("qpm");
  const auto r = run("qpm " + config("single_pump.json") + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"branch_S0.txt", "branch_S11.txt", "branch_S22.txt", "branch_S0.bin",
                        "branch_S0.bin.json", "shared_S0_S11.txt", "manifest.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "manifest.json");
  const auto m = nlohmann::json::parse(in);
  EXPECT_EQ(m["command"], "qpm");
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
  for (const auto& f : m["outputs"]) EXPECT_TRUE(fs::exists(dir / f.get<std::string>())) << f;
  fs::remove_all(dir);
}

TEST(Cli, OffResonanceHasFourSharedLines) {
  const auto dir = scratch("qpm_off");
  const auto r = run("qpm " + config("off_resonance.json") + " --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  std::size_t lines = 0;
  for (auto pos = r.out.find("shared "); pos != std::string::npos; pos = r.out.find("shared ", pos + 1)) {
    const auto eol = r.out.find('\n', pos);
    EXPECT_EQ(r.out.substr(pos, eol - pos).find(" 0 points"), std::string::npos) << r.out;
    ++lines;
  }
  EXPECT_EQ(lines, 4u);
  fs::remove_all(dir);
}

TEST(Cli, SimulateThenAnalyze) {
  const auto dir = scratch("sim");
  const auto a = tiny_config(dir, 0), b = tiny_config(dir, 1);
  const auto ra = run("simulate " + a.string() + " --out " + (dir / "single").string());
  ASSERT_EQ(ra.code, 0) << ra.out;
  const auto rb = run("simulate " + b.string() + " --trajectories 3 --out " + (dir / "dual").string());
  ASSERT_EQ(rb.code, 0) << rb.out;
  EXPECT_NE(rb.out.find("3 trajectories"), std::string::npos) << rb.out;
  EXPECT_TRUE(fs::exists(dir / "single" / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "single" / "snapshot_002_abs2.bin"));

  const auto f3 = run("analyze " + (dir / "single").string() + " --figure fig3 --out " + (dir / "fig3").string());
  ASSERT_EQ(f3.code, 0) << f3.out;
  EXPECT_TRUE(fs::exists(dir / "fig3" / "fig3_single_qxqy.txt"));
  EXPECT_TRUE(fs::exists(dir / "fig3" / "fig3_single_qxlambda.txt"));

  // Too short for fits; curves and the comparison table are still written.
  const auto f4 = run("analyze " + (dir / "dual").string() + " " + (dir / "single").string() +
                      " --figure fig4 --out " + (dir / "fig4").string());
  ASSERT_EQ(f4.code, 0) << f4.out;
  EXPECT_TRUE(fs::exists(dir / "fig4" / "fig4_gain_curves_dual.txt"));
  EXPECT_TRUE(fs::exists(dir / "fig4" / "fig4_comparison.txt"));
  EXPECT_NE(f4.out.find("warning"), std::string::npos) << f4.out;
  fs::remove_all(dir);
}

TEST(Cli, MissingInputsExitWithFour) {
  EXPECT_EQ(run("analyze /nonexistent/run --figure fig4 --out /tmp/npc_never").code, 4);
  EXPECT_EQ(run("qpm /nonexistent/config.json --out /tmp/npc_never").code, 4);
}

TEST(Cli, BadConfigExitsWithTwo) {
  const auto dir = scratch("bad");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\n  \"crystal\": {,\n}\n";
  const auto r = run("qpm " + (dir / "bad.json").string() + " --out " + (dir / "o").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("bad.json:2:"), std::string::npos) << r.out;
  fs::remove_all(dir);
}
