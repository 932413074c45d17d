#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "wavelab/io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("wavelab_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const fs::path& dir, const std::string& args) {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd =
      std::string(WAVELAB_CLI) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path write_config(const fs::path& dir, const std::string& text) {
  const auto p = dir / "run.ini";
  std::ofstream(p) << text;
  return p;
}

} // namespace

TEST(Cli, NoSubcommandIsAnInputError) {
  const auto dir = scratch("none");
  EXPECT_EQ(run(dir, "").code, 1);
  EXPECT_EQ(run(dir, "frobnicate").code, 1);
}

TEST(Cli, SolveWritesATrace) {
  const auto dir = scratch("solve");
  const auto cfg = write_config(dir, "[physics]\namplitude = 0.02\nsteps = 2\n");
  const auto r = run(dir, "solve --config " + cfg.string() + " --grid 33x17 --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0) << r.out << r.err;
  const auto trace = wavelab::read_json_file(dir / "out/trace/trace.json");
  EXPECT_EQ(trace["schema"], "wavelab.trace");
  EXPECT_TRUE(trace["complete"].get<bool>());
  EXPECT_EQ(trace["members"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "out/trace/member_000.json"));
  EXPECT_TRUE(fs::exists(dir / "out/trace/member_001.json"));
  EXPECT_TRUE(fs::exists(dir / "out/trace/laminar.csv"));
}

TEST(Cli, UnknownConfigKeyIsNamed) {
  const auto dir = scratch("badkey");
  const auto cfg = write_config(dir, "[vorticity]\nkind = constant\ngamma00 = 0.3\n");
  const auto r = run(dir, "solve --config " + cfg.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("gamma00"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST(Cli, UnreachableAmplitudeKeepsPartialTrace) {
  const auto dir = scratch("partial");
  const auto cfg = write_config(dir, "[physics]\namplitude = 0.9\nsteps = 6\n[solver]\nmax_iterations = 8\n");
  const auto r = run(dir, "solve --config " + cfg.string() + " --grid 33x17 --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 2) << r.out << r.err;
  const auto trace = wavelab::read_json_file(dir / "out/trace/trace.json");
  EXPECT_FALSE(trace["complete"].get<bool>());
  EXPECT_FALSE(trace["message"].get<std::string>().empty());
  EXPECT_GE(trace["members"].size(), 1u);
  for (const auto& m : trace["members"]) EXPECT_TRUE(fs::exists(dir / "out/trace" / m["file"].get<std::string>()));
}

TEST(Cli, AnalyzeAndReport) {
  const auto dir = scratch("analyze");
  const auto cfg = write_config(dir, "[physics]\namplitude = 0.01\nsteps = 2\n");
  const std::string common = " --config " + cfg.string() + " --grid 65x33 --out " + (dir / "out").string();
  ASSERT_EQ(run(dir, "solve" + common).code, 0);
  const auto r = run(dir, "analyze" + common + " --plots " + (dir / "out/trace").string());
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("overall: PASS"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "out/member_001.report.json"));
  EXPECT_TRUE(fs::exists(dir / "out/member_001.report.txt"));
  EXPECT_TRUE(fs::exists(dir / "out/member_001.field.csv"));
  EXPECT_TRUE(fs::exists(dir / "out/member_001.plots/surface.svg"));
  const auto rep = run(dir, "report " + (dir / "out/member_001.report.json").string());
  EXPECT_EQ(rep.code, 0) << rep.err;
  EXPECT_NE(rep.out.find("v_positive"), std::string::npos);
}

TEST(Cli, AnalyzeRejectsBadInput) {
  const auto dir = scratch("analyze_bad");
  EXPECT_EQ(run(dir, "analyze " + (dir / "missing.json").string()).code, 1);
  std::ofstream(dir / "junk.json") << "{\"schema\": \"other\", \"version\": 1}";
  const auto r = run(dir, "analyze " + (dir / "junk.json").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("schema"), std::string::npos) << r.out << r.err;
  EXPECT_EQ(run(dir, "report " + (dir / "junk.json").string()).code, 1);
}

TEST(Cli, AnalyzeFlagsCorruptedField) {
  const auto dir = scratch("corrupt");
  const auto cfg = write_config(dir, "[physics]\namplitude = 0.02\nsteps = 1\n");
  const std::string common = " --config " + cfg.string() + " --grid 33x17 --out " + (dir / "out").string();
  ASSERT_EQ(run(dir, "solve" + common).code, 0);
  auto j = wavelab::read_json_file(dir / "out/trace/member_000.json");
  j["h"][33 * 8 + 5] = j["h"][33 * 9 + 5].get<double>() + 0.2;
  wavelab::write_json_file(dir / "bad.json", j);
  const auto r = run(dir, "analyze" + common + " " + (dir / "bad.json").string());
  EXPECT_EQ(r.code, 2) << r.out << r.err;
  EXPECT_NE(r.out.find("field_invariants"), std::string::npos);
}

TEST(Cli, SweepIsDeterministic) {
  const auto dir = scratch("sweep");
  const std::string ini = "[grid]\nnq = 33\nnp = 17\n[physics]\nsteps = 2\n[run]\nseed = 7\nworkers = WORKERS\n"
                          "[sweep]\nvorticity = zero, affine:0.5\namplitudes = 0.01\n";
  auto with_workers = [&](const std::string& w) {
    std::string s = ini;
    s.replace(s.find("WORKERS"), 7, w);
    return s;
  };
  const auto c1 = write_config(dir, with_workers("2"));
  const auto a = run(dir, "sweep --config " + c1.string() + " --out " + (dir / "a").string());
  ASSERT_NE(a.code, 1) << a.err;
  const auto b = run(dir, "sweep --config " + c1.string() + " --out " + (dir / "b").string());
  const auto c3 = write_config(dir, with_workers("1"));
  const auto c = run(dir, "sweep --config " + c3.string() + " --out " + (dir / "c").string());
  EXPECT_EQ(a.code, b.code);
  const auto ja = slurp(dir / "a/sweep.json");
  EXPECT_FALSE(ja.empty());
  EXPECT_EQ(ja, slurp(dir / "b/sweep.json"));
  EXPECT_EQ(ja, slurp(dir / "c/sweep.json"));
  const auto sweep = wavelab::read_json_file(dir / "a/sweep.json");
  EXPECT_EQ(sweep["cells"].size(), 2u);
  EXPECT_EQ(sweep["seed"], 7);
}

TEST(Cli, SweepWithEmptyListsFails) {
  const auto dir = scratch("sweep_empty");
  const auto cfg = write_config(dir, "[sweep]\namplitudes = 0.01\n");
  const auto r = run(dir, "sweep --config " + cfg.string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("vorticity"), std::string::npos) << r.out << r.err;
}
