#include "rodlim/config.hpp"
#include "rodlim/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace rodlim;
namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "rodlim_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "fixture.toml") << "schema_version = 1\nseed = 3\n\n[section]\ngenerator = \"disc\"\nrings = 3\n\n"
                                         "[rod]\nalpha = 3.0\nf2 = \"const:0.01\"\nnodes = 33\n\n"
                                         "[beam3d]\nh = 0.2\naxial_elems = 4\n\n"
                                         "[ladder]\nh = [0.2, 0.1, 0.05]\naxial_elems = [4, 8, 16]\nrod_nodes = 33\n";
    return d;
  }();
  return dir;
}

struct Result {
  int code;
  std::string err;
};

Result run(const std::string& args) {
  const fs::path err = work_dir() / "stderr.txt";
  const std::string cmd =
      std::string(RODLIM_CLI) + " -q " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text_file(err.string())};
}

std::string fixture() { return (work_dir() / "fixture.toml").string(); }
std::string out(const std::string& name) { return (work_dir() / name).string(); }

void expect_run_files(const std::string& dir) {
  EXPECT_TRUE(fs::exists(fs::path(dir) / "config_snapshot.toml"));
  const auto m = nlohmann::json::parse(read_text_file((fs::path(dir) / "manifest.json").string()));
  EXPECT_EQ(m["tool"], "rodlim");
  EXPECT_EQ(m["version"], kToolVersion);
  EXPECT_EQ(m["config_hash"].get<std::string>().size(), 64u);
  for (const auto& f : m["files"])
    EXPECT_EQ(f["sha256"], sha256_file((fs::path(dir) / f["path"].get<std::string>()).string())) << f["path"];
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  const Result r = run("rod solve --config " + fixture() + " --out " + out("nostiff"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--stiffness"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("\"status\":\"error\""), std::string::npos) << r.err;
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, ConfigErrorsExitWithOne) {
  std::ofstream(work_dir() / "bad.toml") << "schema_version = 9\n";
  Result r = run("cell solve --config " + out("bad.toml") + " --out " + out("bad"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("schema_version"), std::string::npos);
  std::ofstream(work_dir() / "unknown.toml") << "schema_version = 1\n[rod]\nlenght = 2.0\n";
  r = run("cell solve --config " + out("unknown.toml") + " --out " + out("bad"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("rod.lenght"), std::string::npos);
  r = run("cell solve --config " + fixture());  // no output directory
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("output.dir"), std::string::npos);
  r = run("rod solve --config " + fixture() + " --stiffness " + out("missing.json") + " --out " + out("bad"));
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, CellThenRodPipeline) {
  ASSERT_EQ(run("cell solve --config " + fixture() + " --out " + out("cell")).code, 0);
  expect_run_files(out("cell"));
  const ReducedStiffness q = read_reduced_stiffness(out("cell/reduced_stiffness.json"));
  EXPECT_NEAR(q.E_mod, 2.5, 1e-12);

  ASSERT_EQ(run("rod solve --config " + fixture() + " --stiffness " + out("cell/reduced_stiffness.json") +
                " --out " + out("rod"))
                .code,
            0);
  expect_run_files(out("rod"));
  const auto el = nlohmann::json::parse(read_text_file(out("rod/el_residuals.json")));
  EXPECT_LT(el["max_el"].get<double>(), 1e-8);

  // A stiffness file with a missing key is rejected by name.
  std::ofstream(work_dir() / "noE.json") << R"({"schema_version": 1, "Q1": [[1,0,0],[0,1,0],[0,0,1]]})";
  const Result r = run("rod solve --stiffness " + out("noE.json") + " --out " + out("bad"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("'E'"), std::string::npos) << r.err;
}

TEST(Cli, RerunsAreByteIdentical) {
  for (const std::string cmd : {"material check --samples 200", "cell solve", "beam3d minimize"}) {
    const std::string a = out("rerun_a"), b = out("rerun_b");
    fs::remove_all(a);
    fs::remove_all(b);
    ASSERT_EQ(run(cmd + " --config " + fixture() + " --out " + a).code, 0) << cmd;
    ASSERT_EQ(run(cmd + " --config " + fixture() + " --out " + b).code, 0) << cmd;
    EXPECT_EQ(read_text_file(a + "/manifest.json"), read_text_file(b + "/manifest.json")) << cmd;
    expect_run_files(a);
  }
}

TEST(Cli, SnapshotReproducesTheRun) {
  const std::string a = out("snap_a"), b = out("snap_b");
  ASSERT_EQ(run("beam3d minimize --config " + fixture() + " --out " + a).code, 0);
  ASSERT_EQ(run("beam3d minimize --config " + a + "/config_snapshot.toml --out " + b).code, 0);
  EXPECT_EQ(read_text_file(a + "/manifest.json"), read_text_file(b + "/manifest.json"));
  EXPECT_TRUE(fs::exists(fs::path(b) / "deformation.bin"));
  EXPECT_TRUE(fs::exists(fs::path(b) / "observables.csv"));
  EXPECT_TRUE(fs::exists(fs::path(b) / "diagnostics.json"));
}

TEST(Cli, SectionInfoOnMeshFile) {
  ASSERT_EQ(run("cell solve --config " + fixture() + " --out " + out("cell2")).code, 0);
  ASSERT_EQ(run("section info " + out("cell2/section.json") + " --out " + out("sec")).code, 0);
  const auto j = nlohmann::json::parse(read_text_file(out("sec/section_info.json")));
  EXPECT_NEAR(j["normalized_section"]["area"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(j["input"]["triangles"], 54);
  EXPECT_EQ(run("section info " + out("nothing.json") + " --out " + out("sec2")).code, 1);
}

TEST(Cli, ConvergeRunAndReportPlot) {
  const std::string dir = out("ladder");
  ASSERT_EQ(run("converge run --spec " + fixture() + " --out " + dir).code, 0);
  expect_run_files(dir);
  for (const char* f : {"ladder.csv", "rates.json", "rung_00/observables.csv", "rung_02/diagnostics.json"})
    EXPECT_TRUE(fs::exists(fs::path(dir) / f)) << f;
  const std::string rep = out("report");
  ASSERT_EQ(run("report plot --ladder " + dir + "/ladder.csv --out " + rep).code, 0);
  expect_run_files(rep);
  // ladder.csv does not carry the reference residual, so only the fits are compared.
  const auto ran = nlohmann::json::parse(read_text_file(dir + "/rates.json"));
  const auto replot = nlohmann::json::parse(read_text_file(rep + "/rates.json"));
  EXPECT_EQ(ran["rates"], replot["rates"]);
  EXPECT_TRUE(replot["reference_el_residual"].is_null());
}

TEST(Cli, NumericalFailureExitsWithTwo) {
  std::ofstream(work_dir() / "tight.toml") << "schema_version = 1\n[section]\nrings = 2\n[rod]\nf2 = \"const:0.01\"\n"
                                              "[solver]\nmax_iterations = 1\n[beam3d]\nh = 0.2\naxial_elems = 4\n";
  const Result r = run("beam3d minimize --config " + out("tight.toml") + " --out " + out("tight"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("convergence"), std::string::npos) << r.err;
}
