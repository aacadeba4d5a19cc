#include <doctest.h>

#include <filesystem>

#include "gtx/runner.hpp"
#include "gtx/util.hpp"

using namespace gtx;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const std::string& name) {
  const std::string path = "/tmp/gtx_cli_test_" + name;
  fs::remove_all(path);
  return path;
}

}  // namespace

TEST_CASE("config parsing and schema") {
  SUBCASE("sections and values") {
    Config c = parse_config("# comment\n[alpha]\nx = 1\ny = hello world\n[beta]\nz = 2.5, 3.5\n");
    CHECK(c.get_int("alpha.x", 0) == 1);
    CHECK(c.get("alpha.y", "") == "hello world");
    auto zs = c.get_doubles("beta.z", {});
    REQUIRE(zs.size() == 2);
    CHECK(zs[1] == 3.5);
  }
  SUBCASE("unknown keys are rejected by name") {
    Config c = parse_config("[convergence]\nseedz = 8\n");
    CHECK_THROWS_WITH_AS(validate_config(c, {{"convergence.seeds", "int", ""}}),
                         doctest::Contains("convergence.seedz"), std::runtime_error);
  }
  SUBCASE("duplicate keys are rejected") {
    CHECK_THROWS_AS(parse_config("[a]\nx = 1\nx = 2\n"), std::runtime_error);
  }
  SUBCASE("published schema names every command") {
    const std::string s = schema_text();
    for (const char* cmd : {"convergence", "transfer-grid", "ablation", "terrain"})
      CHECK(s.find(cmd) != std::string::npos);
    CHECK(s.find("convergence.eps_exponent") != std::string::npos);
  }
}

TEST_CASE("manifest hashing masks wallclock columns") {
  const std::string dir = fresh_dir("hash");
  fs::create_directories(dir);
  write_text_file(dir + "/a.csv", "model,metric,wallclock_s\nm,0.5,1.234\n");
  write_text_file(dir + "/b.csv", "model,metric,wallclock_s\nm,0.5,9.876\n");
  CHECK(manifest_hash_file(dir + "/a.csv") == manifest_hash_file(dir + "/b.csv"));
  write_text_file(dir + "/c.csv", "model,metric,wallclock_s\nm,0.6,1.234\n");
  CHECK(manifest_hash_file(dir + "/a.csv") != manifest_hash_file(dir + "/c.csv"));
}

TEST_CASE("gradcheck command produces a green artifact") {
  const std::string out = fresh_dir("gradcheck");
  ExperimentSpec spec;
  spec.command = "gradcheck";
  spec.out_dir = out;
  CHECK(run_experiment(spec) == 0);
  CHECK(fs::exists(fs::path(out) / "MANIFEST"));
  CHECK(fs::exists(fs::path(out) / "gradcheck.csv"));
  CHECK(fs::exists(fs::path(out) / "report.txt"));
  CsvTable t = read_csv(out + "/gradcheck.csv");
  CHECK(t.rows.size() >= 20);
  const int ce = t.col("max_rel_error");
  for (const auto& r : t.rows) CHECK(std::stod(r[ce]) < 1e-4);
}

TEST_CASE("resume semantics") {
  const std::string out = fresh_dir("resume");
  ExperimentSpec spec;
  spec.command = "selftest";
  spec.out_dir = out;
  REQUIRE(run_experiment(spec) == 0);

  SUBCASE("rerunning without --resume refuses") {
    CHECK_THROWS_WITH_AS(run_experiment(spec), doctest::Contains("--resume"), std::runtime_error);
  }
  SUBCASE("resume with the same config reruns cleanly") {
    ExperimentSpec again = spec;
    again.resume = true;
    CHECK(run_experiment(again) == 0);
  }
  SUBCASE("resume with a different config refuses with a diff") {
    ExperimentSpec changed = spec;
    changed.resume = true;
    changed.seed = 99;
    changed.seed_overridden = true;
    CHECK_THROWS_WITH_AS(run_experiment(changed), doctest::Contains("resume mismatch"),
                         std::runtime_error);
  }
}

TEST_CASE("reruns produce identical manifests (single thread)") {
  const std::string out1 = fresh_dir("manifest1");
  const std::string out2 = fresh_dir("manifest2");
  for (const auto& out : {out1, out2}) {
    ExperimentSpec spec;
    spec.command = "selftest";
    spec.out_dir = out;
    spec.threads = 1;
    REQUIRE(run_experiment(spec) == 0);
  }
  CHECK(read_text_file(out1 + "/MANIFEST") == read_text_file(out2 + "/MANIFEST"));
}

TEST_CASE("emit_report guards its inputs") {
  SUBCASE("missing manifest is an error") {
    const std::string dir = fresh_dir("noreport");
    fs::create_directories(dir);
    CHECK_THROWS_WITH_AS(emit_report(dir), doctest::Contains("MANIFEST"), std::runtime_error);
  }
  SUBCASE("an all-failed grid reports zero rows and fails") {
    const std::string dir = fresh_dir("emptygrid");
    fs::create_directories(dir);
    write_text_file(dir + "/grid.csv", "model,alpha_train,alpha_test,seed,metric,wallclock_s\n");
    write_text_file(dir + "/MANIFEST", "# MANIFEST\n");
    CHECK_THROWS_WITH_AS(emit_report(dir), doctest::Contains("0 rows"), std::runtime_error);
    CHECK(read_text_file(dir + "/report.txt").find("0") != std::string::npos);
  }
}
