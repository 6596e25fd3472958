#include "artifacts.hpp"
#include "commands.hpp"
#include "run_config.hpp"

#include "bsvie/error.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bsvie::app;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bsvie-test-" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
  const RunConfig c = RunConfig::parse(
      "# comment\n"
      "grid.N = 32   # steps\n"
      "problem.generator = \"-t*y/s^2\"   # trailing\n"
      "risk.position = \"a \\\"quoted\\\" \\\\ value\"\n"
      "\n"
      "ensemble.seed=7\n");
  CHECK(c.integer("grid.N") == 32);
  CHECK(c.text("problem.generator") == "-t*y/s^2");
  CHECK(c.text("risk.position") == "a \"quoted\" \\ value");
  CHECK(c.unsigned_integer("ensemble.seed") == 7);
  CHECK(c.explicitly_set("grid.N"));
  CHECK_FALSE(c.explicitly_set("ensemble.M"));
  CHECK(c.integer("ensemble.M") == 65536);
  CHECK(c.flag("output.csv"));
}

TEST_CASE("bad config input names its line") {
  try {
    (void)RunConfig::parse("grid.N = 8\ngrid.bogus = 1\n", "run.cfg");
    FAIL("expected ValidationError");
  } catch (const bsvie::ValidationError& e) {
    CHECK(std::string(e.what()).find("run.cfg:2") != std::string::npos);
  }
  CHECK_THROWS_AS(RunConfig::parse("grid.N = 8\ngrid.N = 9\n"), bsvie::ValidationError);
  CHECK_THROWS_AS(RunConfig::parse("grid.N\n"), bsvie::ValidationError);
  CHECK_THROWS_AS(RunConfig::parse("grid.N = \"8\n"), bsvie::ValidationError);
  RunConfig c;
  CHECK_THROWS_AS(c.set("nope", "1"), bsvie::ValidationError);
  c.set("grid.N", "8x");
  CHECK_THROWS_AS((void)c.integer("grid.N"), bsvie::ValidationError);
  c.set("output.csv", "maybe");
  CHECK_THROWS_AS((void)c.flag("output.csv"), bsvie::ValidationError);
}

TEST_CASE("canonical form and hash ignore ordering and defaults") {
  const RunConfig a = RunConfig::parse("grid.N = 32\nensemble.seed = 3\n");
  const RunConfig b = RunConfig::parse("ensemble.seed = 3\ngrid.N = \"32\"\n");
  RunConfig c = RunConfig::parse("ensemble.seed = 3\ngrid.N = 32\nensemble.M = 65536\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() == c.hash());
  c.set("ensemble.M", "1024");
  CHECK(a.hash() != c.hash());
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(hex64(0xabcULL) == "0000000000000abc");
}

TEST_CASE("level lists") {
  const auto l = parse_levels("16,32 , 64:4096", 100);
  REQUIRE(l.size() == 3);
  CHECK(l[0].steps == 16);
  CHECK(l[0].paths == 100);
  CHECK(l[2].steps == 64);
  CHECK(l[2].paths == 4096);
  CHECK_THROWS_AS(parse_levels("", 1), bsvie::ValidationError);
  CHECK_THROWS_AS(parse_levels("16,,32", 1), bsvie::ValidationError);
  CHECK_THROWS_AS(parse_levels("16:x", 1), bsvie::ValidationError);
}

TEST_CASE("csv formatting") {
  Table t{{"name", "value"}, {}};
  t.add({"plain", 0.1});
  t.add({"with, comma", 3});
  t.add({"say \"hi\"", Cell::empty()});
  CHECK(t.csv() == "name,value\nplain,0.10000000000000001\n\"with, comma\",3\n\"say \"\"hi\"\"\",\n");
  CHECK(format_double(1.0) == "1");
  CHECK(number_or_null(NAN).is_null());
}

TEST_CASE("identical runs produce identical artifacts") {
  std::ostringstream log;
  std::string sums[2];
  for (int k = 0; k < 2; ++k) {
    const fs::path dir = scratch("det" + std::to_string(k));
    RunConfig c = RunConfig::parse("problem.case = eq43\ngrid.N = 8\nensemble.M = 512\n");
    c.set("output.dir", dir.string());
    REQUIRE(run("solve", c, log) == ExitCode::ok);
    const nlohmann::json m = read_json(dir / "manifest.json");
    CHECK(m["config_hash"] == hex64(c.hash()));
    CHECK(m["exit_code"] == 0);
    CHECK(m["seed"] == 1);
    sums[k] = m["tables"].dump();
    CHECK(read_text(dir / "y.csv").rfind("i,t,mean,stderr\n", 0) == 0);
    CHECK(read_text(dir / "z.csv").rfind("i,j,t_i,t_j,mean,stderr\n", 0) == 0);
    CHECK(read_text(dir / "errors.csv").rfind("region,relative_l2\n", 0) == 0);
    fs::remove_all(dir);
  }
  CHECK(sums[0] == sums[1]);
}

TEST_CASE("exit codes") {
  std::ostringstream log;
  const fs::path dir = scratch("codes");
  RunConfig bad = RunConfig::parse("problem.generator = \"y +\"\nproblem.terminal = wT\n");
  bad.set("output.dir", dir.string());
  CHECK_THROWS_AS(run("solve", bad, log), bsvie::ValidationError);
  CHECK_FALSE(fs::exists(dir));

  RunConfig picard = RunConfig::parse(
      "problem.case = eq43\ngrid.N = 8\nensemble.M = 512\nsolver.picard = true\n"
      "solver.max_iter = 1\nsolver.tol = 1e-14\n");
  picard.set("output.dir", dir.string());
  CHECK(run("solve", picard, log) == ExitCode::nonconvergence);
  CHECK(read_json(dir / "manifest.json")["exit_code"] == 2);

  RunConfig verify = RunConfig::parse("problem.case = eq43\nverify.levels = \"4:256,8:256\"\n");
  verify.set("output.dir", (dir / "v").string());
  CHECK(run("verify", verify, log) == ExitCode::check_failed);
  CHECK(read_text(dir / "v" / "convergence.csv").rfind("N,M,error_y,", 0) == 0);

  RunConfig zero = RunConfig::parse("problem.case = zero\nverify.levels = \"4:256,8:256\"\n");
  zero.set("output.dir", (dir / "z").string());
  CHECK(run("verify", zero, log) == ExitCode::ok);
  fs::remove_all(dir);
}

TEST_CASE("axioms and residual commands") {
  std::ostringstream log;
  const fs::path dir = scratch("axioms");
  RunConfig c = RunConfig::parse("grid.N = 8\nensemble.M = 1024\n");
  c.set("output.dir", (dir / "a").string());
  CHECK(run("axioms", c, log) == ExitCode::ok);
  CHECK(read_text(dir / "a" / "axioms.csv").rfind("axiom,applicable,passed,judged_on,", 0) == 0);
  CHECK(read_text(dir / "a" / "discount.csv").rfind("i,t,discount_discrete,discount_exp,", 0) == 0);

  RunConfig r = RunConfig::parse("problem.case = eq48-49\nresidual.form = eq45\ngrid.N = 8\nensemble.M = 512\n");
  r.set("output.dir", (dir / "r").string());
  CHECK(run("residual", r, log) == ExitCode::ok);
  CHECK(read_text(dir / "r" / "residual.csv").rfind("i,t,rms\n", 0) == 0);
  fs::remove_all(dir);
}

}  // TEST_SUITE
