#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "json.hpp"

// Subprocess-level tests of the installed CLI surface: exit codes, file
// outputs, and stream separation. The heavy solver paths run on a one-state
// loop so each invocation stays in the millisecond range.

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args, const std::string& redirect = "2>/dev/null") {
  const std::string cmd = std::string(PRECSCHED_CLI_PATH) + " " + args + " " + redirect;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunResult res;
  std::array<char, 4096> buf;
  std::size_t got;
  while ((got = fread(buf.data(), 1, buf.size(), pipe)) > 0)
    res.out.append(buf.data(), got);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One-state lag y[k] = gamma (1 - 2^-k): settles well inside a 0.2 band by
// the fourth sample, and stays feasible under the 0.02 low-precision offset.
const char* kToyConfig = R"({
  "system": {
    "A": [[0.5]], "B": [[0.5]], "C": [[1.0]], "K": [[0.0]],
    "Q": [[1.0]], "R": [[1.0]], "h": 1.0, "x0": [0.0], "u0": [1.0]
  },
  "scenario": {
    "horizon": 16.0, "settling_time": 4.0,
    "band": {"absolute": 0.2},
    "steps": [{"t": 0.0, "reference": [1.0]}, {"t": 8.0, "reference": [2.0]}],
    "metrics": {"T_p": 2.0, "T_r": 1.0},
    "t_lo": 1e-4, "t_hi": 3e-4
  },
  "precision": {"lo": "binary16", "hi": "binary32", "e_lo": 0.02, "e_hi": 1e-4},
  "solver": {"w1": 100.0, "w2": 1.0}
})";

struct Workspace {
  fs::path dir;
  fs::path config;

  Workspace() {
    dir = fs::temp_directory_path() /
          ("precsched-cli-" + std::to_string(::getpid()));
    fs::create_directories(dir);
    config = dir / "toy.json";
    std::ofstream(config) << kToyConfig;
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const char* name) const { return (dir / name).string(); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("running without a subcommand is a usage error") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate " + ws().config.string()).code == 1);
  RunResult help = run("--help", "2>&1");
  CHECK(help.code == 0);
  CHECK(help.out.find("schedule") != std::string::npos);
  CHECK(help.out.find("verify") != std::string::npos);
}

TEST_CASE("intervals prints the windows in text and JSON") {
  RunResult text = run("intervals " + ws().config.string());
  CHECK(text.code == 0);
  CHECK(text.out.find("mu ") != std::string::npos);
  CHECK(text.out.find("window 1 [") != std::string::npos);

  RunResult js = run("intervals " + ws().config.string() + " --json");
  CHECK(js.code == 0);
  nlohmann::json j = nlohmann::json::parse(js.out);
  CHECK(j["mu"].get<int>() >= 1);
  CHECK(j["windows"].size() == j["mu"].get<std::size_t>());
}

TEST_CASE("schedule, verify, and report close the loop") {
  const std::string sched = ws().path("out.sched");
  const std::string prob = ws().path("prob.txt");
  RunResult r = run("schedule " + ws().config.string() + " --out " + sched +
                    " --export-problem " + prob);
  REQUIRE(r.code == 0);

  const std::string stext = slurp(sched);
  CHECK(stext.rfind("# precsched schedule v1\n", 0) == 0);
  CHECK(stext.find("N 16") != std::string::npos);
  CHECK(slurp(prob).rfind("# precsched miqp v1", 0) == 0);

  RunResult v = run("verify " + ws().config.string() + " --schedule " + sched);
  CHECK(v.code == 0);
  CHECK(v.out.find("model band check      pass") != std::string::npos);
  CHECK(v.out.find("emulated band check   pass") != std::string::npos);

  RunResult vj = run("verify " + ws().config.string() + " --schedule " + sched +
                     " --json");
  CHECK(vj.code == 0);
  nlohmann::json j = nlohmann::json::parse(vj.out);
  CHECK(j["model_band_ok"] == true);
  CHECK(j["emulated_band_ok"] == true);

  RunResult rep = run("report " + ws().config.string() + " --schedule " + sched);
  CHECK(rep.code == 0);
  CHECK(rep.out.find("all-lo") != std::string::npos);
  CHECK(rep.out.find("all-hi") != std::string::npos);
  CHECK(rep.out.find("switching") != std::string::npos);

  RunResult repj = run("report " + ws().config.string() + " --json");
  CHECK(repj.code == 0);
  nlohmann::json jr = nlohmann::json::parse(repj.out);
  REQUIRE(jr["rows"].size() == 3);  // no schedule given: one is synthesized
  CHECK(jr["rows"][2]["name"] == "switching");
  CHECK(jr["rows"][2]["emulated_band_ok"] == true);
}

TEST_CASE("simulate writes the trajectory CSV to stdout") {
  for (const char* prec : {"nominal", "lo", "hi"}) {
    RunResult r = run("simulate " + ws().config.string() + " --precision " + prec);
    CHECK(r.code == 0);
    CHECK(r.out.rfind("sample,t_seconds,sw,y_1,band_lo,band_hi,cum_cost\n", 0) == 0);
    // header + one row per sample 0..16
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 18);
  }
  CHECK(run("simulate " + ws().config.string() + " --precision half").code == 1);
}

TEST_CASE("schedule output is deterministic byte for byte") {
  const std::string a = ws().path("det_a.sched");
  const std::string b = ws().path("det_b.sched");
  REQUIRE(run("schedule " + ws().config.string() + " --out " + a).code == 0);
  REQUIRE(run("schedule " + ws().config.string() + " --out " + b).code == 0);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("config and feasibility failures map to distinct exit codes") {
  const std::string broken = ws().path("broken.json");
  std::ofstream(broken) << "{ not json";
  RunResult bad = run("schedule " + broken, "2>&1");
  CHECK(bad.code == 1);
  CHECK(bad.out.find("malformed JSON") != std::string::npos);

  // A band nobody can hold: even the all-hi schedule misses it.
  nlohmann::json tight = nlohmann::json::parse(kToyConfig);
  tight["scenario"]["band"] = {{"absolute", 1e-6}};
  const std::string infeasible = ws().path("infeasible.json");
  std::ofstream(infeasible) << tight.dump();
  RunResult inf = run("schedule " + infeasible, "2>&1");
  CHECK(inf.code == 2);
  CHECK(inf.out.find("no feasible schedule") != std::string::npos);

  CHECK(run("verify " + ws().config.string()).code == 1);  // --schedule required
  CHECK(run("schedule " + ws().path("missing.json")).code == 1);
}
