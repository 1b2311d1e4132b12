#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "runcons/montecarlo.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace runcons;

namespace {

const char* cli_bin() { return RUNCONS_CLI_BIN; }

int run(const std::string& args) {
  const std::string cmd = std::string(cli_bin()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("runcons_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json smoke_config() {
  json model;
  model["n"] = 3;
  model["m0"] = {0.0, 0.0, 0.0};
  model["m1"] = {1.0, 1.0, 1.0};
  model["S"] = {2.5, 0, 0, 0, 2.5, 0, 0, 0, 2.5};
  model["prior_h0"] = 0.5;
  json cfg;
  cfg["model"] = model;
  cfg["weights"] = {{"type", "switching_fusion"}, {"n", 3}, {"p", 0.6}};
  cfg["paths_per_hypothesis"] = 600;
  cfg["k_max"] = 30;
  cfg["checkpoints"] = {{"from", 5}, {"to", 30}, {"step", 5}};
  cfg["master_seed"] = 17;
  return cfg;
}

}  // namespace

TEST_CASE("graph-gen writes a valid supergraph with the target edge count") {
  const fs::path dir = fresh_dir("graphgen");
  const fs::path out = dir / "sg.json";
  const int code = run("graph-gen --n 12 --target-m 20 --q 0.5 --seed 3 -o " +
                       out.string());
  CHECK(code == 0);
  const Supergraph g = supergraph_from_json(json::parse(slurp(out)));
  CHECK(g.n == 12);
  CHECK(g.edge_count() == 20);
  for (const auto& e : g.edges) CHECK(e.q == 0.5);
}

TEST_CASE("graph-gen builds the pendant topology") {
  const fs::path dir = fresh_dir("pendant");
  const fs::path out = dir / "sg.json";
  const int code =
      run("graph-gen --n 8 --pendant 8 --anchor 3 --q-pendant 0.05 "
          "--q-rest 0.8 --seed 5 -o " +
          out.string());
  CHECK(code == 0);
  const Supergraph g = supergraph_from_json(json::parse(slurp(out)));
  CHECK(g.degrees()[7] == 1);
  bool found = false;
  for (const auto& e : g.edges)
    if (e.j == 7) {
      CHECK(e.i == 2);
      CHECK(e.q == 0.05);
      found = true;
    }
  CHECK(found);
}

TEST_CASE("missing config fields exit with the schema code") {
  const fs::path dir = fresh_dir("schema");
  json cfg = smoke_config();
  cfg.erase("weights");
  std::ofstream(dir / "bad.json") << cfg.dump();
  const int code = run("simulate --config " + (dir / "bad.json").string() +
                       " --out " + (dir / "out").string());
  CHECK(code == 2);
}

TEST_CASE("simulate produces deterministic outputs across reruns and workers") {
  const fs::path dir = fresh_dir("simulate");
  std::ofstream(dir / "cfg.json") << smoke_config().dump();
  const std::string cfg_arg = "simulate --config " + (dir / "cfg.json").string();
  REQUIRE(run(cfg_arg + " --out " + (dir / "a").string()) == 0);
  REQUIRE(run(cfg_arg + " --out " + (dir / "b").string()) == 0);
  REQUIRE(run(cfg_arg + " --workers 4 --out " + (dir / "c").string()) == 0);

  const std::string a = slurp(dir / "a" / "curves.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b" / "curves.csv"));
  CHECK(slurp(dir / "a" / "rates.csv") == slurp(dir / "b" / "rates.csv"));
  // worker count is an execution detail: bytes must not move at all
  CHECK(a == slurp(dir / "c" / "curves.csv"));
  CHECK(slurp(dir / "a" / "rates.csv") == slurp(dir / "c" / "rates.csv"));

  CHECK(a.find("# master_seed=17") != std::string::npos);
  CHECK(a.find("# config_hash=") != std::string::npos);
  const json manifest = json::parse(slurp(dir / "a" / "manifest.json"));
  CHECK(manifest["master_seed"] == 17);
  CHECK(manifest.contains("config_hash"));
  CHECK(manifest.contains("wall_time_s"));
}

TEST_CASE("theory subcommand emits the sweep CSV") {
  const fs::path dir = fresh_dir("theory");
  json cfg;
  cfg["switching"] = {{"n", 20}, {"c_tot", 0.1}};
  cfg["sweep"] = {{"variable", "p"}, {"from", 0.0}, {"to", 1.0}, {"count", 21}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  const fs::path out = dir / "theory.csv";
  REQUIRE(run("theory --config " + (dir / "cfg.json").string() + " -o " +
              out.string()) == 0);
  const std::string text = slurp(out);
  CHECK(text.find("# config_hash=") != std::string::npos);
  CHECK(text.find("p,r,rate_or_bound,regime,sufficient_met,necessary_met") !=
        std::string::npos);
  CHECK(text.find("optimal") != std::string::npos);
  CHECK(text.find("individual_branch") != std::string::npos);
  CHECK(text.find("suboptimal_branch") != std::string::npos);
  // p = 0 row: no communication, the rate degrades to C_i = C_tot / N, and
  // the reported r is 1 - p
  CHECK(text.find("\n0,1,0.005,individual_branch,false,false") !=
        std::string::npos);
}

TEST_CASE("single-point sweep reproduces simulate") {
  const fs::path dir = fresh_dir("sweep");
  json cfg = smoke_config();
  std::ofstream(dir / "cfg.json") << cfg.dump();
  REQUIRE(run("simulate --config " + (dir / "cfg.json").string() + " --out " +
              (dir / "sim").string()) == 0);
  REQUIRE(run("sweep --config " + (dir / "cfg.json").string() +
              " --variable p --grid 0.6 --out " + (dir / "sw").string()) == 0);
  CHECK(slurp(dir / "sim" / "curves.csv") ==
        slurp(dir / "sw" / "point00_curves.csv"));
}
