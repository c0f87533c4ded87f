#include "simpl/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace simpl;
namespace fs = std::filesystem;

namespace {

struct Result {
   int code;
   std::string out, err;
};

Result cli(std::vector<std::string> args)
{
   args.insert(args.begin(), "simpl");
   std::vector<const char *> argv;
   for (const auto &a : args) { argv.push_back(a.c_str()); }
   std::ostringstream out, err;
   const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
   return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p)
{
   std::ifstream in(p, std::ios::binary);
   return {std::istreambuf_iterator<char>(in), {}};
}

int line_count(const std::string &text)
{
   int n = 0;
   for (char c : text) { n += c == '\n'; }
   return n;
}

fs::path scratch(const std::string &name)
{
   const fs::path dir = fs::temp_directory_path() / ("simpl_cli_test_" + name);
   fs::remove_all(dir);
   return dir;
}

} // namespace

TEST_CASE("help and usage errors")
{
   CHECK(cli({"--help"}).code == 0);
   CHECK(cli({"run", "--help"}).out.find("--problem") != std::string::npos);
   CHECK(cli({}).code == 1);
   CHECK(cli({"run", "--bogus", "1"}).code == 1);
   CHECK(cli({"run", "--nx", "abc"}).code == 1);

   const auto bad_problem = cli({"run", "--problem", "wing", "--out", scratch("bad").string()});
   CHECK(bad_problem.code == 1);
   CHECK(bad_problem.err.find("usage error") != std::string::npos);
   CHECK(cli({"run", "--problem", "custom"}).code == 1);
   CHECK(cli({"run", "--optimizer", "pgd", "--line-search", "armijo"}).code == 1);
   CHECK(cli({"run", "--optimizer", "pgd", "--stop", "kkt"}).code == 1);
   CHECK(cli({"run", "--optimizer", "oc", "--problem", "inverter"}).code == 1);
   CHECK(cli({"run", "--theta", "1.5"}).code == 1);
   CHECK(cli({"run", "--initial-design", "center"}).code == 1);
   CHECK(cli({"run", "--config", "/nonexistent/config.json"}).code == 1);
}

TEST_CASE("a capped run writes every output file")
{
   const fs::path dir = scratch("capped");
   const auto r = cli({"run", "--nx", "24", "--ny", "8", "--rmin", "0.1", "--max-iters", "3", "--out", dir.string()});
   CHECK(r.code == 2);
   CHECK(r.out.find("status iteration_cap") != std::string::npos);
   CHECK(r.out.find("volume_constraint active") != std::string::npos);
   for (const char *f : {"config_echo.json", "convergence.csv", "density_final.pgm", "fields_final.vtk"})
   {
      CAPTURE(f);
      CHECK(fs::exists(dir / f));
   }
   CHECK(line_count(slurp(dir / "convergence.csv")) == 1 + 4);
   CHECK(slurp(dir / "density_final.pgm").rfind("P2\n24 8\n255\n", 0) == 0);

   const auto echo = nlohmann::json::parse(slurp(dir / "config_echo.json"));
   CHECK(echo["nx"] == 24);
   CHECK(echo["max_iters"] == 3);
   CHECK(echo["line_search"] == "armijo");
   CHECK(echo["stop"] == "s");
   fs::remove_all(dir);
}

TEST_CASE("a converged start exits 0 with a single csv row")
{
   const fs::path dir = scratch("converged");
   const auto r = cli({"run", "--nx", "24", "--ny", "8", "--rmin", "0.1", "--tol", "1e6", "--out", dir.string()});
   CHECK(r.code == 0);
   CHECK(line_count(slurp(dir / "convergence.csv")) == 2);
   fs::remove_all(dir);
}

TEST_CASE("csv output is byte-identical across repeated runs")
{
   const fs::path a = scratch("det_a"), b = scratch("det_b");
   for (const auto &opt : {std::string("simpl"), std::string("pgd")})
   {
      CAPTURE(opt);
      const std::vector<std::string> common{"run", "--nx", "24", "--ny", "8", "--rmin", "0.1", "--max-iters", "8",
                                            "--optimizer", opt};
      auto with_out = [&](const fs::path &d) {
         auto v = common;
         v.push_back("--out");
         v.push_back(d.string());
         return v;
      };
      CHECK(cli(with_out(a)).code == 2);
      CHECK(cli(with_out(b)).code == 2);
      CHECK(slurp(a / "convergence.csv") == slurp(b / "convergence.csv"));
      CHECK(slurp(a / "density_final.pgm") == slurp(b / "density_final.pgm"));
   }
   fs::remove_all(a);
   fs::remove_all(b);
}

TEST_CASE("flags override the json config")
{
   const fs::path dir = scratch("json");
   fs::create_directories(dir);
   {
      std::ofstream cfg(dir / "cfg.json");
      cfg << R"({"nx": 24, "ny": 8, "rmin": 0.1, "theta": 0.4, "max_iters": 5, "out": ")"
          << (dir / "run").string() << "\"}";
   }
   const auto r = cli({"run", "--config", (dir / "cfg.json").string(), "--max-iters", "1"});
   CHECK(r.code == 2);
   const auto echo = nlohmann::json::parse(slurp(dir / "run" / "config_echo.json"));
   CHECK(echo["max_iters"] == 1);
   CHECK(echo["theta"] == 0.4);
   CHECK(echo["nx"] == 24);

   {
      std::ofstream cfg(dir / "bad.json");
      cfg << R"({"nx": 24, "colour": "red"})";
   }
   CHECK(cli({"run", "--config", (dir / "bad.json").string()}).code == 1);
   fs::remove_all(dir);
}

TEST_CASE("json round trip and defaults")
{
   RunConfig c;
   c.problem = "bridge";
   c.nx = 64;
   c.ny = 32;
   c.theta = 0.6;
   c.tol = 1e-4;
   c.seed = 12;
   RunConfig d;
   apply_json_config(d, config_to_json(c));
   CHECK(config_to_json(d) == config_to_json(c));
   CHECK_THROWS_AS(apply_json_config(d, "[1,2]"), std::invalid_argument);
   CHECK_THROWS_AS(apply_json_config(d, "{\"nx\": \"many\"}"), std::invalid_argument);

   const RunConfig bridge = resolve_defaults(c);
   CHECK(*bridge.line_search == "bregman");
   CHECK(*bridge.stop == "kkt-relative");
   CHECK(*bridge.theta == 0.6);

   RunConfig pgd;
   pgd.optimizer = "pgd";
   const RunConfig p = resolve_defaults(pgd);
   CHECK(*p.stop == "s");
   CHECK(!p.line_search);
}

TEST_CASE("inverter output is mirrored to the full square")
{
   const fs::path dir = scratch("inverter");
   const auto r = cli({"run", "--problem", "inverter", "--nx", "16", "--ny", "16", "--rmin", "0.1", "--max-iters",
                       "2", "--initial-design", "center", "--out", dir.string()});
   CHECK(r.code == 2);
   CHECK(slurp(dir / "density_final.pgm").rfind("P2\n16 16\n255\n", 0) == 0);
   CHECK(slurp(dir / "fields_final.vtk").find("DIMENSIONS 17 17 1") != std::string::npos);
   fs::remove_all(dir);
}
