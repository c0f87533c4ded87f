#include "simpl/cli.hpp"

#include "simpl/baselines.hpp"
#include "simpl/io.hpp"
#include "simpl/problems.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace simpl {

namespace {

using nlohmann::json;

json to_json(const RunConfig &c)
{
   json j;
   j["problem"] = c.problem;
   j["nx"] = c.nx;
   j["ny"] = c.ny;
   j["theta"] = c.theta ? json(*c.theta) : json(nullptr);
   j["rmin"] = c.rmin;
   j["optimizer"] = c.optimizer;
   j["line_search"] = c.line_search ? json(*c.line_search) : json(nullptr);
   j["kkt_variant"] = c.kkt_variant ? json(*c.kkt_variant) : json(nullptr);
   j["stop"] = c.stop ? json(*c.stop) : json(nullptr);
   j["tol"] = c.tol ? json(*c.tol) : json(nullptr);
   j["max_iters"] = c.max_iters;
   j["out"] = c.out;
   j["initial_design"] = c.initial_design;
   j["seed"] = c.seed;
   j["write_pgm"] = c.write_pgm;
   j["write_vtk"] = c.write_vtk;
   return j;
}

template <class T> void read_optional(const json &j, std::optional<T> &dst)
{
   if (j.is_null()) { dst.reset(); }
   else { dst = j.get<T>(); }
}

bool one_of(const std::string &v, std::initializer_list<const char *> options)
{
   for (const char *o : options)
   {
      if (v == o) { return true; }
   }
   return false;
}

StopMode parse_stop(const std::string &s)
{
   if (s == "kkt") { return StopMode::kkt; }
   if (s == "kkt-relative") { return StopMode::kkt_relative; }
   return StopMode::stationarity;
}

std::string stop_name(StopMode s)
{
   switch (s)
   {
      case StopMode::kkt: return "kkt";
      case StopMode::kkt_relative: return "kkt-relative";
      case StopMode::stationarity: return "s";
   }
   return "kkt";
}

PresetOptions preset_options(const RunConfig &cfg)
{
   PresetOptions o;
   o.nx = cfg.nx;
   o.ny = cfg.ny;
   o.theta = cfg.theta;
   o.rmin = cfg.rmin;
   o.initial_design = cfg.initial_design;
   return o;
}

} // namespace

std::string config_to_json(const RunConfig &cfg) { return to_json(cfg).dump(2) + "\n"; }

void apply_json_config(RunConfig &cfg, const std::string &json_text)
{
   json j;
   try
   {
      j = json::parse(json_text);
   }
   catch (const json::parse_error &e)
   {
      throw std::invalid_argument(std::string("config: ") + e.what());
   }
   if (!j.is_object()) { throw std::invalid_argument("config: expected a JSON object"); }
   try
   {
      for (auto it = j.begin(); it != j.end(); ++it)
      {
         const std::string &k = it.key();
         const json &v = it.value();
         if (k == "problem") { cfg.problem = v.get<std::string>(); }
         else if (k == "nx") { cfg.nx = v.get<int>(); }
         else if (k == "ny") { cfg.ny = v.get<int>(); }
         else if (k == "theta") { read_optional(v, cfg.theta); }
         else if (k == "rmin") { cfg.rmin = v.get<double>(); }
         else if (k == "optimizer") { cfg.optimizer = v.get<std::string>(); }
         else if (k == "line_search") { read_optional(v, cfg.line_search); }
         else if (k == "kkt_variant") { read_optional(v, cfg.kkt_variant); }
         else if (k == "stop") { read_optional(v, cfg.stop); }
         else if (k == "tol") { read_optional(v, cfg.tol); }
         else if (k == "max_iters") { cfg.max_iters = v.get<int>(); }
         else if (k == "out") { cfg.out = v.get<std::string>(); }
         else if (k == "initial_design") { cfg.initial_design = v.get<std::string>(); }
         else if (k == "seed") { cfg.seed = v.get<std::uint64_t>(); }
         else if (k == "write_pgm") { cfg.write_pgm = v.get<bool>(); }
         else if (k == "write_vtk") { cfg.write_vtk = v.get<bool>(); }
         else { throw std::invalid_argument("config: unknown key '" + k + "'"); }
      }
   }
   catch (const json::exception &e)
   {
      throw std::invalid_argument(std::string("config: ") + e.what());
   }
}

void validate(const RunConfig &cfg)
{
   if (cfg.problem == "custom")
   {
      throw std::invalid_argument("custom problems are built through the library, not the command line");
   }
   if (!one_of(cfg.problem, {"mbb", "bridge", "inverter"}))
   {
      throw std::invalid_argument("unknown problem '" + cfg.problem + "'");
   }
   if (!one_of(cfg.optimizer, {"simpl", "pgd", "oc"}))
   {
      throw std::invalid_argument("unknown optimizer '" + cfg.optimizer + "'");
   }
   if (cfg.line_search && !one_of(*cfg.line_search, {"armijo", "bregman"}))
   {
      throw std::invalid_argument("unknown line search '" + *cfg.line_search + "'");
   }
   if (cfg.kkt_variant && !one_of(*cfg.kkt_variant, {"a", "b"}))
   {
      throw std::invalid_argument("unknown kkt variant '" + *cfg.kkt_variant + "'");
   }
   if (cfg.stop && !one_of(*cfg.stop, {"kkt", "kkt-relative", "s"}))
   {
      throw std::invalid_argument("unknown stopping rule '" + *cfg.stop + "'");
   }
   if (cfg.nx < 0 || cfg.ny < 0) { throw std::invalid_argument("resolution must be nonnegative"); }
   if (cfg.theta && !(*cfg.theta > 0.0 && *cfg.theta < 1.0))
   {
      throw std::invalid_argument("theta must lie in (0,1)");
   }
   if (!(cfg.rmin > 0.0)) { throw std::invalid_argument("rmin must be positive"); }
   if (cfg.tol && !(*cfg.tol > 0.0)) { throw std::invalid_argument("tol must be positive"); }
   if (cfg.max_iters < 0) { throw std::invalid_argument("max_iters must be nonnegative"); }
   if (cfg.out.empty()) { throw std::invalid_argument("output directory must be given"); }
   if (cfg.optimizer != "simpl")
   {
      if (cfg.line_search || cfg.kkt_variant)
      {
         throw std::invalid_argument("--line-search and --kkt-variant apply to the simpl optimizer only");
      }
      if (cfg.stop && *cfg.stop != "s")
      {
         throw std::invalid_argument(cfg.optimizer + " stops on the stationarity measure only (--stop s)");
      }
      if (cfg.optimizer == "oc" && cfg.problem == "inverter")
      {
         throw std::invalid_argument("oc needs a nonpositive gradient and cannot run the inverter");
      }
   }
   if (cfg.problem != "inverter" && cfg.initial_design != "uniform")
   {
      throw std::invalid_argument("initial designs other than uniform exist for the inverter only");
   }
}

RunConfig resolve_defaults(const RunConfig &cfg)
{
   validate(cfg);
   RunConfig r = cfg;
   const PresetDefaults defaults = preset_defaults(cfg.problem);
   if (!r.theta) { r.theta = defaults.theta; }
   if (r.optimizer == "simpl")
   {
      if (!r.line_search) { r.line_search = defaults.line_search == LineSearch::armijo ? "armijo" : "bregman"; }
      if (!r.kkt_variant) { r.kkt_variant = defaults.kkt_variant == KktVariant::a ? "a" : "b"; }
      if (!r.stop) { r.stop = stop_name(defaults.stop); }
   }
   else if (!r.stop) { r.stop = "s"; }
   if (!r.tol) { r.tol = defaults.tol; }
   return r;
}

int run(const RunConfig &input, std::ostream &log)
{
   const RunConfig cfg = resolve_defaults(input);
   ProblemSetup setup = make_preset(cfg.problem, preset_options(cfg));
   const CartesianMesh mesh = setup.objective.model().mesh();

   const std::filesystem::path dir(cfg.out);
   std::filesystem::create_directories(dir);
   write_text_file(dir / "config_echo.json", config_to_json(cfg));

   std::optional<std::span<const double>> rho0;
   if (setup.rho0) { rho0 = std::span<const double>(*setup.rho0); }

   OptTrace trace;
   if (cfg.optimizer == "simpl")
   {
      SimplConfig sc;
      sc.line_search = *cfg.line_search == "armijo" ? LineSearch::armijo : LineSearch::bregman;
      sc.kkt_variant = *cfg.kkt_variant == "a" ? KktVariant::a : KktVariant::b;
      sc.stop = parse_stop(*cfg.stop);
      sc.tol = *cfg.tol;
      sc.max_iters = cfg.max_iters;
      trace = simpl_solve(setup.objective, setup.adm, sc, rho0);
   }
   else
   {
      BaselineConfig bc;
      bc.method = cfg.optimizer == "pgd" ? BaselineMethod::pgd : BaselineMethod::oc;
      bc.tol = *cfg.tol;
      bc.max_iters = cfg.max_iters;
      trace = bc.method == BaselineMethod::pgd ? pgd_solve(setup.objective, setup.adm, bc, rho0)
                                               : oc_solve(setup.objective, setup.adm, bc, rho0);
   }
   write_convergence_csv(trace, dir / "convergence.csv");

   const EvalCache fin = setup.objective.evaluate(trace.rho);
   const CartesianMesh out_mesh = setup.mirrored ? mirrored_mesh(mesh) : mesh;
   auto cells = [&](const Vec &v) { return setup.mirrored ? mirror_cells(mesh, v) : v; };
   auto nodes = [&](const Vec &v, int comps) {
      return setup.mirrored ? mirror_nodes(mesh, v, comps, comps == 2) : v;
   };
   if (cfg.write_pgm) { write_pgm(out_mesh, cells(trace.rho), PgmFlavor::design, dir / "density_final.pgm"); }
   if (cfg.write_vtk)
   {
      write_vtk(out_mesh, {{"rho", cells(trace.rho), 1}, {"E", cells(fin.E), 1}},
                {{"rho_tilde", nodes(fin.rho_tilde, 1), 1}, {"displacement", nodes(fin.u, 2), 2}},
                dir / "fields_final.vtk");
   }

   const auto M = setup.objective.cell_volumes();
   double volume = 0.0;
   for (std::size_t i = 0; i < trace.rho.size(); ++i) { volume += M[i] * trace.rho[i]; }
   const double fraction = volume / setup.adm.domain_volume;
   const bool active = setup.adm.volume_limit() - volume <= 1e-6 * setup.adm.domain_volume;
   const char *status = trace.status == RunStatus::converged        ? "converged"
                        : trace.status == RunStatus::iteration_cap ? "iteration_cap"
                                                                   : "line_search_failed";
   log << "status " << status << "\niterations " << trace.iterations() << "\n";
   log.precision(10);
   log << "F " << trace.final_F() << "\nvolume_fraction " << fraction << "\nvolume_constraint "
       << (active ? "active" : "inactive") << "\n";
   if (!trace.message.empty()) { log << "message " << trace.message << "\n"; }

   switch (trace.status)
   {
      case RunStatus::converged: return 0;
      case RunStatus::iteration_cap: return 2;
      default: return 1;
   }
}

int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err)
{
   CLI::App app{"SiMPL topology optimization"};
   app.require_subcommand(1);
   CLI::App *run_cmd = app.add_subcommand("run", "solve a preset problem and write results");

   RunConfig flags;
   std::string config_path;
   double theta = 0, tol = 0;
   std::string line_search, kkt_variant, stop;
   run_cmd->add_option("--problem", flags.problem, "mbb | bridge | inverter");
   run_cmd->add_option("--nx", flags.nx, "cells along x (0: preset default)");
   run_cmd->add_option("--ny", flags.ny, "cells along y (0: preset default)");
   run_cmd->add_option("--theta", theta, "volume fraction bound");
   run_cmd->add_option("--rmin", flags.rmin, "filter radius");
   run_cmd->add_option("--optimizer", flags.optimizer, "simpl | pgd | oc");
   run_cmd->add_option("--line-search", line_search, "armijo | bregman");
   run_cmd->add_option("--kkt-variant", kkt_variant, "a | b");
   run_cmd->add_option("--stop", stop, "kkt | kkt-relative | s");
   run_cmd->add_option("--tol", tol, "stopping tolerance");
   run_cmd->add_option("--max-iters", flags.max_iters, "iteration cap");
   run_cmd->add_option("--out", flags.out, "output directory");
   run_cmd->add_option("--initial-design", flags.initial_design, "inverter: uniform | center | bottom");
   run_cmd->add_option("--seed", flags.seed, "seed for randomized inputs");
   run_cmd->add_option("--config", config_path, "JSON file; flags given here override it");

   try
   {
      std::vector<std::string> args;
      for (int i = argc - 1; i > 0; --i) { args.emplace_back(argv[i]); }
      app.parse(args);
   }
   catch (const CLI::ParseError &e)
   {
      std::ostringstream o, er;
      const int code = app.exit(e, o, er);
      out << o.str();
      err << er.str();
      return code == 0 ? 0 : 1;
   }

   try
   {
      RunConfig cfg;
      if (!config_path.empty())
      {
         std::ifstream in(config_path);
         if (!in) { throw std::invalid_argument("cannot read config file " + config_path); }
         std::stringstream ss;
         ss << in.rdbuf();
         apply_json_config(cfg, ss.str());
      }
      auto given = [&](const char *name) { return run_cmd->count(name) > 0; };
      if (given("--problem")) { cfg.problem = flags.problem; }
      if (given("--nx")) { cfg.nx = flags.nx; }
      if (given("--ny")) { cfg.ny = flags.ny; }
      if (given("--theta")) { cfg.theta = theta; }
      if (given("--rmin")) { cfg.rmin = flags.rmin; }
      if (given("--optimizer")) { cfg.optimizer = flags.optimizer; }
      if (given("--line-search")) { cfg.line_search = line_search; }
      if (given("--kkt-variant")) { cfg.kkt_variant = kkt_variant; }
      if (given("--stop")) { cfg.stop = stop; }
      if (given("--tol")) { cfg.tol = tol; }
      if (given("--max-iters")) { cfg.max_iters = flags.max_iters; }
      if (given("--out")) { cfg.out = flags.out; }
      if (given("--initial-design")) { cfg.initial_design = flags.initial_design; }
      if (given("--seed")) { cfg.seed = flags.seed; }
      return run(cfg, out);
   }
   catch (const std::invalid_argument &e)
   {
      err << "usage error: " << e.what() << "\n";
      return 1;
   }
   catch (const std::exception &e)
   {
      err << "error: " << e.what() << "\n";
      return 1;
   }
}

} // namespace simpl
