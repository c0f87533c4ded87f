// Acceptance checks 1-10. One PASS/FAIL line per criterion; the exit code is
// nonzero when any criterion fails. Pass criterion numbers to run a subset.

#include "simpl/baselines.hpp"
#include "simpl/cli.hpp"
#include "simpl/simpl.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace simpl;
using namespace simpl::testing;

namespace {

struct Outcome {
   bool pass;
   std::string detail;
};

std::string fmt(const char *f, auto... args)
{
   char buf[512];
   std::snprintf(buf, sizeof buf, f, args...);
   return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
   return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProblemSetup preset(const std::string &name, int nx, int ny)
{
   PresetOptions o;
   o.nx = nx;
   o.ny = ny;
   return make_preset(name, o);
}

/// Records the strict-feasibility margins of every accepted iterate.
struct FeasibilityLog {
   double min_rho = 1.0, max_rho = 0.0;
   std::vector<double> volumes;

   IterateCallback callback(std::span<const double> M)
   {
      return [this, M](int, std::span<const double> rho, std::span<const double>) {
         double v = 0.0;
         for (std::size_t i = 0; i < rho.size(); ++i)
         {
            min_rho = std::min(min_rho, rho[i]);
            max_rho = std::max(max_rho, rho[i]);
            v += M[i] * rho[i];
         }
         volumes.push_back(v);
      };
   }
};

struct Run {
   OptTrace trace;
   FeasibilityLog feas;
   double seconds = 0.0;
};

Run run_simpl(ProblemSetup &p, LineSearch ls, StopMode stop, double tol, int max_iters)
{
   SimplConfig c;
   c.line_search = ls;
   c.kkt_variant = p.kkt_variant;
   c.stop = stop;
   c.tol = tol;
   c.max_iters = max_iters;
   Run r;
   const auto t0 = std::chrono::steady_clock::now();
   std::optional<std::span<const double>> rho0;
   if (p.rho0) { rho0 = std::span<const double>(*p.rho0); }
   r.trace = simpl_solve(p.objective, p.adm, c, rho0, r.feas.callback(p.objective.cell_volumes()));
   r.seconds = seconds_since(t0);
   return r;
}

Run run_baseline(ProblemSetup &p, BaselineMethod m, double tol, int max_iters)
{
   BaselineConfig c;
   c.method = m;
   c.tol = tol;
   c.max_iters = max_iters;
   Run r;
   const auto t0 = std::chrono::steady_clock::now();
   r.trace = m == BaselineMethod::pgd ? pgd_solve(p.objective, p.adm, c) : oc_solve(p.objective, p.adm, c);
   r.seconds = seconds_since(t0);
   return r;
}

std::string summary(const Run &r)
{
   const auto &last = r.trace.rows.back();
   return fmt("%d its, F=%.6e, S=%.3e, %s, %.0fs", r.trace.iterations(), last.F, last.stationarity,
              r.trace.converged() ? "converged" : "not converged", r.seconds);
}

bool monotone(const OptTrace &t)
{
   for (std::size_t k = 1; k < t.rows.size(); ++k)
   {
      if (t.rows[k].F > t.rows[k - 1].F) { return false; }
   }
   return true;
}

// The 96x32 MBB runs feed criteria 2, 3 and 6.
struct Mbb96 {
   Run a, b, pgd, oc;
   double domain = 0.0, limit = 0.0;
};

const Mbb96 &mbb96_simpl()
{
   static std::optional<Mbb96> cache;
   if (!cache)
   {
      cache.emplace();
      auto pa = preset("mbb", 96, 32);
      cache->domain = pa.adm.domain_volume;
      cache->limit = pa.adm.volume_limit();
      cache->a = run_simpl(pa, LineSearch::armijo, StopMode::stationarity, 1e-5, 2000);
      auto pb = preset("mbb", 96, 32);
      cache->b = run_simpl(pb, LineSearch::bregman, StopMode::stationarity, 1e-5, 2000);
   }
   return *cache;
}

Outcome criterion1()
{
   const auto t0 = std::chrono::steady_clock::now();
   auto comp = mbb_compliance(12, 4);
   auto sw = mbb_self_weight(12, 4);
   auto mech = mbb_mechanism(12, 4);
   const Vec rho = random_interior(comp.size(), 2024);
   const double e1 = directional_fd_error(comp, rho, 20, 101);
   const double e2 = directional_fd_error(sw, rho, 20, 202);
   const double e3 = directional_fd_error(mech, rho, 20, 303);
   const double t = seconds_since(t0);
   const double worst = std::max({e1, e2, e3});
   return {worst <= 1e-4 && t < 10.0,
           fmt("worst relative FD mismatch compliance %.2e, self-weight %.2e, mechanism %.2e (limit 1e-4), %.2fs",
               e1, e2, e3, t)};
}

Outcome criterion2()
{
   const Mbb96 &m = mbb96_simpl();
   bool pass = true;
   std::string detail;
   for (const auto *r : {&m.a, &m.b})
   {
      double excess = -1e300, residual = 0.0;
      for (std::size_t k = 0; k < r->feas.volumes.size(); ++k)
      {
         const double v = r->feas.volumes[k];
         excess = std::max(excess, v - m.limit);
         const bool active = k == 0 || r->trace.rows[k].mu > 0.0;
         if (active) { residual = std::max(residual, std::abs(v - m.limit)); }
      }
      const bool ok = r->feas.min_rho > 0.0 && r->feas.max_rho < 1.0 && excess <= 1e-10 * m.domain &&
                      residual <= 1e-10 * m.domain;
      pass = pass && ok;
      detail += fmt("%s: %zu iterates, min rho %.3e, 1-max rho %.3e, max excess %.2e|O|, active residual %.2e|O|; ",
                    r == &m.a ? "A" : "B", r->feas.volumes.size(), r->feas.min_rho, 1.0 - r->feas.max_rho,
                    excess / m.domain, residual / m.domain);
   }
   return {pass, detail};
}

Outcome criterion3()
{
   const Mbb96 &m = mbb96_simpl();
   bool pass = monotone(m.a.trace) && monotone(m.b.trace);
   std::string detail = fmt("MBB 96x32 A %s (%d its), B %s (%d its); ", monotone(m.a.trace) ? "monotone" : "NOT monotone",
                            m.a.trace.iterations(), monotone(m.b.trace) ? "monotone" : "NOT monotone",
                            m.b.trace.iterations());
   for (LineSearch ls : {LineSearch::armijo, LineSearch::bregman})
   {
      auto p = preset("bridge", 128, 64);
      const Run r = run_simpl(p, ls, p.stop, p.tol, 1000);
      const bool ok = monotone(r.trace);
      pass = pass && ok;
      detail += fmt("bridge 128x64 %s %s (%s); ", ls == LineSearch::armijo ? "A" : "B", ok ? "monotone" : "NOT monotone",
                    summary(r).c_str());
   }
   return {pass, detail};
}

Outcome criterion4()
{
   const auto t0 = std::chrono::steady_clock::now();
   std::mt19937_64 rng(4);
   std::normal_distribution<double> nd(0.0, 2.0);
   double worst = 0.0;
   int out_of_bounds = 0, inactive = 0;
   for (int trial = 0; trial < 100; ++trial)
   {
      Vec psi(100), g(100);
      for (auto &v : psi) { v = nd(rng) + 1.0; }
      for (auto &v : g) { v = -std::abs(nd(rng)) - 0.5; }
      const Vec M = random_interior(100, 9000 + trial, 0.005, 0.015);
      double vol = 0.0;
      for (double w : M) { vol += w; }
      const AdmissibleParams adm(0.3, vol);
      const double alpha = 0.7;
      const VolumeCorrection vc = volume_correct(psi, alpha, adm, M, g);
      double gmax = 0.0;
      for (double v : g) { gmax = std::max(gmax, -v); }
      if (!vc.active) { ++inactive; }
      if (vc.mu < 0.0 || vc.mu > gmax) { ++out_of_bounds; }
      worst = std::max(worst, std::abs(vc.mu - scan_mu(psi, alpha, M, adm.volume_limit(), gmax)));
   }
   const double t = seconds_since(t0);
   return {worst <= 1e-8 && out_of_bounds == 0 && inactive == 0 && t < 5.0,
           fmt("100 instances, worst |mu - oracle| %.2e (limit 1e-8), %d outside [0, max(-g)], %.2fs", worst,
               out_of_bounds, t)};
}

Outcome criterion5()
{
   const Vec M{0.3, 0.5, 0.2};
   const Vec psi_k{0.2, -0.4, 1.0};
   const Vec rho_k = sigmoid(psi_k);
   const Vec g{-0.8, -0.3, -1.1};
   double worst = 0.0;
   for (double theta : {0.45, 0.9})
   {
      const AdmissibleParams adm(theta, 1.0);
      const double alpha = 1.5;
      const VolumeCorrection vc = volume_correct(latent_step(psi_k, g, alpha), alpha, adm, M, g);
      const Vec two_stage = sigmoid(vc.psi);
      const auto best = three_cell_minimizer(M, rho_k, g, alpha, adm.volume_limit());
      for (int i = 0; i < 3; ++i) { worst = std::max(worst, std::abs(two_stage[i] - best[i])); }
   }
   return {worst <= 1e-4, fmt("active and inactive volume bound, worst component gap %.2e (limit 1e-4)", worst)};
}

Outcome criterion6()
{
   const Mbb96 &m = mbb96_simpl();
   auto pp = preset("mbb", 96, 32);
   const Run pgd = run_baseline(pp, BaselineMethod::pgd, 1e-5, 2000);
   auto po = preset("mbb", 96, 32);
   const Run oc = run_baseline(po, BaselineMethod::oc, 1e-5, 300);
   const int ia = m.a.trace.iterations(), ib = m.b.trace.iterations(), ip = pgd.trace.iterations();
   const bool all_converged = m.a.trace.converged() && m.b.trace.converged() && pgd.trace.converged();
   const double f_simpl = std::min(m.a.trace.final_F(), m.b.trace.final_F());
   const bool oc_ok = !oc.trace.converged() || oc.trace.final_F() > f_simpl;
   const bool pass = all_converged && ia <= ip && ib <= ip && oc_ok;
   return {pass, fmt("SiMPL-A %d its %s PGD %d; SiMPL-B %d its %s PGD; OC: %s [A: %s | B: %s | PGD: %s]", ia,
                     ia <= ip ? "<=" : ">", ip, ib, ib <= ip ? "<=" : ">", summary(oc).c_str(),
                     summary(m.a).c_str(), summary(m.b).c_str(), summary(pgd).c_str())};
}

Outcome criterion7()
{
   bool pass = true;
   std::string detail;
   struct Target {
      LineSearch ls;
      double F;
      int lo, hi;
   };
   for (const Target t : {Target{LineSearch::armijo, 1.2078e-3, 35, 80}, Target{LineSearch::bregman, 1.2079e-3, 32, 75}})
   {
      auto p = preset("mbb", 768, 256);
      const Run r = run_simpl(p, t.ls, StopMode::stationarity, 1e-5, t.hi);
      const double rel = std::abs(r.trace.final_F() - t.F) / t.F;
      const int its = r.trace.iterations();
      const bool ok = r.trace.converged() && its >= t.lo && its <= t.hi && rel <= 0.02;
      pass = pass && ok;
      detail += fmt("%s: %s, F off by %.2f%% (limit 2%%), iterations window [%d, %d]; ",
                    t.ls == LineSearch::armijo ? "A" : "B", summary(r).c_str(), 100.0 * rel, t.lo, t.hi);
   }
   return {pass, detail};
}

Outcome criterion8()
{
   std::map<int, Run> runs;
   for (int ny : {32, 64, 96})
   {
      auto p = preset("mbb", 3 * ny, ny);
      runs[ny] = run_simpl(p, LineSearch::armijo, StopMode::kkt, 1e-5, 1000);
   }
   const double ref = runs[64].trace.iterations();
   bool pass = true;
   std::string detail;
   for (auto &[ny, r] : runs)
   {
      const bool ok = r.trace.converged() && std::abs(r.trace.iterations() - ref) <= 0.3 * ref;
      pass = pass && ok;
      detail += fmt("h=1/%d: %s; ", ny, summary(r).c_str());
   }
   return {pass, detail + "counts within 30% of the h=1/64 count"};
}

Outcome criterion9()
{
   auto p = preset("bridge", 256, 128);
   const Run r = run_simpl(p, p.line_search, p.stop, p.tol, 1500);
   const auto M = p.objective.cell_volumes();
   double v = 0.0;
   for (std::size_t i = 0; i < M.size(); ++i) { v += M[i] * r.trace.rho[i]; }
   const double fraction = v / p.adm.domain_volume;
   const bool inactive = p.adm.volume_limit() - v > 1e-6 * p.adm.domain_volume;
   return {r.trace.converged() && inactive,
           fmt("%s, final volume fraction %.4f vs bound 0.7 (%s)", summary(r).c_str(), fraction,
               inactive ? "inactive" : "active")};
}

Outcome criterion10()
{
   std::vector<std::string> failed;
   std::string detail;
   auto check = [&](const char *name, bool ok, const std::string &what) {
      if (!ok) { failed.push_back(name); }
      detail += std::string(name) + " " + what + "; ";
   };

   {
      std::mt19937_64 rng(10);
      std::uniform_real_distribution<double> ur(1e-6, 1.0 - 1e-6), up(-13.0, 13.0);
      double w_rho = 0.0, w_psi = 0.0;
      for (int s = 0; s < 10000; ++s)
      {
         const double r = ur(rng);
         w_rho = std::max(w_rho, std::abs(sigmoid(logit(r)) - r));
         const double x = up(rng);
         w_psi = std::max(w_psi, std::abs(logit(sigmoid(x)) - x));
      }
      check("round trip", w_rho <= 1e-9 && w_psi <= 1e-9,
            fmt("rho->psi->rho %.1e, psi->rho->psi on |psi|<=13 %.1e", w_rho, w_psi));
   }
   {
      std::mt19937_64 rng(11);
      std::uniform_real_distribution<double> u(1e-6, 1.0 - 1e-6), w(0.1, 2.0);
      int negative = 0;
      for (int s = 0; s < 10000; ++s)
      {
         Vec r(4), q(4), m(4);
         for (int i = 0; i < 4; ++i)
         {
            r[i] = u(rng);
            q[i] = u(rng);
            m[i] = w(rng);
         }
         if (bregman_divergence(DensityField{r, m}, DensityField{q, m}) < 0.0) { ++negative; }
      }
      check("Bregman", negative == 0, fmt("%d negative of 1e4", negative));
   }
   {
      auto obj = mbb_compliance(48, 16, 0.05);
      const Vec rt = obj.apply_filter(Vec(obj.size(), 0.3));
      double worst = 0.0;
      for (double v : rt) { worst = std::max(worst, std::abs(v - 0.3)); }
      check("filter constants", worst <= 1e-9, fmt("%.1e", worst));
   }
   {
      double worst = 0.0;
      for (auto [hx, hy] : {std::pair{1.0, 1.0}, std::pair{0.5, 0.25}})
      {
         const auto K0 = assemble_unit_stiffness(0.3, hx, hy);
         const double xy[4][2] = {{0, 0}, {hx, 0}, {hx, hy}, {0, hy}};
         for (int mode = 0; mode < 3; ++mode)
         {
            double u[8];
            for (int n = 0; n < 4; ++n)
            {
               u[2 * n] = mode == 0 ? 1.0 : mode == 1 ? 0.0 : -xy[n][1];
               u[2 * n + 1] = mode == 0 ? 0.0 : mode == 1 ? 1.0 : xy[n][0];
            }
            for (int a = 0; a < 8; ++a)
            {
               double r = 0.0;
               for (int b = 0; b < 8; ++b) { r += K0[a * 8 + b] * u[b]; }
               worst = std::max(worst, std::abs(r));
            }
         }
      }
      check("K0 rigid modes", worst <= 1e-12, fmt("%.1e", worst));
   }
   {
      const Vec M = random_interior(40, 12, 0.5, 2.0);
      double total = 0.0;
      for (double m : M) { total += m; }
      const AdmissibleParams adm(0.4, total);
      double idem = 0.0;
      int expansions = 0;
      auto mnorm = [&](const Vec &a, const Vec &b) {
         double s = 0.0;
         for (std::size_t i = 0; i < a.size(); ++i) { s += M[i] * (a[i] - b[i]) * (a[i] - b[i]); }
         return std::sqrt(s);
      };
      for (unsigned k = 0; k < 1000; ++k)
      {
         const Vec x = random_interior(40, 70000 + 2 * k, -1.0, 2.0);
         const Vec y = random_interior(40, 70001 + 2 * k, -1.0, 2.0);
         const Vec px = l2_project(x, adm, M).rho;
         const Vec py = l2_project(y, adm, M).rho;
         const Vec ppx = l2_project(px, adm, M).rho;
         for (std::size_t i = 0; i < px.size(); ++i) { idem = std::max(idem, std::abs(ppx[i] - px[i])); }
         if (mnorm(px, py) > mnorm(x, y) * (1.0 + 1e-12)) { ++expansions; }
      }
      check("l2_project", idem <= 1e-12 && expansions == 0,
            fmt("idempotence %.1e, %d expansive pairs of 1e3", idem, expansions));
   }
   {
      const Vec psi = random_direction(50, 13);
      const Vec rho = sigmoid(psi);
      const Vec M = random_interior(50, 14, 0.01, 0.03);
      const double a = kkt_estimate(psi, psi, 0.7, rho, M, KktVariant::a, 0.2).kkt;
      const double b = kkt_estimate(psi, psi, 0.7, rho, M, KktVariant::b, 0.2).kkt;
      check("KKT at stationarity", a == 0.0 && b == 0.0, fmt("A %.1e, B %.1e", a, b));
   }
   {
      namespace fs = std::filesystem;
      const fs::path root = fs::temp_directory_path() / "simpl_acceptance_csv";
      fs::remove_all(root);
      std::string csv[2];
      std::ostringstream log;
      for (int i = 0; i < 2; ++i)
      {
         RunConfig cfg;
         cfg.nx = 48;
         cfg.ny = 16;
         cfg.max_iters = 15;
         cfg.write_vtk = false;
         cfg.out = (root / std::to_string(i)).string();
         run(cfg, log);
         std::ifstream in(root / std::to_string(i) / "convergence.csv", std::ios::binary);
         csv[i].assign(std::istreambuf_iterator<char>(in), {});
      }
      fs::remove_all(root);
      check("CSV determinism", !csv[0].empty() && csv[0] == csv[1], fmt("%zu bytes", csv[0].size()));
   }

   std::string head = failed.empty() ? "all sub-checks pass: " : "failed:";
   for (const auto &f : failed) { head += " " + f; }
   if (!failed.empty()) { head += ": "; }
   return {failed.empty(), head + detail};
}

} // namespace

int main(int argc, char **argv)
{
   const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
   std::set<int> selected;
   for (int i = 1; i < argc; ++i) { selected.insert(std::atoi(argv[i])); }

   int failures = 0;
   for (const auto &[id, fn] : criteria)
   {
      if (!selected.empty() && !selected.count(id)) { continue; }
      const auto t0 = std::chrono::steady_clock::now();
      Outcome o;
      try
      {
         o = fn();
      }
      catch (const std::exception &e)
      {
         o = {false, std::string("exception: ") + e.what()};
      }
      while (o.detail.ends_with("; ")) { o.detail.resize(o.detail.size() - 2); }
      if (!o.pass) { ++failures; }
      std::printf("criterion %d: %s (%.0fs) %s\n", id, o.pass ? "PASS" : "FAIL", seconds_since(t0), o.detail.c_str());
      std::fflush(stdout);
   }
   return failures == 0 ? 0 : 1;
}
