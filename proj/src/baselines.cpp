#include "simpl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace simpl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_passive(std::span<const char> passive, std::size_t i)
{
   return !passive.empty() && passive[i] != 0;
}

double clipped_volume(std::span<const double> q, double mu, std::span<const double> M,
                      std::span<const char> passive)
{
   Vec terms(q.size());
   for (std::size_t i = 0; i < q.size(); ++i)
   {
      terms[i] = M[i] * (is_passive(passive, i) ? 1.0 : std::clamp(q[i] - mu, 0.0, 1.0));
   }
   return pairwise_sum(terms);
}

double weighted_volume(std::span<const double> rho, std::span<const double> M)
{
   return weighted_inner(rho, Vec(rho.size(), 1.0), M);
}

Vec initial_density(std::span<const char> passive, std::span<const double> M,
                    const AdmissibleParams &adm, std::optional<std::span<const double>> rho0)
{
   const std::size_t n = M.size();
   if (rho0)
   {
      if (rho0->size() != n) { throw std::invalid_argument("initial design: length mismatch"); }
      Vec rho(rho0->begin(), rho0->end());
      for (std::size_t i = 0; i < n; ++i)
      {
         rho[i] = is_passive(passive, i) ? 1.0 : std::clamp(rho[i], 0.0, 1.0);
      }
      return rho;
   }
   double passive_volume = 0.0;
   for (std::size_t i = 0; i < n; ++i)
   {
      if (is_passive(passive, i)) { passive_volume += M[i]; }
   }
   double start = adm.theta;
   if (passive_volume > 0.0)
   {
      start = std::min(start, (adm.volume_limit() - passive_volume) / (adm.domain_volume - passive_volume));
   }
   if (!(start > 0.0)) { throw std::invalid_argument("initial design: passive cells exceed the volume bound"); }
   Vec rho(n, start);
   for (std::size_t i = 0; i < n; ++i)
   {
      if (is_passive(passive, i)) { rho[i] = 1.0; }
   }
   return rho;
}

Vec design_gradient(Objective &obj, std::span<const double> rho, std::span<const char> passive)
{
   Vec g = obj.gradient(rho);
   for (std::size_t i = 0; i < g.size(); ++i)
   {
      if (is_passive(passive, i)) { g[i] = 0.0; }
   }
   return g;
}

} // namespace

void BaselineConfig::validate() const
{
   if (!(tol > 0.0)) { throw std::invalid_argument("BaselineConfig: tol must be positive"); }
   if (max_iters < 0) { throw std::invalid_argument("BaselineConfig: max_iters must be nonnegative"); }
   if (!(c1 > 0.0 && c1 < 1.0)) { throw std::invalid_argument("BaselineConfig: c1 must lie in (0,1)"); }
   if (!(move_limit > 0.0 && move_limit <= 1.0))
   {
      throw std::invalid_argument("BaselineConfig: move limit must lie in (0,1]");
   }
   if (!(oc_exponent > 0.0)) { throw std::invalid_argument("BaselineConfig: OC exponent must be positive"); }
   if (!(bisection_tol > 0.0)) { throw std::invalid_argument("BaselineConfig: bisection_tol must be positive"); }
}

Projection l2_project(std::span<const double> q, const AdmissibleParams &adm,
                      std::span<const double> M, std::span<const char> passive)
{
   if (q.size() != M.size()) { throw std::invalid_argument("l2_project: length mismatch"); }
   const double target = adm.volume_limit();
   Projection out;
   if (clipped_volume(q, 0.0, M, passive) > target)
   {
      double hi = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i)
      {
         if (!is_passive(passive, i)) { hi = std::max(hi, q[i]); }
      }
      double lo = 0.0;
      for (int it = 0; it < 2000; ++it)
      {
         const double mid = lo + 0.5 * (hi - lo);
         if (mid <= lo || mid >= hi) { break; }
         if (clipped_volume(q, mid, M, passive) > target) { lo = mid; }
         else { hi = mid; }
      }
      // the volume is affine in mu on the final clip pattern: solve it exactly
      double free_volume = 0.0, free_moment = 0.0, fixed = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i)
      {
         const double v = is_passive(passive, i) ? 1.0 : q[i] - hi;
         if (is_passive(passive, i) || v >= 1.0) { fixed += M[i]; }
         else if (v > 0.0)
         {
            free_volume += M[i];
            free_moment += M[i] * q[i];
         }
      }
      double mu = hi;
      if (free_volume > 0.0)
      {
         const double exact = (free_moment + fixed - target) / free_volume;
         if (exact >= lo && exact <= hi) { mu = exact; }
      }
      out.mu = mu;
   }
   out.rho.resize(q.size());
   for (std::size_t i = 0; i < q.size(); ++i)
   {
      out.rho[i] = is_passive(passive, i) ? 1.0 : std::clamp(q[i] - out.mu, 0.0, 1.0);
   }
   return out;
}

double stationarity(std::span<const double> rho, std::span<const double> g,
                    const AdmissibleParams &adm, std::span<const double> M,
                    std::span<const char> passive)
{
   if (rho.size() != g.size() || rho.size() != M.size())
   {
      throw std::invalid_argument("stationarity: length mismatch");
   }
   Vec q(rho.size());
   for (std::size_t i = 0; i < q.size(); ++i) { q[i] = rho[i] - g[i]; }
   const Projection p = l2_project(q, adm, M, passive);
   Vec s(rho.size());
   for (std::size_t i = 0; i < s.size(); ++i) { s[i] = is_passive(passive, i) ? 0.0 : rho[i] - p.rho[i]; }
   return std::sqrt(std::max(0.0, weighted_inner(s, s, M)));
}

OptTrace pgd_solve(Objective &obj, const AdmissibleParams &adm, const BaselineConfig &cfg,
                   std::optional<std::span<const double>> rho0, const IterateCallback &on_iterate)
{
   cfg.validate();
   const std::span<const double> M = obj.cell_volumes();
   const std::vector<char> passive(obj.passive_cells().begin(), obj.passive_cells().end());
   Vec rho = initial_density(passive, M, adm, rho0);
   rho = l2_project(rho, adm, M, passive).rho;

   double F = obj.value(rho);
   Vec g = design_gradient(obj, rho, passive);
   double S = stationarity(rho, g, adm, M, passive);

   OptTrace trace;
   trace.rows.push_back({0, F, kNaN, kNaN, kNaN, S, 0, obj.evaluations(), weighted_volume(rho, M)});
   if (on_iterate) { on_iterate(0, rho, rho); }
   if (S <= cfg.tol)
   {
      trace.status = RunStatus::converged;
      trace.rho = rho;
      return trace;
   }

   Vec rho_prev, g_prev;
   double alpha_prev = 0.0;
   trace.status = RunStatus::iteration_cap;
   for (int k = 0; k < cfg.max_iters; ++k)
   {
      double alpha = 0.0;
      if (k == 0) { alpha = seed_stepsize(0, 0.0, 0.0, g); }
      else
      {
         // in the L2 geometry the latent variable is the density itself
         const auto bb = gbb_stepsize(rho, rho_prev, rho, rho_prev, g, g_prev, M);
         alpha = seed_stepsize(k, bb.value_or(alpha_prev), alpha_prev, g);
         if (!(alpha > 0.0) || !std::isfinite(alpha)) { alpha = alpha_prev; }
      }

      int backtracks = 0;
      bool accepted = false;
      Projection trial;
      double F_new = 0.0;
      for (;;)
      {
         Vec q(rho.size());
         for (std::size_t i = 0; i < q.size(); ++i) { q[i] = rho[i] - alpha * g[i]; }
         trial = l2_project(q, adm, M, passive);
         F_new = obj.value(trial.rho);
         accepted = armijo_accept(F_new, F, g, trial.rho, rho, M, cfg.c1);
         if (accepted || backtracks == cfg.max_backtracks) { break; }
         ++backtracks;
         alpha *= 0.5;
      }
      if (!accepted)
      {
         trace.status = RunStatus::line_search_failed;
         trace.message = "line search failed after " + std::to_string(cfg.max_backtracks) +
                         " halvings at iteration " + std::to_string(k + 1);
         obj.value(rho);
         break;
      }

      Vec g_new = design_gradient(obj, trial.rho, passive);
      rho_prev = std::move(rho);
      g_prev = std::move(g);
      rho = std::move(trial.rho);
      g = std::move(g_new);
      F = F_new;
      alpha_prev = alpha;
      S = stationarity(rho, g, adm, M, passive);

      trace.rows.push_back({k + 1, F, alpha, trial.mu / alpha, kNaN, S, backtracks, obj.evaluations(),
                            weighted_volume(rho, M)});
      if (on_iterate) { on_iterate(k + 1, rho, rho); }
      if (S <= cfg.tol)
      {
         trace.status = RunStatus::converged;
         break;
      }
   }
   trace.rho = std::move(rho);
   return trace;
}

OptTrace oc_solve(Objective &obj, const AdmissibleParams &adm, const BaselineConfig &cfg,
                  std::optional<std::span<const double>> rho0, const IterateCallback &on_iterate)
{
   cfg.validate();
   const std::span<const double> M = obj.cell_volumes();
   const std::vector<char> passive(obj.passive_cells().begin(), obj.passive_cells().end());
   const std::size_t n = M.size();
   Vec rho = initial_density(passive, M, adm, rho0);

   double F = obj.value(rho);
   Vec g = design_gradient(obj, rho, passive);
   double S = stationarity(rho, g, adm, M, passive);

   OptTrace trace;
   trace.rows.push_back({0, F, kNaN, kNaN, kNaN, S, 0, obj.evaluations(), weighted_volume(rho, M)});
   if (on_iterate) { on_iterate(0, rho, rho); }
   trace.status = RunStatus::iteration_cap;
   if (S <= cfg.tol)
   {
      trace.status = RunStatus::converged;
      trace.rho = rho;
      return trace;
   }

   const double target = adm.volume_limit();
   for (int k = 0; k < cfg.max_iters; ++k)
   {
      // The sign check runs on the starting gradient only. Later iterates can
      // pick up small positive entries from the negative lobes of the
      // consistent-mass filter; those cells get no growth signal.
      double gscale = 0.0;
      for (double v : g) { gscale = std::max(gscale, std::abs(v)); }
      Vec descent(n, 0.0);
      for (std::size_t i = 0; i < n; ++i)
      {
         if (is_passive(passive, i)) { continue; }
         if (k == 0 && g[i] > 1e-8 * gscale)
         {
            throw std::domain_error("oc_solve: gradient has positive entries; the optimality "
                                    "criteria update needs a nonpositive gradient");
         }
         descent[i] = std::max(0.0, -g[i]);
      }

      auto update = [&](double log_lambda) {
         const double lambda = std::exp(log_lambda);
         Vec next(n);
         for (std::size_t i = 0; i < n; ++i)
         {
            if (is_passive(passive, i))
            {
               next[i] = 1.0;
               continue;
            }
            const double lo = std::max(0.0, rho[i] - cfg.move_limit);
            const double hi = std::min(1.0, rho[i] + cfg.move_limit);
            const double cand = rho[i] * std::pow(descent[i] / lambda, cfg.oc_exponent);
            next[i] = std::clamp(cand, lo, hi);
         }
         return next;
      };

      // volume decreases in lambda; bracket the root in log space
      double lo = -50.0, hi = 50.0;
      while (weighted_volume(update(lo), M) < target && lo > -700.0) { lo -= 50.0; }
      while (weighted_volume(update(hi), M) > target && hi < 700.0) { hi += 50.0; }
      Vec next;
      for (int it = 0; it < 2000; ++it)
      {
         const double mid = 0.5 * (lo + hi);
         if (mid <= lo || mid >= hi) { break; }
         next = update(mid);
         const double v = weighted_volume(next, M);
         if (std::abs(v - target) <= cfg.bisection_tol * adm.domain_volume) { hi = mid; break; }
         if (v > target) { lo = mid; }
         else { hi = mid; }
      }
      next = update(hi);

      F = obj.value(next);
      rho = std::move(next);
      g = design_gradient(obj, rho, passive);
      S = stationarity(rho, g, adm, M, passive);
      trace.rows.push_back({k + 1, F, kNaN, std::exp(hi), kNaN, S, 0, obj.evaluations(),
                            weighted_volume(rho, M)});
      if (on_iterate) { on_iterate(k + 1, rho, rho); }
      if (S <= cfg.tol)
      {
         trace.status = RunStatus::converged;
         break;
      }
   }
   trace.rho = std::move(rho);
   return trace;
}

} // namespace simpl
