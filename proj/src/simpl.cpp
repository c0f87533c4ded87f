#include "simpl/simpl.hpp"

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

void require_size(std::size_t a, std::size_t b, const char *what)
{
   if (a != b) { throw std::invalid_argument(std::string(what) + ": length mismatch"); }
}

Vec difference(std::span<const double> a, std::span<const double> b)
{
   Vec d(a.size());
   for (std::size_t i = 0; i < a.size(); ++i) { d[i] = a[i] - b[i]; }
   return d;
}

void zero_passive(Vec &g, std::span<const char> passive)
{
   for (std::size_t i = 0; i < g.size(); ++i)
   {
      if (is_passive(passive, i)) { g[i] = 0.0; }
   }
}

} // namespace

void SimplConfig::validate() const
{
   if (!(c1 > 0.0 && c1 < 1.0)) { throw std::invalid_argument("SimplConfig: c1 must lie in (0,1)"); }
   if (!(tol > 0.0)) { throw std::invalid_argument("SimplConfig: tol must be positive"); }
   if (max_iters < 0) { throw std::invalid_argument("SimplConfig: max_iters must be nonnegative"); }
   if (!(clamp_bound > 0.0)) { throw std::invalid_argument("SimplConfig: clamp_bound must be positive"); }
   if (!(entropy_penalty_weight >= 0.0))
   {
      throw std::invalid_argument("SimplConfig: entropy_penalty_weight must be nonnegative");
   }
   if (!(bisection_tol > 0.0)) { throw std::invalid_argument("SimplConfig: bisection_tol must be positive"); }
   if (max_backtracks < 0) { throw std::invalid_argument("SimplConfig: max_backtracks must be nonnegative"); }
}

Vec latent_step(std::span<const double> psi, std::span<const double> g, double alpha,
                double entropy_penalty_weight)
{
   require_size(psi.size(), g.size(), "latent_step");
   if (!(alpha > 0.0)) { throw std::invalid_argument("latent_step: alpha must be positive"); }
   const double decay = 1.0 - alpha * entropy_penalty_weight;
   Vec out(psi.size());
   for (std::size_t i = 0; i < psi.size(); ++i) { out[i] = decay * psi[i] - alpha * g[i]; }
   return out;
}

double latent_volume(std::span<const double> psi, double shift, std::span<const double> cell_volumes,
                     double clamp_bound, std::span<const char> passive)
{
   require_size(psi.size(), cell_volumes.size(), "latent_volume");
   Vec terms(psi.size());
   const double solid = sigmoid(clamp_bound);
   for (std::size_t i = 0; i < psi.size(); ++i)
   {
      const double s = is_passive(passive, i)
                          ? solid
                          : sigmoid(std::clamp(psi[i] - shift, -clamp_bound, clamp_bound));
      terms[i] = cell_volumes[i] * s;
   }
   return pairwise_sum(terms);
}

VolumeCorrection volume_correct(std::span<const double> psi_half, double alpha,
                                const AdmissibleParams &adm, std::span<const double> cell_volumes,
                                std::span<const double> g, const VolumeOptions &opts)
{
   require_size(psi_half.size(), cell_volumes.size(), "volume_correct");
   require_size(psi_half.size(), g.size(), "volume_correct");
   if (!(alpha > 0.0)) { throw std::invalid_argument("volume_correct: alpha must be positive"); }
   const double target = adm.volume_limit();
   auto volume = [&](double mu) {
      return latent_volume(psi_half, alpha * mu, cell_volumes, opts.clamp_bound, opts.passive);
   };

   VolumeCorrection out;
   if (volume(0.0) > target)
   {
      out.active = true;
      double hi = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i)
      {
         if (!is_passive(opts.passive, i)) { hi = std::max(hi, -g[i]); }
      }
      if (!(hi > 0.0) || volume(hi) > target)
      {
         if (!opts.widen_bracket)
         {
            throw std::runtime_error(
               "volume_correct: volume root not bracketed by [0, max(-g)]; "
               "the previous iterate is infeasible");
         }
         hi = std::max(hi, 1.0 / alpha);
         int tries = 0;
         while (volume(hi) > target)
         {
            hi *= 2.0;
            if (++tries > 200) { throw std::runtime_error("volume_correct: bracket widening failed"); }
         }
      }
      double lo = 0.0;
      for (int it = 0; it < 2000; ++it)
      {
         const double mid = lo + 0.5 * (hi - lo);
         if (mid <= lo || mid >= hi) { break; }
         if (volume(mid) > target) { lo = mid; }
         else { hi = mid; }
      }
      out.mu = hi;
   }

   out.psi_unclamped.resize(psi_half.size());
   out.psi.resize(psi_half.size());
   for (std::size_t i = 0; i < psi_half.size(); ++i)
   {
      out.psi_unclamped[i] = psi_half[i] - alpha * out.mu;
      out.psi[i] = is_passive(opts.passive, i)
                      ? opts.clamp_bound
                      : std::clamp(out.psi_unclamped[i], -opts.clamp_bound, opts.clamp_bound);
   }
   out.volume = latent_volume(out.psi, 0.0, cell_volumes, opts.clamp_bound, opts.passive);
   return out;
}

bool armijo_accept(double F_new, double F_old, std::span<const double> g,
                   std::span<const double> rho_new, std::span<const double> rho_old,
                   std::span<const double> cell_volumes, double c1)
{
   const Vec d = difference(rho_new, rho_old);
   return F_new <= F_old + c1 * weighted_inner(g, d, cell_volumes);
}

bool bregman_accept(double F_new, double F_old, std::span<const double> g,
                    std::span<const double> rho_new, std::span<const double> rho_old,
                    std::span<const double> cell_volumes, double alpha)
{
   if (!(alpha > 0.0)) { throw std::invalid_argument("bregman_accept: alpha must be positive"); }
   const Vec d = difference(rho_new, rho_old);
   const DensityField a{Vec(rho_new.begin(), rho_new.end()), Vec(cell_volumes.begin(), cell_volumes.end())};
   const DensityField b{Vec(rho_old.begin(), rho_old.end()), Vec(cell_volumes.begin(), cell_volumes.end())};
   return F_new <= F_old + weighted_inner(g, d, cell_volumes) + bregman_divergence(a, b) / alpha;
}

bool bregman_accept_latent(double F_new, double F_old, std::span<const double> g,
                           std::span<const double> psi_new, std::span<const double> psi_old,
                           std::span<const double> cell_volumes, double alpha)
{
   if (!(alpha > 0.0)) { throw std::invalid_argument("bregman_accept: alpha must be positive"); }
   const Vec d = difference(sigmoid(psi_new), sigmoid(psi_old));
   return F_new <= F_old + weighted_inner(g, d, cell_volumes) +
                      bregman_divergence_latent(psi_new, psi_old, cell_volumes) / alpha;
}

std::optional<double> gbb_stepsize(std::span<const double> psi_k, std::span<const double> psi_prev,
                                   std::span<const double> rho_k, std::span<const double> rho_prev,
                                   std::span<const double> g_k, std::span<const double> g_prev,
                                   std::span<const double> cell_volumes)
{
   const Vec dpsi = difference(psi_k, psi_prev);
   const Vec drho = difference(rho_k, rho_prev);
   const Vec dg = difference(g_k, g_prev);
   const double num = weighted_inner(dpsi, drho, cell_volumes);
   const double den = std::abs(weighted_inner(dg, drho, cell_volumes));
   if (!(den > 0.0) || !(num > 0.0) || !std::isfinite(num / den)) { return std::nullopt; }
   return num / den;
}

double seed_stepsize(int k, double alpha_gbb, double alpha_prev, std::span<const double> g0)
{
   if (k < 0) { throw std::invalid_argument("seed_stepsize: negative iteration index"); }
   if (k == 0)
   {
      double gmax = 0.0;
      for (double v : g0) { gmax = std::max(gmax, std::abs(v)); }
      return gmax > 0.0 ? 1.0 / gmax : 0.0;
   }
   return std::sqrt(alpha_gbb * alpha_prev);
}

KktResult kkt_estimate(std::span<const double> psi_next, std::span<const double> psi_k, double alpha,
                       std::span<const double> rho, std::span<const double> cell_volumes,
                       KktVariant variant, double mu, std::span<const char> passive)
{
   require_size(psi_next.size(), psi_k.size(), "kkt_estimate");
   require_size(psi_next.size(), rho.size(), "kkt_estimate");
   require_size(psi_next.size(), cell_volumes.size(), "kkt_estimate");
   if (!(alpha > 0.0)) { throw std::invalid_argument("kkt_estimate: alpha must be positive"); }
   KktResult out;
   out.estimate.mu = mu;
   out.estimate.lambda.resize(rho.size());
   Vec terms(rho.size(), 0.0);
   for (std::size_t i = 0; i < rho.size(); ++i)
   {
      const double lam = (psi_next[i] - psi_k[i]) / alpha;
      out.estimate.lambda[i] = lam;
      if (is_passive(passive, i)) { continue; }
      double eta = 0.0;
      if (variant == KktVariant::a)
      {
         eta = std::max(-rho[i] * lam, (1.0 - rho[i]) * lam);
      }
      else
      {
         eta = lam - std::min(0.0, rho[i] + lam) - std::max(0.0, rho[i] - 1.0 + lam);
      }
      terms[i] = cell_volumes[i] * std::abs(eta);
   }
   out.kkt = pairwise_sum(terms);
   return out;
}

OptTrace simpl_solve(Objective &obj, const AdmissibleParams &adm, const SimplConfig &cfg,
                     std::optional<std::span<const double>> rho0, const IterateCallback &on_iterate)
{
   cfg.validate();
   const std::size_t n = obj.size();
   const std::span<const double> M = obj.cell_volumes();
   const std::vector<char> passive(obj.passive_cells().begin(), obj.passive_cells().end());
   const double clamp = cfg.clamp_bound;

   // initial latent field
   Vec psi(n);
   if (rho0)
   {
      require_size(rho0->size(), n, "simpl_solve");
      for (std::size_t i = 0; i < n; ++i)
      {
         const double r = (*rho0)[i];
         if (r <= 0.0) { psi[i] = -clamp; }
         else if (r >= 1.0) { psi[i] = clamp; }
         else { psi[i] = std::clamp(logit(r), -clamp, clamp); }
      }
   }
   else
   {
      // theta on design cells, lowered when solid passive cells would exceed the bound
      double passive_volume = 0.0;
      for (std::size_t i = 0; i < n; ++i)
      {
         if (is_passive(passive, i)) { passive_volume += M[i]; }
      }
      double start = adm.theta;
      if (passive_volume > 0.0)
      {
         const double room = (adm.volume_limit() - passive_volume * sigmoid(clamp)) /
                             (adm.domain_volume - passive_volume);
         start = std::min(start, room);
      }
      if (!(start > 0.0)) { throw std::invalid_argument("simpl_solve: passive cells exceed the volume bound"); }
      std::fill(psi.begin(), psi.end(), logit(start));
   }
   for (std::size_t i = 0; i < n; ++i)
   {
      if (is_passive(passive, i)) { psi[i] = clamp; }
   }
   const double volume0 = latent_volume(psi, 0.0, M, clamp, passive);
   if (volume0 > adm.volume_limit() + cfg.bisection_tol * adm.domain_volume)
   {
      throw std::invalid_argument("simpl_solve: initial design violates the volume bound");
   }

   Vec rho = sigmoid(psi);
   double F = obj.value(rho);
   Vec g = obj.gradient(rho);
   zero_passive(g, passive);

   OptTrace trace;
   const double S0 = stationarity(rho, g, adm, M, passive);
   trace.rows.push_back({0, F, kNaN, kNaN, kNaN, S0, 0, obj.evaluations(), volume0});
   if (on_iterate) { on_iterate(0, rho, psi); }

   double gmax = 0.0;
   for (double v : g) { gmax = std::max(gmax, std::abs(v)); }
   if (n == 0 || gmax == 0.0 || (cfg.stop == StopMode::stationarity && S0 <= cfg.tol))
   {
      trace.status = RunStatus::converged;
      trace.message = gmax == 0.0 ? "stationary initial design" : "initial design meets the tolerance";
      trace.rho = rho;
      trace.psi = psi;
      return trace;
   }

   const VolumeOptions vopts{clamp, cfg.bisection_tol, passive, cfg.entropy_penalty_weight > 0.0};
   Vec psi_prev, rho_prev, g_prev;
   double alpha_prev = 0.0;
   double kkt0 = kNaN;
   trace.status = RunStatus::iteration_cap;

   for (int k = 0; k < cfg.max_iters; ++k)
   {
      double alpha = 0.0;
      if (k == 0) { alpha = seed_stepsize(0, 0.0, 0.0, g); }
      else
      {
         const auto gbb = gbb_stepsize(psi, psi_prev, rho, rho_prev, g, g_prev, M);
         alpha = seed_stepsize(k, gbb.value_or(alpha_prev), alpha_prev, g);
         if (!(alpha > 0.0) || !std::isfinite(alpha)) { alpha = alpha_prev; }
      }

      int backtracks = 0;
      bool accepted = false;
      VolumeCorrection vc;
      Vec rho_new;
      double F_new = 0.0;
      for (;;)
      {
         const Vec psi_half = latent_step(psi, g, alpha, cfg.entropy_penalty_weight);
         vc = volume_correct(psi_half, alpha, adm, M, g, vopts);
         rho_new = sigmoid(vc.psi);
         F_new = obj.value(rho_new);
         accepted = cfg.line_search == LineSearch::armijo
                       ? armijo_accept(F_new, F, g, rho_new, rho, M, cfg.c1)
                       : bregman_accept_latent(F_new, F, g, vc.psi, psi, M, alpha);
         if (accepted || backtracks == cfg.max_backtracks) { break; }
         ++backtracks;
         alpha *= 0.5;
      }
      if (!accepted)
      {
         trace.status = RunStatus::line_search_failed;
         trace.message = "line search failed after " + std::to_string(cfg.max_backtracks) +
                         " halvings at iteration " + std::to_string(k + 1);
         // the objective cache now holds the rejected trial; restore it
         obj.value(rho);
         break;
      }

      Vec g_new = obj.gradient(rho_new);
      zero_passive(g_new, passive);
      const KktResult kkt = kkt_estimate(vc.psi_unclamped, psi, alpha, rho_new, M, cfg.kkt_variant,
                                         vc.mu, passive);
      const double S = stationarity(rho_new, g_new, adm, M, passive);

      psi_prev = std::move(psi);
      rho_prev = std::move(rho);
      g_prev = std::move(g);
      psi = std::move(vc.psi);
      rho = std::move(rho_new);
      g = std::move(g_new);
      F = F_new;
      alpha_prev = alpha;

      trace.rows.push_back({k + 1, F, alpha, vc.mu, kkt.kkt, S, backtracks, obj.evaluations(), vc.volume});
      if (on_iterate) { on_iterate(k + 1, rho, psi); }
      if (k == 0) { kkt0 = kkt.kkt; }

      bool done = false;
      switch (cfg.stop)
      {
      case StopMode::kkt: done = kkt.kkt <= cfg.tol; break;
      case StopMode::kkt_relative: done = k > 0 && kkt.kkt <= cfg.tol * kkt0; break;
      case StopMode::stationarity: done = S <= cfg.tol; break;
      }
      if (done)
      {
         trace.status = RunStatus::converged;
         break;
      }
   }
   trace.rho = std::move(rho);
   trace.psi = std::move(psi);
   return trace;
}

} // namespace simpl
