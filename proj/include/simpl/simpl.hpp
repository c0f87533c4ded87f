#pragma once

#include "simpl/fields.hpp"
#include "simpl/physics.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace simpl {

enum class LineSearch { armijo, bregman };
enum class KktVariant { a, b };
enum class StopMode { kkt, kkt_relative, stationarity };
enum class RunStatus { converged, iteration_cap, line_search_failed };

struct SimplConfig {
   LineSearch line_search = LineSearch::armijo;
   double c1 = 1e-4;
   double tol = 1e-5;
   StopMode stop = StopMode::kkt;
   int max_iters = 1000;
   KktVariant kkt_variant = KktVariant::a;
   double clamp_bound = kDefaultClampBound;
   double entropy_penalty_weight = 0.0;
   double bisection_tol = 1e-12;
   int max_backtracks = 30;

   /// Throws std::invalid_argument on out-of-range parameters.
   void validate() const;
};

struct TraceRow {
   int iter = 0;
   double F = 0.0;
   double alpha = 0.0;
   double mu = 0.0;
   double kkt = 0.0;
   double stationarity = 0.0;
   int backtracks = 0;
   long evals = 0;
   double volume = 0.0;
};

/// Row 0 describes the initial design (alpha, mu and kkt are NaN); row k is
/// the k-th accepted iterate.
struct OptTrace {
   std::vector<TraceRow> rows;
   Vec rho;
   Vec psi;
   RunStatus status = RunStatus::iteration_cap;
   std::string message;

   int iterations() const { return rows.empty() ? 0 : rows.back().iter; }
   bool converged() const { return status == RunStatus::converged; }
   double final_F() const { return rows.empty() ? 0.0 : rows.back().F; }
};

/// Observer for accepted iterates (k = 0 is the initial design).
using IterateCallback =
   std::function<void(int k, std::span<const double> rho, std::span<const double> psi)>;

struct KktMultiplierEstimate {
   Vec lambda;
   double mu = 0.0;
};

/// psi_half = (1 - alpha * weight) psi - alpha g.
Vec latent_step(std::span<const double> psi, std::span<const double> g, double alpha,
                double entropy_penalty_weight = 0.0);

struct VolumeOptions {
   double clamp_bound = kDefaultClampBound;
   double bisection_tol = 1e-12;
   std::span<const char> passive;
   /// Double the bracket until it holds the root instead of failing.
   bool widen_bracket = false;
};

struct VolumeCorrection {
   Vec psi;            // clamped, passive cells pinned
   Vec psi_unclamped;  // psi_half - alpha mu
   double mu = 0.0;
   double volume = 0.0;
   bool active = false;
};

/// Shift psi_half by -alpha mu so the volume bound holds. mu = 0 when the
/// half step is already feasible; otherwise mu is the bisection root in
/// [0, max(-g)] on the feasible side. Throws std::runtime_error when the
/// bracket does not contain the root.
VolumeCorrection volume_correct(std::span<const double> psi_half, double alpha,
                                const AdmissibleParams &adm, std::span<const double> cell_volumes,
                                std::span<const double> g, const VolumeOptions &opts = {});

/// sum_i M_i sigma(clamp(psi_i - shift)), passive cells counted as +clamp.
double latent_volume(std::span<const double> psi, double shift, std::span<const double> cell_volumes,
                     double clamp_bound, std::span<const char> passive = {});

bool armijo_accept(double F_new, double F_old, std::span<const double> g,
                   std::span<const double> rho_new, std::span<const double> rho_old,
                   std::span<const double> cell_volumes, double c1);

bool bregman_accept(double F_new, double F_old, std::span<const double> g,
                    std::span<const double> rho_new, std::span<const double> rho_old,
                    std::span<const double> cell_volumes, double alpha);

/// Same rule with the divergence evaluated from latent values, which stays
/// accurate when densities saturate.
bool bregman_accept_latent(double F_new, double F_old, std::span<const double> g,
                           std::span<const double> psi_new, std::span<const double> psi_old,
                           std::span<const double> cell_volumes, double alpha);

/// (dpsi^T M drho) / |dg^T M drho|; nullopt when the denominator vanishes.
std::optional<double> gbb_stepsize(std::span<const double> psi_k, std::span<const double> psi_prev,
                                   std::span<const double> rho_k, std::span<const double> rho_prev,
                                   std::span<const double> g_k, std::span<const double> g_prev,
                                   std::span<const double> cell_volumes);

/// k = 0: 1 / max|g0| (0 if g0 vanishes); otherwise sqrt(alpha_gbb alpha_prev).
double seed_stepsize(int k, double alpha_gbb, double alpha_prev, std::span<const double> g0);

struct KktResult {
   double kkt = 0.0;
   KktMultiplierEstimate estimate;
};

/// lambda = (psi_next - psi_k) / alpha and KKT = sum_i M_i |eta_i| with
///   A: eta = max(-rho lambda, (1 - rho) lambda)
///   B: eta = lambda - min(0, rho + lambda) - max(0, rho - 1 + lambda)
/// Passive cells are skipped.
KktResult kkt_estimate(std::span<const double> psi_next, std::span<const double> psi_k, double alpha,
                       std::span<const double> rho, std::span<const double> cell_volumes,
                       KktVariant variant, double mu = 0.0, std::span<const char> passive = {});

/// Runs the mirror descent iteration from rho0 (default theta everywhere).
OptTrace simpl_solve(Objective &obj, const AdmissibleParams &adm, const SimplConfig &cfg,
                     std::optional<std::span<const double>> rho0 = std::nullopt,
                     const IterateCallback &on_iterate = {});

} // namespace simpl
