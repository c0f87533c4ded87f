#pragma once

#include "simpl/simpl.hpp"

namespace simpl {

enum class BaselineMethod { pgd, oc };

struct BaselineConfig {
   BaselineMethod method = BaselineMethod::pgd;
   double tol = 1e-5;  // on the stationarity measure S
   int max_iters = 1000;
   // pgd
   double c1 = 1e-4;
   int max_backtracks = 30;
   // oc
   double move_limit = 0.2;
   double oc_exponent = 0.5;
   double bisection_tol = 1e-12;

   void validate() const;
};

struct Projection {
   Vec rho;
   double mu = 0.0;  // total downward shift applied before clipping
};

/// M-orthogonal projection onto {0 <= rho <= 1, 1^T M rho <= theta |Omega|}:
/// clip(q - mu, 0, 1) with mu >= 0 and complementarity. Passive cells are set
/// to 1 and keep their volume.
Projection l2_project(std::span<const double> q, const AdmissibleParams &adm,
                      std::span<const double> cell_volumes, std::span<const char> passive = {});

/// S = || rho - P(rho - g) ||_M.
double stationarity(std::span<const double> rho, std::span<const double> g,
                    const AdmissibleParams &adm, std::span<const double> cell_volumes,
                    std::span<const char> passive = {});

/// Projected gradient descent with BB-seeded Armijo backtracking; stops on S.
OptTrace pgd_solve(Objective &obj, const AdmissibleParams &adm, const BaselineConfig &cfg,
                   std::optional<std::span<const double>> rho0 = std::nullopt,
                   const IterateCallback &on_iterate = {});

/// Optimality criteria update with move limit and volume bisection; stops on S.
/// Throws std::domain_error when the starting gradient has positive entries.
OptTrace oc_solve(Objective &obj, const AdmissibleParams &adm, const BaselineConfig &cfg,
                  std::optional<std::span<const double>> rho0 = std::nullopt,
                  const IterateCallback &on_iterate = {});

} // namespace simpl
