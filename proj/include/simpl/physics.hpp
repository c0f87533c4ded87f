#pragma once

#include "simpl/fields.hpp"
#include "simpl/grid.hpp"

#include <atomic>
#include <memory>
#include <span>
#include <vector>

namespace simpl {

/// Differentiable reduced objective F(rho) over per-cell densities, as seen by
/// the optimizers. value() counts as one objective evaluation and remembers
/// the state it computed; gradient() must be called for the density most
/// recently passed to value().
class Objective {
public:
   virtual ~Objective() = default;

   virtual std::size_t size() const = 0;
   virtual std::span<const double> cell_volumes() const = 0;
   virtual double value(std::span<const double> rho) = 0;
   virtual Vec gradient(std::span<const double> rho) = 0;
   virtual long evaluations() const = 0;

   /// Cells pinned to solid material; empty means none.
   virtual std::span<const char> passive_cells() const { return {}; }
};

enum class ObjectiveKind { compliance, self_weight, mechanism };

enum class StatePreconditioner { jacobi, multigrid, automatic };

struct SolverSettings {
   /// automatic picks multigrid for meshes with at least multigrid_min_dofs
   /// displacement DOFs and a usable coarse hierarchy.
   StatePreconditioner preconditioner = StatePreconditioner::automatic;
   int multigrid_min_dofs = 2000;
   double state_tol = 1e-8;
   double filter_tol = 1e-10;
   int max_iterations = 500000;
   bool warm_start = true;
};

/// State produced by one evaluation, valid only for the density it stores.
struct EvalCache {
   Vec rho;        // fingerprint
   Vec rho_tilde;  // nodal filtered density
   Vec rho_cells;  // element values of rho_tilde
   Vec E;
   Vec rhs;
   Vec u;
   double F = 0.0;
   std::shared_ptr<const CsrMatrix> K;
   std::shared_ptr<const Preconditioner> K_preconditioner;
};

/// F(rho) = Fhat(rho_tilde(rho), u(rho_tilde)) for linear elasticity with a
/// PDE filter and SIMP interpolation.
///
/// * compliance:   K u = f,                 F = f^T u
/// * self_weight:  K u = f + g(rho_tilde),  F = (f + g)^T u
/// * mechanism:    K u = f,                 F = c^T u
///
/// Gradients follow the adjoint chain: K lambda = dF/du, a nodal dual load
/// from the SIMP and load derivatives, one filter solve, N^T and M^{-1}.
class ReducedObjective final : public Objective {
public:
   ReducedObjective(ObjectiveKind kind, ElasticModel model, FilterOperators filters, Vec load,
                    Vec output = {}, double gravity = 0.0, SolverSettings settings = {});

   static ReducedObjective compliance(ElasticModel model, FilterOperators filters, Vec f,
                                      SolverSettings settings = {});
   static ReducedObjective self_weight(ElasticModel model, FilterOperators filters, Vec f,
                                       double gravity, SolverSettings settings = {});
   /// Spring-and-load mechanism: f = (k_in/L) d_in, output = -(k_out/L) r_out.
   static ReducedObjective mechanism(ElasticModel model, FilterOperators filters, Vec f,
                                     Vec output, SolverSettings settings = {});

   ObjectiveKind kind() const { return kind_; }
   const ElasticModel &model() const { return model_; }
   const FilterOperators &filters() const { return filters_; }
   const Vec &load() const { return load_; }
   const Vec &output() const { return output_; }
   double gravity() const { return gravity_; }

   Vec apply_filter(std::span<const double> rho);
   Vec simp_stiffness(std::span<const double> rho_tilde_cells) const;
   /// d E / d rho_tilde per cell, consistent with the clamping in simp_stiffness.
   Vec simp_derivative(std::span<const double> rho_tilde_cells) const;

   EvalCache evaluate(std::span<const double> rho);
   /// L2 gradient g = M^{-1} dF. Throws std::logic_error on a stale cache.
   Vec gradient(std::span<const double> rho, const EvalCache &cache);

   std::size_t size() const override { return filters_.M.size(); }
   std::span<const double> cell_volumes() const override { return filters_.M; }
   double value(std::span<const double> rho) override;
   Vec gradient(std::span<const double> rho) override;
   long evaluations() const override { return evaluations_.load(); }
   std::span<const char> passive_cells() const override { return model_.passive_cells(); }

   const EvalCache &last_cache() const { return cache_; }
   const SolveReport &last_state_report() const { return state_report_; }
   const SolverSettings &settings() const { return settings_; }

   ReducedObjective(const ReducedObjective &other);
   ReducedObjective(ReducedObjective &&other) noexcept;

private:
   bool use_multigrid() const;

   ObjectiveKind kind_;
   ElasticModel model_;
   FilterOperators filters_;
   Vec load_;
   Vec output_;
   double gravity_;
   SolverSettings settings_;
   std::vector<CsrMatrix> prolongations_;
   std::atomic<long> evaluations_{0};
   EvalCache cache_;
   Vec warm_u_, warm_adjoint_, warm_filter_, warm_dual_;
   SolveReport state_report_;
};

} // namespace simpl
