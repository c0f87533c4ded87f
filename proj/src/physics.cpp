#include "simpl/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simpl {

ReducedObjective::ReducedObjective(ObjectiveKind kind, ElasticModel model, FilterOperators filters,
                                   Vec load, Vec output, double gravity, SolverSettings settings)
   : kind_(kind),
     model_(std::move(model)),
     filters_(std::move(filters)),
     load_(std::move(load)),
     output_(std::move(output)),
     gravity_(gravity),
     settings_(settings)
{
   const auto ndof = static_cast<std::size_t>(model_.mesh().num_dofs());
   if (load_.empty()) { load_.assign(ndof, 0.0); }
   if (load_.size() != ndof) { throw std::invalid_argument("ReducedObjective: load length mismatch"); }
   if (kind_ == ObjectiveKind::mechanism && output_.size() != ndof)
   {
      throw std::invalid_argument("ReducedObjective: mechanism objective needs an output vector");
   }
   if (filters_.M.size() != static_cast<std::size_t>(model_.mesh().num_cells()))
   {
      throw std::invalid_argument("ReducedObjective: filter operators do not match the mesh");
   }
   model_.apply_dirichlet(load_);
   if (!output_.empty()) { model_.apply_dirichlet(output_); }
   if (use_multigrid())
   {
      prolongations_ = displacement_prolongations(model_.mesh(), model_.dirichlet_mask());
   }
}

bool ReducedObjective::use_multigrid() const
{
   switch (settings_.preconditioner)
   {
   case StatePreconditioner::jacobi: return false;
   case StatePreconditioner::multigrid: return true;
   case StatePreconditioner::automatic: break;
   }
   const auto &mesh = model_.mesh();
   return mesh.num_dofs() >= settings_.multigrid_min_dofs && mesh.nx() % 2 == 0 && mesh.ny() % 2 == 0;
}

ReducedObjective::ReducedObjective(const ReducedObjective &o)
   : kind_(o.kind_), model_(o.model_), filters_(o.filters_), load_(o.load_), output_(o.output_),
     gravity_(o.gravity_), settings_(o.settings_), prolongations_(o.prolongations_),
     evaluations_(o.evaluations_.load()),
     cache_(o.cache_), warm_u_(o.warm_u_), warm_adjoint_(o.warm_adjoint_),
     warm_filter_(o.warm_filter_), warm_dual_(o.warm_dual_), state_report_(o.state_report_)
{
}

ReducedObjective::ReducedObjective(ReducedObjective &&o) noexcept
   : kind_(o.kind_), model_(std::move(o.model_)), filters_(std::move(o.filters_)),
     load_(std::move(o.load_)), output_(std::move(o.output_)), gravity_(o.gravity_),
     settings_(o.settings_), prolongations_(std::move(o.prolongations_)),
     evaluations_(o.evaluations_.load()), cache_(std::move(o.cache_)),
     warm_u_(std::move(o.warm_u_)), warm_adjoint_(std::move(o.warm_adjoint_)),
     warm_filter_(std::move(o.warm_filter_)), warm_dual_(std::move(o.warm_dual_)),
     state_report_(o.state_report_)
{
}

ReducedObjective ReducedObjective::compliance(ElasticModel model, FilterOperators filters, Vec f,
                                              SolverSettings settings)
{
   return ReducedObjective(ObjectiveKind::compliance, std::move(model), std::move(filters),
                           std::move(f), {}, 0.0, settings);
}

ReducedObjective ReducedObjective::self_weight(ElasticModel model, FilterOperators filters, Vec f,
                                               double gravity, SolverSettings settings)
{
   return ReducedObjective(ObjectiveKind::self_weight, std::move(model), std::move(filters),
                           std::move(f), {}, gravity, settings);
}

ReducedObjective ReducedObjective::mechanism(ElasticModel model, FilterOperators filters, Vec f,
                                             Vec output, SolverSettings settings)
{
   return ReducedObjective(ObjectiveKind::mechanism, std::move(model), std::move(filters),
                           std::move(f), std::move(output), 0.0, settings);
}

Vec ReducedObjective::apply_filter(std::span<const double> rho)
{
   if (rho.size() != size()) { throw std::invalid_argument("apply_filter: density length mismatch"); }
   const Vec rhs = filters_.N.multiply(rho);
   std::optional<std::span<const double>> x0;
   if (settings_.warm_start && warm_filter_.size() == rhs.size()) { x0 = warm_filter_; }
   auto res = cg_solve(filters_.system, rhs, settings_.filter_tol, settings_.max_iterations, x0);
   if (settings_.warm_start) { warm_filter_ = res.x; }
   return std::move(res.x);
}

Vec ReducedObjective::simp_stiffness(std::span<const double> rho_cells) const
{
   const auto &m = model_.material();
   Vec E(rho_cells.size());
   for (std::size_t c = 0; c < E.size(); ++c)
   {
      const double r = std::max(rho_cells[c], 0.0);
      E[c] = m.e_min + std::pow(r, m.penal) * (m.e_max - m.e_min);
   }
   return E;
}

Vec ReducedObjective::simp_derivative(std::span<const double> rho_cells) const
{
   const auto &m = model_.material();
   Vec dE(rho_cells.size());
   for (std::size_t c = 0; c < dE.size(); ++c)
   {
      const double r = std::max(rho_cells[c], 0.0);
      dE[c] = m.penal * std::pow(r, m.penal - 1.0) * (m.e_max - m.e_min);
   }
   return dE;
}

EvalCache ReducedObjective::evaluate(std::span<const double> rho)
{
   EvalCache c;
   c.rho.assign(rho.begin(), rho.end());
   c.rho_tilde = apply_filter(rho);
   c.rho_cells = cell_average(model_.mesh(), c.rho_tilde);
   c.E = simp_stiffness(c.rho_cells);
   c.K = std::make_shared<const CsrMatrix>(model_.assemble_stiffness(c.E));
   if (prolongations_.empty())
   {
      c.K_preconditioner = std::make_shared<const JacobiPreconditioner>(*c.K);
   }
   else
   {
      c.K_preconditioner = std::make_shared<const MultigridPreconditioner>(*c.K, prolongations_);
   }
   c.rhs = load_;
   if (kind_ == ObjectiveKind::self_weight && gravity_ != 0.0)
   {
      const Vec g = assemble_self_weight(model_.mesh(), c.rho_tilde, gravity_);
      for (std::size_t d = 0; d < c.rhs.size(); ++d) { c.rhs[d] += g[d]; }
      model_.apply_dirichlet(c.rhs);
   }
   {
      std::optional<std::span<const double>> x0;
      if (settings_.warm_start && warm_u_.size() == c.rhs.size()) { x0 = warm_u_; }
      auto res = pcg_solve(*c.K, c.rhs, settings_.state_tol, settings_.max_iterations,
                           *c.K_preconditioner, x0);
      state_report_ = res.report;
      if (settings_.warm_start) { warm_u_ = res.x; }
      c.u = std::move(res.x);
   }
   const Vec &functional = kind_ == ObjectiveKind::mechanism ? output_ : c.rhs;
   double F = 0.0;
   for (std::size_t d = 0; d < c.u.size(); ++d) { F += functional[d] * c.u[d]; }
   c.F = F;
   evaluations_.fetch_add(1);
   return c;
}

Vec ReducedObjective::gradient(std::span<const double> rho, const EvalCache &c)
{
   if (c.rho.size() != rho.size() || !std::equal(rho.begin(), rho.end(), c.rho.begin()))
   {
      throw std::logic_error("ReducedObjective::gradient: cache was computed for a different density");
   }
   const auto &mesh = model_.mesh();
   const auto &k0 = model_.unit_stiffness();

   // adjoint: compliance-type objectives are self-adjoint
   Vec adjoint_storage;
   const Vec *lambda = &c.u;
   if (kind_ == ObjectiveKind::mechanism)
   {
      if (!c.K || !c.K_preconditioner) { throw std::logic_error("ReducedObjective::gradient: cache has no operator"); }
      std::optional<std::span<const double>> x0;
      if (settings_.warm_start && warm_adjoint_.size() == output_.size()) { x0 = warm_adjoint_; }
      auto res = pcg_solve(*c.K, output_, settings_.state_tol, settings_.max_iterations,
                           *c.K_preconditioner, x0);
      if (settings_.warm_start) { warm_adjoint_ = res.x; }
      adjoint_storage = std::move(res.x);
      lambda = &adjoint_storage;
   }

   // derivative with respect to the element values of rho_tilde
   const Vec dE = simp_derivative(c.rho_cells);
   Vec d_cells(mesh.num_cells(), 0.0);
   const double weight_share = -0.25 * gravity_ * mesh.cell_area();
   for (int e = 0; e < mesh.num_cells(); ++e)
   {
      const auto dofs = model_.cell_dofs(e);
      double ue[8], le[8];
      for (int a = 0; a < 8; ++a)
      {
         ue[a] = c.u[dofs[a]];
         le[a] = (*lambda)[dofs[a]];
      }
      double energy = 0.0;
      for (int a = 0; a < 8; ++a)
      {
         double s = 0.0;
         for (int b = 0; b < 8; ++b) { s += k0[a * 8 + b] * ue[b]; }
         energy += le[a] * s;
      }
      d_cells[e] = -dE[e] * energy;
      if (kind_ == ObjectiveKind::self_weight && gravity_ != 0.0)
      {
         // F = b^T u with b depending on rho_tilde: 2 u^T db
         double uy = 0.0;
         for (int a = 0; a < 4; ++a) { uy += ue[2 * a + 1]; }
         d_cells[e] += 2.0 * weight_share * uy;
      }
   }

   const Vec dual_load = cell_average_transpose(mesh, d_cells);
   std::optional<std::span<const double>> x0;
   if (settings_.warm_start && warm_dual_.size() == dual_load.size()) { x0 = warm_dual_; }
   auto dual = cg_solve(filters_.system, dual_load, settings_.filter_tol, settings_.max_iterations, x0);
   if (settings_.warm_start) { warm_dual_ = dual.x; }

   Vec g = filters_.N.multiply_transpose(dual.x);
   for (std::size_t e = 0; e < g.size(); ++e) { g[e] /= filters_.M[e]; }
   return g;
}

double ReducedObjective::value(std::span<const double> rho)
{
   cache_ = evaluate(rho);
   return cache_.F;
}

Vec ReducedObjective::gradient(std::span<const double> rho) { return gradient(rho, cache_); }

} // namespace simpl
