#include "simpl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simpl {

namespace {

void resolve_resolution(const PresetOptions &opts, const PresetDefaults &d, int &nx, int &ny)
{
   nx = opts.nx > 0 ? opts.nx : d.nx;
   ny = opts.ny > 0 ? opts.ny : d.ny;
   if (opts.nx < 0 || opts.ny < 0) { throw std::invalid_argument("preset: negative resolution"); }
}

void apply_defaults(ProblemSetup &setup, const PresetDefaults &d)
{
   setup.line_search = d.line_search;
   setup.kkt_variant = d.kkt_variant;
   setup.stop = d.stop;
   setup.tol = d.tol;
}

double distance_to_segment(double px, double py, const std::array<double, 2> &a,
                           const std::array<double, 2> &b)
{
   const double dx = b[0] - a[0], dy = b[1] - a[1];
   const double len2 = dx * dx + dy * dy;
   double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
   t = std::clamp(t, 0.0, 1.0);
   return std::hypot(px - a[0] - t * dx, py - a[1] - t * dy);
}

} // namespace

PresetDefaults preset_defaults(const std::string &name)
{
   PresetDefaults d;
   if (name == "mbb")
   {
      d.nx = 768, d.ny = 256, d.theta = 0.3;
      d.stop = StopMode::stationarity;
   }
   else if (name == "bridge")
   {
      d.nx = 1024, d.ny = 512, d.theta = 0.7;
      d.line_search = LineSearch::bregman;
      d.stop = StopMode::kkt_relative;
   }
   else if (name == "inverter")
   {
      d.nx = 512, d.ny = 512, d.theta = 0.3;
      d.line_search = LineSearch::bregman;
      d.kkt_variant = KktVariant::b;
      d.tol = 5e-5;
   }
   else { throw std::invalid_argument("unknown problem preset '" + name + "'"); }
   return d;
}

ProblemSetup make_mbb(const PresetOptions &opts)
{
   const PresetDefaults d = preset_defaults("mbb");
   int nx = 0, ny = 0;
   resolve_resolution(opts, d, nx, ny);
   CartesianMesh mesh(nx, ny, 3.0, 1.0);
   std::vector<char> mask(mesh.num_dofs(), 0);
   for (int j = 0; j <= ny; ++j) { mask[2 * mesh.node(0, j)] = 1; }
   mask[2 * mesh.node(nx, 0) + 1] = 1;
   ElasticModel model(mesh, opts.material, std::move(mask));
   Vec f = assemble_body_force(
      mesh, [](double x, double y) { return x * x + (y - 1.0) * (y - 1.0) <= 0.05 * 0.05; }, 0.0, -1.0);
   FilterOperators filters = assemble_filter_operators(mesh, opts.rmin);
   ProblemSetup setup{"mbb",
                      ReducedObjective::compliance(std::move(model), std::move(filters), std::move(f),
                                                   opts.solver),
                      AdmissibleParams(opts.theta.value_or(d.theta), mesh.area()), std::nullopt};
   apply_defaults(setup, d);
   return setup;
}

ProblemSetup make_bridge(const PresetOptions &opts)
{
   const PresetDefaults d = preset_defaults("bridge");
   int nx = 0, ny = 0;
   resolve_resolution(opts, d, nx, ny);
   CartesianMesh mesh(nx, ny, 2.0, 1.0);
   std::vector<char> mask(mesh.num_dofs(), 0);
   for (int j = 0; j <= ny; ++j) { mask[2 * mesh.node(0, j)] = 1; }
   mask[2 * mesh.node(nx, 0)] = 1;
   mask[2 * mesh.node(nx, 0) + 1] = 1;
   ElasticModel model(mesh, opts.material, std::move(mask));

   const double band = 1.0 - std::ldexp(1.0, -5);
   std::vector<char> passive(mesh.num_cells(), 0);
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      if (mesh.cell_center(c)[1] >= band) { passive[c] = 1; }
   }
   if (std::none_of(passive.begin(), passive.end(), [](char p) { return p != 0; }))
   {
      throw std::invalid_argument("bridge: mesh too coarse to resolve the passive band");
   }
   model.set_passive_cells(std::move(passive));

   Vec f = assemble_body_force(mesh, [band](double, double y) { return y >= band; }, 0.0, -40.0);
   FilterOperators filters = assemble_filter_operators(mesh, opts.rmin);
   ProblemSetup setup{"bridge",
                      ReducedObjective::self_weight(std::move(model), std::move(filters), std::move(f),
                                                    9.81, opts.solver),
                      AdmissibleParams(opts.theta.value_or(d.theta), mesh.area()), std::nullopt};
   apply_defaults(setup, d);
   return setup;
}

ProblemSetup make_inverter(const PresetOptions &opts)
{
   const PresetDefaults d = preset_defaults("inverter");
   int nx = 0, ny = 0;
   resolve_resolution(opts, d, nx, ny);
   if (ny % 2 != 0) { throw std::invalid_argument("inverter: ny must be even"); }
   CartesianMesh mesh(nx, ny / 2, 1.0, 0.5);
   const int hy = ny / 2;
   std::vector<char> mask(mesh.num_dofs(), 0);
   for (int i = 0; i <= nx; ++i) { mask[2 * mesh.node(i, hy) + 1] = 1; }
   mask[2 * mesh.node(0, 0)] = 1;
   mask[2 * mesh.node(0, 0) + 1] = 1;
   ElasticModel model(mesh, opts.material, mask);

   const double L = 1.0 / 64.0;
   const double k_in = 1.0, k_out = 0.0005;
   const Vec d_in = assemble_boundary_segment(mesh, Side::left, 0.5 - 0.5 * L, 0.5, 1.0, 0.0);
   const Vec r_out = assemble_boundary_segment(mesh, Side::right, 0.5 - 0.5 * L, 0.5, -1.0, 0.0);
   Vec f(d_in.size()), c(r_out.size());
   for (std::size_t d = 0; d < f.size(); ++d)
   {
      f[d] = k_in / L * d_in[d];
      c[d] = -k_out / L * r_out[d];
      if (d_in[d] != 0.0) { model.add_spring(static_cast<int>(d), k_in / L * std::abs(d_in[d])); }
      if (r_out[d] != 0.0) { model.add_spring(static_cast<int>(d), k_out / L * std::abs(r_out[d])); }
   }
   FilterOperators filters = assemble_filter_operators(mesh, opts.rmin);
   const double theta = opts.theta.value_or(d.theta);
   ProblemSetup setup{"inverter",
                      ReducedObjective::mechanism(std::move(model), std::move(filters), std::move(f),
                                                  std::move(c), opts.solver),
                      AdmissibleParams(theta, mesh.area()), std::nullopt};
   apply_defaults(setup, d);
   setup.mirrored = true;

   if (opts.initial_design == "center")
   {
      setup.rho0 = strip_design(mesh, {{{0.0, 0.5}, {0.5, 0.25}, {1.0, 0.5}}}, theta);
   }
   else if (opts.initial_design == "bottom")
   {
      setup.rho0 = strip_design(mesh, {{{0.0, 0.5}, {0.5, 0.0}, {1.0, 0.5}}}, theta);
   }
   else if (opts.initial_design != "uniform")
   {
      throw std::invalid_argument("inverter: unknown initial design '" + opts.initial_design + "'");
   }
   return setup;
}

ProblemSetup make_preset(const std::string &name, const PresetOptions &opts)
{
   if (name == "mbb") { return make_mbb(opts); }
   if (name == "bridge") { return make_bridge(opts); }
   if (name == "inverter") { return make_inverter(opts); }
   throw std::invalid_argument("unknown problem preset '" + name + "'");
}

Vec strip_design(const CartesianMesh &mesh, const std::vector<std::array<double, 2>> &polyline,
                 double theta, double strip_value)
{
   if (polyline.size() < 2) { throw std::invalid_argument("strip_design: polyline needs two points"); }
   const double width = std::max(mesh.hx(), mesh.hy());
   std::vector<char> on_strip(mesh.num_cells(), 0);
   double strip_area = 0.0;
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      const auto p = mesh.cell_center(c);
      for (std::size_t s = 0; s + 1 < polyline.size(); ++s)
      {
         if (distance_to_segment(p[0], p[1], polyline[s], polyline[s + 1]) <= width)
         {
            on_strip[c] = 1;
            strip_area += mesh.cell_area();
            break;
         }
      }
   }
   const double rest = mesh.area() - strip_area;
   const double background =
      rest > 0.0 ? (theta * mesh.area() - strip_value * strip_area) / rest : strip_value;
   Vec rho(mesh.num_cells());
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      rho[c] = std::clamp(on_strip[c] ? strip_value : background, 0.01, 0.99);
   }
   return rho;
}

} // namespace simpl
