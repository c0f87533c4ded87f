#include "simpl/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace simpl {

namespace {

std::string real(double v)
{
   char buf[40];
   std::snprintf(buf, sizeof buf, "%.17g", v);
   return buf;
}

void check_size(std::size_t got, std::size_t want, const char *what)
{
   if (got != want)
   {
      throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(want) + " values, got " +
                                  std::to_string(got));
   }
}

} // namespace

void write_text_file(const std::filesystem::path &path, const std::string &text)
{
   std::ofstream out(path, std::ios::binary);
   if (!out) { throw std::runtime_error("cannot open " + path.string() + " for writing"); }
   out << text;
   out.close();
   if (!out) { throw std::runtime_error("write failed: " + path.string()); }
}

std::string format_convergence_csv(const OptTrace &trace)
{
   std::string s = "iter,F,alpha,mu,kkt,stationarity,backtracks,evals\n";
   for (const auto &r : trace.rows)
   {
      s += std::to_string(r.iter) + ',' + real(r.F) + ',' + real(r.alpha) + ',' + real(r.mu) + ',' + real(r.kkt) +
           ',' + real(r.stationarity) + ',' + std::to_string(r.backtracks) + ',' + std::to_string(r.evals) + '\n';
   }
   return s;
}

void write_convergence_csv(const OptTrace &trace, const std::filesystem::path &path)
{
   write_text_file(path, format_convergence_csv(trace));
}

std::string format_pgm(const CartesianMesh &mesh, std::span<const double> values, PgmFlavor flavor)
{
   Vec cells;
   if (flavor == PgmFlavor::filtered)
   {
      check_size(values.size(), static_cast<std::size_t>(mesh.num_nodes()), "write_pgm");
      cells = cell_average(mesh, values);
   }
   else
   {
      check_size(values.size(), static_cast<std::size_t>(mesh.num_cells()), "write_pgm");
      cells.assign(values.begin(), values.end());
   }
   std::ostringstream out;
   out << "P2\n" << mesh.nx() << ' ' << mesh.ny() << "\n255\n";
   for (int j = mesh.ny() - 1; j >= 0; --j)
   {
      for (int i = 0; i < mesh.nx(); ++i)
      {
         const double v = std::clamp(cells[mesh.cell(i, j)], 0.0, 1.0);
         out << (i ? " " : "") << 255 - static_cast<int>(std::lround(255.0 * v));
      }
      out << '\n';
   }
   return out.str();
}

void write_pgm(const CartesianMesh &mesh, std::span<const double> values, PgmFlavor flavor,
               const std::filesystem::path &path)
{
   write_text_file(path, format_pgm(mesh, values, flavor));
}

std::string format_vtk(const CartesianMesh &mesh, const std::vector<VtkField> &cell_fields,
                       const std::vector<VtkField> &point_fields)
{
   std::ostringstream out;
   out << "# vtk DataFile Version 3.0\nsimpl fields\nASCII\nDATASET STRUCTURED_POINTS\n";
   out << "DIMENSIONS " << mesh.nx() + 1 << ' ' << mesh.ny() + 1 << " 1\n";
   out << "ORIGIN 0 0 0\n";
   out << "SPACING " << real(mesh.hx()) << ' ' << real(mesh.hy()) << " 1\n";

   auto section = [&out](const std::vector<VtkField> &fields, std::size_t count) {
      for (const auto &f : fields)
      {
         if (f.components != 1 && f.components != 2)
         {
            throw std::invalid_argument("write_vtk: field '" + f.name + "' must have 1 or 2 components");
         }
         check_size(f.values.size(), count * f.components, "write_vtk");
         if (f.components == 1)
         {
            out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : f.values) { out << real(v) << '\n'; }
         }
         else
         {
            out << "VECTORS " << f.name << " double\n";
            for (std::size_t k = 0; k < count; ++k)
            {
               out << real(f.values[2 * k]) << ' ' << real(f.values[2 * k + 1]) << " 0\n";
            }
         }
      }
   };
   if (!cell_fields.empty())
   {
      out << "CELL_DATA " << mesh.num_cells() << '\n';
      section(cell_fields, mesh.num_cells());
   }
   if (!point_fields.empty())
   {
      out << "POINT_DATA " << mesh.num_nodes() << '\n';
      section(point_fields, mesh.num_nodes());
   }
   return out.str();
}

void write_vtk(const CartesianMesh &mesh, const std::vector<VtkField> &cell_fields,
               const std::vector<VtkField> &point_fields, const std::filesystem::path &path)
{
   write_text_file(path, format_vtk(mesh, cell_fields, point_fields));
}

CartesianMesh mirrored_mesh(const CartesianMesh &half)
{
   return CartesianMesh(half.nx(), 2 * half.ny(), half.lx(), 2.0 * half.ly());
}

Vec mirror_cells(const CartesianMesh &half, std::span<const double> cells)
{
   check_size(cells.size(), static_cast<std::size_t>(half.num_cells()), "mirror_cells");
   const int nx = half.nx(), ny = half.ny();
   Vec full(static_cast<std::size_t>(2 * nx * ny));
   for (int j = 0; j < 2 * ny; ++j)
   {
      const int src = j < ny ? j : 2 * ny - 1 - j;
      for (int i = 0; i < nx; ++i) { full[j * nx + i] = cells[half.cell(i, src)]; }
   }
   return full;
}

Vec mirror_nodes(const CartesianMesh &half, std::span<const double> nodal, int components, bool flip_y)
{
   check_size(nodal.size(), static_cast<std::size_t>(half.num_nodes() * components), "mirror_nodes");
   const int nx = half.nx(), ny = half.ny();
   Vec full(static_cast<std::size_t>((nx + 1) * (2 * ny + 1) * components));
   for (int j = 0; j <= 2 * ny; ++j)
   {
      const bool reflected = j > ny;
      const int src = reflected ? 2 * ny - j : j;
      for (int i = 0; i <= nx; ++i)
      {
         for (int c = 0; c < components; ++c)
         {
            double v = nodal[half.node(i, src) * components + c];
            if (reflected && flip_y && c == 1) { v = -v; }
            full[(j * (nx + 1) + i) * components + c] = v;
         }
      }
   }
   return full;
}

} // namespace simpl
