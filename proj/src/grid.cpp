#include "simpl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace simpl {

namespace {

constexpr std::array<int, 4> kCornerDi = {0, 1, 1, 0};
constexpr std::array<int, 4> kCornerDj = {0, 0, 1, 1};

// Local counterclockwise index of a corner offset, or -1.
int corner_index(int di, int dj)
{
   if (di == 0 && dj == 0) { return 0; }
   if (di == 1 && dj == 0) { return 1; }
   if (di == 1 && dj == 1) { return 2; }
   if (di == 0 && dj == 1) { return 3; }
   return -1;
}

struct ShapeGradients {
   std::array<double, 4> n;
   std::array<double, 4> dx;
   std::array<double, 4> dy;
};

ShapeGradients bilinear_at(double xi, double eta, double hx, double hy)
{
   ShapeGradients s{};
   for (int a = 0; a < 4; ++a)
   {
      const double xa = kCornerDi[a] == 0 ? -1.0 : 1.0;
      const double ya = kCornerDj[a] == 0 ? -1.0 : 1.0;
      s.n[a] = 0.25 * (1.0 + xa * xi) * (1.0 + ya * eta);
      s.dx[a] = 0.25 * xa * (1.0 + ya * eta) * 2.0 / hx;
      s.dy[a] = 0.25 * ya * (1.0 + xa * xi) * 2.0 / hy;
   }
   return s;
}

const std::array<double, 2> kGauss2 = {-1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)};

void gauss_legendre(int order, std::vector<double> &pts, std::vector<double> &wts)
{
   // Newton iteration on P_n from Chebyshev initial guesses.
   pts.assign(order, 0.0);
   wts.assign(order, 0.0);
   for (int i = 0; i < order; ++i)
   {
      double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter)
      {
         double p0 = 1.0, p1 = x;
         for (int k = 2; k <= order; ++k)
         {
            const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
         }
         if (order == 1) { p1 = x; p0 = 1.0; }
         dp = order * (x * p1 - p0) / (x * x - 1.0);
         const double dx = p1 / dp;
         x -= dx;
         if (std::abs(dx) < 1e-16) { break; }
      }
      pts[i] = x;
      wts[i] = 2.0 / ((1.0 - x * x) * dp * dp);
   }
}

} // namespace

CartesianMesh::CartesianMesh(int nx, int ny, double lx, double ly)
   : nx_(nx), ny_(ny), lx_(lx), ly_(ly)
{
   if (nx <= 0 || ny <= 0) { throw std::invalid_argument("CartesianMesh: cell counts must be positive"); }
   if (!(lx > 0.0 && ly > 0.0)) { throw std::invalid_argument("CartesianMesh: extents must be positive"); }
}

std::array<int, 4> CartesianMesh::cell_nodes(int c) const
{
   const int i = c % nx_;
   const int j = c / nx_;
   return {node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)};
}

std::array<double, 2> CartesianMesh::node_coord(int n) const
{
   const int i = n % (nx_ + 1);
   const int j = n / (nx_ + 1);
   return {i * hx(), j * hy()};
}

std::array<double, 2> CartesianMesh::cell_center(int c) const
{
   const int i = c % nx_;
   const int j = c / nx_;
   return {(i + 0.5) * hx(), (j + 0.5) * hy()};
}

FemSpaces::FemSpaces(const CartesianMesh &mesh)
   : density_dofs(mesh.num_cells()),
     filtered_dofs(mesh.num_nodes()),
     displacement_dofs(mesh.num_dofs()),
     dirichlet_mask(mesh.num_dofs(), 0)
{
}

ElementMatrix8 assemble_unit_stiffness(double nu, double hx, double hy)
{
   if (!(nu >= 0.0 && nu < 0.5)) { throw std::invalid_argument("assemble_unit_stiffness: nu must lie in [0, 0.5)"); }
   if (!(hx > 0.0 && hy > 0.0)) { throw std::invalid_argument("assemble_unit_stiffness: cell sizes must be positive"); }
   const double c = 1.0 / (1.0 - nu * nu);
   const double D[3][3] = {{c, c * nu, 0.0}, {c * nu, c, 0.0}, {0.0, 0.0, c * 0.5 * (1.0 - nu)}};
   const double det = 0.25 * hx * hy;
   ElementMatrix8 K{};
   for (double xi : kGauss2)
   {
      for (double eta : kGauss2)
      {
         const auto s = bilinear_at(xi, eta, hx, hy);
         double B[3][8] = {};
         for (int a = 0; a < 4; ++a)
         {
            B[0][2 * a] = s.dx[a];
            B[1][2 * a + 1] = s.dy[a];
            B[2][2 * a] = s.dy[a];
            B[2][2 * a + 1] = s.dx[a];
         }
         for (int p = 0; p < 8; ++p)
         {
            double DB[3];
            for (int r = 0; r < 3; ++r)
            {
               DB[r] = D[r][0] * B[0][p] + D[r][1] * B[1][p] + D[r][2] * B[2][p];
            }
            for (int q = 0; q < 8; ++q)
            {
               K[p * 8 + q] += det * (B[0][q] * DB[0] + B[1][q] * DB[1] + B[2][q] * DB[2]);
            }
         }
      }
   }
   // exact symmetry
   for (int p = 0; p < 8; ++p)
   {
      for (int q = p + 1; q < 8; ++q)
      {
         const double v = 0.5 * (K[p * 8 + q] + K[q * 8 + p]);
         K[p * 8 + q] = K[q * 8 + p] = v;
      }
   }
   return K;
}

ElementMatrix4 element_laplacian(double hx, double hy)
{
   ElementMatrix4 K{};
   const double det = 0.25 * hx * hy;
   for (double xi : kGauss2)
   {
      for (double eta : kGauss2)
      {
         const auto s = bilinear_at(xi, eta, hx, hy);
         for (int a = 0; a < 4; ++a)
         {
            for (int b = 0; b < 4; ++b) { K[a * 4 + b] += det * (s.dx[a] * s.dx[b] + s.dy[a] * s.dy[b]); }
         }
      }
   }
   return K;
}

ElementMatrix4 element_mass(double hx, double hy)
{
   ElementMatrix4 K{};
   const double det = 0.25 * hx * hy;
   for (double xi : kGauss2)
   {
      for (double eta : kGauss2)
      {
         const auto s = bilinear_at(xi, eta, hx, hy);
         for (int a = 0; a < 4; ++a)
         {
            for (int b = 0; b < 4; ++b) { K[a * 4 + b] += det * s.n[a] * s.n[b]; }
         }
      }
   }
   return K;
}

double filter_epsilon(double r_min) { return r_min / (2.0 * std::sqrt(3.0)); }

FilterOperators assemble_filter_operators(const CartesianMesh &mesh, double r_min)
{
   if (!(r_min > 0.0)) { throw std::invalid_argument("assemble_filter_operators: r_min must be positive"); }
   const auto ke = element_laplacian(mesh.hx(), mesh.hy());
   const auto me = element_mass(mesh.hx(), mesh.hy());
   const int nn = mesh.num_nodes();
   const int nc = mesh.num_cells();
   TripletBuilder A(nn, nn), Mt(nn, nn), N(nn, nc);
   const double quarter = 0.25 * mesh.cell_area();
   for (int c = 0; c < nc; ++c)
   {
      const auto nodes = mesh.cell_nodes(c);
      for (int a = 0; a < 4; ++a)
      {
         for (int b = 0; b < 4; ++b)
         {
            A.add(nodes[a], nodes[b], ke[a * 4 + b]);
            Mt.add(nodes[a], nodes[b], me[a * 4 + b]);
         }
         N.add(nodes[a], c, quarter);
      }
   }
   FilterOperators ops;
   ops.A = A.build();
   ops.Mtilde = Mt.build();
   ops.N = N.build();
   ops.M.assign(nc, mesh.cell_area());
   ops.epsilon = filter_epsilon(r_min);
   ops.system = add_scaled(ops.epsilon * ops.epsilon, ops.A, 1.0, ops.Mtilde);
   return ops;
}

ElasticModel::ElasticModel(CartesianMesh mesh, Material material, std::vector<char> dirichlet_mask)
   : mesh_(mesh),
     material_(material),
     k0_(assemble_unit_stiffness(material.nu, mesh.hx(), mesh.hy())),
     dirichlet_(std::move(dirichlet_mask)),
     passive_(mesh.num_cells(), 0)
{
   if (static_cast<int>(dirichlet_.size()) != mesh_.num_dofs())
   {
      throw std::invalid_argument("ElasticModel: Dirichlet mask length must equal the DOF count");
   }
   if (!(material_.e_min > 0.0 && material_.e_max > material_.e_min && material_.penal >= 1.0))
   {
      throw std::invalid_argument("ElasticModel: need 0 < E_min < E_max and penal >= 1");
   }
   // Structured 3x3 node stencil; neighbors in increasing index order.
   const int nxn = mesh_.nx() + 1;
   const int nyn = mesh_.ny() + 1;
   const int ndof = mesh_.num_dofs();
   pattern_.rows = pattern_.cols = ndof;
   pattern_.row_ptr.assign(ndof + 1, 0);
   for (int j = 0; j < nyn; ++j)
   {
      for (int i = 0; i < nxn; ++i)
      {
         const int cnt = (std::min(i + 1, nxn - 1) - std::max(i - 1, 0) + 1) *
                         (std::min(j + 1, nyn - 1) - std::max(j - 1, 0) + 1);
         const int n = mesh_.node(i, j);
         for (int comp = 0; comp < 2; ++comp)
         {
            for (int jj = std::max(j - 1, 0); jj <= std::min(j + 1, nyn - 1); ++jj)
            {
               for (int ii = std::max(i - 1, 0); ii <= std::min(i + 1, nxn - 1); ++ii)
               {
                  const int m = mesh_.node(ii, jj);
                  pattern_.col_idx.push_back(2 * m);
                  pattern_.col_idx.push_back(2 * m + 1);
               }
            }
            pattern_.row_ptr[2 * n + comp + 1] = 2 * cnt;
         }
      }
   }
   for (int r = 0; r < ndof; ++r) { pattern_.row_ptr[r + 1] += pattern_.row_ptr[r]; }
   pattern_.values.assign(pattern_.col_idx.size(), 0.0);
   diag_pos_.resize(ndof);
   for (int r = 0; r < ndof; ++r)
   {
      const auto first = pattern_.col_idx.begin() + pattern_.row_ptr[r];
      const auto last = pattern_.col_idx.begin() + pattern_.row_ptr[r + 1];
      diag_pos_[r] = std::lower_bound(first, last, r) - pattern_.col_idx.begin();
   }
}

void ElasticModel::add_spring(int dof, double stiffness)
{
   if (dof < 0 || dof >= mesh_.num_dofs()) { throw std::out_of_range("add_spring: DOF out of range"); }
   springs_.emplace_back(dof, stiffness);
}

void ElasticModel::set_passive_cells(std::vector<char> passive)
{
   if (static_cast<int>(passive.size()) != mesh_.num_cells())
   {
      throw std::invalid_argument("set_passive_cells: length must equal the cell count");
   }
   passive_ = std::move(passive);
}

std::array<int, 8> ElasticModel::cell_dofs(int c) const
{
   const auto nodes = mesh_.cell_nodes(c);
   std::array<int, 8> d{};
   for (int a = 0; a < 4; ++a)
   {
      d[2 * a] = 2 * nodes[a];
      d[2 * a + 1] = 2 * nodes[a] + 1;
   }
   return d;
}

CsrMatrix ElasticModel::assemble_stiffness_raw(std::span<const double> E) const
{
   if (static_cast<int>(E.size()) != mesh_.num_cells())
   {
      throw std::invalid_argument("assemble_stiffness: modulus vector length mismatch");
   }
   CsrMatrix K = pattern_;
   const int nx = mesh_.nx();
   const int ny = mesh_.ny();
   const int nxn = nx + 1;
   // Row-wise gather: entry (n,comp ; m,comp') sums E_c K0 over cells sharing n and m.
   for (int r = 0; r < K.rows; ++r)
   {
      const int n = r / 2;
      const int cn = r % 2;
      const int i = n % nxn;
      const int j = n / nxn;
      for (auto k = K.row_ptr[r]; k < K.row_ptr[r + 1]; ++k)
      {
         const int col = K.col_idx[k];
         const int m = col / 2;
         const int cm = col % 2;
         const int mi = m % nxn;
         const int mj = m / nxn;
         double v = 0.0;
         for (int cj = std::max(j - 1, 0); cj <= std::min(j, ny - 1); ++cj)
         {
            for (int ci = std::max(i - 1, 0); ci <= std::min(i, nx - 1); ++ci)
            {
               const int la = corner_index(i - ci, j - cj);
               const int lb = corner_index(mi - ci, mj - cj);
               if (la < 0 || lb < 0) { continue; }
               v += E[mesh_.cell(ci, cj)] * k0_[(2 * la + cn) * 8 + 2 * lb + cm];
            }
         }
         K.values[k] = v;
      }
   }
   return K;
}

CsrMatrix ElasticModel::assemble_stiffness(std::span<const double> E) const
{
   CsrMatrix K = assemble_stiffness_raw(E);
   for (int r = 0; r < K.rows; ++r)
   {
      for (auto k = K.row_ptr[r]; k < K.row_ptr[r + 1]; ++k)
      {
         const int col = K.col_idx[k];
         if (dirichlet_[r] || dirichlet_[col]) { K.values[k] = (r == col) ? 1.0 : 0.0; }
      }
   }
   for (const auto &[dof, k] : springs_)
   {
      if (!dirichlet_[dof]) { K.values[diag_pos_[dof]] += k; }
   }
   return K;
}

void ElasticModel::apply_dirichlet(std::span<double> v) const
{
   for (std::size_t d = 0; d < v.size(); ++d)
   {
      if (dirichlet_[d]) { v[d] = 0.0; }
   }
}

CsrMatrix assemble_stiffness(const ElasticModel &model, std::span<const double> E)
{
   return model.assemble_stiffness(E);
}

Vec assemble_body_force(const CartesianMesh &mesh, const Region &region, double fx, double fy,
                        int order)
{
   std::vector<double> pts, wts;
   gauss_legendre(order, pts, wts);
   Vec f(mesh.num_dofs(), 0.0);
   const double det = 0.25 * mesh.cell_area();
   bool hit = false;
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      const auto nodes = mesh.cell_nodes(c);
      const auto x0 = mesh.node_coord(nodes[0]);
      for (int p = 0; p < order; ++p)
      {
         for (int q = 0; q < order; ++q)
         {
            const double x = x0[0] + 0.5 * (pts[p] + 1.0) * mesh.hx();
            const double y = x0[1] + 0.5 * (pts[q] + 1.0) * mesh.hy();
            if (!region(x, y)) { continue; }
            hit = true;
            const auto s = bilinear_at(pts[p], pts[q], mesh.hx(), mesh.hy());
            const double w = wts[p] * wts[q] * det;
            for (int a = 0; a < 4; ++a)
            {
               f[2 * nodes[a]] += w * s.n[a] * fx;
               f[2 * nodes[a] + 1] += w * s.n[a] * fy;
            }
         }
      }
   }
   if (!hit) { throw std::invalid_argument("assemble_body_force: load region does not intersect the mesh"); }
   return f;
}

Vec assemble_boundary_segment(const CartesianMesh &mesh, Side side, double s0, double s1,
                              double dx, double dy)
{
   const bool vertical = side == Side::left || side == Side::right;
   const int edges = vertical ? mesh.ny() : mesh.nx();
   const double h = vertical ? mesh.hy() : mesh.hx();
   Vec f(mesh.num_dofs(), 0.0);
   bool hit = false;
   for (int e = 0; e < edges; ++e)
   {
      const double lo = e * h;
      const double hi = (e + 1) * h;
      const double a = std::max(lo, s0);
      const double b = std::min(hi, s1);
      if (!(b > a)) { continue; }
      hit = true;
      const double w_lo = ((hi - a) * (hi - a) - (hi - b) * (hi - b)) / (2.0 * h);
      const double w_hi = ((b - lo) * (b - lo) - (a - lo) * (a - lo)) / (2.0 * h);
      int n_lo = 0, n_hi = 0;
      switch (side)
      {
         case Side::left: n_lo = mesh.node(0, e); n_hi = mesh.node(0, e + 1); break;
         case Side::right: n_lo = mesh.node(mesh.nx(), e); n_hi = mesh.node(mesh.nx(), e + 1); break;
         case Side::bottom: n_lo = mesh.node(e, 0); n_hi = mesh.node(e + 1, 0); break;
         case Side::top: n_lo = mesh.node(e, mesh.ny()); n_hi = mesh.node(e + 1, mesh.ny()); break;
      }
      f[2 * n_lo] += w_lo * dx;
      f[2 * n_lo + 1] += w_lo * dy;
      f[2 * n_hi] += w_hi * dx;
      f[2 * n_hi + 1] += w_hi * dy;
   }
   if (!hit) { throw std::invalid_argument("assemble_boundary_segment: segment misses the boundary"); }
   return f;
}

Vec cell_average(const CartesianMesh &mesh, std::span<const double> nodal)
{
   Vec out(mesh.num_cells());
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      const auto nodes = mesh.cell_nodes(c);
      out[c] = 0.25 * (nodal[nodes[0]] + nodal[nodes[1]] + nodal[nodes[2]] + nodal[nodes[3]]);
   }
   return out;
}

Vec cell_average_transpose(const CartesianMesh &mesh, std::span<const double> cell)
{
   Vec out(mesh.num_nodes(), 0.0);
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      for (int n : mesh.cell_nodes(c)) { out[n] += 0.25 * cell[c]; }
   }
   return out;
}

Vec assemble_self_weight(const CartesianMesh &mesh, std::span<const double> rho_tilde,
                         double magnitude)
{
   if (static_cast<int>(rho_tilde.size()) != mesh.num_nodes())
   {
      throw std::invalid_argument("assemble_self_weight: expected a nodal field");
   }
   const Vec rc = cell_average(mesh, rho_tilde);
   Vec g(mesh.num_dofs(), 0.0);
   const double share = 0.25 * magnitude * mesh.cell_area();
   for (int c = 0; c < mesh.num_cells(); ++c)
   {
      for (int n : mesh.cell_nodes(c)) { g[2 * n + 1] -= share * rc[c]; }
   }
   return g;
}

std::vector<CsrMatrix> displacement_prolongations(const CartesianMesh &mesh,
                                                  const std::vector<char> &dirichlet_mask,
                                                  int max_coarse_dofs)
{
   std::vector<CsrMatrix> out;
   int nx = mesh.nx();
   int ny = mesh.ny();
   while (nx % 2 == 0 && ny % 2 == 0 && 2 * (nx + 1) * (ny + 1) > max_coarse_dofs)
   {
      const int cx = nx / 2;
      const int cy = ny / 2;
      const int fine_dofs = 2 * (nx + 1) * (ny + 1);
      TripletBuilder tb(fine_dofs, 2 * (cx + 1) * (cy + 1));
      for (int j = 0; j <= ny; ++j)
      {
         for (int i = 0; i <= nx; ++i)
         {
            const int fn = j * (nx + 1) + i;
            auto stencil = [](int k) {
               std::vector<std::pair<int, double>> w;
               if (k % 2 == 0) { w.push_back({k / 2, 1.0}); }
               else { w = {{k / 2, 0.5}, {k / 2 + 1, 0.5}}; }
               return w;
            };
            const auto sx = stencil(i);
            const auto sy = stencil(j);
            for (int c = 0; c < 2; ++c)
            {
               const int row = 2 * fn + c;
               if (out.empty() && dirichlet_mask[row]) { continue; }
               for (const auto &[jj, wy] : sy)
               {
                  for (const auto &[ii, wx] : sx) { tb.add(row, 2 * (jj * (cx + 1) + ii) + c, wx * wy); }
               }
            }
         }
      }
      CsrMatrix P = tb.build();
      out.push_back(std::move(P));
      nx = cx;
      ny = cy;
   }
   return out;
}

} // namespace simpl
