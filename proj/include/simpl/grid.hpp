#pragma once

#include "simpl/fields.hpp"
#include "simpl/linsolve.hpp"

#include <array>
#include <functional>
#include <utility>
#include <vector>

namespace simpl {

/// Uniform nx-by-ny grid of rectangular cells on [0,lx]x[0,ly].
///
/// Nodes are numbered row by row from the bottom-left corner,
/// node(i,j) = j*(nx+1) + i, and cells likewise, cell(i,j) = j*nx + i.
/// The four nodes of a cell are listed counterclockwise starting at its
/// bottom-left corner. Displacement DOFs are (2n, 2n+1) for node n.
class CartesianMesh {
public:
   CartesianMesh(int nx, int ny, double lx, double ly);

   int nx() const { return nx_; }
   int ny() const { return ny_; }
   double lx() const { return lx_; }
   double ly() const { return ly_; }
   double hx() const { return lx_ / nx_; }
   double hy() const { return ly_ / ny_; }
   double cell_area() const { return hx() * hy(); }
   double area() const { return lx_ * ly_; }

   int num_cells() const { return nx_ * ny_; }
   int num_nodes() const { return (nx_ + 1) * (ny_ + 1); }
   int num_dofs() const { return 2 * num_nodes(); }

   int node(int i, int j) const { return j * (nx_ + 1) + i; }
   int cell(int i, int j) const { return j * nx_ + i; }
   std::array<int, 4> cell_nodes(int c) const;
   std::array<double, 2> node_coord(int n) const;
   std::array<double, 2> cell_center(int c) const;

private:
   int nx_, ny_;
   double lx_, ly_;
};

/// Degree-of-freedom bookkeeping for the Q0 density, Q1 filtered density and
/// vector Q1 displacement spaces on a mesh.
struct FemSpaces {
   int density_dofs = 0;
   int filtered_dofs = 0;
   int displacement_dofs = 0;
   std::vector<char> dirichlet_mask;

   explicit FemSpaces(const CartesianMesh &mesh);
};

using ElementMatrix8 = std::array<double, 64>;
using ElementMatrix4 = std::array<double, 16>;

/// Bilinear plane-stress element stiffness for unit Young's modulus and unit
/// thickness, integrated with 2x2 Gauss points. Row-major, DOF order
/// (ux0, uy0, ux1, uy1, ...) over the counterclockwise cell nodes.
ElementMatrix8 assemble_unit_stiffness(double nu, double hx, double hy);

/// Q1 element Laplacian and consistent mass on an hx-by-hy cell.
ElementMatrix4 element_laplacian(double hx, double hy);
ElementMatrix4 element_mass(double hx, double hy);

struct FilterOperators {
   CsrMatrix A;       // nodal diffusion stiffness
   CsrMatrix Mtilde;  // nodal mass
   CsrMatrix N;       // nodes x cells, N[n][c] = integral of phi_n over cell c
   Vec M;             // cell volumes
   double epsilon = 0.0;
   CsrMatrix system;  // epsilon^2 A + Mtilde
};

/// Filter length parameter for a minimum length scale, r_min / (2 sqrt 3).
double filter_epsilon(double r_min);

FilterOperators assemble_filter_operators(const CartesianMesh &mesh, double r_min);

struct Material {
   double nu = 0.3;
   double e_min = 1e-6;
   double e_max = 1.0;
   double penal = 3.0;
};

/// Mesh, supports, springs and SIMP law of a linear elastic model. The sparsity
/// pattern of the global stiffness is built once and reused by every assembly.
class ElasticModel {
public:
   ElasticModel(CartesianMesh mesh, Material material, std::vector<char> dirichlet_mask);

   const CartesianMesh &mesh() const { return mesh_; }
   const Material &material() const { return material_; }
   const ElementMatrix8 &unit_stiffness() const { return k0_; }
   const std::vector<char> &dirichlet_mask() const { return dirichlet_; }
   const std::vector<std::pair<int, double>> &springs() const { return springs_; }
   const std::vector<char> &passive_cells() const { return passive_; }

   void add_spring(int dof, double stiffness);
   void set_passive_cells(std::vector<char> passive);

   /// Global stiffness for per-cell moduli E: element scatter of E_c K0,
   /// symmetric elimination of Dirichlet rows/columns with unit diagonal,
   /// then spring stiffnesses on the diagonal of their DOFs.
   CsrMatrix assemble_stiffness(std::span<const double> E) const;

   /// Same as assemble_stiffness but without boundary conditions or springs.
   CsrMatrix assemble_stiffness_raw(std::span<const double> E) const;

   /// Zero the Dirichlet entries of a displacement-space vector in place.
   void apply_dirichlet(std::span<double> v) const;

   std::array<int, 8> cell_dofs(int c) const;

private:
   CartesianMesh mesh_;
   Material material_;
   ElementMatrix8 k0_;
   std::vector<char> dirichlet_;
   std::vector<std::pair<int, double>> springs_;
   std::vector<char> passive_;
   CsrMatrix pattern_;
   std::vector<std::int64_t> scatter_;  // cell*64 + a*8 + b -> position in pattern_.values
   std::vector<std::int64_t> diag_pos_;
};

CsrMatrix assemble_stiffness(const ElasticModel &model, std::span<const double> E);

using Region = std::function<bool(double x, double y)>;

/// Consistent nodal load of a constant body force (fx, fy) restricted to the
/// region, integrated with an order-by-order tensor Gauss rule per cell.
/// Throws std::invalid_argument if no quadrature point falls in the region.
Vec assemble_body_force(const CartesianMesh &mesh, const Region &region,
                        double fx, double fy, int order = 4);

enum class Side { left, right, bottom, top };

/// Consistent nodal load of a unit traction in direction (dx, dy) on the
/// boundary segment of the given side with tangential coordinate in [s0, s1].
/// Partial edges are integrated exactly.
Vec assemble_boundary_segment(const CartesianMesh &mesh, Side side, double s0, double s1,
                              double dx, double dy);

/// Downward self-weight: cell c carries magnitude * rho_c * area, rho_c being
/// the mean of its nodal filtered densities, split equally over its nodes.
Vec assemble_self_weight(const CartesianMesh &mesh, std::span<const double> rho_tilde,
                         double magnitude);

/// Bilinear prolongations of vector Q1 displacement fields for a hierarchy of
/// meshes obtained by halving the cell counts while both stay even and the
/// coarse level has more than max_coarse_dofs DOFs. Entry l maps level l+1 to
/// level l. Rows of Dirichlet DOFs on the finest level are zero.
std::vector<CsrMatrix> displacement_prolongations(const CartesianMesh &mesh,
                                                  const std::vector<char> &dirichlet_mask,
                                                  int max_coarse_dofs = 600);

/// Element value of a nodal Q1 field, the mean of the four nodal values.
Vec cell_average(const CartesianMesh &mesh, std::span<const double> nodal);

/// Adjoint of cell_average: nodal[n] += cell[c] / 4 for every cell c touching n.
Vec cell_average_transpose(const CartesianMesh &mesh, std::span<const double> cell);

} // namespace simpl
