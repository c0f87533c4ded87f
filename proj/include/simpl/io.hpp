#pragma once

#include "simpl/grid.hpp"
#include "simpl/simpl.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace simpl {

/// Header plus one row per trace entry, reals with 17 significant digits.
std::string format_convergence_csv(const OptTrace &trace);
void write_convergence_csv(const OptTrace &trace, const std::filesystem::path &path);

enum class PgmFlavor { design, filtered };

/// P2 image of a cell field (design) or of a nodal field averaged onto cells
/// (filtered). Solid renders black, row 0 is the top of the domain.
std::string format_pgm(const CartesianMesh &mesh, std::span<const double> values, PgmFlavor flavor);
void write_pgm(const CartesianMesh &mesh, std::span<const double> values, PgmFlavor flavor,
               const std::filesystem::path &path);

struct VtkField {
   std::string name;
   std::vector<double> values;
   int components = 1;  // 1 or 2; two-component fields are written as 3D vectors
};

std::string format_vtk(const CartesianMesh &mesh, const std::vector<VtkField> &cell_fields,
                       const std::vector<VtkField> &point_fields);
void write_vtk(const CartesianMesh &mesh, const std::vector<VtkField> &cell_fields,
               const std::vector<VtkField> &point_fields, const std::filesystem::path &path);

/// Reflection of a half mesh about its top edge.
CartesianMesh mirrored_mesh(const CartesianMesh &half);
Vec mirror_cells(const CartesianMesh &half, std::span<const double> cells);
/// With flip_y set, the second of two components changes sign in the reflected half.
Vec mirror_nodes(const CartesianMesh &half, std::span<const double> nodal, int components = 1,
                 bool flip_y = false);

void write_text_file(const std::filesystem::path &path, const std::string &text);

} // namespace simpl
