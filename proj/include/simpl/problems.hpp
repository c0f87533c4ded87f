#pragma once

#include "simpl/physics.hpp"
#include "simpl/simpl.hpp"

#include <optional>
#include <string>

namespace simpl {

struct PresetOptions {
   int nx = 0;  // 0 selects the preset's default resolution
   int ny = 0;
   std::optional<double> theta;
   double rmin = 0.02;
   Material material;
   SolverSettings solver;
   /// inverter only: uniform | center | bottom
   std::string initial_design = "uniform";
};

struct ProblemSetup {
   std::string name;
   ReducedObjective objective;
   AdmissibleParams adm;
   std::optional<Vec> rho0;
   LineSearch line_search = LineSearch::armijo;
   KktVariant kkt_variant = KktVariant::a;
   StopMode stop = StopMode::kkt;
   double tol = 1e-5;
   /// The mesh covers the lower half of a domain symmetric about its top edge.
   bool mirrored = false;
};

/// Resolution, volume bound and optimizer settings each preset starts from.
struct PresetDefaults {
   int nx = 0;
   int ny = 0;
   double theta = 0.3;
   LineSearch line_search = LineSearch::armijo;
   KktVariant kkt_variant = KktVariant::a;
   StopMode stop = StopMode::kkt;
   double tol = 1e-5;
};

/// Throws std::invalid_argument for an unknown name.
PresetDefaults preset_defaults(const std::string &name);

/// 3x1 beam, rollers on the left edge, vertical roller at the bottom-right
/// corner, unit downward body force on the disc of radius 0.05 around (0,1).
/// Default 768x256, theta 0.3.
ProblemSetup make_mbb(const PresetOptions &opts = {});

/// 2x1 self-weighted bridge, rollers on the left edge, pin at the bottom-right
/// corner, solid passive band y >= 1 - 2^-5 carrying a downward load density
/// of 40, gravity 9.81. Default 1024x512, theta 0.7.
ProblemSetup make_bridge(const PresetOptions &opts = {});

/// Force inverter on the unit square, meshed on its lower half with a symmetry
/// condition on y = 1/2. nx, ny count cells of the full square (ny even).
/// Ports of length 1/64 at mid-height of the left and right edges, k_in = 1,
/// k_out = 0.0005, pin at the bottom-left corner. Default 512x512, theta 0.3.
ProblemSetup make_inverter(const PresetOptions &opts = {});

/// Dispatch on "mbb", "bridge" or "inverter".
ProblemSetup make_preset(const std::string &name, const PresetOptions &opts = {});

/// Density 0.9 on cells whose centers lie within one cell width of the
/// polyline, a constant background elsewhere chosen for volume theta |Omega|,
/// clipped to [0.01, 0.99].
Vec strip_design(const CartesianMesh &mesh, const std::vector<std::array<double, 2>> &polyline,
                 double theta, double strip_value = 0.9);

} // namespace simpl
