#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace simpl {

/// Everything a run needs. Unset optionals fall back to the preset defaults.
struct RunConfig {
   std::string problem = "mbb";
   int nx = 0;  // 0 selects the preset resolution
   int ny = 0;
   std::optional<double> theta;
   double rmin = 0.02;
   std::string optimizer = "simpl";  // simpl | pgd | oc
   std::optional<std::string> line_search;  // armijo | bregman
   std::optional<std::string> kkt_variant;  // a | b
   std::optional<std::string> stop;  // kkt | kkt-relative | s
   std::optional<double> tol;
   int max_iters = 1000;
   std::string out = "out";
   std::string initial_design = "uniform";
   std::uint64_t seed = 0;
   bool write_pgm = true;
   bool write_vtk = true;
};

/// Serialized form, keys as in the fields above.
std::string config_to_json(const RunConfig &cfg);
/// Applies the keys present in a JSON object on top of cfg. Unknown keys throw.
void apply_json_config(RunConfig &cfg, const std::string &json_text);

/// Throws std::invalid_argument on bad values or combinations.
void validate(const RunConfig &cfg);

/// Fills the preset defaults into the unset optionals.
RunConfig resolve_defaults(const RunConfig &cfg);

/// Solves and writes the output files. Returns 0 when converged, 2 on the
/// iteration cap, 1 when the line search fails.
int run(const RunConfig &cfg, std::ostream &log);

/// Full command line entry point (argv[0] is the program name). Returns the exit code.
int cli_main(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace simpl
