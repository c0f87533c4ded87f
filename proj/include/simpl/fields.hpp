#pragma once

#include <span>
#include <vector>

namespace simpl {

using Vec = std::vector<double>;

/// Piecewise-constant design density with the diagonal of the cell mass matrix.
struct DensityField {
   Vec values;
   Vec cell_volumes;

   std::size_t size() const { return values.size(); }
};

/// Largest latent magnitude kept by default. sigmoid(36) = 1 - 2.3e-16 is still
/// below 1 in double precision; from about 36.8 on it rounds to exactly 1.
inline constexpr double kDefaultClampBound = 36.0;

/// Logit-scale representation of a density; rho = sigmoid(values).
struct LatentField {
   Vec values;
   double clamp_bound = kDefaultClampBound;

   std::size_t size() const { return values.size(); }
};

/// Volume fraction target and the measure of the design domain.
struct AdmissibleParams {
   double theta = 0.3;
   double domain_volume = 1.0;

   AdmissibleParams() = default;
   AdmissibleParams(double theta, double domain_volume);

   double volume_limit() const { return theta * domain_volume; }
};

// Logistic sigmoid 1/(1+exp(-x)), evaluated on the branch that cannot overflow.
double sigmoid(double x);
Vec sigmoid(std::span<const double> x);

// Inverse of sigmoid. Throws std::domain_error outside the open interval (0,1).
double logit(double rho);
Vec logit(std::span<const double> rho);

// sum_i w_i a_i b_i, with pairwise summation for reproducible rounding.
double weighted_inner(std::span<const double> a, std::span<const double> b,
                      std::span<const double> w);

// Pairwise sum of a span.
double pairwise_sum(std::span<const double> x);

/// Negative Fermi-Dirac entropy sum_i M_ii [rho ln rho + (1-rho) ln(1-rho)]
/// using 0 ln 0 = 0 at binary entries.
double fermi_dirac_entropy(const DensityField &rho);

/// Bregman divergence of the Fermi-Dirac entropy, written as a cell-weighted
/// sum of binary Kullback-Leibler terms. q must lie strictly inside (0,1).
double bregman_divergence(const DensityField &rho, const DensityField &q);

/// Same divergence evaluated from the latent values of both arguments. Stays
/// accurate for saturated cells where 1 - sigmoid(psi) rounds to zero.
double bregman_divergence_latent(std::span<const double> psi_rho,
                                 std::span<const double> psi_q,
                                 std::span<const double> cell_volumes);

LatentField to_latent(const DensityField &rho, double clamp_bound = kDefaultClampBound);
DensityField to_density(const LatentField &psi, std::span<const double> cell_volumes);

} // namespace simpl
