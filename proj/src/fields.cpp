#include "simpl/fields.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace simpl {

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double pairwise_sum_impl(const double *x, std::size_t n)
{
   if (n <= 16)
   {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) { s += x[i]; }
      return s;
   }
   const std::size_t half = n / 2;
   return pairwise_sum_impl(x, half) + pairwise_sum_impl(x + half, n - half);
}

void require_same_size(std::size_t a, std::size_t b, const char *what)
{
   if (a != b)
   {
      throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                  std::to_string(a) + " vs " + std::to_string(b) + ")");
   }
}

} // namespace

AdmissibleParams::AdmissibleParams(double theta_, double domain_volume_)
   : theta(theta_), domain_volume(domain_volume_)
{
   if (!(theta > 0.0 && theta < 1.0))
   {
      throw std::invalid_argument("AdmissibleParams: theta must lie in (0,1)");
   }
   if (!(domain_volume > 0.0))
   {
      throw std::invalid_argument("AdmissibleParams: domain volume must be positive");
   }
}

double sigmoid(double x)
{
   if (x >= 0.0) { return 1.0 / (1.0 + std::exp(-x)); }
   const double e = std::exp(x);
   return e / (1.0 + e);
}

Vec sigmoid(std::span<const double> x)
{
   Vec out(x.size());
   for (std::size_t i = 0; i < x.size(); ++i) { out[i] = sigmoid(x[i]); }
   return out;
}

double logit(double rho)
{
   if (!(rho > 0.0 && rho < 1.0))
   {
      throw std::domain_error("logit: density " + std::to_string(rho) +
                              " is outside the open interval (0,1)");
   }
   return std::log(rho) - std::log1p(-rho);
}

Vec logit(std::span<const double> rho)
{
   Vec out(rho.size());
   for (std::size_t i = 0; i < rho.size(); ++i) { out[i] = logit(rho[i]); }
   return out;
}

double pairwise_sum(std::span<const double> x)
{
   return pairwise_sum_impl(x.data(), x.size());
}

double weighted_inner(std::span<const double> a, std::span<const double> b,
                      std::span<const double> w)
{
   require_same_size(a.size(), b.size(), "weighted_inner");
   require_same_size(a.size(), w.size(), "weighted_inner");
   Vec terms(a.size());
   for (std::size_t i = 0; i < a.size(); ++i) { terms[i] = w[i] * a[i] * b[i]; }
   return pairwise_sum(terms);
}

double fermi_dirac_entropy(const DensityField &rho)
{
   require_same_size(rho.values.size(), rho.cell_volumes.size(), "fermi_dirac_entropy");
   Vec terms(rho.size());
   for (std::size_t i = 0; i < rho.size(); ++i)
   {
      const double r = rho.values[i];
      terms[i] = rho.cell_volumes[i] * (xlogx(r) + xlogx(1.0 - r));
   }
   return pairwise_sum(terms);
}

double bregman_divergence(const DensityField &rho, const DensityField &q)
{
   require_same_size(rho.size(), q.size(), "bregman_divergence");
   require_same_size(rho.size(), rho.cell_volumes.size(), "bregman_divergence");
   Vec terms(rho.size());
   for (std::size_t i = 0; i < rho.size(); ++i)
   {
      const double r = rho.values[i];
      const double s = q.values[i];
      if (!(s > 0.0 && s < 1.0))
      {
         throw std::domain_error("bregman_divergence: reference density touches {0,1}");
      }
      terms[i] = rho.cell_volumes[i] *
                 (xlogx(r) - r * std::log(s) + xlogx(1.0 - r) - (1.0 - r) * std::log1p(-s));
   }
   return pairwise_sum(terms);
}

double bregman_divergence_latent(std::span<const double> psi_rho,
                                 std::span<const double> psi_q,
                                 std::span<const double> cell_volumes)
{
   require_same_size(psi_rho.size(), psi_q.size(), "bregman_divergence_latent");
   require_same_size(psi_rho.size(), cell_volumes.size(), "bregman_divergence_latent");
   // Per cell, with a = psi_rho, b = psi_q, d = b - a and r = sigmoid(a):
   //   D = softplus(b) - softplus(a) - r d
   // evaluated through log1p/expm1 on the branch where expm1 is nonnegative.
   Vec terms(psi_rho.size());
   for (std::size_t i = 0; i < psi_rho.size(); ++i)
   {
      const double a = psi_rho[i];
      const double d = psi_q[i] - a;
      double d_i;
      if (d >= 0.0)
      {
         const double r = sigmoid(a);
         d_i = std::log1p(r * std::expm1(d)) - r * d;
      }
      else
      {
         const double s = sigmoid(-a);
         d_i = std::log1p(s * std::expm1(-d)) + s * d;
      }
      terms[i] = cell_volumes[i] * std::max(d_i, 0.0);
   }
   return pairwise_sum(terms);
}

LatentField to_latent(const DensityField &rho, double clamp_bound)
{
   LatentField psi{logit(rho.values), clamp_bound};
   for (double &v : psi.values) { v = std::clamp(v, -clamp_bound, clamp_bound); }
   return psi;
}

DensityField to_density(const LatentField &psi, std::span<const double> cell_volumes)
{
   require_same_size(psi.size(), cell_volumes.size(), "to_density");
   return DensityField{sigmoid(psi.values), Vec(cell_volumes.begin(), cell_volumes.end())};
}

} // namespace simpl
