#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simpl {

/// Compressed-row sparse matrix. Column indices are sorted within each row.
struct CsrMatrix {
   int rows = 0;
   int cols = 0;
   std::vector<std::int64_t> row_ptr;
   std::vector<int> col_idx;
   std::vector<double> values;

   std::size_t nnz() const { return values.size(); }

   /// y = A x
   void multiply(std::span<const double> x, std::span<double> y) const;
   std::vector<double> multiply(std::span<const double> x) const;
   /// y = A^T x
   std::vector<double> multiply_transpose(std::span<const double> x) const;

   double at(int i, int j) const;
   std::vector<double> diagonal() const;
   double max_abs() const;
};

/// Builds a CSR matrix from (row, col, value) triplets, summing duplicates.
class TripletBuilder {
public:
   TripletBuilder(int rows, int cols) : rows_(rows), cols_(cols) {}
   void add(int i, int j, double v) { entries_.push_back({i, j, v}); }
   CsrMatrix build() const;

private:
   struct Entry { int i; int j; double v; };
   int rows_;
   int cols_;
   std::vector<Entry> entries_;
};

/// C = a*A + b*B for matrices of equal shape.
CsrMatrix add_scaled(double a, const CsrMatrix &A, double b, const CsrMatrix &B);

CsrMatrix transpose(const CsrMatrix &A);
/// Sparse product A B.
CsrMatrix multiply(const CsrMatrix &A, const CsrMatrix &B);
/// Coarse operator P^T A P.
CsrMatrix galerkin_product(const CsrMatrix &P, const CsrMatrix &A);

struct SolveReport {
   int iterations = 0;
   double relative_residual = 0.0;
   bool converged = false;
};

/// Raised when CG fails to reach the requested tolerance.
class SolverError : public std::runtime_error {
public:
   SolverError(const std::string &what, SolveReport report)
      : std::runtime_error(what), report_(report) {}
   const SolveReport &report() const { return report_; }

private:
   SolveReport report_;
};

struct CgResult {
   std::vector<double> x;
   SolveReport report;
};

/// z = B r for a symmetric positive definite approximation B of A^{-1}.
class Preconditioner {
public:
   virtual ~Preconditioner() = default;
   virtual void apply(std::span<const double> r, std::span<double> z) const = 0;
};

class JacobiPreconditioner final : public Preconditioner {
public:
   /// Throws SolverError on a nonpositive diagonal entry.
   explicit JacobiPreconditioner(const CsrMatrix &A);
   void apply(std::span<const double> r, std::span<double> z) const override;

private:
   std::vector<double> inv_diag_;
};

/// Symmetric V-cycle with damped Jacobi smoothing and Galerkin coarse
/// operators. prolongations[l] maps level l+1 to level l (level 0 = A). The
/// coarsest operator is factored densely. Keeps a reference to A.
class MultigridPreconditioner final : public Preconditioner {
public:
   MultigridPreconditioner(const CsrMatrix &A, std::vector<CsrMatrix> prolongations,
                           int smoothing_steps = 2, double omega = 0.6);
   void apply(std::span<const double> r, std::span<double> z) const override;
   int levels() const { return static_cast<int>(prolongations_.size()) + 1; }

private:
   void cycle(int level, std::span<const double> b, std::span<double> x) const;
   const CsrMatrix &op(int level) const { return level == 0 ? *fine_ : coarse_[level - 1]; }

   const CsrMatrix *fine_;
   std::vector<CsrMatrix> prolongations_;
   std::vector<CsrMatrix> restrictions_;
   std::vector<CsrMatrix> coarse_;
   std::vector<std::vector<double>> inv_diag_;
   std::vector<double> coarse_factor_;  // dense lower Cholesky factor, row-major
   int smoothing_steps_;
   double omega_;
};

/// Preconditioned conjugate gradients; same contract as cg_solve.
CgResult pcg_solve(const CsrMatrix &A, std::span<const double> b, double tol, int max_it,
                   const Preconditioner &M,
                   std::optional<std::span<const double>> x0 = std::nullopt);

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite
/// matrix. Converged means ||b - A x||_2 <= tol ||b||_2. Throws SolverError
/// after max_it iterations without convergence or on loss of positivity.
CgResult cg_solve(const CsrMatrix &A, std::span<const double> b, double tol, int max_it,
                  std::optional<std::span<const double>> x0 = std::nullopt);

/// Energy history J(x_k) = x_k^T A x_k / 2 - b^T x_k of the last cg_solve on
/// this thread (CG minimizes J, so the sequence is nonincreasing). Recorded
/// only while enabled; cleared at the start of every solve.
const std::vector<double> &last_cg_history();
void record_cg_history(bool enabled);

/// Worker count for row-parallel kernels: SIMPL_THREADS, 0 or unset = hardware.
int kernel_threads();

} // namespace simpl
