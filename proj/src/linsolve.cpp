#include "simpl/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace simpl {

namespace {

thread_local std::vector<double> g_history;
thread_local bool g_record_history = false;

template <class Fn>
void parallel_rows(int n, Fn &&fn)
{
   const int threads = kernel_threads();
   if (threads <= 1 || n < 20000)
   {
      fn(0, n);
      return;
   }
   std::vector<std::thread> pool;
   const int chunk = (n + threads - 1) / threads;
   for (int t = 0; t < threads; ++t)
   {
      const int lo = t * chunk;
      const int hi = std::min(n, lo + chunk);
      if (lo >= hi) { break; }
      pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
   }
   for (auto &th : pool) { th.join(); }
}

double dot(std::span<const double> a, std::span<const double> b)
{
   // blocked accumulation keeps the rounding independent of thread count
   double total = 0.0;
   const std::size_t n = a.size();
   for (std::size_t lo = 0; lo < n; lo += 4096)
   {
      const std::size_t hi = std::min(n, lo + 4096);
      double s = 0.0;
      for (std::size_t i = lo; i < hi; ++i) { s += a[i] * b[i]; }
      total += s;
   }
   return total;
}

#ifndef NDEBUG
void check_symmetry_probe(const CsrMatrix &A)
{
   if (A.rows != A.cols) { throw std::invalid_argument("cg_solve: matrix is not square"); }
   std::mt19937_64 rng(12345);
   std::uniform_real_distribution<double> dist(-1.0, 1.0);
   std::vector<double> x(A.rows), y(A.rows);
   for (auto &v : x) { v = dist(rng); }
   for (auto &v : y) { v = dist(rng); }
   const auto Ay = A.multiply(y);
   const auto Ax = A.multiply(x);
   const double xAy = dot(x, Ay);
   const double yAx = dot(y, Ax);
   const double scale = std::max(1.0, A.max_abs()) * static_cast<double>(A.rows);
   if (std::abs(xAy - yAx) > 1e-10 * scale)
   {
      throw std::invalid_argument("cg_solve: matrix fails the symmetry probe");
   }
}
#endif

} // namespace

int kernel_threads()
{
   static const int threads = [] {
      int n = 0;
      if (const char *env = std::getenv("SIMPL_THREADS")) { n = std::atoi(env); }
      if (n <= 0) { n = static_cast<int>(std::thread::hardware_concurrency()); }
      return std::max(1, n);
   }();
   return threads;
}

void CsrMatrix::multiply(std::span<const double> x, std::span<double> y) const
{
   parallel_rows(rows, [&](int lo, int hi) {
      for (int i = lo; i < hi; ++i)
      {
         double s = 0.0;
         for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
         {
            s += values[k] * x[col_idx[k]];
         }
         y[i] = s;
      }
   });
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const
{
   std::vector<double> y(rows);
   multiply(x, y);
   return y;
}

std::vector<double> CsrMatrix::multiply_transpose(std::span<const double> x) const
{
   std::vector<double> y(cols, 0.0);
   for (int i = 0; i < rows; ++i)
   {
      for (std::int64_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      {
         y[col_idx[k]] += values[k] * x[i];
      }
   }
   return y;
}

double CsrMatrix::at(int i, int j) const
{
   const auto first = col_idx.begin() + row_ptr[i];
   const auto last = col_idx.begin() + row_ptr[i + 1];
   const auto it = std::lower_bound(first, last, j);
   if (it == last || *it != j) { return 0.0; }
   return values[static_cast<std::size_t>(it - col_idx.begin())];
}

std::vector<double> CsrMatrix::diagonal() const
{
   std::vector<double> d(std::min(rows, cols), 0.0);
   for (int i = 0; i < static_cast<int>(d.size()); ++i) { d[i] = at(i, i); }
   return d;
}

double CsrMatrix::max_abs() const
{
   double m = 0.0;
   for (double v : values) { m = std::max(m, std::abs(v)); }
   return m;
}

CsrMatrix TripletBuilder::build() const
{
   std::vector<Entry> sorted = entries_;
   std::sort(sorted.begin(), sorted.end(), [](const Entry &a, const Entry &b) {
      return a.i != b.i ? a.i < b.i : a.j < b.j;
   });
   CsrMatrix A;
   A.rows = rows_;
   A.cols = cols_;
   A.row_ptr.assign(rows_ + 1, 0);
   for (std::size_t k = 0; k < sorted.size();)
   {
      const Entry &e = sorted[k];
      if (e.i < 0 || e.i >= rows_ || e.j < 0 || e.j >= cols_)
      {
         throw std::out_of_range("TripletBuilder: entry outside matrix shape");
      }
      double v = 0.0;
      std::size_t m = k;
      while (m < sorted.size() && sorted[m].i == e.i && sorted[m].j == e.j) { v += sorted[m++].v; }
      A.col_idx.push_back(e.j);
      A.values.push_back(v);
      A.row_ptr[e.i + 1]++;
      k = m;
   }
   for (int i = 0; i < rows_; ++i) { A.row_ptr[i + 1] += A.row_ptr[i]; }
   return A;
}

CsrMatrix add_scaled(double a, const CsrMatrix &A, double b, const CsrMatrix &B)
{
   if (A.rows != B.rows || A.cols != B.cols)
   {
      throw std::invalid_argument("add_scaled: shape mismatch");
   }
   TripletBuilder tb(A.rows, A.cols);
   for (int i = 0; i < A.rows; ++i)
   {
      for (auto k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) { tb.add(i, A.col_idx[k], a * A.values[k]); }
      for (auto k = B.row_ptr[i]; k < B.row_ptr[i + 1]; ++k) { tb.add(i, B.col_idx[k], b * B.values[k]); }
   }
   return tb.build();
}

const std::vector<double> &last_cg_history() { return g_history; }
void record_cg_history(bool enabled) { g_record_history = enabled; }

CsrMatrix transpose(const CsrMatrix &A)
{
   CsrMatrix T;
   T.rows = A.cols;
   T.cols = A.rows;
   T.row_ptr.assign(T.rows + 1, 0);
   for (int c : A.col_idx) { T.row_ptr[c + 1]++; }
   for (int i = 0; i < T.rows; ++i) { T.row_ptr[i + 1] += T.row_ptr[i]; }
   T.col_idx.resize(A.nnz());
   T.values.resize(A.nnz());
   std::vector<std::int64_t> next(T.row_ptr.begin(), T.row_ptr.end() - 1);
   for (int i = 0; i < A.rows; ++i)
   {
      for (auto k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k)
      {
         const auto pos = next[A.col_idx[k]]++;
         T.col_idx[pos] = i;
         T.values[pos] = A.values[k];
      }
   }
   return T;
}

CsrMatrix multiply(const CsrMatrix &A, const CsrMatrix &B)
{
   if (A.cols != B.rows) { throw std::invalid_argument("multiply: shape mismatch"); }
   CsrMatrix C;
   C.rows = A.rows;
   C.cols = B.cols;
   C.row_ptr.assign(C.rows + 1, 0);
   std::vector<int> marker(B.cols, -1);
   std::vector<double> acc(B.cols, 0.0);
   std::vector<int> cols;
   for (int i = 0; i < A.rows; ++i)
   {
      cols.clear();
      for (auto ka = A.row_ptr[i]; ka < A.row_ptr[i + 1]; ++ka)
      {
         const int j = A.col_idx[ka];
         const double a = A.values[ka];
         for (auto kb = B.row_ptr[j]; kb < B.row_ptr[j + 1]; ++kb)
         {
            const int c = B.col_idx[kb];
            if (marker[c] != i)
            {
               marker[c] = i;
               acc[c] = 0.0;
               cols.push_back(c);
            }
            acc[c] += a * B.values[kb];
         }
      }
      std::sort(cols.begin(), cols.end());
      for (int c : cols)
      {
         C.col_idx.push_back(c);
         C.values.push_back(acc[c]);
      }
      C.row_ptr[i + 1] = static_cast<std::int64_t>(C.col_idx.size());
   }
   return C;
}

CsrMatrix galerkin_product(const CsrMatrix &P, const CsrMatrix &A)
{
   CsrMatrix C = multiply(transpose(P), multiply(A, P));
   // symmetrize away rounding differences between (i,j) and (j,i)
   const CsrMatrix Ct = transpose(C);
   for (std::size_t k = 0; k < C.values.size(); ++k) { C.values[k] = 0.5 * (C.values[k] + Ct.values[k]); }
   return C;
}

JacobiPreconditioner::JacobiPreconditioner(const CsrMatrix &A) : inv_diag_(A.diagonal())
{
   for (double &d : inv_diag_)
   {
      if (!(d > 0.0)) { throw SolverError("cg_solve: nonpositive diagonal entry", {}); }
      d = 1.0 / d;
   }
}

void JacobiPreconditioner::apply(std::span<const double> r, std::span<double> z) const
{
   for (std::size_t i = 0; i < r.size(); ++i) { z[i] = inv_diag_[i] * r[i]; }
}

MultigridPreconditioner::MultigridPreconditioner(const CsrMatrix &A,
                                                 std::vector<CsrMatrix> prolongations,
                                                 int smoothing_steps, double omega)
   : fine_(&A), prolongations_(std::move(prolongations)), smoothing_steps_(smoothing_steps),
     omega_(omega)
{
   const int nlev = levels();
   for (int l = 0; l + 1 < nlev; ++l)
   {
      if (prolongations_[l].rows != op(l).rows)
      {
         throw std::invalid_argument("MultigridPreconditioner: prolongation shape mismatch");
      }
      restrictions_.push_back(transpose(prolongations_[l]));
      coarse_.push_back(galerkin_product(prolongations_[l], op(l)));
   }
   for (int l = 0; l < nlev; ++l)
   {
      std::vector<double> d = op(l).diagonal();
      for (double &v : d)
      {
         if (!(v > 0.0)) { throw SolverError("multigrid: nonpositive diagonal entry", {}); }
         v = 1.0 / v;
      }
      inv_diag_.push_back(std::move(d));
   }
   const CsrMatrix &C = op(nlev - 1);
   const int n = C.rows;
   Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
   for (int i = 0; i < n; ++i)
   {
      for (auto k = C.row_ptr[i]; k < C.row_ptr[i + 1]; ++k) { dense(i, C.col_idx[k]) = C.values[k]; }
   }
   Eigen::LLT<Eigen::MatrixXd> llt(dense);
   if (llt.info() != Eigen::Success)
   {
      throw SolverError("multigrid: coarse operator is not positive definite", {});
   }
   Eigen::MatrixXd L = llt.matrixL();
   coarse_factor_.resize(static_cast<std::size_t>(n) * n);
   Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      coarse_factor_.data(), n, n) = L;
}

void MultigridPreconditioner::cycle(int level, std::span<const double> b, std::span<double> x) const
{
   const CsrMatrix &A = op(level);
   const int n = A.rows;
   if (level == levels() - 1)
   {
      using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
      Eigen::Map<const RowMat> L(coarse_factor_.data(), n, n);
      Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
      Eigen::VectorXd y = L.triangularView<Eigen::Lower>().solve(rhs);
      L.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
      std::copy(y.data(), y.data() + n, x.begin());
      return;
   }
   const auto &dinv = inv_diag_[level];
   std::vector<double> r(n);
   auto smooth = [&](bool zero_start) {
      for (int s = 0; s < smoothing_steps_; ++s)
      {
         if (zero_start && s == 0)
         {
            for (int i = 0; i < n; ++i) { x[i] = omega_ * dinv[i] * b[i]; }
            continue;
         }
         A.multiply(x, r);
         for (int i = 0; i < n; ++i) { x[i] += omega_ * dinv[i] * (b[i] - r[i]); }
      }
   };
   smooth(true);
   A.multiply(x, r);
   for (int i = 0; i < n; ++i) { r[i] = b[i] - r[i]; }
   const std::vector<double> rc = restrictions_[level].multiply(r);
   std::vector<double> xc(rc.size(), 0.0);
   cycle(level + 1, rc, xc);
   const std::vector<double> e = prolongations_[level].multiply(xc);
   for (int i = 0; i < n; ++i) { x[i] += e[i]; }
   smooth(false);
}

void MultigridPreconditioner::apply(std::span<const double> r, std::span<double> z) const
{
   std::fill(z.begin(), z.end(), 0.0);
   cycle(0, r, z);
}

CgResult pcg_solve(const CsrMatrix &A, std::span<const double> b, double tol, int max_it,
                   const Preconditioner &M, std::optional<std::span<const double>> x0)
{
   if (!(tol > 0.0)) { throw std::invalid_argument("cg_solve: tol must be positive"); }
   if (static_cast<int>(b.size()) != A.rows)
   {
      throw std::invalid_argument("cg_solve: right-hand side length mismatch");
   }
#ifndef NDEBUG
   check_symmetry_probe(A);
#endif
   g_history.clear();
   const int n = A.rows;
   CgResult out;
   out.x.assign(n, 0.0);
   if (x0 && x0->size() == b.size()) { std::copy(x0->begin(), x0->end(), out.x.begin()); }

   const double bnorm = std::sqrt(dot(b, b));
   if (bnorm == 0.0)
   {
      std::fill(out.x.begin(), out.x.end(), 0.0);
      out.report = {0, 0.0, true};
      return out;
   }

   std::vector<double> r(n), z(n), p(n), q(n);
   A.multiply(out.x, q);
   for (int i = 0; i < n; ++i) { r[i] = b[i] - q[i]; }
   double rnorm = std::sqrt(dot(r, r));
   M.apply(r, z);
   p = z;
   double rz = dot(r, z);
   // J(x) = -x^T (b + r) / 2 since A x = b - r
   auto energy = [&] {
      double s = 0.0;
      for (int i = 0; i < n; ++i) { s += out.x[i] * (b[i] + r[i]); }
      return -0.5 * s;
   };
   if (g_record_history) { g_history.push_back(energy()); }

   int it = 0;
   while (rnorm > tol * bnorm && it < max_it)
   {
      A.multiply(p, q);
      const double pq = dot(p, q);
      if (!(pq > 0.0))
      {
         throw SolverError("cg_solve: matrix is not positive definite along a search direction",
                           {it, rnorm / bnorm, false});
      }
      const double step = rz / pq;
      for (int i = 0; i < n; ++i)
      {
         out.x[i] += step * p[i];
         r[i] -= step * q[i];
      }
      M.apply(r, z);
      const double rr = dot(r, r);
      const double rz_new = dot(r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      for (int i = 0; i < n; ++i) { p[i] = z[i] + beta * p[i]; }
      rnorm = std::sqrt(rr);
      ++it;
      if (g_record_history) { g_history.push_back(energy()); }
   }

   out.report = {it, rnorm / bnorm, rnorm <= tol * bnorm};
   if (!out.report.converged)
   {
      throw SolverError("cg_solve: no convergence after " + std::to_string(it) +
                        " iterations (relative residual " +
                        std::to_string(out.report.relative_residual) + ")",
                        out.report);
   }
   return out;
}

CgResult cg_solve(const CsrMatrix &A, std::span<const double> b, double tol, int max_it,
                  std::optional<std::span<const double>> x0)
{
   if (static_cast<int>(b.size()) != A.rows)
   {
      throw std::invalid_argument("cg_solve: right-hand side length mismatch");
   }
   if (!(tol > 0.0)) { throw std::invalid_argument("cg_solve: tol must be positive"); }
   if (std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; }))
   {
      g_history.clear();
      return {std::vector<double>(b.size(), 0.0), {0, 0.0, true}};
   }
   return pcg_solve(A, b, tol, max_it, JacobiPreconditioner(A), x0);
}

} // namespace simpl
