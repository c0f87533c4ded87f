#include "simpl/grid.hpp"
#include "simpl/linsolve.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace simpl;

namespace {

CsrMatrix from_dense(const Eigen::MatrixXd &D)
{
   TripletBuilder b(static_cast<int>(D.rows()), static_cast<int>(D.cols()));
   for (int i = 0; i < D.rows(); ++i)
   {
      for (int j = 0; j < D.cols(); ++j)
      {
         if (D(i, j) != 0.0) { b.add(i, j, D(i, j)); }
      }
   }
   return b.build();
}

Eigen::MatrixXd dense(const CsrMatrix &A)
{
   Eigen::MatrixXd D = Eigen::MatrixXd::Zero(A.rows, A.cols);
   for (int i = 0; i < A.rows; ++i)
   {
      for (auto k = A.row_ptr[i]; k < A.row_ptr[i + 1]; ++k) { D(i, A.col_idx[k]) = A.values[k]; }
   }
   return D;
}

Eigen::MatrixXd random_spd(int n, unsigned seed)
{
   std::mt19937_64 rng(seed);
   std::normal_distribution<double> d;
   Eigen::MatrixXd B(n, n);
   for (int i = 0; i < n; ++i)
   {
      for (int j = 0; j < n; ++j) { B(i, j) = d(rng); }
   }
   return B * B.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

CsrMatrix clamped_stiffness(int nx, int ny)
{
   CartesianMesh mesh(nx, ny, 2.0, 1.0);
   std::vector<char> mask(mesh.num_dofs(), 0);
   for (int j = 0; j <= ny; ++j)
   {
      mask[2 * mesh.node(0, j)] = 1;
      mask[2 * mesh.node(0, j) + 1] = 1;
   }
   ElasticModel model(mesh, Material{}, mask);
   Vec E(mesh.num_cells());
   for (int c = 0; c < mesh.num_cells(); ++c) { E[c] = 1e-3 + (c % 7) / 7.0; }
   return model.assemble_stiffness(E);
}

} // namespace

TEST_CASE("triplet assembly sums duplicates and sorts columns")
{
   TripletBuilder b(2, 3);
   b.add(1, 2, 1.0);
   b.add(0, 1, 2.0);
   b.add(1, 0, 3.0);
   b.add(1, 2, 4.0);
   const CsrMatrix A = b.build();
   CHECK(A.nnz() == 3);
   CHECK(A.at(1, 2) == 5.0);
   CHECK(A.at(0, 0) == 0.0);
   CHECK(A.col_idx[1] == 0);
   CHECK(A.col_idx[2] == 2);
   const Vec y = A.multiply(Vec{1.0, 1.0, 1.0});
   CHECK(y == Vec{2.0, 8.0});
   const Vec z = A.multiply_transpose(Vec{1.0, 2.0});
   CHECK(z == Vec{6.0, 2.0, 10.0});
   TripletBuilder bad(2, 2);
   bad.add(2, 0, 1.0);
   CHECK_THROWS_AS(bad.build(), std::out_of_range);
}

TEST_CASE("sparse products match dense arithmetic")
{
   const Eigen::MatrixXd A = random_spd(7, 1);
   Eigen::MatrixXd P = Eigen::MatrixXd::Zero(7, 3);
   P(0, 0) = 1.0;
   P(1, 0) = 0.5;
   P(1, 1) = 0.5;
   P(3, 1) = 1.0;
   P(5, 2) = 2.0;
   const CsrMatrix As = from_dense(A), Ps = from_dense(P);
   CHECK((dense(transpose(Ps)) - P.transpose()).norm() == 0.0);
   CHECK((dense(multiply(As, Ps)) - A * P).norm() <= 1e-12 * (A * P).norm());
   const Eigen::MatrixXd G = dense(galerkin_product(Ps, As));
   CHECK((G - P.transpose() * A * P).norm() <= 1e-12 * G.norm());
   CHECK((G - G.transpose()).norm() == 0.0);
   CHECK((dense(add_scaled(2.0, As, -1.0, As)) - A).norm() <= 1e-14 * A.norm());
}

TEST_CASE("cg on the identity converges in one iteration")
{
   const CsrMatrix I = from_dense(Eigen::MatrixXd::Identity(5, 5));
   const Vec b{1, -2, 3, 0.5, 7};
   const CgResult r = cg_solve(I, b, 1e-12, 10);
   CHECK(r.report.iterations == 1);
   CHECK(r.report.converged);
   for (int i = 0; i < 5; ++i) { CHECK(r.x[i] == doctest::Approx(b[i])); }
}

TEST_CASE("cg with zero right-hand side returns zero")
{
   const CsrMatrix A = from_dense(random_spd(6, 2));
   const CgResult r = cg_solve(A, Vec(6, 0.0), 1e-10, 10);
   CHECK(r.report.converged);
   CHECK(r.report.iterations == 0);
   for (double v : r.x) { CHECK(v == 0.0); }
}

TEST_CASE("cg matches a dense factorization on a random SPD system")
{
   const Eigen::MatrixXd D = random_spd(50, 3);
   std::mt19937_64 rng(4);
   std::normal_distribution<double> n;
   Eigen::VectorXd b(50);
   for (int i = 0; i < 50; ++i) { b[i] = n(rng); }
   const Eigen::VectorXd oracle = D.llt().solve(b);
   const Vec bv(b.data(), b.data() + 50);
   const CgResult r = cg_solve(from_dense(D), bv, 1e-12, 500);
   double err = 0.0;
   for (int i = 0; i < 50; ++i) { err = std::max(err, std::abs(r.x[i] - oracle[i])); }
   CHECK(err <= 1e-8 * oracle.cwiseAbs().maxCoeff());
   CHECK(r.report.relative_residual <= 1e-12);
}

TEST_CASE("cg energy decreases monotonically and warm starts help")
{
   const CsrMatrix K = clamped_stiffness(16, 8);
   Vec b(K.rows, 0.0);
   b[K.rows - 1] = -1.0;
   record_cg_history(true);
   const CgResult cold = cg_solve(K, b, 1e-10, 10000);
   const std::vector<double> h = last_cg_history();
   record_cg_history(false);
   REQUIRE(h.size() > 2);
   double hmax = 0.0;
   for (double v : h) { hmax = std::max(hmax, std::abs(v)); }
   // J is evaluated in floating point; allow its rounding level
   for (std::size_t i = 1; i < h.size(); ++i) { CHECK(h[i] <= h[i - 1] + 1e-13 * hmax); }
   const CgResult warm = cg_solve(K, b, 1e-10, 10000, std::span<const double>(cold.x));
   CHECK(warm.report.iterations < cold.report.iterations);
   CHECK(warm.report.converged);
}

TEST_CASE("cg reports failure")
{
   const CsrMatrix K = clamped_stiffness(16, 8);
   Vec b(K.rows, 1.0);
   CHECK_THROWS_AS(cg_solve(K, b, 1e-14, 3), SolverError);
   try
   {
      cg_solve(K, b, 1e-14, 3);
   }
   catch (const SolverError &e)
   {
      CHECK(!e.report().converged);
      CHECK(e.report().iterations == 3);
   }
   // indefinite matrix
   Eigen::MatrixXd D = Eigen::MatrixXd::Identity(3, 3);
   D(2, 2) = -1.0;
   CHECK_THROWS_AS(cg_solve(from_dense(D), Vec{0.0, 0.0, 1.0}, 1e-10, 10), SolverError);
}

TEST_CASE("multigrid preconditioned cg agrees with Jacobi cg")
{
   CartesianMesh mesh(32, 16, 2.0, 1.0);
   std::vector<char> mask(mesh.num_dofs(), 0);
   for (int j = 0; j <= 16; ++j)
   {
      mask[2 * mesh.node(0, j)] = 1;
      mask[2 * mesh.node(0, j) + 1] = 1;
   }
   ElasticModel model(mesh, Material{}, mask);
   Vec E(mesh.num_cells());
   for (int c = 0; c < mesh.num_cells(); ++c) { E[c] = 1e-6 + std::pow((c % 5) / 4.0, 3.0); }
   const CsrMatrix K = model.assemble_stiffness(E);
   Vec b(K.rows, 0.0);
   b[2 * mesh.node(32, 16) + 1] = -1.0;
   const MultigridPreconditioner mg(K, displacement_prolongations(mesh, mask, 100));
   CHECK(mg.levels() >= 2);
   const CgResult a = cg_solve(K, b, 1e-11, 100000);
   const CgResult m = pcg_solve(K, b, 1e-11, 1000, mg);
   CHECK(m.report.iterations < a.report.iterations);
   double scale = 0.0, diff = 0.0;
   for (int i = 0; i < K.rows; ++i)
   {
      scale = std::max(scale, std::abs(a.x[i]));
      diff = std::max(diff, std::abs(a.x[i] - m.x[i]));
   }
   CHECK(diff <= 1e-7 * scale);
}

TEST_CASE("kernel thread count honours SIMPL_THREADS")
{
   CHECK(kernel_threads() >= 1);
}
