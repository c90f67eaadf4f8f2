#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "dvd/cloud_ops.hpp"
#include "dvd/errors.hpp"
#include "dvd/rng.hpp"
#include "dvd/shapes.hpp"
#include "dvd/solver.hpp"

using namespace dvd;
using cloud::PointCloud;
using diffnet::Mat;
using Eigen::Vector3d;

namespace {

PointCloud blob_cloud(std::uint64_t seed, int n) {
  auto sampled = cloud::sample_mesh(cloud::make_blob(seed), n, derive_seed(seed, 0x5A));
  auto [normalized, c, s] = cloud::normalize_unit_sphere(sampled);
  return std::move(normalized);
}

}  // namespace

TEST_CASE("compute_jacobian") {
  SUBCASE("constant encoder gives a zero Jacobian") {
    model::Model m({8, 2, 4}, 1);
    // Zero the last layer so the descriptor is constant in the input.
    m.params().set_value("enc.l4.W", Mat::Zero(128, 8));
    Mat bias = Mat::Constant(1, 8, 0.3);
    m.params().set_value("enc.l4.b", bias);
    const PointCloud y = blob_cloud(2, 64);
    const Mat J = solver::compute_jacobian(m, y, 1e-2);
    CHECK(J.rows() == 8);
    CHECK(J.cols() == 6);
    CHECK(J.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("first-order consistency under step halving (smooth instance)") {
    // Shift every encoder bias far positive so all ReLUs stay active: the
    // descriptor is then smooth in the twist except for the warp curvature,
    // and the forward-difference error is cleanly O(step).
    model::Model m({16, 2, 4}, 3);
    for (int i = 0; i < 5; ++i) {
      const std::string b = "enc.l" + std::to_string(i) + ".b";
      m.params().set_value(b, (m.params().at(b).value.array() + 50.0).matrix());
    }
    const PointCloud y = blob_cloud(4, 96);
    const Mat j1 = solver::compute_jacobian(m, y, 1e-2);
    const Mat j2 = solver::compute_jacobian(m, y, 5e-3);
    const Mat j3 = solver::compute_jacobian(m, y, 2.5e-3);
    const double d1 = (j1 - j2).cwiseAbs().maxCoeff();
    const double d2 = (j2 - j3).cwiseAbs().maxCoeff();
    CHECK(d1 < 2.0 * 1e-2);       // columns move by O(step)
    CHECK(d2 / d1 > 0.4);          // and halve with the step
    CHECK(d2 / d1 < 0.6);
  }

  SUBCASE("a generic instance stabilizes at small steps") {
    // ReLU networks are piecewise linear; once the step no longer crosses a
    // kink the finite-difference columns stop moving.
    model::Model m({16, 2, 4}, 3);
    const PointCloud y = blob_cloud(4, 96);
    const Mat ja = solver::compute_jacobian(m, y, 1e-6);
    const Mat jb = solver::compute_jacobian(m, y, 5e-7);
    CHECK((ja - jb).cwiseAbs().maxCoeff() / ja.cwiseAbs().maxCoeff() < 1e-4);
  }
}

TEST_CASE("iclk_increment") {
  SUBCASE("zero residual gives a zero increment") {
    const Mat J = Mat::Random(12, 6);
    const geom3d::Twist dw = solver::iclk_increment(J, Eigen::VectorXd::Zero(12), 0.0);
    CHECK(dw.w.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("identity-embedded block recovers the first six entries") {
    Mat J = Mat::Zero(10, 6);
    J.topRows(6) = Mat::Identity(6, 6);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(10);
    for (int i = 0; i < 10; ++i) r[i] = i + 1.0;
    const geom3d::Twist dw = solver::iclk_increment(J, r, 0.0);
    for (int i = 0; i < 6; ++i) CHECK(dw.w[i] == doctest::Approx(r[i]).epsilon(1e-12));
  }

  SUBCASE("matches the dense pseudoinverse oracle within 1e-8") {
    auto rng = make_rng(7);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      Mat J(24, 6);
      Eigen::VectorXd r(24);
      for (int i = 0; i < 24; ++i) {
        r[i] = gauss(rng);
        for (int j = 0; j < 6; ++j) J(i, j) = gauss(rng);
      }
      const geom3d::Twist dw = solver::iclk_increment(J, r, 0.0);
      const Eigen::VectorXd want =
          J.completeOrthogonalDecomposition().pseudoInverse() * r;
      CHECK((dw.w - want).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("register_iclk on already-aligned clouds") {
  model::Model m({24, 2, 4}, 11);
  const PointCloud x = blob_cloud(12, 80);
  solver::SolverConfig cfg;
  const auto result = solver::register_iclk(m, x, x, cfg);
  CHECK(result.converged);
  CHECK(result.iterations_used == 0);  // zero residual stops before any update
  CHECK(result.residual_history.size() == 1);
  CHECK(result.residual_history[0] == 0.0);
  CHECK(geom3d::rotation_error_deg(result.transform.R, geom3d::Mat3::Identity()) < 1e-9);
  CHECK(result.jacobian_evaluations == 1);
}

TEST_CASE("register_iclk bookkeeping on random-init models") {
  model::Model m({24, 2, 4}, 13);
  const PointCloud x = blob_cloud(14, 64);
  const auto T = geom3d::sample_transform(15, 20.0, 0.2);
  const PointCloud y = cloud::apply(T, x);
  solver::SolverConfig cfg;
  const auto result = solver::register_iclk(m, x, y, cfg);
  CHECK(result.residual_history.size() == static_cast<std::size_t>(result.iterations_used) + 1);
  CHECK(result.iterations_used <= cfg.max_iterations);
  CHECK(geom3d::orthonormality_drift(result.transform.R) < 1e-9);
  CHECK(result.jacobian_evaluations == 1);  // inverse-compositional economy

  SUBCASE("config invariants are enforced") {
    cfg.max_iterations = 0;
    CHECK_THROWS_AS(solver::register_iclk(m, x, y, cfg), InvalidInput);
  }
}

TEST_CASE("fit_rigid handles planar clouds with reflection correction") {
  auto rng = make_rng(21);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<Vector3d> src;
  for (int i = 0; i < 40; ++i) src.emplace_back(uni(rng), uni(rng), 0.0);
  const auto T = geom3d::sample_transform(22, 30.0, 0.3);
  std::vector<Vector3d> dst;
  for (const auto& p : src) dst.push_back(T.R * p + T.t);
  const auto fit = solver::fit_rigid(src, dst);
  CHECK(fit.R.determinant() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(geom3d::rotation_error_deg(fit.R, T.R) < 1e-6);

  SUBCASE("rank-deficient correspondences throw") {
    std::vector<Vector3d> line_src, line_dst;
    for (int i = 0; i < 10; ++i) {
      line_src.emplace_back(i, 0.0, 0.0);
      line_dst.emplace_back(i, 0.0, 0.0);
    }
    CHECK_THROWS_AS(solver::fit_rigid(line_src, line_dst), NumericError);
  }
}

TEST_CASE("register_icp") {
  SUBCASE("identical clouds converge to the identity in one iteration") {
    const PointCloud x = blob_cloud(31, 128);
    const auto result = solver::register_icp(x, x, 50, 1e-12);
    CHECK(result.converged);
    CHECK(result.iterations_used == 1);
    CHECK(geom3d::rotation_error_deg(result.transform.R, geom3d::Mat3::Identity()) < 1e-9);
    CHECK(result.transform.t.norm() < 1e-9);
  }

  SUBCASE("recovers an exact 10-degree transform") {
    const PointCloud x = blob_cloud(32, 256);
    const auto T = geom3d::sample_transform(33, 10.0, 0.1);
    const PointCloud y = cloud::apply(T, x);
    const auto result = solver::register_icp(x, y, 50, 1e-12);
    CHECK(geom3d::rotation_error_deg(result.transform.R, T.R) < 0.1);
    CHECK((result.transform.t - T.t).norm() < 1e-3);
  }

  SUBCASE("99 of 100 random noise-free pairs recover the ground truth") {
    int good = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      const PointCloud x = blob_cloud(100 + trial, 256);
      const auto T = geom3d::sample_transform(derive_seed(40, trial), 10.0, 0.1);
      const PointCloud y = cloud::apply(T, x);
      const auto result = solver::register_icp(x, y, 60, 1e-13);
      if (geom3d::rotation_error_deg(result.transform.R, T.R) < 0.1 &&
          (result.transform.t - T.t).norm() < 1e-3)
        ++good;
    }
    CHECK(good >= 99);
  }

  SUBCASE("too-small clouds throw") {
    PointCloud tiny;
    tiny.points = {{0, 0, 0}, {1, 0, 0}};
    CHECK_THROWS_AS(solver::register_icp(tiny, tiny, 10, 1e-9), InvalidInput);
  }
}
