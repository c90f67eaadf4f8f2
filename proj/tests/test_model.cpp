#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>

#include "dvd/cloud_ops.hpp"
#include "dvd/errors.hpp"
#include "dvd/model.hpp"
#include "dvd/rng.hpp"
#include "dvd/shapes.hpp"
#include "gradcheck.hpp"

using namespace dvd;
using diffnet::Mat;
using diffnet::Tape;
using diffnet::Value;
using model::Model;
using model::ModelConfig;

namespace {

Mat random_points(std::uint64_t seed, int n) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.6);
  Mat pts(n, 3);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = gauss(rng);
  return pts;
}

ModelConfig tiny_config() { return {16, 4, 8}; }

}  // namespace

TEST_CASE("encode is exactly permutation- and duplication-invariant") {
  Model m(tiny_config(), 5);
  const Mat pts = random_points(1, 40);

  Tape t;
  const Mat base = m.encode(t, pts)->value;

  SUBCASE("permutation") {
    std::vector<int> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), make_rng(2));
    Mat shuffled(40, 3);
    for (int i = 0; i < 40; ++i) shuffled.row(i) = pts.row(perm[static_cast<std::size_t>(i)]);
    Tape t2;
    CHECK((m.encode(t2, shuffled)->value - base).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("duplication") {
    // Max over duplicated rows is exact; the 1-ulp slack is GEMM blocking,
    // which re-associates per-row accumulation when the batch height changes.
    Mat doubled(80, 3);
    doubled.topRows(40) = pts;
    doubled.bottomRows(40) = pts;
    Tape t2;
    CHECK((m.encode(t2, doubled)->value - base).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("single point equals its per-point features") {
    // With one point, max-pool is the identity on the MLP output.
    Tape t2;
    const Mat one = m.encode(t2, pts.topRows(1))->value;
    Tape t3;
    Mat two(2, 3);
    two.row(0) = pts.row(0);
    two.row(1) = pts.row(0);
    CHECK((m.encode(t3, two)->value - one).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("encode is sensitive to rigid motion at random init") {
  Model m({32, 4, 8}, 6);
  auto sampled = cloud::sample_mesh(cloud::make_blob(3), 64, 4);
  const auto [normalized, c0, s0] = cloud::normalize_unit_sphere(sampled);
  const auto T = geom3d::sample_transform(11, 45.0, 0.5);
  const model::Descriptor a = m.encode_inference(normalized);
  const model::Descriptor b = m.encode_inference(cloud::apply(T, normalized));
  CHECK((a - b).cwiseAbs().maxCoeff() > 1e-9);
}

TEST_CASE("tape encode and inference encode agree") {
  Model m(tiny_config(), 7);
  const Mat pts = random_points(8, 33);
  Tape t;
  const Mat from_tape = m.encode(t, pts)->value;
  const model::Descriptor from_inference = m.encode_inference(pts);
  CHECK((from_tape.row(0) - from_inference).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("feature_change constructed weights") {
  const int K = 6;
  Model m({K, 2, 4}, 9);
  Tape t;
  Value d1 = t.constant(random_points(10, 1).row(0).replicate(1, 2));  // placeholder shapes below
  // Use explicit descriptors of width K.
  Mat a = Mat::Random(1, K), b = Mat::Random(1, K);
  d1 = t.constant(a);
  Value d2 = t.constant(b);

  SUBCASE("zero weights with bias return the bias") {
    m.params().set_value("metric.l0.W", Mat::Zero(2 * K, K));
    Mat bias(1, K);
    for (int i = 0; i < K; ++i) bias(0, i) = 0.5 + i;
    m.params().set_value("metric.l0.b", bias);
    const Mat out = m.feature_change(t, d1, d2)->value;
    CHECK((out - bias).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("left-identity weights return the first descriptor") {
    Mat W = Mat::Zero(2 * K, K);
    W.topRows(K) = Mat::Identity(K, K);
    m.params().set_value("metric.l0.W", W);
    m.params().set_value("metric.l0.b", Mat::Zero(1, K));
    const Mat out = m.feature_change(t, d1, d2)->value;
    CHECK((out - a).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("feature_change gradients match finite differences") {
  const int K = 5;
  for (std::uint64_t inst = 0; inst < 5; ++inst) {
    Model m({K, 2, 4}, 20 + inst);
    diffnet::ParameterSet inputs;
    inputs.create("d1", Mat::Random(1, K));
    inputs.create("d2", Mat::Random(1, K));
    const auto report = gradcheck::check(
        inputs,
        [&](Tape& t, diffnet::ParameterSet& p) {
          return diffnet::l2_norm(t, m.feature_change(t, p.get("d1"), p.get("d2")));
        },
        1e-4);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("decode") {
  SUBCASE("grid cardinality and determinism") {
    Model m({12, 5, 8}, 31);
    Tape t;
    Value d = t.constant(Mat::Random(1, 12));
    const Mat out = m.decode(t, d)->value;
    CHECK(out.rows() == 25);
    CHECK(out.cols() == 3);
    CHECK(out.allFinite());
    Tape t2;
    const Mat again = m.decode(t2, t2.constant(d->value))->value;
    CHECK((out - again).cwiseAbs().maxCoeff() == 0.0);
    CHECK((m.decode_inference(Mat(d->value)) - out).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("grid side 1 gives a single point") {
    Model m({8, 1, 8}, 32);
    Tape t;
    CHECK(m.decode(t, t.constant(Mat::Random(1, 8)))->value.rows() == 1);
  }

  SUBCASE("descriptor perturbation changes the output") {
    Model m({8, 4, 8}, 33);
    Mat d = Mat::Random(1, 8);
    Mat d2 = d;
    d2(0, 3) += 0.25;
    CHECK((m.decode_inference(Mat(d)) - m.decode_inference(Mat(d2))).cwiseAbs().maxCoeff() >
          1e-9);
  }
}

TEST_CASE("estimate_normal") {
  Model m(tiny_config(), 41);
  const Mat pts = random_points(42, 24);
  const model::Descriptor d = m.encode_inference(pts);

  SUBCASE("unit norm and determinism") {
    for (int i = 0; i < 24; ++i) {
      const Eigen::Vector3d n = m.estimate_normal(pts.row(i).transpose(), d);
      CHECK(std::abs(n.norm() - 1.0) < 1e-9);
      const Eigen::Vector3d again = m.estimate_normal(pts.row(i).transpose(), d);
      CHECK((n - again).cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("degenerate raw output throws") {
    m.params().set_value("normal.l1.W", Mat::Zero(tiny_config().normal_hidden, 3));
    m.params().set_value("normal.l1.b", Mat::Zero(1, 3));
    CHECK_THROWS_AS(m.estimate_normal(pts.row(0).transpose(), d), NumericError);
  }

  SUBCASE("batched head matches the single-point path") {
    Tape t;
    Value desc = t.constant(Mat(d));
    const Mat batched = m.normal_head(t, pts, desc)->value;
    for (int i = 0; i < 4; ++i) {
      const Eigen::Vector3d single = m.estimate_normal(pts.row(i).transpose(), d);
      CHECK((batched.row(i).transpose() - single).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("model save/load round trip with sidecar validation") {
  const auto path = std::filesystem::temp_directory_path() / "dvd_test_model.dvdr";
  Model m({24, 3, 8}, 51);
  m.save(path);

  Model back = Model::load(path);
  CHECK(back.config() == m.config());
  const Mat pts = random_points(52, 20);
  CHECK((m.encode_inference(pts) - back.encode_inference(pts)).cwiseAbs().maxCoeff() == 0.0);

  SUBCASE("missing sidecar is an error") {
    std::filesystem::remove(path.string() + ".json");
    CHECK_THROWS_AS(Model::load(path), IoError);
  }
}
