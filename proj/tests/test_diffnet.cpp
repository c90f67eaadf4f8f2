#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "dvd/checkpoint.hpp"
#include "dvd/diffnet.hpp"
#include "dvd/errors.hpp"
#include "dvd/rng.hpp"
#include "gradcheck.hpp"

using namespace dvd;
using diffnet::Mat;
using diffnet::ParameterSet;
using diffnet::Tape;
using diffnet::Value;

namespace {

Mat random_mat(std::uint64_t seed, int rows, int cols, double scale = 1.0,
               double margin = 0.0) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      double v = gauss(rng);
      if (margin > 0.0) {
        // Push values away from zero so ReLU/max kinks stay clear of the
        // finite-difference step.
        while (std::abs(v) < margin) v = gauss(rng);
      }
      m(i, j) = v;
    }
  return m;
}

}  // namespace

TEST_CASE("forward values of the primitives") {
  Tape t;
  ParameterSet params;

  SUBCASE("linear with identity weights is a pass-through") {
    Value x = t.constant(random_mat(1, 4, 3));
    Value W = params.create("W", Mat::Identity(3, 3));
    Value b = params.create("b", Mat::Zero(1, 3));
    Value y = diffnet::linear(t, x, W, b);
    CHECK((y->value - x->value).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("linear hand arithmetic") {
    Value x = t.constant((Mat(1, 2) << 1, 2).finished());
    Value W = params.create("W", (Mat(2, 1) << 1, 1).finished());
    Value b = params.create("b", Mat::Constant(1, 1, 3.0));
    CHECK(diffnet::linear(t, x, W, b)->value(0, 0) == 6.0);
  }

  SUBCASE("linear shape mismatch throws") {
    Value x = t.constant(Mat::Zero(2, 3));
    Value W = params.create("W", Mat::Zero(4, 2));
    Value b = params.create("b", Mat::Zero(1, 2));
    CHECK_THROWS_AS(diffnet::linear(t, x, W, b), ShapeError);
  }

  SUBCASE("max_pool_points on a single row returns the row") {
    Value x = t.constant((Mat(1, 3) << -1, 0, 5).finished());
    CHECK((diffnet::max_pool_points(t, x)->value - x->value).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("softmax of zeros is uniform") {
    Value x = t.constant(Mat::Zero(1, 2));
    const Mat y = diffnet::softmax(t, x)->value;
    CHECK(y(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  }

  SUBCASE("cosine rejects zero vectors") {
    Value a = t.constant(Mat::Zero(1, 3));
    Value b = t.constant(Mat::Ones(1, 3));
    CHECK_THROWS_AS(diffnet::cosine(t, a, b), InvalidInput);
  }

  SUBCASE("non-finite op results are rejected") {
    Value x = t.constant(Mat::Constant(1, 1, -1.0));
    CHECK_THROWS_AS(diffnet::log_shift(t, x, 0.0), NumericError);
  }
}

TEST_CASE("backward basics") {
  SUBCASE("loss = sum of a leaf gives all-ones gradient") {
    Tape t;
    ParameterSet params;
    Value x = params.create("x", random_mat(2, 3, 4));
    t.backward(diffnet::sum(t, x));
    CHECK((params.at("x").grad - Mat::Ones(3, 4)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("loss = |x|^2 at (1,2) gives gradient (2,4)") {
    Tape t;
    ParameterSet params;
    Value x = params.create("x", (Mat(1, 2) << 1, 2).finished());
    Value n = diffnet::l2_norm(t, x);
    Value sq = diffnet::mul(t, n, n);
    t.backward(sq);
    CHECK(params.at("x").grad(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(params.at("x").grad(0, 1) == doctest::Approx(4.0).epsilon(1e-12));
  }

  SUBCASE("non-scalar loss throws") {
    Tape t;
    ParameterSet params;
    Value x = params.create("x", Mat::Ones(2, 2));
    CHECK_THROWS_AS(t.backward(diffnet::relu(t, x)), ShapeError);
  }

  SUBCASE("repeated backward without reset accumulates") {
    Tape t;
    ParameterSet params;
    Value x = params.create("x", Mat::Ones(1, 2));
    Value s = diffnet::sum(t, x);
    t.backward(s);
    t.backward(s);
    CHECK(params.at("x").grad(0, 0) == 2.0);
  }
}

// Every registered primitive against central finite differences, 20 random
// instances each; rel err < 1e-4 with h = 1e-4.
TEST_CASE("gradient checks for every primitive") {
  constexpr double kH = 1e-4;
  constexpr double kTol = 1e-4;
  constexpr int kInstances = 20;

  auto run = [&](const char* tag, auto make_params, auto builder) {
    for (int inst = 0; inst < kInstances; ++inst) {
      ParameterSet params;
      make_params(params, static_cast<std::uint64_t>(inst));
      const auto report = gradcheck::check(params, builder, kH);
      INFO(tag << " instance " << inst);
      CHECK(report.max_rel_err < kTol);
    }
  };

  run(
      "linear",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("W", random_mat(s * 7 + 1, 3, 4));
        p.create("b", random_mat(s * 7 + 2, 1, 4));
        p.create("x", random_mat(s * 7 + 3, 5, 3));
      },
      [](Tape& t, ParameterSet& p) {
        return diffnet::sum(t, diffnet::linear(t, p.get("x"), p.get("W"), p.get("b")));
      });

  run(
      "relu+mul",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("x", random_mat(s * 11 + 1, 4, 4, 1.0, 5e-3));
        p.create("y", random_mat(s * 11 + 2, 4, 4, 1.0, 5e-3));
      },
      [](Tape& t, ParameterSet& p) {
        return diffnet::sum(t, diffnet::mul(t, diffnet::relu(t, p.get("x")), p.get("y")));
      });

  run(
      "max_pool_points",
      [](ParameterSet& p, std::uint64_t s) { p.create("x", random_mat(s * 13 + 1, 6, 5)); },
      [](Tape& t, ParameterSet& p) {
        // Quadratic readout makes the pooled value matter beyond a constant.
        Value pooled = diffnet::max_pool_points(t, p.get("x"));
        return diffnet::sum(t, diffnet::mul(t, pooled, pooled));
      });

  run(
      "concat",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("a", random_mat(s * 17 + 1, 1, 3));
        p.create("b", random_mat(s * 17 + 2, 1, 4));
      },
      [](Tape& t, ParameterSet& p) {
        Value c = diffnet::concat(t, p.get("a"), p.get("b"));
        return diffnet::mul(t, diffnet::l2_norm(t, c), diffnet::sum(t, c));
      });

  run(
      "concat_broadcast",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("left", random_mat(s * 19 + 1, 5, 2));
        p.create("right", random_mat(s * 19 + 2, 1, 3));
      },
      [](Tape& t, ParameterSet& p) {
        Value c = diffnet::concat_broadcast(t, p.get("left"), p.get("right"));
        return diffnet::l2_norm(t, c);
      });

  run(
      "softmax+log_shift",
      [](ParameterSet& p, std::uint64_t s) { p.create("x", random_mat(s * 23 + 1, 1, 6)); },
      [](Tape& t, ParameterSet& p) {
        Value sm = diffnet::softmax(t, p.get("x"));
        return diffnet::sum(t, diffnet::mul(t, sm, diffnet::log_shift(t, sm, 1e-12)));
      });

  run(
      "l2_norm",
      [](ParameterSet& p, std::uint64_t s) { p.create("x", random_mat(s * 29 + 1, 3, 3)); },
      [](Tape& t, ParameterSet& p) { return diffnet::l2_norm(t, p.get("x")); });

  run(
      "cosine",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("a", random_mat(s * 31 + 1, 1, 5));
        p.create("b", random_mat(s * 31 + 2, 1, 5));
      },
      [](Tape& t, ParameterSet& p) { return diffnet::cosine(t, p.get("a"), p.get("b")); });

  run(
      "add/sub/affine",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("a", random_mat(s * 37 + 1, 2, 3));
        p.create("b", random_mat(s * 37 + 2, 2, 3));
      },
      [](Tape& t, ParameterSet& p) {
        Value mix = diffnet::sub(t, diffnet::add(t, p.get("a"), p.get("b")),
                                 diffnet::affine(t, p.get("b"), 0.5, 1.0));
        return diffnet::l2_norm(t, mix);
      });

  run(
      "div",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("a", random_mat(s * 53 + 1, 2, 3));
        p.create("b", random_mat(s * 53 + 2, 2, 3, 1.0, 0.3));
      },
      [](Tape& t, ParameterSet& p) {
        return diffnet::sum(t, diffnet::div(t, p.get("a"), p.get("b")));
      });

  run(
      "standardize_row",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("x", random_mat(s * 59 + 1, 1, 7));
        p.create("w", random_mat(s * 59 + 2, 1, 7));
      },
      [](Tape& t, ParameterSet& p) {
        return diffnet::sum(t, diffnet::mul(t, diffnet::standardize_row(t, p.get("x")), p.get("w")));
      });

  run(
      "rows_normalize",
      [](ParameterSet& p, std::uint64_t s) {
        p.create("x", random_mat(s * 41 + 1, 4, 3, 1.0, 5e-2));
        p.create("w", random_mat(s * 41 + 2, 4, 3));
      },
      [](Tape& t, ParameterSet& p) {
        Value rows = diffnet::rows_normalize(t, p.get("x"));
        return diffnet::sum(t, diffnet::mul(t, rows, p.get("w")));
      });

  run(
      "rows_dot_mean",
      [](ParameterSet& p, std::uint64_t s) { p.create("x", random_mat(s * 43 + 1, 4, 3)); },
      [](Tape& t, ParameterSet& p) {
        return diffnet::rows_dot_mean(t, p.get("x"), random_mat(999, 4, 3));
      });

  run(
      "chamfer_to",
      [](ParameterSet& p, std::uint64_t s) { p.create("pts", random_mat(s * 47 + 1, 8, 3)); },
      [](Tape& t, ParameterSet& p) {
        return diffnet::chamfer_to(t, p.get("pts"), random_mat(998, 10, 3));
      });
}

TEST_CASE("max_pool gradient is one-hot per column and sums to upstream") {
  Tape t;
  ParameterSet params;
  params.create("x", random_mat(81, 7, 4));
  Value pooled = diffnet::max_pool_points(t, params.get("x"));
  t.backward(diffnet::sum(t, pooled));
  const Mat& g = params.at("x").grad;
  for (int j = 0; j < 4; ++j) {
    int nonzero = 0;
    double colsum = 0.0;
    for (int i = 0; i < 7; ++i) {
      if (g(i, j) != 0.0) ++nonzero;
      colsum += g(i, j);
    }
    CHECK(nonzero == 1);
    CHECK(colsum == 1.0);
  }

  SUBCASE("ties route to the lowest row index") {
    Tape t2;
    ParameterSet p2;
    Mat tied = Mat::Zero(3, 2);
    tied << 5, 1, 5, 2, 3, 2;  // col 0 ties rows 0/1; col 1 ties rows 1/2
    p2.create("x", tied);
    Value pooled2 = diffnet::max_pool_points(t2, p2.get("x"));
    t2.backward(diffnet::sum(t2, pooled2));
    CHECK(p2.at("x").grad(0, 0) == 1.0);
    CHECK(p2.at("x").grad(1, 0) == 0.0);
    CHECK(p2.at("x").grad(1, 1) == 1.0);
    CHECK(p2.at("x").grad(2, 1) == 0.0);
  }
}

TEST_CASE("determinism of forward passes") {
  auto run_once = [] {
    ParameterSet params;
    params.create("W", diffnet::he_normal(3, 8, 42));
    params.create("b", Mat::Zero(1, 8));
    Tape t;
    Value y = diffnet::max_pool_points(
        t, diffnet::relu(t, diffnet::linear(t, t.constant(random_mat(5, 16, 3)),
                                            params.get("W"), params.get("b"))));
    return Mat(y->value);
  };
  const Mat a = run_once();
  const Mat b = run_once();
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);  // bitwise within one build
}

TEST_CASE("adam") {
  SUBCASE("zero grads leave parameters unchanged") {
    ParameterSet params;
    params.create("w", Mat::Constant(1, 1, 0.7));
    params.zero_grads();
    diffnet::AdamState opt;
    opt.step(params, {});
    CHECK(params.at("w").value(0, 0) == 0.7);
  }

  SUBCASE("first step with unit gradient moves by about lr") {
    ParameterSet params;
    params.create("w", Mat::Constant(1, 1, 1.0));
    params.get("w")->grad(0, 0) = 1.0;
    diffnet::AdamState opt;
    diffnet::AdamConfig cfg;  // lr 1e-3
    opt.step(params, cfg);
    // Closed form: m_hat = 1, v_hat = 1 => delta = lr / (1 + eps).
    const double want = 1.0 - cfg.lr / (1.0 + cfg.eps);
    CHECK(params.at("w").value(0, 0) == doctest::Approx(want).epsilon(1e-12));
  }

  SUBCASE("two identical runs give identical trajectories") {
    auto run = [] {
      ParameterSet params;
      params.create("w", diffnet::he_normal(4, 4, 3));
      diffnet::AdamState opt;
      for (int step = 0; step < 25; ++step) {
        params.zero_grads();
        Tape t;
        Value loss = diffnet::l2_norm(t, params.get("w"));
        t.backward(loss);
        opt.step(params, {});
      }
      return Mat(params.at("w").value);
    };
    const Mat a = run();
    const Mat b = run();
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("checkpoint round trip and validation") {
  const auto path = std::filesystem::temp_directory_path() / "dvd_test_ckpt.dvdr";

  ParameterSet params;
  params.create("alpha", random_mat(91, 3, 5));
  params.create("beta", random_mat(92, 1, 7));
  diffnet::save_checkpoint(path, diffnet::to_records(params));

  SUBCASE("values survive byte-exactly") {
    const auto records = diffnet::load_checkpoint(path);
    REQUIRE(records.size() == 2);
    CHECK(records[0].first == "alpha");
    CHECK((records[0].second - params.at("alpha").value).cwiseAbs().maxCoeff() == 0.0);
    CHECK((records[1].second - params.at("beta").value).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("shape mismatches are rejected") {
    ParameterSet other;
    other.create("alpha", Mat::Zero(3, 5));
    other.create("beta", Mat::Zero(2, 7));  // wrong shape
    CHECK_THROWS_AS(diffnet::assign_records(other, diffnet::load_checkpoint(path)), ShapeError);
  }

  SUBCASE("missing tensors are rejected, extras ignored") {
    ParameterSet extra;
    extra.create("alpha", Mat::Zero(3, 5));
    extra.create("beta", Mat::Zero(1, 7));
    extra.create("gamma", Mat::Zero(1, 1));
    CHECK_THROWS_AS(diffnet::assign_records(extra, diffnet::load_checkpoint(path)), IoError);

    ParameterSet fewer;
    fewer.create("alpha", Mat::Zero(3, 5));
    diffnet::assign_records(fewer, diffnet::load_checkpoint(path));  // beta ignored
    CHECK((fewer.at("alpha").value - params.at("alpha").value).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("bad magic is rejected") {
    const auto bad = std::filesystem::temp_directory_path() / "dvd_test_bad.dvdr";
    std::ofstream(bad) << "not a checkpoint";
    CHECK_THROWS_AS(diffnet::load_checkpoint(bad), IoError);
  }
}
