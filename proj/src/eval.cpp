#include "dvd/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dvd/cloud_ops.hpp"
#include "dvd/errors.hpp"
#include "dvd/losses.hpp"
#include "dvd/rng.hpp"
#include "dvd/shapes.hpp"

namespace dvd::eval {

double recall(const std::vector<EvalRecord>& records, double rot_thresh_deg,
              double trans_thresh) {
  if (records.empty()) throw InvalidInput("recall: no records");
  int hits = 0;
  for (const auto& r : records)
    if (r.rot_err_deg < rot_thresh_deg && r.trans_err < trans_thresh) ++hits;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

MetricsTable metrics_table(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw InvalidInput("metrics_table: no records");
  std::vector<geom3d::Vec3> euler_pred, euler_gt;
  euler_pred.reserve(records.size());
  euler_gt.reserve(records.size());
  double sq_t = 0.0, ab_t = 0.0;
  for (const auto& r : records) {
    euler_pred.push_back(geom3d::euler_zyx_deg(r.estimate.R));
    euler_gt.push_back(geom3d::euler_zyx_deg(r.gt.R));
    const geom3d::Vec3 dt = r.estimate.t - r.gt.t;
    sq_t += dt.squaredNorm();
    ab_t += dt.cwiseAbs().sum();
  }
  const auto [rmse_r, mae_r] = geom3d::euler_rmse_mae(euler_pred, euler_gt);
  const double n = 3.0 * static_cast<double>(records.size());
  return {rmse_r, mae_r, std::sqrt(sq_t / n), ab_t / n};
}

std::string metrics_csv_header() { return "rmse_rot_deg,mae_rot_deg,rmse_trans,mae_trans"; }

std::string metrics_csv_row(const MetricsTable& t) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.3g,%.3g", t.rmse_rot_deg, t.mae_rot_deg,
                t.rmse_trans, t.mae_trans);
  return buf;
}

std::vector<trainer::TrainSample> build_eval_pairs(const trainer::TrainConfig& cfg,
                                                   const PairProtocol& protocol) {
  trainer::TrainConfig pair_cfg = cfg;
  pair_cfg.shape_count = protocol.pair_count;
  pair_cfg.seed = protocol.seed;
  auto pairs = trainer::build_dataset(pair_cfg);
  if (protocol.noise_sigma > 0.0 || protocol.keep_fraction < 1.0) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      auto& pair = pairs[i];
      if (protocol.noise_sigma > 0.0) {
        pair.source = cloud::add_gaussian_noise(pair.source, protocol.noise_sigma,
                                                derive_seed(protocol.seed, 0x4E5331, i));
        pair.target = cloud::add_gaussian_noise(pair.target, protocol.noise_sigma,
                                                derive_seed(protocol.seed, 0x4E5332, i));
      }
      if (protocol.keep_fraction < 1.0) {
        pair.source = cloud::crop_partial(pair.source, protocol.keep_fraction,
                                          derive_seed(protocol.seed, 0x435031, i));
        pair.target = cloud::crop_partial(pair.target, protocol.keep_fraction,
                                          derive_seed(protocol.seed, 0x435032, i));
      }
    }
  }
  return pairs;
}

std::vector<EvalRecord> evaluate_pairs(const model::Model* m,
                                       const std::vector<trainer::TrainSample>& pairs,
                                       const solver::SolverConfig& solver_cfg, Method method,
                                       int icp_max_iters, double icp_tol) {
  if (method == Method::IclK && m == nullptr)
    throw InvalidInput("evaluate_pairs: descriptor registration needs a model");
  std::vector<EvalRecord> records;
  records.reserve(pairs.size());
  for (const auto& pair : pairs) {
    const auto start = std::chrono::steady_clock::now();
    const solver::RegistrationResult reg =
        method == Method::IclK
            ? solver::register_iclk(*m, pair.source, pair.target, solver_cfg)
            : solver::register_icp(pair.source, pair.target, icp_max_iters, icp_tol);
    const auto stop = std::chrono::steady_clock::now();

    EvalRecord rec;
    rec.gt = pair.gt;
    rec.estimate = reg.transform;
    rec.rot_err_deg = geom3d::rotation_error_deg(reg.transform.R, pair.gt.R);
    rec.trans_err = (reg.transform.t - pair.gt.t).norm();
    rec.runtime_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    rec.iterations = reg.iterations_used;
    rec.converged = reg.converged;
    records.push_back(rec);
  }
  return records;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "value,recall," << metrics_csv_header() << "\n";
  char buf[64];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.4f,", row.value, row.recall);
    out << buf << metrics_csv_row(row.metrics) << "\n";
  }
  return out.str();
}

namespace {

SweepRow sweep_point(const model::Model& m, const ExperimentConfig& cfg, double value,
                     const PairProtocol& protocol) {
  const auto pairs = build_eval_pairs(cfg.train, protocol);
  const auto records = evaluate_pairs(&m, pairs, cfg.solver, Method::IclK);
  return {value, recall(records, cfg.rot_thresh_deg, cfg.trans_thresh), metrics_table(records)};
}

}  // namespace

std::vector<SweepRow> run_noise_sweep(const model::Model& m, const ExperimentConfig& cfg) {
  if (cfg.noise_sigmas.empty()) throw InvalidInput("run_noise_sweep: empty sigma list");
  std::vector<SweepRow> rows;
  for (double sigma : cfg.noise_sigmas) {
    PairProtocol protocol = cfg.protocol;
    protocol.noise_sigma = sigma;
    rows.push_back(sweep_point(m, cfg, sigma, protocol));
  }
  return rows;
}

std::vector<SweepRow> run_partial_sweep(const model::Model& m, const ExperimentConfig& cfg) {
  if (cfg.keep_fractions.empty()) throw InvalidInput("run_partial_sweep: empty fraction list");
  std::vector<SweepRow> rows;
  for (double keep : cfg.keep_fractions) {
    PairProtocol protocol = cfg.protocol;
    protocol.keep_fraction = keep;
    rows.push_back(sweep_point(m, cfg, keep, protocol));
  }
  return rows;
}

std::vector<SweepRow> run_localsize_ablation(const ExperimentConfig& cfg) {
  if (cfg.local_sizes.empty()) throw InvalidInput("run_localsize_ablation: empty size list");
  std::vector<SweepRow> rows;
  for (int n_local : cfg.local_sizes) {
    trainer::TrainConfig train_cfg = cfg.train;
    train_cfg.local_size = n_local;
    model::Model m(train_cfg.model_config(), derive_seed(train_cfg.seed, 0x4D4F44));
    diffnet::AdamState opt;
    const auto dataset = trainer::build_dataset(train_cfg);
    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch)
      trainer::train_epoch(m, opt, dataset, train_cfg, epoch);
    rows.push_back(sweep_point(m, cfg, static_cast<double>(n_local), cfg.protocol));
  }
  return rows;
}

std::vector<std::pair<double, double>> run_rotation_awareness_sweep(
    const std::string& shape, const std::vector<double>& angles_rad, int points,
    std::uint64_t seed) {
  cloud::PointCloud base;
  if (shape == "cylinder") {
    // Slender lateral shell; exactly symmetric under z-rotation up to the
    // angular grid spacing.
    const int segments = 128;
    const int rings = std::max(1, points / segments);
    auto [normalized, center, scale] =
        cloud::normalize_unit_sphere(cloud::cylinder_shell_grid(0.15, 2.0, rings, segments));
    base = std::move(normalized);
  } else {
    auto [normalized, center, scale] = cloud::normalize_unit_sphere(
        cloud::sample_mesh(cloud::make_shape(shape, seed), points, derive_seed(seed, 0x524F54)));
    base = std::move(normalized);
  }

  std::vector<std::pair<double, double>> rows;
  rows.reserve(angles_rad.size());
  for (double angle : angles_rad) {
    geom3d::RigidTransform rot;
    rot.R = geom3d::exp_se3(geom3d::Twist(geom3d::Vec3(0, 0, angle), geom3d::Vec3::Zero())).R;
    rows.emplace_back(angle, losses::chamfer(base, cloud::apply(rot, base)));
  }
  return rows;
}

std::string rotation_sweep_csv(const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream out;
  out << "angle_rad,chamfer\n";
  char buf[80];
  for (const auto& [angle, chamfer] : rows) {
    std::snprintf(buf, sizeof(buf), "%.6g,%.10g\n", angle, chamfer);
    out << buf;
  }
  return out.str();
}

}  // namespace dvd::eval
