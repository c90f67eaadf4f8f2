#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvd/model.hpp"
#include "dvd/solver.hpp"
#include "dvd/trainer.hpp"

namespace dvd::eval {

struct EvalRecord {
  geom3d::RigidTransform gt;
  geom3d::RigidTransform estimate;
  double rot_err_deg = 0.0;   // geodesic rotation error
  double trans_err = 0.0;     // Euclidean norm of the translation residual
  double runtime_ms = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Fraction of records with rotation error strictly below rot_thresh_deg AND
/// translation error strictly below trans_thresh. Throws InvalidInput on an
/// empty record list.
double recall(const std::vector<EvalRecord>& records, double rot_thresh_deg,
              double trans_thresh);

/// Rotation metrics over pooled Euler-angle residuals (degrees, intrinsic
/// Z-Y-X); translation metrics over pooled componentwise residuals.
struct MetricsTable {
  double rmse_rot_deg = 0.0;
  double mae_rot_deg = 0.0;
  double rmse_trans = 0.0;
  double mae_trans = 0.0;
};
MetricsTable metrics_table(const std::vector<EvalRecord>& records);

/// "rmse_rot_deg,mae_rot_deg,rmse_trans,mae_trans" with 3-decimal rotation
/// and 3-significant-digit translation columns.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsTable& table);

/// Evaluation pairs are built exactly like training samples (fresh shapes per
/// seed), then optionally corrupted.
struct PairProtocol {
  int pair_count = 100;
  double noise_sigma = 0.0;
  double keep_fraction = 1.0;
  std::uint64_t seed = 1;
};
std::vector<trainer::TrainSample> build_eval_pairs(const trainer::TrainConfig& cfg,
                                                   const PairProtocol& protocol);

enum class Method { IclK, Icp };

/// Registers every pair and collects per-pair records, ordered by pair index.
std::vector<EvalRecord> evaluate_pairs(const model::Model* m,
                                       const std::vector<trainer::TrainSample>& pairs,
                                       const solver::SolverConfig& solver_cfg, Method method,
                                       int icp_max_iters = 50, double icp_tol = 1e-12);

struct SweepRow {
  double value = 0.0;
  double recall = 0.0;
  MetricsTable metrics;
};

/// CSV with header "value,recall,rmse_rot_deg,mae_rot_deg,rmse_trans,mae_trans".
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct ExperimentConfig {
  trainer::TrainConfig train;            // dataset/shape protocol for pairs
  solver::SolverConfig solver;
  PairProtocol protocol;
  double rot_thresh_deg = 2.0;           // success thresholds
  double trans_thresh = 0.01;
  std::vector<double> noise_sigmas = {0.0, 0.01, 0.02, 0.04};
  std::vector<double> keep_fractions = {1.0, 0.9, 0.8, 0.7};
  std::vector<int> local_sizes = {32, 64, 96};
};

/// Registers the protocol's pairs per noise level with the given model.
std::vector<SweepRow> run_noise_sweep(const model::Model& m, const ExperimentConfig& cfg);
/// Same over partial-visibility keep fractions.
std::vector<SweepRow> run_partial_sweep(const model::Model& m, const ExperimentConfig& cfg);
/// Trains one model per local size (expensive) and evaluates each.
std::vector<SweepRow> run_localsize_ablation(const ExperimentConfig& cfg);

/// Chamfer distance between a shape's cloud and its z-rotated copy, per angle
/// (radians). `shape` is "cylinder" (a structured rotationally symmetric
/// shell) or a procedural generator name sampled at `points`.
std::vector<std::pair<double, double>> run_rotation_awareness_sweep(
    const std::string& shape, const std::vector<double>& angles_rad, int points = 512,
    std::uint64_t seed = 7);
std::string rotation_sweep_csv(const std::vector<std::pair<double, double>>& rows);

}  // namespace dvd::eval
