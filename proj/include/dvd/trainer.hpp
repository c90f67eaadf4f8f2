#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dvd/losses.hpp"
#include "dvd/model.hpp"
#include "dvd/pointcloud.hpp"
#include "dvd/solver.hpp"

namespace dvd::trainer {

struct TrainConfig {
  int epochs = 100;
  int points_per_cloud = 256;
  int descriptor_width = 128;  // K
  int local_size = 64;         // N_l
  double lambda1 = 0.5;
  double lambda2 = 0.1;
  double rot_max_deg = 45.0;
  double trans_max = 0.5;
  diffnet::AdamConfig adam;
  std::uint64_t seed = 0;

  int shape_count = 200;
  std::vector<std::string> generators = {"blob"};
  std::vector<std::string> mesh_paths;  // optional external OFF meshes

  int grid_side = 16;
  int normal_hidden = 64;
  double outlier_cap_scale = 3.0;  // cap = scale * median distance to barycenter
  bool use_local_consistency = true;
  int normals_knn = 16;  // for meshes that lack normals (PLY inputs)

  int checkpoint_interval = 0;         // epochs between checkpoints; 0 = final only
  int registration_eval_interval = 1;  // run the frozen IC-LK pass every k epochs; 0 = never
  solver::SolverConfig solver;

  model::ModelConfig model_config() const {
    return {descriptor_width, grid_side, normal_hidden};
  }
};

/// One training pair: the target is an independently resampled copy of the
/// same shape, transformed by the ground truth.
struct TrainSample {
  cloud::PointCloud source;
  cloud::PointCloud target;
  geom3d::RigidTransform gt;
};

/// Deterministic per config.seed. Shapes come from the configured procedural
/// generators and/or mesh files; both clouds are unit-sphere normalized before
/// the transform is applied, and carry normals.
std::vector<TrainSample> build_dataset(const TrainConfig& cfg);

struct EpochReport {
  losses::LossBreakdown mean;
  double mean_rot_err_deg = std::numeric_limits<double>::quiet_NaN();
  double mean_trans_err = std::numeric_limits<double>::quiet_NaN();
  int samples = 0;
};

/// One pass over the dataset: per sample, one optimizer step on the total
/// loss, then (on eval epochs) a frozen-parameter IC-LK registration whose
/// error against the ground truth is recorded for logging only.
EpochReport train_epoch(model::Model& m, diffnet::AdamState& opt,
                        const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                        int epoch_index);

struct TrainResult {
  std::vector<EpochReport> log;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
};

/// Runs all epochs, writing "model.dvdr" (+sidecar), "train_log.csv" and
/// periodic checkpoints under out_dir. Pass `resume_from` to continue a run
/// from a training checkpoint (optimizer state and epoch counter included).
TrainResult train(model::Model& m, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from = std::nullopt);

/// CSV layout used by train(): "epoch,total,primary,chamfer,normal,rot_err_deg,trans_err".
std::string train_log_header();
std::string train_log_row(int epoch, const EpochReport& report);

}  // namespace dvd::trainer
