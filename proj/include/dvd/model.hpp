#pragma once

#include <cstdint>
#include <filesystem>

#include "dvd/diffnet.hpp"
#include "dvd/pointcloud.hpp"

namespace dvd::model {

/// K-dimensional global descriptor (inference-side representation).
using Descriptor = Eigen::RowVectorXd;

struct ModelConfig {
  int descriptor_width = 128;  // K; 1024 at full scale, 128 for desk runs
  int grid_side = 16;          // folding grid is grid_side^2 points
  int normal_hidden = 64;      // hidden width of the normal head

  bool operator==(const ModelConfig&) const = default;
};

/// The trainable network: a shared per-point MLP encoder (3-64-64-64-128-K)
/// with columnwise max-pool, a 2K->K metric layer over concatenated
/// descriptors, a two-stage folding decoder (width 128), and a small normal
/// head on (point ++ descriptor) inputs.
class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  diffnet::ParameterSet& params() { return params_; }
  const diffnet::ParameterSet& params() const { return params_; }

  // ---- training-graph heads (gradients flow into the parameters) ----

  /// Global descriptor of an (n,3) point matrix: permutation- and
  /// duplication-invariant by construction.
  diffnet::Value encode(diffnet::Tape& t, const Eigen::MatrixXd& pts);

  /// Metric layer applied to (original ++ transformed), in that order.
  diffnet::Value feature_change(diffnet::Tape& t, diffnet::Value d_orig,
                                diffnet::Value d_trans);

  /// Folds the unit-square lattice twice, conditioned on the descriptor;
  /// output is (grid_side^2, 3).
  diffnet::Value decode(diffnet::Tape& t, diffnet::Value descriptor);

  /// Unit normals predicted for each point of `pts` given the cloud
  /// descriptor; output is (n,3) with unit rows.
  diffnet::Value normal_head(diffnet::Tape& t, const Eigen::MatrixXd& pts,
                             diffnet::Value descriptor);

  // ---- inference paths (no tape, parameters read-only) ----

  Descriptor encode_inference(const cloud::PointCloud& cloud) const;
  Descriptor encode_inference(const Eigen::MatrixXd& pts) const;
  Eigen::MatrixXd decode_inference(const Descriptor& descriptor) const;

  /// Normal estimate for one point; explicitly unit-normalized. Throws
  /// NumericError when the raw head output has norm < 1e-12.
  Eigen::Vector3d estimate_normal(const Eigen::Vector3d& point, const Descriptor& d) const;

  /// Writes the checkpoint plus a JSON hyperparameter sidecar
  /// ("<path>.json"); load cross-validates the sidecar against the format.
  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

  /// Just the hyperparameter sidecar for a checkpoint at `checkpoint_path`.
  void save_sidecar(const std::filesystem::path& checkpoint_path) const;

  /// The (grid_side^2, 2) unit-square lattice used by the decoder.
  static Eigen::MatrixXd unit_square_grid(int side);

 private:
  ModelConfig cfg_;
  diffnet::ParameterSet params_;
  Eigen::MatrixXd grid_;
};

}  // namespace dvd::model
