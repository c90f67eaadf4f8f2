#include "dvd/configio.hpp"

#include <fstream>

#include "dvd/errors.hpp"

namespace dvd::configio {

namespace {

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what(), 0);
  }
}

solver::SolverConfig solver_config(const nlohmann::json& root) {
  solver::SolverConfig cfg;
  if (!root.contains("solver")) return cfg;
  const auto& j = root.at("solver");
  maybe(j, "max_iterations", cfg.max_iterations);
  maybe(j, "delta_threshold", cfg.delta_threshold);
  maybe(j, "jacobian_step", cfg.jacobian_step);
  maybe(j, "damping", cfg.damping);
  return cfg;
}

trainer::TrainConfig train_config(const nlohmann::json& root) {
  trainer::TrainConfig cfg;
  cfg.solver = solver_config(root);
  if (!root.contains("train")) return cfg;
  const auto& j = root.at("train");
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "points_per_cloud", cfg.points_per_cloud);
  maybe(j, "descriptor_width", cfg.descriptor_width);
  maybe(j, "local_size", cfg.local_size);
  maybe(j, "lambda1", cfg.lambda1);
  maybe(j, "lambda2", cfg.lambda2);
  maybe(j, "rot_max_deg", cfg.rot_max_deg);
  maybe(j, "trans_max", cfg.trans_max);
  maybe(j, "seed", cfg.seed);
  maybe(j, "shape_count", cfg.shape_count);
  maybe(j, "generators", cfg.generators);
  maybe(j, "mesh_paths", cfg.mesh_paths);
  maybe(j, "grid_side", cfg.grid_side);
  maybe(j, "normal_hidden", cfg.normal_hidden);
  maybe(j, "outlier_cap_scale", cfg.outlier_cap_scale);
  maybe(j, "use_local_consistency", cfg.use_local_consistency);
  maybe(j, "normals_knn", cfg.normals_knn);
  maybe(j, "checkpoint_interval", cfg.checkpoint_interval);
  maybe(j, "registration_eval_interval", cfg.registration_eval_interval);
  maybe(j, "lr", cfg.adam.lr);
  maybe(j, "beta1", cfg.adam.beta1);
  maybe(j, "beta2", cfg.adam.beta2);
  maybe(j, "adam_eps", cfg.adam.eps);
  return cfg;
}

eval::ExperimentConfig experiment_config(const nlohmann::json& root) {
  eval::ExperimentConfig cfg;
  cfg.train = train_config(root);
  cfg.solver = solver_config(root);
  if (root.contains("eval")) {
    const auto& j = root.at("eval");
    maybe(j, "pair_count", cfg.protocol.pair_count);
    maybe(j, "seed", cfg.protocol.seed);
    maybe(j, "noise_sigma", cfg.protocol.noise_sigma);
    maybe(j, "keep_fraction", cfg.protocol.keep_fraction);
    maybe(j, "rot_thresh_deg", cfg.rot_thresh_deg);
    maybe(j, "trans_thresh", cfg.trans_thresh);
  }
  if (root.contains("sweep")) {
    const auto& j = root.at("sweep");
    maybe(j, "noise_sigmas", cfg.noise_sigmas);
    maybe(j, "keep_fractions", cfg.keep_fractions);
    maybe(j, "local_sizes", cfg.local_sizes);
  }
  return cfg;
}

}  // namespace dvd::configio
