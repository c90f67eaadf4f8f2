#pragma once

#include <filesystem>
#include <json.hpp>

#include "dvd/eval.hpp"
#include "dvd/trainer.hpp"

namespace dvd::configio {

/// All sections are optional; absent fields keep their defaults.
/// Layout:
///   { "train": {...}, "solver": {...}, "eval": {...}, "sweep": {...} }
trainer::TrainConfig train_config(const nlohmann::json& j);
solver::SolverConfig solver_config(const nlohmann::json& j);
eval::ExperimentConfig experiment_config(const nlohmann::json& j);

nlohmann::json load_json(const std::filesystem::path& path);

}  // namespace dvd::configio
