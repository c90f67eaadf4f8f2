#include "dvd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "dvd/cloud_io.hpp"
#include "dvd/configio.hpp"
#include "dvd/errors.hpp"
#include "dvd/eval.hpp"
#include "dvd/rng.hpp"
#include "dvd/trainer.hpp"

namespace dvd::cli {

namespace {

nlohmann::json transform_json(const geom3d::RigidTransform& T) {
  // Row-major 12-real layout: the 9 rotation entries, then the translation.
  nlohmann::json arr = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) arr.push_back(T.R(i, j));
  for (int i = 0; i < 3; ++i) arr.push_back(T.t(i));
  return arr;
}

nlohmann::json registration_json(const solver::RegistrationResult& r) {
  return {{"transform", transform_json(r.transform)},
          {"residual_history", r.residual_history},
          {"iterations", r.iterations_used},
          {"converged", r.converged}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd, bool config_required = false) {
    auto* opt = cmd->add_option("--config", config_path, "experiment config JSON");
    if (config_required) opt->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option_function<std::uint64_t>(
        "--seed", [this](std::uint64_t v) { seed = v; }, "seed override");
  }

  nlohmann::json config_json() const {
    if (config_path.empty()) return nlohmann::json::object();
    return configio::load_json(config_path);
  }
};

int run_impl(const std::vector<std::string>& args) {
  CLI::App app{"descriptor-based rigid point cloud registration toolkit"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic pair dataset to disk");
  CommonFlags synth_flags;
  synth_flags.attach(synth);

  // ---- train ----
  auto* train = app.add_subcommand("train", "train a descriptor model");
  CommonFlags train_flags;
  train_flags.attach(train);
  std::string resume_path;
  train->add_option("--resume", resume_path, "training checkpoint to continue from")
      ->check(CLI::ExistingFile);

  // ---- register ----
  auto* reg = app.add_subcommand("register", "register two PLY clouds with a trained model");
  std::string reg_src, reg_tgt, reg_checkpoint, reg_out_file;
  reg->add_option("source", reg_src, "source PLY")->required()->check(CLI::ExistingFile);
  reg->add_option("target", reg_tgt, "target PLY")->required()->check(CLI::ExistingFile);
  reg->add_option("--checkpoint", reg_checkpoint, "model checkpoint (.dvdr)")
      ->required()
      ->check(CLI::ExistingFile);
  reg->add_option("--out", reg_out_file, "result JSON path (default: stdout)");
  CommonFlags reg_flags;  // --config/--seed accepted for solver settings
  reg->add_option("--config", reg_flags.config_path, "experiment config JSON")
      ->check(CLI::ExistingFile);

  // ---- icp ----
  auto* icp = app.add_subcommand("icp", "register two PLY clouds with the ICP baseline");
  std::string icp_src, icp_tgt, icp_out_file;
  int icp_iters = 50;
  double icp_tol = 1e-12;
  icp->add_option("source", icp_src, "source PLY")->required()->check(CLI::ExistingFile);
  icp->add_option("target", icp_tgt, "target PLY")->required()->check(CLI::ExistingFile);
  icp->add_option("--max-iters", icp_iters, "iteration cap");
  icp->add_option("--tol", icp_tol, "MSE improvement stop tolerance");
  icp->add_option("--out", icp_out_file, "result JSON path (default: stdout)");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "run a registration experiment per config");
  CommonFlags eval_flags;
  eval_flags.attach(eval_cmd, /*config_required=*/true);
  std::string eval_checkpoint;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint (.dvdr)")
      ->required()
      ->check(CLI::ExistingFile);
  std::string eval_method = "iclk";
  eval_cmd->add_option("--method", eval_method, "iclk or icp")
      ->check(CLI::IsMember({"iclk", "icp"}));

  // ---- sweep ----
  auto* sweep = app.add_subcommand("sweep", "noise / partial / ablation / rotation sweeps");
  std::string sweep_kind;
  sweep->add_option("kind", sweep_kind, "noise|partial|ablation|rotation")
      ->required()
      ->check(CLI::IsMember({"noise", "partial", "ablation", "rotation"}));
  CommonFlags sweep_flags;
  sweep_flags.attach(sweep, /*config_required=*/false);
  std::string sweep_checkpoint, sweep_shape = "blob";
  sweep->add_option("--checkpoint", sweep_checkpoint, "model checkpoint (.dvdr)")
      ->check(CLI::ExistingFile);
  sweep->add_option("--shape", sweep_shape, "shape for the rotation sweep");

  try {
    std::vector<std::string> rest(args.begin(), args.end());
    std::reverse(rest.begin(), rest.end());
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth->parsed()) {
    trainer::TrainConfig cfg = configio::train_config(synth_flags.config_json());
    if (synth_flags.seed) cfg.seed = *synth_flags.seed;
    const auto dataset = trainer::build_dataset(cfg);
    std::filesystem::create_directories(synth_flags.out_dir);
    const std::filesystem::path out(synth_flags.out_dir);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "pair_%04zu", i);
      cloud::save_ply(dataset[i].source, out / (std::string(name) + "_src.ply"));
      cloud::save_ply(dataset[i].target, out / (std::string(name) + "_tgt.ply"));
      nlohmann::json gt = {{"transform", transform_json(dataset[i].gt)}};
      write_text(out / (std::string(name) + "_gt.json"), gt.dump(2) + "\n");
    }
    std::cout << "wrote " << dataset.size() << " pairs to " << out.string() << "\n";
    return 0;
  }

  if (train->parsed()) {
    trainer::TrainConfig cfg = configio::train_config(train_flags.config_json());
    if (train_flags.seed) cfg.seed = *train_flags.seed;
    model::Model m(cfg.model_config(), derive_seed(cfg.seed, 0x4D4F44));
    std::optional<std::filesystem::path> resume;
    if (!resume_path.empty()) resume = resume_path;
    const auto result = trainer::train(m, cfg, train_flags.out_dir, resume);
    std::cout << "checkpoint: " << result.checkpoint_path.string() << "\n"
              << "log: " << result.log_path.string() << "\n";
    return 0;
  }

  if (reg->parsed()) {
    const model::Model m = model::Model::load(reg_checkpoint);
    solver::SolverConfig scfg;
    if (!reg_flags.config_path.empty())
      scfg = configio::solver_config(configio::load_json(reg_flags.config_path));
    const auto result =
        solver::register_iclk(m, cloud::load_ply(reg_src), cloud::load_ply(reg_tgt), scfg);
    const std::string text = registration_json(result).dump(2) + "\n";
    if (reg_out_file.empty()) std::cout << text;
    else write_text(reg_out_file, text);
    return 0;
  }

  if (icp->parsed()) {
    const auto result =
        solver::register_icp(cloud::load_ply(icp_src), cloud::load_ply(icp_tgt), icp_iters, icp_tol);
    const std::string text = registration_json(result).dump(2) + "\n";
    if (icp_out_file.empty()) std::cout << text;
    else write_text(icp_out_file, text);
    return 0;
  }

  if (eval_cmd->parsed()) {
    eval::ExperimentConfig cfg = configio::experiment_config(eval_flags.config_json());
    if (eval_flags.seed) cfg.protocol.seed = *eval_flags.seed;
    const model::Model m = model::Model::load(eval_checkpoint);
    const auto pairs = eval::build_eval_pairs(cfg.train, cfg.protocol);
    const auto records = eval::evaluate_pairs(
        &m, pairs, cfg.solver, eval_method == "iclk" ? eval::Method::IclK : eval::Method::Icp);
    const auto table = eval::metrics_table(records);
    nlohmann::json summary = {
        {"pairs", records.size()},
        {"recall", eval::recall(records, cfg.rot_thresh_deg, cfg.trans_thresh)},
        {"rot_thresh_deg", cfg.rot_thresh_deg},
        {"trans_thresh", cfg.trans_thresh},
        {"rmse_rot_deg", table.rmse_rot_deg},
        {"mae_rot_deg", table.mae_rot_deg},
        {"rmse_trans", table.rmse_trans},
        {"mae_trans", table.mae_trans}};
    std::filesystem::create_directories(eval_flags.out_dir);
    write_text(std::filesystem::path(eval_flags.out_dir) / "eval_summary.json",
               summary.dump(2) + "\n");
    std::cout << summary.dump(2) << "\n";
    return 0;
  }

  if (sweep->parsed()) {
    std::filesystem::create_directories(sweep_flags.out_dir);
    const std::filesystem::path out(sweep_flags.out_dir);
    eval::ExperimentConfig cfg = configio::experiment_config(sweep_flags.config_json());
    if (sweep_flags.seed) cfg.protocol.seed = *sweep_flags.seed;

    if (sweep_kind == "rotation") {
      std::vector<double> angles;
      for (int i = 0; i <= 30; ++i) angles.push_back(0.02 * i);  // [0, 0.6] rad
      const auto rows = eval::run_rotation_awareness_sweep(sweep_shape, angles);
      write_text(out / ("rotation_sweep_" + sweep_shape + ".csv"), eval::rotation_sweep_csv(rows));
      std::cout << eval::rotation_sweep_csv(rows);
      return 0;
    }
    if (sweep_kind == "ablation") {
      const auto rows = eval::run_localsize_ablation(cfg);
      write_text(out / "localsize_ablation.csv", eval::sweep_csv(rows));
      std::cout << eval::sweep_csv(rows);
      return 0;
    }
    if (sweep_checkpoint.empty())
      throw InvalidInput("sweep: --checkpoint is required for noise/partial sweeps");
    const model::Model m = model::Model::load(sweep_checkpoint);
    const auto rows =
        sweep_kind == "noise" ? eval::run_noise_sweep(m, cfg) : eval::run_partial_sweep(m, cfg);
    write_text(out / (sweep_kind + "_sweep.csv"), eval::sweep_csv(rows));
    std::cout << eval::sweep_csv(rows);
    return 0;
  }

  return 1;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  try {
    return run_impl(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dvd::cli
