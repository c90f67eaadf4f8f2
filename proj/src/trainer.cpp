#include "dvd/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "dvd/checkpoint.hpp"
#include "dvd/cloud_io.hpp"
#include "dvd/cloud_ops.hpp"
#include "dvd/errors.hpp"
#include "dvd/rng.hpp"
#include "dvd/shapes.hpp"

namespace dvd::trainer {

namespace {

// Seed stream tags.
constexpr std::uint64_t kShapeTag = 0x53484150;   // shape geometry
constexpr std::uint64_t kSourceTag = 0x53414D31;  // source sampling
constexpr std::uint64_t kTargetTag = 0x53414D32;  // target resampling
constexpr std::uint64_t kPoseTag = 0x504F5345;    // ground-truth transform

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1 || cfg.points_per_cloud < 1 || cfg.descriptor_width < 1 ||
      cfg.local_size < 1 || cfg.shape_count < 1)
    throw InvalidInput("TrainConfig: counts must be >= 1");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0)
    throw InvalidInput("TrainConfig: lambda weights must be nonnegative");
}

}  // namespace

std::vector<TrainSample> build_dataset(const TrainConfig& cfg) {
  validate(cfg);
  if (cfg.generators.empty() && cfg.mesh_paths.empty())
    throw InvalidInput("build_dataset: need at least one shape source");

  // Pre-load external meshes once; procedural shapes are generated per sample.
  std::vector<cloud::TriangleMesh> meshes;
  meshes.reserve(cfg.mesh_paths.size());
  for (const auto& path : cfg.mesh_paths) meshes.push_back(cloud::load_off(path));

  const std::size_t source_count = cfg.generators.size() + meshes.size();
  std::vector<TrainSample> dataset;
  dataset.reserve(static_cast<std::size_t>(cfg.shape_count));
  for (int i = 0; i < cfg.shape_count; ++i) {
    const std::size_t which = static_cast<std::size_t>(i) % source_count;
    cloud::TriangleMesh mesh;
    if (which < cfg.generators.size()) {
      mesh = cloud::make_shape(cfg.generators[which],
                               derive_seed(cfg.seed, kShapeTag, static_cast<std::uint64_t>(i)));
    } else {
      mesh = meshes[which - cfg.generators.size()];
    }
    // One normalization per shape: both samples share the frame, so the
    // ground-truth transform relates them without a scale/center mismatch.
    mesh = cloud::normalize_mesh_unit_sphere(mesh);

    TrainSample sample;
    sample.source = cloud::sample_mesh(mesh, cfg.points_per_cloud,
                                       derive_seed(cfg.seed, kSourceTag, static_cast<std::uint64_t>(i)));
    cloud::PointCloud resampled = cloud::sample_mesh(
        mesh, cfg.points_per_cloud, derive_seed(cfg.seed, kTargetTag, static_cast<std::uint64_t>(i)));
    if (!sample.source.has_normals())
      sample.source = cloud::estimate_normals_pca(sample.source, cfg.normals_knn);
    if (!resampled.has_normals())
      resampled = cloud::estimate_normals_pca(resampled, cfg.normals_knn);
    sample.gt = geom3d::sample_transform(derive_seed(cfg.seed, kPoseTag, static_cast<std::uint64_t>(i)),
                                         cfg.rot_max_deg, cfg.trans_max);
    sample.target = cloud::apply(sample.gt, resampled);
    dataset.push_back(std::move(sample));
  }
  return dataset;
}

EpochReport train_epoch(model::Model& m, diffnet::AdamState& opt,
                        const std::vector<TrainSample>& dataset, const TrainConfig& cfg,
                        int epoch_index) {
  validate(cfg);
  if (dataset.empty()) throw InvalidInput("train_epoch: empty dataset");
  const bool eval_epoch = cfg.registration_eval_interval > 0 &&
                          epoch_index % cfg.registration_eval_interval == 0;

  EpochReport report;
  double rot_sum = 0.0, trans_sum = 0.0;
  for (const auto& sample : dataset) {
    diffnet::Tape tape;
    const cloud::PointCloud warped = cloud::apply(sample.gt, sample.source);

    // Scale-relative alignment: the plain difference norm is minimized by
    // uniform descriptor shrinkage (the solver itself is scale-invariant, so
    // nothing is learned that way).
    diffnet::Value d_warped = m.encode(tape, cloud::points_matrix(warped));
    diffnet::Value d_target = m.encode(tape, cloud::points_matrix(sample.target));
    diffnet::Value primary = losses::relative_alignment_loss(tape, d_warped, d_target);

    if (cfg.use_local_consistency) {
      const double cap = losses::default_outlier_cap(sample.source, cfg.outlier_cap_scale);
      const auto regions = losses::select_local_regions(sample.source, cfg.local_size, cap);
      auto tau = [&](const std::vector<int>& region) {
        const cloud::PointCloud local = cloud::subset(sample.source, region);
        diffnet::Value d_local = m.encode(tape, cloud::points_matrix(local));
        diffnet::Value d_moved = m.encode(tape, cloud::points_matrix(cloud::apply(sample.gt, local)));
        // Standardized feature changes keep the KL term meaningful: raw
        // logits can otherwise collapse toward a constant, which zeroes the
        // divergence without enforcing any cross-region consistency.
        return diffnet::standardize_row(tape, m.feature_change(tape, d_local, d_moved));
      };
      diffnet::Value lc = losses::local_consistency_loss(tape, tau(regions.region1), tau(regions.region2));
      primary = diffnet::add(tape, primary, lc);
    }

    // Zero-weighted auxiliary terms are skipped outright (ablation runs).
    diffnet::Value cd = cfg.lambda1 > 0.0
                            ? losses::reconstruction_loss(tape, m, sample.source, sample.target)
                            : tape.constant(diffnet::Mat::Zero(1, 1));
    diffnet::Value nl = cfg.lambda2 > 0.0
                            ? losses::normal_loss(tape, m, sample.source, sample.target)
                            : tape.constant(diffnet::Mat::Zero(1, 1));
    const losses::TotalLoss loss = losses::total_loss(tape, primary, cd, nl, cfg.lambda1, cfg.lambda2);
    if (!std::isfinite(loss.breakdown.total))
      throw NumericError("train_epoch: non-finite loss at epoch " + std::to_string(epoch_index));

    m.params().zero_grads();
    tape.backward(loss.value);
    opt.step(m.params(), cfg.adam);

    report.mean.total += loss.breakdown.total;
    report.mean.primary += loss.breakdown.primary;
    report.mean.chamfer += loss.breakdown.chamfer;
    report.mean.normal += loss.breakdown.normal;
    ++report.samples;

    if (eval_epoch) {
      // Parameters are frozen here: registration runs on the inference path.
      const auto reg = solver::register_iclk(m, sample.source, sample.target, cfg.solver);
      rot_sum += geom3d::rotation_error_deg(reg.transform.R, sample.gt.R);
      trans_sum += (reg.transform.t - sample.gt.t).norm();
    }
  }

  const double n = static_cast<double>(report.samples);
  report.mean.total /= n;
  report.mean.primary /= n;
  report.mean.chamfer /= n;
  report.mean.normal /= n;
  report.mean.lambda1 = cfg.lambda1;
  report.mean.lambda2 = cfg.lambda2;
  if (eval_epoch) {
    report.mean_rot_err_deg = rot_sum / n;
    report.mean_trans_err = trans_sum / n;
  }
  return report;
}

std::string train_log_header() { return "epoch,total,primary,chamfer,normal,rot_err_deg,trans_err"; }

std::string train_log_row(int epoch, const EpochReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", epoch, r.mean.total,
                r.mean.primary, r.mean.chamfer, r.mean.normal, r.mean_rot_err_deg,
                r.mean_trans_err);
  return buf;
}

namespace {

diffnet::TensorRecords training_state_records(const model::Model& m,
                                              const diffnet::AdamState& opt, int next_epoch) {
  diffnet::TensorRecords records = diffnet::to_records(m.params());
  for (const auto& [name, mv] : opt.moments()) {
    records.emplace_back("adam.m/" + name, mv.first);
    records.emplace_back("adam.v/" + name, mv.second);
  }
  records.emplace_back("adam/step",
                       diffnet::Mat::Constant(1, 1, static_cast<double>(opt.step_count())));
  records.emplace_back("train/next_epoch", diffnet::Mat::Constant(1, 1, next_epoch));
  return records;
}

}  // namespace

TrainResult train(model::Model& m, const TrainConfig& cfg, const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume_from) {
  validate(cfg);
  std::filesystem::create_directories(out_dir);
  const auto dataset = build_dataset(cfg);

  diffnet::AdamState opt;
  int first_epoch = 1;
  if (resume_from) {
    const auto records = diffnet::load_checkpoint(*resume_from);
    diffnet::assign_records(m.params(), records);
    std::map<std::string, std::pair<diffnet::Mat, diffnet::Mat>> moments;
    std::int64_t step = 0;
    for (const auto& [name, mat] : records) {
      if (name.rfind("adam.m/", 0) == 0) moments[name.substr(7)].first = mat;
      else if (name.rfind("adam.v/", 0) == 0) moments[name.substr(7)].second = mat;
      else if (name == "adam/step") step = static_cast<std::int64_t>(mat(0, 0));
      else if (name == "train/next_epoch") first_epoch = static_cast<int>(mat(0, 0));
    }
    opt.restore(std::move(moments), step);
  }

  TrainResult result;
  result.checkpoint_path = out_dir / "model.dvdr";
  result.log_path = out_dir / "train_log.csv";

  std::ofstream log(result.log_path, resume_from ? std::ios::app : std::ios::out);
  if (!log) throw IoError("cannot write " + result.log_path.string());
  if (!resume_from) log << train_log_header() << "\n";

  for (int epoch = first_epoch; epoch <= cfg.epochs; ++epoch) {
    EpochReport report = train_epoch(m, opt, dataset, cfg, epoch);
    log << train_log_row(epoch, report) << "\n";
    log.flush();
    result.log.push_back(std::move(report));

    if (cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0 &&
        epoch != cfg.epochs) {
      const auto path = out_dir / ("checkpoint_epoch" + std::to_string(epoch) + ".dvdr");
      diffnet::save_checkpoint(path, training_state_records(m, opt, epoch + 1));
      m.save_sidecar(path);
    }
  }

  // Final checkpoint carries the optimizer state so runs can resume from it;
  // Model::load ignores those extra records.
  diffnet::save_checkpoint(result.checkpoint_path,
                           training_state_records(m, opt, cfg.epochs + 1));
  m.save_sidecar(result.checkpoint_path);
  return result;
}

}  // namespace dvd::trainer
