#include "dvd/model.hpp"

#include <fstream>
#include <json.hpp>
#include <vector>

#include "dvd/checkpoint.hpp"
#include "dvd/errors.hpp"
#include "dvd/rng.hpp"

namespace dvd::model {

namespace {

const std::vector<int> kEncoderWidths = {3, 64, 64, 64, 128};  // last layer appends K
constexpr int kFoldWidth = 128;

struct LayerNames {
  std::string W, b;
};

LayerNames layer(const std::string& prefix, int i) {
  const std::string base = prefix + ".l" + std::to_string(i);
  return {base + ".W", base + ".b"};
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.descriptor_width < 1 || cfg.grid_side < 1 || cfg.normal_hidden < 1)
    throw InvalidInput("Model: all widths must be >= 1");
  grid_ = unit_square_grid(cfg.grid_side);

  std::uint64_t stream = 0;
  auto make_layer = [&](const std::string& prefix, int i, int in, int out) {
    const auto names = layer(prefix, i);
    params_.create(names.W, diffnet::he_normal(in, out, derive_seed(seed, 0xA11, stream++)));
    params_.create(names.b, diffnet::Mat::Zero(1, out));
  };

  std::vector<int> enc = kEncoderWidths;
  enc.push_back(cfg.descriptor_width);
  for (std::size_t i = 0; i + 1 < enc.size(); ++i)
    make_layer("enc", static_cast<int>(i), enc[i], enc[i + 1]);

  const int K = cfg.descriptor_width;
  make_layer("metric", 0, 2 * K, K);

  make_layer("fold1", 0, 2 + K, kFoldWidth);
  make_layer("fold1", 1, kFoldWidth, kFoldWidth);
  make_layer("fold1", 2, kFoldWidth, 3);
  make_layer("fold2", 0, 3 + K, kFoldWidth);
  make_layer("fold2", 1, kFoldWidth, kFoldWidth);
  make_layer("fold2", 2, kFoldWidth, 3);

  make_layer("normal", 0, 3 + K, cfg.normal_hidden);
  make_layer("normal", 1, cfg.normal_hidden, 3);
}

Eigen::MatrixXd Model::unit_square_grid(int side) {
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(side) * side, 2);
  if (side == 1) {
    grid << 0.5, 0.5;
    return grid;
  }
  Eigen::Index row = 0;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j)
      grid.row(row++) << static_cast<double>(i) / (side - 1), static_cast<double>(j) / (side - 1);
  return grid;
}

diffnet::Value Model::encode(diffnet::Tape& t, const Eigen::MatrixXd& pts) {
  if (pts.rows() < 1 || pts.cols() != 3) throw InvalidInput("encode: need an (n,3) point matrix");
  diffnet::Value h = t.constant(pts);
  const int layers = static_cast<int>(kEncoderWidths.size());
  for (int i = 0; i < layers; ++i) {
    const auto names = layer("enc", i);
    h = diffnet::relu(t, diffnet::linear(t, h, params_.get(names.W), params_.get(names.b)));
  }
  return diffnet::max_pool_points(t, h);
}

diffnet::Value Model::feature_change(diffnet::Tape& t, diffnet::Value d_orig,
                                     diffnet::Value d_trans) {
  const auto names = layer("metric", 0);
  diffnet::Value cat = diffnet::concat(t, d_orig, d_trans);
  return diffnet::linear(t, cat, params_.get(names.W), params_.get(names.b));
}

diffnet::Value Model::decode(diffnet::Tape& t, diffnet::Value descriptor) {
  diffnet::Value grid = t.constant(grid_);
  auto fold = [&](const char* prefix, diffnet::Value base) {
    diffnet::Value h = diffnet::concat_broadcast(t, base, descriptor);
    for (int i = 0; i < 3; ++i) {
      const auto names = layer(prefix, i);
      h = diffnet::linear(t, h, params_.get(names.W), params_.get(names.b));
      if (i < 2) h = diffnet::relu(t, h);
    }
    return h;
  };
  diffnet::Value first = fold("fold1", grid);
  return fold("fold2", first);
}

diffnet::Value Model::normal_head(diffnet::Tape& t, const Eigen::MatrixXd& pts,
                                  diffnet::Value descriptor) {
  if (pts.rows() < 1 || pts.cols() != 3)
    throw InvalidInput("normal_head: need an (n,3) point matrix");
  diffnet::Value h = diffnet::concat_broadcast(t, t.constant(pts), descriptor);
  const auto l0 = layer("normal", 0);
  const auto l1 = layer("normal", 1);
  h = diffnet::relu(t, diffnet::linear(t, h, params_.get(l0.W), params_.get(l0.b)));
  h = diffnet::linear(t, h, params_.get(l1.W), params_.get(l1.b));
  return diffnet::rows_normalize(t, h);
}

Descriptor Model::encode_inference(const Eigen::MatrixXd& pts) const {
  if (pts.rows() < 1 || pts.cols() != 3)
    throw InvalidInput("encode_inference: need an (n,3) point matrix");
  Eigen::MatrixXd h = pts;
  const int layers = static_cast<int>(kEncoderWidths.size());
  for (int i = 0; i < layers; ++i) {
    const auto names = layer("enc", i);
    Eigen::MatrixXd y = h * params_.at(names.W).value;
    y.rowwise() += params_.at(names.b).value.row(0);
    h = y.cwiseMax(0.0);
  }
  return h.colwise().maxCoeff();
}

Descriptor Model::encode_inference(const cloud::PointCloud& cloud) const {
  return encode_inference(cloud::points_matrix(cloud));
}

Eigen::MatrixXd Model::decode_inference(const Descriptor& descriptor) const {
  auto fold = [&](const char* prefix, const Eigen::MatrixXd& base) {
    Eigen::MatrixXd h(base.rows(), base.cols() + descriptor.cols());
    h.leftCols(base.cols()) = base;
    h.rightCols(descriptor.cols()) = descriptor.replicate(base.rows(), 1);
    for (int i = 0; i < 3; ++i) {
      const auto names = layer(prefix, i);
      Eigen::MatrixXd y = h * params_.at(names.W).value;
      y.rowwise() += params_.at(names.b).value.row(0);
      h = i < 2 ? y.cwiseMax(0.0) : y;
    }
    return h;
  };
  return fold("fold2", fold("fold1", grid_));
}

Eigen::Vector3d Model::estimate_normal(const Eigen::Vector3d& point, const Descriptor& d) const {
  Eigen::RowVectorXd h(3 + d.cols());
  h.leftCols(3) = point.transpose();
  h.rightCols(d.cols()) = d;
  const auto l0 = layer("normal", 0);
  const auto l1 = layer("normal", 1);
  Eigen::RowVectorXd y = h * params_.at(l0.W).value + params_.at(l0.b).value;
  y = y.cwiseMax(0.0);
  Eigen::RowVector3d raw = y * params_.at(l1.W).value + params_.at(l1.b).value;
  const double norm = raw.norm();
  if (norm < 1e-12) throw NumericError("estimate_normal: degenerate raw output");
  return (raw / norm).transpose();
}

void Model::save(const std::filesystem::path& path) const {
  diffnet::save_checkpoint(path, diffnet::to_records(params_));
  save_sidecar(path);
}

void Model::save_sidecar(const std::filesystem::path& checkpoint_path) const {
  nlohmann::json sidecar = {{"format", 1},
                            {"descriptor_width", cfg_.descriptor_width},
                            {"grid_side", cfg_.grid_side},
                            {"normal_hidden", cfg_.normal_hidden}};
  std::ofstream out(checkpoint_path.string() + ".json");
  if (!out) throw IoError("cannot write sidecar for " + checkpoint_path.string());
  out << sidecar.dump(2) << "\n";
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw IoError("missing sidecar " + path.string() + ".json");
  nlohmann::json sidecar;
  try {
    side >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad sidecar for " + path.string() + ": " + e.what());
  }
  if (sidecar.value("format", 0) != 1)
    throw IoError("unsupported sidecar format for " + path.string());
  ModelConfig cfg;
  cfg.descriptor_width = sidecar.at("descriptor_width").get<int>();
  cfg.grid_side = sidecar.at("grid_side").get<int>();
  cfg.normal_hidden = sidecar.at("normal_hidden").get<int>();
  Model model(cfg, 0);
  diffnet::assign_records(model.params_, diffnet::load_checkpoint(path));
  return model;
}

}  // namespace dvd::model
