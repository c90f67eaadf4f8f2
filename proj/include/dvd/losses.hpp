#pragma once

#include <vector>

#include "dvd/diffnet.hpp"
#include "dvd/model.hpp"
#include "dvd/pointcloud.hpp"

namespace dvd::losses {

/// Index lists of the two local regions: region1 grown around the farthest
/// point from the barycenter (outlier-capped), region2 around the closest.
/// Each region holds its anchor plus nearest neighbors, min(n_local, N)
/// unique indices.
struct LocalRegionPair {
  std::vector<int> region1;
  std::vector<int> region2;
  int anchor_far = -1;
  int anchor_close = -1;
};

/// Anchor selection per the capped-farthest / closest rule; ties go to the
/// lower index. Throws InvalidInput when all points coincide, N < 2,
/// n_local < 1 or cap <= 0.
LocalRegionPair select_local_regions(const cloud::PointCloud& cloud, int n_local, double cap);

/// Default outlier cap: `scale` times the median distance to the barycenter.
double default_outlier_cap(const cloud::PointCloud& cloud, double scale = 3.0);

/// Euclidean norm (not squared) of the descriptor difference.
diffnet::Value global_alignment_loss(diffnet::Tape& t, diffnet::Value dx, diffnet::Value dy);

/// Scale-relative variant used by the trainer: the difference norm divided by
/// the mean descriptor norm. The plain norm admits a degenerate optimum where
/// the encoder uniformly shrinks its output instead of aligning it; dividing
/// by the scale removes that channel while leaving the fixed-scale geometry
/// identical.
diffnet::Value relative_alignment_loss(diffnet::Tape& t, diffnet::Value dx, diffnet::Value dy,
                                       double eps = 1e-12);

/// Symmetric KL divergence between softmax-normalized feature changes, with
/// an additive 1e-12 floor inside the logarithms.
diffnet::Value local_consistency_loss(diffnet::Tape& t, diffnet::Value tau1,
                                      diffnet::Value tau2, double eps = 1e-12);

/// Symmetric mean nearest-neighbor distance (Chamfer, plain norms) between
/// two clouds, computed through the exact neighbor index.
double chamfer(const cloud::PointCloud& a, const cloud::PointCloud& b);

/// chamfer(X, decode(encode(X))) + chamfer(Y, decode(encode(Y))).
diffnet::Value reconstruction_loss(diffnet::Tape& t, model::Model& m,
                                   const cloud::PointCloud& X, const cloud::PointCloud& Y);

/// Cosine loss of predicted vs ground-truth normals, summed over both clouds;
/// each cloud contributes 1 - mean cos in [0, 2]. Throws InvalidInput when a
/// cloud lacks normals.
diffnet::Value normal_loss(diffnet::Tape& t, model::Model& m, const cloud::PointCloud& X,
                           const cloud::PointCloud& Y);

struct LossBreakdown {
  double total = 0;
  double primary = 0;
  double chamfer = 0;
  double normal = 0;
  double lambda1 = 0;
  double lambda2 = 0;
};

struct TotalLoss {
  diffnet::Value value = nullptr;  // the graph node to backpropagate
  LossBreakdown breakdown;
};

/// total = primary + lambda1*chamfer + lambda2*normal.
TotalLoss total_loss(diffnet::Tape& t, diffnet::Value primary, diffnet::Value chamfer_term,
                     diffnet::Value normal_term, double lambda1, double lambda2);

}  // namespace dvd::losses
