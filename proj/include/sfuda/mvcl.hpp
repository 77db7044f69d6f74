#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sfuda/errors.hpp"
#include "sfuda/model.hpp"
#include "sfuda/rng.hpp"
#include "sfuda/rsm.hpp"

namespace sfuda {

// Vector-space augmentations: Gaussian jitter, 2-D rotation in a coordinate
// plane, uniform scaling, and left-to-right composition.
struct TransformSpec {
  enum class Kind { identity, jitter, rotate, scale, compose };

  Kind kind = Kind::identity;
  double sigma = 0.0;   // jitter
  double angle = 0.0;   // rotate, radians
  int plane_a = 0;      // rotate
  int plane_b = 1;      // rotate
  double factor = 1.0;  // scale
  std::vector<TransformSpec> children;

  static TransformSpec identity();
  static TransformSpec jitter(double sigma);
  static TransformSpec rotate(double angle, int plane_a = 0, int plane_b = 1);
  static TransformSpec scaled(double factor);
  static TransformSpec compose(std::vector<TransformSpec> steps);
};

Eigen::VectorXd apply_transform(const Eigen::VectorXd& x, const TransformSpec& spec, SeededRng& rng);

// Row-wise augmentation of a batch, one output matrix per spec.
std::vector<Eigen::MatrixXd> augment_batch(const Eigen::MatrixXd& batch,
                                           const std::vector<TransformSpec>& specs, SeededRng& rng);

// Feature matrices of the augmented views: view v row i = F(T_v(x_i)).
std::vector<Eigen::MatrixXd> extract_views(const ModelParams& params, const Eigen::MatrixXd& batch,
                                           const std::vector<TransformSpec>& specs, SeededRng& rng);

// Simplex weights proportional to per-view mean feature variance. Falls back
// to uniform weights (degenerate flag) when every view has zero variance.
Eigen::VectorXd view_weights(const std::vector<Eigen::MatrixXd>& view_features,
                             bool* degenerate = nullptr);

// z_i = [w_1 h_i^(1); ...; w_V h_i^(V)], total dimension V * d_f.
Eigen::MatrixXd fuse(const std::vector<Eigen::MatrixXd>& view_features,
                     const Eigen::VectorXd& weights);

struct ClusterResult {
  Eigen::MatrixXd centroids;  // k rows
  std::vector<int> assignments;
  double inertia = 0.0;
};

// Lloyd iterations from the given initial centroids; nearest-centroid ties go
// to the lowest index, empty clusters are reseeded at the farthest point.
ClusterResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd init_centroids,
                    int max_iters = 100, double tol = 1e-10);

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, SeededRng& rng);

// k-means++ seeding plus Lloyd; with restarts > 1 the lowest-inertia run wins.
ClusterResult kmeans(const Eigen::MatrixXd& points, int k, SeededRng& rng, int max_iters = 100,
                     double tol = 1e-10, int restarts = 1);

// Sum over points of the squared distance to the nearest centroid.
double cluster_loss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids);

// Row-stochastic attention over j != i: softmax of cosine similarity / tau.
// The diagonal is zero.
Eigen::MatrixXd pair_attention(const Eigen::MatrixXd& embeddings, double tau);

// Contrastive loss over embeddings arranged as positive pairs; partner[i] is
// the index of i's positive. Additive attention term by default, the
// multiplicative variant scales the log term instead.
double contrastive_loss(const Eigen::MatrixXd& embeddings, const std::vector<int>& partner,
                        double tau, const Eigen::MatrixXd& attention, bool multiplicative = false);

struct LossWeights {
  double con = 1.0 / 3.0;
  double ce = 1.0 / 3.0;
  double clu = 1.0 / 3.0;

  void validate(double tol = 1e-6) const;
};

double total_loss(const LossWeights& lambda, double l_con, double l_ce, double l_clu);

struct PseudoLabel {
  int label;
  double confidence;  // winning cosine similarity
};

// Nearest-prototype assignment by cosine similarity over present classes;
// ties go to the lowest class index.
std::vector<PseudoLabel> assign_pseudo_labels(const Eigen::MatrixXd& features,
                                              const PrototypeSet& prototypes);

}  // namespace sfuda
