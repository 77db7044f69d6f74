#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sfuda/data.hpp"
#include "sfuda/model.hpp"
#include "sfuda/mvcl.hpp"

namespace sfuda {

// Inputs to one composite-loss evaluation. Attention weights, view weights,
// centroids, and cluster assignments are held fixed during differentiation;
// the adaptation loop refreshes them between steps.
struct LossBatch {
  // Cross-entropy over retained pseudo-labeled samples (may be empty).
  Eigen::MatrixXd ce_inputs;  // r x d_in
  std::vector<int> ce_labels;

  // Augmented inputs, one matrix (m x d_in) per view. The first two views
  // provide the contrastive embeddings; all views feed the fused cluster term.
  std::vector<Eigen::MatrixXd> view_inputs;
  Eigen::VectorXd view_weights;

  // Fixed centroids (k x V*d_f) and per-sample assignments for the cluster term.
  Eigen::MatrixXd centroids;
  std::vector<int> assignments;

  // Fixed pairwise attention over the 2m interleaved contrastive embeddings
  // (embedding 2i = view-0 sample i, 2i+1 = view-1 sample i).
  Eigen::MatrixXd attention;
  double tau = 0.5;
  bool multiplicative_attention = false;

  bool has_ce() const { return ce_inputs.rows() > 0; }
  bool has_views() const { return !view_inputs.empty() && view_inputs.front().rows() > 0; }
};

struct LossValue {
  double total = 0.0;
  double contrastive = 0.0;
  double cross_entropy = 0.0;
  double cluster = 0.0;
};

// Composite loss lambda_con * L_con + lambda_ce * L_ce + lambda_clu * L_clu,
// each component averaged over its batch. Analytic gradients are written to
// *grads when non-null; pass nullptr for a loss-only evaluation (used by the
// finite-difference oracle).
LossValue loss_and_grad(const ModelParams& params, const LossBatch& batch,
                        const LossWeights& lambda, Gradients* grads);

// Plain cross-entropy SGD on a labeled source set; returns frozen parameters.
// Desk-scale blobs converge in well under 20 epochs; longer schedules only
// saturate the softmax, which flattens the adaptation-time entropy signal.
struct PretrainConfig {
  int epochs = 20;
  double lr = 0.1;
  double momentum = 0.9;
  int batch_size = 32;
  int d_h = 16;
  int d_f = 8;
  std::uint64_t seed = 1;
};

ModelParams pretrain_source(const Dataset& source, const PretrainConfig& cfg);

// Fraction of samples whose argmax prediction matches the label.
double train_accuracy(const ModelParams& params, const Dataset& labeled);

}  // namespace sfuda
