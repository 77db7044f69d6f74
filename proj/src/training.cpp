#include "sfuda/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "sfuda/numeric.hpp"

namespace sfuda {

namespace {

// d cos(a,b) / da = (b_hat - cos * a_hat) / |a|
Eigen::VectorXd cosine_grad_wrt_first(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                                      double sim) {
  const double na = a.norm();
  const double nb = b.norm();
  return (b / (na * nb)) - sim * a / (na * na);
}

struct ContrastiveResult {
  double loss = 0.0;                     // mean over anchors
  std::vector<Eigen::VectorXd> grad_z;   // per embedding, empty when not requested
};

// Mean-per-anchor contrastive loss over 2m interleaved embeddings; the
// positive of embedding e is e^1 (partner in the other view of the same
// sample). Attention weights are constants.
ContrastiveResult contrastive_term(const std::vector<Eigen::VectorXd>& z,
                                   const Eigen::MatrixXd& attention, double tau,
                                   bool multiplicative, bool want_grads) {
  const int n = static_cast<int>(z.size());
  ContrastiveResult res;
  if (want_grads) res.grad_z.assign(static_cast<std::size_t>(n), Eigen::VectorXd());

  Eigen::MatrixXd sim(n, n);
  for (int i = 0; i < n; ++i) {
    sim(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) sim(i, j) = sim(j, i) = cosine_sim(z[i], z[j]);
  }

  Eigen::MatrixXd ds = Eigen::MatrixXd::Zero(n, n);  // dL/d sim(i,k), ordered pairs
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int i = 0; i < n; ++i) {
    const int p = i ^ 1;
    Eigen::VectorXd scaled(n - 1);
    int idx = 0;
    for (int k = 0; k < n; ++k)
      if (k != i) scaled[idx++] = sim(i, k) / tau;
    const double mx = scaled.maxCoeff();
    const Eigen::VectorXd ex = (scaled.array() - mx).exp();
    const double denom = ex.sum();
    const double lse = mx + std::log(denom);
    const double log_term = sim(i, p) / tau - lse;
    const double w = attention.size() ? attention(i, p) : 0.0;
    const double anchor_scale = multiplicative ? w : 1.0;
    res.loss += (multiplicative ? -w * log_term : w - log_term) * inv_n;
    if (!want_grads) continue;
    idx = 0;
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      const double q = ex[idx++] / denom;
      ds(i, k) += anchor_scale * inv_n * (q - (k == p ? 1.0 : 0.0)) / tau;
    }
  }

  if (want_grads) {
    for (int i = 0; i < n; ++i) res.grad_z[static_cast<std::size_t>(i)] = Eigen::VectorXd::Zero(z[0].size());
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < n; ++k) {
        if (k == i || ds(i, k) == 0.0) continue;
        res.grad_z[static_cast<std::size_t>(i)] += ds(i, k) * cosine_grad_wrt_first(z[i], z[k], sim(i, k));
        res.grad_z[static_cast<std::size_t>(k)] += ds(i, k) * cosine_grad_wrt_first(z[k], z[i], sim(i, k));
      }
    }
  }
  return res;
}

}  // namespace

LossValue loss_and_grad(const ModelParams& params, const LossBatch& batch,
                        const LossWeights& lambda, Gradients* grads) {
  lambda.validate();
  if (grads && params.frozen) throw FrozenModel("loss_and_grad: model is frozen");
  if (!batch.has_ce() && !batch.has_views()) throw EmptyInput("loss_and_grad: empty batch");

  LossValue out;
  Gradients acc = Gradients::zero_like(params);
  const Eigen::VectorXd no_grad;

  // Cross-entropy over retained pseudo-labeled samples, averaged.
  if (batch.has_ce() && lambda.ce > 0.0) {
    const Eigen::Index r = batch.ce_inputs.rows();
    if (static_cast<Eigen::Index>(batch.ce_labels.size()) != r)
      throw InvalidInput("loss_and_grad: ce label count mismatch");
    for (Eigen::Index i = 0; i < r; ++i) {
      const int y = batch.ce_labels[static_cast<std::size_t>(i)];
      if (y < 0 || y >= params.num_classes()) throw InvalidInput("loss_and_grad: label out of range");
      const ForwardRecord rec = forward(params, batch.ce_inputs.row(i).transpose());
      out.cross_entropy -= std::log(std::max(rec.probs[y], 1e-300)) / static_cast<double>(r);
      if (grads) {
        Eigen::VectorXd g_logits = rec.probs;
        g_logits[y] -= 1.0;
        g_logits *= lambda.ce / static_cast<double>(r);
        backprop_input(params, batch.ce_inputs.row(i).transpose(), rec, no_grad, g_logits, acc);
      }
    }
  }

  if (batch.has_views() && (lambda.con > 0.0 || lambda.clu > 0.0)) {
    const int num_views = static_cast<int>(batch.view_inputs.size());
    const Eigen::Index m = batch.view_inputs.front().rows();
    if (batch.view_weights.size() != num_views)
      throw InvalidInput("loss_and_grad: view weight count mismatch");

    // Forward every augmented input once; records are reused below.
    std::vector<std::vector<ForwardRecord>> recs(static_cast<std::size_t>(num_views));
    for (int v = 0; v < num_views; ++v) {
      if (batch.view_inputs[static_cast<std::size_t>(v)].rows() != m)
        throw InvalidInput("loss_and_grad: view row count mismatch");
      recs[static_cast<std::size_t>(v)].reserve(static_cast<std::size_t>(m));
      for (Eigen::Index i = 0; i < m; ++i)
        recs[static_cast<std::size_t>(v)].push_back(
            forward(params, batch.view_inputs[static_cast<std::size_t>(v)].row(i).transpose()));
    }

    std::vector<std::vector<Eigen::VectorXd>> g_feat(
        static_cast<std::size_t>(num_views),
        std::vector<Eigen::VectorXd>(static_cast<std::size_t>(m),
                                     Eigen::VectorXd::Zero(params.d_f())));

    // Contrastive term over the first two views, interleaved.
    if (lambda.con > 0.0) {
      if (num_views < 2) throw InvalidInput("loss_and_grad: contrastive term needs two views");
      std::vector<Eigen::VectorXd> z;
      z.reserve(static_cast<std::size_t>(2 * m));
      for (Eigen::Index i = 0; i < m; ++i) {
        z.push_back(recs[0][static_cast<std::size_t>(i)].features);
        z.push_back(recs[1][static_cast<std::size_t>(i)].features);
      }
      const ContrastiveResult con = contrastive_term(z, batch.attention, batch.tau,
                                                     batch.multiplicative_attention, grads != nullptr);
      out.contrastive = con.loss;
      if (grads) {
        for (Eigen::Index i = 0; i < m; ++i) {
          g_feat[0][static_cast<std::size_t>(i)] += lambda.con * con.grad_z[static_cast<std::size_t>(2 * i)];
          g_feat[1][static_cast<std::size_t>(i)] += lambda.con * con.grad_z[static_cast<std::size_t>(2 * i + 1)];
        }
      }
    }

    // Cluster term on the fused embeddings, averaged over samples.
    if (lambda.clu > 0.0) {
      if (batch.centroids.rows() == 0) throw InvalidInput("loss_and_grad: missing centroids");
      if (static_cast<Eigen::Index>(batch.assignments.size()) != m)
        throw InvalidInput("loss_and_grad: assignment count mismatch");
      const int d_f = params.d_f();
      if (batch.centroids.cols() != static_cast<Eigen::Index>(num_views) * d_f)
        throw InvalidInput("loss_and_grad: centroid dimension mismatch");
      const double inv_m = 1.0 / static_cast<double>(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const int a = batch.assignments[static_cast<std::size_t>(i)];
        if (a < 0 || a >= batch.centroids.rows())
          throw InvalidInput("loss_and_grad: assignment out of range");
        for (int v = 0; v < num_views; ++v) {
          const double w = batch.view_weights[v];
          const Eigen::VectorXd diff =
              w * recs[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)].features -
              batch.centroids.row(a).segment(static_cast<Eigen::Index>(v) * d_f, d_f).transpose();
          out.cluster += diff.squaredNorm() * inv_m;
          if (grads)
            g_feat[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)] +=
                lambda.clu * 2.0 * w * inv_m * diff;
        }
      }
    }

    if (grads) {
      for (int v = 0; v < num_views; ++v) {
        for (Eigen::Index i = 0; i < m; ++i) {
          const Eigen::VectorXd& g = g_feat[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)];
          if (g.isZero(0.0)) continue;
          backprop_input(params, batch.view_inputs[static_cast<std::size_t>(v)].row(i).transpose(),
                         recs[static_cast<std::size_t>(v)][static_cast<std::size_t>(i)], g, no_grad, acc);
        }
      }
    }
  }

  out.total = total_loss(lambda, out.contrastive, out.cross_entropy, out.cluster);
  if (grads) *grads = std::move(acc);
  return out;
}

double train_accuracy(const ModelParams& params, const Dataset& labeled) {
  if (!labeled.labeled()) throw InvalidInput("train_accuracy: dataset has no labels");
  int correct = 0;
  for (int i = 0; i < labeled.size(); ++i) {
    if (predict_with_entropy(params, labeled.inputs.row(i).transpose()).label ==
        labeled.labels[static_cast<std::size_t>(i)])
      ++correct;
  }
  return static_cast<double>(correct) / labeled.size();
}

ModelParams pretrain_source(const Dataset& source, const PretrainConfig& cfg) {
  if (!source.labeled()) throw InvalidInput("pretrain_source: source must be labeled");
  if (source.num_classes < 2) throw InvalidInput("pretrain_source: need at least two classes");
  const int distinct = static_cast<int>(
      std::set<int>(source.labels.begin(), source.labels.end()).size());
  if (distinct < 2) throw InvalidInput("pretrain_source: single-class dataset");

  SeededRng rng(cfg.seed);
  ModelParams params = init_params(source.dim(), cfg.d_h, cfg.d_f, source.num_classes, rng);
  SgdState state;
  const LossWeights ce_only{0.0, 1.0, 0.0};

  std::vector<int> order(static_cast<std::size_t>(source.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the run's generator keeps epochs deterministic.
    for (int i = source.size() - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);
    for (int start = 0; start < source.size(); start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, source.size() - start);
      LossBatch batch;
      batch.ce_inputs.resize(count, source.dim());
      batch.ce_labels.resize(static_cast<std::size_t>(count));
      for (int i = 0; i < count; ++i) {
        const int idx = order[static_cast<std::size_t>(start + i)];
        batch.ce_inputs.row(i) = source.inputs.row(idx);
        batch.ce_labels[static_cast<std::size_t>(i)] = source.labels[static_cast<std::size_t>(idx)];
      }
      Gradients grads;
      loss_and_grad(params, batch, ce_only, &grads);
      sgd_step(params, grads, cfg.lr, cfg.momentum, state);
    }
  }
  params.frozen = true;
  return params;
}

}  // namespace sfuda
