#include "sfuda/mvcl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfuda/numeric.hpp"

namespace sfuda {

TransformSpec TransformSpec::identity() { return {}; }

TransformSpec TransformSpec::jitter(double sigma) {
  if (sigma < 0.0) throw InvalidInput("jitter: sigma must be nonnegative");
  TransformSpec s;
  s.kind = Kind::jitter;
  s.sigma = sigma;
  return s;
}

TransformSpec TransformSpec::rotate(double angle, int plane_a, int plane_b) {
  if (plane_a == plane_b) throw InvalidInput("rotate: plane indices must differ");
  TransformSpec s;
  s.kind = Kind::rotate;
  s.angle = angle;
  s.plane_a = plane_a;
  s.plane_b = plane_b;
  return s;
}

TransformSpec TransformSpec::scaled(double factor) {
  if (factor <= 0.0) throw InvalidInput("scale: factor must be positive");
  TransformSpec s;
  s.kind = Kind::scale;
  s.factor = factor;
  return s;
}

TransformSpec TransformSpec::compose(std::vector<TransformSpec> steps) {
  TransformSpec s;
  s.kind = Kind::compose;
  s.children = std::move(steps);
  return s;
}

Eigen::VectorXd apply_transform(const Eigen::VectorXd& x, const TransformSpec& spec,
                                SeededRng& rng) {
  switch (spec.kind) {
    case TransformSpec::Kind::identity:
      return x;
    case TransformSpec::Kind::jitter: {
      Eigen::VectorXd out = x;
      if (spec.sigma > 0.0)
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] += rng.normal(0.0, spec.sigma);
      return out;
    }
    case TransformSpec::Kind::rotate: {
      if (spec.plane_a < 0 || spec.plane_b < 0 || spec.plane_a >= x.size() ||
          spec.plane_b >= x.size())
        throw InvalidInput("rotate: plane index out of range");
      Eigen::VectorXd out = x;
      const double c = std::cos(spec.angle);
      const double s = std::sin(spec.angle);
      const double a = x[spec.plane_a];
      const double b = x[spec.plane_b];
      out[spec.plane_a] = c * a - s * b;
      out[spec.plane_b] = s * a + c * b;
      return out;
    }
    case TransformSpec::Kind::scale:
      return spec.factor * x;
    case TransformSpec::Kind::compose: {
      Eigen::VectorXd out = x;
      for (const auto& child : spec.children) out = apply_transform(out, child, rng);
      return out;
    }
  }
  throw InvalidInput("apply_transform: unknown kind");
}

std::vector<Eigen::MatrixXd> augment_batch(const Eigen::MatrixXd& batch,
                                           const std::vector<TransformSpec>& specs,
                                           SeededRng& rng) {
  if (batch.rows() == 0) throw EmptyInput("augment_batch: empty batch");
  std::vector<Eigen::MatrixXd> out;
  out.reserve(specs.size());
  for (const auto& spec : specs) {
    Eigen::MatrixXd view(batch.rows(), batch.cols());
    for (Eigen::Index i = 0; i < batch.rows(); ++i)
      view.row(i) = apply_transform(batch.row(i).transpose(), spec, rng).transpose();
    out.push_back(std::move(view));
  }
  return out;
}

std::vector<Eigen::MatrixXd> extract_views(const ModelParams& params, const Eigen::MatrixXd& batch,
                                           const std::vector<TransformSpec>& specs,
                                           SeededRng& rng) {
  if (specs.size() < 2) throw InvalidInput("extract_views: need at least two views");
  std::vector<Eigen::MatrixXd> views = augment_batch(batch, specs, rng);
  std::vector<Eigen::MatrixXd> features;
  features.reserve(views.size());
  for (const auto& v : views) features.push_back(extract_features(params, v));
  return features;
}

Eigen::VectorXd view_weights(const std::vector<Eigen::MatrixXd>& view_features, bool* degenerate) {
  if (view_features.size() < 2) throw InvalidInput("view_weights: need at least two views");
  const Eigen::Index m = view_features.front().rows();
  Eigen::VectorXd variances(static_cast<Eigen::Index>(view_features.size()));
  for (std::size_t v = 0; v < view_features.size(); ++v) {
    if (view_features[v].rows() != m) throw InvalidInput("view_weights: row count mismatch");
    variances[static_cast<Eigen::Index>(v)] = column_mean_variance(view_features[v]).mean;
  }
  if (degenerate) *degenerate = false;
  const double total = variances.sum();
  if (total <= 0.0) {
    if (degenerate) *degenerate = true;
    return Eigen::VectorXd::Constant(variances.size(), 1.0 / static_cast<double>(variances.size()));
  }
  return variances / total;
}

Eigen::MatrixXd fuse(const std::vector<Eigen::MatrixXd>& view_features,
                     const Eigen::VectorXd& weights) {
  if (view_features.empty()) throw EmptyInput("fuse: no views");
  if (static_cast<Eigen::Index>(view_features.size()) != weights.size())
    throw InvalidInput("fuse: weight count mismatch");
  const Eigen::Index m = view_features.front().rows();
  Eigen::Index total_cols = 0;
  for (const auto& v : view_features) {
    if (v.rows() != m) throw InvalidInput("fuse: row count mismatch");
    total_cols += v.cols();
  }
  Eigen::MatrixXd fused(m, total_cols);
  Eigen::Index col = 0;
  for (std::size_t v = 0; v < view_features.size(); ++v) {
    fused.middleCols(col, view_features[v].cols()) =
        weights[static_cast<Eigen::Index>(v)] * view_features[v];
    col += view_features[v].cols();
  }
  return fused;
}

namespace {

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& p) {
  int best = 0;
  double best_d = (centroids.row(0) - p).squaredNorm();
  for (Eigen::Index j = 1; j < centroids.rows(); ++j) {
    const double d = (centroids.row(j) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace

ClusterResult lloyd(const Eigen::MatrixXd& points, Eigen::MatrixXd centroids, int max_iters,
                    double tol) {
  const Eigen::Index m = points.rows();
  const Eigen::Index k = centroids.rows();
  if (m == 0) throw EmptyInput("lloyd: no points");
  if (k < 1 || k > m) throw InvalidInput("lloyd: invalid centroid count");

  ClusterResult res;
  res.assignments.assign(static_cast<std::size_t>(m), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    for (Eigen::Index i = 0; i < m; ++i)
      res.assignments[static_cast<std::size_t>(i)] = nearest_centroid(centroids, points.row(i));

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      sums.row(res.assignments[static_cast<std::size_t>(i)]) += points.row(i);
      ++counts[res.assignments[static_cast<std::size_t>(i)]];
    }

    Eigen::MatrixXd next = centroids;
    for (Eigen::Index j = 0; j < k; ++j)
      if (counts[j] > 0) next.row(j) = sums.row(j) / counts[j];

    // Reseed each empty cluster at the point farthest from its centroid.
    for (Eigen::Index j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double d =
            (points.row(i) - next.row(res.assignments[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(j) = points.row(far);
    }

    const double shift = (next - centroids).rowwise().norm().maxCoeff();
    centroids = next;
    if (shift < tol) break;
  }
  for (Eigen::Index i = 0; i < m; ++i)
    res.assignments[static_cast<std::size_t>(i)] = nearest_centroid(centroids, points.row(i));
  res.centroids = std::move(centroids);
  res.inertia = cluster_loss(points, res.centroids);
  return res;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& points, int k, SeededRng& rng) {
  const Eigen::Index m = points.rows();
  if (k < 1 || k > m) throw InvalidInput("kmeanspp_init: invalid k");
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(m))));
  Eigen::VectorXd dist2(m);
  for (int j = 1; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < j; ++c)
        best = std::min(best, (points.row(i) - centroids.row(c)).squaredNorm());
      dist2[i] = best;
    }
    const double total = dist2.sum();
    if (total <= 0.0) {
      centroids.row(j) = points.row(static_cast<Eigen::Index>(rng.uniform_int(static_cast<std::uint64_t>(m))));
      continue;
    }
    double u = rng.uniform() * total;
    Eigen::Index pick = m - 1;
    for (Eigen::Index i = 0; i < m; ++i) {
      u -= dist2[i];
      if (u <= 0.0) {
        pick = i;
        break;
      }
    }
    centroids.row(j) = points.row(pick);
  }
  return centroids;
}

ClusterResult kmeans(const Eigen::MatrixXd& points, int k, SeededRng& rng, int max_iters,
                     double tol, int restarts) {
  if (points.rows() == 0) throw EmptyInput("kmeans: no points");
  if (k < 1 || k > points.rows()) throw InvalidInput("kmeans: k out of range");
  if (restarts < 1) throw InvalidInput("kmeans: restarts must be positive");
  ClusterResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    ClusterResult res = lloyd(points, kmeanspp_init(points, k, rng), max_iters, tol);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

double cluster_loss(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids) {
  if (centroids.rows() == 0) throw InvalidInput("cluster_loss: no centroids");
  if (points.cols() != centroids.cols()) throw InvalidInput("cluster_loss: dimension mismatch");
  double loss = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < centroids.rows(); ++j)
      best = std::min(best, (points.row(i) - centroids.row(j)).squaredNorm());
    loss += best;
  }
  return loss;
}

Eigen::MatrixXd pair_attention(const Eigen::MatrixXd& embeddings, double tau) {
  const Eigen::Index m = embeddings.rows();
  if (m < 2) throw InvalidInput("pair_attention: need at least two embeddings");
  if (tau <= 0.0) throw InvalidInput("pair_attention: tau must be positive");
  Eigen::MatrixXd attn = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Eigen::VectorXd scores(m - 1);
    Eigen::Index idx = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      scores[idx++] = cosine_sim(embeddings.row(i).transpose(), embeddings.row(j).transpose()) / tau;
    }
    const Eigen::VectorXd w = softmax(scores);
    idx = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      attn(i, j) = w[idx++];
    }
  }
  return attn;
}

double contrastive_loss(const Eigen::MatrixXd& embeddings, const std::vector<int>& partner,
                        double tau, const Eigen::MatrixXd& attention, bool multiplicative) {
  const Eigen::Index m = embeddings.rows();
  if (m < 2) throw EmptyInput("contrastive_loss: need at least one positive pair");
  if (tau <= 0.0) throw InvalidInput("contrastive_loss: tau must be positive");
  if (static_cast<Eigen::Index>(partner.size()) != m)
    throw InvalidInput("contrastive_loss: partner size mismatch");

  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int p = partner[static_cast<std::size_t>(i)];
    if (p < 0 || p >= m || p == i) throw InvalidInput("contrastive_loss: bad partner index");
    Eigen::VectorXd scaled(m - 1);
    double pos = 0.0;
    Eigen::Index idx = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
      if (k == i) continue;
      const double s =
          cosine_sim(embeddings.row(i).transpose(), embeddings.row(k).transpose()) / tau;
      scaled[idx++] = s;
      if (k == p) pos = s;
    }
    const double mx = scaled.maxCoeff();
    const double lse = mx + std::log((scaled.array() - mx).exp().sum());
    const double log_term = pos - lse;  // log of the positive-pair fraction
    const double w = attention.size() ? attention(i, p) : 0.0;
    loss += multiplicative ? -w * log_term : w - log_term;
  }
  return loss;
}

void LossWeights::validate(double tol) const {
  if (con < 0.0 || ce < 0.0 || clu < 0.0 || std::abs(con + ce + clu - 1.0) > tol)
    throw InvalidInput("LossWeights: weights must lie on the simplex");
}

double total_loss(const LossWeights& lambda, double l_con, double l_ce, double l_clu) {
  lambda.validate();
  if (!std::isfinite(l_con) || !std::isfinite(l_ce) || !std::isfinite(l_clu))
    throw InvalidInput("total_loss: non-finite component");
  return lambda.con * l_con + lambda.ce * l_ce + lambda.clu * l_clu;
}

std::vector<PseudoLabel> assign_pseudo_labels(const Eigen::MatrixXd& features,
                                              const PrototypeSet& prototypes) {
  if (!prototypes.any_present()) throw NoPrototypes("assign_pseudo_labels: no present prototypes");
  std::vector<PseudoLabel> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    int best = -1;
    double best_sim = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < prototypes.num_classes(); ++k) {
      if (!prototypes.present[k]) continue;
      const double s = cosine_sim(features.row(i).transpose(), prototypes.prototypes.row(k).transpose());
      if (s > best_sim) {
        best_sim = s;
        best = k;
      }
    }
    out.push_back(PseudoLabel{best, best_sim});
  }
  return out;
}

}  // namespace sfuda
