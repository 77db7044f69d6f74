#include "sfuda/numeric.hpp"

#include <cmath>

namespace sfuda {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  if (logits.size() == 0) throw EmptyInput("softmax: empty input");
  if (!logits.allFinite()) throw InvalidInput("softmax: non-finite input");
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

bool is_prob_vector(const Eigen::VectorXd& v) {
  if (v.size() == 0) return false;
  if (!v.allFinite()) return false;
  if (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0) return false;
  return std::abs(v.sum() - 1.0) <= 1e-9;
}

double self_entropy(const Eigen::VectorXd& p) {
  if (!is_prob_vector(p)) throw InvalidInput("self_entropy: not a probability vector");
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  }
  return h < 0.0 ? 0.0 : h;
}

MinMaxResult minmax_normalize(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw EmptyInput("minmax_normalize: empty input");
  if (!values.allFinite()) throw InvalidInput("minmax_normalize: non-finite input");
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  MinMaxResult r;
  if (hi <= lo) {
    r.values = Eigen::VectorXd::Zero(values.size());
    r.degenerate = true;
    return r;
  }
  r.values = (values.array() - lo) / (hi - lo);
  return r;
}

ColumnVariance column_mean_variance(const Eigen::MatrixXd& features) {
  if (features.rows() == 0) throw EmptyInput("column_mean_variance: empty matrix");
  const Eigen::Index m = features.rows();
  const Eigen::VectorXd mean = features.colwise().mean();
  ColumnVariance out;
  out.per_column =
      (features.rowwise() - mean.transpose()).array().square().colwise().sum() / static_cast<double>(m);
  out.mean = out.per_column.mean();
  return out;
}

double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw InvalidInput("cosine_sim: length mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ZeroNorm("cosine_sim: zero-norm vector");
  double s = a.dot(b) / (na * nb);
  if (s > 1.0) s = 1.0;
  if (s < -1.0) s = -1.0;
  return s;
}

}  // namespace sfuda
