#pragma once

#include <Eigen/Dense>

#include "sfuda/errors.hpp"

namespace sfuda {

// Numerically stable softmax (max-subtracted). Throws InvalidInput on
// non-finite entries, EmptyInput on an empty vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// True when v is a probability vector: entries in [0,1], sum 1 within 1e-9.
bool is_prob_vector(const Eigen::VectorXd& v);

// Shannon self-entropy with natural log; zero entries contribute zero.
// Input must satisfy is_prob_vector.
double self_entropy(const Eigen::VectorXd& p);

struct MinMaxResult {
  Eigen::VectorXd values;
  bool degenerate = false;  // all inputs equal (or single element): output is all zeros
};

// Maps min to 0 and max to 1. A zero-width range yields all zeros with the
// degenerate flag set instead of NaNs.
MinMaxResult minmax_normalize(const Eigen::VectorXd& values);

struct ColumnVariance {
  Eigen::VectorXd per_column;  // population variance of each column
  double mean = 0.0;           // average over columns
};

ColumnVariance column_mean_variance(const Eigen::MatrixXd& features);

// Cosine similarity in [-1, 1]. Throws ZeroNorm if either vector has zero norm.
double cosine_sim(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace sfuda
