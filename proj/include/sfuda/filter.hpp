#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sfuda/errors.hpp"

namespace sfuda {

// Sliding window of per-epoch thresholds theta_1..theta_rho.
struct ThresholdHistory {
  std::vector<double> thetas;
  int window = 5;

  void push(double theta);
  bool empty() const { return thetas.empty(); }
  int size() const { return static_cast<int>(thetas.size()); }
};

// theta = max over nonempty classes of the class minimum entropy.
double epoch_threshold(const std::vector<std::vector<double>>& per_class_entropy_sets);

struct AttentionWeights {
  Eigen::VectorXd scores;  // S_i = (mean(theta) * theta_i) / sqrt(rho)
  Eigen::VectorXd alphas;  // softmax of scores
};

AttentionWeights attention_scores(const ThresholdHistory& history);

enum class Eq13Mode {
  literal,            // (1/rho) * sum alpha_i theta_i, as printed
  attention_average,  // sum alpha_i theta_i (drops the shrinking 1/rho factor)
};

double weighted_threshold(const ThresholdHistory& history, Eq13Mode mode = Eq13Mode::literal);

struct FilterResult {
  std::vector<int> retained;  // indices into the input entropy list
  double labeling_rate = 0.0;
};

// Retains exactly the samples with entropy <= theta_star. Entropies must be
// on the same scale as the threshold history.
FilterResult filter_labels(const std::vector<double>& entropies, double theta_star);

}  // namespace sfuda
