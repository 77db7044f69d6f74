#include "sfuda/filter.hpp"

#include <algorithm>
#include <cmath>

#include "sfuda/numeric.hpp"

namespace sfuda {

void ThresholdHistory::push(double theta) {
  if (window < 1) throw InvalidInput("ThresholdHistory: window must be positive");
  thetas.push_back(theta);
  while (static_cast<int>(thetas.size()) > window) thetas.erase(thetas.begin());
}

double epoch_threshold(const std::vector<std::vector<double>>& per_class_entropy_sets) {
  double theta = -1.0;
  bool any = false;
  for (const auto& set : per_class_entropy_sets) {
    if (set.empty()) continue;
    theta = std::max(theta, *std::min_element(set.begin(), set.end()));
    any = true;
  }
  if (!any) throw EmptyInput("epoch_threshold: all class sets empty");
  return theta;
}

AttentionWeights attention_scores(const ThresholdHistory& history) {
  if (history.empty()) throw EmptyInput("attention_scores: empty history");
  const int rho = history.size();
  const Eigen::Map<const Eigen::VectorXd> thetas(history.thetas.data(), rho);
  const double mean = thetas.mean();
  AttentionWeights w;
  w.scores = mean * thetas / std::sqrt(static_cast<double>(rho));
  w.alphas = softmax(w.scores);
  return w;
}

double weighted_threshold(const ThresholdHistory& history, Eq13Mode mode) {
  if (history.empty()) throw EmptyInput("weighted_threshold: empty history");
  const AttentionWeights w = attention_scores(history);
  const int rho = history.size();
  double sum = 0.0;
  for (int i = 0; i < rho; ++i) sum += w.alphas[i] * history.thetas[static_cast<std::size_t>(i)];
  return mode == Eq13Mode::literal ? sum / rho : sum;
}

FilterResult filter_labels(const std::vector<double>& entropies, double theta_star) {
  FilterResult res;
  for (std::size_t i = 0; i < entropies.size(); ++i)
    if (entropies[i] <= theta_star) res.retained.push_back(static_cast<int>(i));
  res.labeling_rate = entropies.empty()
                          ? 0.0
                          : static_cast<double>(res.retained.size()) / static_cast<double>(entropies.size());
  return res;
}

}  // namespace sfuda
