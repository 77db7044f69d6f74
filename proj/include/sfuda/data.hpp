#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sfuda/errors.hpp"

namespace sfuda {

struct Dataset {
  enum class Domain { source, target };

  Eigen::MatrixXd inputs;   // m x d_in
  std::vector<int> labels;  // empty when unlabeled
  Domain domain = Domain::source;
  int num_classes = 0;

  bool labeled() const { return !labels.empty(); }
  int size() const { return static_cast<int>(inputs.rows()); }
  int dim() const { return static_cast<int>(inputs.cols()); }
};

// Gaussian blobs, class k centered on a radius-4 circle in the (0,1) plane,
// i.i.d. spread sigma in every coordinate. Exactly per_class samples per class.
Dataset gen_blobs(int num_classes, int per_class, int d_in, double spread, std::uint64_t seed);

struct ShiftSpec {
  double angle = 0.0;  // rotation in the (0,1) plane
  Eigen::VectorXd translation;
  double scale = 1.0;
  double noise_sigma = 0.0;
};

// rotate -> scale -> translate -> add noise; labels carried over for
// evaluation only, domain tag set to target.
Dataset apply_shift(const Dataset& ds, const ShiftSpec& spec, std::uint64_t seed);

// JSON-lines format: header {"N":..,"d_in":..,"m":..}, then one record per
// sample {"x":[...],"y":int|null,"domain":"source"|"target"}.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// The standard desk-scale benchmark: 4 classes, 150 samples each, 6-dim
// inputs, shift = 0.6 rad rotation + translation (1, -0.5) + noise 0.1.
struct DomainPair {
  Dataset source;            // labeled
  Dataset target;            // unlabeled
  std::vector<int> target_truth;  // evaluation only
};

DomainPair standard_blobs_task(std::uint64_t seed);

ShiftSpec standard_shift(int d_in);

}  // namespace sfuda
