#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <utility>
#include <vector>

#include "sfuda/errors.hpp"

namespace sfuda {

// Per-iteration, per-class entropy bookkeeping. Each appended row carries two
// tracks for every class:
//   normalized: minimum of the class's min-max-normalized entropy list
//               (zero whenever the class is nonempty, by construction)
//   raw:        minimum raw entropy of the class
// Classes with no predicted samples in an iteration hold a missing sentinel
// (NaN) in both tracks.
class EntropyMatrix {
 public:
  explicit EntropyMatrix(int num_classes);

  int rows() const { return static_cast<int>(normalized_.size()); }
  int cols() const { return num_classes_; }

  double entry(int row, int cls) const { return normalized_.at(row).at(cls); }
  double raw_entry(int row, int cls) const { return raw_.at(row).at(cls); }
  static bool is_missing(double v) { return v != v; }

  void append_row(const std::vector<double>& normalized, const std::vector<double>& raw);

  // One row per iteration, one column per class, missing entries left empty.
  // Values are the raw per-class minima, which carry the eta trajectory.
  void dump_csv(std::ostream& os) const;

 private:
  int num_classes_;
  std::vector<std::vector<double>> normalized_;
  std::vector<std::vector<double>> raw_;
};

struct IterationEntropies {
  // Per class: min-max-normalized entropies aligned with the input order.
  std::vector<std::vector<double>> normalized;
  std::vector<bool> degenerate;  // per class, all raw entropies equal
};

// Normalizes each nonempty class list, appends a row to the matrix, and
// returns the normalized lists for reliable-sample selection. Throws
// EmptyIteration when every class list is empty.
IterationEntropies record_iteration(EntropyMatrix& matrix,
                                    const std::vector<std::vector<double>>& per_class_entropies);

enum class EntropyTrack { normalized, raw };

// eta = max over rows of (min over present columns). window limits the
// computation to the most recent rows; 0 means full history.
double compute_threshold(const EntropyMatrix& matrix, int window = 0,
                         EntropyTrack track = EntropyTrack::normalized);

// Sorted ascending then chunked into n_rows rows; remainder samples go to the
// last row. Sample ids stay aligned with their entropy values.
struct ReliableSampleMemory {
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<int>> id_rows;
};

ReliableSampleMemory build_memory(const std::vector<std::pair<int, double>>& entropies, int n_rows);

// Per class, the ids whose normalized entropy is <= eta. Input lists pair
// sample id with normalized entropy.
std::vector<std::vector<int>> select_reliable(
    const std::vector<std::vector<std::pair<int, double>>>& per_class, double eta);

struct PrototypeSet {
  Eigen::MatrixXd prototypes;      // one row per class, unit norm where present
  std::vector<int> support_count;  // reliable samples used per class
  std::vector<bool> present;

  int num_classes() const { return static_cast<int>(support_count.size()); }
  bool any_present() const;
};

// c_k = L2-normalized mean of the reliable features of class k. A class with
// no samples, or whose mean has zero norm, is marked absent.
PrototypeSet compute_prototypes(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                int num_classes);

}  // namespace sfuda
