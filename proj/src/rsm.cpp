#include "sfuda/rsm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sfuda/numeric.hpp"

namespace sfuda {

namespace {
constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
}

EntropyMatrix::EntropyMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 1) throw InvalidInput("EntropyMatrix: need at least one class");
}

void EntropyMatrix::append_row(const std::vector<double>& normalized,
                               const std::vector<double>& raw) {
  if (static_cast<int>(normalized.size()) != num_classes_ ||
      static_cast<int>(raw.size()) != num_classes_)
    throw InvalidInput("EntropyMatrix::append_row: column count mismatch");
  normalized_.push_back(normalized);
  raw_.push_back(raw);
}

void EntropyMatrix::dump_csv(std::ostream& os) const {
  for (int c = 0; c < num_classes_; ++c) os << (c ? "," : "") << "class_" << c;
  os << "\n";
  char buf[32];
  for (const auto& row : raw_) {
    for (int c = 0; c < num_classes_; ++c) {
      if (c) os << ",";
      if (!is_missing(row[c])) {
        std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
        os << buf;
      }
    }
    os << "\n";
  }
}

IterationEntropies record_iteration(EntropyMatrix& matrix,
                                    const std::vector<std::vector<double>>& per_class_entropies) {
  if (static_cast<int>(per_class_entropies.size()) != matrix.cols())
    throw InvalidInput("record_iteration: class count mismatch");
  bool all_empty = true;
  for (const auto& lst : per_class_entropies)
    if (!lst.empty()) all_empty = false;
  if (all_empty) throw EmptyIteration("record_iteration: every class list is empty");

  IterationEntropies out;
  out.normalized.resize(per_class_entropies.size());
  out.degenerate.assign(per_class_entropies.size(), false);
  std::vector<double> norm_row(per_class_entropies.size(), kMissing);
  std::vector<double> raw_row(per_class_entropies.size(), kMissing);

  for (std::size_t c = 0; c < per_class_entropies.size(); ++c) {
    const auto& lst = per_class_entropies[c];
    if (lst.empty()) continue;
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(lst.data(), static_cast<Eigen::Index>(lst.size()));
    const MinMaxResult mm = minmax_normalize(v);
    out.normalized[c].assign(mm.values.data(), mm.values.data() + mm.values.size());
    out.degenerate[c] = mm.degenerate;
    norm_row[c] = mm.values.minCoeff();
    raw_row[c] = v.minCoeff();
  }
  matrix.append_row(norm_row, raw_row);
  return out;
}

double compute_threshold(const EntropyMatrix& matrix, int window, EntropyTrack track) {
  if (matrix.rows() == 0) throw EmptyInput("compute_threshold: empty matrix");
  const int first = window > 0 ? std::max(0, matrix.rows() - window) : 0;
  double eta = -std::numeric_limits<double>::infinity();
  for (int i = first; i < matrix.rows(); ++i) {
    double row_min = std::numeric_limits<double>::infinity();
    for (int c = 0; c < matrix.cols(); ++c) {
      const double v = track == EntropyTrack::normalized ? matrix.entry(i, c) : matrix.raw_entry(i, c);
      if (!EntropyMatrix::is_missing(v)) row_min = std::min(row_min, v);
    }
    if (!std::isinf(row_min)) eta = std::max(eta, row_min);
  }
  if (std::isinf(eta)) throw EmptyInput("compute_threshold: no present entries");
  return eta;
}

ReliableSampleMemory build_memory(const std::vector<std::pair<int, double>>& entropies,
                                  int n_rows) {
  const int n_total = static_cast<int>(entropies.size());
  if (n_rows <= 0 || n_rows > n_total) throw InvalidInput("build_memory: invalid row count");

  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(entropies.size());
  for (const auto& [id, h] : entropies) sorted.emplace_back(h, id);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const int row_size = n_total / n_rows;
  ReliableSampleMemory mem;
  mem.rows.resize(n_rows);
  mem.id_rows.resize(n_rows);
  int idx = 0;
  for (int r = 0; r < n_rows; ++r) {
    const int count = (r == n_rows - 1) ? n_total - idx : row_size;
    for (int k = 0; k < count; ++k, ++idx) {
      mem.rows[r].push_back(sorted[idx].first);
      mem.id_rows[r].push_back(sorted[idx].second);
    }
  }
  return mem;
}

std::vector<std::vector<int>> select_reliable(
    const std::vector<std::vector<std::pair<int, double>>>& per_class, double eta) {
  std::vector<std::vector<int>> out(per_class.size());
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (const auto& [id, h] : per_class[c])
      if (h <= eta) out[c].push_back(id);
  }
  return out;
}

bool PrototypeSet::any_present() const {
  return std::any_of(present.begin(), present.end(), [](bool p) { return p; });
}

PrototypeSet compute_prototypes(const Eigen::MatrixXd& features, const std::vector<int>& labels,
                                int num_classes) {
  if (static_cast<Eigen::Index>(labels.size()) != features.rows())
    throw InvalidInput("compute_prototypes: label count mismatch");
  PrototypeSet set;
  set.prototypes = Eigen::MatrixXd::Zero(num_classes, features.cols());
  set.support_count.assign(num_classes, 0);
  set.present.assign(num_classes, false);

  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(num_classes, features.cols());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const int k = labels[i];
    if (k < 0 || k >= num_classes) throw InvalidInput("compute_prototypes: label out of range");
    sums.row(k) += features.row(i);
    ++set.support_count[k];
  }
  for (int k = 0; k < num_classes; ++k) {
    if (set.support_count[k] == 0) continue;
    const Eigen::RowVectorXd mean = sums.row(k) / set.support_count[k];
    const double norm = mean.norm();
    if (norm == 0.0) continue;  // zero-norm mean, class stays absent
    set.prototypes.row(k) = mean / norm;
    set.present[k] = true;
  }
  return set;
}

}  // namespace sfuda
