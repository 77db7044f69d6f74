#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "sfuda/data.hpp"
#include "sfuda/filter.hpp"
#include "sfuda/model.hpp"
#include "sfuda/mvcl.hpp"
#include "sfuda/training.hpp"

namespace sfuda {

// Linear interpolation between two simplex points, renormalized per epoch.
struct LambdaSchedule {
  LossWeights start{0.3, 0.4, 0.3};
  LossWeights end{0.15, 0.7, 0.15};
  bool constant = false;

  LossWeights at(int epoch, int total_epochs) const;
};

struct AdaptConfig {
  // The filtered cross-entropy term acts as a curriculum: retention starts
  // near 5% and widens as entropies fall, so the schedule needs room to let
  // the retained set catch up with the pseudo-labels.
  int epochs = 80;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  LambdaSchedule lambdas;
  double tau = 0.5;
  std::vector<TransformSpec> views;  // empty -> default weak + strong pair
  int rho = 5;                       // threshold history window
  int rsm_window = 5;                // rows of E considered by the threshold
  std::uint64_t seed = 1;
  bool strict_eq13 = false;          // keep the printed 1/rho factor
  bool multiplicative_attention = false;
  double fixed_theta = -1.0;         // >= 0 overrides the adaptive filter threshold
  bool phase_pa = true;              // prototype generation + pseudo-label CE
  bool phase_pla = true;             // multi-view contrastive labeling
  bool phase_nf = true;              // noisy-label filtering

  void validate() const;
  std::vector<TransformSpec> effective_views() const;
};

struct EpochMetrics {
  int epoch = 0;
  double eta = 0.0;
  double theta_star = 0.0;
  double labeling_rate = 0.0;
  double pseudo_label_accuracy = 0.0;      // retained subset vs truth
  double pseudo_label_accuracy_all = 0.0;  // all assignments vs truth
  double model_accuracy = 0.0;
  double l_con = 0.0;
  double l_ce = 0.0;
  double l_clu = 0.0;
  double l_total = 0.0;
  Eigen::VectorXd view_weights;
  double inertia = 0.0;
};

// Ground-truth target labels, accepted only by evaluation paths.
struct EvalLabels {
  std::vector<int> labels;
};

struct AdaptResult {
  ModelParams model;
  std::vector<EpochMetrics> metrics;
  std::string entropy_matrix_csv;  // one row per epoch, one column per class
};

// Full three-phase adaptation of a frozen source model to an unlabeled
// target set. Truth labels, when given, feed the accuracy metrics only.
AdaptResult adapt(const ModelParams& source, const Dataset& target, const AdaptConfig& cfg,
                  const EvalLabels* truth = nullptr);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& ground_truth);

std::vector<int> predict_labels(const ModelParams& params, const Dataset& ds);

struct AblationRow {
  std::string name;
  std::vector<double> per_seed_accuracy;
  double mean_accuracy = 0.0;
};

// The four-cell ablation: Base, +PA, +PA+PLA, +PA+PLA+NF, sharing seeds.
std::vector<AblationRow> ablation_grid(const ModelParams& source, const Dataset& target,
                                       const EvalLabels& truth, const AdaptConfig& base_cfg,
                                       const std::vector<std::uint64_t>& seeds);

// metrics.csv (one row per epoch) and summary.json
// {final_accuracy, final_labeling_rate, epochs} under the given directory.
void emit_metrics(const std::vector<EpochMetrics>& history, const std::string& dir);

std::string metrics_csv(const std::vector<EpochMetrics>& history);

void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& csv_path,
                          const std::string& txt_path);

}  // namespace sfuda
