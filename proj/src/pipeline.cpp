#include "sfuda/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sfuda/numeric.hpp"
#include "sfuda/rng.hpp"
#include "sfuda/rsm.hpp"

namespace sfuda {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

LossWeights LambdaSchedule::at(int epoch, int total_epochs) const {
  if (constant || total_epochs <= 1) {
    LossWeights w = start;
    w.validate(1e-6);
    return w;
  }
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  LossWeights w;
  w.con = (1.0 - t) * start.con + t * end.con;
  w.ce = (1.0 - t) * start.ce + t * end.ce;
  w.clu = (1.0 - t) * start.clu + t * end.clu;
  const double sum = w.con + w.ce + w.clu;
  if (sum <= 0.0) throw InvalidInput("LambdaSchedule: degenerate weights");
  w.con /= sum;
  w.ce /= sum;
  w.clu /= sum;
  return w;
}

void AdaptConfig::validate() const {
  if (epochs < 0) throw InvalidInput("AdaptConfig: negative epoch count");
  if (batch_size < 1) throw InvalidInput("AdaptConfig: batch_size must be positive");
  if (lr <= 0.0) throw InvalidInput("AdaptConfig: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidInput("AdaptConfig: momentum out of range");
  if (tau <= 0.0) throw InvalidInput("AdaptConfig: tau must be positive");
  if (rho < 1) throw InvalidInput("AdaptConfig: rho must be positive");
  if (rsm_window < 0) throw InvalidInput("AdaptConfig: rsm_window must be nonnegative");
  if (phase_pla && !phase_pa) throw InvalidInput("AdaptConfig: PLA requires PA");
  if (phase_nf && !phase_pa) throw InvalidInput("AdaptConfig: NF requires PA");
  lambdas.start.validate(1e-6);
  lambdas.end.validate(1e-6);
}

std::vector<TransformSpec> AdaptConfig::effective_views() const {
  if (!views.empty()) return views;
  // Weak + strong default pair.
  return {TransformSpec::jitter(0.05),
          TransformSpec::compose({TransformSpec::rotate(0.3), TransformSpec::scaled(1.1),
                                  TransformSpec::jitter(0.1)})};
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& ground_truth) {
  if (predictions.empty() || ground_truth.empty()) throw EmptyInput("accuracy: empty input");
  if (predictions.size() != ground_truth.size()) throw InvalidInput("accuracy: length mismatch");
  int correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == ground_truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

std::vector<int> predict_labels(const ModelParams& params, const Dataset& ds) {
  std::vector<int> out(static_cast<std::size_t>(ds.size()));
  for (int i = 0; i < ds.size(); ++i)
    out[static_cast<std::size_t>(i)] =
        predict_with_entropy(params, ds.inputs.row(i).transpose()).label;
  return out;
}

namespace {

// Accuracy of a subset of pseudo-labels against the truth handle.
double subset_accuracy(const std::vector<PseudoLabel>& pseudo, const std::vector<int>& subset,
                       const EvalLabels& truth) {
  if (subset.empty()) return 0.0;
  int correct = 0;
  for (int idx : subset)
    if (pseudo[static_cast<std::size_t>(idx)].label == truth.labels[static_cast<std::size_t>(idx)])
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(subset.size());
}

}  // namespace

AdaptResult adapt(const ModelParams& source, const Dataset& target, const AdaptConfig& cfg,
                  const EvalLabels* truth) {
  cfg.validate();
  if (!source.frozen) throw FrozenModel("adapt: source model must be frozen");
  if (target.size() == 0) throw EmptyInput("adapt: empty target set");
  if (target.dim() != source.d_in()) throw InvalidInput("adapt: input dimension mismatch");
  if (truth && static_cast<int>(truth->labels.size()) != target.size())
    throw InvalidInput("adapt: truth label count mismatch");

  const int n_classes = source.num_classes();
  const int m = target.size();
  const double log_n = std::log(static_cast<double>(n_classes));

  AdaptResult result;
  result.model = source;
  result.model.frozen = false;

  SeededRng rng(cfg.seed);
  SgdState sgd;
  EntropyMatrix entropy_matrix(n_classes);
  ThresholdHistory history;
  history.window = cfg.rho;

  const std::vector<TransformSpec> view_specs =
      cfg.phase_pla ? cfg.effective_views() : std::vector<TransformSpec>{TransformSpec::identity()};
  const int num_views = static_cast<int>(view_specs.size());

  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochMetrics em;
    em.epoch = epoch;
    em.view_weights = Eigen::VectorXd::Constant(num_views, 1.0 / num_views);

    // Entropy pass over the whole target set, grouped by predicted class.
    std::vector<double> raw_entropy(static_cast<std::size_t>(m));
    std::vector<int> predicted(static_cast<std::size_t>(m));
    std::vector<std::vector<double>> per_class_h(static_cast<std::size_t>(n_classes));
    std::vector<std::vector<int>> per_class_ids(static_cast<std::size_t>(n_classes));
    for (int i = 0; i < m; ++i) {
      const Prediction p = predict_with_entropy(result.model, target.inputs.row(i).transpose());
      raw_entropy[static_cast<std::size_t>(i)] = p.entropy;
      predicted[static_cast<std::size_t>(i)] = p.label;
      per_class_h[static_cast<std::size_t>(p.label)].push_back(p.entropy);
      per_class_ids[static_cast<std::size_t>(p.label)].push_back(i);
    }

    const IterationEntropies iter = record_iteration(entropy_matrix, per_class_h);
    // Selection threshold on the per-class normalized scale; the reported eta
    // tracks the raw per-class minima so the trajectory stays informative.
    const double eta_sel = compute_threshold(entropy_matrix, cfg.rsm_window, EntropyTrack::normalized);
    em.eta = compute_threshold(entropy_matrix, cfg.rsm_window, EntropyTrack::raw) / log_n;

    if (truth) em.model_accuracy = accuracy(predict_labels(result.model, target), truth->labels);

    if (!cfg.phase_pa) {
      result.metrics.push_back(std::move(em));
      continue;  // direct transfer: no pseudo-labels, no updates
    }

    // Phase 1: reliable samples and prototypes.
    std::vector<std::vector<std::pair<int, double>>> per_class_pairs(
        static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c)
      for (std::size_t j = 0; j < per_class_ids[static_cast<std::size_t>(c)].size(); ++j)
        per_class_pairs[static_cast<std::size_t>(c)].emplace_back(
            per_class_ids[static_cast<std::size_t>(c)][j],
            iter.normalized[static_cast<std::size_t>(c)][j]);
    const std::vector<std::vector<int>> reliable = select_reliable(per_class_pairs, eta_sel);

    std::vector<int> reliable_ids;
    std::vector<int> reliable_labels;
    for (int c = 0; c < n_classes; ++c)
      for (int id : reliable[static_cast<std::size_t>(c)]) {
        reliable_ids.push_back(id);
        reliable_labels.push_back(c);
      }
    Eigen::MatrixXd reliable_features(static_cast<Eigen::Index>(reliable_ids.size()),
                                      result.model.d_f());
    for (std::size_t j = 0; j < reliable_ids.size(); ++j)
      reliable_features.row(static_cast<Eigen::Index>(j)) =
          forward(result.model, target.inputs.row(reliable_ids[j]).transpose()).features.transpose();
    const PrototypeSet prototypes =
        compute_prototypes(reliable_features, reliable_labels, n_classes);

    // Phase 2: views, fusion, clustering, pseudo-labels.
    const std::vector<Eigen::MatrixXd> aug_inputs = augment_batch(target.inputs, view_specs, rng);
    std::vector<Eigen::MatrixXd> view_features;
    view_features.reserve(aug_inputs.size());
    for (const auto& v : aug_inputs) view_features.push_back(extract_features(result.model, v));

    Eigen::VectorXd weights;
    if (cfg.phase_pla) {
      weights = view_weights(view_features);
    } else {
      weights = Eigen::VectorXd::Constant(num_views, 1.0 / num_views);
    }
    em.view_weights = weights;

    const Eigen::MatrixXd fused = fuse(view_features, weights);
    ClusterResult clusters;
    if (cfg.phase_pla) {
      clusters = kmeans(fused, n_classes, rng, 100, 1e-10, 3);
      em.inertia = clusters.inertia;
    }

    const Eigen::MatrixXd plain_features = extract_features(result.model, target.inputs);
    const std::vector<PseudoLabel> pseudo = assign_pseudo_labels(plain_features, prototypes);

    // Phase 3: adaptive filtering on the [0,1] entropy scale.
    std::vector<double> scaled_entropy(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      scaled_entropy[static_cast<std::size_t>(i)] = raw_entropy[static_cast<std::size_t>(i)] / log_n;
    std::vector<std::vector<double>> per_pseudo_class(static_cast<std::size_t>(n_classes));
    for (int i = 0; i < m; ++i)
      per_pseudo_class[static_cast<std::size_t>(pseudo[static_cast<std::size_t>(i)].label)]
          .push_back(scaled_entropy[static_cast<std::size_t>(i)]);

    const double theta = epoch_threshold(per_pseudo_class);
    history.push(theta);
    double theta_star = weighted_threshold(
        history, cfg.strict_eq13 ? Eq13Mode::literal : Eq13Mode::attention_average);
    if (cfg.fixed_theta >= 0.0) theta_star = cfg.fixed_theta;
    em.theta_star = theta_star;

    // The attention weighting needs a full rho-epoch window before the
    // averaged threshold says anything about the trend; filtering on an
    // underfull history locks early, still-noisy pseudo-labels in. Until the
    // window fills (or a fixed threshold sidesteps the history entirely) the
    // whole batch is retained.
    const bool filter_ready =
        cfg.fixed_theta >= 0.0 || static_cast<int>(history.size()) >= cfg.rho;
    std::vector<int> retained;
    if (cfg.phase_nf && filter_ready) {
      FilterResult fr = filter_labels(scaled_entropy, theta_star);
      retained = std::move(fr.retained);
      em.labeling_rate = fr.labeling_rate;
      // The max-of-min threshold is meant to keep every class represented;
      // the attention-weighted average can undercut a class's minimum, so the
      // lowest-entropy sample of any dropped pseudo-class is re-added. This
      // keeps the retained set class-covering and the cross-entropy term
      // defined even when the filter would otherwise retain nothing.
      std::vector<char> covered(static_cast<std::size_t>(n_classes), 0);
      for (int idx : retained) covered[static_cast<std::size_t>(pseudo[static_cast<std::size_t>(idx)].label)] = 1;
      for (int c = 0; c < n_classes; ++c) {
        if (covered[static_cast<std::size_t>(c)]) continue;
        int best = -1;
        for (int i = 0; i < m; ++i) {
          if (pseudo[static_cast<std::size_t>(i)].label != c) continue;
          if (best < 0 || scaled_entropy[static_cast<std::size_t>(i)] <
                              scaled_entropy[static_cast<std::size_t>(best)])
            best = i;
        }
        if (best >= 0) retained.push_back(best);
      }
      em.labeling_rate = static_cast<double>(retained.size()) / m;
    } else {
      retained.resize(static_cast<std::size_t>(m));
      std::iota(retained.begin(), retained.end(), 0);
      em.labeling_rate = 1.0;
    }

    if (truth) {
      std::vector<int> all(static_cast<std::size_t>(m));
      std::iota(all.begin(), all.end(), 0);
      em.pseudo_label_accuracy_all = subset_accuracy(pseudo, all, *truth);
      em.pseudo_label_accuracy = subset_accuracy(pseudo, retained, *truth);
    }

    // Optimization over shuffled mini-batches with epoch-fixed weights,
    // centroids, assignments, and attention.
    const LossWeights lambda =
        cfg.phase_pla ? cfg.lambdas.at(epoch, cfg.epochs) : LossWeights{0.0, 1.0, 0.0};
    std::vector<char> is_retained(static_cast<std::size_t>(m), 0);
    for (int idx : retained) is_retained[static_cast<std::size_t>(idx)] = 1;

    for (int i = m - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

    double sum_con = 0.0, sum_ce = 0.0, sum_clu = 0.0, sum_total = 0.0;
    int batches = 0;
    for (int start = 0; start < m; start += cfg.batch_size) {
      const int count = std::min(cfg.batch_size, m - start);
      LossBatch batch;
      batch.tau = cfg.tau;
      batch.multiplicative_attention = cfg.multiplicative_attention;

      std::vector<int> ce_ids;
      for (int i = 0; i < count; ++i) {
        const int idx = order[static_cast<std::size_t>(start + i)];
        if (is_retained[static_cast<std::size_t>(idx)]) ce_ids.push_back(idx);
      }
      batch.ce_inputs.resize(static_cast<Eigen::Index>(ce_ids.size()), target.dim());
      batch.ce_labels.resize(ce_ids.size());
      for (std::size_t j = 0; j < ce_ids.size(); ++j) {
        batch.ce_inputs.row(static_cast<Eigen::Index>(j)) = target.inputs.row(ce_ids[j]);
        batch.ce_labels[j] = pseudo[static_cast<std::size_t>(ce_ids[j])].label;
      }

      if (cfg.phase_pla) {
        batch.view_inputs.resize(static_cast<std::size_t>(num_views));
        for (int v = 0; v < num_views; ++v) {
          batch.view_inputs[static_cast<std::size_t>(v)].resize(count, target.dim());
          for (int i = 0; i < count; ++i)
            batch.view_inputs[static_cast<std::size_t>(v)].row(i) =
                aug_inputs[static_cast<std::size_t>(v)].row(
                    order[static_cast<std::size_t>(start + i)]);
        }
        batch.view_weights = weights;
        batch.centroids = clusters.centroids;
        batch.assignments.resize(static_cast<std::size_t>(count));
        Eigen::MatrixXd emb(2 * count, result.model.d_f());
        for (int i = 0; i < count; ++i) {
          const int idx = order[static_cast<std::size_t>(start + i)];
          batch.assignments[static_cast<std::size_t>(i)] =
              clusters.assignments[static_cast<std::size_t>(idx)];
          emb.row(2 * i) = view_features[0].row(idx);
          emb.row(2 * i + 1) = view_features[1].row(idx);
        }
        batch.attention = pair_attention(emb, cfg.tau);
      }

      if (!batch.has_ce() && !batch.has_views()) continue;
      Gradients grads;
      const LossValue loss = loss_and_grad(result.model, batch, lambda, &grads);
      sgd_step(result.model, grads, cfg.lr, cfg.momentum, sgd);
      sum_con += loss.contrastive;
      sum_ce += loss.cross_entropy;
      sum_clu += loss.cluster;
      sum_total += loss.total;
      ++batches;
    }
    if (batches > 0) {
      em.l_con = sum_con / batches;
      em.l_ce = sum_ce / batches;
      em.l_clu = sum_clu / batches;
      em.l_total = sum_total / batches;
    }

    if (truth) em.model_accuracy = accuracy(predict_labels(result.model, target), truth->labels);
    result.metrics.push_back(std::move(em));
  }

  std::ostringstream csv;
  entropy_matrix.dump_csv(csv);
  result.entropy_matrix_csv = csv.str();
  return result;
}

std::vector<AblationRow> ablation_grid(const ModelParams& source, const Dataset& target,
                                       const EvalLabels& truth, const AdaptConfig& base_cfg,
                                       const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw EmptyInput("ablation_grid: no seeds");
  struct Cell {
    const char* name;
    bool pa, pla, nf;
  };
  const Cell cells[] = {{"Base", false, false, false},
                        {"+PA", true, false, false},
                        {"+PA+PLA", true, true, false},
                        {"+PA+PLA+NF", true, true, true}};
  std::vector<AblationRow> rows;
  for (const Cell& cell : cells) {
    AblationRow row;
    row.name = cell.name;
    for (std::uint64_t seed : seeds) {
      AdaptConfig cfg = base_cfg;
      cfg.seed = seed;
      cfg.phase_pa = cell.pa;
      cfg.phase_pla = cell.pla;
      cfg.phase_nf = cell.nf;
      const AdaptResult res = adapt(source, target, cfg, &truth);
      row.per_seed_accuracy.push_back(
          accuracy(predict_labels(res.model, target), truth.labels));
    }
    row.mean_accuracy =
        std::accumulate(row.per_seed_accuracy.begin(), row.per_seed_accuracy.end(), 0.0) /
        static_cast<double>(row.per_seed_accuracy.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  if (history.empty()) throw EmptyInput("metrics_csv: empty history");
  std::ostringstream os;
  os << "epoch,eta,theta_star,labeling_rate,pseudo_label_accuracy,pseudo_label_accuracy_all,"
        "model_accuracy,l_con,l_ce,l_clu,l_total";
  const Eigen::Index n_views = history.front().view_weights.size();
  for (Eigen::Index v = 0; v < n_views; ++v) os << ",w_" << (v + 1);
  os << ",inertia\n";
  for (const EpochMetrics& em : history) {
    os << em.epoch << "," << fmt_double(em.eta) << "," << fmt_double(em.theta_star) << ","
       << fmt_double(em.labeling_rate) << "," << fmt_double(em.pseudo_label_accuracy) << ","
       << fmt_double(em.pseudo_label_accuracy_all) << "," << fmt_double(em.model_accuracy) << ","
       << fmt_double(em.l_con) << "," << fmt_double(em.l_ce) << "," << fmt_double(em.l_clu) << ","
       << fmt_double(em.l_total);
    for (Eigen::Index v = 0; v < n_views; ++v)
      os << "," << fmt_double(v < em.view_weights.size() ? em.view_weights[v] : 0.0);
    os << "," << fmt_double(em.inertia) << "\n";
  }
  return os.str();
}

void emit_metrics(const std::vector<EpochMetrics>& history, const std::string& dir) {
  if (history.empty()) throw EmptyInput("emit_metrics: empty history");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  const std::string csv_path = dir + "/metrics.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("emit_metrics: cannot open " + csv_path);
  csv << metrics_csv(history);
  if (!csv) throw IoError("emit_metrics: write failed for " + csv_path);

  nlohmann::json summary = {{"final_accuracy", history.back().model_accuracy},
                            {"final_labeling_rate", history.back().labeling_rate},
                            {"epochs", history.size()}};
  const std::string json_path = dir + "/summary.json";
  std::ofstream js(json_path);
  if (!js) throw IoError("emit_metrics: cannot open " + json_path);
  js << summary.dump(2) << "\n";
  if (!js) throw IoError("emit_metrics: write failed for " + json_path);
}

void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& csv_path,
                          const std::string& txt_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("write_ablation_table: cannot open " + csv_path);
  csv << "variant,mean_accuracy";
  if (!rows.empty())
    for (std::size_t s = 0; s < rows.front().per_seed_accuracy.size(); ++s)
      csv << ",seed_" << (s + 1);
  csv << "\n";
  for (const AblationRow& row : rows) {
    csv << row.name << "," << fmt_double(row.mean_accuracy);
    for (double a : row.per_seed_accuracy) csv << "," << fmt_double(a);
    csv << "\n";
  }

  std::ofstream txt(txt_path);
  if (!txt) throw IoError("write_ablation_table: cannot open " + txt_path);
  txt << "variant       mean_accuracy\n";
  char buf[64];
  for (const AblationRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-13s %.4f\n", row.name.c_str(), row.mean_accuracy);
    txt << buf;
  }
}

}  // namespace sfuda
