#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfuda/data.hpp"
#include "sfuda/pipeline.hpp"
#include "sfuda/training.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;  // config / contract violations
constexpr int kExitIo = 3;    // file system problems

std::vector<int> load_truth(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw sfuda::IoError("cannot open truth file " + path);
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw sfuda::ParseError("bad truth label", line_no);
    }
  }
  if (labels.empty()) throw sfuda::InvalidInput("truth file is empty: " + path);
  return labels;
}

sfuda::LossWeights parse_lambda(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> vals;
  while (std::getline(ss, part, ',')) vals.push_back(std::stod(part));
  if (vals.size() != 3) throw sfuda::InvalidInput("--lambda expects three comma-separated values");
  sfuda::LossWeights w{vals[0], vals[1], vals[2]};
  w.validate(1e-6);
  return w;
}

struct AdaptFlags {
  std::string model_path;
  std::string target_path;
  std::string out_model;
  std::string metrics_dir = "metrics";
  std::string truth_path;
  std::string lambda_text;
  sfuda::AdaptConfig cfg;
  bool no_pla = false;
  bool no_nf = false;
  bool constant_lambda = false;
};

void add_adapt_options(CLI::App* cmd, AdaptFlags& flags) {
  // Options may come from a [subcommand] section of the --config file;
  // command-line flags win over file values.
  cmd->configurable();
  cmd->fallthrough();
  cmd->add_option("--model", flags.model_path, "frozen source model file")->required();
  cmd->add_option("--target", flags.target_path, "target dataset (JSON lines)")->required();
  cmd->add_option("--epochs", flags.cfg.epochs, "adaptation epochs");
  cmd->add_option("--batch-size", flags.cfg.batch_size, "mini-batch size");
  cmd->add_option("--lr", flags.cfg.lr, "learning rate");
  cmd->add_option("--momentum", flags.cfg.momentum, "SGD momentum");
  cmd->add_option("--lambda", flags.lambda_text, "constant loss weights l_con,l_ce,l_clu");
  cmd->add_option("--tau", flags.cfg.tau, "contrastive temperature");
  cmd->add_option("--rho", flags.cfg.rho, "threshold history window");
  cmd->add_option("--rsm-window", flags.cfg.rsm_window, "entropy matrix window (0 = all)");
  cmd->add_option("--seed", flags.cfg.seed, "run seed")->envname("SFUDA_SEED");
  cmd->add_flag("--strict-eq13", flags.cfg.strict_eq13, "keep the 1/rho factor in the threshold");
  cmd->add_flag("--mult-attention", flags.cfg.multiplicative_attention,
                "multiply the contrastive log term by the attention weight");
  cmd->add_flag("--no-pla", flags.no_pla, "disable multi-view contrastive labeling");
  cmd->add_flag("--no-nf", flags.no_nf, "disable noisy-label filtering");
  // Test-harness hook for the fixed-threshold sensitivity sweep.
  cmd->add_option("--fixed-eta", flags.cfg.fixed_theta)->group("");
}

sfuda::AdaptConfig finish_adapt_config(AdaptFlags& flags) {
  sfuda::AdaptConfig cfg = flags.cfg;
  cfg.phase_pla = !flags.no_pla;
  cfg.phase_nf = !flags.no_nf;
  if (!flags.lambda_text.empty()) {
    cfg.lambdas.start = parse_lambda(flags.lambda_text);
    cfg.lambdas.constant = true;
  } else if (flags.constant_lambda) {
    cfg.lambdas.constant = true;
  }
  cfg.validate();
  return cfg;
}

int cmd_gen(const std::string& out_source, const std::string& out_target,
            const std::string& out_truth, int classes, int per_class, int dim, double spread,
            std::uint64_t seed, bool standard) {
  if (standard) {
    const sfuda::DomainPair pair = sfuda::standard_blobs_task(seed);
    sfuda::save_dataset(pair.source, out_source);
    if (!out_target.empty()) sfuda::save_dataset(pair.target, out_target);
    if (!out_truth.empty()) {
      std::ofstream f(out_truth);
      if (!f) throw sfuda::IoError("cannot open " + out_truth);
      for (int y : pair.target_truth) f << y << "\n";
    }
    return kExitOk;
  }
  const sfuda::Dataset src = sfuda::gen_blobs(classes, per_class, dim, spread, seed);
  sfuda::save_dataset(src, out_source);
  if (!out_target.empty()) {
    sfuda::Dataset base = sfuda::gen_blobs(classes, per_class, dim, spread, seed + 1);
    sfuda::Dataset shifted = sfuda::apply_shift(base, sfuda::standard_shift(dim), seed + 2);
    if (!out_truth.empty()) {
      std::ofstream f(out_truth);
      if (!f) throw sfuda::IoError("cannot open " + out_truth);
      for (int y : shifted.labels) f << y << "\n";
    }
    shifted.labels.clear();
    sfuda::save_dataset(shifted, out_target);
  }
  return kExitOk;
}

int cmd_pretrain(const std::string& source_path, const std::string& out_path,
                 const sfuda::PretrainConfig& cfg) {
  const sfuda::Dataset source = sfuda::load_dataset(source_path);
  if (!source.labeled()) throw sfuda::InvalidInput("source dataset is unlabeled");
  const sfuda::ModelParams model = sfuda::pretrain_source(source, cfg);
  sfuda::save_model(model, out_path);
  std::printf("source train accuracy: %.4f\n", sfuda::train_accuracy(model, source));
  return kExitOk;
}

int cmd_adapt(AdaptFlags& flags) {
  const sfuda::AdaptConfig cfg = finish_adapt_config(flags);
  const sfuda::ModelParams source = sfuda::load_model(flags.model_path);
  if (!source.frozen) throw sfuda::InvalidInput("model file is not frozen");
  const sfuda::Dataset target = sfuda::load_dataset(flags.target_path);

  sfuda::EvalLabels truth;
  const bool have_truth = !flags.truth_path.empty();
  if (have_truth) truth.labels = load_truth(flags.truth_path);

  const sfuda::AdaptResult res =
      sfuda::adapt(source, target, cfg, have_truth ? &truth : nullptr);
  if (!flags.out_model.empty()) sfuda::save_model(res.model, flags.out_model);
  if (!res.metrics.empty()) {
    sfuda::emit_metrics(res.metrics, flags.metrics_dir);
    std::ofstream em(flags.metrics_dir + "/entropy_matrix.csv");
    if (!em) throw sfuda::IoError("cannot open entropy matrix CSV");
    em << res.entropy_matrix_csv;
    std::printf("final model accuracy: %.4f\n",
                have_truth ? res.metrics.back().model_accuracy : -1.0);
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path) {
  const sfuda::ModelParams model = sfuda::load_model(model_path);
  const sfuda::Dataset ds = sfuda::load_dataset(data_path);
  if (!ds.labeled()) throw sfuda::InvalidInput("evaluate needs a labeled dataset");
  std::printf("accuracy: %.4f\n", sfuda::train_accuracy(model, ds));
  return kExitOk;
}

int cmd_ablate(AdaptFlags& flags, int n_seeds) {
  if (flags.truth_path.empty()) throw sfuda::InvalidInput("ablate requires --truth");
  const sfuda::AdaptConfig cfg = finish_adapt_config(flags);
  const sfuda::ModelParams source = sfuda::load_model(flags.model_path);
  const sfuda::Dataset target = sfuda::load_dataset(flags.target_path);
  sfuda::EvalLabels truth;
  truth.labels = load_truth(flags.truth_path);

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  const std::vector<sfuda::AblationRow> rows =
      sfuda::ablation_grid(source, target, truth, cfg, seeds);

  std::error_code ec;
  std::filesystem::create_directories(flags.metrics_dir, ec);
  sfuda::write_ablation_table(rows, flags.metrics_dir + "/ablation.csv",
                              flags.metrics_dir + "/ablation.txt");
  for (const auto& row : rows)
    std::printf("%-13s %.4f\n", row.name.c_str(), row.mean_accuracy);
  return kExitOk;
}

int cmd_sweep_lambda(AdaptFlags& flags, double step) {
  if (step <= 0.0 || step > 1.0) throw sfuda::InvalidInput("--grid step must be in (0, 1]");
  const double n_real = 1.0 / step;
  const int n = static_cast<int>(n_real + 0.5);
  if (std::abs(n_real - n) > 1e-9) throw sfuda::InvalidInput("--grid step must divide the simplex");

  const sfuda::AdaptConfig base = finish_adapt_config(flags);
  const sfuda::ModelParams source = sfuda::load_model(flags.model_path);
  const sfuda::Dataset target = sfuda::load_dataset(flags.target_path);
  sfuda::EvalLabels truth;
  const bool have_truth = !flags.truth_path.empty();
  if (have_truth) truth.labels = load_truth(flags.truth_path);

  std::error_code ec;
  std::filesystem::create_directories(flags.metrics_dir, ec);
  const std::string path = flags.metrics_dir + "/lambda_sweep.csv";
  std::ofstream out(path);
  if (!out) throw sfuda::IoError("cannot open " + path);
  out << "lambda_con,lambda_ce,lambda_clu,final_accuracy\n";

  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n - a; ++b) {
      const int c = n - a - b;
      sfuda::AdaptConfig cfg = base;
      cfg.lambdas.start = sfuda::LossWeights{a * step, b * step, c * step};
      cfg.lambdas.constant = true;
      const sfuda::AdaptResult res =
          sfuda::adapt(source, target, cfg, have_truth ? &truth : nullptr);
      const double acc = res.metrics.empty() ? 0.0 : res.metrics.back().model_accuracy;
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.4f,%.4f,%.4f,%.6f\n", a * step, b * step, c * step, acc);
      out << buf;
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-free domain adaptation experiment runner"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file ([section] per subcommand)");
  app.allow_config_extras(false);

  // gen
  auto* gen = app.add_subcommand("gen", "generate synthetic domain-shifted datasets");
  gen->configurable();
  gen->fallthrough();
  std::string gen_source = "source.jsonl", gen_target, gen_truth;
  int gen_classes = 4, gen_per_class = 150, gen_dim = 6;
  double gen_spread = 1.1;
  std::uint64_t gen_seed = 1;
  bool gen_standard = false;
  gen->add_option("--out-source", gen_source, "source dataset path");
  gen->add_option("--out-target", gen_target, "shifted target dataset path (unlabeled)");
  gen->add_option("--truth", gen_truth, "target ground-truth labels path");
  gen->add_option("--classes", gen_classes);
  gen->add_option("--per-class", gen_per_class);
  gen->add_option("--dim", gen_dim);
  gen->add_option("--spread", gen_spread);
  gen->add_option("--seed", gen_seed)->envname("SFUDA_SEED");
  gen->add_flag("--standard", gen_standard, "use the standard shifted-blobs-4 task");

  // pretrain
  auto* pretrain = app.add_subcommand("pretrain", "train and freeze a source model");
  pretrain->configurable();
  pretrain->fallthrough();
  std::string pre_source, pre_out = "source_model.bin";
  sfuda::PretrainConfig pre_cfg;
  pretrain->add_option("--source", pre_source, "labeled source dataset")->required();
  pretrain->add_option("--out", pre_out, "output model file");
  pretrain->add_option("--epochs", pre_cfg.epochs);
  pretrain->add_option("--lr", pre_cfg.lr);
  pretrain->add_option("--momentum", pre_cfg.momentum);
  pretrain->add_option("--batch-size", pre_cfg.batch_size);
  pretrain->add_option("--hidden", pre_cfg.d_h);
  pretrain->add_option("--features", pre_cfg.d_f);
  pretrain->add_option("--seed", pre_cfg.seed)->envname("SFUDA_SEED");

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "adapt a frozen source model to a target set");
  AdaptFlags adapt_flags;
  add_adapt_options(adapt_cmd, adapt_flags);
  adapt_cmd->add_option("--out-model", adapt_flags.out_model, "adapted model output path");
  adapt_cmd->add_option("--metrics", adapt_flags.metrics_dir, "metrics output directory");
  adapt_cmd->add_option("--truth", adapt_flags.truth_path, "evaluation labels (optional)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "accuracy of a model on a labeled dataset");
  evaluate->configurable();
  evaluate->fallthrough();
  std::string eval_model, eval_data;
  evaluate->add_option("--model", eval_model)->required();
  evaluate->add_option("--data", eval_data)->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the four-cell ablation grid");
  AdaptFlags ablate_flags;
  int ablate_seeds = 5;
  add_adapt_options(ablate, ablate_flags);
  ablate->add_option("--truth", ablate_flags.truth_path, "evaluation labels")->required();
  ablate->add_option("--metrics", ablate_flags.metrics_dir, "output directory");
  ablate->add_option("--seeds", ablate_seeds, "number of seeds");

  // sweep-lambda
  auto* sweep = app.add_subcommand("sweep-lambda", "accuracy across the lambda simplex grid");
  AdaptFlags sweep_flags;
  double sweep_step = 0.5;
  add_adapt_options(sweep, sweep_flags);
  sweep->add_option("--grid", sweep_step, "simplex step size")->required();
  sweep->add_option("--truth", sweep_flags.truth_path, "evaluation labels (optional)");
  sweep->add_option("--metrics", sweep_flags.metrics_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUser;
  }

  try {
    if (gen->parsed())
      return cmd_gen(gen_source, gen_target, gen_truth, gen_classes, gen_per_class, gen_dim,
                     gen_spread, gen_seed, gen_standard);
    if (pretrain->parsed()) return cmd_pretrain(pre_source, pre_out, pre_cfg);
    if (adapt_cmd->parsed()) return cmd_adapt(adapt_flags);
    if (evaluate->parsed()) return cmd_evaluate(eval_model, eval_data);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, ablate_seeds);
    if (sweep->parsed()) return cmd_sweep_lambda(sweep_flags, sweep_step);
  } catch (const sfuda::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const sfuda::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUser;
  }
  return kExitUser;
}
