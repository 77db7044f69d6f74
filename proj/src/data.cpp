#include "sfuda/data.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sfuda/rng.hpp"

namespace sfuda {

namespace {
constexpr double kBlobRadius = 4.0;
}

Dataset gen_blobs(int num_classes, int per_class, int d_in, double spread, std::uint64_t seed) {
  if (num_classes < 2 || per_class < 1 || d_in < 2 || spread < 0.0)
    throw InvalidInput("gen_blobs: invalid sizes");
  SeededRng rng(seed);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.domain = Dataset::Domain::source;
  ds.inputs.resize(static_cast<Eigen::Index>(num_classes) * per_class, d_in);
  ds.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  Eigen::Index row = 0;
  for (int k = 0; k < num_classes; ++k) {
    const double angle = 2.0 * M_PI * k / num_classes;
    Eigen::VectorXd center = Eigen::VectorXd::Zero(d_in);
    center[0] = kBlobRadius * std::cos(angle);
    center[1] = kBlobRadius * std::sin(angle);
    for (int i = 0; i < per_class; ++i, ++row) {
      for (int j = 0; j < d_in; ++j) ds.inputs(row, j) = center[j] + rng.normal(0.0, spread);
      ds.labels.push_back(k);
    }
  }
  return ds;
}

Dataset apply_shift(const Dataset& ds, const ShiftSpec& spec, std::uint64_t seed) {
  if (spec.scale <= 0.0 || spec.noise_sigma < 0.0) throw InvalidInput("apply_shift: invalid spec");
  SeededRng rng(seed);
  Dataset out = ds;
  out.domain = Dataset::Domain::target;
  const double c = std::cos(spec.angle);
  const double s = std::sin(spec.angle);
  for (Eigen::Index i = 0; i < out.inputs.rows(); ++i) {
    const double a = out.inputs(i, 0);
    const double b = out.inputs(i, 1);
    out.inputs(i, 0) = c * a - s * b;
    out.inputs(i, 1) = s * a + c * b;
    out.inputs.row(i) *= spec.scale;
    if (spec.translation.size()) {
      if (spec.translation.size() != out.inputs.cols())
        throw InvalidInput("apply_shift: translation dimension mismatch");
      out.inputs.row(i) += spec.translation.transpose();
    }
    if (spec.noise_sigma > 0.0)
      for (Eigen::Index j = 0; j < out.inputs.cols(); ++j)
        out.inputs(i, j) += rng.normal(0.0, spec.noise_sigma);
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("save_dataset: cannot open " + path);
  nlohmann::json header = {{"N", ds.num_classes}, {"d_in", ds.dim()}, {"m", ds.size()}};
  f << header.dump() << "\n";
  for (int i = 0; i < ds.size(); ++i) {
    nlohmann::json rec;
    std::vector<double> x(ds.inputs.row(i).begin(), ds.inputs.row(i).end());
    rec["x"] = x;
    if (ds.labeled())
      rec["y"] = ds.labels[static_cast<std::size_t>(i)];
    else
      rec["y"] = nullptr;
    rec["domain"] = ds.domain == Dataset::Domain::source ? "source" : "target";
    f << rec.dump() << "\n";
  }
  if (!f) throw IoError("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("load_dataset: cannot open " + path);
  std::string line;
  int line_no = 1;
  if (!std::getline(f, line)) throw ParseError("load_dataset: missing header", 1);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw ParseError("load_dataset: malformed header", 1);
  }
  if (!header.contains("N") || !header.contains("d_in") || !header.contains("m"))
    throw ParseError("load_dataset: incomplete header", 1);

  Dataset ds;
  ds.num_classes = header["N"].get<int>();
  const int d_in = header["d_in"].get<int>();
  const int m = header["m"].get<int>();
  ds.inputs.resize(m, d_in);

  bool any_label = false;
  std::vector<int> labels(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    ++line_no;
    if (!std::getline(f, line)) throw ParseError("load_dataset: truncated file", line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw ParseError("load_dataset: malformed record", line_no);
    }
    if (!rec.contains("x") || !rec["x"].is_array() ||
        static_cast<int>(rec["x"].size()) != d_in)
      throw ParseError("load_dataset: bad sample vector", line_no);
    for (int j = 0; j < d_in; ++j) ds.inputs(i, j) = rec["x"][static_cast<std::size_t>(j)].get<double>();
    if (rec.contains("y") && !rec["y"].is_null()) {
      labels[static_cast<std::size_t>(i)] = rec["y"].get<int>();
      any_label = true;
    }
    if (rec.contains("domain"))
      ds.domain = rec["domain"] == "target" ? Dataset::Domain::target : Dataset::Domain::source;
  }
  if (any_label) {
    for (int v : labels)
      if (v < 0 || v >= ds.num_classes)
        throw ParseError("load_dataset: label out of range or partially labeled", line_no);
    ds.labels = std::move(labels);
  }
  return ds;
}

ShiftSpec standard_shift(int d_in) {
  ShiftSpec spec;
  spec.angle = 0.6;
  spec.translation = Eigen::VectorXd::Zero(d_in);
  spec.translation[0] = 1.0;
  spec.translation[1] = -0.5;
  spec.scale = 1.0;
  spec.noise_sigma = 0.1;
  return spec;
}

DomainPair standard_blobs_task(std::uint64_t seed) {
  constexpr int kClasses = 4;
  constexpr int kPerClass = 150;
  constexpr int kDim = 6;
  constexpr double kSpread = 1.1;

  DomainPair pair;
  pair.source = gen_blobs(kClasses, kPerClass, kDim, kSpread, seed);
  Dataset target_base = gen_blobs(kClasses, kPerClass, kDim, kSpread, seed + 1);
  Dataset shifted = apply_shift(target_base, standard_shift(kDim), seed + 2);
  pair.target_truth = shifted.labels;
  shifted.labels.clear();
  pair.target = std::move(shifted);
  return pair;
}

}  // namespace sfuda
