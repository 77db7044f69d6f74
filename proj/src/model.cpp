#include "sfuda/model.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sfuda/numeric.hpp"

namespace sfuda {

namespace {

Eigen::MatrixXd uniform_matrix(int rows, int cols, double bound, SeededRng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

ModelParams init_params(int d_in, int d_h, int d_f, int num_classes, SeededRng& rng) {
  if (d_in < 1 || d_h < 1 || d_f < 1 || num_classes < 2)
    throw InvalidInput("init_params: invalid dimensions");
  ModelParams p;
  p.w1 = uniform_matrix(d_in, d_h, 1.0 / std::sqrt(static_cast<double>(d_in)), rng);
  p.b1 = Eigen::VectorXd::Zero(d_h);
  p.w2 = uniform_matrix(d_h, d_f, 1.0 / std::sqrt(static_cast<double>(d_h)), rng);
  p.b2 = Eigen::VectorXd::Zero(d_f);
  p.wc = uniform_matrix(d_f, num_classes, 1.0 / std::sqrt(static_cast<double>(d_f)), rng);
  p.bc = Eigen::VectorXd::Zero(num_classes);
  return p;
}

ForwardRecord forward(const ModelParams& params, const Eigen::VectorXd& x) {
  if (x.size() != params.d_in()) throw InvalidInput("forward: input dimension mismatch");
  if (!x.allFinite()) throw InvalidInput("forward: non-finite input");
  ForwardRecord rec;
  rec.hidden = (params.w1.transpose() * x + params.b1).array().tanh();
  rec.features = (params.w2.transpose() * rec.hidden + params.b2).array().tanh();
  rec.logits = params.wc.transpose() * rec.features + params.bc;
  rec.probs = softmax(rec.logits);
  return rec;
}

Eigen::MatrixXd extract_features(const ModelParams& params, const Eigen::MatrixXd& inputs) {
  Eigen::MatrixXd out(inputs.rows(), params.d_f());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    out.row(i) = forward(params, inputs.row(i).transpose()).features.transpose();
  return out;
}

Prediction predict_with_entropy(const ModelParams& params, const Eigen::VectorXd& x) {
  const ForwardRecord rec = forward(params, x);
  int label = 0;
  double best = rec.probs[0];
  for (int c = 1; c < rec.probs.size(); ++c) {
    if (rec.probs[c] > best) {
      best = rec.probs[c];
      label = c;
    }
  }
  return Prediction{label, self_entropy(rec.probs)};
}

Gradients Gradients::zero_like(const ModelParams& p) {
  Gradients g;
  g.w1 = Eigen::MatrixXd::Zero(p.w1.rows(), p.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(p.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(p.w2.rows(), p.w2.cols());
  g.b2 = Eigen::VectorXd::Zero(p.b2.size());
  g.wc = Eigen::MatrixXd::Zero(p.wc.rows(), p.wc.cols());
  g.bc = Eigen::VectorXd::Zero(p.bc.size());
  return g;
}

double Gradients::norm() const {
  return std::sqrt(w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm() +
                   wc.squaredNorm() + bc.squaredNorm());
}

void backprop_input(const ModelParams& params, const Eigen::VectorXd& x, const ForwardRecord& rec,
                    const Eigen::VectorXd& g_features, const Eigen::VectorXd& g_logits,
                    Gradients& grads) {
  Eigen::VectorXd gf = g_features.size() ? g_features : Eigen::VectorXd::Zero(params.d_f());
  if (g_logits.size()) {
    grads.wc += rec.features * g_logits.transpose();
    grads.bc += g_logits;
    gf += params.wc * g_logits;
  }
  const Eigen::VectorXd g_a2 =
      gf.array() * (1.0 - rec.features.array().square());  // tanh'
  grads.w2 += rec.hidden * g_a2.transpose();
  grads.b2 += g_a2;
  const Eigen::VectorXd g_h1 = params.w2 * g_a2;
  const Eigen::VectorXd g_a1 = g_h1.array() * (1.0 - rec.hidden.array().square());
  grads.w1 += x * g_a1.transpose();
  grads.b1 += g_a1;
}

void sgd_step(ModelParams& params, const Gradients& grads, double lr, double momentum,
              SgdState& state) {
  if (params.frozen) throw FrozenModel("sgd_step: model is frozen");
  if (lr <= 0.0) throw InvalidInput("sgd_step: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw InvalidInput("sgd_step: momentum out of range");
  if (!state.initialized) {
    state.velocity = Gradients::zero_like(params);
    state.initialized = true;
  }
  Gradients& v = state.velocity;
  v.w1 = momentum * v.w1 + grads.w1;
  v.b1 = momentum * v.b1 + grads.b1;
  v.w2 = momentum * v.w2 + grads.w2;
  v.b2 = momentum * v.b2 + grads.b2;
  v.wc = momentum * v.wc + grads.wc;
  v.bc = momentum * v.bc + grads.bc;
  params.w1 -= lr * v.w1;
  params.b1 -= lr * v.b1;
  params.w2 -= lr * v.w2;
  params.b2 -= lr * v.b2;
  params.wc -= lr * v.wc;
  params.bc -= lr * v.bc;
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_matrix_rowmajor(std::string& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double d = m(r, c);
      std::uint64_t bits;
      std::memcpy(&bits, &d, 8);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > buf.size()) throw IoError("model file truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }

  double f64() {
    if (pos + 8 > buf.size()) throw IoError("model file truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }

  Eigen::MatrixXd matrix_rowmajor(int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
  }
};

}  // namespace

std::string serialize_model(const ModelParams& params) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(params.d_in()));
  put_u32(out, static_cast<std::uint32_t>(params.d_h()));
  put_u32(out, static_cast<std::uint32_t>(params.d_f()));
  put_u32(out, static_cast<std::uint32_t>(params.num_classes()));
  put_u32(out, params.frozen ? 1u : 0u);
  put_matrix_rowmajor(out, params.w1);
  put_matrix_rowmajor(out, params.b1);
  put_matrix_rowmajor(out, params.w2);
  put_matrix_rowmajor(out, params.b2);
  put_matrix_rowmajor(out, params.wc);
  put_matrix_rowmajor(out, params.bc);
  return out;
}

void save_model(const ModelParams& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_model: cannot open " + path);
  const std::string bytes = serialize_model(params);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_model: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  const int d_in = static_cast<int>(r.u32());
  const int d_h = static_cast<int>(r.u32());
  const int d_f = static_cast<int>(r.u32());
  const int n = static_cast<int>(r.u32());
  const bool frozen = r.u32() != 0;
  ModelParams p;
  p.w1 = r.matrix_rowmajor(d_in, d_h);
  p.b1 = r.matrix_rowmajor(d_h, 1);
  p.w2 = r.matrix_rowmajor(d_h, d_f);
  p.b2 = r.matrix_rowmajor(d_f, 1);
  p.wc = r.matrix_rowmajor(d_f, n);
  p.bc = r.matrix_rowmajor(n, 1);
  p.frozen = frozen;
  if (r.pos != buf.size()) throw IoError("load_model: trailing bytes in " + path);
  return p;
}

}  // namespace sfuda
