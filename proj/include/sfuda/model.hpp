#pragma once

#include <Eigen/Dense>
#include <string>

#include "sfuda/errors.hpp"
#include "sfuda/rng.hpp"

namespace sfuda {

// Two-layer tanh feature extractor plus a linear softmax classifier.
// W1: d_in x d_h, W2: d_h x d_f, Wc: d_f x N; activations are
// h1 = tanh(W1^T x + b1), features = tanh(W2^T h1 + b2), logits = Wc^T f + bc.
struct ModelParams {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  Eigen::MatrixXd wc;
  Eigen::VectorXd bc;
  bool frozen = false;

  int d_in() const { return static_cast<int>(w1.rows()); }
  int d_h() const { return static_cast<int>(w1.cols()); }
  int d_f() const { return static_cast<int>(w2.cols()); }
  int num_classes() const { return static_cast<int>(wc.cols()); }
};

// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ModelParams init_params(int d_in, int d_h, int d_f, int num_classes, SeededRng& rng);

struct ForwardRecord {
  Eigen::VectorXd hidden;    // tanh of first layer, cached for backprop
  Eigen::VectorXd features;  // output of the feature extractor
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

ForwardRecord forward(const ModelParams& params, const Eigen::VectorXd& x);

// Feature extractor applied row-wise; returns m x d_f.
Eigen::MatrixXd extract_features(const ModelParams& params, const Eigen::MatrixXd& inputs);

struct Prediction {
  int label;       // argmax of probs, ties broken toward the lowest index
  double entropy;  // self-entropy of probs
};

Prediction predict_with_entropy(const ModelParams& params, const Eigen::VectorXd& x);

struct Gradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
  Eigen::MatrixXd wc;
  Eigen::VectorXd bc;

  static Gradients zero_like(const ModelParams& p);
  double norm() const;
};

// Accumulates parameter gradients for one forwarded input given the upstream
// gradients on its features and logits (either may be zero-sized when unused).
void backprop_input(const ModelParams& params, const Eigen::VectorXd& x, const ForwardRecord& rec,
                    const Eigen::VectorXd& g_features, const Eigen::VectorXd& g_logits, Gradients& grads);

struct SgdState {
  Gradients velocity;
  bool initialized = false;
};

// params <- params - lr * v, v <- momentum * v + grads. Throws FrozenModel on
// a frozen model.
void sgd_step(ModelParams& params, const Gradients& grads, double lr, double momentum, SgdState& state);

// Binary layout: five little-endian uint32 {d_in, d_h, d_f, N, frozen},
// then row-major little-endian doubles for W1, b1, W2, b2, Wc, bc.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

// Serialized form as bytes, same layout as save_model. Used for the
// byte-identity checks and for writing.
std::string serialize_model(const ModelParams& params);

}  // namespace sfuda
