#pragma once

// Differentiable classifiers with hand-written gradients. Every network keeps
// its trainable scalars in one flat parameter vector so the optimizer, the
// serializer and the finite-difference checks all see the same layout.

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace intent::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Binary cross-entropy of sigmoid(z) against y, computed from the logit.
inline double bce_with_logit(double z, double y) {
  // softplus(z) - y*z, stable for large |z|
  const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return sp - y * z;
}

/// Column-major batch: inputs is (input_dim x n).
struct SampleBatch {
  Matrix inputs;
  Vector targets;
  Vector weights;
};

/// Logistic regression: p = sigmoid(w.x + b).
class LogisticRegression {
 public:
  explicit LogisticRegression(int input_dim = 1);

  int input_dim() const { return input_dim_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  double logit(const double* x) const;
  /// Weighted mean BCE over the batch; writes d(loss)/d(params) when grad != nullptr.
  double loss(const SampleBatch& batch, Vector* grad) const;

  static std::size_t parameter_count(int input_dim) { return input_dim + 1; }

 private:
  int input_dim_;
  Vector params_;  // [w (input_dim), b]
};

/// Two sigmoid hidden layers of 30 units and a sigmoid read-out.
class Mlp {
 public:
  static constexpr int kHidden = 30;

  explicit Mlp(int input_dim = 1);

  int input_dim() const { return input_dim_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  void initialize(std::mt19937_64& rng);
  double logit(const double* x) const;
  double loss(const SampleBatch& batch, Vector* grad) const;

  static std::size_t parameter_count(int input_dim);

 private:
  int input_dim_;
  Vector params_;  // W1 (H x in), b1, W2 (H x H), b2, w3 (H), b3
};

/// Two stacked LSTM cells with a 10-dimensional hidden state each and a
/// 1-unit sigmoid read-out applied at every timestep. Gate order is
/// input, forget, cell candidate, output.
class Lstm {
 public:
  static constexpr int kHidden = 10;
  static constexpr int kLayers = 2;

  struct State {
    Vector h[kLayers];
    Vector c[kLayers];
  };

  /// One training sequence: inputs is (input_dim x T), all timesteps share
  /// the sequence label.
  struct SequenceExample {
    Matrix inputs;
    double target = 0.0;
    double weight = 1.0;  // per-timestep weight
  };

  explicit Lstm(int input_dim = 1);

  int input_dim() const { return input_dim_; }
  Vector& parameters() { return params_; }
  const Vector& parameters() const { return params_; }

  void initialize(std::mt19937_64& rng);
  State initial_state() const;
  /// Advances the state by one timestep and returns the read-out logit.
  double step(State& state, const double* x) const;

  /// Mean weighted per-timestep BCE over all timesteps of all sequences.
  double loss(std::span<const SequenceExample> batch, Vector* grad) const;

  static std::size_t parameter_count(int input_dim);

 private:
  struct Layout {
    std::size_t wx[kLayers], wh[kLayers], b[kLayers];
    std::size_t w_out, b_out, total;
  };
  int layer_input(int layer) const { return layer == 0 ? input_dim_ : kHidden; }
  static Layout layout(int input_dim);

  int input_dim_;
  Layout lay_;
  Vector params_;
};

/// Adaptive-moment gradient descent on a flat parameter vector.
class Adam {
 public:
  explicit Adam(std::size_t n, double learning_rate = 1e-3, double beta1 = 0.9,
                double beta2 = 0.999, double epsilon = 1e-8);
  void step(Vector& params, const Vector& grad);

 private:
  double lr_, b1_, b2_, eps_;
  Vector m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace intent::nn
