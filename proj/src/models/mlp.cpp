#include <cmath>

#include "intent/nn.hpp"

namespace intent::nn {

namespace {

constexpr int H = Mlp::kHidden;

void xavier(Eigen::Ref<Vector> block, int fan_in, int fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-a, a);
  for (auto& v : block) v = u(rng);
}

}  // namespace

std::size_t Mlp::parameter_count(int input_dim) {
  return static_cast<std::size_t>((input_dim * H + H) + (H * H + H) + (H + 1));
}

Mlp::Mlp(int input_dim)
    : input_dim_(input_dim), params_(Vector::Zero(parameter_count(input_dim))) {}

void Mlp::initialize(std::mt19937_64& rng) {
  params_.setZero();
  const int in = input_dim_;
  xavier(params_.segment(0, H * in), in, H, rng);
  xavier(params_.segment(H * in + H, H * H), H, H, rng);
  xavier(params_.segment(H * in + H + H * H + H, H), H, 1, rng);
}

double Mlp::logit(const double* x) const {
  const int in = input_dim_;
  const double* p = params_.data();
  const double* w1 = p;
  const double* b1 = w1 + H * in;
  const double* w2 = b1 + H;
  const double* b2 = w2 + H * H;
  const double* w3 = b2 + H;
  const double b3 = w3[H];

  double h1[H];
  for (int j = 0; j < H; ++j) h1[j] = b1[j];
  for (int k = 0; k < in; ++k) {
    const double xk = x[k];
    const double* col = w1 + k * H;  // column-major
    for (int j = 0; j < H; ++j) h1[j] += col[j] * xk;
  }
  for (int j = 0; j < H; ++j) h1[j] = sigmoid(h1[j]);

  double h2[H];
  for (int j = 0; j < H; ++j) h2[j] = b2[j];
  for (int k = 0; k < H; ++k) {
    const double* col = w2 + k * H;
    for (int j = 0; j < H; ++j) h2[j] += col[j] * h1[k];
  }
  double z = b3;
  for (int j = 0; j < H; ++j) z += w3[j] * sigmoid(h2[j]);
  return z;
}

double Mlp::loss(const SampleBatch& batch, Vector* grad) const {
  const int in = input_dim_;
  const auto n = batch.inputs.cols();
  using Map = Eigen::Map<const Matrix>;
  const double* p = params_.data();
  Map W1(p, H, in);
  Eigen::Map<const Vector> b1(p + H * in, H);
  Map W2(p + H * in + H, H, H);
  Eigen::Map<const Vector> b2(p + H * in + H + H * H, H);
  Eigen::Map<const Vector> w3(p + H * in + 2 * H + H * H, H);
  const double b3 = p[H * in + 3 * H + H * H];

  Matrix h1 = (W1 * batch.inputs).colwise() + b1;
  h1 = h1.unaryExpr([](double v) { return sigmoid(v); });
  Matrix h2 = (W2 * h1).colwise() + b2;
  h2 = h2.unaryExpr([](double v) { return sigmoid(v); });
  const Vector z = (h2.transpose() * w3).array() + b3;

  const double wsum = batch.weights.sum();
  double total = 0.0;
  Vector dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    total += batch.weights[i] * bce_with_logit(z[i], batch.targets[i]);
    dz[i] = batch.weights[i] * (sigmoid(z[i]) - batch.targets[i]) / wsum;
  }
  if (grad) {
    grad->resize(params_.size());
    double* g = grad->data();
    Eigen::Map<Matrix> dW1(g, H, in);
    Eigen::Map<Vector> db1(g + H * in, H);
    Eigen::Map<Matrix> dW2(g + H * in + H, H, H);
    Eigen::Map<Vector> db2(g + H * in + H + H * H, H);
    Eigen::Map<Vector> dw3(g + H * in + 2 * H + H * H, H);
    double& db3 = g[H * in + 3 * H + H * H];

    dw3 = h2 * dz;
    db3 = dz.sum();
    Matrix da2 = (w3 * dz.transpose()).array() * h2.array() * (1.0 - h2.array());
    dW2 = da2 * h1.transpose();
    db2 = da2.rowwise().sum();
    Matrix da1 = (W2.transpose() * da2).array() * h1.array() * (1.0 - h1.array());
    dW1 = da1 * batch.inputs.transpose();
    db1 = da1.rowwise().sum();
  }
  return total / wsum;
}

}  // namespace intent::nn
