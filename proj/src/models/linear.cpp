#include <cmath>

#include "intent/nn.hpp"

namespace intent::nn {

LogisticRegression::LogisticRegression(int input_dim)
    : input_dim_(input_dim), params_(Vector::Zero(parameter_count(input_dim))) {}

double LogisticRegression::logit(const double* x) const {
  double z = params_[input_dim_];
  for (int i = 0; i < input_dim_; ++i) z += params_[i] * x[i];
  return z;
}

double LogisticRegression::loss(const SampleBatch& batch, Vector* grad) const {
  const auto n = batch.inputs.cols();
  const auto w = params_.head(input_dim_);
  const Vector z = (w.transpose() * batch.inputs).transpose().array() + params_[input_dim_];
  const double wsum = batch.weights.sum();
  double total = 0.0;
  Vector dz(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    total += batch.weights[i] * bce_with_logit(z[i], batch.targets[i]);
    dz[i] = batch.weights[i] * (sigmoid(z[i]) - batch.targets[i]) / wsum;
  }
  if (grad) {
    grad->resize(params_.size());
    grad->head(input_dim_) = batch.inputs * dz;
    (*grad)[input_dim_] = dz.sum();
  }
  return total / wsum;
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate),
      b1_(beta1),
      b2_(beta2),
      eps_(epsilon),
      m_(Vector::Zero(static_cast<Eigen::Index>(n))),
      v_(Vector::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Vector& params, const Vector& grad) {
  ++t_;
  m_ = b1_ * m_ + (1.0 - b1_) * grad;
  v_ = b2_ * v_ + (1.0 - b2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace intent::nn
