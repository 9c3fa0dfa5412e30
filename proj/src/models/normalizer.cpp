#include <cmath>

#include "intent/models.hpp"

namespace intent {

Normalizer Normalizer::identity(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

Normalizer Normalizer::fit(std::span<const double> column_major, std::size_t dim) {
  Normalizer n = identity(dim);
  if (dim == 0 || column_major.size() < dim) return n;
  const std::size_t count = column_major.size() / dim;
  std::vector<double> sq(dim, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) n.mean[k] += column_major[i * dim + k];
  }
  for (auto& m : n.mean) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = column_major[i * dim + k] - n.mean[k];
      sq[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    const double sd = std::sqrt(sq[k] / static_cast<double>(count));
    n.scale[k] = sd > 1e-12 ? sd : 1.0;
  }
  return n;
}

void Normalizer::apply(double* x) const {
  for (std::size_t k = 0; k < mean.size(); ++k) x[k] = (x[k] - mean[k]) / scale[k];
}

}  // namespace intent
