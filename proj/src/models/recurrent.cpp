#include <cmath>
#include <vector>

#include "intent/nn.hpp"

namespace intent::nn {

namespace {

constexpr int H = Lstm::kHidden;
constexpr int G = 4 * H;
using GateVec = Eigen::Matrix<double, G, 1>;
using StateVec = Eigen::Matrix<double, H, 1>;

struct LayerTrace {
  Matrix gates;  // activated gates (4H x T): i, f, g, o
  Matrix c;      // cell states (H x T)
  Matrix h;      // hidden states (H x T)
};

// Runs one layer over a whole sequence given its precomputed input projection.
LayerTrace forward_layer(const Matrix& input_proj, Eigen::Map<const Matrix> wh,
                         Eigen::Map<const Vector> b) {
  const auto T = input_proj.cols();
  LayerTrace tr{Matrix(G, T), Matrix(H, T), Matrix(H, T)};
  StateVec h_prev = StateVec::Zero(), c_prev = StateVec::Zero();
  GateVec a;
  for (Eigen::Index t = 0; t < T; ++t) {
    a.noalias() = wh * h_prev;
    a += input_proj.col(t) + b;
    for (int j = 0; j < H; ++j) {
      a[j] = sigmoid(a[j]);
      a[H + j] = sigmoid(a[H + j]);
      a[2 * H + j] = std::tanh(a[2 * H + j]);
      a[3 * H + j] = sigmoid(a[3 * H + j]);
    }
    for (int j = 0; j < H; ++j) {
      const double c = a[H + j] * c_prev[j] + a[j] * a[2 * H + j];
      tr.c(j, t) = c;
      tr.h(j, t) = a[3 * H + j] * std::tanh(c);
    }
    tr.gates.col(t) = a;
    h_prev = tr.h.col(t);
    c_prev = tr.c.col(t);
  }
  return tr;
}

// Backpropagates through one layer. dh holds d(loss)/d(h_t) from above;
// returns d(loss)/d(pre-activations) as a (4H x T) matrix.
Matrix backward_layer(const LayerTrace& tr, const Matrix& dh, Eigen::Map<const Matrix> wh) {
  const auto T = dh.cols();
  Matrix da(G, T);
  StateVec dh_next = StateVec::Zero(), dc_next = StateVec::Zero();
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    for (int j = 0; j < H; ++j) {
      const double i = tr.gates(j, t), f = tr.gates(H + j, t);
      const double g = tr.gates(2 * H + j, t), o = tr.gates(3 * H + j, t);
      const double c = tr.c(j, t);
      const double c_prev = t > 0 ? tr.c(j, t - 1) : 0.0;
      const double tc = std::tanh(c);
      const double dhj = dh(j, t) + dh_next[j];
      const double dc = dhj * o * (1.0 - tc * tc) + dc_next[j];
      da(j, t) = dc * g * i * (1.0 - i);
      da(H + j, t) = dc * c_prev * f * (1.0 - f);
      da(2 * H + j, t) = dc * i * (1.0 - g * g);
      da(3 * H + j, t) = dhj * tc * o * (1.0 - o);
      dc_next[j] = dc * f;
    }
    dh_next.noalias() = wh.transpose() * da.col(t);
  }
  return da;
}

}  // namespace

Lstm::Layout Lstm::layout(int input_dim) {
  Layout l{};
  std::size_t off = 0;
  for (int k = 0; k < kLayers; ++k) {
    const int in = k == 0 ? input_dim : H;
    l.wx[k] = off;
    off += static_cast<std::size_t>(G * in);
    l.wh[k] = off;
    off += G * H;
    l.b[k] = off;
    off += G;
  }
  l.w_out = off;
  off += H;
  l.b_out = off;
  off += 1;
  l.total = off;
  return l;
}

std::size_t Lstm::parameter_count(int input_dim) { return layout(input_dim).total; }

Lstm::Lstm(int input_dim)
    : input_dim_(input_dim),
      lay_(layout(input_dim)),
      params_(Vector::Zero(static_cast<Eigen::Index>(lay_.total))) {}

void Lstm::initialize(std::mt19937_64& rng) {
  params_.setZero();
  for (int k = 0; k < kLayers; ++k) {
    const double a = 1.0 / std::sqrt(static_cast<double>(H));
    std::uniform_real_distribution<double> u(-a, a);
    for (std::size_t i = lay_.wx[k]; i < lay_.b[k]; ++i) params_[i] = u(rng);
    // forget-gate bias starts at 1 so early gradients flow through time
    for (int j = 0; j < H; ++j) params_[lay_.b[k] + H + j] = 1.0;
  }
  const double a = std::sqrt(6.0 / (H + 1));
  std::uniform_real_distribution<double> u(-a, a);
  for (int j = 0; j < H; ++j) params_[lay_.w_out + j] = u(rng);
}

Lstm::State Lstm::initial_state() const {
  State s;
  for (int k = 0; k < kLayers; ++k) {
    s.h[k] = Vector::Zero(H);
    s.c[k] = Vector::Zero(H);
  }
  return s;
}

double Lstm::step(State& state, const double* x) const {
  const double* p = params_.data();
  const double* in = x;
  for (int k = 0; k < kLayers; ++k) {
    const int n_in = layer_input(k);
    const double* wx = p + lay_.wx[k];
    const double* wh = p + lay_.wh[k];
    const double* b = p + lay_.b[k];
    double a[G];
    for (int r = 0; r < G; ++r) a[r] = b[r];
    for (int col = 0; col < n_in; ++col) {
      const double v = in[col];
      const double* w = wx + static_cast<std::size_t>(col) * G;
      for (int r = 0; r < G; ++r) a[r] += w[r] * v;
    }
    const double* h_prev = state.h[k].data();
    for (int col = 0; col < H; ++col) {
      const double v = h_prev[col];
      const double* w = wh + static_cast<std::size_t>(col) * G;
      for (int r = 0; r < G; ++r) a[r] += w[r] * v;
    }
    double* c = state.c[k].data();
    double* h = state.h[k].data();
    for (int j = 0; j < H; ++j) {
      const double ig = sigmoid(a[j]);
      const double fg = sigmoid(a[H + j]);
      const double gg = std::tanh(a[2 * H + j]);
      const double og = sigmoid(a[3 * H + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
    in = h;
  }
  double z = p[lay_.b_out];
  for (int j = 0; j < H; ++j) z += p[lay_.w_out + j] * state.h[kLayers - 1][j];
  return z;
}

double Lstm::loss(std::span<const SequenceExample> batch, Vector* grad) const {
  using CMap = Eigen::Map<const Matrix>;
  using CVec = Eigen::Map<const Vector>;
  const double* p = params_.data();
  CMap wx0(p + lay_.wx[0], G, input_dim_), wx1(p + lay_.wx[1], G, H);
  CMap wh0(p + lay_.wh[0], G, H), wh1(p + lay_.wh[1], G, H);
  CVec b0(p + lay_.b[0], G), b1(p + lay_.b[1], G);
  CVec w_out(p + lay_.w_out, H);
  const double b_out = p[lay_.b_out];

  double wsum = 0.0;
  for (const auto& ex : batch) wsum += ex.weight * static_cast<double>(ex.inputs.cols());
  if (grad) *grad = Vector::Zero(params_.size());
  if (wsum <= 0.0) return 0.0;

  double total = 0.0;
  for (const auto& ex : batch) {
    const auto T = ex.inputs.cols();
    if (T == 0) continue;
    const LayerTrace l0 = forward_layer(wx0 * ex.inputs, wh0, b0);
    const LayerTrace l1 = forward_layer(wx1 * l0.h, wh1, b1);
    const Vector z = (l1.h.transpose() * w_out).array() + b_out;
    Vector dz(T);
    for (Eigen::Index t = 0; t < T; ++t) {
      total += ex.weight * bce_with_logit(z[t], ex.target);
      dz[t] = ex.weight * (sigmoid(z[t]) - ex.target) / wsum;
    }
    if (!grad) continue;

    double* g = grad->data();
    Eigen::Map<Vector>(g + lay_.w_out, H) += l1.h * dz;
    g[lay_.b_out] += dz.sum();

    const Matrix dh1 = w_out * dz.transpose();
    const Matrix da1 = backward_layer(l1, dh1, wh1);
    Eigen::Map<Matrix>(g + lay_.wx[1], G, H) += da1 * l0.h.transpose();
    if (T > 1) {
      Eigen::Map<Matrix>(g + lay_.wh[1], G, H) +=
          da1.rightCols(T - 1) * l1.h.leftCols(T - 1).transpose();
    }
    Eigen::Map<Vector>(g + lay_.b[1], G) += da1.rowwise().sum();

    const Matrix dh0 = wx1.transpose() * da1;
    const Matrix da0 = backward_layer(l0, dh0, wh0);
    Eigen::Map<Matrix>(g + lay_.wx[0], G, input_dim_) += da0 * ex.inputs.transpose();
    if (T > 1) {
      Eigen::Map<Matrix>(g + lay_.wh[0], G, H) +=
          da0.rightCols(T - 1) * l0.h.leftCols(T - 1).transpose();
    }
    Eigen::Map<Vector>(g + lay_.b[0], G) += da0.rowwise().sum();
  }
  return total / wsum;
}

}  // namespace intent::nn
