#include "dyco/nn.hpp"

#include <cmath>

namespace dyco {

DenseLayer::DenseLayer(const std::string& name, int in, int out, ParamGroup group)
    : weight(name + ".weight", {out, in}, group), bias(name + ".bias", {out}, group), in_(in), out_(out) {}

void DenseLayer::init_fan_in(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_));
  for (auto& w : weight.value) w = rng.uniform(-bound, bound);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

void DenseLayer::zero() {
  std::fill(weight.value.begin(), weight.value.end(), 0.0);
  std::fill(bias.value.begin(), bias.value.end(), 0.0);
}

Matrix DenseLayer::forward(const Matrix& x) const {
  Matrix y = weights() * x;
  y.colwise() += biases();
  return y;
}

void DenseLayer::backward(const Matrix& x, const Matrix& dy, Matrix* dx, GradBuffer& grads) const {
  RowMatrixMap dw(grads.dense(weight.id), out_, in_);
  dw.noalias() += dy * x.transpose();
  // Plain loop: Eigen's vectorized row sums peel by address alignment, which
  // makes the rounding depend on where the allocator put dy.
  double* db = grads.dense(bias.id);
  for (Eigen::Index c = 0; c < dy.cols(); ++c)
    for (int o = 0; o < out_; ++o) db[o] += dy(o, c);
  if (dx) dx->noalias() = weights().transpose() * dy;
}

Mlp::Mlp(const std::string& name, const std::vector<int>& widths, ParamGroup group) {
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    layers_.emplace_back(name + ".l" + std::to_string(i), widths[i], widths[i + 1], group);
}

void Mlp::init_fan_in(Rng& rng) {
  for (auto& l : layers_) l.init_fan_in(rng);
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    Matrix z = layers_[i].forward(h);
    if (i + 1 < layers_.size()) {
      if (cache) cache->pre.push_back(z);
      h = z.cwiseMax(0.0);
    } else {
      h = std::move(z);
    }
  }
  return h;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& dy, GradBuffer& grads, bool need_dx) const {
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i + 1 < layers_.size()) g = (cache.pre[i].array() > 0.0).select(g, 0.0);
    Matrix dx;
    const bool want = need_dx || i > 0;
    layers_[i].backward(cache.inputs[i], g, want ? &dx : nullptr, grads);
    if (want) g = std::move(dx);
  }
  return need_dx ? g : Matrix();
}

}  // namespace dyco
