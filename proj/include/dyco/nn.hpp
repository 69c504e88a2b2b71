#pragma once

#include "dyco/diffengine.hpp"
#include "dyco/rng.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace dyco {

using Matrix = Eigen::MatrixXd;  // column-major; one column per sample
using Vector = Eigen::VectorXd;
using RowMatrixMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMatrixMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// y = W x + b with W stored row-major (out x in).
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(const std::string& name, int in, int out, ParamGroup group = ParamGroup::Other);

  int in() const noexcept { return in_; }
  int out() const noexcept { return out_; }

  /// Weights uniform in +-1/sqrt(fan_in), biases zero.
  void init_fan_in(Rng& rng);
  void zero();

  ConstRowMatrixMap weights() const { return {weight.value.data(), out_, in_}; }
  RowMatrixMap weights() { return {weight.value.data(), out_, in_}; }
  Eigen::Map<const Vector> biases() const { return {bias.value.data(), out_}; }

  Matrix forward(const Matrix& x) const;

  /// Accumulates dW, db into `grads`; writes dX when requested.
  void backward(const Matrix& x, const Matrix& dy, Matrix* dx, GradBuffer& grads) const;

  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Param weight;
  Param bias;

 private:
  int in_ = 0;
  int out_ = 0;
};

/// Affine layers with ReLU between them (and none after the last).
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input of each layer (post-activation of the previous)
    std::vector<Matrix> pre;     // pre-activation of each hidden layer
  };

  Mlp() = default;
  /// widths = {in, hidden..., out}
  Mlp(const std::string& name, const std::vector<int>& widths, ParamGroup group = ParamGroup::Other);

  int in() const { return layers_.front().in(); }
  int out() const { return layers_.back().out(); }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  void init_fan_in(Rng& rng);

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;
  /// Returns dX.
  Matrix backward(const Cache& cache, const Matrix& dy, GradBuffer& grads, bool need_dx = true) const;

  void collect(std::vector<Param*>& out) {
    for (auto& l : layers_) l.collect(out);
  }

 private:
  std::vector<DenseLayer> layers_;
};

inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace dyco
