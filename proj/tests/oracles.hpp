#pragma once

// Independent reference evaluations shared by several test files.

#include "dyco/nn.hpp"

#include <algorithm>
#include <vector>

namespace oracle {

// Loops over the raw row-major weights; ReLU between layers, none after the last.
inline std::vector<double> mlp(const dyco::Mlp& net, std::vector<double> x) {
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    std::vector<double> y(layer.out());
    for (int o = 0; o < layer.out(); ++o) {
      double acc = layer.bias.value[o];
      for (int i = 0; i < layer.in(); ++i) acc += layer.weight.value[o * layer.in() + i] * x[i];
      y[o] = l + 1 < layers.size() ? std::max(acc, 0.0) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline void randomize(std::vector<dyco::Param*> params, dyco::Rng& rng, double lo, double hi) {
  for (auto* p : params)
    for (auto& v : p->value) v = rng.uniform(lo, hi);
}

}  // namespace oracle
