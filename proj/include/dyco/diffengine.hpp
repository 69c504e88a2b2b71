#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dyco {

enum class ParamGroup { Triplane, Other };

/// A named learnable array. `id` indexes gradient and optimizer buffers and is
/// assigned when the owning model registers its parameters.
struct Param {
  std::string name;
  std::vector<int> shape;
  ParamGroup group = ParamGroup::Other;
  bool sparse_grad = false;  // large grids: gradients are scatter lists per worker
  std::vector<double> value;
  int id = -1;

  Param() = default;
  Param(std::string n, std::vector<int> s, ParamGroup g = ParamGroup::Other, bool sparse = false);

  std::size_t size() const noexcept { return value.size(); }
};

/// Ordered view over a model's parameters. Names are unique.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::vector<Param*> params);

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](std::size_t i) const { return *params_[i]; }
  Param& by_name(const std::string& name) const;
  const std::vector<Param*>& list() const noexcept { return params_; }
  std::size_t total_values() const;

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param*> params_;
};

/// Gradient accumulator with the layout of a ParamStore. In scatter mode,
/// sparse parameters collect (index, value) lists that merge_into() replays in
/// insertion order, so reductions are independent of worker scheduling.
class GradBuffer {
 public:
  GradBuffer() = default;
  GradBuffer(const ParamStore& store, bool scatter_mode);

  void zero();

  double* dense(int id) { return dense_[id].data(); }
  std::span<const double> dense(int id) const { return dense_[id]; }

  void add(int id, std::size_t index, double v) {
    if (scatter_[id]) sparse_[id].emplace_back(static_cast<std::uint32_t>(index), v);
    else dense_[id][index] += v;
  }

  /// Adds this buffer into a dense buffer.
  void merge_into(GradBuffer& total) const;

  std::size_t param_count() const noexcept { return dense_.size(); }

 private:
  std::vector<std::vector<double>> dense_;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> sparse_;
  std::vector<char> scatter_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(const ParamStore& store, AdamConfig cfg = {});
};

/// Bias-corrected Adam. The parameter's group selects the learning rate.
/// Throws ShapeMismatch when buffers do not match the store.
void adam_step(const ParamStore& params, const GradBuffer& grads, AdamState& state,
               double lr_triplane, double lr_other);

struct GradCheckResult {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// Central finite differences over every entry of every parameter. `loss`
/// must be a pure function of the current parameter values.
std::vector<GradCheckResult> finite_difference_check(const ParamStore& params,
                                                     const GradBuffer& analytic,
                                                     const std::function<double()>& loss,
                                                     double h = 1e-6, double abs_floor = 1e-9);

}  // namespace dyco
