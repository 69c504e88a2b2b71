#include "dyco/diffengine.hpp"

#include "dyco/error.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace dyco {

Param::Param(std::string n, std::vector<int> s, ParamGroup g, bool sparse)
    : name(std::move(n)), shape(std::move(s)), group(g), sparse_grad(sparse) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                      [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  value.assign(count, 0.0);
}

ParamStore::ParamStore(std::vector<Param*> params) : params_(std::move(params)) {
  std::set<std::string> names;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!names.insert(params_[i]->name).second)
      throw Error(ErrorCode::ShapeMismatch, "duplicate parameter name " + params_[i]->name);
    params_[i]->id = static_cast<int>(i);
  }
}

Param& ParamStore::by_name(const std::string& name) const {
  for (Param* p : params_)
    if (p->name == name) return *p;
  throw Error(ErrorCode::ShapeMismatch, "no parameter named " + name);
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const Param* p : params_) n += p->size();
  return n;
}

GradBuffer::GradBuffer(const ParamStore& store, bool scatter_mode) {
  dense_.resize(store.size());
  sparse_.resize(store.size());
  scatter_.assign(store.size(), 0);
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (scatter_mode && store[i].sparse_grad) scatter_[i] = 1;
    else dense_[i].assign(store[i].size(), 0.0);
  }
}

void GradBuffer::zero() {
  for (auto& d : dense_) std::fill(d.begin(), d.end(), 0.0);
  for (auto& s : sparse_) s.clear();
}

void GradBuffer::merge_into(GradBuffer& total) const {
  if (total.dense_.size() != dense_.size())
    throw Error(ErrorCode::ShapeMismatch, "gradient buffers have different layouts");
  for (std::size_t i = 0; i < dense_.size(); ++i) {
    auto& dst = total.dense_[i];
    if (scatter_[i]) {
      for (const auto& [idx, v] : sparse_[i]) dst[idx] += v;
    } else {
      if (dst.size() != dense_[i].size())
        throw Error(ErrorCode::ShapeMismatch, "gradient array size mismatch");
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += dense_[i][k];
    }
  }
}

AdamState::AdamState(const ParamStore& store, AdamConfig cfg) : config(cfg) {
  m.reserve(store.size());
  v.reserve(store.size());
  for (const Param* p : store) {
    m.emplace_back(p->size(), 0.0);
    v.emplace_back(p->size(), 0.0);
  }
}

void adam_step(const ParamStore& params, const GradBuffer& grads, AdamState& state,
               double lr_triplane, double lr_other) {
  if (state.m.size() != params.size() || grads.param_count() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");
  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    auto g = grads.dense(static_cast<int>(i));
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
      throw Error(ErrorCode::ShapeMismatch, "shape mismatch for " + p.name);
    const double lr = p.group == ParamGroup::Triplane ? lr_triplane : lr_other;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      if (g[k] == 0.0) continue;  // entries without gradient hold still
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p.value[k] -= lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

std::vector<GradCheckResult> finite_difference_check(const ParamStore& params,
                                                     const GradBuffer& analytic,
                                                     const std::function<double()>& loss,
                                                     double h, double abs_floor) {
  std::vector<GradCheckResult> out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = params[i];
    auto g = analytic.dense(static_cast<int>(i));
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p.value[k];
      p.value[k] = saved + h;
      const double up = loss();
      p.value[k] = saved - h;
      const double down = loss();
      p.value[k] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max(std::abs(numeric), std::abs(g[k]));
      const double diff = std::abs(numeric - g[k]);
      GradCheckResult r{p.name, k, g[k], numeric, 0.0};
      r.rel_error = diff <= abs_floor ? 0.0 : diff / scale;
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace dyco
