#include "dyco/canonical_field.hpp"

#include "dyco/error.hpp"

#include <algorithm>
#include <cmath>

namespace dyco {

namespace {

// Plane p projects onto axes (kPlaneAxes[p][0], kPlaneAxes[p][1]) = (u, v).
constexpr int kPlaneAxes[3][2] = {{0, 1}, {0, 2}, {1, 2}};

}  // namespace

TriplaneField::TriplaneField(const FieldShape& shape, const Aabb& box, int pose_dim, int context_dim)
    : shape_(shape), box_(box), pose_dim_(pose_dim), context_dim_(context_dim) {
  if (shape.resolutions.empty() || shape.features < 1)
    throw Error(ErrorCode::DimensionMismatch, "triplane needs at least one scale and one feature");
  for (std::size_t s = 0; s < shape.resolutions.size(); ++s) {
    const int r = shape.resolutions[s];
    if (r < 2) throw Error(ErrorCode::DimensionMismatch, "plane resolution must be >= 2");
    planes.emplace_back("triplane.scale" + std::to_string(s), std::vector<int>{3, r, r, shape.features},
                        ParamGroup::Triplane, true);
  }
  const int in = head_input_dim();
  density = Mlp("field.density", {in, shape.density_width, 1}, ParamGroup::Triplane);
  color = Mlp("field.color", {in, shape.color_width, shape.color_width, 3}, ParamGroup::Triplane);
}

void TriplaneField::init(Rng& rng) {
  for (auto& p : planes)
    for (auto& v : p.value) v = rng.uniform(-0.1, 0.1);
  density.init_fan_in(rng);
  color.init_fan_in(rng);
}

double& TriplaneField::plane_value(int scale, int plane, int u, int v, int f) {
  const int r = shape_.resolutions[scale];
  return planes[scale].value[((static_cast<std::size_t>(plane) * r + v) * r + u) * shape_.features + f];
}

void TriplaneField::sample(const Eigen::Vector3d& x_c, double* out, SampleCache* cache) const {
  const int nf = shape_.features;
  Eigen::Vector3d unit;  // position in [0, 1] per axis
  Eigen::Vector3d unit_grad;
  for (int a = 0; a < 3; ++a) {
    const double ext = box_.max[a] - box_.min[a];
    const double t = ext > 0.0 ? (x_c[a] - box_.min[a]) / ext : 0.0;
    unit[a] = std::clamp(t, 0.0, 1.0);
    unit_grad[a] = (ext > 0.0 && t > 0.0 && t < 1.0) ? 1.0 / ext : 0.0;
  }
  if (cache) {
    cache->coord_scale = unit_grad;
    cache->taps.resize(scales());
    cache->plane_values.resize(static_cast<std::size_t>(scales()) * 3 * nf);
  }
  std::vector<double> local;
  if (!cache) local.resize(static_cast<std::size_t>(3) * nf);

  for (int s = 0; s < scales(); ++s) {
    const int r = shape_.resolutions[s];
    const double* data = planes[s].value.data();
    double* values = cache ? cache->plane_values.data() + static_cast<std::size_t>(s) * 3 * nf : local.data();
    for (int p = 0; p < 3; ++p) {
      PlaneTap tap;
      const double cu = unit[kPlaneAxes[p][0]] * (r - 1);
      const double cv = unit[kPlaneAxes[p][1]] * (r - 1);
      tap.u0 = std::min(static_cast<int>(std::floor(cu)), r - 2);
      tap.v0 = std::min(static_cast<int>(std::floor(cv)), r - 2);
      tap.fu = cu - tap.u0;
      tap.fv = cv - tap.v0;
      if (cache) cache->taps[s][p] = tap;
      const double w00 = (1 - tap.fu) * (1 - tap.fv), w10 = tap.fu * (1 - tap.fv);
      const double w01 = (1 - tap.fu) * tap.fv, w11 = tap.fu * tap.fv;
      const double* p00 = data + ((static_cast<std::size_t>(p) * r + tap.v0) * r + tap.u0) * nf;
      const double* p10 = p00 + nf;
      const double* p01 = p00 + static_cast<std::size_t>(r) * nf;
      const double* p11 = p01 + nf;
      double* b = values + p * nf;
      for (int f = 0; f < nf; ++f) b[f] = w00 * p00[f] + w10 * p10[f] + w01 * p01[f] + w11 * p11[f];
    }
    double* o = out + s * nf;
    for (int f = 0; f < nf; ++f) o[f] = values[f] * values[nf + f] * values[2 * nf + f];
  }
}

void TriplaneField::sample_backward(const SampleCache& cache, const double* d_features, GradBuffer& grads,
                                    Eigen::Vector3d* d_x) const {
  const int nf = shape_.features;
  std::vector<double> d_b(nf);
  for (int s = 0; s < scales(); ++s) {
    const int r = shape_.resolutions[s];
    const double* data = planes[s].value.data();
    const double* values = cache.plane_values.data() + static_cast<std::size_t>(s) * 3 * nf;
    const double* g = d_features + s * nf;
    for (int p = 0; p < 3; ++p) {
      const double* o1 = values + ((p + 1) % 3) * nf;
      const double* o2 = values + ((p + 2) % 3) * nf;
      for (int f = 0; f < nf; ++f) d_b[f] = g[f] * o1[f] * o2[f];
      const PlaneTap& tap = cache.taps[s][p];
      const double w[4] = {(1 - tap.fu) * (1 - tap.fv), tap.fu * (1 - tap.fv), (1 - tap.fu) * tap.fv,
                           tap.fu * tap.fv};
      const std::size_t base = ((static_cast<std::size_t>(p) * r + tap.v0) * r + tap.u0) * nf;
      const std::size_t offs[4] = {base, base + nf, base + static_cast<std::size_t>(r) * nf,
                                   base + static_cast<std::size_t>(r + 1) * nf};
      for (int c = 0; c < 4; ++c)
        for (int f = 0; f < nf; ++f)
          if (d_b[f] != 0.0) grads.add(planes[s].id, offs[c] + f, w[c] * d_b[f]);
      if (d_x) {
        const int au = kPlaneAxes[p][0], av = kPlaneAxes[p][1];
        const double su = cache.coord_scale[au] * (r - 1), sv = cache.coord_scale[av] * (r - 1);
        if (su == 0.0 && sv == 0.0) continue;
        const double *p00 = data + offs[0], *p10 = data + offs[1], *p01 = data + offs[2], *p11 = data + offs[3];
        double du = 0.0, dv = 0.0;
        for (int f = 0; f < nf; ++f) {
          du += d_b[f] * ((1 - tap.fv) * (p10[f] - p00[f]) + tap.fv * (p11[f] - p01[f]));
          dv += d_b[f] * ((1 - tap.fu) * (p01[f] - p00[f]) + tap.fu * (p11[f] - p10[f]));
        }
        (*d_x)[au] += du * su;
        (*d_x)[av] += dv * sv;
      }
    }
  }
}

Vector triplane_sample(const TriplaneField& field, const Eigen::Vector3d& x_c) {
  Vector out(field.feature_dim());
  field.sample(x_c, out.data());
  return out;
}

FieldValue field_eval(const TriplaneField& field, const Eigen::Vector3d& x_c, const Vector& pose_cond,
                      const Vector& ctx, double foreground) {
  if (pose_cond.size() != field.pose_dim() || ctx.size() != field.context_dim())
    throw Error(ErrorCode::DimensionMismatch, "field condition dimensions do not match the heads");
  Matrix in(field.head_input_dim(), 1);
  field.sample(x_c, in.data());
  in.block(field.feature_dim(), 0, field.pose_dim(), 1) = pose_cond;
  in.block(field.feature_dim() + field.pose_dim(), 0, field.context_dim(), 1) = ctx;
  FieldValue v;
  v.sigma = softplus(field.density.forward(in)(0, 0)) * foreground;
  const Matrix c = field.color.forward(in);
  for (int i = 0; i < 3; ++i) v.color[i] = sigmoid(c(i, 0));
  return v;
}

}  // namespace dyco
