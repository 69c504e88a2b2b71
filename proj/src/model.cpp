#include "dyco/model.hpp"

#include "dyco/error.hpp"
#include "dyco/parallel.hpp"
#include "dyco/rng.hpp"

#include <cmath>

namespace dyco {

namespace {

Aabb skeleton_box(const KinematicTree& tree, double margin) {
  std::vector<Vec3> pts;
  for (int j = 0; j < tree.joint_count(); ++j) {
    const auto [a, b] = tree.rest_bone_segment(j);
    pts.push_back(a);
    pts.push_back(b);
  }
  return Aabb::around(pts).inflated(margin);
}

constexpr std::uint64_t kStreamNonrigidEncoder = 11;
constexpr std::uint64_t kStreamFieldEncoder = 12;
constexpr std::uint64_t kStreamNonrigid = 13;
constexpr std::uint64_t kStreamField = 14;

}  // namespace

DycoModel::DycoModel(const KinematicTree& tree, const ModelShape& shape, std::uint64_t seed)
    : tree_(tree), shape_(shape), canonical_box_(skeleton_box(tree, shape.bounds_margin)) {
  const int k = tree.joint_count();
  blend = BlendWeightVolume(k, shape.blend_resolution, canonical_box_);
  blend.init_from_skeleton(tree);
  encoder_nonrigid = ContextEncoder("encoder_nonrigid", k, shape.sequence_length);
  encoder_field = ContextEncoder("encoder_field", k, shape.sequence_length);
  nonrigid = NonRigidMlp(3 * k, ContextEncoder::kOutputDim, shape.nonrigid_width, shape.pe_freqs);
  field = TriplaneField(shape.field, canonical_box_, 3 * k, ContextEncoder::kOutputDim);

  Rng r1(derive_seed({seed, kStreamNonrigidEncoder}));
  encoder_nonrigid.init_fan_in(r1);
  Rng r2(derive_seed({seed, kStreamFieldEncoder}));
  encoder_field.init_fan_in(r2);
  Rng r3(derive_seed({seed, kStreamNonrigid}));
  nonrigid.init(r3);
  Rng r4(derive_seed({seed, kStreamField}));
  field.init(r4);

  for (int j = 0; j < k; ++j) masks_.push_back(joint_mask(tree, j));

  std::vector<Param*> list;
  encoder_nonrigid.collect(list);
  encoder_field.collect(list);
  nonrigid.mlp.collect(list);
  list.push_back(&blend.logits);
  field.collect(list);
  store_ = ParamStore(std::move(list));
}

Aabb posed_bounds(const KinematicTree& tree, const BoneTransforms& bones, double margin) {
  std::vector<Vec3> pts = bones.joint_positions;
  for (int j = 0; j < tree.joint_count(); ++j) {
    if (!tree.children(j).empty()) continue;
    pts.push_back(bones.forward[j].apply(tree.rest_bone_segment(j).second));
  }
  return Aabb::around(pts).inflated(margin);
}

FrameCondition make_condition(const DycoModel& model, const PoseTrack& track, int position,
                              const ConditionOptions& options) {
  const Pose& pose = track.at_clamped(position);
  FrameCondition cond;
  cond.bones = forward_kinematics(model.tree(), pose);
  cond.pose_angles.resize(model.pose_dim());
  for (int j = 0; j < model.joint_count(); ++j) cond.pose_angles.segment<3>(3 * j) = pose.joint_rotations[j];
  const int d = 3 * model.joint_count() + 3;
  if (options.delta_condition) {
    auto seq = build_delta_sequence(track, position, options.sequence, options.rep);
    seq = scale_sequence(seq, options.alpha * track.condition_scale());
    cond.sequence = seq.values();
  } else {
    cond.sequence.assign(options.sequence.length, DeltaPose::Zero(d));
  }
  cond.bounds = posed_bounds(model.tree(), cond.bones, model.shape().bounds_margin);
  return cond;
}

FrameContext encode_frame(const DycoModel& model, const FrameCondition& cond, bool keep_cache) {
  const int k = model.joint_count();
  FrameContext fc;
  fc.ctx_nonrigid.resize(k);
  fc.ctx_field.resize(k);
  fc.pose_cond.resize(k);
  if (keep_cache) {
    fc.cache_nonrigid.resize(k);
    fc.cache_field.resize(k);
  }
  for (int j = 0; j < k; ++j) {
    const Eigen::VectorXd& mask = model.mask(j);
    fc.ctx_nonrigid[j] = model.encoder_nonrigid.encode(cond.sequence, mask, keep_cache ? &fc.cache_nonrigid[j] : nullptr);
    fc.ctx_field[j] = model.encoder_field.encode(cond.sequence, mask, keep_cache ? &fc.cache_field[j] : nullptr);
    Vector pc(model.pose_dim());
    for (int i = 0; i < model.pose_dim(); ++i) pc[i] = mask[i] != 0.0 ? cond.pose_angles[i] * mask[i] : 0.0;
    fc.pose_cond[j] = std::move(pc);
  }
  return fc;
}

PointEval evaluate_point(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                         const Vec3& x, double ramp) {
  PointEval out;
  const RigidWarp rigid = rigid_transform(x, cond.bones, model.blend);
  out.nearest = nearest_joint(rigid.raw_weights, model.joint_count());
  out.warp.x_r = rigid.x_r;
  out.warp.foreground = rigid.foreground;
  out.warp.observed_weights = rigid.observed_weights;
  out.warp.delta = nonrigid_transform(model.nonrigid, rigid.x_r, ctx.pose_cond[out.nearest], ctx.ctx_nonrigid[out.nearest]);
  out.warp.x_c = out.warp.x_r + ramp * out.warp.delta;
  out.value = field_eval(model.field, out.warp.x_c, ctx.pose_cond[out.nearest], ctx.ctx_field[out.nearest],
                         rigid.foreground);
  return out;
}

namespace {

/// Intermediate values of one ray, kept for the backward pass.
struct RayWork {
  int n = 0;
  std::vector<RigidWarp> rigid;
  std::vector<int> nearest;
  Matrix nr_in;
  Mlp::Cache nr_cache;
  std::vector<Vec3> x_c;
  std::vector<TriplaneField::SampleCache> tri;
  Matrix head_in;
  Mlp::Cache density_cache, color_cache;
  Matrix density_out, color_out;
  std::vector<RenderSample> samples;
  CompositeResult comp;
  double t_far = 0.0;
};

bool forward_ray(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx, const RayTask& task,
                 const RenderSettings& settings, RayWork& w, bool keep) {
  const auto hit = ray_bounds(task.ray, cond.bounds);
  if (!hit) return false;
  const auto [t_near, t_far] = *hit;
  const int n = settings.n_samples;
  w.n = n;
  w.t_far = t_far;
  Rng rng(task.seed);
  const double step = (t_far - t_near) / n;
  w.samples.assign(n, {});
  for (int i = 0; i < n; ++i) w.samples[i].t = t_near + (i + rng.uniform()) * step;

  const int k = model.joint_count();
  const int pose_dim = model.pose_dim();
  const int ctx_dim = ContextEncoder::kOutputDim;
  w.rigid.resize(n);
  w.nearest.resize(n);
  for (int i = 0; i < n; ++i) {
    w.rigid[i] = rigid_transform(task.ray.at(w.samples[i].t), cond.bones, model.blend);
    w.nearest[i] = nearest_joint(w.rigid[i].raw_weights, k);
  }

  w.x_c.resize(n);
  const bool use_nonrigid = settings.ramp != 0.0;
  if (use_nonrigid) {
    w.nr_in.resize(model.nonrigid.input_dim(), n);
    for (int i = 0; i < n; ++i)
      model.nonrigid.assemble_input(w.rigid[i].x_r, ctx.pose_cond[w.nearest[i]], ctx.ctx_nonrigid[w.nearest[i]],
                                    w.nr_in.col(i).data());
    const Matrix delta = model.nonrigid.mlp.forward(w.nr_in, keep ? &w.nr_cache : nullptr);
    for (int i = 0; i < n; ++i) w.x_c[i] = w.rigid[i].x_r + settings.ramp * delta.col(i);
  } else {
    for (int i = 0; i < n; ++i) w.x_c[i] = w.rigid[i].x_r;
  }

  const TriplaneField& field = model.field;
  const int fdim = field.feature_dim();
  w.head_in.resize(field.head_input_dim(), n);
  if (keep) w.tri.resize(n);
  for (int i = 0; i < n; ++i) {
    double* col = w.head_in.col(i).data();
    field.sample(w.x_c[i], col, keep ? &w.tri[i] : nullptr);
    const Vector& pc = ctx.pose_cond[w.nearest[i]];
    const Vector& cf = ctx.ctx_field[w.nearest[i]];
    for (int a = 0; a < pose_dim; ++a) col[fdim + a] = pc[a];
    for (int a = 0; a < ctx_dim; ++a) col[fdim + pose_dim + a] = cf[a];
  }
  w.density_out = field.density.forward(w.head_in, keep ? &w.density_cache : nullptr);
  w.color_out = field.color.forward(w.head_in, keep ? &w.color_cache : nullptr);
  for (int i = 0; i < n; ++i) {
    w.samples[i].sigma = softplus(w.density_out(0, i)) * w.rigid[i].foreground;
    for (int c = 0; c < 3; ++c) w.samples[i].color[c] = sigmoid(w.color_out(c, i));
  }
  w.comp = composite(w.samples, t_far);
  return true;
}

void backward_ray(const DycoModel& model, const RenderSettings& settings, RayWork& w, const Vec3& d_color,
                  GradBuffer& grads, std::vector<Vector>& d_ctx_nr, std::vector<Vector>& d_ctx_field) {
  const int n = w.n;
  std::vector<double> d_sigma;
  std::vector<Vec3> d_colors;
  composite_backward(w.samples, w.comp, d_color, 0.0, d_sigma, d_colors);

  Matrix d_density(1, n), d_color_pre(3, n);
  std::vector<double> d_fg(n);
  for (int i = 0; i < n; ++i) {
    const double pre = w.density_out(0, i);
    d_density(0, i) = d_sigma[i] * w.rigid[i].foreground * sigmoid(pre);
    d_fg[i] = d_sigma[i] * softplus(pre);
    for (int c = 0; c < 3; ++c) {
      const double s = w.samples[i].color[c];
      d_color_pre(c, i) = d_colors[i][c] * s * (1.0 - s);
    }
  }
  const TriplaneField& field = model.field;
  Matrix d_head = field.density.backward(w.density_cache, d_density, grads);
  d_head += field.color.backward(w.color_cache, d_color_pre, grads);

  const int fdim = field.feature_dim();
  const int pose_dim = model.pose_dim();
  const int ctx_dim = ContextEncoder::kOutputDim;
  std::vector<Vec3> d_xc(n, Vec3::Zero());
  for (int i = 0; i < n; ++i) {
    field.sample_backward(w.tri[i], d_head.col(i).data(), grads, &d_xc[i]);
    d_ctx_field[w.nearest[i]] += d_head.col(i).segment(fdim + pose_dim, ctx_dim);
  }

  std::vector<Vec3> d_xr = d_xc;
  if (settings.ramp != 0.0) {
    Matrix d_delta(3, n);
    for (int i = 0; i < n; ++i) d_delta.col(i) = settings.ramp * d_xc[i];
    const Matrix d_in = model.nonrigid.mlp.backward(w.nr_cache, d_delta, grads);
    const int pe = positional_encoding_dim(model.nonrigid.pe_freqs());
    for (int i = 0; i < n; ++i) {
      positional_encoding_backward(w.rigid[i].x_r, model.nonrigid.pe_freqs(), d_in.col(i).data(), d_xr[i]);
      d_ctx_nr[w.nearest[i]] += d_in.col(i).segment(pe + pose_dim, ctx_dim);
    }
  }
  for (int i = 0; i < n; ++i) rigid_transform_backward(w.rigid[i], model.blend, d_xr[i], d_fg[i], grads);
}

constexpr int kChunkRays = 8;

struct ChunkResult {
  GradBuffer grads;
  std::vector<Vector> d_ctx_nr, d_ctx_field;
  std::vector<double> losses;
  std::vector<Vec3> colors;
};

}  // namespace

Vec3 render_ray(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx, const RayTask& task,
                const RenderSettings& settings, double* opacity) {
  RayWork w;
  if (!forward_ray(model, cond, ctx, task, settings, w, false)) {
    if (opacity) *opacity = 0.0;
    return Vec3::Zero();
  }
  if (opacity) *opacity = w.comp.opacity;
  return w.comp.color;
}

std::vector<Vec3> render_rays(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                              const std::vector<RayTask>& tasks, const RenderSettings& settings) {
  std::vector<Vec3> out(tasks.size(), Vec3::Zero());
  const int n = static_cast<int>(tasks.size());
  const int chunks = (n + kChunkRays - 1) / kChunkRays;
  parallel_for(chunks, settings.threads, [&](int c) {
    const int end = std::min(n, (c + 1) * kChunkRays);
    for (int r = c * kChunkRays; r < end; ++r) out[r] = render_ray(model, cond, ctx, tasks[r], settings);
  });
  return out;
}

BatchResult batch_loss_and_gradient(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                                    const std::vector<RayTask>& tasks, const std::vector<Vec3>& targets,
                                    const RenderSettings& settings, GradBuffer& grads) {
  if (tasks.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "rays and targets differ in count");
  if (tasks.empty()) throw Error(ErrorCode::LengthMismatch, "empty ray batch");
  if (ctx.cache_field.empty()) throw Error(ErrorCode::DimensionMismatch, "frame context lacks encoder caches");
  const int n = static_cast<int>(tasks.size());
  const int k = model.joint_count();
  const double inv_n = 1.0 / n;
  const int chunks = (n + kChunkRays - 1) / kChunkRays;
  const int wave = std::max(1, settings.threads);

  std::vector<ChunkResult> slots(std::min(wave, chunks));
  for (auto& s : slots) s.grads = GradBuffer(model.params(), true);

  BatchResult result;
  result.colors.resize(n);
  std::vector<Vector> d_ctx_nr(k, Vector::Zero(ContextEncoder::kOutputDim));
  std::vector<Vector> d_ctx_field(k, Vector::Zero(ContextEncoder::kOutputDim));
  double loss_sum = 0.0;

  for (int first = 0; first < chunks; first += wave) {
    const int count = std::min(wave, chunks - first);
    parallel_for(count, settings.threads, [&](int s) {
      ChunkResult& slot = slots[s];
      slot.grads.zero();
      slot.d_ctx_nr.assign(k, Vector::Zero(ContextEncoder::kOutputDim));
      slot.d_ctx_field.assign(k, Vector::Zero(ContextEncoder::kOutputDim));
      slot.losses.clear();
      slot.colors.clear();
      const int c = first + s;
      const int end = std::min(n, (c + 1) * kChunkRays);
      for (int r = c * kChunkRays; r < end; ++r) {
        RayWork w;
        Vec3 color = Vec3::Zero();
        const bool hit = forward_ray(model, cond, ctx, tasks[r], settings, w, true);
        if (hit) color = w.comp.color;
        const Vec3 err = color - targets[r];
        slot.losses.push_back(err.squaredNorm());
        slot.colors.push_back(color);
        if (hit) backward_ray(model, settings, w, 2.0 * inv_n * err, slot.grads, slot.d_ctx_nr, slot.d_ctx_field);
      }
    });
    for (int s = 0; s < count; ++s) {
      const ChunkResult& slot = slots[s];
      slot.grads.merge_into(grads);
      for (int j = 0; j < k; ++j) {
        d_ctx_nr[j] += slot.d_ctx_nr[j];
        d_ctx_field[j] += slot.d_ctx_field[j];
      }
      const int base = (first + s) * kChunkRays;
      for (std::size_t r = 0; r < slot.losses.size(); ++r) {
        loss_sum += slot.losses[r];
        result.colors[base + r] = slot.colors[r];
      }
    }
  }
  for (int j = 0; j < k; ++j) {
    if (!d_ctx_nr[j].isZero(0.0)) model.encoder_nonrigid.backward(ctx.cache_nonrigid[j], d_ctx_nr[j], grads);
    if (!d_ctx_field[j].isZero(0.0)) model.encoder_field.backward(ctx.cache_field[j], d_ctx_field[j], grads);
  }
  result.loss = loss_sum * inv_n;
  return result;
}

double batch_loss(const DycoModel& model, const FrameCondition& cond, const std::vector<RayTask>& tasks,
                  const std::vector<Vec3>& targets, const RenderSettings& settings) {
  if (tasks.size() != targets.size()) throw Error(ErrorCode::LengthMismatch, "rays and targets differ in count");
  const FrameContext ctx = encode_frame(model, cond, false);
  const auto colors = render_rays(model, cond, ctx, tasks, settings);
  double sum = 0.0;
  for (std::size_t r = 0; r < colors.size(); ++r) sum += (colors[r] - targets[r]).squaredNorm();
  return sum / static_cast<double>(colors.size());
}

}  // namespace dyco
