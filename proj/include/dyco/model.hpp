#pragma once

#include "dyco/canonical_field.hpp"
#include "dyco/context_encoder.hpp"
#include "dyco/deform.hpp"
#include "dyco/renderer.hpp"
#include "dyco/sequence.hpp"
#include "dyco/skeleton.hpp"

#include <cstdint>
#include <vector>

namespace dyco {

struct ModelShape {
  FieldShape field;
  int blend_resolution = 32;
  int nonrigid_width = 128;
  int pe_freqs = 6;
  int sequence_length = 6;
  double bounds_margin = 0.3;
};

/// The articulated radiance field: blend-weight volume, two context encoders
/// (one for the non-rigid offset, one for the canonical field), the non-rigid
/// MLP and the triplane field.
class DycoModel {
 public:
  DycoModel(const KinematicTree& tree, const ModelShape& shape, std::uint64_t seed);

  DycoModel(const DycoModel&) = delete;
  DycoModel& operator=(const DycoModel&) = delete;

  const KinematicTree& tree() const noexcept { return tree_; }
  const ModelShape& shape() const noexcept { return shape_; }
  int joint_count() const noexcept { return tree_.joint_count(); }
  int pose_dim() const noexcept { return 3 * joint_count(); }
  const Aabb& canonical_box() const noexcept { return canonical_box_; }
  const Eigen::VectorXd& mask(int joint) const { return masks_.at(joint); }

  /// Registration order is fixed; ids index gradient and optimizer buffers.
  const ParamStore& params() const noexcept { return store_; }

  BlendWeightVolume blend;
  ContextEncoder encoder_nonrigid;
  ContextEncoder encoder_field;
  NonRigidMlp nonrigid;
  TriplaneField field;

 private:
  KinematicTree tree_;
  ModelShape shape_;
  Aabb canonical_box_;
  std::vector<Eigen::VectorXd> masks_;
  ParamStore store_;
};

/// Everything about one frame that does not depend on the query point.
struct FrameCondition {
  BoneTransforms bones;
  Eigen::VectorXd pose_angles;      // 3K current joint axis-angles
  std::vector<DeltaPose> sequence;  // scaled delta poses, oldest first
  Aabb bounds;                      // observation-space render box
};

struct ConditionOptions {
  SequenceParams sequence;
  RotRepresentation rep = RotRepresentation::AxisAngle;
  double alpha = 1.0;
  bool delta_condition = true;  // false zeroes the delta sequence (ablation)
};

FrameCondition make_condition(const DycoModel& model, const PoseTrack& track, int position,
                              const ConditionOptions& options);

/// Posed joints and bone tips, inflated by the margin.
Aabb posed_bounds(const KinematicTree& tree, const BoneTransforms& bones, double margin);

/// Per-joint encoder outputs; a query point reuses the entry of its nearest joint.
struct FrameContext {
  std::vector<Vector> ctx_nonrigid;
  std::vector<Vector> ctx_field;
  std::vector<Vector> pose_cond;  // masked current joint angles
  std::vector<ContextEncoder::Cache> cache_nonrigid;
  std::vector<ContextEncoder::Cache> cache_field;
};

FrameContext encode_frame(const DycoModel& model, const FrameCondition& cond, bool keep_cache);

/// Complete per-point evaluation (warp then field) with the kinematic mask applied.
struct PointEval {
  WarpResult warp;
  int nearest = 0;
  FieldValue value;
};
PointEval evaluate_point(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                         const Vec3& x, double ramp);

struct RayTask {
  Ray ray;
  std::uint64_t seed = 0;  // stratified-sampling stream
};

struct RenderSettings {
  int n_samples = 64;
  double ramp = 1.0;
  int threads = 1;
};

/// Forward render of one ray; misses return black.
Vec3 render_ray(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                const RayTask& task, const RenderSettings& settings, double* opacity = nullptr);

std::vector<Vec3> render_rays(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                              const std::vector<RayTask>& tasks, const RenderSettings& settings);

struct BatchResult {
  double loss = 0.0;
  std::vector<Vec3> colors;
};

/// Mean-over-rays squared colour error and its gradient with respect to every
/// parameter, accumulated into `grads` (dense). Rays are processed in fixed
/// chunks and reduced in chunk order, so the result is independent of threads.
BatchResult batch_loss_and_gradient(const DycoModel& model, const FrameCondition& cond, const FrameContext& ctx,
                                    const std::vector<RayTask>& tasks, const std::vector<Vec3>& targets,
                                    const RenderSettings& settings, GradBuffer& grads);

/// Loss only, through the identical forward path.
double batch_loss(const DycoModel& model, const FrameCondition& cond, const std::vector<RayTask>& tasks,
                  const std::vector<Vec3>& targets, const RenderSettings& settings);

}  // namespace dyco
