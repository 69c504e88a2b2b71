#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace dyco {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Joint hierarchy with canonical rest offsets. Joint 0..K-1; the root has
/// parent -1. Offsets are expressed in the parent frame at rest.
class KinematicTree {
 public:
  KinematicTree() = default;

  /// Throws CyclicTree unless the parents form a single rooted tree.
  KinematicTree(std::vector<int> parents, std::vector<Vec3> rest_offsets);

  int joint_count() const noexcept { return static_cast<int>(parents_.size()); }
  int root() const noexcept { return root_; }
  int parent(int j) const { return parents_.at(j); }
  const std::vector<int>& parents() const noexcept { return parents_; }
  const std::vector<int>& children(int j) const { return children_.at(j); }
  const Vec3& rest_offset(int j) const { return offsets_.at(j); }
  const std::vector<Vec3>& rest_offsets() const noexcept { return offsets_; }

  /// Joints ordered so that every parent precedes its children.
  const std::vector<int>& topological_order() const noexcept { return order_; }

  /// Rest-pose joint origins in canonical space.
  std::vector<Vec3> rest_positions() const;

  /// Bone segment owned by joint j at rest: from the joint origin to its first
  /// child, or for a leaf, extended by the leaf's own offset.
  std::pair<Vec3, Vec3> rest_bone_segment(int j) const;

  bool is_ancestor(int ancestor, int j) const;

 private:
  std::vector<int> parents_;
  std::vector<Vec3> offsets_;
  std::vector<std::vector<int>> children_;
  std::vector<int> order_;
  int root_ = -1;
};

/// Four-joint chain root -> spine -> shoulder -> arm used by the synthetic scene.
KinematicTree make_arm_chain();

/// SMPL 24-joint topology with approximate rest offsets.
KinematicTree make_smpl_tree();

/// Skeleton file: `#dyco-skel v1 K=<K>` then `joint <idx> parent <p> offset <x y z>`.
KinematicTree read_skeleton(const std::string& path);
void write_skeleton(const KinematicTree& tree, const std::string& path);
std::string skeleton_to_string(const KinematicTree& tree);
KinematicTree skeleton_from_string(const std::string& text);

}  // namespace dyco
