#pragma once

#include <Eigen/Core>

#include <span>

namespace dyco {

struct Aabb {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();

  Eigen::Vector3d extent() const { return max - min; }
  Aabb inflated(double margin) const {
    return {min.array() - margin, max.array() + margin};
  }

  static Aabb around(std::span<const Eigen::Vector3d> points) {
    Aabb box{points.front(), points.front()};
    for (const auto& p : points) {
      box.min = box.min.cwiseMin(p);
      box.max = box.max.cwiseMax(p);
    }
    return box;
  }
};

}  // namespace dyco
