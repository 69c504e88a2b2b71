#include "dyco/kinematic_tree.hpp"

#include "dyco/error.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace dyco {

KinematicTree::KinematicTree(std::vector<int> parents, std::vector<Vec3> rest_offsets)
    : parents_(std::move(parents)), offsets_(std::move(rest_offsets)) {
  const int k = static_cast<int>(parents_.size());
  if (k == 0) throw Error(ErrorCode::CyclicTree, "skeleton has no joints");
  if (static_cast<int>(offsets_.size()) != k)
    throw Error(ErrorCode::SkeletonMismatch, "offset count differs from joint count");

  children_.assign(k, {});
  for (int j = 0; j < k; ++j) {
    const int p = parents_[j];
    if (p == -1) {
      if (root_ != -1) throw Error(ErrorCode::CyclicTree, "more than one root");
      root_ = j;
    } else if (p < 0 || p >= k || p == j) {
      throw Error(ErrorCode::CyclicTree, "joint " + std::to_string(j) + " has invalid parent");
    } else {
      children_[p].push_back(j);
    }
  }
  if (root_ == -1) throw Error(ErrorCode::CyclicTree, "no root joint");

  // Breadth-first from the root; anything unreached sits on a cycle.
  order_.reserve(k);
  order_.push_back(root_);
  for (std::size_t head = 0; head < order_.size(); ++head)
    for (int c : children_[order_[head]]) order_.push_back(c);
  if (static_cast<int>(order_.size()) != k)
    throw Error(ErrorCode::CyclicTree, "parent indices contain a cycle");
}

std::vector<Vec3> KinematicTree::rest_positions() const {
  std::vector<Vec3> pos(joint_count(), Vec3::Zero());
  for (int j : order_) {
    const int p = parents_[j];
    pos[j] = (p < 0 ? Vec3::Zero() : pos[p]) + offsets_[j];
  }
  return pos;
}

std::pair<Vec3, Vec3> KinematicTree::rest_bone_segment(int j) const {
  const auto pos = rest_positions();
  if (!children_.at(j).empty()) return {pos[j], pos[children_[j].front()]};
  return {pos[j], pos[j] + offsets_[j]};
}

bool KinematicTree::is_ancestor(int ancestor, int j) const {
  for (int p = parents_.at(j); p >= 0; p = parents_[p])
    if (p == ancestor) return true;
  return false;
}

KinematicTree make_arm_chain() {
  return KinematicTree({-1, 0, 1, 2}, {Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.35, 0.0),
                                       Vec3(0.0, 0.35, 0.0), Vec3(0.3, 0.0, 0.0)});
}

KinematicTree make_smpl_tree() {
  std::vector<int> parents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                              9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};
  std::vector<Vec3> offsets = {
      {0.0, 0.0, 0.0},       {0.06, -0.09, 0.0},    {-0.06, -0.09, 0.0},   {0.0, 0.11, 0.0},
      {0.04, -0.38, 0.0},    {-0.04, -0.38, 0.0},   {0.0, 0.14, 0.0},      {0.0, -0.40, -0.04},
      {0.0, -0.40, -0.04},   {0.0, 0.05, 0.02},     {0.02, -0.06, 0.12},   {-0.02, -0.06, 0.12},
      {0.0, 0.21, -0.03},    {0.08, 0.12, -0.02},   {-0.08, 0.12, -0.02},  {0.0, 0.09, 0.05},
      {0.12, 0.04, -0.01},   {-0.12, 0.04, -0.01},  {0.26, 0.0, -0.02},    {-0.26, 0.0, -0.02},
      {0.25, 0.01, 0.0},     {-0.25, 0.01, 0.0},    {0.08, -0.01, -0.01},  {-0.08, -0.01, -0.01}};
  return KinematicTree(std::move(parents), std::move(offsets));
}

std::string skeleton_to_string(const KinematicTree& tree) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "#dyco-skel v1 K=" << tree.joint_count() << '\n';
  for (int j = 0; j < tree.joint_count(); ++j) {
    const Vec3& o = tree.rest_offset(j);
    out << "joint " << j << " parent " << tree.parent(j) << " offset " << o.x() << ' ' << o.y()
        << ' ' << o.z() << '\n';
  }
  return out.str();
}

KinematicTree skeleton_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header) || header.rfind("#dyco-skel v1 K=", 0) != 0)
    throw Error(ErrorCode::ParseError, "missing '#dyco-skel v1 K=<K>' header");
  int k = 0;
  try {
    k = std::stoi(header.substr(16));
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad joint count in skeleton header");
  }
  if (k <= 0) throw Error(ErrorCode::ParseError, "joint count must be positive");

  std::vector<int> parents(k, -2);
  std::vector<Vec3> offsets(k, Vec3::Zero());
  std::string line;
  int seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kw_joint, kw_parent, kw_offset;
    int idx = 0, parent = 0;
    double x = 0, y = 0, z = 0;
    if (!(ls >> kw_joint >> idx >> kw_parent >> parent >> kw_offset >> x >> y >> z) ||
        kw_joint != "joint" || kw_parent != "parent" || kw_offset != "offset")
      throw Error(ErrorCode::ParseError, "malformed skeleton line: " + line);
    if (idx < 0 || idx >= k || parents[idx] != -2)
      throw Error(ErrorCode::ParseError, "bad or duplicate joint index " + std::to_string(idx));
    parents[idx] = parent;
    offsets[idx] = Vec3(x, y, z);
    ++seen;
  }
  if (seen != k) throw Error(ErrorCode::ParseError, "skeleton lists fewer joints than K");
  return KinematicTree(std::move(parents), std::move(offsets));
}

KinematicTree read_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return skeleton_from_string(ss.str());
}

void write_skeleton(const KinematicTree& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << skeleton_to_string(tree);
}

}  // namespace dyco
