#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrdepth/error.hpp"

namespace nrdepth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Face = std::array<int, 3>;

/// SMPL body meshes carry this many vertices; any consistent topology is accepted.
inline constexpr std::size_t kSmplVertexCount = 6890;

struct TriMesh {
  std::vector<Vec3> vertices;  // meters
  std::vector<Face> faces;
};

/// Throws TopologyError on out-of-range or repeated face indices.
inline void validate_topology(const std::vector<Face>& faces, std::size_t vertex_count) {
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& face = faces[f];
    for (int v : face)
      if (v < 0 || static_cast<std::size_t>(v) >= vertex_count)
        throw TopologyError("face " + std::to_string(f) + " references vertex " +
                            std::to_string(v) + " of " + std::to_string(vertex_count));
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw TopologyError("face " + std::to_string(f) + " is degenerate");
  }
}

/// Per-frame vertex arrays over one shared face list.
struct TriMeshSequence {
  std::vector<std::vector<Vec3>> frames;
  std::vector<Face> topology;
  double frame_rate = 30.0;

  std::size_t size() const noexcept { return frames.size(); }
  std::size_t vertex_count() const noexcept { return frames.empty() ? 0 : frames.front().size(); }

  TriMesh frame(std::size_t i) const { return TriMesh{frames.at(i), topology}; }

  void validate() const {
    for (std::size_t i = 0; i < frames.size(); ++i)
      if (frames[i].size() != vertex_count())
        throw TopologyError("frame " + std::to_string(i) + " has " +
                            std::to_string(frames[i].size()) + " vertices, expected " +
                            std::to_string(vertex_count()));
    validate_topology(topology, vertex_count());
  }
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }

  /// (this ∘ other)(p) = this(other(p))
  RigidTransform compose(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  static RigidTransform identity() { return {}; }
};

/// Two-ring neighborhoods in CSR form: neighbors of v are
/// indices[offsets[v] .. offsets[v+1]), ascending, v included.
struct Adjacency {
  std::vector<std::size_t> offsets;
  std::vector<int> indices;

  std::size_t vertex_count() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }

  std::vector<int> neighbors(std::size_t v) const {
    return {indices.begin() + static_cast<std::ptrdiff_t>(offsets.at(v)),
            indices.begin() + static_cast<std::ptrdiff_t>(offsets.at(v + 1))};
  }
};

inline Adjacency build_two_ring(const std::vector<Face>& topology, std::size_t vertex_count) {
  validate_topology(topology, vertex_count);

  std::vector<std::vector<int>> one_ring(vertex_count);
  for (const auto& f : topology)
    for (int k = 0; k < 3; ++k) {
      one_ring[static_cast<std::size_t>(f[k])].push_back(f[(k + 1) % 3]);
      one_ring[static_cast<std::size_t>(f[k])].push_back(f[(k + 2) % 3]);
    }
  for (auto& ring : one_ring) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  }

  Adjacency adj;
  adj.offsets.reserve(vertex_count + 1);
  adj.offsets.push_back(0);
  std::vector<int> scratch;
  for (std::size_t v = 0; v < vertex_count; ++v) {
    scratch.clear();
    scratch.push_back(static_cast<int>(v));
    for (int n : one_ring[v]) {
      scratch.push_back(n);
      const auto& second = one_ring[static_cast<std::size_t>(n)];
      scratch.insert(scratch.end(), second.begin(), second.end());
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    adj.indices.insert(adj.indices.end(), scratch.begin(), scratch.end());
    adj.offsets.push_back(adj.indices.size());
  }
  return adj;
}

/// Least-squares rotation R minimizing sum |R*src_i - dst_i|^2 over centered point sets
/// (Kabsch). Reflections are removed by flipping the weakest singular direction.
/// Returns false when the source set has rank < 2.
inline bool kabsch_rotation(const std::vector<Vec3>& src_centered,
                            const std::vector<Vec3>& dst_centered, Mat3& rotation) {
  Mat3 cross = Mat3::Zero();
  Mat3 scatter = Mat3::Zero();
  for (std::size_t i = 0; i < src_centered.size(); ++i) {
    cross += dst_centered[i] * src_centered[i].transpose();
    scatter += src_centered[i] * src_centered[i].transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter, Eigen::EigenvaluesOnly);
  const Vec3 ev = eig.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2)) {
    rotation.setIdentity();
    return false;
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((u * v.transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  rotation = u * d * v.transpose();
  return true;
}

/// Rigid transform of one vertex, registered over its two-ring neighborhood about the
/// center vertex: t = v_ref - R * v_target.
inline RigidTransform per_vertex_transform(const TriMesh& target, const TriMesh& reference,
                                           const Adjacency& adjacency, std::size_t vertex) {
  if (target.vertices.size() != reference.vertices.size())
    throw TopologyError("target and reference meshes differ in vertex count");
  if (vertex >= adjacency.vertex_count() || vertex >= target.vertices.size())
    throw TopologyError("vertex index " + std::to_string(vertex) + " out of range");

  const Vec3& ct = target.vertices[vertex];
  const Vec3& cr = reference.vertices[vertex];
  std::vector<Vec3> src;
  std::vector<Vec3> dst;
  for (auto i = adjacency.offsets[vertex]; i < adjacency.offsets[vertex + 1]; ++i) {
    const auto n = static_cast<std::size_t>(adjacency.indices[i]);
    src.push_back(target.vertices[n] - ct);
    dst.push_back(reference.vertices[n] - cr);
  }
  RigidTransform out;
  if (src.size() < 3 || !kabsch_rotation(src, dst, out.rotation))
    throw DegenerateGeometryError(
        vertex, "vertex " + std::to_string(vertex) + ": neighborhood is collinear or degenerate");
  out.translation = cr - out.rotation * ct;
  return out;
}

struct VertexTransforms {
  std::vector<RigidTransform> transforms;
  /// 1 where the neighborhood was degenerate and the transform fell back to identity.
  std::vector<std::uint8_t> degenerate;

  std::size_t degenerate_count() const {
    return static_cast<std::size_t>(std::count(degenerate.begin(), degenerate.end(), 1));
  }
};

/// Batched per_vertex_transform. Degenerate neighborhoods yield identity and are flagged
/// instead of failing the frame.
inline VertexTransforms all_vertex_transforms(const TriMesh& target, const TriMesh& reference,
                                              const Adjacency& adjacency) {
  if (target.vertices.size() != reference.vertices.size())
    throw TopologyError("target and reference meshes differ in vertex count");
  const std::size_t n = target.vertices.size();
  VertexTransforms out;
  out.transforms.resize(n);
  out.degenerate.assign(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    try {
      out.transforms[v] = per_vertex_transform(target, reference, adjacency, v);
    } catch (const DegenerateGeometryError&) {
      out.transforms[v] = RigidTransform::identity();
      out.degenerate[v] = 1;
    }
  }
  return out;
}

/// Mean of rotations: sign-aligned quaternion average, renormalized.
inline Mat3 average_rotation(std::span<const Mat3> rotations) {
  Eigen::Quaterniond first(rotations.front());
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  for (const auto& r : rotations) {
    Eigen::Quaterniond q(r);
    Eigen::Vector4d c = q.coeffs();
    if (c.dot(first.coeffs()) < 0.0) c = -c;
    acc += c;
  }
  acc.normalize();
  return Eigen::Quaterniond(acc(3), acc(0), acc(1), acc(2)).toRotationMatrix();
}

/// Mean of rigid transforms: arithmetic mean translation, quaternion-mean rotation.
inline RigidTransform average_transform(std::span<const RigidTransform> transforms) {
  const bool all_equal = std::all_of(transforms.begin(), transforms.end(), [&](const auto& t) {
    return t.rotation == transforms.front().rotation &&
           t.translation == transforms.front().translation;
  });
  if (all_equal) return transforms.front();
  std::vector<Mat3> rotations;
  rotations.reserve(transforms.size());
  Vec3 t = Vec3::Zero();
  for (const auto& tr : transforms) {
    rotations.push_back(tr.rotation);
    t += tr.translation;
  }
  return {average_rotation(rotations), t / static_cast<double>(transforms.size())};
}

/// Geodesic angle between two rotations, radians.
inline double rotation_angle_between(const Mat3& a, const Mat3& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) * 0.5, -1.0, 1.0);
  // acos loses precision near 0; use the chordal norm there.
  const double chord = (a - b).norm();
  if (chord < 1e-4) return 2.0 * std::asin(std::min(1.0, chord / (2.0 * std::sqrt(2.0))));
  return std::acos(c);
}

}  // namespace nrdepth
