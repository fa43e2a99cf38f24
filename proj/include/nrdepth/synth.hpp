#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "nrdepth/camera.hpp"
#include "nrdepth/error.hpp"
#include "nrdepth/grid.hpp"
#include "nrdepth/mesh.hpp"
#include "nrdepth/raster.hpp"

namespace nrdepth {

enum class MotionKind { rigid, articulated, bend };

inline MotionKind parse_motion_kind(const std::string& name) {
  if (name == "rigid") return MotionKind::rigid;
  if (name == "articulated") return MotionKind::articulated;
  if (name == "bend") return MotionKind::bend;
  throw InputError("unsupported motion kind '" + name + "' (rigid, articulated, bend)");
}

inline std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::rigid: return "rigid";
    case MotionKind::articulated: return "articulated";
    case MotionKind::bend: return "bend";
  }
  return "rigid";
}

/// Gaussian relief on the torso front, displacing toward the camera in the body frame.
struct BumpSpec {
  double amplitude = 0.03;  // meters; 0 disables
  double sigma = 0.07;      // meters
  double center_x = -0.03;  // body-frame position on the torso front
  double center_y = -0.06;
};

struct AppearanceParams {
  bool textured = true;
  double ambient = 0.35;
  Vec3 light_direction = Vec3(-0.3, -0.4, -1.0).normalized();  // toward the light, body frame
  double shading_drift = 0.0;  // per-frame global gain change, off by default
  int supersample = 1;  // >1 antialiases, at the cost of pixel-exact agreement with depth
  std::array<double, 3> background{0.25, 0.3, 0.35};
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int frames = 20;
  MotionKind kind = MotionKind::rigid;
  BumpSpec bump;
  AppearanceParams appearance;
  Intrinsics intrinsics{300.0, 300.0, 128.0, 128.0, 256, 256};
  double distance = 1.8;      // meters from camera to torso center
  bool with_arm = true;
  int torso_around = 72;      // vertices per ring
  int torso_rings = 48;       // cylinder rings (caps add more)
  double motion_scale = 1.0;  // scales every motion amplitude
};

/// Deforming body proxy with exact ground truth.
struct SynthScene {
  SceneSpec spec;
  TriMeshSequence base;      // coarse body, what a body-model fit would provide
  TriMeshSequence detailed;  // base plus relief; what the images show
  std::vector<Vec3> rest;    // body-frame base vertices
  std::vector<double> arm_weight;  // 0 torso, 1 arm, blended in the shoulder band
  std::vector<RigidTransform> poses;  // body frame -> camera frame, per frame
  std::vector<double> arm_angle;      // per frame, radians
  std::vector<double> curvature;      // per frame bend curvature, 1/m
  std::array<std::vector<double>, 3> texture_k;  // per channel: 4 numbers per wave
  std::vector<double> drift_gain;

  Intrinsics intrinsics() const { return spec.intrinsics; }
};

namespace synth_detail {

inline constexpr double kTorsoRadius = 0.16;
inline constexpr double kTorsoHalf = 0.3;
inline constexpr double kArmRadius = 0.05;
inline constexpr double kArmHalf = 0.22;
inline const Vec3 kArmCenter{0.21, 0.02, -0.27};
inline const Vec3 kShoulder{0.21, -0.25, -0.27};
inline constexpr double kShoulderBand = 0.1;

/// Closed capsule along y: rings of `around` vertices, hemispherical caps, single poles.
inline void append_capsule(TriMesh& mesh, const Vec3& center, double radius, double half,
                           int around, int cylinder_rings, int cap_rings) {
  const int base = static_cast<int>(mesh.vertices.size());
  std::vector<double> ring_y, ring_r;
  for (int i = 1; i <= cap_rings; ++i) {
    const double a = std::numbers::pi / 2 * i / (cap_rings + 1);
    ring_y.push_back(-half - radius * std::cos(a));
    ring_r.push_back(radius * std::sin(a));
  }
  for (int i = 0; i <= cylinder_rings; ++i) {
    ring_y.push_back(-half + 2.0 * half * i / cylinder_rings);
    ring_r.push_back(radius);
  }
  for (int i = cap_rings; i >= 1; --i) {
    const double a = std::numbers::pi / 2 * i / (cap_rings + 1);
    ring_y.push_back(half + radius * std::cos(a));
    ring_r.push_back(radius * std::sin(a));
  }
  mesh.vertices.push_back(center + Vec3(0.0, -half - radius, 0.0));
  for (std::size_t r = 0; r < ring_y.size(); ++r)
    for (int j = 0; j < around; ++j) {
      const double phi = 2.0 * std::numbers::pi * j / around;
      mesh.vertices.push_back(center + Vec3(ring_r[r] * std::sin(phi), ring_y[r],
                                            -ring_r[r] * std::cos(phi)));
    }
  mesh.vertices.push_back(center + Vec3(0.0, half + radius, 0.0));
  const int rings = static_cast<int>(ring_y.size());
  const int top = base;
  const int bottom = base + 1 + rings * around;
  auto at = [&](int r, int j) { return base + 1 + r * around + (j % around); };
  for (int j = 0; j < around; ++j) mesh.faces.push_back({top, at(0, j + 1), at(0, j)});
  for (int r = 0; r + 1 < rings; ++r)
    for (int j = 0; j < around; ++j) {
      mesh.faces.push_back({at(r, j), at(r, j + 1), at(r + 1, j + 1)});
      mesh.faces.push_back({at(r, j), at(r + 1, j + 1), at(r + 1, j)});
    }
  for (int j = 0; j < around; ++j)
    mesh.faces.push_back({bottom, at(rings - 1, j), at(rings - 1, j + 1)});
}

inline Mat3 rot_x(double a) { return Eigen::AngleAxisd(a, Vec3::UnitX()).toRotationMatrix(); }
inline Mat3 rot_y(double a) { return Eigen::AngleAxisd(a, Vec3::UnitY()).toRotationMatrix(); }
inline Mat3 rot_z(double a) { return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix(); }

/// Local rigid transform of the isometric beam bend of curvature kappa about the x axis.
inline RigidTransform bend_at(double kappa, const Vec3& v) {
  if (kappa == 0.0) return {};
  const double theta = kappa * v.y();
  const Vec3 centerline(0.0, std::sin(theta) / kappa, (1.0 - std::cos(theta)) / kappa);
  const Mat3 r = rot_x(theta);
  const Vec3 mapped = centerline + r * Vec3(v.x(), 0.0, v.z());
  return {r, mapped - r * v};
}

inline double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

inline double texture_value(const std::vector<double>& waves, const Vec3& p) {
  double v = 0.0;
  std::size_t count = waves.size() / 5;
  for (std::size_t i = 0; i < count; ++i) {
    const double* w = &waves[5 * i];
    v += w[4] * std::sin(w[0] * p.x() + w[1] * p.y() + w[2] * p.z() + w[3]);
  }
  return v;
}

}  // namespace synth_detail

/// Local body-frame -> camera-frame transform of vertex `v` at `frame`; exact motion of the
/// rigid parts and of the bend field.
inline RigidTransform generating_transform(const SynthScene& scene, std::size_t frame,
                                           std::size_t v) {
  using namespace synth_detail;
  const Vec3& p = scene.rest[v];
  RigidTransform local;
  const double w = scene.arm_weight[v];
  if (w > 0.0) {
    const Mat3 r = rot_z(w * scene.arm_angle[frame]);
    local = {r, kShoulder - r * kShoulder};
  }
  const RigidTransform bend = bend_at(scene.curvature[frame], local.apply(p));
  return scene.poses[frame].compose(bend).compose(local);
}

/// Generating target -> reference transform of vertex `v`.
inline RigidTransform generating_motion(const SynthScene& scene, std::size_t target,
                                        std::size_t reference, std::size_t v) {
  return generating_transform(scene, reference, v).compose(generating_transform(scene, target, v).inverse());
}

/// Body-frame relief displacement of a base vertex (zero on the arm and the torso back).
inline Vec3 relief_displacement(const SynthScene& scene, std::size_t v) {
  const auto& b = scene.spec.bump;
  if (b.amplitude == 0.0 || scene.arm_weight[v] > 0.0) return Vec3::Zero();
  const Vec3& p = scene.rest[v];
  if (p.z() >= 0.0 || std::abs(p.y()) > synth_detail::kTorsoHalf) return Vec3::Zero();
  const double front = -p.z() / synth_detail::kTorsoRadius;  // 1 at the front, 0 at the sides
  const double dx = p.x() - b.center_x, dy = p.y() - b.center_y;
  const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
  return Vec3(0.0, 0.0, -b.amplitude * g * synth_detail::smoothstep(0.0, 0.6, front));
}

inline SynthScene generate_scene(const SceneSpec& spec) {
  using namespace synth_detail;
  if (spec.frames < 1) throw InputError("scene needs at least one frame");
  if (std::abs(spec.bump.amplitude) > 0.1)
    log::warn("relief amplitude exceeds the 10 cm detail bound");
  spec.intrinsics.validate();

  SynthScene scene;
  scene.spec = spec;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  TriMesh body;
  const int cap_rings = std::max(2, spec.torso_around / 6);
  append_capsule(body, Vec3::Zero(), kTorsoRadius, kTorsoHalf, spec.torso_around,
                 spec.torso_rings, cap_rings);
  const std::size_t torso_vertices = body.vertices.size();
  if (spec.with_arm)
    append_capsule(body, kArmCenter, kArmRadius, kArmHalf, std::max(8, spec.torso_around / 2),
                   std::max(4, spec.torso_rings / 2), std::max(2, cap_rings / 2));
  scene.rest = body.vertices;
  scene.arm_weight.assign(body.vertices.size(), 0.0);
  for (std::size_t v = torso_vertices; v < body.vertices.size(); ++v)
    scene.arm_weight[v] = smoothstep(0.0, kShoulderBand, body.vertices[v].y() - kShoulder.y());

  // Per-scene motion parameters.
  const double s = spec.motion_scale;
  const double phase0 = 2.0 * std::numbers::pi * unit(rng);
  const double phase1 = 2.0 * std::numbers::pi * unit(rng);
  const double phase2 = 2.0 * std::numbers::pi * unit(rng);
  const double period = 36.0 + 12.0 * unit(rng);
  const double yaw_amp = s * (0.30 + 0.1 * unit(rng));
  const double pitch_amp = s * 0.06;
  const double sway_amp = s * (0.12 + 0.04 * unit(rng));
  const double depth_amp = s * 0.05;

  for (int f = 0; f < spec.frames; ++f) {
    const double tau = 2.0 * std::numbers::pi * f / period;
    double yaw = yaw_amp * std::sin(tau + phase0);
    double pitch = pitch_amp * std::sin(0.7 * tau + phase1);
    Vec3 trans(sway_amp * std::sin(tau + phase2), 0.0, spec.distance + depth_amp * std::sin(0.5 * tau));
    double arm = 0.0, kappa = 0.0;
    switch (spec.kind) {
      case MotionKind::rigid: break;
      case MotionKind::articulated:
        yaw *= 0.5;
        trans.x() *= 0.5;
        arm = s * (0.45 + 0.45 * std::sin(1.3 * tau + phase1));
        break;
      case MotionKind::bend:
        yaw *= 0.5;
        trans.x() *= 0.5;
        kappa = s * 0.6 * std::sin(tau + phase1);
        break;
    }
    scene.poses.push_back({rot_y(yaw) * rot_x(pitch), trans});
    scene.arm_angle.push_back(arm);
    scene.curvature.push_back(kappa);
  }

  scene.drift_gain.resize(static_cast<std::size_t>(spec.frames), 1.0);
  for (int f = 0; f < spec.frames; ++f)
    scene.drift_gain[static_cast<std::size_t>(f)] =
        1.0 + spec.appearance.shading_drift * std::sin(0.9 * f + phase2);

  for (auto& waves : scene.texture_k) {
    const int count = 7;
    for (int i = 0; i < count; ++i) {
      const double wavelength = 0.035 + 0.08 * unit(rng);
      Vec3 dir(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
      if (dir.norm() < 1e-6) dir = Vec3::UnitX();
      dir = dir.normalized() * (2.0 * std::numbers::pi / wavelength);
      waves.insert(waves.end(), {dir.x(), dir.y(), dir.z(), 2.0 * std::numbers::pi * unit(rng),
                                 1.0 / count * (0.6 + 0.8 * unit(rng))});
    }
  }

  scene.base.topology = body.faces;
  scene.detailed.topology = body.faces;
  scene.base.frame_rate = scene.detailed.frame_rate = 30.0;
  std::vector<Vec3> relief(body.vertices.size());
  for (std::size_t v = 0; v < relief.size(); ++v) relief[v] = relief_displacement(scene, v);
  for (int f = 0; f < spec.frames; ++f) {
    std::vector<Vec3> base(body.vertices.size()), detailed(body.vertices.size());
    for (std::size_t v = 0; v < body.vertices.size(); ++v) {
      const auto g = generating_transform(scene, static_cast<std::size_t>(f), v);
      base[v] = g.apply(scene.rest[v]);
      detailed[v] = g.apply(scene.rest[v] + relief[v]);
    }
    scene.base.frames.push_back(std::move(base));
    scene.detailed.frames.push_back(std::move(detailed));
  }
  return scene;
}

inline SynthScene generate_scene(std::uint64_t seed, int frames, MotionKind kind,
                                 const BumpSpec& bump = {}) {
  SceneSpec spec;
  spec.seed = seed;
  spec.frames = frames;
  spec.kind = kind;
  spec.bump = bump;
  return generate_scene(spec);
}

struct RenderedFrame {
  Image image;
  DepthMap depth;  // ground-truth composed depth (detailed surface)
};

/// Area-weighted vertex normals.
inline std::vector<Vec3> vertex_normals(const TriMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
    const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
    const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
    const Vec3 fn = (b - a).cross(c - a);
    for (int v : f) n[static_cast<std::size_t>(v)] += fn;
  }
  for (auto& v : n)
    if (v.norm() > 0.0) v.normalize();
  return n;
}

/// Lambertian shading of a procedural albedo on an arbitrary camera-frame mesh; the light
/// direction is taken in the camera frame here.
/// `surface_coords` gives the per-vertex coordinates the texture is attached to.
inline Image shade_mesh(const TriMesh& mesh, const std::vector<Vec3>& surface_coords,
                        const Intrinsics& k, const AppearanceParams& appearance,
                        const std::array<std::vector<double>, 3>& texture, double gain = 1.0) {
  const int ss = std::max(1, appearance.supersample);
  const Intrinsics kk = k.scaled(ss);
  const auto render = rasterize(mesh, kk);
  const auto normals = vertex_normals(mesh);
  Image hi(kk.width, kk.height);
  const std::array<double, 3> tint{0.85, 0.65, 0.55};
  for (int y = 0; y < kk.height; ++y)
    for (int x = 0; x < kk.width; ++x) {
      const auto fi = render.face(x, y);
      if (fi < 0) {
        for (int c = 0; c < 3; ++c) hi(x, y, c) = appearance.background[static_cast<std::size_t>(c)];
        continue;
      }
      const auto& f = mesh.faces[static_cast<std::size_t>(fi)];
      const Vec3& a = mesh.vertices[static_cast<std::size_t>(f[0])];
      const Vec3& b = mesh.vertices[static_cast<std::size_t>(f[1])];
      const Vec3& c = mesh.vertices[static_cast<std::size_t>(f[2])];
      const Vec3 hit = pixel_ray(kk, pixel_center(x, y)) * render.depth(x, y);
      // Barycentrics of the hit point in the face plane.
      const Vec3 n = (b - a).cross(c - a);
      const double inv = 1.0 / n.squaredNorm();
      const double la = n.dot((c - b).cross(hit - b)) * inv;
      const double lb = n.dot((a - c).cross(hit - c)) * inv;
      const double lc = 1.0 - la - lb;
      Vec3 normal = la * normals[static_cast<std::size_t>(f[0])] +
                    lb * normals[static_cast<std::size_t>(f[1])] +
                    lc * normals[static_cast<std::size_t>(f[2])];
      if (normal.norm() == 0.0) normal = n;
      normal.normalize();
      if (normal.dot(hit) > 0.0) normal = -normal;
      const double lambert = std::max(0.0, normal.dot(appearance.light_direction));
      const double shading = appearance.ambient + (1.0 - appearance.ambient) * lambert;
      const Vec3 tex_point = la * surface_coords[static_cast<std::size_t>(f[0])] +
                             lb * surface_coords[static_cast<std::size_t>(f[1])] +
                             lc * surface_coords[static_cast<std::size_t>(f[2])];
      for (int ch = 0; ch < 3; ++ch) {
        double albedo = 1.0;
        if (appearance.textured)
          albedo = std::clamp(tint[static_cast<std::size_t>(ch)] *
                                  (1.0 + 0.8 * synth_detail::texture_value(
                                                   texture[static_cast<std::size_t>(ch)], tex_point)),
                              0.02, 1.0);
        hi(x, y, ch) = std::clamp(albedo * shading * gain, 0.0, 1.0);
      }
    }
  return downsample_average(hi, ss);
}

/// Image of the detailed surface and its exact depth, both at the scene intrinsics.
inline RenderedFrame render_appearance(const SynthScene& scene, std::size_t frame) {
  if (frame >= scene.detailed.size()) throw InputError("frame index out of range");
  const TriMesh mesh = scene.detailed.frame(frame);
  RenderedFrame out;
  // The light travels with the body so rigid motion keeps brightness constant.
  AppearanceParams appearance = scene.spec.appearance;
  appearance.light_direction = scene.poses[frame].rotation * appearance.light_direction;
  out.image = shade_mesh(mesh, scene.rest, scene.spec.intrinsics, appearance,
                         scene.texture_k, scene.drift_gain[frame]);
  out.depth = render_depth(mesh, scene.spec.intrinsics);
  return out;
}

}  // namespace nrdepth
