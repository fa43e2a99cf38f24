#include <gtest/gtest.h>

#include <random>

#include "nrdepth/mesh.hpp"
#include "oracles.hpp"

using namespace nrdepth;

namespace {

TriMesh tetrahedron() {
  return {{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
          {{0, 2, 1}, {0, 1, 3}, {1, 2, 3}, {0, 3, 2}}};
}

TriMesh lumpy(int n = 9) {
  return oracle::grid_mesh(n, n, 0.02, -0.08, -0.08, [](double x, double y) {
    return 2.0 + 0.05 * std::sin(17 * x) * std::cos(11 * y) + 0.3 * x * x;
  });
}

}  // namespace

TEST(TwoRing, TetrahedronContainsEverything) {
  const auto t = tetrahedron();
  const auto adj = build_two_ring(t.faces, 4);
  for (std::size_t v = 0; v < 4; ++v) EXPECT_EQ(adj.neighbors(v), (std::vector<int>{0, 1, 2, 3}));
}

TEST(TwoRing, GridCornerIsFrozen) {
  // 4x4 grid, diagonals a->d: corner 0 touches 1, 4, 5 and reaches 2, 6, 8, 9, 10 at distance 2.
  const auto g = oracle::grid_mesh(4, 4, 1.0, 0, 0, [](double, double) { return 0.0; });
  const auto adj = build_two_ring(g.faces, g.vertices.size());
  EXPECT_EQ(adj.neighbors(0), (std::vector<int>{0, 1, 2, 4, 5, 6, 8, 9, 10}));
}

TEST(TwoRing, MatchesBreadthFirstOracle) {
  const auto g = lumpy(7);
  const auto adj = build_two_ring(g.faces, g.vertices.size());
  ASSERT_EQ(adj.vertex_count(), g.vertices.size());
  for (std::size_t v = 0; v < g.vertices.size(); ++v)
    EXPECT_EQ(adj.neighbors(v), oracle::bfs_two_ring(g.faces, g.vertices.size(), static_cast<int>(v)));
}

TEST(TwoRing, IsolatedVertexHasOnlyItself) {
  const auto adj = build_two_ring({{0, 1, 2}}, 4);
  EXPECT_EQ(adj.neighbors(3), std::vector<int>{3});
}

TEST(Topology, RejectsBadFaces) {
  EXPECT_THROW(validate_topology({{0, 1, 5}}, 3), TopologyError);
  EXPECT_THROW(validate_topology({{0, 1, -1}}, 3), TopologyError);
  EXPECT_THROW(validate_topology({{0, 1, 1}}, 3), TopologyError);
  EXPECT_NO_THROW(validate_topology({{0, 1, 2}}, 3));
}

TEST(Topology, SequenceVertexCountMismatch) {
  TriMeshSequence s;
  s.topology = {{0, 1, 2}};
  s.frames = {{Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()}, {Vec3::Zero(), Vec3::UnitX()}};
  EXPECT_THROW(s.validate(), TopologyError);
}

TEST(RigidTransform, InverseAndCompose) {
  std::mt19937_64 rng(3);
  const RigidTransform a{oracle::random_rotation(rng), Vec3(0.1, -2, 3)};
  const RigidTransform b{oracle::random_rotation(rng), Vec3(1, 0.5, -0.2)};
  const Vec3 p(0.3, 0.4, 0.5);
  EXPECT_LT((a.compose(b).apply(p) - a.apply(b.apply(p))).norm(), 1e-12);
  EXPECT_LT((a.inverse().apply(a.apply(p)) - p).norm(), 1e-12);
}

TEST(Kabsch, RecoversRandomRigidMotion) {
  std::mt19937_64 rng(11);
  const auto target = lumpy();
  const auto adj = build_two_ring(target.faces, target.vertices.size());
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform g{oracle::random_rotation(rng), Vec3(0.3, -0.1, 0.2) * (trial % 5)};
    const auto reference = oracle::transformed(target, g);
    const std::size_t v = static_cast<std::size_t>(trial * 7) % target.vertices.size();
    const auto est = per_vertex_transform(target, reference, adj, v);
    EXPECT_LT(rotation_angle_between(est.rotation, g.rotation), 1e-9);
    EXPECT_LT((est.translation - g.translation).norm(), 1e-9);
    // t = v_ref - R v_target
    EXPECT_LT((est.apply(target.vertices[v]) - reference.vertices[v]).norm(), 1e-12);
  }
}

TEST(Kabsch, NeverReturnsAReflection) {
  std::vector<Vec3> src{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, -1, -1}};
  std::vector<Vec3> dst = src;
  for (auto& p : dst) p.z() = -p.z();  // mirror image
  Mat3 r;
  ASSERT_TRUE(kabsch_rotation(src, dst, r));
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
  EXPECT_LT((r * r.transpose() - Mat3::Identity()).norm(), 1e-12);
}

TEST(Kabsch, PlanarNeighborhoodIsAccepted) {
  const auto flat = oracle::grid_mesh(5, 5, 0.1, 0, 0, [](double, double) { return 1.0; });
  const auto adj = build_two_ring(flat.faces, flat.vertices.size());
  const RigidTransform g{Eigen::AngleAxisd(0.4, Vec3(1, 2, 3).normalized()).toRotationMatrix(), Vec3(0.1, 0.2, 0.3)};
  const auto est = per_vertex_transform(flat, oracle::transformed(flat, g), adj, 12);
  EXPECT_LT(rotation_angle_between(est.rotation, g.rotation), 1e-9);
}

TEST(Kabsch, CollinearNeighborhoodIsDegenerate) {
  TriMesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(5, 5, 5)}, {{0, 1, 2}}};
  const auto adj = build_two_ring(m.faces, 4);
  try {
    per_vertex_transform(m, m, adj, 1);
    FAIL() << "expected DegenerateGeometryError";
  } catch (const DegenerateGeometryError& e) {
    EXPECT_EQ(e.vertex(), 1u);
  }
  const auto all = all_vertex_transforms(m, m, adj);
  EXPECT_EQ(all.degenerate, (std::vector<std::uint8_t>{1, 1, 1, 1}));
  EXPECT_EQ(all.transforms[3].rotation, Mat3::Identity());
}

TEST(Kabsch, VertexCountMismatchThrows) {
  const auto a = lumpy(4);
  auto b = a;
  b.vertices.pop_back();
  const auto adj = build_two_ring(a.faces, a.vertices.size());
  EXPECT_THROW(all_vertex_transforms(a, b, adj), TopologyError);
}

TEST(Kabsch, IdentityForStaticMesh) {
  const auto m = lumpy(5);
  const auto adj = build_two_ring(m.faces, m.vertices.size());
  const auto all = all_vertex_transforms(m, m, adj);
  EXPECT_EQ(all.degenerate_count(), 0u);
  for (const auto& t : all.transforms) {
    EXPECT_LT((t.rotation - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LT(t.translation.norm(), 1e-12);
  }
}

TEST(Average, EqualInputsReturnedExactly) {
  std::mt19937_64 rng(5);
  const RigidTransform t{oracle::random_rotation(rng), Vec3(0.1, 0.2, 0.3)};
  const std::vector<RigidTransform> three{t, t, t};
  const auto avg = average_transform(three);
  EXPECT_EQ(avg.rotation, t.rotation);
  EXPECT_EQ(avg.translation, t.translation);
}

TEST(Average, SymmetricRotationsAverageToIdentity) {
  const Vec3 axis = Vec3(0, 1, 1).normalized();
  const std::vector<RigidTransform> ts{
      {Eigen::AngleAxisd(0.3, axis).toRotationMatrix(), Vec3(1, 0, 0)},
      {Eigen::AngleAxisd(-0.3, axis).toRotationMatrix(), Vec3(-1, 2, 0)}};
  const auto avg = average_transform(ts);
  EXPECT_LT((avg.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT((avg.translation - Vec3(0, 1, 0)).norm(), 1e-15);
}

TEST(Average, QuaternionSignIsAligned) {
  // Two rotations near pi about the same axis have opposite-sign quaternions.
  const Vec3 axis = Vec3::UnitZ();
  const std::vector<Mat3> rs{Eigen::AngleAxisd(M_PI - 0.01, axis).toRotationMatrix(),
                             Eigen::AngleAxisd(-(M_PI - 0.01), axis).toRotationMatrix()};
  const Mat3 avg = average_rotation(rs);
  EXPECT_LT(rotation_angle_between(avg, Eigen::AngleAxisd(M_PI, axis).toRotationMatrix()), 1e-9);
}

TEST(RotationAngle, AccurateForTinyAngles) {
  const Mat3 r = Eigen::AngleAxisd(3e-9, Vec3::UnitX()).toRotationMatrix();
  EXPECT_NEAR(rotation_angle_between(Mat3::Identity(), r), 3e-9, 1e-15);
  const Mat3 s = Eigen::AngleAxisd(1.25, Vec3::UnitY()).toRotationMatrix();
  EXPECT_NEAR(rotation_angle_between(Mat3::Identity(), s), 1.25, 1e-12);
}
