#include <gtest/gtest.h>

#include <random>

#include "mvo/tracklet.hpp"
#include "test_utils.hpp"

using namespace mvo;

namespace {

Tracklet from_points(int id, const std::vector<Vec3>& points,
                     const StereoCalib& calib, int first_frame = 0) {
  Tracklet t;
  t.id = id;
  for (std::size_t i = 0; i < points.size(); ++i) {
    TrackletObs obs;
    obs.frame = first_frame + static_cast<int>(i);
    obs.point = points[i];
    obs.pixel = project(points[i], calib);
    t.observations.push_back(obs);
  }
  return t;
}

}  // namespace

TEST(Tracklet, EdgeCostZeroForStaticPoints) {
  StereoCalib calib = mvo::testing::default_calib();
  Tracklet a = from_points(0, {{0, 0, 2}, {0, 0, 2}, {0, 0, 2}}, calib);
  Tracklet b = from_points(1, {{1, 0, 3}, {1, 0, 3}, {1, 0, 3}}, calib);
  auto cost = edge_cost(a, b);
  ASSERT_TRUE(cost.has_value());
  EXPECT_NEAR(*cost, 0.0, 1e-18);
}

TEST(Tracklet, EdgeCostZeroUnderSharedRigidMotion) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(3);
  Vec3 pa = Vec3(0.2, -0.1, 2.5);
  Vec3 pb = Vec3(-0.4, 0.3, 3.0);
  std::vector<Vec3> ta, tb;
  Pose motion;
  for (int k = 0; k < 6; ++k) {
    ta.push_back(motion * pa);
    tb.push_back(motion * pb);
    motion = exp_map(mvo::testing::random_twist(rng, 0.1)) * motion;
  }
  auto cost = edge_cost(from_points(0, ta, calib), from_points(1, tb, calib));
  ASSERT_TRUE(cost.has_value());
  EXPECT_LT(*cost, 1e-18);
}

TEST(Tracklet, EdgeCostIsPopulationVariance) {
  // Distances 1, 2, 3 -> mean 2, variance 2/3.
  StereoCalib calib = mvo::testing::default_calib();
  Tracklet a = from_points(0, {{0, 0, 2}, {0, 0, 2}, {0, 0, 2}}, calib);
  Tracklet b = from_points(1, {{1, 0, 2}, {2, 0, 2}, {3, 0, 2}}, calib);
  auto cost = edge_cost(a, b);
  ASSERT_TRUE(cost.has_value());
  EXPECT_NEAR(*cost, 2.0 / 3.0, 1e-12);
}

TEST(Tracklet, EdgeCostSymmetry) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<Vec3> pa, pb;
    for (int k = 0; k < 5; ++k) {
      pa.push_back(mvo::testing::random_vec3(rng) + Vec3(0, 0, 3));
      pb.push_back(mvo::testing::random_vec3(rng) + Vec3(0, 0, 3));
    }
    Tracklet a = from_points(0, pa, calib);
    Tracklet b = from_points(1, pb, calib);
    EXPECT_EQ(*edge_cost(a, b), *edge_cost(b, a));
  }
}

TEST(Tracklet, EdgeCostRigidMotionInvariance) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(7);
  std::vector<Vec3> pa, pb;
  for (int k = 0; k < 6; ++k) {
    pa.push_back(mvo::testing::random_vec3(rng, 0.5) + Vec3(0.3, 0, 3));
    pb.push_back(mvo::testing::random_vec3(rng, 0.5) + Vec3(-0.3, 0, 3));
  }
  double before =
      *edge_cost(from_points(0, pa, calib), from_points(1, pb, calib));
  Pose global = exp_map(mvo::testing::random_twist(rng, 0.5));
  std::vector<Vec3> qa, qb;
  for (int k = 0; k < 6; ++k) {
    qa.push_back(global * pa[k]);
    qb.push_back(global * pb[k]);
  }
  double after =
      *edge_cost(from_points(0, qa, calib), from_points(1, qb, calib));
  EXPECT_NEAR(before, after, 1e-9);
}

TEST(Tracklet, EdgeCostNeedsOverlap) {
  StereoCalib calib = mvo::testing::default_calib();
  Tracklet a = from_points(0, {{0, 0, 2}, {0, 0, 2}}, calib, 0);
  Tracklet b = from_points(1, {{1, 0, 2}, {1, 0, 2}}, calib, 5);
  EXPECT_FALSE(edge_cost(a, b).has_value());
  Tracklet c = from_points(2, {{1, 0, 2}, {1, 0, 2}}, calib, 1);
  EXPECT_FALSE(edge_cost(a, c, 3).has_value());  // only 1 shared frame
}

TEST(Tracklet, GraphSeparatesRigidClusters) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(11);
  std::vector<Tracklet> tracklets;
  // Cluster A static, cluster B translating; within-cluster variance is zero.
  for (int i = 0; i < 5; ++i) {
    Vec3 base = mvo::testing::random_vec3(rng, 0.3) + Vec3(-1.0, 0, 3);
    std::vector<Vec3> pts(6, base);
    tracklets.push_back(from_points(i, pts, calib));
  }
  for (int i = 0; i < 5; ++i) {
    Vec3 base = mvo::testing::random_vec3(rng, 0.3) + Vec3(1.0, 0, 3);
    std::vector<Vec3> pts;
    for (int k = 0; k < 6; ++k) pts.push_back(base + Vec3(0.1 * k, 0, 0));
    tracklets.push_back(from_points(10 + i, pts, calib));
  }
  TrackletStore store(std::move(tracklets));
  RigidityGraph graph = build_graph(store, 1);
  for (const auto& e : graph.edges()) {
    bool a_in_first = e.a < 10;
    bool b_in_first = e.b < 10;
    EXPECT_EQ(a_in_first, b_in_first) << "cross-cluster edge " << e.a << "-"
                                      << e.b;
  }
}

TEST(Tracklet, GraphSaturatesToCompleteGraph) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(13);
  std::vector<Tracklet> tracklets;
  for (int i = 0; i < 6; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 5; ++k) {
      pts.push_back(mvo::testing::random_vec3(rng, 0.5) + Vec3(0, 0, 3));
    }
    tracklets.push_back(from_points(i, pts, calib));
  }
  TrackletStore store(std::move(tracklets));
  RigidityGraph graph = build_graph(store, 10);
  EXPECT_EQ(graph.edges().size(), 15u);  // 6 choose 2
}

TEST(Tracklet, GraphRespectsNeighborBudget) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(17);
  std::vector<Tracklet> tracklets;
  for (int i = 0; i < 12; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 5; ++k) {
      pts.push_back(mvo::testing::random_vec3(rng, 0.5) + Vec3(0, 0, 3));
    }
    tracklets.push_back(from_points(i, pts, calib));
  }
  TrackletStore store(std::move(tracklets));
  RigidityGraph graph = build_graph(store, 4);
  // Union of per-vertex selections: every vertex contributed at most 4.
  EXPECT_LE(graph.edges().size(), 12u * 4u);
  EXPECT_GE(graph.edges().size(), 12u * 4u / 2u);
}

TEST(Tracklet, WindowClipsObservations) {
  StereoCalib calib = mvo::testing::default_calib();
  std::vector<Vec3> pts(10, Vec3(0, 0, 2));
  TrackletStore store({from_points(0, pts, calib)});
  TrackletStore clipped = store.window(3, 6);
  ASSERT_EQ(clipped.size(), 1u);
  EXPECT_EQ(clipped.tracklets()[0].first_frame(), 3);
  EXPECT_EQ(clipped.tracklets()[0].last_frame(), 6);
}

TEST(Tracklet, CsvRoundTripBothColumnModes) {
  StereoCalib calib = mvo::testing::default_calib();
  std::mt19937_64 rng(19);
  std::vector<Tracklet> tracklets;
  for (int i = 0; i < 4; ++i) {
    std::vector<Vec3> pts;
    for (int k = 0; k < 5; ++k) {
      pts.push_back(mvo::testing::random_vec3(rng, 0.8) + Vec3(0, 0, 4));
    }
    tracklets.push_back(from_points(i, pts, calib));
  }
  TrackletStore store(std::move(tracklets));

  for (auto mode : {TrackletColumns::kPixel, TrackletColumns::kXyz}) {
    std::string path = ::testing::TempDir() + "tracklets.csv";
    write_tracklets_csv(store, path, mode);
    TrackletStore loaded = read_tracklets_csv(path, calib, mode);
    ASSERT_EQ(loaded.size(), store.size());
    for (const auto& t : store.tracklets()) {
      const Tracklet* l = loaded.by_id(t.id);
      ASSERT_NE(l, nullptr);
      ASSERT_EQ(l->observations.size(), t.observations.size());
      for (std::size_t k = 0; k < t.observations.size(); ++k) {
        EXPECT_LT((l->observations[k].point - t.observations[k].point).norm(),
                  1e-9);
      }
    }
  }
}

TEST(Tracklet, RejectsUnorderedFrames) {
  Tracklet t;
  t.id = 0;
  t.observations.push_back({2, {}, Vec3(0, 0, 2)});
  t.observations.push_back({1, {}, Vec3(0, 0, 2)});
  EXPECT_THROW(TrackletStore({t}), IoError);
}
