#include "common.hpp"

using namespace paralab;
using namespace paralab::test;

namespace {

/// Direct ball-counting fit of log V(x,r) against log r on a fixed window.
double counted_dimension(const MetricMeasureSpace& s, double r0, double r1, Index centre) {
  std::vector<double> x, y;
  for (int k = 0; k < 8; ++k) {
    const double r = r0 * std::pow(r1 / r0, k / 7.0);
    double v = 0;
    for (Index j = 0; j < s.size(); ++j)
      if (s.dist(centre, j) < r) v += s.mu(j);
    x.push_back(std::log(r));
    y.push_back(std::log(v));
  }
  return fit_line(x, y).slope;
}

}  // namespace

TEST(GridSpace, TwoPoints) {
  auto s = build_grid_space({2}, 1.0, false);
  EXPECT_EQ(s->size(), 2);
  EXPECT_DOUBLE_EQ(s->dist(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(s->mu(0), 1.0);
  EXPECT_DOUBLE_EQ(s->mu(1), 1.0);
}

TEST(GridSpace, LineMetric) {
  auto s = build_grid_space({3}, 1.0, false);
  EXPECT_DOUBLE_EQ(s->dist(0, 2), 2.0);
}

TEST(GridSpace, SquareCounting) {
  auto s = build_grid_space({32, 32}, 1.0, false);
  EXPECT_EQ(s->size(), 1024);
  EXPECT_DOUBLE_EQ(s->total_measure(), 1024.0);
}

TEST(GridSpace, MeasureScalesWithMesh) {
  auto s = build_grid_space({4, 4}, 0.5, false);
  EXPECT_DOUBLE_EQ(s->mu(3), 0.25);
  EXPECT_DOUBLE_EQ(s->dist(0, 15), std::sqrt(2.0) * 1.5);
}

TEST(GridSpace, TorusWrapsAround) {
  auto s = build_grid_space({8}, 1.0, true);
  EXPECT_DOUBLE_EQ(s->dist(0, 7), 1.0);
  EXPECT_DOUBLE_EQ(s->dist(1, 6), 3.0);
}

TEST(GridSpace, CapExceeded) {
  try {
    build_grid_space({100, 100}, 1.0, false);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::size);
  }
}

TEST(GraphSpace, Triangle) {
  auto s = build_graph_space({{0, 1, 1}, {1, 2, 1}, {0, 2, 1}}, RVec::Ones(3));
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s->dist(i, j), i == j ? 0.0 : 1.0);
}

TEST(GraphSpace, Path) { EXPECT_DOUBLE_EQ(path_space(3)->dist(0, 2), 2.0); }

TEST(GraphSpace, Star) {
  auto s = build_graph_space({{0, 1, 1}, {0, 2, 1}, {0, 3, 1}, {0, 4, 1}}, RVec::Ones(5));
  for (Index a = 1; a < 5; ++a)
    for (Index b = 1; b < 5; ++b)
      if (a != b) {
        EXPECT_DOUBLE_EQ(s->dist(a, b), 2.0);
      }
}

TEST(GraphSpace, EdgeLengthFromWeight) {
  auto s = build_graph_space({{0, 1, 4.0}}, RVec::Ones(2));
  EXPECT_DOUBLE_EQ(s->dist(0, 1), 0.5);
}

TEST(GraphSpace, Disconnected) {
  try {
    build_graph_space({{0, 1, 1}, {2, 3, 1}}, RVec::Ones(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::connectivity);
  }
}

TEST(GraphSpace, RejectsNonPositiveMeasure) {
  RVec mu = RVec::Ones(2);
  mu(1) = 0;
  EXPECT_THROW(build_graph_space({{0, 1, 1}}, mu), Error);
}

TEST(GraphSpace, MetricAxiomsOnRandomGraph) {
  const auto edges = random_connected_edges(60, 40, 3);
  auto s = build_graph_space(edges, RVec::Ones(60));
  EXPECT_LE(metric_axiom_violation(*s), 1e-12);
}

TEST(Balls, TwoPoint) {
  auto s = build_grid_space({2}, 1.0, false);
  EXPECT_EQ(ball(*s, 0, 0.5), (IndexSet{0}));
  EXPECT_EQ(annulus(*s, 0, 0.5, 1), (IndexSet{1}));
  EXPECT_EQ(annulus(*s, 0, 0.5, 0), (IndexSet{0}));
}

TEST(Balls, OpenBallOnLine) {
  auto s = grid1d(5);
  EXPECT_EQ(ball(*s, 2, 1.5), (IndexSet{1, 2, 3}));
  EXPECT_EQ(ball(*s, 2, 1.0), (IndexSet{2}));
}

TEST(Balls, AnnuliPartitionTheSpace) {
  auto s = grid1d(40);
  std::vector<int> hits(40, 0);
  for (int j = 0; j < 8; ++j)
    for (Index y : annulus(*s, 5, 1.0, j)) ++hits[std::size_t(y)];
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Balls, RejectsBadRadius) {
  auto s = grid1d(5);
  EXPECT_THROW(ball(*s, 0, 0.0), Error);
  EXPECT_THROW(annulus(*s, 0, 1.0, -1), Error);
}

TEST(Balls, VolumeMatchesBallMeasure) {
  auto s = build_grid_space({6, 6}, 0.5, false);
  for (double r : {0.3, 0.8, 1.7}) {
    double v = 0;
    for (Index y : ball(*s, 14, r)) v += s->mu(y);
    EXPECT_DOUBLE_EQ(s->volume(14, r), v);
  }
}

TEST(Norms, Examples) {
  EXPECT_NEAR(lp_norm(RVec::Ones(2), cfield({1, 1}), 2.0), std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(lp_norm(RVec::Ones(2), cfield({3, 4}), kInfinity), 4.0);
  EXPECT_DOUBLE_EQ(lp_norm(*path_space(3), cfield({1, 0, 0}), 1.0), 1.0);
}

TEST(Norms, RejectsSmallExponent) { EXPECT_THROW(lp_norm(RVec::Ones(2), cfield({1, 1}), 0.5), Error); }

TEST(Norms, LargeExponentDoesNotOverflow) {
  const double v = lp_norm(RVec::Ones(2), cfield({1e200, 1e200}), 8.0);
  EXPECT_NEAR(v / 1e200, std::pow(2.0, 1.0 / 8), 1e-12);
}

TEST(Norms, MonotoneInExponentForProbabilityMeasure) {
  const RVec mu = RVec::Constant(32, 1.0 / 32);
  const Field f = random_complex_field(32, 5);
  double prev = 0;
  for (double p : {1.0, 1.5, 2.0, 4.0, 8.0, kInfinity}) {
    const double v = lp_norm(mu, f, p);
    EXPECT_GE(v, prev * (1 - 1e-14));
    prev = v;
  }
}

TEST(Norms, BallAverage) {
  auto s = grid1d(5);
  const Field f = cfield({1, 2, 3, 4, 5});
  EXPECT_NEAR(std::abs(ball_average(*s, f, ball(*s, 2, 1.5)) - Complex(3.0)), 0, 1e-15);
  EXPECT_THROW(ball_average(*s, f, {}), Error);
}

TEST(Doubling, OneDimensionalGrid) {
  auto s = grid1d(256);
  const auto d = doubling_profile(*s);
  EXPECT_GE(d.nu_fit, 0.9);
  EXPECT_LE(d.nu_fit, 1.1);
  EXPECT_NEAR(d.nu_fit, counted_dimension(*s, 2.0, 32.0, 128), 0.15);
}

TEST(Doubling, TwoDimensionalGrid) {
  auto s = build_grid_space({32, 32}, 1.0, false);
  const auto d = doubling_profile(*s);
  EXPECT_GE(d.nu_fit, 1.8);
  EXPECT_LE(d.nu_fit, 2.2);
  EXPECT_NEAR(d.nu_fit, counted_dimension(*s, 2.0, 8.0, 16 + 32 * 16), 0.3);
}

TEST(Doubling, TwoPointConstant) {
  auto s = build_grid_space({2}, 1.0, false);
  const auto d = doubling_profile(*s, {1.0});
  double worst = 0;
  for (Index x = 0; x < 2; ++x)
    for (double r : {0.5, 1.0, 1.5, 2.0}) worst = std::max(worst, s->volume(x, 2 * r) / s->volume(x, r));
  EXPECT_LE(d.c_doubling, 2.0);
  EXPECT_LE(worst, 2.0);
}

TEST(Doubling, EmptyWindow) { EXPECT_THROW(doubling_profile(*grid1d(8), {}), Error); }

TEST(Doubling, ProfileBoundsVolumeRatios) {
  auto s = grid1d(64);
  const auto d = doubling_profile(*s, {2.0, 4.0, 8.0});
  for (Index x : {0, 20, 63})
    for (double r : {2.0, 4.0, 8.0}) EXPECT_LE(s->volume(x, 2 * r), d.c_doubling * s->volume(x, r) * (1 + 1e-12));
}
