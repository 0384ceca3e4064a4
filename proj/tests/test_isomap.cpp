#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "jointfold/isomap.hpp"
#include "oracles.hpp"

using namespace jointfold;

namespace {

oracle::Mat dense_weights(const NeighborhoodGraph& g) {
  const auto n = g.num_vertices();
  oracle::Mat w = oracle::Mat::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Index i = 0; i < n; ++i)
    for (const auto& e : g.adjacency[static_cast<std::size_t>(i)]) w(i, e.to) = std::min(w(i, e.to), e.weight);
  return w;
}

double circle_arc(Index i, Index j, Index s) {
  const Index m = std::abs(i - j);
  return 2.0 * std::numbers::pi * static_cast<double>(std::min(m, s - m)) / static_cast<double>(s);
}

}  // namespace

TEST(Graph, KnnUnionSymmetrization) {
  RowMatrix p(3, 1);
  p << 0.0, 1.0, 3.0;
  const auto g = build_graph(p, GraphRule::knn(1));
  EXPECT_EQ(g.edges(), (std::vector<IndexPair>{{0, 1}, {1, 2}}));
  EXPECT_TRUE(g.connected());
  EXPECT_EQ(g.adjacency[1][1].weight, 2.0);
}

TEST(Graph, KnnTiesPreferLowerIndex) {
  RowMatrix p(3, 1);
  p << 0.0, -1.0, 1.0;
  const auto g = build_graph(p, GraphRule::knn(1));
  // vertex 0 is equidistant from 1 and 2 and picks 1; 2 picks 0
  EXPECT_EQ(g.edges(), (std::vector<IndexPair>{{0, 1}, {0, 2}}));
}

TEST(Graph, EpsilonRuleAndComponents) {
  RowMatrix p(5, 1);
  p << 0.0, 1.0, 3.0, 3.5, 4.0;
  const auto g = build_graph(p, GraphRule::epsilon(1.5));
  EXPECT_EQ(g.num_components, 2);
  EXPECT_FALSE(g.connected());
  EXPECT_EQ(g.largest_component(), (std::vector<Index>{2, 3, 4}));
  const auto gm = geodesic_matrix(g);
  EXPECT_TRUE(gm.restricted);
  EXPECT_EQ(gm.vertices, (std::vector<Index>{2, 3, 4}));
  EXPECT_EQ(gm.distances(0, 2), 1.0);
}

TEST(Graph, RejectsBadEdges) {
  EXPECT_THROW(graph_from_edges(2, {{{0, 0}, 1.0}}), InputError);
  EXPECT_THROW(graph_from_edges(2, {{{0, 1}, 0.0}}), InputError);
  EXPECT_THROW(graph_from_edges(2, {{{0, 2}, 1.0}}), InputError);
}

TEST(Geodesic, PathGraph) {
  const auto g = graph_from_edges(3, {{{0, 1}, 1.0}, {{1, 2}, 2.0}});
  const auto d = dijkstra(g, 0);
  EXPECT_EQ(d[2], 3.0);
  const auto gm = geodesic_matrix(g);
  EXPECT_EQ(gm.distances(2, 0), 3.0);
  EXPECT_FALSE(gm.restricted);
}

TEST(Geodesic, IntegerGraphsMatchOracleExactly) {
  CounterRng rng(derive_seed(21, "test/graphs"));
  for (int c = 0; c < 30; ++c) {
    const Index n = 5 + c;
    std::vector<std::pair<IndexPair, double>> edges;
    for (Index i = 1; i < n; ++i) edges.push_back({{static_cast<Index>(rng() % static_cast<std::uint64_t>(i)), i}, 1.0 + static_cast<double>(rng() % 9)});
    for (Index e = 0; e < n; ++e) {
      const auto i = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
      const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
      if (i != j) edges.push_back({{i, j}, 1.0 + static_cast<double>(rng() % 9)});
    }
    const auto g = graph_from_edges(n, edges);
    const auto o = oracle::shortest_paths(dense_weights(g));
    const auto gm = geodesic_matrix(g, c % 3);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) ASSERT_EQ(gm.distances(i, j), o(i, j)) << c << ":" << i << "," << j;
  }
}

TEST(Geodesic, EuclideanGraphsMatchOracle) {
  CounterRng rng(derive_seed(22, "test/graphs"));
  std::normal_distribution<double> normal;
  for (int c = 0; c < 10; ++c) {
    RowMatrix p(40, 3);
    for (Index i = 0; i < p.rows(); ++i)
      for (Index k = 0; k < 3; ++k) p(i, k) = normal(rng);
    const auto g = build_graph(p, GraphRule::knn(5));
    const auto o = oracle::shortest_paths(dense_weights(g));
    const auto gm = geodesic_matrix(g);
    for (Index a = 0; a < static_cast<Index>(gm.vertices.size()); ++a)
      for (Index b = 0; b < static_cast<Index>(gm.vertices.size()); ++b) {
        const double want = o(gm.vertices[static_cast<std::size_t>(a)], gm.vertices[static_cast<std::size_t>(b)]);
        ASSERT_NEAR(gm.distances(a, b), want, 1e-12 * want);
      }
  }
}

TEST(Geodesic, CircleGraphApproximatesArcLength) {
  const Index s = 200;
  const PointCloud cloud = sample(make_circle(1.0), SamplingStrategy::grid(), s);
  const auto gm = geodesic_matrix(build_graph(cloud, GraphRule::knn(6)));
  ASSERT_FALSE(gm.restricted);
  for (Index i = 0; i < s; ++i)
    for (Index j = i + 1; j < s; ++j) {
      const double arc = circle_arc(i, j, s);
      EXPECT_LE(gm.distances(i, j), arc * (1.0 + 1e-12));
      EXPECT_GE(gm.distances(i, j), 0.99 * arc);
    }
}

TEST(Mds, TwoPoints) {
  DistanceMatrix d(2, 2);
  d << 0.0, 4.0, 4.0, 0.0;
  const auto e = classical_mds(d, 1);
  EXPECT_NEAR(e.coords(0, 0), 2.0, 1e-12);
  EXPECT_NEAR(e.coords(1, 0), -2.0, 1e-12);
  EXPECT_FALSE(e.truncated);
  EXPECT_NEAR(e.residual_variance, 0.0, 1e-12);
}

TEST(Mds, RecoversFlatConfiguration) {
  CounterRng rng(derive_seed(23, "test/mds"));
  std::normal_distribution<double> normal;
  RowMatrix p(30, 2);
  for (Index i = 0; i < 30; ++i) p.row(i) << normal(rng), 3.0 * normal(rng);
  const auto e = classical_mds(pairwise_distances(p), 2);
  const auto back = pairwise_distances(e.coords);
  const auto orig = pairwise_distances(p);
  EXPECT_LE((back - orig).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LE(std::abs(e.spectrum(2)), 1e-9 * e.spectrum(0));
  EXPECT_GE(e.spectrum(0), e.spectrum(1));
  EXPECT_NEAR(e.residual_variance, 0.0, 1e-12);
}

TEST(Mds, TruncatesWhenSpectrumRunsOut) {
  DistanceMatrix d(3, 3);
  d << 0, 1, 2, 1, 0, 1, 2, 1, 0;  // collinear
  const auto e = classical_mds(d, 2);
  EXPECT_TRUE(e.truncated);
  EXPECT_EQ(e.coords.cols(), 1);
  EXPECT_THROW(classical_mds(d, 4), InputError);
  EXPECT_THROW(classical_mds(d, 0), InputError);
}

TEST(Mds, CircleArcSpectrumMatchesDft) {
  const int s = 64;
  DistanceMatrix d(s, s);
  for (Index i = 0; i < s; ++i)
    for (Index j = 0; j < s; ++j) d(i, j) = circle_arc(i, j, s);
  const auto e = classical_mds(d, 2);
  auto want = oracle::circle_arc_mds_spectrum(s);
  std::sort(want.begin(), want.end(), std::greater<>());
  for (int k = 0; k < s; ++k) EXPECT_NEAR(e.spectrum(k), want[static_cast<std::size_t>(k)], 1e-9 * want[0]);
}

TEST(ResidualVariance, Values) {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{-1, -2, -3, -4}, flat{5, 5, 5, 5};
  EXPECT_NEAR(residual_variance(a, b), 0.0, 1e-15);
  EXPECT_NEAR(residual_variance(a, c), 0.0, 1e-15);
  EXPECT_EQ(residual_variance(a, flat), 1.0);
  EXPECT_EQ(residual_variance(flat, flat), 0.0);
  EXPECT_NEAR(residual_variance({1, 2, 3}, {1, 3, 2}), 0.75, 1e-15);
  EXPECT_THROW(residual_variance({1}, {1}), InputError);
}

TEST(Rho, FlatManifoldIsOne) {
  const auto line = make_line(0.0, 3.0, Eigen::Vector3d(1.0, 2.0, -2.0));
  const PointCloud cloud = sample(line, SamplingStrategy::grid(), 50);
  const auto g = build_graph(cloud, GraphRule::knn(4));
  const auto q = estimate_rho(cloud, g, parameter_geodesic_oracle(line, cloud.params, 10));
  EXPECT_NEAR(q.rho, 1.0, 1e-12);
  EXPECT_EQ(q.edges, g.num_edges());
}

TEST(Rho, CircleEdgesGiveChordRatio) {
  const Index s = 100;
  const PointCloud cloud = sample(make_circle(1.0), SamplingStrategy::grid(), s);
  const auto g = build_graph(cloud, GraphRule::knn(4));
  const auto q = estimate_rho(cloud, g, [s](Index i, Index j) { return circle_arc(i, j, s); });
  EXPECT_NEAR(q.rho, oracle::circle_chord_ratio(4.0 * std::numbers::pi / s), 1e-12);
}

TEST(Rho, JointSandwichOnHelix) {
  const Index s = 400;
  const JointCloud jc = sample_joint(make_helix_pair(), SamplingStrategy::grid(), s);
  const PointCloud star = concat(jc);
  const auto g = build_graph(star, GraphRule::knn(6));
  const auto dtheta = [&](Index i, Index j) { return std::abs(jc.components[0].params(i, 0) - jc.components[0].params(j, 0)); };
  const std::vector<GeodesicOracle> comps{dtheta, dtheta};
  const auto r = check_joint_rho(jc, g, comps, [&](Index i, Index j) { return std::sqrt(2.0) * dtheta(i, j); });
  EXPECT_EQ(r.violations, 0);
  EXPECT_EQ(r.component_rho[0], 1.0);
  EXPECT_LT(r.component_rho[1], 1.0);
  // isometric components make the lower bound an equality on uniform edges
  EXPECT_GE(r.joint_rho, r.lower_bound * (1.0 - 1e-12));
  EXPECT_THROW(check_joint_rho(jc, g, {dtheta}, dtheta), InputError);
}

TEST(Concentration, NoiselessCoverageIsOne) {
  const JointManifoldSpec spec{{make_circle(), make_circle(), make_circle()}};
  NoiseModel nm{0.0, 0.1, 0, NormConvention::MeanSquaredNorm};
  const auto r = jml_concentration(spec, nm, Vector::Constant(1, 0.3), Vector::Constant(1, 1.1), 1000, 1e-9);
  EXPECT_EQ(r.failures, 0);
  EXPECT_EQ(r.coverage, 1.0);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.mean_squared_distance, r.expected_squared_distance, 1e-12);
}

TEST(Concentration, NoisyMeanAndMonotoneFailures) {
  NoiseModel nm{0.2, 0.09, 4, NormConvention::MeanSquaredNorm};
  const Vector t1 = Vector::Constant(1, 0.3), t2 = Vector::Constant(1, 1.1);
  double previous = 1.0;
  for (const Index j_count : {1, 2, 4}) {
    JointManifoldSpec spec;
    for (Index j = 0; j < j_count; ++j) spec.components.push_back(make_circle());
    const auto r = jml_concentration(spec, nm, t1, t2, 20000, 0.2, 2);
    EXPECT_NEAR(r.mean_squared_distance, r.expected_squared_distance, 5.0 * r.bias_standard_error);
    EXPECT_LE(r.failure_rate(), previous);
    previous = r.failure_rate();
    const auto again = jml_concentration(spec, nm, t1, t2, 20000, 0.2, 1);
    EXPECT_EQ(again.failures, r.failures);
  }
}

TEST(Concentration, BoundHoldsInHighAmbientDimension) {
  // the cross term n.(p - q) concentrates once N is large
  Vector dir = Vector::Zero(64);
  dir(0) = 1.0;
  const NoiseModel nm{0.1, 0.04, 7, NormConvention::MeanSquaredNorm};
  for (const Index j_count : {1, 2, 4, 8}) {
    const auto r = jml_concentration(make_copies(make_line(0.0, 1.0, dir), j_count), nm, Vector::Constant(1, 0.0),
                                     Vector::Constant(1, 1.0), 20000, 0.2);
    EXPECT_TRUE(r.holds) << "J=" << j_count << " coverage " << r.coverage << " bound " << r.bound;
  }
}

TEST(Concentration, InputValidation) {
  const JointManifoldSpec spec{{make_circle(), make_circle()}};
  NoiseModel nm{0.1, 0.09, 0, NormConvention::MeanSquaredNorm};
  const Vector t1 = Vector::Constant(1, 0.3), t2 = Vector::Constant(1, 1.1);
  EXPECT_THROW(jml_concentration(spec, nm, t1, t2, 999, 0.1), ConfigError);
  EXPECT_THROW(jml_concentration(spec, nm, t1, t1, 1000, 0.1), InputError);
  NoiseModel mean_norm = nm;
  mean_norm.convention = NormConvention::MeanNorm;
  mean_norm.epsilon = 0.3;
  EXPECT_THROW(jml_concentration(spec, mean_norm, t1, t2, 1000, 0.1), ConfigError);
  const JointManifoldSpec mixed{{make_circle(1.0), make_circle(2.0)}};
  EXPECT_THROW(jml_concentration(mixed, nm, t1, t2, 1000, 0.1), InputError);
}

TEST(AffineRecovery, ExactForAffineImages) {
  RowMatrix truth(5, 2);
  truth << 0, 0, 1, 0, 0, 1, 1, 1, 2, 3;
  Eigen::Matrix2d m;
  m << 2, 1, -1, 3;
  const RowMatrix emb = (truth * m).rowwise() + Eigen::RowVector2d(4, -2);
  EXPECT_NEAR(affine_recovery_rmse(emb, truth), 0.0, 1e-12);
}
