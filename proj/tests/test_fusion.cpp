#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "jointfold/fusion.hpp"
#include "jointfold/harness.hpp"
#include "oracles.hpp"

using namespace jointfold;

namespace {

Vector random_vector(CounterRng& rng, Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

}  // namespace

TEST(Projection, BlocksAreDeterministicAndScaled) {
  const auto a = ProjectionOperator::make(50, {20, 30, 10}, 7);
  const auto b = ProjectionOperator::make(50, {20, 30, 10}, 7);
  EXPECT_EQ(a.full(), b.full());
  EXPECT_EQ(a.joint_dim(), 60);
  EXPECT_EQ(a.num_blocks(), 3);
  // block j depends on (seed, j) only
  const auto c = ProjectionOperator::make(50, {20, 5}, 7);
  EXPECT_EQ(a.block(0), c.block(0));
  const auto big = ProjectionOperator::make(400, {300}, 1);
  const double var = big.full().array().square().mean();
  EXPECT_NEAR(var * 400.0, 1.0, 0.02);
}

TEST(Projection, FusedEqualsFullMatrixProduct) {
  CounterRng rng(derive_seed(31, "test/fusion"));
  const std::vector<Index> dims{7, 3, 12, 1};
  const auto op = ProjectionOperator::make(9, dims, 3);
  for (int c = 0; c < 10; ++c) {
    std::vector<Vector> parts, locals;
    for (std::size_t j = 0; j < dims.size(); ++j) {
      parts.push_back(random_vector(rng, dims[j]));
      locals.push_back(local_project(op.block(static_cast<Index>(j)), parts.back()));
    }
    const Vector fused = fuse(locals);
    const Vector want = oracle::matvec(op.full(), concat(parts));
    for (Index i = 0; i < want.size(); ++i) EXPECT_NEAR(fused(i), want(i), 1e-12 * (1.0 + std::abs(want(i))));
  }
}

TEST(Projection, OrthonormalAtFullDimensionIsIsometry) {
  CounterRng rng(derive_seed(32, "test/fusion"));
  const auto op = ProjectionOperator::make(12, {5, 7}, 9, ProjectionKind::OrthonormalRows);
  const Eigen::MatrixXd phi = op.full();
  EXPECT_LE((phi * phi.transpose() - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
  for (int c = 0; c < 5; ++c) {
    const Vector x = random_vector(rng, 12);
    EXPECT_NEAR((phi * x).norm(), x.norm(), 1e-12 * x.norm());
  }
  EXPECT_THROW(ProjectionOperator::make(13, {5, 7}, 9, ProjectionKind::OrthonormalRows), InputError);
  const auto sub = ProjectionOperator::make(6, {5, 7}, 9, ProjectionKind::OrthonormalRows);
  const Eigen::MatrixXd p = sub.full();
  EXPECT_LE((p * p.transpose() - 2.0 * Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Projection, InputErrors) {
  EXPECT_THROW(ProjectionOperator::make(0, {3}, 1), InputError);
  EXPECT_THROW(ProjectionOperator::make(2, {}, 1), InputError);
  EXPECT_THROW(ProjectionOperator::make(2, {3, 0}, 1), InputError);
  const auto op = ProjectionOperator::make(2, {3}, 1);
  EXPECT_THROW(local_project(op.block(0), Vector::Zero(4)), InputError);
  EXPECT_THROW(fuse(std::vector<Vector>{}), InputError);
  EXPECT_THROW(fuse(std::vector<Vector>{Vector::Zero(2), Vector::Zero(3)}), InputError);
}

TEST(Messages, RoundTripAndWireLayout) {
  SensorMessage m{3, 0x0102030405060708ull, Vector(2)};
  m.payload << 1.5, -0.25;
  const auto bytes = encode(m);
  ASSERT_EQ(bytes.size(), 4u + 8u + 4u + 16u);
  EXPECT_EQ(bytes[0], 3);
  EXPECT_EQ(bytes[4], 0x08);
  EXPECT_EQ(bytes[11], 0x01);
  EXPECT_EQ(bytes[12], 2);
  const auto back = decode(bytes);
  EXPECT_EQ(back.sensor_id, 3u);
  EXPECT_EQ(back.seed, m.seed);
  EXPECT_EQ(back.payload, m.payload);
}

TEST(Messages, CorruptionIsRejected) {
  SensorMessage m{1, 2, Vector::Ones(3)};
  auto bytes = encode(m);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode(truncated), InputError);
  auto longer = bytes;
  longer.push_back(0);
  EXPECT_THROW(decode(longer), InputError);
  EXPECT_THROW(decode(std::vector<std::uint8_t>(5, 0)), InputError);
}

TEST(Messages, FusionIsOrderIndependent) {
  CounterRng rng(derive_seed(33, "test/fusion"));
  std::vector<SensorMessage> msgs;
  for (std::uint32_t j = 0; j < 6; ++j) msgs.push_back({j, 42, random_vector(rng, 8)});
  const Vector ref = fuse(msgs);
  for (int c = 0; c < 10; ++c) {
    std::vector<SensorMessage> shuffled = msgs;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng() % (i + 1)]);
    std::vector<SensorMessage> wire;
    for (const auto& s : shuffled) wire.push_back(decode(encode(s)));
    EXPECT_EQ(fuse(wire), ref);
  }
  auto dup = msgs;
  dup[2].sensor_id = 1;
  EXPECT_THROW(fuse(dup), InputError);
  auto mixed = msgs;
  mixed[4].seed = 43;
  EXPECT_THROW(fuse(mixed), InputError);
}

TEST(Distortion, IsometryHasNoDistortion) {
  const JointCloud jc = sample_joint(make_helix_pair(), SamplingStrategy::grid(), 100);
  const auto op = ProjectionOperator::make(3, jc.component_dims(), 5, ProjectionKind::OrthonormalRows);
  DistortionOptions opt;
  opt.num_pairs = 500;
  opt.geodesic_knn = 4;
  const auto r = measure_distortion(op, jc, opt);
  EXPECT_LE(r.epsilon_hat, 1e-12);
  EXPECT_LE(r.geodesic_epsilon_hat, 1e-12);
  EXPECT_EQ(r.pairs_tested, 500);
  EXPECT_TRUE(r.within_target());
}

TEST(Distortion, ShrinksWithMeasurements) {
  std::vector<ParametricManifold> comps;
  for (std::uint64_t s = 0; s < 3; ++s) comps.push_back(make_trig_curve(50 + s, 40));
  const JointCloud jc = sample_joint(JointManifoldSpec{comps}, SamplingStrategy::grid(), 200);
  DistortionOptions opt;
  opt.num_pairs = 1000;
  const auto sweep = distortion_sweep(jc, {10, 40, 110}, 9, 77, opt);
  ASSERT_EQ(sweep.size(), 3u);
  EXPECT_GT(sweep[0].median_epsilon_hat, sweep[1].median_epsilon_hat);
  EXPECT_GT(sweep[1].median_epsilon_hat, sweep[2].median_epsilon_hat);
  EXPECT_GT(sweep[0].spread(), sweep[2].spread());
  for (const auto& p : sweep) EXPECT_EQ(p.epsilon_hats.size(), 9u);
}

TEST(Budget, CalibratedMeasurements) {
  // ceil(8 * 2 * ln(3 * 3 * 64^2))
  EXPECT_EQ(calibrated_measurements(2, 3, 3 * 64 * 64), 169);
  EXPECT_EQ(calibrated_measurements(1, 1, 1), 1);
  EXPECT_EQ(calibrated_measurements(1, 2, 5, 1.0), 3);  // ceil(ln 10)
  EXPECT_THROW(calibrated_measurements(0, 1, 1), InputError);
}

TEST(Budget, JointNeverExceedsPerSensor) {
  const auto one = compare_per_sensor_vs_joint(2, 100, 1, 0.5, 0.2);
  EXPECT_DOUBLE_EQ(one.per_sensor, one.joint);
  for (Index j : {2, 5, 20}) {
    const auto r = compare_per_sensor_vs_joint(2, 100, j, 0.5, 0.2);
    EXPECT_LT(r.joint, r.per_sensor);
    EXPECT_NEAR(r.per_sensor, j * 8.0 * 2.0 * std::log(200.0) / 0.04, 1e-9 * r.per_sensor);
    EXPECT_NEAR(r.joint, 8.0 * 2.0 * std::log(200.0 * static_cast<double>(j)) / 0.04, 1e-9 * r.joint);
    EXPECT_GT(r.ratio(), 1.0);
  }
  EXPECT_THROW(compare_per_sensor_vs_joint(2, 1, 2, 2.0, 0.2), InputError);
}

TEST(ProjectedClassification, IsometryMatchesUnprojected) {
  const auto [a, b] = detail::parallel_segment_clouds(3, 20, 0.4);
  NoiseModel nm{0.12, 0.3, 0, NormConvention::MeanNorm};
  const auto op = ProjectionOperator::make(6, a.component_dims(), 4, ProjectionKind::OrthonormalRows);
  const auto r = projected_classification(a, b, nm, 3000, 8, op);
  EXPECT_EQ(r.error_projected, r.error_unprojected);
  const auto ref = run_classification_experiment(a, b, nm, 3000, 8);
  EXPECT_EQ(r.error_unprojected, ref.empirical_error_joint);
}
