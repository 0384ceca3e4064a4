#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "jointfold/manifold_models.hpp"
#include "jointfold/rng.hpp"

using namespace jointfold;

TEST(Rng, DeterministicAndSeedSensitive) {
  CounterRng a(5), b(5), c(6);
  for (int i = 0; i < 10; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    EXPECT_NE(x, c());
  }
  EXPECT_NE(derive_seed(1, "a/b"), derive_seed(1, "a/c"));
  EXPECT_NE(derive_seed(1, std::uint64_t{0}), derive_seed(1, std::uint64_t{1}));
  EXPECT_EQ(derive_seed(9, "x"), derive_seed(9, "x"));
  CounterRng u(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
  }
}

TEST(Generators, CircleAndLine) {
  const auto circle = make_circle(2.5);
  EXPECT_EQ(circle.ambient_dim(), 2);
  EXPECT_NEAR(circle(Vector::Constant(1, 1.0)).norm(), 2.5, 1e-15);
  const auto line = make_line(0.0, 1.0, Eigen::Vector3d(1, 2, 2));
  EXPECT_TRUE(line(Vector::Constant(1, 2.0)).isApprox(Eigen::Vector3d(2, 4, 4)));
  EXPECT_THROW(make_line(0, 1, Eigen::Vector2d(0, 0)), ConfigError);
  EXPECT_THROW(circle(Eigen::Vector2d(1, 2)), InputError);
}

TEST(Generators, HelixJointIsConcatenation) {
  const auto helix = make_helix_pair();
  const auto joint = helix.joint();
  EXPECT_EQ(joint.ambient_dim(), 3);
  const Vector v = joint(Vector::Constant(1, 0.7));
  EXPECT_DOUBLE_EQ(v(0), 0.7);
  EXPECT_DOUBLE_EQ(v(1), std::cos(0.7));
  EXPECT_DOUBLE_EQ(v(2), std::sin(0.7));
}

TEST(Generators, JacobianMatchesAnalyticDerivative) {
  const auto circle = make_circle(1.0);
  for (double t : {0.3, 1.7, 4.0}) {
    const RowMatrix jac = circle.jacobian(Vector::Constant(1, t));
    EXPECT_NEAR(jac(0, 0), -std::sin(t), 1e-11);
    EXPECT_NEAR(jac(1, 0), std::cos(t), 1e-11);
    const RowMatrix frame = circle.tangent_frame(Vector::Constant(1, t));
    EXPECT_NEAR(frame.col(0).norm(), 1.0, 1e-14);
  }
}

TEST(Generators, TrigCurveIsClosedAndSeeded) {
  const auto a = make_trig_curve(3), b = make_trig_curve(3), c = make_trig_curve(4);
  const Vector t0 = Vector::Constant(1, 0.0), t1 = Vector::Constant(1, 2.0 * std::numbers::pi);
  EXPECT_NEAR((a(t0) - a(t1)).norm(), 0.0, 1e-12);
  EXPECT_EQ(a(Vector::Constant(1, 1.0)), b(Vector::Constant(1, 1.0)));
  EXPECT_NE(a(Vector::Constant(1, 1.0)), c(Vector::Constant(1, 1.0)));
}

TEST(Ellipse, IntensityProfile) {
  const EllipseRender smooth{1.0, false};
  EXPECT_EQ(ellipse_intensity(7, 5, 30, 30, 30, 30, smooth), 1.0);
  EXPECT_EQ(ellipse_intensity(7, 5, 30, 30, 33, 31, smooth), 1.0);   // inside
  EXPECT_EQ(ellipse_intensity(7, 5, 30, 30, 50, 30, smooth), 0.0);   // far outside
  const double ramp = ellipse_intensity(7, 5, 30, 30, 37.5, 30, smooth);
  EXPECT_GT(ramp, 0.0);
  EXPECT_LT(ramp, 1.0);
  const EllipseRender hard{1.0, true};
  EXPECT_EQ(ellipse_intensity(7, 5, 30, 30, 37.5, 30, hard), 0.0);
  EXPECT_EQ(ellipse_intensity(7, 5, 30, 30, 36.5, 30, hard), 1.0);
}

TEST(Ellipse, ManifoldShapeAndDeterminism) {
  const auto e = make_ellipse_manifold(7, 6, 64);
  EXPECT_EQ(e.ambient_dim(), 4096);
  EXPECT_EQ(e.param_dim(), 2);
  const Vector theta = Eigen::Vector2d(20.25, 33.5);
  const Vector a = e(theta), b = make_ellipse_manifold(7, 6, 64)(theta);
  EXPECT_EQ(a, b);
  // image row r, column c holds pixel (x = c, y = r)
  EXPECT_EQ(a(33 * 64 + 20), 1.0);
  EXPECT_EQ(a(0), 0.0);
}

TEST(Ellipse, DomainLeavingImageIsConfigError) {
  const ParamBox too_wide{Eigen::Vector2d(3, 10), Eigen::Vector2d(50, 50)};
  EXPECT_THROW(make_ellipse_manifold(7, 5, 64, {}, too_wide), ConfigError);
  EXPECT_THROW(make_ellipse_manifold(7, 5, 8), ConfigError);
  EXPECT_THROW(make_ellipse_manifold(-1, 5, 64), ConfigError);
  EXPECT_THROW(make_ellipse_manifold(30, 30, 64), ConfigError);
}

TEST(Sampling, GridIsCellCentered) {
  const RowMatrix p = sample_params(interval_box(0.0, 1.0), SamplingStrategy::grid(), 4);
  EXPECT_DOUBLE_EQ(p(0, 0), 0.125);
  EXPECT_DOUBLE_EQ(p(3, 0), 0.875);
  const ParamBox box{Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 4)};
  const RowMatrix q = sample_params(box, SamplingStrategy::grid(), 4);
  EXPECT_DOUBLE_EQ(q(1, 0), 1.5);
  EXPECT_DOUBLE_EQ(q(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(q(2, 1), 3.0);
  EXPECT_THROW(sample_params(box, SamplingStrategy::grid(), 5), ConfigError);
}

TEST(Sampling, RandomIsSeededAndInsideBox) {
  const ParamBox box{Eigen::Vector2d(-1, 2), Eigen::Vector2d(1, 3)};
  const RowMatrix a = sample_params(box, SamplingStrategy::uniform_random(4), 200);
  const RowMatrix b = sample_params(box, SamplingStrategy::uniform_random(4), 200);
  const RowMatrix c = sample_params(box, SamplingStrategy::uniform_random(5), 200);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (Index i = 0; i < a.rows(); ++i) EXPECT_TRUE(box.contains(a.row(i).transpose()));
}

TEST(Sampling, JointSamplesShareParameters) {
  const JointCloud jc = sample_joint(make_helix_pair(), SamplingStrategy::uniform_random(1), 100);
  EXPECT_NO_THROW(jc.validate());
  EXPECT_EQ(jc.components[0].params, jc.components[1].params);
  EXPECT_EQ(jc.components[0].points.col(0), jc.components[0].params.col(0));
}

TEST(Sampling, ThreadCountDoesNotChangeClouds) {
  const auto e = make_ellipse_manifold(7, 5, 32);
  const PointCloud a = sample(e, SamplingStrategy::grid(), 25, 1);
  const PointCloud b = sample(e, SamplingStrategy::grid(), 25, 3);
  EXPECT_EQ(a.points, b.points);
}

TEST(Geodesic, HelixScalesBySqrt2) {
  const auto helix = make_helix_pair().joint();
  const double geo = parameter_geodesic(helix, Vector::Constant(1, 0.5), Vector::Constant(1, 3.0), 10000);
  EXPECT_NEAR(geo / (std::numbers::sqrt2 * 2.5), 1.0, 1e-3);
}

TEST(Noise, MeanNormConventionMatchesSigmaAndBound) {
  const NoiseModel nm{0.4, 1.0, 17, NormConvention::MeanNorm, 4.0};
  const auto draws = draw_noise(nm, 3, 40000);
  double mean = 0.0, max_norm = 0.0;
  for (const auto& n : draws) {
    mean += n.norm();
    max_norm = std::max(max_norm, n.norm());
  }
  mean /= static_cast<double>(draws.size());
  // std of ||n|| is below 0.25, so 4 standard errors is about 0.005
  EXPECT_NEAR(mean, 0.4, 0.005);
  EXPECT_LE(max_norm, 1.0);
}

TEST(Noise, MeanSquaredNormConvention) {
  const NoiseModel nm{0.1, 0.04, 3, NormConvention::MeanSquaredNorm, 4.0};
  const auto draws = draw_noise(nm, 2, 40000);
  double mean_sq = 0.0, max_sq = 0.0;
  for (const auto& n : draws) {
    mean_sq += n.squaredNorm();
    max_sq = std::max(max_sq, n.squaredNorm());
  }
  mean_sq /= static_cast<double>(draws.size());
  EXPECT_NEAR(mean_sq, 0.01, 2e-4);
  EXPECT_LE(max_sq, 0.04);
}

TEST(Noise, DirectionIsIsotropic) {
  const NoiseModel nm{0.5, 1.0, 8, NormConvention::MeanNorm, 4.0};
  const auto draws = draw_noise(nm, 2, 20000);
  Vector mean = Vector::Zero(2);
  for (const auto& n : draws) mean += n;
  mean /= static_cast<double>(draws.size());
  EXPECT_LT(mean.norm(), 0.02);
}

TEST(Noise, ZeroSigmaAndValidation) {
  const NoiseModel zero{0.0, 1.0, 1, NormConvention::MeanNorm, 4.0};
  EXPECT_EQ(noise_vector(zero, 4, 0).norm(), 0.0);
  EXPECT_THROW((NoiseModel{2.0, 1.0, 0, NormConvention::MeanNorm, 4.0}.validate()), ConfigError);
  EXPECT_THROW((NoiseModel{0.3, 0.04, 0, NormConvention::MeanSquaredNorm, 4.0}.validate()), ConfigError);
  EXPECT_THROW((NoiseModel{0.1, -1.0, 0, NormConvention::MeanNorm, 4.0}.validate()), ConfigError);
}
