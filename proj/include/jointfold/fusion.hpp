#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "jointfold/core_geometry.hpp"
#include "jointfold/isomap.hpp"
#include "jointfold/rng.hpp"
#include "jointfold/separation.hpp"

namespace jointfold {

/// Measurement constant c in M = ceil(c K ln(J N*)), fixed by calibration on
/// the ellipse joint cloud.
inline constexpr double kCalibratedMeasurementConstant = 8.0;

enum class ProjectionKind { Gaussian, OrthonormalRows };

/// Phi = [Phi_1 ... Phi_J]; block j is M x N_j.
class ProjectionOperator {
 public:
  /// Gaussian blocks have i.i.d. N(0, 1/M) entries from stream derive_seed(seed, j).
  /// The orthonormal variant orthonormalizes the rows of the concatenated
  /// Gaussian matrix and rescales by sqrt(N*/M) (exact isometry when M = N*).
  static ProjectionOperator make(Index m, std::vector<Index> dims, std::uint64_t seed,
                                 ProjectionKind kind = ProjectionKind::Gaussian) {
    if (m < 1) throw InputError("projection: M must be >= 1");
    if (dims.empty()) throw InputError("projection: no sensor blocks");
    Index total = 0;
    for (const Index d : dims) {
      if (d < 1) throw InputError("projection: block dimension must be >= 1");
      total += d;
    }
    if (kind == ProjectionKind::OrthonormalRows && m > total)
      throw InputError("projection: orthonormal rows need M <= N*");
    ProjectionOperator op;
    op.m_ = m;
    op.seed_ = seed;
    op.kind_ = kind;
    op.dims_ = std::move(dims);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (std::size_t j = 0; j < op.dims_.size(); ++j) {
      CounterRng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
      std::normal_distribution<double> normal;
      RowMatrix block(m, op.dims_[j]);
      for (Index i = 0; i < block.size(); ++i) block.data()[i] = normal(rng) * scale;
      op.blocks_.push_back(std::move(block));
    }
    if (kind == ProjectionKind::OrthonormalRows) {
      const Eigen::MatrixXd full_t = op.full().transpose();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(full_t);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(total, m);
      // fix column signs so the operator does not depend on QR sign choices
      for (Index c = 0; c < m; ++c)
        if (qr.matrixQR()(c, c) < 0.0) q.col(c) = -q.col(c);
      const Eigen::MatrixXd phi = q.transpose() * std::sqrt(static_cast<double>(total) / static_cast<double>(m));
      Index offset = 0;
      for (std::size_t j = 0; j < op.dims_.size(); ++j) {
        op.blocks_[j] = phi.middleCols(offset, op.dims_[j]);
        offset += op.dims_[j];
      }
    }
    return op;
  }

  Index measurements() const { return m_; }
  std::uint64_t seed() const { return seed_; }
  ProjectionKind kind() const { return kind_; }
  Index num_blocks() const { return static_cast<Index>(blocks_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  Index joint_dim() const {
    Index n = 0;
    for (const Index d : dims_) n += d;
    return n;
  }
  const RowMatrix& block(Index j) const { return blocks_.at(static_cast<std::size_t>(j)); }

  RowMatrix full() const {
    RowMatrix phi(m_, joint_dim());
    Index offset = 0;
    for (const auto& b : blocks_) {
      phi.middleCols(offset, b.cols()) = b;
      offset += b.cols();
    }
    return phi;
  }

 private:
  Index m_ = 0;
  std::uint64_t seed_ = 0;
  ProjectionKind kind_ = ProjectionKind::Gaussian;
  std::vector<Index> dims_;
  std::vector<RowMatrix> blocks_;
};

/// y_j = Phi_j x_j.
inline Vector local_project(const RowMatrix& block, const Vector& x) {
  if (block.cols() != x.size())
    throw InputError("local_project: block has " + std::to_string(block.cols()) + " columns, signal has " +
                     std::to_string(x.size()));
  return block * x;
}

namespace detail {

inline Vector tree_sum(std::span<const Vector> parts) {
  if (parts.size() == 1) return parts.front();
  const std::size_t mid = parts.size() / 2;
  Vector out = tree_sum(parts.first(mid));
  out += tree_sum(parts.subspan(mid));
  return out;
}

}  // namespace detail

/// Sum of local measurements in sensor order, pairwise-tree reduction.
inline Vector fuse(std::span<const Vector> locals) {
  if (locals.empty()) throw InputError("fuse: no local measurements");
  for (const auto& v : locals)
    if (v.size() != locals.front().size()) throw InputError("fuse: local measurement lengths differ");
  return detail::tree_sum(locals);
}

/// Projects every joint sample: row i is sum_j Phi_j x_ij.
inline RowMatrix project_joint(const ProjectionOperator& op, const JointCloud& cloud, int threads = 0) {
  cloud.validate();
  if (cloud.component_dims() != op.dims()) throw InputError("project_joint: cloud dims do not match the operator");
  RowMatrix out(cloud.size(), op.measurements());
  parallel_for(cloud.size(), threads, [&](std::ptrdiff_t i) {
    std::vector<Vector> locals;
    for (Index j = 0; j < cloud.num_components(); ++j)
      locals.push_back(local_project(op.block(j), cloud.components[static_cast<std::size_t>(j)].points.row(i).transpose()));
    out.row(i) = fuse(locals).transpose();
  });
  return out;
}

// Sensor messages --------------------------------------------------------------------

struct SensorMessage {
  std::uint32_t sensor_id = 0;
  std::uint64_t seed = 0;
  Vector payload;
};

namespace detail {

template <class T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  std::array<std::uint8_t, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.insert(out.end(), bytes.begin(), bytes.end());
}

template <class T>
T read_le(std::span<const std::uint8_t> in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw InputError("sensor message truncated");
  std::array<std::uint8_t, sizeof(T)> bytes{};
  std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(pos), sizeof(T), bytes.begin());
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  pos += sizeof(T);
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

}  // namespace detail

/// sensor_id u32 | seed u64 | M u32 | M x f64, little-endian.
inline std::vector<std::uint8_t> encode(const SensorMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + static_cast<std::size_t>(msg.payload.size()) * 8);
  detail::append_le(out, msg.sensor_id);
  detail::append_le(out, msg.seed);
  detail::append_le(out, static_cast<std::uint32_t>(msg.payload.size()));
  for (Index i = 0; i < msg.payload.size(); ++i) detail::append_le(out, msg.payload(i));
  return out;
}

inline SensorMessage decode(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  SensorMessage msg;
  msg.sensor_id = detail::read_le<std::uint32_t>(bytes, pos);
  msg.seed = detail::read_le<std::uint64_t>(bytes, pos);
  const auto m = detail::read_le<std::uint32_t>(bytes, pos);
  if (bytes.size() - pos != static_cast<std::size_t>(m) * 8)
    throw InputError("sensor message payload length does not match M");
  msg.payload.resize(m);
  for (Index i = 0; i < msg.payload.size(); ++i) msg.payload(i) = detail::read_le<double>(bytes, pos);
  return msg;
}

/// Fuses messages in ascending sensor_id regardless of arrival order.
inline Vector fuse(std::vector<SensorMessage> messages) {
  std::sort(messages.begin(), messages.end(),
            [](const SensorMessage& a, const SensorMessage& b) { return a.sensor_id < b.sensor_id; });
  for (std::size_t i = 1; i < messages.size(); ++i) {
    if (messages[i].sensor_id == messages[i - 1].sensor_id) throw InputError("fuse: duplicate sensor id");
    if (messages[i].seed != messages[0].seed) throw InputError("fuse: messages from different operators");
  }
  std::vector<Vector> locals;
  for (auto& m : messages) locals.push_back(std::move(m.payload));
  return fuse(locals);
}

// Distortion -------------------------------------------------------------------------

struct DistortionReport {
  Index measurements = 0;
  std::uint64_t projection_seed = 0;
  double epsilon_hat = 0.0;
  double median_distortion = 0.0;
  Index pairs_tested = 0;
  double target_epsilon = 0.0;
  /// Max relative change of graph geodesics; negative when not computed.
  double geodesic_epsilon_hat = -1.0;
  bool within_target() const { return epsilon_hat <= target_epsilon; }
};

struct DistortionOptions {
  Index num_pairs = 2000;
  std::uint64_t pair_seed = 0;
  double target_epsilon = 0.25;
  /// knn for the geodesic comparison; 0 skips it.
  Index geodesic_knn = 0;
  int threads = 0;
};

inline DistortionReport measure_distortion(const ProjectionOperator& op, const JointCloud& cloud,
                                           const DistortionOptions& options = {}) {
  const PointCloud original = concat(cloud);
  const RowMatrix projected = project_joint(op, cloud, options.threads);
  const Index s = original.size();
  if (s < 2) throw InputError("measure_distortion needs at least 2 samples");
  DistortionReport r;
  r.measurements = op.measurements();
  r.projection_seed = op.seed();
  r.target_epsilon = options.target_epsilon;
  CounterRng rng(derive_seed(options.pair_seed, "fuse/pairs"));
  std::vector<double> dev;
  for (Index t = 0; t < options.num_pairs; ++t) {
    const auto i = static_cast<Index>(rng() % static_cast<std::uint64_t>(s));
    auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(s - 1));
    if (j >= i) ++j;
    const double before = euclidean_distance(original.points.row(i), original.points.row(j));
    if (!(before > 0.0)) continue;
    const double after = euclidean_distance(projected.row(i), projected.row(j));
    dev.push_back(std::abs(after / before - 1.0));
  }
  r.pairs_tested = static_cast<Index>(dev.size());
  if (!dev.empty()) {
    r.epsilon_hat = *std::max_element(dev.begin(), dev.end());
    std::nth_element(dev.begin(), dev.begin() + static_cast<std::ptrdiff_t>(dev.size() / 2), dev.end());
    r.median_distortion = dev[dev.size() / 2];
  }
  if (options.geodesic_knn > 0) {
    const GeodesicMatrix g0 = geodesic_matrix(build_graph(original.points, GraphRule::knn(options.geodesic_knn), options.threads), options.threads);
    const GeodesicMatrix g1 = geodesic_matrix(build_graph(projected, GraphRule::knn(options.geodesic_knn), options.threads), options.threads);
    double worst = 0.0;
    if (!g0.restricted && !g1.restricted) {
      for (Index i = 0; i < s; ++i)
        for (Index j = i + 1; j < s; ++j)
          if (g0.distances(i, j) > 0.0) worst = std::max(worst, std::abs(g1.distances(i, j) / g0.distances(i, j) - 1.0));
      r.geodesic_epsilon_hat = worst;
    }
  }
  return r;
}

struct SweepPoint {
  Index measurements = 0;
  double median_epsilon_hat = 0.0;
  double min_epsilon_hat = 0.0;
  double max_epsilon_hat = 0.0;
  std::vector<double> epsilon_hats;
  double spread() const { return max_epsilon_hat - min_epsilon_hat; }
};

/// epsilon_hat over `seeds` projection seeds derive_seed(root, s) for each M.
inline std::vector<SweepPoint> distortion_sweep(const JointCloud& cloud, const std::vector<Index>& ms, Index seeds,
                                                std::uint64_t root, const DistortionOptions& options = {}) {
  std::vector<SweepPoint> out;
  for (const Index m : ms) {
    SweepPoint p;
    p.measurements = m;
    for (Index s = 0; s < seeds; ++s) {
      const auto op = ProjectionOperator::make(m, cloud.component_dims(), derive_seed(root, static_cast<std::uint64_t>(s)));
      p.epsilon_hats.push_back(measure_distortion(op, cloud, options).epsilon_hat);
    }
    std::vector<double> sorted = p.epsilon_hats;
    std::sort(sorted.begin(), sorted.end());
    p.min_epsilon_hat = sorted.front();
    p.max_epsilon_hat = sorted.back();
    p.median_epsilon_hat = sorted.size() % 2 ? sorted[sorted.size() / 2]
                                             : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    out.push_back(std::move(p));
  }
  return out;
}

// Budgets ----------------------------------------------------------------------------

/// ceil(c K ln(J N*)), at least 1.
inline Index calibrated_measurements(Index k, Index j, Index joint_dim, double c = kCalibratedMeasurementConstant) {
  if (k < 1 || j < 1 || joint_dim < 1 || !(c > 0.0)) throw InputError("calibrated_measurements: inputs must be positive");
  const auto m = static_cast<Index>(std::ceil(c * static_cast<double>(k) * std::log(static_cast<double>(j * joint_dim))));
  return std::max<Index>(m, 1);
}

struct BudgetReport {
  Index k = 0, n = 0, j = 0;
  double tau_star = 0.0, epsilon = 0.0, constant = 0.0;
  /// J c K ln(N / tau*) / eps^2.
  double per_sensor = 0.0;
  /// c K ln(J N / tau*) / eps^2.
  double joint = 0.0;
  double ratio() const { return per_sensor / joint; }
};

inline BudgetReport compare_per_sensor_vs_joint(Index k, Index n, Index j, double tau_star, double epsilon,
                                                double c = kCalibratedMeasurementConstant) {
  if (k < 1 || n < 1 || j < 1 || !(tau_star > 0.0) || !(epsilon > 0.0) || !(c > 0.0))
    throw InputError("compare_per_sensor_vs_joint: inputs must be positive");
  const double per = std::log(static_cast<double>(n) / tau_star);
  if (!(per > 0.0)) throw InputError("compare_per_sensor_vs_joint: needs N / tau* > 1");
  BudgetReport r{k, n, j, tau_star, epsilon, c};
  const double scale = c * static_cast<double>(k) / (epsilon * epsilon);
  r.per_sensor = static_cast<double>(j) * scale * per;
  r.joint = scale * std::log(static_cast<double>(j) * static_cast<double>(n) / tau_star);
  return r;
}

// Classification after projection -----------------------------------------------------

struct ProjectedClassificationReport {
  Index measurements = 0;
  Index trials = 0;
  double error_unprojected = 0.0;
  double error_projected = 0.0;
  double shift() const { return std::abs(error_projected - error_unprojected); }
};

/// Same trial draws as run_classification_experiment; noise is added at the
/// sensor before local projection, classification against the projected clouds.
inline ProjectedClassificationReport projected_classification(const JointCloud& joint_a, const JointCloud& joint_b,
                                                              const NoiseModel& nm, Index trials, std::uint64_t seed,
                                                              const ProjectionOperator& op, int threads = 0) {
  joint_a.validate();
  joint_b.validate();
  nm.validate();
  if (trials < 1) throw ConfigError("projected classification: trials must be >= 1");
  const PointCloud a_star = concat(joint_a), b_star = concat(joint_b);
  const RowMatrix pa = project_joint(op, joint_a, threads), pb = project_joint(op, joint_b, threads);
  std::vector<std::uint8_t> outcome(static_cast<std::size_t>(trials), 0);
  parallel_for(trials, threads, [&](std::ptrdiff_t t) {
    const TrialDraw draw = draw_trial(joint_a, nm, seed, static_cast<std::uint64_t>(t));
    std::vector<Vector> parts, locals;
    for (Index j = 0; j < joint_a.num_components(); ++j) {
      const auto js = static_cast<std::size_t>(j);
      parts.push_back(joint_a.components[js].points.row(draw.sample).transpose() + draw.noise[js]);
      locals.push_back(local_project(op.block(j), parts.back()));
    }
    std::uint8_t bits = 0;
    if (classify(concat(parts), a_star.points, b_star.points).label == ClassLabel::B) bits |= 1;
    if (classify(fuse(locals), pa, pb).label == ClassLabel::B) bits |= 2;
    outcome[static_cast<std::size_t>(t)] = bits;
  });
  ProjectedClassificationReport r;
  r.measurements = op.measurements();
  r.trials = trials;
  Index e0 = 0, e1 = 0;
  for (const auto b : outcome) e0 += b & 1, e1 += (b >> 1) & 1;
  r.error_unprojected = static_cast<double>(e0) / static_cast<double>(trials);
  r.error_projected = static_cast<double>(e1) / static_cast<double>(trials);
  return r;
}

}  // namespace jointfold
