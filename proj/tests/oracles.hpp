#pragma once

// Reference computations written independently of the library code paths.

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;

inline double dist(const Eigen::Ref<const Eigen::RowVectorXd>& a, const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return std::sqrt((a - b).array().square().sum());
}

struct Separation {
  double delta, forward, backward, max_sep;
};

/// Plain re-enumeration of min/max distances between two row sets.
inline Separation separation(const Mat& a, const Mat& b) {
  Separation s{std::numeric_limits<double>::infinity(), 0.0, 0.0, 0.0};
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double d = dist(a.row(i), b.row(j));
      s.delta = std::min(s.delta, d);
      s.max_sep = std::max(s.max_sep, d);
      nearest = std::min(nearest, d);
    }
    s.forward = std::max(s.forward, nearest);
  }
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < a.rows(); ++i) nearest = std::min(nearest, dist(a.row(i), b.row(j)));
    s.backward = std::max(s.backward, nearest);
  }
  return s;
}

/// Bellman-Ford style relaxation to a fixed point over a dense weight matrix
/// (inf = no edge), from every source.
inline Mat shortest_paths(const Mat& w) {
  const auto n = w.rows();
  Mat d = Mat::Constant(n, n, std::numeric_limits<double>::infinity());
  for (Eigen::Index s = 0; s < n; ++s) {
    d(s, s) = 0.0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (Eigen::Index u = 0; u < n; ++u)
        for (Eigen::Index v = 0; v < n; ++v)
          if (std::isfinite(w(u, v)) && d(s, u) + w(u, v) < d(s, v)) {
            d(s, v) = d(s, u) + w(u, v);
            changed = true;
          }
    }
  }
  return d;
}

/// Spectrum of the double-centered -1/2 D^2 for S equally spaced points on a
/// unit circle under the arc metric. The matrix is circulant, so eigenvalues
/// are the real DFT of its first row.
inline std::vector<double> circle_arc_mds_spectrum(int s) {
  std::vector<double> row(static_cast<std::size_t>(s));
  for (int m = 0; m < s; ++m) {
    const double step = 2.0 * std::numbers::pi * std::min(m, s - m) / s;
    row[static_cast<std::size_t>(m)] = -0.5 * step * step;
  }
  double mean = 0.0;
  for (const double v : row) mean += v;
  mean /= s;
  // circulant: row mean = column mean = grand mean
  for (auto& v : row) v -= mean;
  std::vector<double> eig(static_cast<std::size_t>(s));
  for (int k = 0; k < s; ++k) {
    double acc = 0.0;
    for (int m = 0; m < s; ++m) acc += row[static_cast<std::size_t>(m)] * std::cos(2.0 * std::numbers::pi * k * m / s);
    eig[static_cast<std::size_t>(k)] = acc;
  }
  return eig;
}

/// Naive double-loop matrix-vector product.
inline Eigen::VectorXd matvec(const Mat& a, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) y(i) += a(i, j) * x(j);
  return y;
}

/// Reach of the curve (theta, cos theta, sin theta): constant curvature 1/2,
/// and no pair of distant points is closer than the curvature radius allows,
/// so the reach is the curvature radius.
inline constexpr double kHelixReach = 2.0;

/// Ratio chord/arc for a circle edge spanning angle alpha.
inline double circle_chord_ratio(double alpha) { return 2.0 * std::sin(alpha / 2.0) / alpha; }

}  // namespace oracle
