#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jointfold/errors.hpp"
#include "jointfold/parallel.hpp"

namespace jointfold {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Dense symmetric S x S distance matrix.
using DistanceMatrix = Eigen::MatrixXd;
using IndexPair = std::pair<Index, Index>;

namespace detail {

template <class Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

inline std::string dims(Index a, Index b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace detail

/// Finite sample of a manifold: S ambient points (rows) and their parameters.
struct PointCloud {
  RowMatrix points;  // S x N
  RowMatrix params;  // S x K
  std::string label;

  Index size() const { return points.rows(); }
  Index ambient_dim() const { return points.cols(); }
  Index param_dim() const { return params.cols(); }

  void validate() const {
    if (points.rows() < 1 || points.cols() < 1)
      throw InputError("point cloud '" + label + "' is empty");
    if (params.rows() != points.rows())
      throw InputError("point cloud '" + label + "': params/points count " +
                       detail::dims(params.rows(), points.rows()));
    if (params.cols() > points.cols())
      throw InputError("point cloud '" + label + "': param dim exceeds ambient dim");
    if (!detail::all_finite(points) || !detail::all_finite(params))
      throw InputError("point cloud '" + label + "' has non-finite entries");
  }
};

/// J index-aligned component clouds; joint point i is the concatenation of
/// component points i.
struct JointCloud {
  std::vector<PointCloud> components;

  Index num_components() const { return static_cast<Index>(components.size()); }
  Index size() const { return components.empty() ? 0 : components.front().size(); }
  Index joint_dim() const {
    Index n = 0;
    for (const auto& c : components) n += c.ambient_dim();
    return n;
  }
  std::vector<Index> component_dims() const {
    std::vector<Index> d;
    d.reserve(components.size());
    for (const auto& c : components) d.push_back(c.ambient_dim());
    return d;
  }

  void validate() const {
    if (components.empty()) throw InputError("joint cloud has no components");
    const auto& first = components.front();
    first.validate();
    for (std::size_t j = 1; j < components.size(); ++j) {
      const auto& c = components[j];
      c.validate();
      if (c.size() != first.size())
        throw InputError("joint cloud component " + std::to_string(j) +
                         " sample count " + detail::dims(c.size(), first.size()));
      if (c.params != first.params)
        throw InputError("joint cloud component " + std::to_string(j) +
                         " params are not aligned with component 0");
    }
  }
};

/// Discretized curve; consecutive rows are segment endpoints.
struct Polyline {
  RowMatrix vertices;  // T x N
};

template <class A, class B>
double euclidean_distance(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
  if (p.size() != q.size())
    throw InputError("euclidean_distance: dimension " + detail::dims(p.size(), q.size()));
  double acc = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    const double d = p(i) - q(i);
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// sqrt(sum_j ||p_j - q_j||^2) over J aligned component pairs.
inline double joint_distance(std::span<const Vector> jp, std::span<const Vector> jq) {
  if (jp.size() != jq.size())
    throw InputError("joint_distance: component count " +
                     detail::dims(static_cast<Index>(jp.size()), static_cast<Index>(jq.size())));
  if (jp.empty()) throw InputError("joint_distance: no components");
  double acc = 0.0;
  for (std::size_t j = 0; j < jp.size(); ++j) {
    const double d = euclidean_distance(jp[j], jq[j]);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline Vector concat(std::span<const Vector> parts) {
  Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Index offset = 0;
  for (const auto& p : parts) {
    out.segment(offset, p.size()) = p;
    offset += p.size();
  }
  return out;
}

inline PointCloud concat(const JointCloud& jc) {
  jc.validate();
  PointCloud out;
  out.points.resize(jc.size(), jc.joint_dim());
  Index offset = 0;
  for (const auto& c : jc.components) {
    out.points.middleCols(offset, c.ambient_dim()) = c.points;
    offset += c.ambient_dim();
  }
  out.params = jc.components.front().params;
  for (std::size_t j = 0; j < jc.components.size(); ++j)
    out.label += (j ? "+" : "") + jc.components[j].label;
  return out;
}

/// Inverse of concat: splits columns by the given component dimensions.
inline JointCloud split(const PointCloud& cloud, std::span<const Index> component_dims,
                        std::span<const std::string> labels = {}) {
  cloud.validate();
  const Index total = std::accumulate(component_dims.begin(), component_dims.end(), Index{0});
  if (total != cloud.ambient_dim())
    throw InputError("split: component dims sum " + detail::dims(total, cloud.ambient_dim()));
  JointCloud jc;
  Index offset = 0;
  for (std::size_t j = 0; j < component_dims.size(); ++j) {
    PointCloud c;
    c.points = cloud.points.middleCols(offset, component_dims[j]);
    c.params = cloud.params;
    c.label = j < labels.size() ? labels[j] : cloud.label + "/" + std::to_string(j);
    offset += component_dims[j];
    jc.components.push_back(std::move(c));
  }
  return jc;
}

inline double path_length(const Polyline& c) {
  if (c.vertices.rows() < 2) throw InputError("path_length: polyline needs at least 2 vertices");
  double length = 0.0;
  for (Index t = 1; t < c.vertices.rows(); ++t)
    length += euclidean_distance(c.vertices.row(t), c.vertices.row(t - 1));
  return length;
}

/// Split a joint polyline into its component polylines (column blocks).
inline std::vector<Polyline> split(const Polyline& c, std::span<const Index> component_dims) {
  std::vector<Polyline> out;
  Index offset = 0;
  for (const Index d : component_dims) {
    if (offset + d > c.vertices.cols()) throw InputError("split: polyline too narrow");
    out.push_back(Polyline{c.vertices.middleCols(offset, d)});
    offset += d;
  }
  if (offset != c.vertices.cols()) throw InputError("split: component dims do not cover polyline");
  return out;
}

/// Each entry is computed independently from its pair, so rows can be filled
/// in parallel with bit-identical results.
inline DistanceMatrix pairwise_distances(const RowMatrix& points, int threads = 0) {
  const Index s = points.rows();
  DistanceMatrix d = DistanceMatrix::Zero(s, s);
  parallel_for(s, threads, [&](std::ptrdiff_t i) {
    for (Index j = 0; j < s; ++j) {
      if (j == i) continue;
      // entry (i, j) and (j, i) use the same operand order
      const Index lo = std::min<Index>(i, j), hi = std::max<Index>(i, j);
      d(i, j) = euclidean_distance(points.row(lo), points.row(hi));
    }
  });
  return d;
}

inline DistanceMatrix pairwise_distances(const PointCloud& cloud, int threads = 0) {
  cloud.validate();
  return pairwise_distances(cloud.points, threads);
}

/// Distances from every row of `a` to every row of `b` (|a| x |b|).
inline Eigen::MatrixXd cross_distances(const RowMatrix& a, const RowMatrix& b, int threads = 0) {
  if (a.cols() != b.cols())
    throw InputError("cross_distances: dimension " + detail::dims(a.cols(), b.cols()));
  Eigen::MatrixXd d(a.rows(), b.rows());
  parallel_for(a.rows(), threads, [&](std::ptrdiff_t i) {
    for (Index j = 0; j < b.rows(); ++j) d(i, j) = euclidean_distance(a.row(i), b.row(j));
  });
  return d;
}

}  // namespace jointfold
