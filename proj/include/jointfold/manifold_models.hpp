#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <cstdio>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "jointfold/core_geometry.hpp"
#include "jointfold/rng.hpp"

namespace jointfold {

/// Axis-aligned parameter box.
struct ParamBox {
  Vector lower;
  Vector upper;

  Index dim() const { return lower.size(); }
  bool contains(const Vector& theta) const {
    return ((theta.array() >= lower.array()) && (theta.array() <= upper.array())).all();
  }
  friend bool operator==(const ParamBox& a, const ParamBox& b) {
    return a.lower == b.lower && a.upper == b.upper;
  }
};

/// A K-dimensional manifold given by an explicit map f : box in R^K -> R^N.
class ParametricManifold {
 public:
  using Map = std::function<void(const Vector& theta, Eigen::Ref<Vector> out)>;

  ParametricManifold(std::string name, Index param_dim, Index ambient_dim, ParamBox domain, Map map)
      : name_(std::move(name)),
        param_dim_(param_dim),
        ambient_dim_(ambient_dim),
        domain_(std::move(domain)),
        map_(std::move(map)) {
    if (param_dim_ < 1 || ambient_dim_ < param_dim_)
      throw ConfigError("manifold '" + name_ + "': need 1 <= K <= N");
    if (domain_.lower.size() != param_dim_ || domain_.upper.size() != param_dim_)
      throw ConfigError("manifold '" + name_ + "': domain dimension does not match K");
    if ((domain_.upper.array() < domain_.lower.array()).any())
      throw ConfigError("manifold '" + name_ + "': empty parameter domain");
  }

  const std::string& name() const { return name_; }
  Index param_dim() const { return param_dim_; }
  Index ambient_dim() const { return ambient_dim_; }
  const ParamBox& domain() const { return domain_; }

  Vector operator()(const Vector& theta) const {
    if (theta.size() != param_dim_)
      throw InputError("manifold '" + name_ + "': parameter dimension " +
                       detail::dims(theta.size(), param_dim_));
    Vector out(ambient_dim_);
    map_(theta, out);
    return out;
  }

  /// Five-point central-difference Jacobian (N x K); truncation error O(step^4).
  RowMatrix jacobian(const Vector& theta, double step = 1e-3) const {
    RowMatrix jac(ambient_dim_, param_dim_);
    Vector shifted = theta;
    auto at = [&](Index k, double offset) {
      shifted(k) = theta(k) + offset;
      Vector v = (*this)(shifted);
      shifted(k) = theta(k);
      return v;
    };
    for (Index k = 0; k < param_dim_; ++k)
      jac.col(k) = (8.0 * (at(k, step) - at(k, -step)) - (at(k, 2.0 * step) - at(k, -2.0 * step))) / (12.0 * step);
    return jac;
  }

  /// Orthonormal basis of the tangent space at theta (N x K).
  RowMatrix tangent_frame(const Vector& theta, double step = 1e-3) const {
    const Eigen::MatrixXd jac = jacobian(theta, step);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(jac);
    return qr.householderQ() * Eigen::MatrixXd::Identity(ambient_dim_, param_dim_);
  }

 private:
  std::string name_;
  Index param_dim_;
  Index ambient_dim_;
  ParamBox domain_;
  Map map_;
};

/// J component manifolds over one shared parameter domain; the shared domain
/// is what realizes the homeomorphisms psi_j = f_j o f_1^{-1}.
struct JointManifoldSpec {
  std::vector<ParametricManifold> components;

  Index num_components() const { return static_cast<Index>(components.size()); }

  void validate() const {
    if (components.empty()) throw ConfigError("joint manifold has no components");
    for (const auto& c : components) {
      if (c.param_dim() != components.front().param_dim() ||
          !(c.domain() == components.front().domain()))
        throw ConfigError("joint manifold component '" + c.name() +
                          "' does not share the parameter domain");
    }
  }

  /// The joint manifold as a single map theta -> (f_1(theta), ..., f_J(theta)).
  ParametricManifold joint() const {
    validate();
    Index n = 0;
    std::string name;
    for (const auto& c : components) {
      n += c.ambient_dim();
      name += (name.empty() ? "" : "+") + c.name();
    }
    auto parts = components;
    return ParametricManifold(
        name, components.front().param_dim(), n, components.front().domain(),
        [parts](const Vector& theta, Eigen::Ref<Vector> out) {
          Index offset = 0;
          for (const auto& c : parts) {
            out.segment(offset, c.ambient_dim()) = c(theta);
            offset += c.ambient_dim();
          }
        });
  }
};

// Generators -----------------------------------------------------------------

inline ParamBox interval_box(double lo, double hi) {
  return ParamBox{Vector::Constant(1, lo), Vector::Constant(1, hi)};
}

/// theta -> theta * direction over [lo, hi]; a straight segment in R^N.
inline ParametricManifold make_line(double lo, double hi, const Vector& direction) {
  if (direction.size() < 1 || direction.norm() == 0.0)
    throw ConfigError("line direction must be a nonzero vector");
  const Vector dir = direction;
  return ParametricManifold("line", 1, dir.size(), interval_box(lo, hi),
                            [dir](const Vector& t, Eigen::Ref<Vector> out) { out = t(0) * dir; });
}

/// The open interval (0, 2*pi) embedded in R^1 by the identity.
inline ParametricManifold make_interval(double lo = 0.0, double hi = 2.0 * std::numbers::pi) {
  return make_line(lo, hi, Vector::Ones(1));
}

/// Circle of the given radius, theta in (0, 2*pi).
inline ParametricManifold make_circle(double radius = 1.0) {
  return ParametricManifold("circle", 1, 2, interval_box(0.0, 2.0 * std::numbers::pi),
                            [radius](const Vector& t, Eigen::Ref<Vector> out) {
                              out(0) = radius * std::cos(t(0));
                              out(1) = radius * std::sin(t(0));
                            });
}

/// Interval and circle over a shared theta; their joint manifold is the helix
/// (theta, cos theta, sin theta).
inline JointManifoldSpec make_helix_pair() {
  return JointManifoldSpec{{make_interval(), make_circle()}};
}

/// J copies of one manifold (isometric components).
inline JointManifoldSpec make_copies(const ParametricManifold& m, Index copies) {
  if (copies < 1) throw ConfigError("need at least one copy");
  return JointManifoldSpec{std::vector<ParametricManifold>(static_cast<std::size_t>(copies), m)};
}

/// Closed random curve in R^N: sum_m (A_m cos m t + B_m sin m t) / m^2, t in (0, 2*pi).
inline ParametricManifold make_trig_curve(std::uint64_t seed, Index ambient_dim = 3, int degree = 3) {
  if (ambient_dim < 2 || degree < 1) throw ConfigError("trig curve needs N >= 2 and degree >= 1");
  CounterRng rng(seed);
  std::normal_distribution<double> normal;
  RowMatrix a(degree, ambient_dim), b(degree, ambient_dim);
  for (int m = 0; m < degree; ++m) {
    const double scale = 1.0 / ((m + 1.0) * (m + 1.0));
    for (Index c = 0; c < ambient_dim; ++c) a(m, c) = scale * normal(rng);
    for (Index c = 0; c < ambient_dim; ++c) b(m, c) = scale * normal(rng);
  }
  return ParametricManifold("trig_curve_" + std::to_string(seed), 1, ambient_dim,
                            interval_box(0.0, 2.0 * std::numbers::pi),
                            [a, b](const Vector& t, Eigen::Ref<Vector> out) {
                              out.setZero();
                              for (Index m = 0; m < a.rows(); ++m) {
                                const double w = static_cast<double>(m + 1) * t(0);
                                out += std::cos(w) * a.row(m).transpose() +
                                       std::sin(w) * b.row(m).transpose();
                              }
                            });
}

/// Rendering options for translating-ellipse images.
struct EllipseRender {
  /// Width (pixels) of the intensity ramp outside the boundary.
  double smoothing_width = 1.0;
  /// Hard 0/1 rendering instead of the ramp.
  bool binary = false;
};

/// Intensity of one pixel for an ellipse with semi-axes (a, b) centered at (cx, cy).
///
/// Signed boundary distance is approximated from the implicit form
/// F = (dx/a)^2 + (dy/b)^2 - 1 as F / |grad F|; intensity = clamp(1 - s/w, 0, 1).
inline double ellipse_intensity(double a, double b, double cx, double cy, double px, double py,
                                const EllipseRender& render) {
  const double dx = px - cx, dy = py - cy;
  const double f = (dx / a) * (dx / a) + (dy / b) * (dy / b) - 1.0;
  if (render.binary) return f <= 0.0 ? 1.0 : 0.0;
  const double gx = 2.0 * dx / (a * a), gy = 2.0 * dy / (b * b);
  const double g = std::sqrt(gx * gx + gy * gy);
  if (g < 1e-12) return 1.0;  // at the center, deep inside
  const double s = f / g;
  return std::clamp(1.0 - s / render.smoothing_width, 0.0, 1.0);
}

/// Default translation box: the ellipse never touches the image border.
inline ParamBox ellipse_default_domain(double a, double b, int img_side) {
  return ParamBox{Eigen::Vector2d(a + 2.0, b + 2.0),
                  Eigen::Vector2d(img_side - a - 3.0, img_side - b - 3.0)};
}

/// Images (img_side x img_side, row-major, N = img_side^2) of an ellipse with
/// semi-axes a (horizontal) and b (vertical) translated to theta = (cx, cy).
inline ParametricManifold make_ellipse_manifold(double a, double b, int img_side,
                                                EllipseRender render = {},
                                                std::optional<ParamBox> domain = std::nullopt) {
  if (!(a > 0.0) || !(b > 0.0)) throw ConfigError("ellipse axes must be positive");
  if (img_side < 16) throw ConfigError("ellipse image side must be >= 16");
  if (!render.binary && !(render.smoothing_width > 0.0))
    throw ConfigError("ellipse smoothing width must be positive");
  const ParamBox box = domain.value_or(ellipse_default_domain(a, b, img_side));
  if (box.dim() != 2) throw ConfigError("ellipse domain must be 2-D");
  const double last = img_side - 1.0;
  if (box.lower(0) - a < 0.0 || box.upper(0) + a > last || box.lower(1) - b < 0.0 ||
      box.upper(1) + b > last || (box.upper.array() < box.lower.array()).any())
    throw ConfigError("ellipse (" + std::to_string(a) + "," + std::to_string(b) +
                      ") leaves the image for some translation in the domain");
  const Index n = static_cast<Index>(img_side) * img_side;
  char name[64];
  std::snprintf(name, sizeof name, "ellipse_%g_%g", a, b);
  return ParametricManifold(name, 2, n, box,
                            [a, b, img_side, render](const Vector& t, Eigen::Ref<Vector> out) {
                              for (int r = 0; r < img_side; ++r)
                                for (int c = 0; c < img_side; ++c)
                                  out(static_cast<Index>(r) * img_side + c) =
                                      ellipse_intensity(a, b, t(0), t(1), c, r, render);
                            });
}

// Sampling -------------------------------------------------------------------

struct SamplingStrategy {
  enum class Kind { Grid, UniformRandom };
  Kind kind = Kind::Grid;
  std::uint64_t seed = 0;

  static SamplingStrategy grid() { return {Kind::Grid, 0}; }
  static SamplingStrategy uniform_random(std::uint64_t seed) { return {Kind::UniformRandom, seed}; }
};

/// Sample parameters: the grid uses cell centers (g per axis, S = g^K);
/// random draws are uniform in the box, one derived stream per sample index.
inline RowMatrix sample_params(const ParamBox& box, SamplingStrategy strategy, Index count) {
  if (count < 1) throw InputError("sample count must be >= 1");
  const Index k = box.dim();
  RowMatrix params(count, k);
  if (strategy.kind == SamplingStrategy::Kind::Grid) {
    const auto per_axis = static_cast<Index>(std::llround(std::pow(static_cast<double>(count), 1.0 / k)));
    Index total = 1;
    for (Index d = 0; d < k; ++d) total *= per_axis;
    if (total != count)
      throw ConfigError("grid sampling needs S to be a perfect K-th power (S=" +
                        std::to_string(count) + ", K=" + std::to_string(k) + ")");
    for (Index i = 0; i < count; ++i) {
      Index rest = i;
      for (Index d = 0; d < k; ++d) {
        const Index node = rest % per_axis;
        rest /= per_axis;
        const double h = (box.upper(d) - box.lower(d)) / static_cast<double>(per_axis);
        params(i, d) = box.lower(d) + (static_cast<double>(node) + 0.5) * h;
      }
    }
  } else {
    for (Index i = 0; i < count; ++i) {
      CounterRng rng(derive_seed(strategy.seed, static_cast<std::uint64_t>(i)));
      for (Index d = 0; d < k; ++d)
        params(i, d) = box.lower(d) + rng.uniform() * (box.upper(d) - box.lower(d));
    }
  }
  return params;
}

inline PointCloud evaluate(const ParametricManifold& m, const RowMatrix& params, int threads = 0) {
  PointCloud cloud;
  cloud.label = m.name();
  cloud.params = params;
  cloud.points.resize(params.rows(), m.ambient_dim());
  parallel_for(params.rows(), threads, [&](std::ptrdiff_t i) {
    cloud.points.row(i) = m(params.row(i).transpose()).transpose();
  });
  return cloud;
}

inline PointCloud sample(const ParametricManifold& m, SamplingStrategy strategy, Index count,
                         int threads = 0) {
  return evaluate(m, sample_params(m.domain(), strategy, count), threads);
}

/// Every component is evaluated at the SAME parameter draws.
inline JointCloud sample_joint(const JointManifoldSpec& spec, SamplingStrategy strategy, Index count,
                               int threads = 0) {
  spec.validate();
  const RowMatrix params = sample_params(spec.components.front().domain(), strategy, count);
  JointCloud jc;
  for (const auto& c : spec.components) jc.components.push_back(evaluate(c, params, threads));
  return jc;
}

/// Orthonormal tangent frames at every sample of a cloud drawn from m.
inline std::vector<RowMatrix> tangent_frames(const ParametricManifold& m, const RowMatrix& params,
                                             int threads = 0, double step = 1e-3) {
  std::vector<RowMatrix> frames(static_cast<std::size_t>(params.rows()));
  parallel_for(params.rows(), threads, [&](std::ptrdiff_t i) {
    frames[static_cast<std::size_t>(i)] = m.tangent_frame(params.row(i).transpose(), step);
  });
  return frames;
}

/// Polyline image of the straight parameter segment from theta1 to theta2.
///
/// For curves (K = 1) and flat parameterizations this is the geodesic; in
/// general it is an upper bound on the geodesic distance.
inline Polyline parameter_path(const ParametricManifold& m, const Vector& theta1,
                               const Vector& theta2, Index vertices = 10000) {
  if (vertices < 2) throw InputError("parameter_path needs at least 2 vertices");
  Polyline line;
  line.vertices.resize(vertices, m.ambient_dim());
  for (Index t = 0; t < vertices; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(vertices - 1);
    line.vertices.row(t) = m((1.0 - s) * theta1 + s * theta2).transpose();
  }
  return line;
}

inline double parameter_geodesic(const ParametricManifold& m, const Vector& theta1,
                                 const Vector& theta2, Index vertices = 10000) {
  return path_length(parameter_path(m, theta1, theta2, vertices));
}

// Noise ----------------------------------------------------------------------

/// Which moment sigma and which power epsilon constrain.
enum class NormConvention {
  /// E||n|| = sigma, ||n|| <= epsilon.
  MeanNorm,
  /// E||n||^2 = sigma^2, ||n||^2 <= epsilon.
  MeanSquaredNorm,
};

/// Bounded-norm isotropic noise: the norm (or squared norm) is epsilon * Beta
/// with mean matched to sigma; direction uniform on the sphere.
struct NoiseModel {
  double sigma = 0.0;
  double epsilon = 1.0;
  std::uint64_t seed = 0;
  NormConvention convention = NormConvention::MeanNorm;
  /// alpha + beta of the Beta law.
  double concentration = 4.0;

  /// Target mean of the bounded quantity divided by its bound.
  double mean_fraction() const {
    return convention == NormConvention::MeanNorm ? sigma / epsilon : sigma * sigma / epsilon;
  }

  void validate() const {
    if (!(sigma >= 0.0) || !(epsilon > 0.0) || !std::isfinite(sigma) || !std::isfinite(epsilon))
      throw ConfigError("noise model needs sigma >= 0 and epsilon > 0");
    if (mean_fraction() > 1.0)
      throw ConfigError(convention == NormConvention::MeanNorm
                            ? "noise model: sigma exceeds epsilon"
                            : "noise model: sigma^2 exceeds epsilon");
    if (!(concentration > 0.0)) throw ConfigError("noise model concentration must be positive");
  }
};

/// One noise vector drawn from the stream (nm.seed, stream).
inline Vector noise_vector(const NoiseModel& nm, Index dim, std::uint64_t stream) {
  Vector n = Vector::Zero(dim);
  const double m = nm.mean_fraction();
  if (m == 0.0) return n;
  CounterRng rng(derive_seed(nm.seed, stream));
  double fraction = 1.0;
  if (m < 1.0) {
    std::gamma_distribution<double> ga(nm.concentration * m, 1.0);
    std::gamma_distribution<double> gb(nm.concentration * (1.0 - m), 1.0);
    const double x = ga(rng), y = gb(rng);
    fraction = (x + y) > 0.0 ? x / (x + y) : m;
  }
  const double norm = nm.convention == NormConvention::MeanNorm ? nm.epsilon * fraction
                                                                : std::sqrt(nm.epsilon * fraction);
  std::normal_distribution<double> normal;
  double len = 0.0;
  while (len == 0.0) {
    for (Index i = 0; i < dim; ++i) n(i) = normal(rng);
    len = n.norm();
  }
  n *= norm / len;
  // keep the hard bound exact under rounding
  const double bound = nm.convention == NormConvention::MeanNorm ? nm.epsilon : std::sqrt(nm.epsilon);
  while (n.norm() > bound) n *= 1.0 - 0x1.0p-52;
  return n;
}

/// count i.i.d. vectors; vector i comes from stream i.
inline std::vector<Vector> draw_noise(const NoiseModel& nm, Index dim, Index count, int threads = 0) {
  nm.validate();
  if (dim < 1) throw InputError("noise dimension must be >= 1");
  std::vector<Vector> out(static_cast<std::size_t>(count));
  parallel_for(count, threads, [&](std::ptrdiff_t i) {
    out[static_cast<std::size_t>(i)] = noise_vector(nm, dim, static_cast<std::uint64_t>(i));
  });
  return out;
}

}  // namespace jointfold
