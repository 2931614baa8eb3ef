#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <type_traits>

#include "csub/errors.hpp"

namespace csub {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default central-difference step. All gallery quantities are O(1).
inline constexpr double kDefaultStep = 1e-4;

struct ChartId {
  std::uint32_t value = 0;
  friend bool operator==(ChartId, ChartId) = default;
};

/// Allocates a fresh process-unique chart id.
ChartId next_chart_id();

struct Point {
  Vec coords;
  ChartId chart;

  Eigen::Index dim() const { return coords.size(); }
};

/// Real-valued field. The analytic gradient, when set, is used in place of
/// finite differences by operations that need dφ.
struct ScalarField {
  std::function<double(const Point &)> eval;
  std::function<Vec(const Point &)> gradient;

  double operator()(const Point &p) const { return eval(p); }
  bool has_gradient() const { return static_cast<bool>(gradient); }

  static ScalarField constant(double value);
};

/// Vector field given by its components in chart coordinates.
struct VectorField {
  std::function<Vec(const Point &)> eval;

  Vec operator()(const Point &p) const { return eval(p); }

  static VectorField constant(Vec components);
  static VectorField coordinate(int dim, int axis);
};

/// Symmetric positive-definite matrix field.
struct MetricField {
  std::function<Mat(const Point &)> eval;

  Mat operator()(const Point &p) const { return eval(p); }

  static MetricField euclidean(int dim);
};

/// A single global coordinate chart on a manifold.
struct Chart {
  ChartId id;
  int dim = 0;
  std::function<bool(const Vec &)> domain;
  std::optional<MetricField> metric;
  std::string label;

  bool contains(const Vec &coords) const {
    return coords.size() == dim && coords.allFinite() && (!domain || domain(coords));
  }
  bool contains(const Point &p) const { return contains(p.coords); }

  /// Builds a point on this chart; throws DomainError outside the domain.
  Point point(Vec coords) const;

  const MetricField &require_metric() const;
};

using ChartRef = std::shared_ptr<const Chart>;

ChartRef make_chart(int dim, std::string label, std::function<bool(const Vec &)> domain = {},
                    std::optional<MetricField> metric = std::nullopt);

inline Vec unit_vector(int dim, int axis) {
  Vec e = Vec::Zero(dim);
  e[axis] = 1.0;
  return e;
}

/// Central difference (f(p + h dir) - f(p - h dir)) / (2h).
template <class F>
auto fd_directional(const Chart &chart, const F &f, const Point &p, const Vec &dir, double h)
    -> std::decay_t<decltype(f(p))> {
  if (!(h > 0.0)) throw PreconditionError("fd_directional: step must be positive");
  Point plus{p.coords + h * dir, p.chart};
  Point minus{p.coords - h * dir, p.chart};
  if (!chart.contains(plus)) throw DomainError("+h stencil point left the chart domain", plus.coords);
  if (!chart.contains(minus)) throw DomainError("-h stencil point left the chart domain", minus.coords);
  using R = std::decay_t<decltype(f(p))>;
  R up = f(plus);
  R down = f(minus);
  return R((up - down) / (2.0 * h));
}

/// Coordinate gradient of f at p (analytic when the field supplies one).
Vec differential(const Chart &chart, const ScalarField &f, const Point &p, double h = kDefaultStep);

/// Derivative of f along the vector v at p.
double directional_derivative(const Chart &chart, const ScalarField &f, const Point &p, const Vec &v,
                              double h = kDefaultStep);

/// [X,Y]^k = X^j d_j Y^k - Y^j d_j X^k.
Vec lie_bracket(const Chart &chart, const VectorField &X, const VectorField &Y, const Point &p,
                double h = kDefaultStep);

/// Symmetric positive-definite inverse via Cholesky; throws SingularMatrixError with the point.
Mat spd_inverse(const Mat &g, const Point &where);

}  // namespace csub
