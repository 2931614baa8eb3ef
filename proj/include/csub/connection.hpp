#pragma once

#include <functional>
#include <vector>

#include "csub/chart.hpp"

namespace csub {

/// Christoffel symbols Γ^k_{ij} at one point, stored k-major.
class Christoffel {
 public:
  Christoffel() = default;
  explicit Christoffel(int dim) : dim_(dim), data_(static_cast<std::size_t>(dim * dim * dim), 0.0) {}

  int dim() const { return dim_; }
  double &operator()(int k, int i, int j) { return data_[index(k, i, j)]; }
  double operator()(int k, int i, int j) const { return data_[index(k, i, j)]; }

  /// Γ^k_{ij} x^i y^j.
  Vec contract(const Vec &x, const Vec &y) const;

  double max_abs_difference(const Christoffel &other) const;

  Christoffel &operator+=(const Christoffel &other);
  friend Christoffel operator+(Christoffel a, const Christoffel &b) { return a += b; }

 private:
  std::size_t index(int k, int i, int j) const {
    return static_cast<std::size_t>((k * dim_ + i) * dim_ + j);
  }
  int dim_ = 0;
  std::vector<double> data_;
};

/// Affine connection on a chart, represented by its Christoffel field.
struct ConnectionField {
  ChartRef chart;
  std::function<Christoffel(const Point &)> christoffel;

  Christoffel at(const Point &p) const { return christoffel(p); }
  int dim() const { return chart->dim; }

  /// Γ ≡ 0 in the chart coordinates.
  static ConnectionField flat(ChartRef chart);
  /// Constant Christoffel array.
  static ConnectionField constant(ChartRef chart, Christoffel gamma);
};

/// (∇_X Y)^k = X^i d_i Y^k + Γ^k_{ij} X^i Y^j at p.
Vec covariant_derivative(const ConnectionField &nabla, const VectorField &X, const VectorField &Y, const Point &p,
                         double h = kDefaultStep);

/// Same, with the direction given as a tangent vector at p.
Vec covariant_derivative(const ConnectionField &nabla, const Vec &x, const VectorField &Y, const Point &p,
                         double h = kDefaultStep);

/// The field q ↦ ∇_X Y (q), evaluated with a fresh stencil per point.
VectorField covariant_derivative_field(const ConnectionField &nabla, VectorField X, VectorField Y,
                                       double h = kDefaultStep);

/// Levi-Civita connection of g by the Christoffel formula on finite-differenced metric derivatives.
ConnectionField levi_civita(ChartRef chart, MetricField g, double h = kDefaultStep);

/// Metric partials: element l is ∂_l g.
using MetricDerivative = std::function<std::vector<Mat>(const Point &)>;

/// Levi-Civita connection from analytic metric partials.
ConnectionField levi_civita(ChartRef chart, MetricField g, MetricDerivative dg);

/// Connection Γ̄ paired with ∇ through X g(Y,Z) = g(∇_X Y, Z) + g(Y, ∇̄_X Z).
ConnectionField dual_connection(MetricField g, ConnectionField nabla, double h = kDefaultStep);

/// ∇_X Y − ∇_Y X − [X,Y] at p.
Vec torsion(const ConnectionField &nabla, const VectorField &X, const VectorField &Y, const Point &p,
            double h = kDefaultStep);

/// R(E,F)G = ∇_{[E,F]}G − ∇_E ∇_F G + ∇_F ∇_E G.
///
/// This is the negative of the more common ∇∇ − ∇∇ − ∇_[,] convention; every
/// curvature-derived residual in the library uses the same sign. Inner
/// derivatives are re-evaluated by finite differences at each outer stencil
/// point, so the truncation error is O(h) in the worst case.
Vec curvature(const ConnectionField &nabla, const VectorField &E, const VectorField &F, const VectorField &G,
              const Point &p, double h = kDefaultStep);

/// Receives warnings about tolerances that the stacked stencil error cannot meet.
void set_warning_sink(std::function<void(const std::string &)> sink);
void warn(const std::string &message);

/// Emits a warning when nested central differences at step h cannot resolve `tolerance`.
bool check_nested_step(double h, double tolerance);

}  // namespace csub
