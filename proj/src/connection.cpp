#include "csub/connection.hpp"

#include <cmath>
#include <cstdio>
#include <mutex>

namespace csub {

Vec Christoffel::contract(const Vec &x, const Vec &y) const {
  Vec out = Vec::Zero(dim_);
  for (int k = 0; k < dim_; ++k) {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) {
      if (x[i] == 0.0) continue;
      for (int j = 0; j < dim_; ++j) acc += (*this)(k, i, j) * x[i] * y[j];
    }
    out[k] = acc;
  }
  return out;
}

double Christoffel::max_abs_difference(const Christoffel &other) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) worst = std::max(worst, std::abs(data_[i] - other.data_[i]));
  return worst;
}

Christoffel &Christoffel::operator+=(const Christoffel &other) {
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ConnectionField ConnectionField::flat(ChartRef chart) {
  const int n = chart->dim;
  return ConnectionField{std::move(chart), [n](const Point &) { return Christoffel(n); }};
}

ConnectionField ConnectionField::constant(ChartRef chart, Christoffel gamma) {
  return ConnectionField{std::move(chart), [gamma = std::move(gamma)](const Point &) { return gamma; }};
}

Vec covariant_derivative(const ConnectionField &nabla, const Vec &x, const VectorField &Y, const Point &p,
                         double h) {
  Vec out = fd_directional(*nabla.chart, Y.eval, p, x, h);
  out += nabla.at(p).contract(x, Y(p));
  return out;
}

Vec covariant_derivative(const ConnectionField &nabla, const VectorField &X, const VectorField &Y, const Point &p,
                         double h) {
  return covariant_derivative(nabla, X(p), Y, p, h);
}

VectorField covariant_derivative_field(const ConnectionField &nabla, VectorField X, VectorField Y, double h) {
  return VectorField{[nabla, X = std::move(X), Y = std::move(Y), h](const Point &q) {
    return covariant_derivative(nabla, X, Y, q, h);
  }};
}

namespace {

Christoffel christoffel_from_partials(const Mat &g, const std::vector<Mat> &dg, const Point &p) {
  const int n = static_cast<int>(g.rows());
  const Mat ginv = spd_inverse(g, p);
  // lowered[l] = ½ (∂_i g_jl + ∂_j g_il − ∂_l g_ij)
  Christoffel gamma(n);
  std::vector<double> lowered(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      for (int l = 0; l < n; ++l) lowered[l] = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        for (int l = 0; l < n; ++l) acc += ginv(k, l) * lowered[l];
        gamma(k, i, j) = acc;
        gamma(k, j, i) = acc;
      }
    }
  }
  return gamma;
}

}  // namespace

ConnectionField levi_civita(ChartRef chart, MetricField g, double h) {
  const int n = chart->dim;
  auto christoffel = [chart, g = std::move(g), h, n](const Point &p) {
    std::vector<Mat> dg;
    dg.reserve(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) dg.push_back(fd_directional(*chart, g.eval, p, unit_vector(n, l), h));
    return christoffel_from_partials(g(p), dg, p);
  };
  return ConnectionField{chart, std::move(christoffel)};
}

ConnectionField levi_civita(ChartRef chart, MetricField g, MetricDerivative dg) {
  auto christoffel = [g = std::move(g), dg = std::move(dg)](const Point &p) {
    return christoffel_from_partials(g(p), dg(p), p);
  };
  return ConnectionField{std::move(chart), std::move(christoffel)};
}

ConnectionField dual_connection(MetricField g, ConnectionField nabla, double h) {
  const ChartRef chart = nabla.chart;
  const int n = chart->dim;
  auto christoffel = [chart, g = std::move(g), nabla = std::move(nabla), h, n](const Point &p) {
    const Mat gp = g(p);
    const Mat ginv = spd_inverse(gp, p);
    const Christoffel gamma = nabla.at(p);
    Christoffel dual(n);
    for (int i = 0; i < n; ++i) {
      const Mat dgi = fd_directional(*chart, g.eval, p, unit_vector(n, i), h);
      // rhs(j,k) = d_i g_jk − Γ^l_{ij} g_lk
      Mat rhs = dgi;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int l = 0; l < n; ++l) acc += gamma(l, i, j) * gp(l, k);
          rhs(j, k) -= acc;
        }
      // Γ̄^m_{ik} = g^{mj} rhs(j,k)
      const Mat solved = ginv * rhs;
      for (int m = 0; m < n; ++m)
        for (int k = 0; k < n; ++k) dual(m, i, k) = solved(m, k);
    }
    return dual;
  };
  return ConnectionField{chart, std::move(christoffel)};
}

Vec torsion(const ConnectionField &nabla, const VectorField &X, const VectorField &Y, const Point &p, double h) {
  const Vec x = X(p);
  const Vec y = Y(p);
  // The stencil derivatives cancel against the bracket; only the
  // antisymmetric Christoffel part survives, up to roundoff.
  Vec out = covariant_derivative(nabla, x, Y, p, h) - covariant_derivative(nabla, y, X, p, h);
  out -= lie_bracket(*nabla.chart, X, Y, p, h);
  return out;
}

Vec curvature(const ConnectionField &nabla, const VectorField &E, const VectorField &F, const VectorField &G,
              const Point &p, double h) {
  const VectorField nabla_F_G = covariant_derivative_field(nabla, F, G, h);
  const VectorField nabla_E_G = covariant_derivative_field(nabla, E, G, h);
  const Vec bracket = lie_bracket(*nabla.chart, E, F, p, h);
  Vec out = covariant_derivative(nabla, bracket, G, p, h);
  out -= covariant_derivative(nabla, E, nabla_F_G, p, h);
  out += covariant_derivative(nabla, F, nabla_E_G, p, h);
  return out;
}

namespace {
std::mutex warning_mutex;
std::function<void(const std::string &)> &warning_sink() {
  static std::function<void(const std::string &)> sink = [](const std::string &msg) {
    std::fprintf(stderr, "csub warning: %s\n", msg.c_str());
  };
  return sink;
}
}  // namespace

void set_warning_sink(std::function<void(const std::string &)> sink) {
  std::lock_guard lock(warning_mutex);
  warning_sink() = std::move(sink);
}

void warn(const std::string &message) {
  std::lock_guard lock(warning_mutex);
  if (warning_sink()) warning_sink()(message);
}

bool check_nested_step(double h, double tolerance) {
  // Two stacked O(h²) stencils with O(1) fields; first-order worst case.
  const double estimate = h * h;
  if (estimate <= tolerance) return true;
  char buf[160];
  std::snprintf(buf, sizeof buf, "nested stencil error ~%.1e at step %.1e exceeds tolerance %.1e", estimate, h,
                tolerance);
  warn(buf);
  return false;
}

}  // namespace csub
