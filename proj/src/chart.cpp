#include "csub/chart.hpp"

#include <atomic>
#include <cstdio>

namespace csub {

std::string format_coords(const Eigen::VectorXd &v) {
  std::string out = "(";
  char buf[32];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6g", v[i]);
    if (i) out += ", ";
    out += buf;
  }
  return out + ")";
}

DomainError::DomainError(const std::string &what, Eigen::VectorXd where)
    : Error(what + " at " + format_coords(where)), where_(std::move(where)) {}

SingularMatrixError::SingularMatrixError(const std::string &what, Eigen::VectorXd where)
    : Error(what + " at " + format_coords(where)), where_(std::move(where)) {}

NotProjectableError::NotProjectableError(const std::string &what, double spread)
    : Error(what), spread_(spread) {}

ChartId next_chart_id() {
  static std::atomic<std::uint32_t> counter{1};
  return ChartId{counter.fetch_add(1)};
}

ScalarField ScalarField::constant(double value) {
  return ScalarField{[value](const Point &) { return value; },
                     [](const Point &p) { return Vec(Vec::Zero(p.dim())); }};
}

VectorField VectorField::constant(Vec components) {
  return VectorField{[c = std::move(components)](const Point &) { return c; }};
}

VectorField VectorField::coordinate(int dim, int axis) { return constant(unit_vector(dim, axis)); }

MetricField MetricField::euclidean(int dim) {
  return MetricField{[dim](const Point &) { return Mat(Mat::Identity(dim, dim)); }};
}

Point Chart::point(Vec coords) const {
  if (!contains(coords)) throw DomainError("point outside chart '" + label + "'", coords);
  return Point{std::move(coords), id};
}

const MetricField &Chart::require_metric() const {
  if (!metric) throw PreconditionError("chart '" + label + "' carries no metric");
  return *metric;
}

ChartRef make_chart(int dim, std::string label, std::function<bool(const Vec &)> domain,
                    std::optional<MetricField> metric) {
  if (dim < 1) throw PreconditionError("chart dimension must be at least 1");
  auto chart = std::make_shared<Chart>();
  chart->id = next_chart_id();
  chart->dim = dim;
  chart->domain = std::move(domain);
  chart->metric = std::move(metric);
  chart->label = std::move(label);
  return chart;
}

Vec differential(const Chart &chart, const ScalarField &f, const Point &p, double h) {
  if (f.has_gradient()) return f.gradient(p);
  Vec df(chart.dim);
  for (int i = 0; i < chart.dim; ++i) df[i] = fd_directional(chart, f.eval, p, unit_vector(chart.dim, i), h);
  return df;
}

double directional_derivative(const Chart &chart, const ScalarField &f, const Point &p, const Vec &v,
                              double h) {
  if (f.has_gradient()) return f.gradient(p).dot(v);
  return fd_directional(chart, f.eval, p, v, h);
}

Vec lie_bracket(const Chart &chart, const VectorField &X, const VectorField &Y, const Point &p, double h) {
  const Vec x = X(p);
  const Vec y = Y(p);
  Vec bracket = fd_directional(chart, Y.eval, p, x, h);
  bracket -= fd_directional(chart, X.eval, p, y, h);
  return bracket;
}

Mat spd_inverse(const Mat &g, const Point &where) {
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success || !g.allFinite())
    throw SingularMatrixError("metric is not positive definite", where.coords);
  return llt.solve(Mat::Identity(g.rows(), g.cols()));
}

}  // namespace csub
