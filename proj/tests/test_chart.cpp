#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "csub/chart.hpp"

using namespace csub;
using testing::Vec2;

namespace {

ChartRef plane() { return make_chart(2, "R2"); }
ChartRef upper_half() {
  return make_chart(2, "H2", [](const Vec &c) { return c[1] > 0.0; });
}

}  // namespace

TEST_CASE("directional derivative of x^2 is exact on the symmetric stencil") {
  const ChartRef c = plane();
  const ScalarField f{[](const Point &p) { return p.coords[0] * p.coords[0]; }, {}};
  const Point p = c->point(Vec2(3.0, 0.0));
  CHECK(directional_derivative(*c, f, p, Vec2(1.0, 0.0), 1e-4) == doctest::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("constant field has zero derivative") {
  const ChartRef c = plane();
  const ScalarField f = ScalarField::constant(4.2);
  for (double x : {-1.0, 0.3, 5.0}) {
    const Point p = c->point(Vec2(x, 2.0 * x));
    CHECK(directional_derivative(*c, f, p, Vec2(0.7, -1.3)) == 0.0);
  }
}

TEST_CASE("derivative of 1/y at y = 2") {
  const ChartRef c = upper_half();
  const ScalarField f{[](const Point &p) { return 1.0 / p.coords[1]; }, {}};
  const double d = directional_derivative(*c, f, c->point(Vec2(0.0, 2.0)), Vec2(0.0, 1.0), 1e-4);
  CHECK(std::abs(d - (-0.25)) <= 1e-8);
}

TEST_CASE("analytic gradient agrees with central differences") {
  const ChartRef c = plane();
  const ScalarField with{[](const Point &p) { return std::sin(p.coords[0]) * std::exp(p.coords[1]); },
                         [](const Point &p) {
                           return Vec(Vec2(std::cos(p.coords[0]) * std::exp(p.coords[1]),
                                           std::sin(p.coords[0]) * std::exp(p.coords[1])));
                         }};
  const ScalarField without{with.eval, {}};
  const Point p = c->point(Vec2(0.4, -0.2));
  CHECK((differential(*c, with, p) - differential(*c, without, p)).norm() <= 1e-7);
}

TEST_CASE("stencil leaving the domain raises DomainError with the point") {
  const ChartRef c = upper_half();
  const ScalarField f{[](const Point &p) { return std::log(p.coords[1]); }, {}};
  const Point p = c->point(Vec2(0.0, 0.5e-4));
  try {
    directional_derivative(*c, f, p, Vec2(0.0, 1.0), 1e-4);
    FAIL("expected DomainError");
  } catch (const DomainError &e) {
    CHECK(e.where().size() == 2);
    CHECK(e.numerical());
  }
  CHECK_THROWS_AS(c->point(Vec2(0.0, -1.0)), DomainError);
}

TEST_CASE("non-positive step is rejected") {
  const ChartRef c = plane();
  CHECK_THROWS_AS(directional_derivative(*c, ScalarField{[](const Point &) { return 1.0; }, {}}, c->point(Vec2(0, 0)), Vec2(1, 0), 0.0),
                  PreconditionError);
}

TEST_CASE("lie bracket examples") {
  const ChartRef c = plane();
  const Point p = c->point(Vec2(0.0, 2.0));
  CHECK(lie_bracket(*c, VectorField::coordinate(2, 0), VectorField::coordinate(2, 1), p).norm() <= 1e-12);
  const VectorField X{[](const Point &q) { return Vec(Vec2(q.coords[1], 0.0)); }};
  const VectorField Y = VectorField::coordinate(2, 1);
  // X^j ∂_j Y − Y^j ∂_j X = 0 − ∂_y (y, 0) = (−1, 0)
  CHECK((lie_bracket(*c, Y, X, p) - Vec2(1.0, 0.0)).norm() <= 1e-7);
  CHECK((lie_bracket(*c, X, Y, p) - Vec2(-1.0, 0.0)).norm() <= 1e-7);
  const VectorField Z{[](const Point &q) { return Vec(Vec2(std::sin(q.coords[1]), q.coords[0] * q.coords[1])); }};
  CHECK(lie_bracket(*c, Z, Z, p).norm() <= 1e-9);
}

TEST_CASE("bracket is antisymmetric on random smooth fields") {
  const ChartRef c = plane();
  const VectorField X{[](const Point &q) { return Vec(Vec2(std::cos(q.coords[0] * q.coords[1]), q.coords[0])); }};
  const VectorField Y{[](const Point &q) { return Vec(Vec2(q.coords[1] * q.coords[1], std::exp(-q.coords[0]))); }};
  for (double t : {-0.7, 0.1, 0.9}) {
    const Point p = c->point(Vec2(t, 1.0 - t));
    CHECK((lie_bracket(*c, X, Y, p) + lie_bracket(*c, Y, X, p)).norm() <= 1e-9);
  }
}

TEST_CASE("spd_inverse reports singular matrices") {
  Mat g = Mat::Identity(2, 2);
  g(1, 1) = 0.0;
  CHECK_THROWS_AS(spd_inverse(g, Point{Vec2(1.0, 2.0), {}}), SingularMatrixError);
  Mat a(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  CHECK((spd_inverse(a, Point{Vec2(0, 0), {}}) * a - Mat::Identity(2, 2)).norm() <= 1e-14);
}
