#include <doctest.h>

#include <cmath>
#include <sstream>

#include "common.hpp"
#include "csub/gallery.hpp"
#include "csub/geodesic.hpp"
#include "oracles.hpp"

using namespace csub;
using testing::vec;
using testing::Vec2;

namespace {

Point at(const GeometryBundle &b, Vec c) { return Point{std::move(c), b.S.source->id}; }

CurveContext context(const GeometryBundle &b) { return CurveContext{b.S, b.nabla_m, b.nabla_b, b.phi}; }

double vertical_endpoint_error(int steps) {
  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord c = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(0, 1), 1.0, steps);
  return std::abs(c.points.back().coords[1] - oracle::h2_vertical_y(2.0, 1.0, 1.0));
}

}  // namespace

TEST_CASE("straight line in the plane") {
  const GeometryBundle f = make_flat_product(2, 1);
  const CurveRecord c = geodesic_ivp(f.nabla_m, at(f, Vec2(0, 0)), Vec2(1, 2), 1.0, 10);
  REQUIRE(c.complete());
  CHECK(c.size() == 11);
  CHECK((c.points.back().coords - Vec2(1, 2)).norm() <= 1e-12);
}

TEST_CASE("vertical geodesic of H2") {
  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord c = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(0, 1), 1.0, 1000);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(c.points[i].coords[0]) <= 1e-10);
    CHECK(std::abs(c.points[i].coords[1] - oracle::h2_vertical_y(2.0, 1.0, c.times[i])) <= 1e-10);
  }
}

TEST_CASE("RK4 order on the vertical geodesic") {
  const double e1 = vertical_endpoint_error(100), e2 = vertical_endpoint_error(200), e3 = vertical_endpoint_error(400);
  const double s1 = std::log2(e1 / e2), s2 = std::log2(e2 / e3);
  CHECK(std::abs(s1 - 4.0) <= 0.3);
  CHECK(std::abs(s2 - 4.0) <= 0.3);
}

TEST_CASE("semicircle geodesic of H2") {
  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord c = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(1, 0), 1.0, 1000);
  REQUIRE(c.complete());
  double drift = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec &q = c.points[i].coords;
    CHECK(std::abs(q.squaredNorm() - 4.0) <= 1e-6);
    const Vec &v = c.velocities[i];
    drift = std::max(drift, std::abs(oracle::h2_circle_center(q[0], q[1], v[0], v[1])));
  }
  CHECK(drift <= 1e-6);
}

TEST_CASE("domain exit ends the record with a halt") {
  const GeometryBundle h = make_hyperbolic_halfspace(2);
  // Straight lines of the flat connection reach y = 0 in finite time.
  const ConnectionField flat = ConnectionField::flat(h.S.source);
  const CurveRecord c = geodesic_ivp(flat, at(h, Vec2(0, 1)), Vec2(0, -1), 2.0, 100, GeodesicOptions{std::nullopt});
  REQUIRE_FALSE(c.complete());
  CHECK(c.halt->time <= 1.0 + 1e-12);
  CHECK(c.size() >= 2);
  for (const Point &p : c.points) CHECK(p.coords[1] > 0.0);
}

TEST_CASE("covariant derivative along curves") {
  const GeometryBundle f = make_flat_product(3, 2);
  const CurveRecord line = geodesic_ivp(f.nabla_m, at(f, vec({0, 0, 0})), vec({0.3, 0.1, -0.2}), 1.0, 50);
  const AlongCurveField constant = AlongCurveField::sample(line, VectorField::constant(vec({1, 2, 3})));
  CHECK(covariant_along_curve(f.nabla_m, line, constant, 10).norm() == 0.0);
  CHECK_THROWS_AS(covariant_along_curve(f.nabla_m, line, constant, 0), UnsupportedError);
  CHECK_THROWS_AS(covariant_along_curve(f.nabla_m, line, constant, line.size() - 1), UnsupportedError);

  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord g = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 1.5)), Vec2(0.4, 0.3), 1.0, 500);
  const AlongCurveField vel = AlongCurveField::velocity(g);
  for (std::size_t i = 1; i + 1 < g.size(); i += 50) CHECK(covariant_along_curve(h.nabla_m, g, vel, i).norm() <= 1e-6);

  // ∂_x along the vertical geodesic: (∇_σ′ ∂_x) = −(y′/y) ∂_x.
  const CurveRecord v = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(0, 1), 0.2, 200);
  const AlongCurveField ex = AlongCurveField::sample(v, VectorField::coordinate(2, 0));
  for (std::size_t i = 1; i + 1 < v.size(); i += 37) {
    const double y = v.points[i].coords[1], yp = v.velocities[i][1];
    CHECK((covariant_along_curve(h.nabla_m, v, ex, i) - Vec2(-yp / y, 0)).norm() <= 1e-5);
  }
}

TEST_CASE("decomposition along curves") {
  const GeometryBundle f = make_flat_product(3, 2);
  const CurveRecord c = geodesic_ivp(f.nabla_m, at(f, vec({0, 0, 0})), vec({0.3, 0.1, -0.2}), 1.0, 50);
  const AlongCurveField E = AlongCurveField::sample(c, random_field(3, 3));
  const AlongCurveField U = AlongCurveField::sample(c, VectorField::constant(vec({0, 0, 1})));
  for (std::size_t i = 1; i + 1 < c.size(); i += 7) {
    CHECK(decomposition_residual_h(context(f), c, E, i).norm() <= 1e-6);
    CHECK(decomposition_residual_v(context(f), c, E, i).norm() <= 1e-6);
    CHECK(decomposition_residual_v(context(f), c, U, i).norm() <= 1e-6);
  }

  // A generic E along a curve in a random bundle, not just the velocity.
  const GeometryBundle r = make_random_conformal(2, 3, 2);
  const CurveRecord rc = geodesic_ivp(r.nabla_m, r.sample_points(1)[0], vec({0.2, -0.1, 0.15}), 0.5, 400);
  const AlongCurveField F = AlongCurveField::sample(rc, random_field(8, 3));
  for (std::size_t i = 20; i + 20 < rc.size(); i += 90) {
    CHECK(decomposition_residual_h(context(r), rc, F, i).norm() <= 1e-4);
    CHECK(decomposition_residual_v(context(r), rc, F, i).norm() <= 1e-4);
  }
}

TEST_CASE("sigma'' decomposition on random H2 and H3 geodesics") {
  for (int n : {2, 3}) {
    const GeometryBundle h = make_hyperbolic_halfspace(n);
    const std::vector<Point> starts = h.sample_points(5);
    for (std::size_t k = 0; k < starts.size(); ++k) {
      const Vec v0 = 0.5 * random_field(k + 1, n)(starts[k]).normalized();
      const CurveRecord c = geodesic_ivp(h.nabla_m, starts[k], v0, 0.3, 300);
      REQUIRE(c.complete());
      for (std::size_t i = 10; i + 10 < c.size(); i += 70) {
        const auto [hr, vr] = sigma_dd_residuals(context(h), c, i);
        CHECK(hr.residual <= 1e-4);
        CHECK(vr.residual <= 1e-4);
      }
    }
  }
}

TEST_CASE("projection criterion examples") {
  const GeometryBundle f = make_flat_product(3, 2);
  const CurveRecord line = geodesic_ivp(f.nabla_m, at(f, vec({0, 0, 0})), vec({0.3, 0.1, -0.2}), 1.0, 50);
  const ProjectionCheck fl = projection_condition(context(f), line, 25);
  CHECK(fl.condition.residual <= 1e-6);
  CHECK(fl.projected_defect <= 1e-6);
  CHECK(fl.projection_geodesic);
  CHECK(fl.agree);

  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord vert = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(0, 1), 0.5, 200);
  const ProjectionCheck vc = projection_condition(context(h), vert, 100);
  CHECK(vc.condition.residual <= 1e-8);
  CHECK(vc.projected_defect <= 1e-8);
  CHECK(vc.agree);

  // Semicircle: X = a ∂_x, U = b ∂_y, A_X U = −(ab/y) ∂_x, so the residual is 2|ab|/y.
  const CurveRecord semi = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(1, 0), 1.0, 1000);
  for (std::size_t i : {200u, 500u, 800u}) {
    const ProjectionCheck sc = projection_condition(context(h), semi, i);
    const double a = semi.velocities[i][0], b = semi.velocities[i][1], y = semi.points[i].coords[1];
    CHECK(sc.condition.residual == doctest::Approx(2.0 * std::abs(a * b) / y).epsilon(1e-6));
    CHECK(sc.condition.residual > 1e-4);
    CHECK(sc.projected_defect > 1e-4);
    CHECK_FALSE(sc.condition_holds);
    CHECK_FALSE(sc.projection_geodesic);
    CHECK(sc.agree);
  }

  const CurveRecord not_geodesic = geodesic_ivp(ConnectionField::flat(h.S.source), at(h, Vec2(0, 2)), Vec2(1, 1), 0.5,
                                                100, GeodesicOptions{std::nullopt});
  CHECK_THROWS_AS(projection_condition(context(h), not_geodesic, 50), PreconditionError);
}

TEST_CASE("projected sigma'' equals minus the criterion vector") {
  const GeometryBundle r = make_random_conformal(3, 3, 2);
  const CurveRecord c = geodesic_ivp(r.nabla_m, r.sample_points(2)[1], vec({0.1, 0.25, -0.2}), 0.4, 400);
  for (std::size_t i = 50; i + 50 < c.size(); i += 100) {
    const ProjectionCheck pc = projection_condition(context(r), c, i);
    CHECK(std::abs(pc.condition.residual - pc.projected_defect) <= 1e-4);
  }
}

TEST_CASE("horizontal lifts of base curves") {
  const GeometryBundle f = make_flat_product(3, 2);
  const BaseCurve line = [&](double t) {
    return std::pair{Point{Vec2(0.1 + 0.3 * t, -0.2 + 0.5 * t), f.S.target->id}, Vec(Vec2(0.3, 0.5))};
  };
  const CurveRecord fl = horizontal_lift_curve(f.S, line, at(f, vec({0.1, -0.2, 0.7})), LiftOptions{0.0, 1.0, 100});
  CHECK((fl.points.back().coords - vec({0.4, 0.3, 0.7})).norm() <= 1e-12);

  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const BaseCurve unit = [&](double t) { return std::pair{Point{vec({t}), h.S.target->id}, Vec(vec({1.0}))}; };
  const CurveRecord hl = horizontal_lift_curve(h.S, unit, at(h, Vec2(0, 2)), LiftOptions{0.0, 1.0, 100});
  for (std::size_t i = 0; i < hl.size(); ++i) CHECK((hl.points[i].coords - Vec2(hl.times[i], 2)).norm() <= 1e-9);
  CHECK(lift_drift(h.S, hl, unit) <= 1e-12);

  CHECK_THROWS_AS(horizontal_lift_curve(h.S, unit, at(h, Vec2(0.5, 2)), LiftOptions{}), PreconditionError);

  // Time change: lifting α∘θ with θ(s) = s² traces the lift of α at θ(s).
  const GeometryBundle r = make_random_conformal(6, 3, 1);
  const Point p0 = r.sample_points(1)[0];
  const double a0 = p0.coords[0];
  const BaseCurve alpha = [&](double t) {
    return std::pair{Point{vec({a0 + 0.4 * std::sin(t)}), r.S.target->id}, Vec(vec({0.4 * std::cos(t)}))};
  };
  const BaseCurve reparam = [&](double s) {
    const auto [q, v] = alpha(s * s);
    return std::pair{q, Vec(2.0 * s * v)};
  };
  const CurveRecord l1 = horizontal_lift_curve(r.S, alpha, p0, LiftOptions{0.0, 1.0, 400});
  const CurveRecord l2 = horizontal_lift_curve(r.S, reparam, p0, LiftOptions{0.0, 1.0, 400});
  CHECK((l1.points.back().coords - l2.points.back().coords).norm() <= 1e-6);
  CHECK(lift_drift(r.S, l1, alpha) <= 1e-9);
}

TEST_CASE("lift round trip converges at fourth order") {
  const GeometryBundle r = make_random_conformal(7, 3, 2);
  const Point p0 = r.sample_points(1)[0];
  const Vec b0 = p0.coords.head(2);
  const BaseCurve alpha = [&](double t) {
    return std::pair{Point{Vec(b0 + Vec2(0.3 * std::sin(2 * t), 0.2 * t * t)), r.S.target->id},
                     Vec(Vec2(0.6 * std::cos(2 * t), 0.4 * t))};
  };
  const double e1 = (horizontal_lift_curve(r.S, alpha, p0, LiftOptions{0.0, 1.0, 10}).points.back().coords -
                     horizontal_lift_curve(r.S, alpha, p0, LiftOptions{0.0, 1.0, 640}).points.back().coords)
                        .norm();
  const double e2 = (horizontal_lift_curve(r.S, alpha, p0, LiftOptions{0.0, 1.0, 20}).points.back().coords -
                     horizontal_lift_curve(r.S, alpha, p0, LiftOptions{0.0, 1.0, 640}).points.back().coords)
                        .norm();
  CHECK(std::log2(e1 / e2) > 3.5);
}

TEST_CASE("lift geodesic check") {
  const GeometryBundle flat = make_flat_product(3, 2);
  const CurveRecord fa = geodesic_ivp(flat.nabla_b, Point{Vec2(0, 0), flat.S.target->id}, Vec2(0.3, 0.2), 1.0, 100);
  const LiftCheck fc = lift_geodesic_check(context(flat), fa, at(flat, vec({0, 0, 0.4})));
  CHECK(fc.applicable);
  CHECK(fc.defect.residual <= 1e-7);
  CHECK(fc.condition.residual <= 1e-7);
  CHECK(fc.agree);

  const GeometryBundle c = make_warped_line(Profile::constant(0.3));
  const CurveRecord ca = geodesic_ivp(c.nabla_b, Point{vec({-0.5}), c.S.target->id}, vec({1.0}), 1.0, 200);
  const LiftCheck cc = lift_geodesic_check(context(c), ca, at(c, Vec2(-0.5, 0.2)));
  CHECK(cc.applicable);
  CHECK(cc.defect.residual <= 1e-6);
  CHECK(cc.condition.residual <= 1e-6);
  CHECK(cc.agree);

  // ψ = x: the lift of x(t) = x0 + t is (x0 + t, y0) with σ″ = ψ′ (x′)² ∂_x ≠ 0.
  const GeometryBundle w = make_warped_line(Profile::linear(1.0));
  const CurveRecord wa = geodesic_ivp(w.nabla_b, Point{vec({-0.5}), w.S.target->id}, vec({1.0}), 1.0, 200);
  const LiftCheck wc = lift_geodesic_check(context(w), wa, at(w, Vec2(-0.5, 0.2)));
  CHECK(wc.applicable);
  CHECK(wc.hypothesis_norm <= 1e-7);
  CHECK(wc.defect.residual == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(wc.condition.residual == doctest::Approx(1.0).epsilon(1e-5));
  CHECK_FALSE(wc.defect.pass);
  CHECK_FALSE(wc.condition.pass);
  CHECK(wc.agree);

  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord ha = geodesic_ivp(h.nabla_b, Point{vec({0.0}), h.S.target->id}, vec({1.0}), 1.0, 100);
  const LiftCheck hc = lift_geodesic_check(context(h), ha, at(h, Vec2(0, 2)));
  CHECK_FALSE(hc.applicable);
  CHECK(hc.hypothesis_norm >= 0.2);
  CHECK(hc.defect.note.find("inapplicable") != std::string::npos);
}

TEST_CASE("warped line satisfies the lift hypothesis everywhere") {
  for (const Profile &psi : {Profile::constant(0.3), Profile::linear(1.0), Profile::linear(-0.4, 0.2)}) {
    const GeometryBundle w = make_warped_line(psi);
    const VectorField Z = horizontal_lift(w.S, VectorField::constant(vec({1.0})));
    for (const Point &p : w.sample_points(10)) CHECK(tensor_A(w.S, w.nabla_m, Z, Z, p).norm() <= 1e-7);
  }
}

TEST_CASE("curve CSV round trip") {
  const GeometryBundle h = make_hyperbolic_halfspace(2);
  const CurveRecord c = geodesic_ivp(h.nabla_m, at(h, Vec2(0, 2)), Vec2(0.3, 0.1), 0.5, 20);
  std::stringstream s;
  write_curve_csv(s, c);
  std::string header;
  std::getline(std::stringstream(s.str()), header);
  CHECK(header == "t,x1,x2,v1,v2");
  const CurveRecord back = read_curve_csv(s, h.S.source);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(back.times[i] == c.times[i]);
    CHECK(back.points[i].coords == c.points[i].coords);
    CHECK(back.velocities[i] == c.velocities[i]);
  }
  std::stringstream bad("t,x1\n0,1\n");
  CHECK_THROWS_AS(read_curve_csv(bad, h.S.source), DegenerateInputError);
  const auto j = curve_to_json(c);
  CHECK(j["times"].size() == c.size());
}
