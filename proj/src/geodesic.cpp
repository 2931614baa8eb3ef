#include "csub/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace csub {

namespace {

void require_interior(const CurveRecord &curve, std::size_t i) {
  if (i == 0 || i + 1 >= curve.size())
    throw UnsupportedError("curve derivative requested at an endpoint (index " + std::to_string(i) + ")");
}

/// dF/dt + Γ(σ′, F) at interior sample i, for F given per sample index.
template <class F>
Vec derivative_along(const ConnectionField &nabla, const Point &at, const Vec &velocity, double dt, F &&value,
                     std::size_t i) {
  const Vec here = value(i);
  Vec out = (value(i + 1) - value(i - 1)) / dt;
  out += nabla.at(at).contract(velocity, here);
  return out;
}

struct Frame {
  Splitting sp;
  Point base;
  Vec X, U;
  Vec dphi, grad;
  double conformal = 1.0;
  Mat gb;
};

Frame frame_at(const CurveContext &ctx, const Point &p, const Vec &velocity) {
  Frame f{split(ctx.S, p), ctx.S(p), {}, {}, {}, {}, 1.0, {}};
  f.X = f.sp.horizontal * velocity;
  f.U = f.sp.vertical * velocity;
  f.dphi = differential(*ctx.S.source, ctx.phi, p, ctx.h);
  f.grad = spd_inverse(f.sp.metric, p) * f.dphi;
  f.conformal = std::exp(2.0 * ctx.phi(p));
  f.gb = ctx.S.target->require_metric()(f.base);
  return f;
}

Vec T_at(const CurveContext &ctx, const Vec &e, const Vec &f, const Point &p) {
  return tensor_T(ctx.S, ctx.nabla, VectorField::constant(e), VectorField::constant(f), p, ctx.h);
}

Vec A_at(const CurveContext &ctx, const Vec &e, const Vec &f, const Point &p) {
  return tensor_A(ctx.S, ctx.nabla, VectorField::constant(e), VectorField::constant(f), p, ctx.h);
}

/// 2X(φ)π_*X − π_*(grad φ)|X|² at one sample.
Vec lift_condition_vector(const Frame &f) {
  const Mat &J = f.sp.differential;
  return 2.0 * f.dphi.dot(f.X) * (J * f.X) - (J * f.grad) * f.X.dot(f.sp.metric * f.X);
}

std::string index_label(std::size_t i, double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "sample %zu (t=%.6g)", i, t);
  return buf;
}

}  // namespace

AlongCurveField AlongCurveField::sample(const CurveRecord &curve, const VectorField &E) {
  AlongCurveField out;
  out.values.reserve(curve.size());
  for (const Point &p : curve.points) out.values.push_back(E(p));
  return out;
}

CurveRecord geodesic_ivp(const ConnectionField &nabla, const Point &p0, const Vec &v0, double t_end, int steps,
                         const GeodesicOptions &options) {
  if (steps < 2) throw PreconditionError("geodesic_ivp: steps must be at least 2");
  if (!(t_end > 0.0)) throw PreconditionError("geodesic_ivp: t_end must be positive");
  const Chart &chart = *nabla.chart;
  if (!chart.contains(p0)) throw DomainError("geodesic_ivp: initial point outside the chart domain", p0.coords);
  if (v0.size() != chart.dim) throw PreconditionError("geodesic_ivp: initial velocity has wrong length");

  const double dt = t_end / steps;
  CurveRecord rec;
  rec.step = dt;
  rec.chart = nabla.chart;
  rec.times.reserve(static_cast<std::size_t>(steps) + 1);
  rec.points.reserve(static_cast<std::size_t>(steps) + 1);
  rec.velocities.reserve(static_cast<std::size_t>(steps) + 1);

  const ChartId id = chart.id;
  auto accel = [&](const Vec &x, const Vec &v) -> Vec {
    if (!chart.contains(x)) throw DomainError("geodesic left the chart domain", x);
    return -nabla.at(Point{x, id}).contract(v, v);
  };
  auto energy = [&](const Vec &x, const Vec &v) { return v.dot(chart.require_metric()(Point{x, id}) * v); };
  const bool check_energy = options.energy_drift.has_value() && chart.metric.has_value();
  const double e0 = check_energy ? energy(p0.coords, v0) : 0.0;

  Vec x = p0.coords;
  Vec v = v0;
  rec.times.push_back(0.0);
  rec.points.push_back(Point{x, id});
  rec.velocities.push_back(v);
  for (int s = 0; s < steps; ++s) {
    const double t = s * dt;
    try {
      const Vec k1x = v;
      const Vec k1v = accel(x, v);
      const Vec k2x = v + 0.5 * dt * k1v;
      const Vec k2v = accel(x + 0.5 * dt * k1x, k2x);
      const Vec k3x = v + 0.5 * dt * k2v;
      const Vec k3v = accel(x + 0.5 * dt * k2x, k3x);
      const Vec k4x = v + dt * k3v;
      const Vec k4v = accel(x + dt * k3x, k4x);
      const Vec xn = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      const Vec vn = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
      if (!chart.contains(xn)) throw DomainError("geodesic left the chart domain", xn);
      if (!vn.allFinite()) throw StepSizeError("geodesic_ivp: non-finite velocity");
      x = xn;
      v = vn;
    } catch (const DomainError &e) {
      rec.halt = CurveHalt{t, e.where(), e.what()};
      return rec;
    }
    if (check_energy) {
      const double drift = std::abs(energy(x, v) - e0);
      if (drift > *options.energy_drift * std::max(std::abs(e0), 1e-300)) {
        std::ostringstream msg;
        msg << "geodesic_ivp: energy drift " << drift / std::max(std::abs(e0), 1e-300) << " at t="
            << (s + 1) * dt << "; step " << dt << " is too large";
        throw StepSizeError(msg.str());
      }
    }
    rec.times.push_back((s + 1) * dt);
    rec.points.push_back(Point{x, id});
    rec.velocities.push_back(v);
  }
  return rec;
}

Vec covariant_along_curve(const ConnectionField &nabla, const CurveRecord &curve, const AlongCurveField &E,
                          std::size_t i) {
  require_interior(curve, i);
  if (E.size() != curve.size()) throw PreconditionError("along-curve field length differs from the curve");
  const double dt = curve.times[i + 1] - curve.times[i - 1];
  return derivative_along(nabla, curve.points[i], curve.velocities[i], dt,
                          [&](std::size_t j) { return E(j); }, i);
}

CurveRecord project_curve(const SubmersionMap &S, const CurveRecord &curve) {
  CurveRecord out;
  out.times = curve.times;
  out.step = curve.step;
  out.chart = S.target;
  out.halt = curve.halt;
  out.points.reserve(curve.size());
  out.velocities.reserve(curve.size());
  for (std::size_t j = 0; j < curve.size(); ++j) {
    out.points.push_back(S(curve.points[j]));
    out.velocities.push_back(S.differential(curve.points[j]) * curve.velocities[j]);
  }
  return out;
}

Vec decomposition_residual_h(const CurveContext &ctx, const CurveRecord &curve, const AlongCurveField &E,
                             std::size_t i) {
  require_interior(curve, i);
  const Point &p = curve.points[i];
  const Frame f = frame_at(ctx, p, curve.velocities[i]);
  const Mat &J = f.sp.differential;
  const double dt = curve.times[i + 1] - curve.times[i - 1];

  const Vec e = E(i);
  const Vec eh = f.sp.horizontal * e;
  const Vec ev = f.sp.vertical * e;
  const Vec lhs = J * (f.sp.horizontal * covariant_along_curve(ctx.nabla, curve, E, i));

  // E_* and its ∇*-derivative along π∘σ.
  auto pushed = [&](std::size_t j) -> Vec { return ctx.S.differential(curve.points[j]) * E(j); };
  const Vec e_star_prime = derivative_along(ctx.nabla_base, f.base, J * curve.velocities[i], dt, pushed, i);

  Vec rhs = e_star_prime;
  rhs += J * (A_at(ctx, eh, f.U, p) + A_at(ctx, f.X, ev, p) + T_at(ctx, f.U, ev, p));
  rhs -= f.conformal * (J * f.grad) * (J * f.X).dot(f.gb * (J * eh));
  rhs += f.dphi.dot(f.X) * (J * eh) + f.dphi.dot(eh) * (J * f.X);
  return lhs - rhs;
}

Vec decomposition_residual_v(const CurveContext &ctx, const CurveRecord &curve, const AlongCurveField &E,
                             std::size_t i) {
  require_interior(curve, i);
  const Point &p = curve.points[i];
  const Frame f = frame_at(ctx, p, curve.velocities[i]);
  const double dt = curve.times[i + 1] - curve.times[i - 1];
  const Vec eh = f.sp.horizontal * E(i);

  auto vertical_part = [&](std::size_t j) -> Vec { return vertical_projector(ctx.S, curve.points[j]) * E(j); };
  const Vec v_prime = derivative_along(ctx.nabla, p, curve.velocities[i], dt, vertical_part, i);

  const Vec lhs = f.sp.vertical * covariant_along_curve(ctx.nabla, curve, E, i);
  const Vec rhs = A_at(ctx, f.X, eh, p) + T_at(ctx, f.U, eh, p) + f.sp.vertical * v_prime;
  return lhs - rhs;
}

std::pair<ResidualReport, ResidualReport> sigma_dd_residuals(const CurveContext &ctx, const CurveRecord &curve,
                                                             std::size_t i, double tolerance) {
  const AlongCurveField velocity = AlongCurveField::velocity(curve);
  const std::string inputs = "E = velocity, " + index_label(i, curve.times.at(i));
  return {ResidualReport::make(IdentityId::sigma_dd_horizontal, curve.points[i].coords, inputs,
                               decomposition_residual_h(ctx, curve, velocity, i).norm(), tolerance),
          ResidualReport::make(IdentityId::sigma_dd_vertical, curve.points[i].coords, inputs,
                               decomposition_residual_v(ctx, curve, velocity, i).norm(), tolerance)};
}

ProjectionCheck projection_condition(const CurveContext &ctx, const CurveRecord &curve, std::size_t i,
                                     double tolerance, double geodesic_tolerance) {
  require_interior(curve, i);
  const AlongCurveField velocity = AlongCurveField::velocity(curve);
  ProjectionCheck out;
  out.geodesic_defect = covariant_along_curve(ctx.nabla, curve, velocity, i).norm();
  if (out.geodesic_defect > geodesic_tolerance) {
    std::ostringstream msg;
    msg << "projection_condition: curve is not a geodesic, |σ''| = " << out.geodesic_defect << " at "
        << index_label(i, curve.times[i]);
    throw PreconditionError(msg.str());
  }

  const Point &p = curve.points[i];
  const Frame f = frame_at(ctx, p, curve.velocities[i]);
  const Mat &J = f.sp.differential;
  Vec condition = J * (2.0 * A_at(ctx, f.X, f.U, p) + T_at(ctx, f.U, f.U, p));
  condition += lift_condition_vector(f);

  const double dt = curve.times[i + 1] - curve.times[i - 1];
  auto projected_velocity = [&](std::size_t j) -> Vec {
    return ctx.S.differential(curve.points[j]) * curve.velocities[j];
  };
  out.projected_defect =
      derivative_along(ctx.nabla_base, f.base, J * curve.velocities[i], dt, projected_velocity, i).norm();

  out.condition = ResidualReport::make(IdentityId::projection_condition, p.coords, index_label(i, curve.times[i]),
                                       condition.norm(), tolerance);
  out.condition_holds = out.condition.pass;
  out.projection_geodesic = out.projected_defect <= tolerance;
  out.agree = out.condition_holds == out.projection_geodesic;
  return out;
}

BaseCurve hermite_curve(const CurveRecord &curve) {
  if (curve.size() < 2) throw DegenerateInputError("hermite_curve: need at least two samples");
  return [curve](double t) -> std::pair<Point, Vec> {
    const auto &ts = curve.times;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
    k = std::clamp<std::size_t>(k, 1, ts.size() - 1) - 1;
    const double t0 = ts[k];
    const double dt = ts[k + 1] - t0;
    const double s = (t - t0) / dt;
    const Vec &p0 = curve.points[k].coords;
    const Vec &p1 = curve.points[k + 1].coords;
    const Vec m0 = curve.velocities[k] * dt;
    const Vec m1 = curve.velocities[k + 1] * dt;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const Vec pos = (2 * s3 - 3 * s2 + 1) * p0 + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * p1 + (s3 - s2) * m1;
    const Vec vel =
        ((6 * s2 - 6 * s) * p0 + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * p1 + (3 * s2 - 2 * s) * m1) / dt;
    return {Point{pos, curve.points[k].chart}, vel};
  };
}

CurveRecord horizontal_lift_curve(const SubmersionMap &S, const BaseCurve &alpha, const Point &p0,
                                  const LiftOptions &options) {
  if (options.steps < 2) throw PreconditionError("horizontal_lift_curve: steps must be at least 2");
  const Point a0 = alpha(options.t0).first;
  const Point b0 = S(p0);
  if ((b0.coords - a0.coords).norm() > 1e-10 * (1.0 + a0.coords.norm()))
    throw PreconditionError("horizontal_lift_curve: π(p0) = " + format_coords(b0.coords) +
                            " does not match α(t0) = " + format_coords(a0.coords));

  const Chart &chart = *S.source;
  const ChartId id = chart.id;
  auto rhs = [&](double t, const Vec &x) -> Vec {
    if (!chart.contains(x)) throw DomainError("lift left the chart domain", x);
    return lift_at(S, Point{x, id}, alpha(t).second);
  };

  const double dt = (options.t_end - options.t0) / options.steps;
  CurveRecord rec;
  rec.step = dt;
  rec.chart = S.source;
  Vec x = p0.coords;
  rec.times.push_back(options.t0);
  rec.points.push_back(Point{x, id});
  rec.velocities.push_back(rhs(options.t0, x));
  for (int s = 0; s < options.steps; ++s) {
    const double t = options.t0 + s * dt;
    try {
      const Vec k1 = rec.velocities.back();
      const Vec k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1);
      const Vec k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2);
      const Vec k4 = rhs(t + dt, x + dt * k3);
      const Vec xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      const double tn = options.t0 + (s + 1) * dt;
      const Vec vn = rhs(tn, xn);
      x = xn;
      rec.times.push_back(tn);
      rec.points.push_back(Point{x, id});
      rec.velocities.push_back(vn);
    } catch (const DomainError &e) {
      rec.halt = CurveHalt{t, e.where(), e.what()};
      return rec;
    }
  }
  const double drift = lift_drift(S, rec, alpha);
  if (drift > options.drift_tolerance) {
    std::ostringstream msg;
    msg << "horizontal_lift_curve: projection drifted " << drift << " from the base curve; reduce the step " << dt;
    throw StepSizeError(msg.str());
  }
  return rec;
}

CurveRecord horizontal_lift_curve(const SubmersionMap &S, const CurveRecord &alpha, const Point &p0) {
  if (alpha.size() < 2) throw DegenerateInputError("horizontal_lift_curve: base curve has fewer than two samples");
  LiftOptions options;
  options.t0 = alpha.times.front();
  options.t_end = alpha.times.back();
  options.steps = static_cast<int>(alpha.size()) - 1;
  return horizontal_lift_curve(S, hermite_curve(alpha), p0, options);
}

double lift_drift(const SubmersionMap &S, const CurveRecord &lift, const BaseCurve &alpha) {
  double worst = 0.0;
  for (std::size_t j = 0; j < lift.size(); ++j)
    worst = std::max(worst, (S(lift.points[j]).coords - alpha(lift.times[j]).first.coords).norm());
  return worst;
}

LiftCheck lift_geodesic_check(const CurveContext &ctx, const CurveRecord &alpha, const Point &p0,
                              const LiftCheckOptions &options) {
  const AlongCurveField base_velocity = AlongCurveField::velocity(alpha);
  double base_defect = 0.0;
  for (std::size_t j = 1; j + 1 < alpha.size(); ++j)
    base_defect = std::max(base_defect, covariant_along_curve(ctx.nabla_base, alpha, base_velocity, j).norm());
  if (base_defect > options.base_geodesic_tolerance) {
    std::ostringstream msg;
    msg << "lift_geodesic_check: base curve is not a geodesic, |α''| = " << base_defect;
    throw PreconditionError(msg.str());
  }

  LiftCheck out;
  out.lift = horizontal_lift_curve(ctx.S, alpha, p0);
  const CurveRecord &lift = out.lift;
  if (!lift.complete())
    throw DomainError("lift_geodesic_check: lift left the domain: " + lift.halt->reason, lift.halt->where);

  const int m = ctx.S.base_dim();
  const AlongCurveField velocity = AlongCurveField::velocity(lift);
  double hypothesis = 0.0;
  double defect = 0.0;
  double condition = 0.0;
  Vec worst_defect_at = lift.points.front().coords;
  Vec worst_condition_at = worst_defect_at;
  Vec worst_hypothesis_at = worst_defect_at;
  for (std::size_t j = 1; j + 1 < lift.size(); ++j) {
    const Point &p = lift.points[j];
    const Frame f = frame_at(ctx, p, lift.velocities[j]);

    std::vector<Vec> probes{f.X};
    for (int a = 0; a < m; ++a) {
      probes.push_back(lift_at(ctx.S, p, unit_vector(m, a)));
      for (int b = a + 1; b < m; ++b) probes.push_back(lift_at(ctx.S, p, unit_vector(m, a) + unit_vector(m, b)));
    }
    for (const Vec &z : probes) {
      const double a_zz = A_at(ctx, z, z, p).norm();
      if (a_zz > hypothesis) {
        hypothesis = a_zz;
        worst_hypothesis_at = p.coords;
      }
    }

    const double d = covariant_along_curve(ctx.nabla, lift, velocity, j).norm();
    if (d > defect) {
      defect = d;
      worst_defect_at = p.coords;
    }
    const double c = lift_condition_vector(f).norm();
    if (c > condition) {
      condition = c;
      worst_condition_at = p.coords;
    }
  }

  out.hypothesis_norm = hypothesis;
  out.applicable = hypothesis <= options.hypothesis_tolerance;
  const std::string inputs = "lift of a base geodesic from " + format_coords(p0.coords);
  out.drift = ResidualReport::make(IdentityId::lift_drift, lift.points.back().coords, inputs,
                                   lift_drift(ctx.S, lift, hermite_curve(alpha)), options.tolerance);
  out.defect = ResidualReport::make(IdentityId::lift_geodesic_defect, worst_defect_at, inputs, defect,
                                    options.tolerance);
  out.condition =
      ResidualReport::make(IdentityId::lift_condition, worst_condition_at, inputs, condition, options.tolerance);
  out.agree = out.defect.pass == out.condition.pass;
  if (!out.applicable) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "inapplicable: A_Z Z = %.3e at %s", hypothesis,
                  format_coords(worst_hypothesis_at).c_str());
    out.defect.note = buf;
    out.condition.note = buf;
  }
  return out;
}

void write_curve_csv(std::ostream &out, const CurveRecord &curve) {
  const int n = curve.points.empty() ? 0 : static_cast<int>(curve.points.front().coords.size());
  out << "t";
  for (int k = 1; k <= n; ++k) out << ",x" << k;
  for (int k = 1; k <= n; ++k) out << ",v" << k;
  out << '\n';
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t j = 0; j < curve.size(); ++j) {
    put(curve.times[j]);
    for (int k = 0; k < n; ++k) {
      out << ',';
      put(curve.points[j].coords[k]);
    }
    for (int k = 0; k < n; ++k) {
      out << ',';
      put(curve.velocities[j][k]);
    }
    out << '\n';
  }
}

CurveRecord read_curve_csv(std::istream &in, ChartRef chart) {
  std::string line;
  if (!std::getline(in, line)) throw DegenerateInputError("curve CSV is empty");
  const auto columns = std::count(line.begin(), line.end(), ',') + 1;
  if (columns < 3 || (columns - 1) % 2 != 0 || line.rfind("t,", 0) != 0)
    throw DegenerateInputError("curve CSV header must be t,x1..xn,v1..vn");
  const int n = static_cast<int>((columns - 1) / 2);
  if (chart && chart->dim != n) throw DegenerateInputError("curve CSV dimension does not match the chart");

  CurveRecord rec;
  rec.chart = chart;
  const ChartId id = chart ? chart->id : ChartId{};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::vector<double> values;
    std::string cell;
    while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
    if (static_cast<long>(values.size()) != columns)
      throw DegenerateInputError("curve CSV row has " + std::to_string(values.size()) + " columns");
    rec.times.push_back(values[0]);
    rec.points.push_back(Point{Eigen::Map<Vec>(values.data() + 1, n), id});
    rec.velocities.push_back(Eigen::Map<Vec>(values.data() + 1 + n, n));
  }
  if (rec.size() < 2) throw DegenerateInputError("curve CSV needs at least two samples");
  for (std::size_t j = 1; j < rec.size(); ++j)
    if (!(rec.times[j] > rec.times[j - 1])) throw DegenerateInputError("curve CSV times must increase");
  rec.step = rec.times[1] - rec.times[0];
  return rec;
}

nlohmann::json curve_to_json(const CurveRecord &curve) {
  auto vec = [](const Vec &v) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
    return a;
  };
  nlohmann::json points = nlohmann::json::array();
  nlohmann::json velocities = nlohmann::json::array();
  for (std::size_t j = 0; j < curve.size(); ++j) {
    points.push_back(vec(curve.points[j].coords));
    velocities.push_back(vec(curve.velocities[j]));
  }
  nlohmann::json j{{"times", curve.times}, {"points", points}, {"velocities", velocities}, {"step", curve.step}};
  if (curve.chart) j["chart"] = curve.chart->label;
  if (curve.halt)
    j["halt"] = {{"time", curve.halt->time}, {"where", vec(curve.halt->where)}, {"reason", curve.halt->reason}};
  return j;
}

}  // namespace csub
