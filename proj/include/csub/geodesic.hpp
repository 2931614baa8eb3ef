#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "csub/connection.hpp"
#include "csub/report.hpp"
#include "csub/submersion.hpp"

namespace csub {

/// Where and why an integration stopped early.
struct CurveHalt {
  double time = 0.0;
  Vec where;
  std::string reason;
};

/// Uniformly sampled curve with its velocities.
struct CurveRecord {
  std::vector<double> times;
  std::vector<Point> points;
  std::vector<Vec> velocities;
  double step = 0.0;
  ChartRef chart;
  std::optional<CurveHalt> halt;

  std::size_t size() const { return times.size(); }
  bool complete() const { return !halt.has_value(); }
};

/// Values of a vector field E at the samples of a curve.
struct AlongCurveField {
  std::vector<Vec> values;

  const Vec &operator()(std::size_t i) const { return values.at(i); }
  std::size_t size() const { return values.size(); }

  static AlongCurveField velocity(const CurveRecord &curve) { return {curve.velocities}; }
  /// Samples a field on M at the curve points.
  static AlongCurveField sample(const CurveRecord &curve, const VectorField &E);
};

struct GeodesicOptions {
  /// Relative drift of g(σ′,σ′) that counts as divergence; only checked when the chart has a metric.
  std::optional<double> energy_drift = 1e-2;
};

/// Classical RK4 on σ″^k + Γ^k_ij σ′^i σ′^j = 0 with `steps` equal steps.
/// A stage leaving the domain ends the record there and sets `halt`.
CurveRecord geodesic_ivp(const ConnectionField &nabla, const Point &p0, const Vec &v0, double t_end, int steps,
                         const GeodesicOptions &options = {});

/// (E′)^k = dE^k/dt + Γ^k_ij σ′^i E^j at interior sample i.
Vec covariant_along_curve(const ConnectionField &nabla, const CurveRecord &curve, const AlongCurveField &E,
                          std::size_t i);

/// π∘σ with velocities π_* σ′.
CurveRecord project_curve(const SubmersionMap &S, const CurveRecord &curve);

/// Everything the decomposition identities need along one curve.
struct CurveContext {
  const SubmersionMap &S;
  const ConnectionField &nabla;
  const ConnectionField &nabla_base;
  const ScalarField &phi;
  double h = kDefaultStep;
};

/// π_*(H(E′)) minus the right-hand side of the horizontal decomposition at sample i.
/// The mixed term uses A_{E_h}U, with E_h the horizontal part of E.
Vec decomposition_residual_h(const CurveContext &ctx, const CurveRecord &curve, const AlongCurveField &E,
                             std::size_t i);

/// V(E′) − A_X E_h − T_U E_h − V((E_v)′) at sample i.
Vec decomposition_residual_v(const CurveContext &ctx, const CurveRecord &curve, const AlongCurveField &E,
                             std::size_t i);

/// Both decompositions for E = σ′.
std::pair<ResidualReport, ResidualReport> sigma_dd_residuals(const CurveContext &ctx, const CurveRecord &curve,
                                                             std::size_t i, double tolerance = 1e-4);

struct ProjectionCheck {
  ResidualReport condition;   // π_*(2A_X U + T_U U) + 2X(φ)π_*X − π_*(grad φ)|X|²
  double projected_defect = 0.0;  // |σ_*″| on π∘σ under ∇*
  double geodesic_defect = 0.0;   // |σ″| on σ
  bool condition_holds = false;
  bool projection_geodesic = false;
  bool agree = false;
};

/// Geodesic projection criterion at interior sample i of a geodesic σ.
/// Throws PreconditionError when |σ″| exceeds `geodesic_tolerance`.
ProjectionCheck projection_condition(const CurveContext &ctx, const CurveRecord &curve, std::size_t i,
                                     double tolerance = 1e-4, double geodesic_tolerance = 1e-6);

/// Evaluates a base curve: t ↦ (α(t), α′(t)).
using BaseCurve = std::function<std::pair<Point, Vec>(double)>;

/// Cubic Hermite interpolation of a sampled curve.
BaseCurve hermite_curve(const CurveRecord &curve);

struct LiftOptions {
  double t0 = 0.0;
  double t_end = 1.0;
  int steps = 1000;
  /// Allowed sup distance between π∘σ and α before StepSizeError.
  double drift_tolerance = 1e-6;
};

/// Integral curve of the horizontal lift of α′ starting at p0 (π(p0) = α(t0)).
CurveRecord horizontal_lift_curve(const SubmersionMap &S, const BaseCurve &alpha, const Point &p0,
                                  const LiftOptions &options = {});
/// Uses the sample times of α.
CurveRecord horizontal_lift_curve(const SubmersionMap &S, const CurveRecord &alpha, const Point &p0);

/// Sup distance between π∘σ and α over the samples of σ.
double lift_drift(const SubmersionMap &S, const CurveRecord &lift, const BaseCurve &alpha);

struct LiftCheck {
  bool applicable = false;
  double hypothesis_norm = 0.0;   // max |A_Z Z| over horizontal test vectors along the lift
  ResidualReport drift;
  ResidualReport defect;          // max |σ″| over interior samples of the lift
  ResidualReport condition;       // max |2X(φ)π_*X − π_*(grad φ)|X|²|
  bool agree = false;
  CurveRecord lift;
};

struct LiftCheckOptions {
  double tolerance = 1e-6;
  double hypothesis_tolerance = 1e-6;
  double base_geodesic_tolerance = 1e-6;
};

/// Lifts a base geodesic and compares its geodesic defect with the lift condition.
/// When A_Z Z ≠ 0 somewhere along the lift the check is marked inapplicable.
LiftCheck lift_geodesic_check(const CurveContext &ctx, const CurveRecord &alpha, const Point &p0,
                              const LiftCheckOptions &options = {});

void write_curve_csv(std::ostream &out, const CurveRecord &curve);
CurveRecord read_curve_csv(std::istream &in, ChartRef chart);
nlohmann::json curve_to_json(const CurveRecord &curve);

}  // namespace csub
