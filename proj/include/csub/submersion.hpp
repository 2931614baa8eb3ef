#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "csub/chart.hpp"
#include "csub/connection.hpp"
#include "csub/report.hpp"

namespace csub {

/// A submersion π: M → B between single-chart manifolds. Both charts carry
/// their metric (g_m on the source, g_b on the target).
struct SubmersionMap {
  ChartRef source;
  ChartRef target;
  std::function<Point(const Point &)> map;
  /// Jacobian of π: rows = base dim, cols = total dim.
  std::function<Mat(const Point &)> differential;
  /// `count` points of M lying over b.
  std::function<std::vector<Point>(const Point &b, int count)> fiber_sampler;
  /// Parametrization of the fiber over b by n − m coordinates, and its inverse.
  std::function<Point(const Point &b, const Vec &fiber_coords)> fiber_embedding;
  std::function<Vec(const Point &p)> fiber_coordinates;

  int total_dim() const { return source->dim; }
  int base_dim() const { return target->dim; }
  int fiber_dim() const { return source->dim - target->dim; }

  Point operator()(const Point &p) const { return map(p); }
};

/// π(x_1..x_n) = (x_1..x_m); the fiber over b is parametrized by the last n − m coordinates.
SubmersionMap coordinate_projection(ChartRef source, ChartRef target,
                                    std::function<std::vector<Point>(const Point &, int)> fiber_sampler);

enum class Projection { horizontal, vertical };

/// Vertical and horizontal projectors at a point. The horizontal space is
/// the g_m-orthogonal complement of ker π_*.
struct Splitting {
  Mat vertical;
  Mat horizontal;
  Mat differential;
  Mat metric;

  const Mat &operator[](Projection which) const { return which == Projection::vertical ? vertical : horizontal; }
};

Splitting split(const SubmersionMap &S, const Point &p);
Mat vertical_projector(const SubmersionMap &S, const Point &p);
Mat horizontal_projector(const SubmersionMap &S, const Point &p);

/// q ↦ P(q) E(q).
VectorField project_field(const SubmersionMap &S, Projection which, VectorField E);

/// Horizontal vector at q that pushes forward to w; no check that w sits over π(q).
Vec lift_at(const SubmersionMap &S, const Point &q, const Vec &w);

/// The unique u at p with V u = 0 and π_* u = w; requires π(p) = b.
Vec horizontal_lift_vector(const SubmersionMap &S, const Point &b, const Vec &w, const Point &p);

/// Basic field over a base field: lifted pointwise, so it is π-related by construction.
VectorField horizontal_lift(const SubmersionMap &S, VectorField base_field);

struct ConformalFactor {
  double phi = 0.0;
  /// Max |g_m(u,v) − e^{2φ} g_b(π_*u, π_*v)| over lifts of a g_b-orthonormal frame.
  double residual = 0.0;
};

ConformalFactor recover_conformal_factor(const SubmersionMap &S, const Point &p);

/// g_m^{-1} dφ at p.
Vec grad_conformal(const SubmersionMap &S, const ScalarField &phi, const Point &p, double h = kDefaultStep);

/// H(∇_X̃ Ỹ) − (∇*_X Y)~ − X̃(φ)Ỹ − Ỹ(φ)X̃ + H(grad φ) g_m(X̃,Ỹ) at p, for base fields X, Y.
Vec cshd_defect(const SubmersionMap &S, const ConnectionField &nabla, const ConnectionField &nabla_base,
                const ScalarField &phi, const VectorField &X, const VectorField &Y, const Point &p,
                double h = kDefaultStep);

/// Largest cshd_defect norm over all pairs of base coordinate fields.
double max_cshd_defect(const SubmersionMap &S, const ConnectionField &nabla, const ConnectionField &nabla_base,
                       const ScalarField &phi, const Point &p, double h = kDefaultStep);

/// Christoffels of the induced base connection computed at one point of M.
Christoffel induced_christoffel_at(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                                   const Point &p, double h = kDefaultStep);

struct ProjectabilityReport {
  double max_spread = 0.0;
  Vec worst_base_point;
  int samples = 0;
  double tolerance = 0.0;
  bool projectable = true;
};

/// Max difference of the induced Christoffels across `samples` points of the fiber over b.
double projectability_spread(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                             const Point &b, int samples, double h = kDefaultStep);

struct InducedOptions {
  int fiber_samples = 8;
  double tolerance = 1e-5;
  double h = kDefaultStep;
};

struct InducedConnection {
  ConnectionField connection;
  ProjectabilityReport report;
};

/// The unique base connection making (∇, ∇*) compatible. Evaluation uses the
/// first fiber sample over each base point; projectability is certified at
/// `check_points` and NotProjectableError is thrown when the spread exceeds
/// the tolerance.
InducedConnection induced_connection(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                                     std::span<const Point> check_points, const InducedOptions &options = {});

/// T_E F = H ∇_{VE}(VF) + V ∇_{VE}(HF).
Vec tensor_T(const SubmersionMap &S, const ConnectionField &nabla, const VectorField &E, const VectorField &F,
             const Point &p, double h = kDefaultStep);

/// A_E F = V ∇_{HE}(HF) + H ∇_{HE}(VF).
Vec tensor_A(const SubmersionMap &S, const ConnectionField &nabla, const VectorField &E, const VectorField &F,
             const Point &p, double h = kDefaultStep);

/// Connection induced on the fiber over b by (V∇V)_E V = V(∇_E V), in fiber coordinates.
struct FiberConnection {
  ChartRef chart;
  Point base;
  ConnectionField connection;
  /// Jacobian of the fiber embedding at fiber coordinates y (n × (n − m)).
  std::function<Mat(const Vec &)> embedding_jacobian;
  std::function<Point(const Vec &)> embed;
};

FiberConnection fiber_connection(const SubmersionMap &S, const ConnectionField &nabla, const Point &b,
                                 double h = kDefaultStep);

struct TorsionLemmaOptions {
  std::uint64_t seed = 1;
  double tolerance = 1e-6;
  double cshd_tolerance = 1e-4;
  double h = kDefaultStep;
};

/// Residuals of H Tor∇(X̃,Ỹ) = (Tor∇*(X,Y))~ and V Tor∇(V,W) = Tor∇̂(V,W) for random base and vertical vectors.
std::pair<ResidualReport, ResidualReport> torsion_lemma_residuals(const SubmersionMap &S, const ConnectionField &nabla,
                                                                  const ConnectionField &nabla_base,
                                                                  const ScalarField &phi, const Point &p,
                                                                  const TorsionLemmaOptions &options = {});

/// P3 ∇_{[P1E,P2F]} P3G − P3 ∇_{P1E}(P3 ∇_{P2F} P3G) + P3 ∇_{P2F}(P3 ∇_{P1E} P3G).
Vec projected_curvature(const SubmersionMap &S, const ConnectionField &nabla, Projection p1, Projection p2,
                        Projection p3, const VectorField &E, const VectorField &F, const VectorField &G,
                        const Point &p, double h = kDefaultStep);

enum class FundamentalEq { VVV_W, HUVW, VUVX, HUVX, VUXV, HUXV, VUXY, HUXY, VXYU, HXYU, VXYZ, HXYZ };

inline constexpr std::array<FundamentalEq, 12> kAllFundamentalEqs{
    FundamentalEq::VVV_W, FundamentalEq::HUVW, FundamentalEq::VUVX, FundamentalEq::HUVX,
    FundamentalEq::VUXV,  FundamentalEq::HUXV, FundamentalEq::VUXY, FundamentalEq::HUXY,
    FundamentalEq::VXYU,  FundamentalEq::HXYU, FundamentalEq::VXYZ, FundamentalEq::HXYZ};

IdentityId identity_of(FundamentalEq eq);

/// Raw test fields; U, V, W are projected vertical and X, Y, Z horizontal before use.
struct FundamentalFields {
  VectorField U, V, W, X, Y, Z;
};

/// Both sides of one curvature decomposition identity.
struct FundamentalSides {
  Vec lhs;
  Vec rhs;
};

FundamentalSides fundamental_equation_sides(const SubmersionMap &S, const ConnectionField &nabla, FundamentalEq eq,
                                            const FundamentalFields &fields, const Point &p,
                                            double h = kDefaultStep);

ResidualReport fundamental_equation_residual(const SubmersionMap &S, const ConnectionField &nabla,
                                             FundamentalEq eq, const FundamentalFields &fields, const Point &p,
                                             double tolerance, double h = kDefaultStep);

struct DualityVerdict {
  Vec point;
  double primal = 0.0;
  double dual = 0.0;
  bool agree = false;
};

struct DualityReport {
  ResidualReport primal;
  ResidualReport dual;
  std::vector<DualityVerdict> per_point;
  bool verdicts_agree = true;
};

/// Max CSHD defect of (∇,∇*) and of their duals over `points`; the two
/// thresholded verdicts are expected to coincide.
DualityReport duality_proposition_check(const SubmersionMap &S, const ConnectionField &nabla,
                                        const ConnectionField &nabla_base, const ScalarField &phi,
                                        std::span<const Point> points, double tolerance = 1e-4,
                                        double h = kDefaultStep);

}  // namespace csub
