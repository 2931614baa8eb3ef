#include "csub/submersion.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace csub {

namespace {

constexpr double kFiberMatchTolerance = 1e-10;

std::string describe(const char *label, const Vec &v) { return std::string(label) + "=" + format_coords(v); }

}  // namespace

SubmersionMap coordinate_projection(ChartRef source, ChartRef target,
                                    std::function<std::vector<Point>(const Point &, int)> fiber_sampler) {
  const int n = source->dim;
  const int m = target->dim;
  if (!(n > m && m >= 1)) throw PreconditionError("coordinate projection needs n > m >= 1");
  SubmersionMap S;
  S.source = source;
  S.target = target;
  S.map = [target, m](const Point &p) { return Point{p.coords.head(m), target->id}; };
  S.differential = [n, m](const Point &) {
    Mat J = Mat::Zero(m, n);
    J.leftCols(m).setIdentity();
    return J;
  };
  S.fiber_sampler = std::move(fiber_sampler);
  S.fiber_embedding = [source, n, m](const Point &b, const Vec &y) {
    Vec c(n);
    c.head(m) = b.coords;
    c.tail(n - m) = y;
    return Point{std::move(c), source->id};
  };
  S.fiber_coordinates = [n, m](const Point &p) { return Vec(p.coords.tail(n - m)); };
  return S;
}

Splitting split(const SubmersionMap &S, const Point &p) {
  Splitting out;
  out.metric = S.source->require_metric()(p);
  out.differential = S.differential(p);
  const Mat &J = out.differential;
  const Mat ginv = spd_inverse(out.metric, p);
  const Mat ginv_jt = ginv * J.transpose();
  const Mat gram = J * ginv_jt;  // m × m, invertible iff rank J = m
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > 1e-12 * std::max(top, 1e-300)))
    throw NotSubmersionError("not a submersion: differential is rank deficient", p.coords);
  out.horizontal = ginv_jt * gram.ldlt().solve(J);
  const Eigen::Index n = J.cols();
  out.vertical = Mat::Identity(n, n) - out.horizontal;
  return out;
}

Mat vertical_projector(const SubmersionMap &S, const Point &p) { return split(S, p).vertical; }

Mat horizontal_projector(const SubmersionMap &S, const Point &p) { return split(S, p).horizontal; }

VectorField project_field(const SubmersionMap &S, Projection which, VectorField E) {
  return VectorField{[S, which, E = std::move(E)](const Point &q) -> Vec { return split(S, q)[which] * E(q); }};
}

Vec lift_at(const SubmersionMap &S, const Point &q, const Vec &w) {
  const Mat g = S.source->require_metric()(q);
  const Mat J = S.differential(q);
  const Mat ginv_jt = spd_inverse(g, q) * J.transpose();
  const Mat gram = J * ginv_jt;
  Eigen::LDLT<Mat> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
    throw NotSubmersionError("horizontal lift: restricted differential is singular", q.coords);
  return ginv_jt * ldlt.solve(w);
}

Vec horizontal_lift_vector(const SubmersionMap &S, const Point &b, const Vec &w, const Point &p) {
  const Point image = S(p);
  if ((image.coords - b.coords).norm() > kFiberMatchTolerance * (1.0 + b.coords.norm()))
    throw PreconditionError("horizontal_lift_vector: p is not on the fiber over " + format_coords(b.coords));
  if (w.size() != S.base_dim()) throw PreconditionError("horizontal_lift_vector: base vector has wrong length");
  return lift_at(S, p, w);
}

VectorField horizontal_lift(const SubmersionMap &S, VectorField base_field) {
  return VectorField{[S, X = std::move(base_field)](const Point &q) { return lift_at(S, q, X(S(q))); }};
}

ConformalFactor recover_conformal_factor(const SubmersionMap &S, const Point &p) {
  const Point b = S(p);
  const Mat gb = S.target->require_metric()(b);
  const Mat gm = S.source->require_metric()(p);
  Eigen::LLT<Mat> llt(gb);
  if (llt.info() != Eigen::Success) throw SingularMatrixError("base metric is not positive definite", b.coords);
  // Columns of `frame` are g_b-orthonormal: frameᵀ g_b frame = I.
  const Mat frame = llt.matrixU().solve(Mat::Identity(gb.rows(), gb.cols()));
  Mat lifted(S.total_dim(), S.base_dim());
  for (int a = 0; a < S.base_dim(); ++a) lifted.col(a) = lift_at(S, p, frame.col(a));
  const Mat horizontal_gram = lifted.transpose() * gm * lifted;
  const double ratio = horizontal_gram(0, 0);
  if (!(ratio > 0.0) || !std::isfinite(ratio))
    throw DegenerateInputError("recover_conformal_factor: zero-norm horizontal test vector");
  ConformalFactor out;
  out.phi = 0.5 * std::log(ratio);
  const Mat expected = ratio * Mat::Identity(S.base_dim(), S.base_dim());
  out.residual = (horizontal_gram - expected).cwiseAbs().maxCoeff();
  return out;
}

Vec grad_conformal(const SubmersionMap &S, const ScalarField &phi, const Point &p, double h) {
  const Mat g = S.source->require_metric()(p);
  return spd_inverse(g, p) * differential(*S.source, phi, p, h);
}

Vec cshd_defect(const SubmersionMap &S, const ConnectionField &nabla, const ConnectionField &nabla_base,
                const ScalarField &phi, const VectorField &X, const VectorField &Y, const Point &p, double h) {
  const VectorField lift_x = horizontal_lift(S, X);
  const VectorField lift_y = horizontal_lift(S, Y);
  const Splitting sp = split(S, p);
  const Point b = S(p);
  const Vec xt = lift_x(p);
  const Vec yt = lift_y(p);

  const Vec lhs = sp.horizontal * covariant_derivative(nabla, xt, lift_y, p, h);

  const Vec dphi = differential(*S.source, phi, p, h);
  const Vec grad = spd_inverse(sp.metric, p) * dphi;
  Vec rhs = lift_at(S, p, covariant_derivative(nabla_base, X, Y, b, h));
  rhs += dphi.dot(xt) * yt + dphi.dot(yt) * xt;
  rhs -= (sp.horizontal * grad) * xt.dot(sp.metric * yt);
  return lhs - rhs;
}

double max_cshd_defect(const SubmersionMap &S, const ConnectionField &nabla, const ConnectionField &nabla_base,
                       const ScalarField &phi, const Point &p, double h) {
  const int m = S.base_dim();
  double worst = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const Vec d = cshd_defect(S, nabla, nabla_base, phi, VectorField::coordinate(m, i),
                                VectorField::coordinate(m, j), p, h);
      worst = std::max(worst, d.norm());
    }
  return worst;
}

Christoffel induced_christoffel_at(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                                   const Point &p, double h) {
  const int m = S.base_dim();
  const Point b = S(p);
  const Mat gb = S.target->require_metric()(b);
  const Mat J = S.differential(p);
  const Vec dphi = differential(*S.source, phi, p, h);
  const Vec pushed_grad = J * (spd_inverse(S.source->require_metric()(p), p) * dphi);
  const double conformal = std::exp(2.0 * phi(p));

  std::vector<VectorField> lifts;
  std::vector<Vec> lift_values;
  for (int i = 0; i < m; ++i) {
    lifts.push_back(horizontal_lift(S, VectorField::coordinate(m, i)));
    lift_values.push_back(lifts.back()(p));
  }
  Christoffel gamma(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      Vec v = J * covariant_derivative(nabla, lift_values[i], lifts[j], p, h);
      v -= dphi.dot(lift_values[i]) * unit_vector(m, j);
      v -= dphi.dot(lift_values[j]) * unit_vector(m, i);
      v += conformal * gb(i, j) * pushed_grad;
      for (int k = 0; k < m; ++k) gamma(k, i, j) = v[k];
    }
  return gamma;
}

double projectability_spread(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                             const Point &b, int samples, double h) {
  if (!S.fiber_sampler) throw UnsupportedError("submersion has no fiber sampler");
  const std::vector<Point> fiber = S.fiber_sampler(b, samples);
  if (fiber.empty()) throw DegenerateInputError("fiber sampler returned no points");
  const int m = S.base_dim();
  std::vector<double> lo(static_cast<std::size_t>(m * m * m), INFINITY);
  std::vector<double> hi(lo.size(), -INFINITY);
  for (const Point &q : fiber) {
    const Christoffel gamma = induced_christoffel_at(S, nabla, phi, q, h);
    std::size_t idx = 0;
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j, ++idx) {
          lo[idx] = std::min(lo[idx], gamma(k, i, j));
          hi[idx] = std::max(hi[idx], gamma(k, i, j));
        }
  }
  double spread = 0.0;
  for (std::size_t idx = 0; idx < lo.size(); ++idx) spread = std::max(spread, hi[idx] - lo[idx]);
  return spread;
}

InducedConnection induced_connection(const SubmersionMap &S, const ConnectionField &nabla, const ScalarField &phi,
                                     std::span<const Point> check_points, const InducedOptions &options) {
  InducedConnection out;
  out.report.samples = options.fiber_samples;
  out.report.tolerance = options.tolerance;
  for (const Point &b : check_points) {
    const double spread = projectability_spread(S, nabla, phi, b, options.fiber_samples, options.h);
    if (spread > out.report.max_spread || out.report.worst_base_point.size() == 0) {
      out.report.max_spread = std::max(out.report.max_spread, spread);
      out.report.worst_base_point = b.coords;
    }
  }
  out.report.projectable = out.report.max_spread <= options.tolerance;
  if (!out.report.projectable) {
    std::ostringstream msg;
    msg << "not projectable: induced Christoffels vary by " << out.report.max_spread << " along the fiber over "
        << format_coords(out.report.worst_base_point);
    throw NotProjectableError(msg.str(), out.report.max_spread);
  }
  const double h = options.h;
  out.connection = ConnectionField{S.target, [S, nabla, phi, h](const Point &b) {
                                     const std::vector<Point> fiber = S.fiber_sampler(b, 1);
                                     if (fiber.empty()) throw DegenerateInputError("empty fiber sample");
                                     return induced_christoffel_at(S, nabla, phi, fiber.front(), h);
                                   }};
  return out;
}

Vec tensor_T(const SubmersionMap &S, const ConnectionField &nabla, const VectorField &E, const VectorField &F,
             const Point &p, double h) {
  const Splitting sp = split(S, p);
  const Vec ve = sp.vertical * E(p);
  const VectorField vf = project_field(S, Projection::vertical, F);
  const VectorField hf = project_field(S, Projection::horizontal, F);
  return sp.horizontal * covariant_derivative(nabla, ve, vf, p, h) +
         sp.vertical * covariant_derivative(nabla, ve, hf, p, h);
}

Vec tensor_A(const SubmersionMap &S, const ConnectionField &nabla, const VectorField &E, const VectorField &F,
             const Point &p, double h) {
  const Splitting sp = split(S, p);
  const Vec he = sp.horizontal * E(p);
  const VectorField vf = project_field(S, Projection::vertical, F);
  const VectorField hf = project_field(S, Projection::horizontal, F);
  return sp.vertical * covariant_derivative(nabla, he, hf, p, h) +
         sp.horizontal * covariant_derivative(nabla, he, vf, p, h);
}

FiberConnection fiber_connection(const SubmersionMap &S, const ConnectionField &nabla, const Point &b, double h) {
  if (!S.fiber_embedding || !S.fiber_coordinates)
    throw UnsupportedError("fiber_connection: submersion provides no fiber parametrization");
  const int k = S.fiber_dim();
  const int n = S.total_dim();
  const ChartRef source = S.source;
  auto embed = [S, b](const Vec &y) { return S.fiber_embedding(b, y); };
  auto domain = [source, embed](const Vec &y) {
    try {
      return source->contains(embed(y));
    } catch (const Error &) {
      return false;
    }
  };
  ChartRef chart = make_chart(k, "fiber over " + format_coords(b.coords), domain);

  auto jacobian = [chart, embed, n, k, h](const Vec &y) {
    const Point at{y, chart->id};
    Mat J(n, k);
    for (int a = 0; a < k; ++a)
      J.col(a) = fd_directional(*chart, [&](const Point &q) { return Vec(embed(q.coords).coords); }, at,
                                unit_vector(k, a), h);
    return J;
  };
  // ∂_a ∂_b of the embedding by the symmetric four-point stencil.
  auto second = [chart, embed, k, h](const Vec &y, int a, int c) {
    const Vec ea = h * unit_vector(k, a);
    const Vec ec = h * unit_vector(k, c);
    for (const Vec &corner : {Vec(y + ea + ec), Vec(y + ea - ec), Vec(y - ea + ec), Vec(y - ea - ec)})
      if (!chart->contains(corner)) throw DomainError("fiber stencil left the chart domain", corner);
    const Vec num = embed(y + ea + ec).coords - embed(y + ea - ec).coords - embed(y - ea + ec).coords +
                    embed(y - ea - ec).coords;
    return Vec(num / (4.0 * h * h));
  };

  MetricField pulled{[source, embed, jacobian](const Point &y) {
    const Mat J = jacobian(y.coords);
    return Mat(J.transpose() * source->require_metric()(embed(y.coords)) * J);
  }};
  auto fiber_chart = std::make_shared<Chart>(*chart);
  fiber_chart->metric = pulled;
  ChartRef fchart = fiber_chart;

  auto christoffel = [S, nabla, embed, jacobian, second, k](const Point &y) {
    const Point q = embed(y.coords);
    const Mat J = jacobian(y.coords);
    const Mat V = split(S, q).vertical;
    const Christoffel gamma = nabla.at(q);
    const Eigen::ColPivHouseholderQR<Mat> qr(J);
    Christoffel out(k);
    for (int a = 0; a < k; ++a)
      for (int c = 0; c < k; ++c) {
        const Vec derivative = second(y.coords, a, c) + gamma.contract(J.col(a), J.col(c));
        const Vec coeffs = qr.solve(Vec(V * derivative));
        for (int e = 0; e < k; ++e) out(e, a, c) = coeffs[e];
      }
    return out;
  };

  FiberConnection out;
  out.chart = fchart;
  out.base = b;
  out.connection = ConnectionField{fchart, christoffel};
  out.embedding_jacobian = jacobian;
  out.embed = embed;
  return out;
}

std::pair<ResidualReport, ResidualReport> torsion_lemma_residuals(const SubmersionMap &S, const ConnectionField &nabla,
                                                                  const ConnectionField &nabla_base,
                                                                  const ScalarField &phi, const Point &p,
                                                                  const TorsionLemmaOptions &options) {
  const double h = options.h;
  const double defect = max_cshd_defect(S, nabla, nabla_base, phi, p, h);
  if (defect > options.cshd_tolerance) {
    std::ostringstream msg;
    msg << "torsion lemma requires a compatible pair; cshd defect " << defect << " at " << format_coords(p.coords);
    throw PreconditionError(msg.str());
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto random_vec = [&](int dim) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = unit(rng);
    return v;
  };

  const Point b = S(p);
  const Vec x = random_vec(S.base_dim());
  const Vec y = random_vec(S.base_dim());
  const VectorField X = VectorField::constant(x);
  const VectorField Y = VectorField::constant(y);
  const Splitting sp = split(S, p);
  const Vec lhs_h = sp.horizontal * torsion(nabla, horizontal_lift(S, X), horizontal_lift(S, Y), p, h);
  const Vec rhs_h = lift_at(S, p, torsion(nabla_base, X, Y, b, h));
  auto horizontal = ResidualReport::make(IdentityId::torsion_horizontal, p.coords,
                                         describe("X", x) + " " + describe("Y", y), (lhs_h - rhs_h).norm(),
                                         options.tolerance);

  const FiberConnection fiber = fiber_connection(S, nabla, b, h);
  const Vec y0 = S.fiber_coordinates(p);
  const Point fiber_point{y0, fiber.chart->id};
  const Mat J = fiber.embedding_jacobian(y0);
  const Vec v = random_vec(S.fiber_dim());
  const Vec w = random_vec(S.fiber_dim());
  const VectorField Vf = project_field(S, Projection::vertical, VectorField::constant(J * v));
  const VectorField Wf = project_field(S, Projection::vertical, VectorField::constant(J * w));
  const Vec lhs_v = sp.vertical * torsion(nabla, Vf, Wf, p, h);
  const Vec rhs_v =
      J * torsion(fiber.connection, VectorField::constant(v), VectorField::constant(w), fiber_point, h);
  auto vertical = ResidualReport::make(IdentityId::torsion_vertical, p.coords,
                                       describe("V", v) + " " + describe("W", w) + " (fiber coords)",
                                       (lhs_v - rhs_v).norm(), options.tolerance);
  return {horizontal, vertical};
}

Vec projected_curvature(const SubmersionMap &S, const ConnectionField &nabla, Projection p1, Projection p2,
                        Projection p3, const VectorField &E, const VectorField &F, const VectorField &G,
                        const Point &p, double h) {
  const VectorField pe = project_field(S, p1, E);
  const VectorField pf = project_field(S, p2, F);
  const VectorField pg = project_field(S, p3, G);
  auto projected_derivative = [S, nabla, p3, h, pg](VectorField dir) {
    return VectorField{[=](const Point &q) -> Vec {
      return split(S, q)[p3] * covariant_derivative(nabla, dir, pg, q, h);
    }};
  };
  const VectorField inner_f = projected_derivative(pf);
  const VectorField inner_e = projected_derivative(pe);
  const Vec bracket = lie_bracket(*nabla.chart, pe, pf, p, h);
  Vec out = covariant_derivative(nabla, bracket, pg, p, h);
  out -= covariant_derivative(nabla, pe, inner_f, p, h);
  out += covariant_derivative(nabla, pf, inner_e, p, h);
  return split(S, p)[p3] * out;
}

IdentityId identity_of(FundamentalEq eq) {
  switch (eq) {
    case FundamentalEq::VVV_W: return IdentityId::fundamental_VVV_W;
    case FundamentalEq::HUVW: return IdentityId::fundamental_HUVW;
    case FundamentalEq::VUVX: return IdentityId::fundamental_VUVX;
    case FundamentalEq::HUVX: return IdentityId::fundamental_HUVX;
    case FundamentalEq::VUXV: return IdentityId::fundamental_VUXV;
    case FundamentalEq::HUXV: return IdentityId::fundamental_HUXV;
    case FundamentalEq::VUXY: return IdentityId::fundamental_VUXY;
    case FundamentalEq::HUXY: return IdentityId::fundamental_HUXY;
    case FundamentalEq::VXYU: return IdentityId::fundamental_VXYU;
    case FundamentalEq::HXYU: return IdentityId::fundamental_HXYU;
    case FundamentalEq::VXYZ: return IdentityId::fundamental_VXYZ;
    case FundamentalEq::HXYZ: return IdentityId::fundamental_HXYZ;
  }
  return IdentityId::fundamental_VVV_W;
}

namespace {

/// Evaluation context for the curvature decomposition identities at one point.
class FundamentalTerms {
 public:
  FundamentalTerms(const SubmersionMap &S, const ConnectionField &nabla, const Point &p, double h)
      : S_(S), nabla_(nabla), p_(p), h_(h), sp_(split(S, p)) {}

  const Mat &H() const { return sp_.horizontal; }
  const Mat &V() const { return sp_.vertical; }

  Vec R(const VectorField &E, const VectorField &F, const VectorField &G) const {
    return curvature(nabla_, E, F, G, p_, h_);
  }
  Vec Rp(Projection a, Projection b, Projection c, const VectorField &E, const VectorField &F,
         const VectorField &G) const {
    return projected_curvature(S_, nabla_, a, b, c, E, F, G, p_, h_);
  }

  // T and A only read their first argument at p; the second is a field
  // because it is differentiated. Vectors are extended as constant fields,
  // which is exact by tensoriality.
  Vec T(const VectorField &E, const VectorField &F) const { return tensor_T(S_, nabla_, E, F, p_, h_); }
  Vec T(const Vec &e, const VectorField &F) const { return T(VectorField::constant(e), F); }
  Vec T(const VectorField &E, const Vec &f) const { return T(E, VectorField::constant(f)); }
  Vec T(const Vec &e, const Vec &f) const { return T(VectorField::constant(e), VectorField::constant(f)); }
  Vec A(const VectorField &E, const VectorField &F) const { return tensor_A(S_, nabla_, E, F, p_, h_); }
  Vec A(const Vec &e, const VectorField &F) const { return A(VectorField::constant(e), F); }
  Vec A(const VectorField &E, const Vec &f) const { return A(E, VectorField::constant(f)); }
  Vec A(const Vec &e, const Vec &f) const { return A(VectorField::constant(e), VectorField::constant(f)); }

  Vec Tor(const VectorField &E, const VectorField &F) const { return torsion(nabla_, E, F, p_, h_); }

  /// (∇_E S)_F G = ∇_E(S_F G) − S_{∇_E F} G − S_F(∇_E G) for S = T or A.
  Vec dT(const VectorField &E, const VectorField &F, const VectorField &G) const {
    return tensor_derivative(E, F, G, &tensor_T);
  }
  Vec dA(const VectorField &E, const VectorField &F, const VectorField &G) const {
    return tensor_derivative(E, F, G, &tensor_A);
  }

 private:
  using TensorFn = Vec (*)(const SubmersionMap &, const ConnectionField &, const VectorField &, const VectorField &,
                           const Point &, double);

  Vec tensor_derivative(const VectorField &E, const VectorField &F, const VectorField &G, TensorFn tensor) const {
    const SubmersionMap S = S_;
    const ConnectionField nabla = nabla_;
    const double h = h_;
    const VectorField composed{[=](const Point &q) { return tensor(S, nabla, F, G, q, h); }};
    Vec out = covariant_derivative(nabla_, E, composed, p_, h_);
    out -= tensor(S_, nabla_, VectorField::constant(covariant_derivative(nabla_, E, F, p_, h_)), G, p_, h_);
    out -= tensor(S_, nabla_, F, VectorField::constant(covariant_derivative(nabla_, E, G, p_, h_)), p_, h_);
    return out;
  }

  const SubmersionMap &S_;
  const ConnectionField &nabla_;
  const Point &p_;
  double h_;
  Splitting sp_;
};

}  // namespace

FundamentalSides fundamental_equation_sides(const SubmersionMap &S, const ConnectionField &nabla, FundamentalEq eq,
                                            const FundamentalFields &fields, const Point &p, double h) {
  constexpr auto hor = Projection::horizontal;
  constexpr auto ver = Projection::vertical;
  const VectorField U = project_field(S, ver, fields.U);
  const VectorField V = project_field(S, ver, fields.V);
  const VectorField W = project_field(S, ver, fields.W);
  const VectorField X = project_field(S, hor, fields.X);
  const VectorField Y = project_field(S, hor, fields.Y);
  const VectorField Z = project_field(S, hor, fields.Z);
  const FundamentalTerms t(S, nabla, p, h);

  FundamentalSides s;
  switch (eq) {
    case FundamentalEq::VVV_W:
      s.lhs = t.V() * t.R(U, V, W);
      s.rhs = t.Rp(ver, ver, ver, U, V, W) + t.T(V, t.T(U, W)) - t.T(U, t.T(V, W));
      break;
    case FundamentalEq::HUVW:
      s.lhs = t.H() * t.R(U, V, W);
      s.rhs = t.H() * t.dT(V, U, W) - t.H() * t.dT(U, V, W) - t.T(t.Tor(U, V), W);
      break;
    case FundamentalEq::VUVX:
      // Projector on the first term reproduced as displayed.
      s.lhs = t.V() * t.R(U, V, X);
      s.rhs = t.H() * t.dT(V, U, X) - t.V() * t.dT(U, V, X) - t.T(t.Tor(U, V), X);
      break;
    case FundamentalEq::HUVX:
      s.lhs = t.H() * t.R(U, V, X);
      s.rhs = t.Rp(ver, ver, hor, U, V, X) + t.T(V, t.T(U, X)) - t.T(U, t.T(V, X));
      break;
    case FundamentalEq::VUXV:
      // + A_X T_U V: the vertical part of ∇_X(T_U V) enters with the sign of ∇_X ∇_U V.
      s.lhs = t.V() * t.R(U, X, V);
      s.rhs = t.Rp(ver, hor, ver, U, X, V) - t.T(U, t.A(X, V)) + t.A(X, t.T(U, V));
      break;
    case FundamentalEq::HUXV: {
      const Vec tor = t.Tor(U, X);
      s.lhs = t.H() * t.R(U, X, V);
      s.rhs = t.H() * t.dT(X, U, V) - t.H() * t.dA(U, X, V) - t.A(t.A(X, U), V) + t.T(t.T(U, X), V) -
              t.T(tor, V) - t.A(tor, V);
      break;
    }
    case FundamentalEq::VUXY: {
      const Vec tor = t.Tor(U, X);
      s.lhs = t.V() * t.R(U, X, Y);
      s.rhs = t.V() * t.dT(X, U, Y) - t.V() * t.dA(U, X, Y) - t.A(t.A(X, U), Y) + t.T(t.T(U, X), Y) -
              t.T(tor, Y) - t.A(tor, Y);
      break;
    }
    case FundamentalEq::HUXY:
      s.lhs = t.H() * t.R(U, X, Y);
      s.rhs = t.Rp(ver, hor, hor, U, X, Y) - t.T(U, t.A(X, Y)) + t.A(X, t.T(U, Y));
      break;
    case FundamentalEq::VXYU:
      s.lhs = t.V() * t.R(X, Y, U);
      s.rhs = t.Rp(hor, hor, ver, X, Y, U) + t.A(Y, t.A(X, U)) - t.A(X, t.A(Y, U));
      break;
    case FundamentalEq::HXYU: {
      const Vec tor = t.Tor(X, Y);
      s.lhs = t.H() * t.R(X, Y, U);
      s.rhs = t.H() * t.dA(Y, X, U) - t.H() * t.dA(X, Y, U) + t.T(t.A(X, Y), U) - t.T(t.A(Y, X), U) -
              t.T(tor, U) - t.A(tor, U);
      break;
    }
    case FundamentalEq::VXYZ: {
      const Vec tor = t.Tor(X, Y);
      s.lhs = t.V() * t.R(X, Y, Z);
      s.rhs = t.V() * t.dA(Y, X, Z) - t.V() * t.dA(X, Y, Z) + t.T(t.A(X, Y), Z) - t.T(t.A(Y, X), Z) -
              t.T(tor, Z) - t.A(tor, Z);
      break;
    }
    case FundamentalEq::HXYZ:
      s.lhs = t.H() * t.R(X, Y, Z);
      s.rhs = t.Rp(hor, hor, hor, X, Y, Z) + t.A(Y, t.A(X, Z)) - t.A(X, t.A(Y, Z));
      break;
  }
  return s;
}

ResidualReport fundamental_equation_residual(const SubmersionMap &S, const ConnectionField &nabla,
                                             FundamentalEq eq, const FundamentalFields &fields, const Point &p,
                                             double tolerance, double h) {
  check_nested_step(h, tolerance);
  const FundamentalSides s = fundamental_equation_sides(S, nabla, eq, fields, p, h);
  const IdentityId id = identity_of(eq);
  auto report = ResidualReport::make(id, p.coords, "random unit-scale test fields", (s.lhs - s.rhs).norm(),
                                     tolerance);
  if (report.exploratory) report.note = "involves covariant derivatives of T/A; reported, never gating";
  return report;
}

DualityReport duality_proposition_check(const SubmersionMap &S, const ConnectionField &nabla,
                                        const ConnectionField &nabla_base, const ScalarField &phi,
                                        std::span<const Point> points, double tolerance, double h) {
  const ConnectionField dual_m = dual_connection(S.source->require_metric(), nabla, h);
  const ConnectionField dual_b = dual_connection(S.target->require_metric(), nabla_base, h);
  DualityReport out;
  double worst_primal = 0.0;
  double worst_dual = 0.0;
  Vec primal_at;
  Vec dual_at;
  for (const Point &p : points) {
    DualityVerdict v;
    v.point = p.coords;
    v.primal = max_cshd_defect(S, nabla, nabla_base, phi, p, h);
    v.dual = max_cshd_defect(S, dual_m, dual_b, phi, p, h);
    v.agree = (v.primal <= tolerance) == (v.dual <= tolerance);
    out.verdicts_agree = out.verdicts_agree && v.agree;
    if (primal_at.size() == 0 || v.primal > worst_primal) {
      worst_primal = v.primal;
      primal_at = p.coords;
    }
    if (dual_at.size() == 0 || v.dual > worst_dual) {
      worst_dual = v.dual;
      dual_at = p.coords;
    }
    out.per_point.push_back(std::move(v));
  }
  out.primal = ResidualReport::make(IdentityId::cshd, primal_at, "primal pair, max over points", worst_primal,
                                    tolerance);
  out.dual =
      ResidualReport::make(IdentityId::cshd_dual, dual_at, "dual pair, max over points", worst_dual, tolerance);
  return out;
}

}  // namespace csub
