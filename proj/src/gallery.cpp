#include "csub/gallery.hpp"

#include <cmath>
#include <random>
#include <optional>
#include <sstream>

namespace csub {

namespace {

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

nlohmann::json to_array(const Vec &v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Box cube(int n, double lo, double hi) { return Box{Vec::Constant(n, lo), Vec::Constant(n, hi)}; }

/// Coordinate projection whose fiber sampler draws Halton points from the fiber part of `box`.
SubmersionMap boxed_projection(ChartRef source, ChartRef target, const Box &box) {
  const int n = source->dim;
  const int m = target->dim;
  const Vec lo = box.lo.tail(n - m);
  const Vec hi = box.hi.tail(n - m);
  auto sampler = [source, lo, hi, n, m](const Point &b, int count) {
    std::vector<Point> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int s = 1; s <= count; ++s) {
      Vec c(n);
      c.head(m) = b.coords;
      for (int k = 0; k < n - m; ++k)
        c[m + k] = lo[k] + (hi[k] - lo[k]) * halton(static_cast<std::uint64_t>(s), k);
      out.push_back(Point{std::move(c), source->id});
    }
    return out;
  };
  return coordinate_projection(std::move(source), std::move(target), sampler);
}

/// a·tanh(w·x + c) with its gradient.
struct TanhTerm {
  Vec w;
  double c = 0.0;
  double a = 1.0;

  double value(const Vec &x) const { return a * std::tanh(w.dot(x) + c); }
  Vec gradient(const Vec &x) const {
    const double t = std::tanh(w.dot(x) + c);
    return a * (1.0 - t * t) * w;
  }
};

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Vec vec(int dim, double lo = -1.0, double hi = 1.0) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = uniform(lo, hi);
    return v;
  }
  TanhTerm term(int dim, double amplitude) { return TanhTerm{vec(dim), uniform(), amplitude * uniform()}; }

 private:
  std::mt19937_64 rng_;
};

/// L(x) Lᵀ(x) + floor·I with L_ij = tanh terms in the first `vars` coordinates.
struct RandomSpd {
  int size = 0;
  int vars = 0;
  double floor = 0.5;
  std::vector<TanhTerm> entries;  // row-major size × size

  static RandomSpd draw(Draw &d, int size, int vars) {
    RandomSpd out;
    out.size = size;
    out.vars = vars;
    for (int i = 0; i < size * size; ++i) out.entries.push_back(d.term(vars, 0.6));
    return out;
  }
  Mat factor(const Vec &x) const {
    Mat L(size, size);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) L(i, j) = entries[static_cast<std::size_t>(i * size + j)].value(x.head(vars));
    return L;
  }
  Mat value(const Vec &x) const {
    const Mat L = factor(x);
    return L * L.transpose() + floor * Mat::Identity(size, size);
  }
  /// ∂_l of the matrix for l < vars; zero beyond.
  Mat partial(const Vec &x, int l) const {
    if (l >= vars) return Mat::Zero(size, size);
    const Mat L = factor(x);
    Mat dL(size, size);
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) dL(i, j) = entries[static_cast<std::size_t>(i * size + j)].gradient(x.head(vars))[l];
    return dL * L.transpose() + L * dL.transpose();
  }
};

ScalarField scalar_from_terms(std::vector<TanhTerm> terms, double offset = 0.0) {
  auto value = [terms, offset](const Point &p) {
    double acc = offset;
    for (const auto &t : terms) acc += t.value(p.coords);
    return acc;
  };
  auto gradient = [terms](const Point &p) {
    Vec acc = Vec::Zero(p.dim());
    for (const auto &t : terms) acc += t.gradient(p.coords);
    return acc;
  };
  return ScalarField{value, gradient};
}

}  // namespace

double halton(std::uint64_t index, int coordinate) {
  const int base = kPrimes[coordinate % static_cast<int>(std::size(kPrimes))];
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
  }
  return r;
}

std::vector<Point> GeometryBundle::sample_points(int count, std::uint64_t offset) const {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(count));
  const int n = total_dim();
  for (int s = 0; s < count; ++s) {
    Vec c(n);
    for (int k = 0; k < n; ++k)
      c[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * halton(offset + static_cast<std::uint64_t>(s) + 1, k);
    out.push_back(Point{std::move(c), S.source->id});
  }
  return out;
}

std::vector<Point> GeometryBundle::sample_base_points(int count, std::uint64_t offset) const {
  std::vector<Point> out;
  for (const Point &p : sample_points(count, offset)) out.push_back(S(p));
  return out;
}

nlohmann::json GeometryBundle::manifest() const {
  return nlohmann::json{
      {"name", name},
      {"total_dim", total_dim()},
      {"base_dim", base_dim()},
      {"box", {{"lo", to_array(box.lo)}, {"hi", to_array(box.hi)}}},
      {"claims",
       {{"cshd", claims.cshd},
        {"torsion_free", claims.torsion_free},
        {"horizontal_a_zz_zero", claims.horizontal_a_zz_zero}}},
      {"tolerances", {{"cshd", claims.cshd_tolerance}}},
      {"notes", notes},
  };
}

Profile Profile::constant(double c) {
  std::ostringstream name;
  name << "const(" << c << ")";
  return Profile{name.str(), [c](double) { return c; }, [](double) { return 0.0; }};
}

Profile Profile::linear(double slope, double intercept) {
  std::ostringstream name;
  name << "linear(" << slope << "," << intercept << ")";
  return Profile{name.str(), [=](double x) { return slope * x + intercept; }, [slope](double) { return slope; }};
}

GeometryBundle make_flat_product(int n, int m) {
  if (!(n > m && m >= 1)) throw PreconditionError("make_flat_product: need n > m >= 1");
  auto source = make_chart(n, "R^" + std::to_string(n), {}, MetricField::euclidean(n));
  auto target = make_chart(m, "R^" + std::to_string(m), {}, MetricField::euclidean(m));
  GeometryBundle b;
  b.name = "flat_product:" + std::to_string(n) + ":" + std::to_string(m);
  b.box = cube(n, -1.0, 1.0);
  b.S = boxed_projection(source, target, b.box);
  b.phi = ScalarField::constant(0.0);
  b.nabla_m = ConnectionField::flat(source);
  b.nabla_b = ConnectionField::flat(target);
  b.notes = "Euclidean product; T = A = 0";
  b.claims = BundleClaims{true, 1e-9, true, true};
  return b;
}

GeometryBundle make_hyperbolic_halfspace(int n) {
  if (n < 2) throw PreconditionError("make_hyperbolic_halfspace: need n >= 2");
  const int last = n - 1;
  MetricField g{[n, last](const Point &p) {
    const double y = p.coords[last];
    return Mat(Mat::Identity(n, n) / (y * y));
  }};
  auto source = make_chart(n, "H^" + std::to_string(n), [last](const Vec &x) { return x[last] > 0.0; }, g);
  auto target = make_chart(n - 1, "R^" + std::to_string(n - 1), {}, MetricField::euclidean(n - 1));

  // Conformally flat: Γ^k_ij = δ^k_i f_j + δ^k_j f_i − δ_ij f_k with f = −log x_n.
  auto christoffel = [n, last](const Point &p) {
    const double inv = 1.0 / p.coords[last];
    Christoffel gamma(n);
    for (int i = 0; i < n; ++i) {
      gamma(i, i, last) -= inv;
      gamma(i, last, i) -= inv;
      gamma(last, i, i) += inv;
    }
    return gamma;
  };

  GeometryBundle b;
  b.name = "hyperbolic:" + std::to_string(n);
  b.box = cube(n, -1.0, 1.0);
  b.box.lo[last] = 0.5;
  b.box.hi[last] = 4.0;
  b.S = boxed_projection(source, target, b.box);
  b.phi = ScalarField{[last](const Point &p) { return -std::log(p.coords[last]); },
                      [n, last](const Point &p) {
                        Vec d = Vec::Zero(n);
                        d[last] = -1.0 / p.coords[last];
                        return d;
                      }};
  b.nabla_m = ConnectionField{source, christoffel};
  b.nabla_b = ConnectionField::flat(target);
  b.notes = "upper half-space, g = I/x_n^2 over Euclidean base, phi = -log x_n";
  b.claims = BundleClaims{true, 1e-5, true, false};
  return b;
}

GeometryBundle make_warped_line(const Profile &psi) {
  MetricField g{[psi](const Point &p) {
    Mat m = Mat::Identity(2, 2);
    m(0, 0) = std::exp(2.0 * psi.value(p.coords[0]));
    return m;
  }};
  auto source = make_chart(2, "warped strip", {}, g);
  auto target = make_chart(1, "R", {}, MetricField::euclidean(1));
  auto christoffel = [psi](const Point &p) {
    Christoffel gamma(2);
    gamma(0, 0, 0) = psi.derivative(p.coords[0]);
    return gamma;
  };

  GeometryBundle b;
  b.name = "warped_line:" + psi.name;
  b.box = cube(2, -1.0, 1.0);
  b.S = boxed_projection(source, target, b.box);
  b.phi = ScalarField{[psi](const Point &p) { return psi.value(p.coords[0]); },
                      [psi](const Point &p) { return Vec(Vec::Unit(2, 0) * psi.derivative(p.coords[0])); }};
  b.nabla_m = ConnectionField{source, christoffel};
  b.nabla_b = ConnectionField::flat(target);
  b.notes = "g = exp(2 psi(x)) dx^2 + dy^2 over (R, dx^2), psi = " + psi.name;
  b.claims = BundleClaims{true, 1e-5, true, true};
  return b;
}

GeometryBundle make_random_conformal(std::uint64_t seed, int n, int m) {
  if (!(n > m && m >= 1)) throw PreconditionError("make_random_conformal: need n > m >= 1");
  Draw d(seed);
  const RandomSpd base = RandomSpd::draw(d, m, m);
  const RandomSpd fiber = RandomSpd::draw(d, n - m, n);
  std::vector<TanhTerm> phi_terms{d.term(n, 0.4), d.term(n, 0.3)};
  const ScalarField phi = scalar_from_terms(phi_terms);
  const int k = n - m;

  MetricField gm{[=](const Point &p) {
    Mat g = Mat::Zero(n, n);
    g.topLeftCorner(m, m) = std::exp(2.0 * phi(p)) * base.value(p.coords.head(m));
    g.bottomRightCorner(k, k) = fiber.value(p.coords);
    return g;
  }};
  MetricDerivative dgm = [=](const Point &p) {
    const double e2 = std::exp(2.0 * phi(p));
    const Vec dphi = phi.gradient(p);
    const Mat h = base.value(p.coords.head(m));
    std::vector<Mat> out;
    for (int l = 0; l < n; ++l) {
      Mat dg = Mat::Zero(n, n);
      dg.topLeftCorner(m, m) = e2 * (2.0 * dphi[l] * h + base.partial(p.coords.head(m), l));
      dg.bottomRightCorner(k, k) = fiber.partial(p.coords, l);
      out.push_back(std::move(dg));
    }
    return out;
  };
  MetricField gb{[base](const Point &b) { return base.value(b.coords); }};
  MetricDerivative dgb = [base, m](const Point &b) {
    std::vector<Mat> out;
    for (int l = 0; l < m; ++l) out.push_back(base.partial(b.coords, l));
    return out;
  };

  const std::string name =
      "random:" + std::to_string(seed) + ":" + std::to_string(n) + ":" + std::to_string(m);
  auto source = make_chart(n, name, {}, gm);
  auto target = make_chart(m, name + " base", {}, gb);

  GeometryBundle b;
  b.name = name;
  b.box = cube(n, -1.0, 1.0);
  b.S = boxed_projection(source, target, b.box);
  b.phi = phi;
  b.nabla_m = levi_civita(source, gm, dgm);
  b.nabla_b = levi_civita(target, gb, dgb);
  b.notes = "seeded block metric exp(2 phi) h(x) + k(x,y); phi depends on all coordinates";
  b.claims = BundleClaims{true, 1e-5, true, false};
  return b;
}

GeometryBundle with_symmetric_perturbation(const GeometryBundle &bundle, std::uint64_t seed, double scale) {
  const int n = bundle.total_dim();
  const int m = bundle.base_dim();
  Draw d(seed ^ 0x9e3779b97f4a7c15ULL);
  // S^k_ij = scale (s^k_ij + t^k_ij tanh(w·x_base + c)), symmetric in i, j.
  Christoffel constant_part(n);
  Christoffel varying_part(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double s = scale * d.uniform();
        const double t = scale * d.uniform();
        constant_part(k, i, j) = constant_part(k, j, i) = s;
        varying_part(k, i, j) = varying_part(k, j, i) = t;
      }
  const Vec w = d.vec(m);
  const double c = d.uniform();
  const ConnectionField original = bundle.nabla_m;
  ConnectionField perturbed{original.chart, [=](const Point &p) {
                              const double wave = std::tanh(w.dot(p.coords.head(m)) + c);
                              Christoffel gamma = original.at(p);
                              gamma += constant_part;
                              for (int k = 0; k < n; ++k)
                                for (int i = 0; i < n; ++i)
                                  for (int j = 0; j < n; ++j) gamma(k, i, j) += wave * varying_part(k, i, j);
                              return gamma;
                            }};

  GeometryBundle out = bundle;
  out.name = bundle.name + "+sym" + std::to_string(seed);
  out.nabla_m = perturbed;
  const std::vector<Point> checks = bundle.sample_base_points(3, 97);
  out.nabla_b = induced_connection(out.S, out.nabla_m, out.phi, checks).connection;
  out.notes = bundle.notes + "; connection shifted by a symmetric base-dependent tensor, base connection induced";
  return out;
}

GeometryBundle with_broken_base(const GeometryBundle &bundle, double delta) {
  GeometryBundle out = bundle;
  const ConnectionField original = bundle.nabla_b;
  out.nabla_b = ConnectionField{original.chart, [original, delta](const Point &b) {
                                  Christoffel gamma = original.at(b);
                                  gamma(0, 0, 0) += delta;
                                  return gamma;
                                }};
  out.name = bundle.name + "+broken";
  out.claims.cshd = false;
  out.notes = bundle.notes + "; base connection perturbed";
  return out;
}

GeometryBundle numerical_view(const GeometryBundle &bundle, double h) {
  GeometryBundle out = bundle;
  out.nabla_m = levi_civita(bundle.S.source, bundle.S.source->require_metric(), h);
  out.nabla_b = levi_civita(bundle.S.target, bundle.S.target->require_metric(), h);
  out.phi = ScalarField{bundle.phi.eval, {}};
  return out;
}

VectorField random_field(std::uint64_t seed, int dim) {
  Draw d(seed * 0x2545F4914F6CDD1DULL + 17);
  std::vector<double> offsets;
  std::vector<TanhTerm> terms;
  for (int k = 0; k < dim; ++k) {
    offsets.push_back(d.uniform());
    terms.push_back(d.term(dim, 0.8));
  }
  return VectorField{[offsets, terms, dim](const Point &p) {
    Vec v(dim);
    for (int k = 0; k < dim; ++k) v[k] = offsets[static_cast<std::size_t>(k)] + terms[static_cast<std::size_t>(k)].value(p.coords);
    return v;
  }};
}

ScalarField random_scalar(std::uint64_t seed, int dim) {
  Draw d(seed * 0x5851F42D4C957F2DULL + 3);
  const double offset = d.uniform();
  return scalar_from_terms({d.term(dim, 0.8), d.term(dim, 0.5)}, offset);
}

GeometryBundle bundle_from_spec(const std::string &spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.empty()) throw PreconditionError("empty bundle spec");
  auto integer = [&](std::size_t i) -> long long {
    if (i >= parts.size()) throw PreconditionError("bundle spec '" + spec + "' is missing fields");
    try {
      std::size_t used = 0;
      const long long v = std::stoll(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
      return v;
    } catch (const std::logic_error &) {
      throw PreconditionError("bundle spec '" + spec + "': '" + parts[i] + "' is not an integer");
    }
  };
  const std::string &kind = parts[0];
  if (kind == "flat_product" && parts.size() == 3)
    return make_flat_product(static_cast<int>(integer(1)), static_cast<int>(integer(2)));
  if (kind == "hyperbolic" && parts.size() == 2) return make_hyperbolic_halfspace(static_cast<int>(integer(1)));
  if (kind == "warped_line" && parts.size() == 2) {
    std::optional<GeometryBundle> b;
    if (parts[1] == "const") b = make_warped_line(Profile::constant(0.3));
    if (parts[1] == "linear") b = make_warped_line(Profile::linear(1.0));
    if (b) {
      b->name = spec;  // the profile stays in the notes
      return *b;
    }
  }
  if (kind == "random" && parts.size() == 4)
    return make_random_conformal(static_cast<std::uint64_t>(integer(1)), static_cast<int>(integer(2)),
                                 static_cast<int>(integer(3)));
  throw PreconditionError("unknown bundle spec '" + spec + "'");
}

std::vector<std::string> builtin_bundle_specs() {
  return {"flat_product:2:1", "flat_product:3:2", "flat_product:4:1", "hyperbolic:2",     "hyperbolic:3",
          "hyperbolic:4",     "warped_line:const", "warped_line:linear", "random:1:3:2", "random:2:4:2"};
}

}  // namespace csub
