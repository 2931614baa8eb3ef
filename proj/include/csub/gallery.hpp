#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "csub/connection.hpp"
#include "csub/submersion.hpp"

namespace csub {

struct Box {
  Vec lo;
  Vec hi;

  Vec center() const { return 0.5 * (lo + hi); }
};

/// What a bundle advertises about itself; tests check these claims.
struct BundleClaims {
  bool cshd = false;
  double cshd_tolerance = 1e-5;
  bool torsion_free = true;
  bool horizontal_a_zz_zero = false;
};

struct GeometryBundle {
  std::string name;
  SubmersionMap S;
  ScalarField phi;
  ConnectionField nabla_m;
  ConnectionField nabla_b;
  std::string notes;
  Box box;  // sampling box on M
  BundleClaims claims;

  int total_dim() const { return S.total_dim(); }
  int base_dim() const { return S.base_dim(); }

  /// Deterministic Halton points in the box; `offset` skips into the sequence.
  std::vector<Point> sample_points(int count, std::uint64_t offset = 0) const;
  /// Images of sample_points under π.
  std::vector<Point> sample_base_points(int count, std::uint64_t offset = 0) const;

  nlohmann::json manifest() const;
};

/// Component k of the Halton sequence (prime base per coordinate), index ≥ 1.
double halton(std::uint64_t index, int coordinate);

/// Euclidean R^n → R^m, φ = 0, zero connections.
GeometryBundle make_flat_product(int n, int m);

/// Upper half-space with g = I / x_n² over Euclidean R^{n-1}, φ = −log x_n.
GeometryBundle make_hyperbolic_halfspace(int n);

/// A function of one variable with its derivative.
struct Profile {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static Profile constant(double c);
  static Profile linear(double slope, double intercept = 0.0);
};

/// g_m = e^{2ψ(x)} dx² + dy² over (R, dx²), π(x,y) = x, φ = ψ.
GeometryBundle make_warped_line(const Profile &psi);

/// g_m = e^{2φ} h(x) ⊕ k(x,y) over (R^m, h) with smooth seeded h, k, φ.
/// φ depends on all coordinates, so both T and A are generically nonzero.
GeometryBundle make_random_conformal(std::uint64_t seed, int n, int m);

/// Replaces ∇_M by ∇_M + S with a seeded symmetric S depending on base coordinates
/// only, and ∇_B by the induced connection. Torsion-free, no longer Levi-Civita.
GeometryBundle with_symmetric_perturbation(const GeometryBundle &bundle, std::uint64_t seed, double scale = 0.2);

/// Adds `delta` to Γ*^0_00 of the base connection; the result violates the compatibility condition.
GeometryBundle with_broken_base(const GeometryBundle &bundle, double delta = 0.1);

/// Same geometry with both connections rebuilt as finite-difference Levi-Civita at step h
/// and φ stripped of its analytic gradient.
GeometryBundle numerical_view(const GeometryBundle &bundle, double h);

/// Smooth unit-scale random vector field on a chart of dimension `dim`.
VectorField random_field(std::uint64_t seed, int dim);

/// Smooth unit-scale random scalar field with an analytic gradient.
ScalarField random_scalar(std::uint64_t seed, int dim);

/// Parses "flat_product:n:m", "hyperbolic:n", "warped_line:const|linear", "random:seed:n:m".
GeometryBundle bundle_from_spec(const std::string &spec);

/// Spec strings of every built-in bundle.
std::vector<std::string> builtin_bundle_specs();

}  // namespace csub
