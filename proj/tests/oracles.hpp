#pragma once

// Closed forms used as independent references. Nothing here calls into the library's
// differentiation or connection code.

#include <Eigen/Dense>

#include <array>
#include <cmath>

namespace oracle {

using Vec2 = Eigen::Vector2d;

/// Γ^k_ij of g = I / y² on the upper half-plane; index 0 = x, 1 = y.
inline double h2_christoffel(int k, int i, int j, double y) {
  if (k == 0) return ((i == 0 && j == 1) || (i == 1 && j == 0)) ? -1.0 / y : 0.0;
  if (i == 0 && j == 0) return 1.0 / y;
  if (i == 1 && j == 1) return -1.0 / y;
  return 0.0;
}

/// ∂_y Γ^k_ij for the same metric.
inline double h2_christoffel_dy(int k, int i, int j, double y) {
  return -h2_christoffel(k, i, j, y) / y;
}

/// R(e_a, e_b) e_c with R(E,F)G = ∇_[E,F]G − ∇_E∇_F G + ∇_F∇_E G, from the closed-form Γ:
/// (∇_a ∇_b e_c)^k = ∂_a Γ^k_bc + Γ^k_al Γ^l_bc.
inline Vec2 h2_curvature(int a, int b, int c, double y) {
  Vec2 r = Vec2::Zero();
  for (int k = 0; k < 2; ++k) {
    auto dd = [&](int s, int t) {
      double v = s == 1 ? h2_christoffel_dy(k, t, c, y) : 0.0;
      for (int l = 0; l < 2; ++l) v += h2_christoffel(k, s, l, y) * h2_christoffel(l, t, c, y);
      return v;
    };
    r[k] = -dd(a, b) + dd(b, a);
  }
  return r;
}

/// Vertical geodesic of H² from (0, y0) with velocity (0, v): y(t) = y0 exp(v t / y0).
inline double h2_vertical_y(double y0, double v, double t) { return y0 * std::exp(v * t / y0); }

/// Center of the boundary-centered circle through (x, y) with velocity (vx, vy): c = x + y vy / vx.
inline double h2_circle_center(double x, double y, double vx, double vy) { return x + y * vy / vx; }

/// Conformally flat g = e^{2f} I: Γ^k_ij = δ_ki ∂_j f + δ_kj ∂_i f − δ_ij ∂_k f.
template <int N>
double conformal_christoffel(int k, int i, int j, const std::array<double, N> &df) {
  return (k == i ? df[j] : 0.0) + (k == j ? df[i] : 0.0) - (i == j ? df[k] : 0.0);
}

}  // namespace oracle
