#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>

#include "csub/chart.hpp"

namespace csub {

/// Every identity the library can check numerically.
enum class IdentityId {
  conformality,            // g_m(u,v) = e^{2φ} g_b(π_* u, π_* v) on horizontal vectors
  conformal_factor,        // recovered φ equals the bundle's φ
  cshd,                    // compatibility of (∇, ∇*) with horizontal lifts
  cshd_dual,               // same compatibility for the dual pair
  duality_agreement,       // primal and dual verdicts coincide
  projectability,          // fiber spread of the induced Christoffels
  torsion_horizontal,      // H Tor∇(X̃,Ỹ) = (Tor∇*(X,Y))~
  torsion_vertical,        // V Tor∇(V,W) = Tor∇̂(V,W)
  torsion_induced,         // ∇* torsion-free when ∇ is
  torsion_fiber,           // ∇̂ torsion-free when ∇ is
  fundamental_VVV_W,
  fundamental_HUVW,
  fundamental_VUVX,
  fundamental_HUVX,
  fundamental_VUXV,
  fundamental_HUXV,
  fundamental_VUXY,
  fundamental_HUXY,
  fundamental_VXYU,
  fundamental_HXYU,
  fundamental_VXYZ,
  fundamental_HXYZ,
  decomposition_horizontal,  // π_* H(E') decomposition along a curve
  decomposition_vertical,    // V(E') decomposition along a curve
  sigma_dd_horizontal,       // π_* H(σ'') decomposition
  sigma_dd_vertical,         // V(σ'') decomposition
  geodesic_defect,           // |σ''| along an integrated geodesic
  projection_condition,      // geodesic projection criterion residual
  projection_agreement,      // criterion verdict matches |σ_*''| verdict
  lift_drift,                // π∘σ against the base curve
  lift_hypothesis,           // A_Z Z for horizontal Z along a lift
  lift_condition,            // 2X(φ)π_*X − π_*(grad φ)|X|²
  lift_geodesic_defect,      // |σ''| of a lifted base geodesic
  lift_agreement,            // defect verdict matches condition verdict
};

std::string_view to_string(IdentityId id);
std::optional<IdentityId> identity_from_string(std::string_view name);
/// Identities whose statement involves covariant derivatives of T or A.
bool is_exploratory(IdentityId id);

struct ResidualReport {
  IdentityId identity = IdentityId::conformality;
  Vec point;
  std::string inputs;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool exploratory = false;
  std::string note;

  static ResidualReport make(IdentityId id, Vec point, std::string inputs, double residual, double tolerance);
};

nlohmann::json to_json(const ResidualReport &report);

/// Serializes JSON with floats printed as %.16e and keys in sorted order.
std::string dump_report_json(const nlohmann::json &doc, int indent = 2);

}  // namespace csub
