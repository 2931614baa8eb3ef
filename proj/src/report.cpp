#include "csub/report.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <utility>

namespace csub {

namespace {

constexpr std::array<std::pair<IdentityId, std::string_view>, 34> kNames{{
    {IdentityId::conformality, "conformality"},
    {IdentityId::conformal_factor, "conformal_factor"},
    {IdentityId::cshd, "cshd"},
    {IdentityId::cshd_dual, "cshd_dual"},
    {IdentityId::duality_agreement, "duality_agreement"},
    {IdentityId::projectability, "projectability"},
    {IdentityId::torsion_horizontal, "torsion_horizontal"},
    {IdentityId::torsion_vertical, "torsion_vertical"},
    {IdentityId::torsion_induced, "torsion_induced"},
    {IdentityId::torsion_fiber, "torsion_fiber"},
    {IdentityId::fundamental_VVV_W, "fundamental.VVV_W"},
    {IdentityId::fundamental_HUVW, "fundamental.HUVW"},
    {IdentityId::fundamental_VUVX, "fundamental.VUVX"},
    {IdentityId::fundamental_HUVX, "fundamental.HUVX"},
    {IdentityId::fundamental_VUXV, "fundamental.VUXV"},
    {IdentityId::fundamental_HUXV, "fundamental.HUXV"},
    {IdentityId::fundamental_VUXY, "fundamental.VUXY"},
    {IdentityId::fundamental_HUXY, "fundamental.HUXY"},
    {IdentityId::fundamental_VXYU, "fundamental.VXYU"},
    {IdentityId::fundamental_HXYU, "fundamental.HXYU"},
    {IdentityId::fundamental_VXYZ, "fundamental.VXYZ"},
    {IdentityId::fundamental_HXYZ, "fundamental.HXYZ"},
    {IdentityId::decomposition_horizontal, "decomposition_horizontal"},
    {IdentityId::decomposition_vertical, "decomposition_vertical"},
    {IdentityId::sigma_dd_horizontal, "sigma_dd_horizontal"},
    {IdentityId::sigma_dd_vertical, "sigma_dd_vertical"},
    {IdentityId::geodesic_defect, "geodesic_defect"},
    {IdentityId::projection_condition, "projection_condition"},
    {IdentityId::projection_agreement, "projection_agreement"},
    {IdentityId::lift_drift, "lift_drift"},
    {IdentityId::lift_hypothesis, "lift_hypothesis"},
    {IdentityId::lift_condition, "lift_condition"},
    {IdentityId::lift_geodesic_defect, "lift_geodesic_defect"},
    {IdentityId::lift_agreement, "lift_agreement"},
}};

void emit(std::string &out, const nlohmann::json &j, int indent, int depth);

void newline(std::string &out, int indent, int depth) {
  if (indent < 0) return;
  out += '\n';
  out.append(static_cast<std::size_t>(indent * depth), ' ');
}

void emit_number(std::string &out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  out += buf;
}

void emit(std::string &out, const nlohmann::json &j, int indent, int depth) {
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // nlohmann::json keeps keys sorted
        if (!first) out += ',';
        first = false;
        newline(out, indent, depth + 1);
        out += nlohmann::json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        emit(out, it.value(), indent, depth + 1);
      }
      newline(out, indent, depth);
      out += '}';
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto &el : j) {
        if (!first) out += ',';
        first = false;
        newline(out, indent, depth + 1);
        emit(out, el, indent, depth + 1);
      }
      newline(out, indent, depth);
      out += ']';
      return;
    }
    case nlohmann::json::value_t::number_float:
      emit_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
  }
}

}  // namespace

std::string_view to_string(IdentityId id) {
  for (const auto &[key, name] : kNames)
    if (key == id) return name;
  return "unknown";
}

std::optional<IdentityId> identity_from_string(std::string_view name) {
  for (const auto &[key, label] : kNames)
    if (label == name) return key;
  return std::nullopt;
}

bool is_exploratory(IdentityId id) {
  switch (id) {
    case IdentityId::fundamental_HUVW:
    case IdentityId::fundamental_VUVX:
    case IdentityId::fundamental_HUXV:
    case IdentityId::fundamental_VUXY:
    case IdentityId::fundamental_HXYU:
    case IdentityId::fundamental_VXYZ:
      return true;
    default:
      return false;
  }
}

ResidualReport ResidualReport::make(IdentityId id, Vec point, std::string inputs, double residual,
                                    double tolerance) {
  ResidualReport r;
  r.identity = id;
  r.point = std::move(point);
  r.inputs = std::move(inputs);
  r.residual = residual;
  r.tolerance = tolerance;
  r.pass = std::isfinite(residual) && residual <= tolerance;
  r.exploratory = is_exploratory(id);
  return r;
}

nlohmann::json to_json(const ResidualReport &report) {
  nlohmann::json point = nlohmann::json::array();
  for (Eigen::Index i = 0; i < report.point.size(); ++i) point.push_back(report.point[i]);
  nlohmann::json j{
      {"identity_id", std::string(to_string(report.identity))},
      {"point", point},
      {"inputs", report.inputs},
      {"residual_norm", report.residual},
      {"tolerance", report.tolerance},
      {"pass", report.pass},
      {"exploratory", report.exploratory},
  };
  if (!report.note.empty()) j["note"] = report.note;
  return j;
}

std::string dump_report_json(const nlohmann::json &doc, int indent) {
  std::string out;
  emit(out, doc, indent, 0);
  out += '\n';
  return out;
}

}  // namespace csub
