#include "verify_cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include "csub/gallery.hpp"
#include "csub/geodesic.hpp"
#include "csub/report.hpp"
#include "csub/submersion.hpp"

namespace csub::cli {

namespace {

using json = nlohmann::json;

const std::map<std::string, double> &default_tolerances() {
  static const std::map<std::string, double> table = [] {
    std::map<std::string, double> t{
        {"conformality", 1e-9},
        {"conformal_factor", 1e-9},
        {"cshd", 1e-4},
        {"cshd_dual", 1e-4},
        {"duality_agreement", 0.5},
        {"projectability", 1e-5},
        {"torsion_horizontal", 1e-6},
        {"torsion_vertical", 1e-6},
        {"torsion_induced", 1e-6},
        {"torsion_fiber", 1e-6},
        {"decomposition_horizontal", 1e-4},
        {"decomposition_vertical", 1e-4},
        {"sigma_dd_horizontal", 1e-4},
        {"sigma_dd_vertical", 1e-4},
        {"geodesic_defect", 1e-6},
        {"projection_condition", 1e-4},
        {"projection_agreement", 0.5},
        {"lift_drift", 1e-6},
        {"lift_hypothesis", 1e-6},
        {"lift_condition", 1e-6},
        {"lift_geodesic_defect", 1e-6},
        {"lift_agreement", 0.5},
    };
    for (FundamentalEq eq : kAllFundamentalEqs) t[std::string(to_string(identity_of(eq)))] = 1e-4;
    return t;
  }();
  return table;
}

/// Verdict inputs whose individual pass flags are informational; the agreement rows carry the claim.
bool gating(IdentityId id) {
  switch (id) {
    case IdentityId::projection_condition:
    case IdentityId::lift_condition:
    case IdentityId::lift_geodesic_defect:
    case IdentityId::lift_hypothesis:
      return false;
    default:
      return !is_exploratory(id);
  }
}

json vec_json(const Vec &v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec parse_vec(const std::string &text, const std::string &what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::logic_error &) {
      throw ConfigError(what + ": '" + text + "' is not a comma-separated list of numbers");
    }
  }
  if (values.empty()) throw ConfigError(what + " is empty");
  return Eigen::Map<Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

GeometryBundle resolve_bundle(const std::string &spec) {
  std::string name = spec;
  if (spec.find(".json") != std::string::npos || std::filesystem::exists(spec)) {
    std::ifstream in(spec);
    if (!in) throw ConfigError("cannot open bundle manifest '" + spec + "'");
    try {
      name = json::parse(in).at("name").get<std::string>();
    } catch (const json::exception &e) {
      throw ConfigError("bad bundle manifest '" + spec + "': " + e.what());
    }
  }
  try {
    return bundle_from_spec(name);
  } catch (const PreconditionError &e) {
    throw ConfigError(e.what());
  }
}

json conventions() {
  return json{
      {"curvature", "R(E,F)G = D_[E,F] G - D_E D_F G + D_F D_E G"},
      {"conformal_factor", "g_m(u,v) = exp(2 phi) g_b(pi_* u, pi_* v) for horizontal u, v"},
      {"tensor_derivative", "(D_E S)_F G = D_E(S_F G) - S_(D_E F) G - S_F(D_E G)"},
      {"horizontal_space", "g_m-orthogonal complement of ker pi_*"},
      {"VUXV", "V R(U,X)V = R^VHV(U,X)V - T_U A_X V + A_X T_U V"},
      {"HUXY", "H R(U,X)Y = R^VHH(U,X)Y - T_U A_X Y + A_X T_U Y"},
      {"residual_norm", "Euclidean norm of chart components"},
      {"derivatives", "central differences at fd_step; connections rebuilt from the metric"},
  };
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct TaskResult {
  std::vector<ResidualReport> reports;
  std::optional<json> breakdown;
};

class SuiteRunner {
 public:
  SuiteRunner(const SuiteConfig &config, const GeometryBundle &bundle) : config_(config), b_(bundle) {}

  double tol(IdentityId id) const {
    const std::string key(to_string(id));
    if (auto it = config_.tolerances.find(key); it != config_.tolerances.end()) return it->second;
    return default_tolerances().at(key);
  }

  std::vector<ResidualReport> run(const std::string &suite, const Point &p, int k) const {
    if (suite == "conformality") return conformality(p);
    if (suite == "cshd") return cshd(p);
    if (suite == "torsion") return torsion_suite(p, k);
    if (suite == "duality") return duality(p);
    if (suite == "fundamental") return fundamental(p, k);
    if (suite == "geodesic") return geodesic(p, k);
    if (suite == "lift") return lift(p, k);
    throw ConfigError("unknown suite '" + suite + "'");
  }

  /// Identity a non-numerical failure of the suite is charged to.
  static IdentityId primary(const std::string &suite) {
    if (suite == "conformality") return IdentityId::conformality;
    if (suite == "cshd") return IdentityId::cshd;
    if (suite == "torsion") return IdentityId::torsion_horizontal;
    if (suite == "duality") return IdentityId::duality_agreement;
    if (suite == "fundamental") return IdentityId::fundamental_VVV_W;
    if (suite == "geodesic") return IdentityId::projection_agreement;
    return IdentityId::lift_agreement;
  }

 private:
  double h() const { return config_.fd_step; }

  std::uint64_t seed_for(int k, int salt) const {
    return config_.seed * 1000003ULL + static_cast<std::uint64_t>(k) * 131ULL + static_cast<std::uint64_t>(salt);
  }

  Vec random_direction(int dim, std::uint64_t seed, double length) const {
    const Vec v = random_field(seed, dim)(Point{Vec::Zero(dim), {}});
    return length * v / std::max(v.norm(), 1e-12);
  }

  std::vector<ResidualReport> conformality(const Point &p) const {
    const ConformalFactor c = recover_conformal_factor(b_.S, p);
    return {ResidualReport::make(IdentityId::conformality, p.coords, "lifted g_b-orthonormal frame", c.residual,
                                 tol(IdentityId::conformality)),
            ResidualReport::make(IdentityId::conformal_factor, p.coords, "recovered phi vs bundle phi",
                                 std::abs(c.phi - b_.phi(p)), tol(IdentityId::conformal_factor))};
  }

  std::vector<ResidualReport> cshd(const Point &p) const {
    const double defect = max_cshd_defect(b_.S, b_.nabla_m, b_.nabla_b, b_.phi, p, h());
    const double spread = projectability_spread(b_.S, b_.nabla_m, b_.phi, b_.S(p), 8, h());
    return {ResidualReport::make(IdentityId::cshd, p.coords, "all pairs of base coordinate fields", defect,
                                 tol(IdentityId::cshd)),
            ResidualReport::make(IdentityId::projectability, p.coords, "8 fiber samples over pi(p)", spread,
                                 tol(IdentityId::projectability))};
  }

  std::vector<ResidualReport> torsion_suite(const Point &p, int k) const {
    TorsionLemmaOptions options;
    options.seed = seed_for(k, 1);
    options.tolerance = tol(IdentityId::torsion_horizontal);
    options.cshd_tolerance = tol(IdentityId::cshd);
    options.h = h();
    auto [horizontal, vertical] = torsion_lemma_residuals(b_.S, b_.nabla_m, b_.nabla_b, b_.phi, p, options);
    vertical.tolerance = tol(IdentityId::torsion_vertical);
    vertical.pass = vertical.residual <= vertical.tolerance;

    const Point base = b_.S(p);
    const std::vector<Point> check{base};
    InducedOptions induced_options;
    induced_options.tolerance = tol(IdentityId::projectability);
    induced_options.h = h();
    const ConnectionField induced = induced_connection(b_.S, b_.nabla_m, b_.phi, check, induced_options).connection;
    const int m = b_.base_dim();
    double induced_torsion = 0.0;
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j)
        induced_torsion = std::max(
            induced_torsion,
            torsion(induced, VectorField::coordinate(m, i), VectorField::coordinate(m, j), base, h()).norm());

    const FiberConnection fiber = fiber_connection(b_.S, b_.nabla_m, base, h());
    const Point y{b_.S.fiber_coordinates(p), fiber.chart->id};
    const int f = b_.S.fiber_dim();
    double fiber_torsion = 0.0;
    for (int i = 0; i < f; ++i)
      for (int j = i + 1; j < f; ++j)
        fiber_torsion = std::max(fiber_torsion, torsion(fiber.connection, VectorField::coordinate(f, i),
                                                        VectorField::coordinate(f, j), y, h())
                                                    .norm());
    return {horizontal, vertical,
            ResidualReport::make(IdentityId::torsion_induced, p.coords, "induced base connection, coordinate pairs",
                                 induced_torsion, tol(IdentityId::torsion_induced)),
            ResidualReport::make(IdentityId::torsion_fiber, p.coords, "fiber connection, coordinate pairs",
                                 fiber_torsion, tol(IdentityId::torsion_fiber))};
  }

  std::vector<ResidualReport> duality(const Point &p) const {
    const std::vector<Point> pts{p};
    const DualityReport d =
        duality_proposition_check(b_.S, b_.nabla_m, b_.nabla_b, b_.phi, pts, tol(IdentityId::cshd_dual), h());
    std::ostringstream inputs;
    inputs << "primal " << d.primal.residual << ", dual " << d.dual.residual;
    return {d.dual, ResidualReport::make(IdentityId::duality_agreement, p.coords, inputs.str(),
                                         d.verdicts_agree ? 0.0 : 1.0, tol(IdentityId::duality_agreement))};
  }

  std::vector<ResidualReport> fundamental(const Point &p, int k) const {
    const int n = b_.total_dim();
    const FundamentalFields fields{
        random_field(seed_for(k, 11), n), random_field(seed_for(k, 12), n), random_field(seed_for(k, 13), n),
        random_field(seed_for(k, 14), n), random_field(seed_for(k, 15), n), random_field(seed_for(k, 16), n)};
    std::vector<ResidualReport> out;
    for (FundamentalEq eq : kAllFundamentalEqs)
      out.push_back(fundamental_equation_residual(b_.S, b_.nabla_m, eq, fields, p, tol(identity_of(eq)), h()));
    return out;
  }

  CurveContext context() const { return CurveContext{b_.S, b_.nabla_m, b_.nabla_b, b_.phi, h()}; }

  std::vector<ResidualReport> geodesic(const Point &p, int k) const {
    const Vec v0 = random_direction(b_.total_dim(), seed_for(k, 21), 0.5);
    const CurveRecord curve = geodesic_ivp(b_.nabla_m, p, v0, 0.1, 200);
    if (!curve.complete()) throw DomainError("geodesic left the domain: " + curve.halt->reason, curve.halt->where);
    const std::size_t mid = curve.size() / 2;
    const CurveContext ctx = context();
    auto [horizontal, vertical] = sigma_dd_residuals(ctx, curve, mid, tol(IdentityId::sigma_dd_horizontal));
    vertical.tolerance = tol(IdentityId::sigma_dd_vertical);
    vertical.pass = vertical.residual <= vertical.tolerance;
    const double defect = covariant_along_curve(b_.nabla_m, curve, AlongCurveField::velocity(curve), mid).norm();
    std::vector<ResidualReport> out{horizontal, vertical,
                                    ResidualReport::make(IdentityId::geodesic_defect, curve.points[mid].coords,
                                                         "RK4 geodesic, step 5e-4", defect,
                                                         tol(IdentityId::geodesic_defect))};
    const ProjectionCheck check =
        projection_condition(ctx, curve, mid, tol(IdentityId::projection_condition), tol(IdentityId::geodesic_defect));
    out.push_back(check.condition);
    std::ostringstream inputs;
    inputs << "condition " << check.condition.residual << ", projected defect " << check.projected_defect;
    out.push_back(ResidualReport::make(IdentityId::projection_agreement, curve.points[mid].coords, inputs.str(),
                                       check.agree ? 0.0 : 1.0, tol(IdentityId::projection_agreement)));
    return out;
  }

  std::vector<ResidualReport> lift(const Point &p, int k) const {
    const Point base = b_.S(p);
    const Vec w = random_direction(b_.base_dim(), seed_for(k, 31), 0.5);
    const CurveRecord alpha = geodesic_ivp(b_.nabla_b, base, w, 0.1, 200);
    if (!alpha.complete()) throw DomainError("base geodesic left the domain: " + alpha.halt->reason, alpha.halt->where);
    LiftCheckOptions options;
    options.tolerance = tol(IdentityId::lift_geodesic_defect);
    options.hypothesis_tolerance = tol(IdentityId::lift_hypothesis);
    const LiftCheck check = lift_geodesic_check(context(), alpha, p, options);
    ResidualReport drift = check.drift;
    drift.tolerance = tol(IdentityId::lift_drift);
    drift.pass = drift.residual <= drift.tolerance;
    ResidualReport condition = check.condition;
    condition.tolerance = tol(IdentityId::lift_condition);
    condition.pass = condition.residual <= condition.tolerance;
    std::vector<ResidualReport> out{
        drift,
        ResidualReport::make(IdentityId::lift_hypothesis, p.coords, "max |A_Z Z| along the lift", check.hypothesis_norm,
                             tol(IdentityId::lift_hypothesis)),
        check.defect, condition};
    if (check.applicable) {
      out.push_back(ResidualReport::make(IdentityId::lift_agreement, p.coords, "defect verdict vs condition verdict",
                                         check.agree ? 0.0 : 1.0, tol(IdentityId::lift_agreement)));
    } else {
      out[1].note = "inapplicable: horizontal A_Z Z does not vanish";
    }
    return out;
  }

  const SuiteConfig &config_;
  const GeometryBundle &b_;
};

json summarize(const std::vector<ResidualReport> &reports) {
  struct Row {
    int passed = 0, failed = 0;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool exploratory = false, gate = true;
  };
  std::map<std::string, Row> rows;
  for (const auto &r : reports) {
    Row &row = rows[std::string(to_string(r.identity))];
    (r.pass ? row.passed : row.failed) += 1;
    if (!std::isfinite(r.residual) || r.residual > row.max_residual) row.max_residual = r.residual;
    row.tolerance = r.tolerance;
    row.exploratory = r.exploratory;
    row.gate = gating(r.identity);
  }
  json out = json::object();
  for (const auto &[name, row] : rows)
    out[name] = json{{"passed", row.passed},          {"failed", row.failed},
                     {"max_residual", row.max_residual}, {"tolerance", row.tolerance},
                     {"exploratory", row.exploratory}, {"gating", row.gate}};
  return out;
}

void parse_tolerance_overrides(const std::vector<std::string> &items, std::map<std::string, double> &into) {
  for (const auto &item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("tolerance override '" + item + "' must be identity=value");
    const std::string key = item.substr(0, eq);
    try {
      into[key] = std::stod(item.substr(eq + 1));
    } catch (const std::logic_error &) {
      throw ConfigError("tolerance override '" + item + "' has a non-numeric value");
    }
  }
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
}

std::string curve_csv(const CurveRecord &curve) {
  std::ostringstream s;
  write_curve_csv(s, curve);
  return s.str();
}

Point require_point(const Chart &chart, const Vec &coords, const std::string &what) {
  if (coords.size() != chart.dim)
    throw ConfigError(what + " needs " + std::to_string(chart.dim) + " coordinates");
  if (!chart.contains(coords)) throw ConfigError(what + " " + format_coords(coords) + " is outside the domain");
  return Point{coords, chart.id};
}

struct GeodesicArgs {
  std::string bundle = "hyperbolic:2";
  std::string p0, v0;
  double t_end = 1.0;
  int steps = 2000;
  double tolerance = 1e-4;
  std::string output;
};

int cmd_geodesic(const GeodesicArgs &args, std::ostream &out) {
  const GeometryBundle b = resolve_bundle(args.bundle);
  const Point p0 = require_point(*b.S.source, parse_vec(args.p0, "--p0"), "--p0");
  const Vec v0 = parse_vec(args.v0, "--v0");
  if (v0.size() != b.total_dim()) throw ConfigError("--v0 needs " + std::to_string(b.total_dim()) + " components");
  if (args.steps < 2 || !(args.t_end > 0.0)) throw ConfigError("--steps must be >= 2 and --t-end positive");

  const CurveRecord curve = geodesic_ivp(b.nabla_m, p0, v0, args.t_end, args.steps);
  const CurveRecord projected = project_curve(b.S, curve);
  const CurveContext ctx{b.S, b.nabla_m, b.nabla_b, b.phi, kDefaultStep};

  json samples = json::array();
  bool all_projected_geodesic = true;
  bool all_agree = true;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
    const ProjectionCheck c = projection_condition(ctx, curve, i, args.tolerance, args.tolerance);
    all_projected_geodesic = all_projected_geodesic && c.projection_geodesic;
    all_agree = all_agree && c.agree;
    samples.push_back(json{{"t", curve.times[i]},
                           {"condition_residual", c.condition.residual},
                           {"projected_defect", c.projected_defect},
                           {"agree", c.agree}});
  }
  json doc{{"bundle", b.manifest()},
           {"curve", curve_to_json(curve)},
           {"projected", curve_to_json(projected)},
           {"samples", samples},
           {"tolerance", args.tolerance},
           {"projection_geodesic", all_projected_geodesic},
           {"biconditional_holds", all_agree},
           {"conventions", conventions()}};
  if (!args.output.empty()) {
    write_text(args.output + ".csv", curve_csv(curve));
    write_text(args.output + "_projected.csv", curve_csv(projected));
    write_text(args.output + ".json", dump_report_json(doc));
  } else {
    out << dump_report_json(doc);
  }
  out << "projection geodesic: " << (all_projected_geodesic ? "yes" : "no") << "\n";
  if (!curve.complete()) {
    out << "integration halted: " << curve.halt->reason << "\n";
    return kNumericalBreakdown;
  }
  if (!all_agree) {
    out << "biconditional violated at some sample\n";
    return kIdentityFailure;
  }
  return kOk;
}

struct LiftArgs {
  std::string bundle = "warped_line:const";
  std::string base_curve;
  std::string base_start, base_velocity;
  double t_end = 1.0;
  int steps = 1000;
  std::string p0;
  double tolerance = 1e-6;
  std::string output;
};

int cmd_lift(const LiftArgs &args, std::ostream &out) {
  const GeometryBundle b = resolve_bundle(args.bundle);
  CurveRecord alpha;
  if (!args.base_curve.empty()) {
    std::ifstream in(args.base_curve);
    if (!in) throw ConfigError("cannot open base curve '" + args.base_curve + "'");
    try {
      alpha = read_curve_csv(in, b.S.target);
    } catch (const DegenerateInputError &e) {
      throw ConfigError(e.what());
    }
  } else {
    if (args.base_start.empty() || args.base_velocity.empty())
      throw ConfigError("lift needs --base-curve or both --base-start and --base-velocity");
    const Point a0 = require_point(*b.S.target, parse_vec(args.base_start, "--base-start"), "--base-start");
    const Vec w = parse_vec(args.base_velocity, "--base-velocity");
    if (w.size() != b.base_dim()) throw ConfigError("--base-velocity has the wrong length");
    alpha = geodesic_ivp(b.nabla_b, a0, w, args.t_end, args.steps);
    if (!alpha.complete()) throw DomainError("base geodesic left the domain", alpha.halt->where);
  }
  Point p0;
  if (args.p0.empty()) {
    p0 = b.S.fiber_sampler(alpha.points.front(), 1).front();
  } else {
    p0 = require_point(*b.S.source, parse_vec(args.p0, "--p0"), "--p0");
    if ((b.S(p0).coords - alpha.points.front().coords).norm() > 1e-10 * (1.0 + p0.coords.norm()))
      throw ConfigError("--p0 does not lie over the start of the base curve");
  }

  LiftCheckOptions options;
  options.tolerance = args.tolerance;
  options.hypothesis_tolerance = args.tolerance;
  const LiftCheck check = lift_geodesic_check(CurveContext{b.S, b.nabla_m, b.nabla_b, b.phi, kDefaultStep}, alpha, p0,
                                              options);
  json doc{{"bundle", b.manifest()},
           {"lift", curve_to_json(check.lift)},
           {"drift", to_json(check.drift)},
           {"hypothesis_norm", check.hypothesis_norm},
           {"applicable", check.applicable},
           {"condition", to_json(check.condition)},
           {"geodesic_defect", to_json(check.defect)},
           {"conventions", conventions()}};
  if (check.applicable) doc["verdicts_agree"] = check.agree;
  if (!args.output.empty()) {
    write_text(args.output + ".csv", curve_csv(check.lift));
    write_text(args.output + ".json", dump_report_json(doc));
  } else {
    out << dump_report_json(doc);
  }
  if (!check.applicable) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "inapplicable: A_Z Z != 0 (measured %.6e)\n", check.hypothesis_norm);
    out << buf;
    return kOk;
  }
  out << "lift geodesic: " << (check.defect.pass ? "yes" : "no") << ", condition holds: "
      << (check.condition.pass ? "yes" : "no") << ", verdicts agree: " << (check.agree ? "yes" : "no") << "\n";
  return check.agree ? kOk : kIdentityFailure;
}

}  // namespace

const std::vector<std::string> &known_suites() {
  static const std::vector<std::string> suites{"conformality", "cshd",     "torsion", "duality",
                                               "fundamental",  "geodesic", "lift"};
  return suites;
}

void validate(const SuiteConfig &config) {
  if (config.suites.empty()) throw ConfigError("no suites selected");
  for (const auto &s : config.suites)
    if (std::find(known_suites().begin(), known_suites().end(), s) == known_suites().end())
      throw ConfigError("unknown suite '" + s + "'");
  if (config.points < 1) throw ConfigError("points must be positive");
  if (!(config.fd_step > 0.0) || !std::isfinite(config.fd_step)) throw ConfigError("fd_step must be positive");
  for (const auto &[key, value] : config.tolerances) {
    if (!default_tolerances().count(key)) throw ConfigError("unknown identity '" + key + "' in tolerances");
    if (!(value > 0.0)) throw ConfigError("tolerance for '" + key + "' must be positive");
  }
}

SuiteConfig parse_config(const json &doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> keys{"schema_version", "bundle", "suites", "points",
                                          "fd_step",        "tolerances", "seed", "output"};
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError("unknown config key '" + it.key() + "'");
  if (!doc.contains("schema_version") || doc["schema_version"] != kSchemaVersion)
    throw ConfigError("config schema_version must be " + std::to_string(kSchemaVersion));
  SuiteConfig c;
  try {
    if (doc.contains("bundle")) c.bundle = doc["bundle"].get<std::string>();
    if (doc.contains("suites")) c.suites = doc["suites"].get<std::vector<std::string>>();
    if (doc.contains("points")) c.points = doc["points"].get<int>();
    if (doc.contains("fd_step")) c.fd_step = doc["fd_step"].get<double>();
    if (doc.contains("tolerances")) c.tolerances = doc["tolerances"].get<std::map<std::string, double>>();
    if (doc.contains("seed")) c.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("output")) c.output = doc["output"].get<std::string>();
  } catch (const json::exception &e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  validate(c);
  return c;
}

SuiteConfig load_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return parse_config(json::parse(in));
  } catch (const json::parse_error &e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

int default_workers() {
  if (const char *env = std::getenv("CSUB_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (const std::logic_error &) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

VerifyOutcome cmd_verify(const SuiteConfig &config, int workers) {
  validate(config);
  const GeometryBundle analytic = resolve_bundle(config.bundle);
  const GeometryBundle bundle = numerical_view(analytic, config.fd_step);
  const std::vector<Point> points = bundle.sample_points(config.points);
  const SuiteRunner runner(config, bundle);

  struct Task {
    std::string suite;
    int point;
  };
  std::vector<Task> tasks;
  for (const auto &suite : config.suites)
    for (int k = 0; k < config.points; ++k) tasks.push_back({suite, k});

  std::vector<TaskResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
      const Task &task = tasks[t];
      const Point &p = points[static_cast<std::size_t>(task.point)];
      TaskResult &r = results[t];
      try {
        r.reports = runner.run(task.suite, p, task.point);
      } catch (const Error &e) {
        if (e.numerical()) {
          json where = vec_json(p.coords);
          if (auto *d = dynamic_cast<const DomainError *>(&e)) where = vec_json(d->where());
          if (auto *s = dynamic_cast<const SingularMatrixError *>(&e)) where = vec_json(s->where());
          r.breakdown = json{{"suite", task.suite}, {"point", vec_json(p.coords)}, {"where", where},
                             {"message", e.what()}};
        } else {
          ResidualReport failed = ResidualReport::make(SuiteRunner::primary(task.suite), p.coords, "suite aborted",
                                                       std::nan(""), runner.tol(SuiteRunner::primary(task.suite)));
          failed.note = e.what();
          r.reports = {failed};
        }
      }
    }
  };
  const int count = std::clamp(workers, 1, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (auto &t : pool) t.join();

  std::vector<ResidualReport> all;
  json reports = json::array();
  json breakdowns = json::array();
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (const auto &r : results[t].reports) {
      all.push_back(r);
      json j = to_json(r);
      j["suite"] = tasks[t].suite;
      j["gating"] = gating(r.identity);
      reports.push_back(std::move(j));
    }
    if (results[t].breakdown) breakdowns.push_back(*results[t].breakdown);
  }

  std::set<std::string> failing;
  for (const auto &r : all)
    if (!r.pass && gating(r.identity)) failing.insert(std::string(to_string(r.identity)));

  std::map<std::string, double> effective = default_tolerances();
  for (const auto &[k, v] : config.tolerances) effective[k] = v;

  VerifyOutcome outcome;
  outcome.exit_code = !breakdowns.empty() ? kNumericalBreakdown : (!failing.empty() ? kIdentityFailure : kOk);
  outcome.report = json{
      {"schema_version", kSchemaVersion},
      {"bundle", analytic.manifest()},
      {"environment",
       {{"suites", config.suites},
        {"points", config.points},
        {"fd_step", config.fd_step},
        {"seed", config.seed},
        {"tolerances", effective}}},
      {"conventions", conventions()},
      {"reports", reports},
      {"summary", summarize(all)},
      {"failing_identities", std::vector<std::string>(failing.begin(), failing.end())},
      {"breakdowns", breakdowns},
      {"exit_code", outcome.exit_code},
      {"timestamp", utc_timestamp()},
  };
  return outcome;
}

std::string render_report(const json &report) { return dump_report_json(report); }

int run(int argc, char **argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Numerical checks for conformal submersions"};
  app.require_subcommand(1);

  auto *verify = app.add_subcommand("verify", "run identity suites on a bundle");
  std::string config_path, bundle, suites, output;
  int points = 0;
  double fd_step = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> tolerance_items;
  int workers = 0;
  verify->add_option("--config", config_path, "SuiteConfig JSON file");
  verify->add_option("--bundle", bundle, "bundle spec or manifest path");
  verify->add_option("--suites", suites, "comma-separated suite names");
  verify->add_option("--points", points, "sample points per suite");
  verify->add_option("--fd-step", fd_step, "finite-difference step");
  verify->add_option("--seed", seed, "seed for random test fields");
  verify->add_option("--tolerance", tolerance_items, "identity=value override (repeatable)");
  verify->add_option("--output", output, "report path (default stdout)");
  verify->add_option("--workers", workers, "worker threads (default $CSUB_WORKERS or all cores)");

  auto *geo = app.add_subcommand("geodesic", "integrate a geodesic and test its projection");
  GeodesicArgs gargs;
  geo->add_option("--bundle", gargs.bundle);
  geo->add_option("--p0", gargs.p0, "start point, comma-separated")->required();
  geo->add_option("--v0", gargs.v0, "initial velocity, comma-separated")->required();
  geo->add_option("--t-end", gargs.t_end);
  geo->add_option("--steps", gargs.steps);
  geo->add_option("--tolerance", gargs.tolerance);
  geo->add_option("--output", gargs.output, "output prefix for .csv/_projected.csv/.json");

  auto *lift = app.add_subcommand("lift", "lift a base curve horizontally and test the lift condition");
  LiftArgs largs;
  lift->add_option("--bundle", largs.bundle);
  lift->add_option("--base-curve", largs.base_curve, "base curve CSV (t,x1..xm,v1..vm)");
  lift->add_option("--base-start", largs.base_start, "start of a base geodesic");
  lift->add_option("--base-velocity", largs.base_velocity, "initial velocity of the base geodesic");
  lift->add_option("--t-end", largs.t_end);
  lift->add_option("--steps", largs.steps);
  lift->add_option("--p0", largs.p0, "start point on M (default: first fiber sample)");
  lift->add_option("--tolerance", largs.tolerance);
  lift->add_option("--output", largs.output, "output prefix for .csv/.json");

  auto *list = app.add_subcommand("list-bundles", "print the manifests of the built-in bundles");
  std::string list_output;
  list->add_option("--output", list_output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*verify) {
      SuiteConfig config = config_path.empty() ? SuiteConfig{} : load_config(config_path);
      if (!bundle.empty()) config.bundle = bundle;
      if (!suites.empty()) {
        config.suites.clear();
        std::stringstream ss(suites);
        for (std::string s; std::getline(ss, s, ',');)
          if (!s.empty()) config.suites.push_back(s);
      }
      if (verify->count("--points")) config.points = points;
      if (verify->count("--fd-step")) config.fd_step = fd_step;
      if (verify->count("--seed")) config.seed = seed;
      if (!output.empty()) config.output = output;
      parse_tolerance_overrides(tolerance_items, config.tolerances);
      const VerifyOutcome outcome = cmd_verify(config, verify->count("--workers") ? workers : default_workers());
      const std::string text = render_report(outcome.report);
      if (config.output.empty()) {
        out << text;
      } else {
        write_text(config.output, text);
      }
      const auto &failing = outcome.report["failing_identities"];
      if (!failing.empty()) {
        err << "failing identities:";
        for (const auto &f : failing) err << ' ' << f.get<std::string>();
        err << '\n';
      }
      for (const auto &b : outcome.report["breakdowns"]) err << "breakdown: " << b["message"].get<std::string>() << '\n';
      return outcome.exit_code;
    }
    if (*geo) return cmd_geodesic(gargs, out);
    if (*lift) return cmd_lift(largs, out);
    if (*list) {
      json manifests = json::array();
      for (const auto &spec : builtin_bundle_specs()) manifests.push_back(bundle_from_spec(spec).manifest());
      const std::string text = dump_report_json(manifests);
      if (list_output.empty()) {
        out << text;
      } else {
        write_text(list_output, text);
      }
      return kOk;
    }
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error &e) {
    err << (e.numerical() ? "numerical breakdown: " : "error: ") << e.what() << '\n';
    return e.numerical() ? kNumericalBreakdown : kConfigError;
  }
  return kOk;
}

}  // namespace csub::cli
