#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "csub/gallery.hpp"
#include "verify_cli.hpp"

using namespace csub::cli;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "csub-verify");
  std::vector<char *> argv;
  for (auto &a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string strip_timestamp(const std::string &s) {
  return std::regex_replace(s, std::regex("\"timestamp\": \"[^\"]*\""), "\"timestamp\": \"\"");
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() / "csub_cli_test";
  std::filesystem::create_directories(d);
  return d;
}

double max_gating_residual(const json &report) {
  double m = 0.0;
  for (const auto &r : report["reports"])
    if (r["gating"].get<bool>()) m = std::max(m, r["residual_norm"].get<double>());
  return m;
}

}  // namespace

TEST_CASE("config parsing") {
  const SuiteConfig c = parse_config(json{{"schema_version", 1}, {"bundle", "hyperbolic:2"}, {"points", 3},
                                          {"suites", {"cshd"}}, {"tolerances", {{"cshd", 1e-3}}}});
  CHECK(c.bundle == "hyperbolic:2");
  CHECK(c.points == 3);
  CHECK(c.tolerances.at("cshd") == 1e-3);
  CHECK_THROWS_AS(parse_config(json{{"bundle", "x"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"suites", {"bogus"}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"points", 0}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"fd_step", -1.0}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"tolerances", {{"cshd", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"tolerances", {{"nope", 1.0}}}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"colour", "red"}}), ConfigError);
  CHECK_THROWS_AS(parse_config(json{{"schema_version", 1}, {"points", "many"}}), ConfigError);
}

TEST_CASE("verify flat product: exit 0, tiny residuals, deterministic across worker counts") {
  SuiteConfig c;
  c.points = 3;
  const VerifyOutcome one = cmd_verify(c, 1);
  const VerifyOutcome four = cmd_verify(c, 4);
  CHECK(one.exit_code == kOk);
  CHECK(max_gating_residual(one.report) <= 1e-7);
  CHECK(strip_timestamp(render_report(one.report)) == strip_timestamp(render_report(four.report)));
  CHECK(one.report["failing_identities"].empty());
  CHECK(one.report.contains("conventions"));
  CHECK(one.report["environment"]["fd_step"] == 1e-4);
}

TEST_CASE("verify hyperbolic n=3 on the algebraic suites") {
  SuiteConfig c;
  c.bundle = "hyperbolic:3";
  c.suites = {"cshd", "torsion", "duality", "fundamental"};
  c.points = 3;
  const VerifyOutcome o = cmd_verify(c, 2);
  CHECK(o.exit_code == kOk);
  CHECK(max_gating_residual(o.report) <= 1e-4);
}

TEST_CASE("exploratory identities never gate") {
  SuiteConfig c;
  c.bundle = "random:1:4:2";
  c.suites = {"fundamental"};
  c.points = 2;
  c.tolerances["fundamental.VUVX"] = 1e-12;
  const VerifyOutcome o = cmd_verify(c, 1);
  CHECK(o.exit_code == kOk);
  bool seen_failing_exploratory = false;
  for (const auto &r : o.report["reports"])
    if (r["exploratory"].get<bool>() && !r["pass"].get<bool>()) seen_failing_exploratory = true;
  CHECK(seen_failing_exploratory);
}

TEST_CASE("coarse step on a twisted bundle exits 1 and names identities") {
  SuiteConfig c;
  c.bundle = "random:1:4:2";
  c.fd_step = 0.1;
  c.points = 3;
  const VerifyOutcome o = cmd_verify(c, 1);
  CHECK(o.exit_code == kIdentityFailure);
  CHECK_FALSE(o.report["failing_identities"].empty());
}

TEST_CASE("identities on the half-space are exact at any step") {
  // Every suite identity on H^n is structurally exact (horizontal parts of the lifted
  // derivatives vanish, curvature identities are algebraic in the same Christoffels),
  // so a coarse step changes nothing that gates.
  SuiteConfig c;
  c.bundle = "hyperbolic:2";
  c.fd_step = 0.1;
  c.points = 3;
  csub::set_warning_sink([](const std::string &) {});
  const VerifyOutcome o = cmd_verify(c, 1);
  csub::set_warning_sink({});
  CHECK(o.exit_code == kOk);
  CHECK(max_gating_residual(o.report) <= 1e-7);
}

TEST_CASE("command line exit codes") {
  CHECK(run_cli({}).code == kConfigError);
  CHECK(run_cli({"frobnicate"}).code == kConfigError);
  CHECK(run_cli({"verify", "--bundle", "sphere:2"}).code == kConfigError);
  CHECK(run_cli({"verify", "--suites", "cshd,nonsense"}).code == kConfigError);
  CHECK(run_cli({"verify", "--points", "abc"}).code == kConfigError);
  CHECK(run_cli({"verify", "--config", "/nonexistent/config.json"}).code == kConfigError);
  CHECK(run_cli({"verify", "--tolerance", "cshd"}).code == kConfigError);
  CHECK(run_cli({"--help"}).code == kOk);

  const Run ok = run_cli({"verify", "--bundle", "flat_product:2:1", "--points", "2", "--workers", "2"});
  CHECK(ok.code == kOk);
  CHECK(json::parse(ok.out)["exit_code"] == 0);

  const Run fail = run_cli({"verify", "--bundle", "random:1:4:2", "--fd-step", "0.1", "--points", "2"});
  CHECK(fail.code == kIdentityFailure);
  CHECK(fail.err.find("failing identities:") != std::string::npos);
}

TEST_CASE("config file with flag overrides") {
  const auto dir = temp_dir();
  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << json{{"schema_version", 1}, {"bundle", "hyperbolic:2"}, {"suites", {"cshd"}}, {"points", 2}};
  const auto out = dir / "report.json";
  const Run r = run_cli({"verify", "--config", cfg.string(), "--bundle", "flat_product:3:1", "--output", out.string()});
  CHECK(r.code == kOk);
  std::ifstream in(out);
  const json report = json::parse(in);
  CHECK(report["bundle"]["name"] == "flat_product:3:1");
  CHECK(report["environment"]["points"] == 2);

  const auto manifest = dir / "bundle.json";
  std::ofstream(manifest) << csub::bundle_from_spec("warped_line:linear").manifest();
  const Run m = run_cli({"verify", "--bundle", manifest.string(), "--suites", "conformality", "--points", "2"});
  CHECK(m.code == kOk);
  CHECK(json::parse(m.out)["bundle"]["name"] == "warped_line:linear");
}

TEST_CASE("geodesic subcommand") {
  const auto dir = temp_dir();
  const Run vert = run_cli({"geodesic", "--bundle", "hyperbolic:2", "--p0", "0,2", "--v0", "0,1", "--t-end", "0.5",
                            "--steps", "100", "--output", (dir / "vert").string()});
  CHECK(vert.code == kOk);
  CHECK(vert.out.find("projection geodesic: yes") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "vert.csv"));
  CHECK(std::filesystem::exists(dir / "vert_projected.csv"));

  const Run semi = run_cli({"geodesic", "--bundle", "hyperbolic:2", "--p0", "0,2", "--v0", "1,0", "--t-end", "0.5",
                            "--steps", "100", "--output", (dir / "semi").string()});
  CHECK(semi.code == kOk);
  CHECK(semi.out.find("projection geodesic: no") != std::string::npos);
  std::ifstream in(dir / "semi.json");
  const json doc = json::parse(in);
  double max_condition = 0.0;
  for (const auto &s : doc["samples"]) max_condition = std::max(max_condition, s["condition_residual"].get<double>());
  CHECK(max_condition > 1e-2);

  const Run flat = run_cli({"geodesic", "--bundle", "flat_product:3:2", "--p0", "0,0,0", "--v0", "1,2,3"});
  CHECK(flat.code == kOk);
  CHECK(flat.out.find("projection geodesic: yes") != std::string::npos);

  CHECK(run_cli({"geodesic", "--bundle", "hyperbolic:2", "--p0", "0,-1", "--v0", "1,0"}).code == kConfigError);
  CHECK(run_cli({"geodesic", "--bundle", "hyperbolic:2", "--p0", "0,2", "--v0", "1"}).code == kConfigError);
}

TEST_CASE("geodesic leaving the domain yields partial output and exit 3") {
  // RK4 at step 0.1 overshoots y = 0 on a fast downward start.
  const auto dir = temp_dir();
  const Run r = run_cli({"geodesic", "--bundle", "hyperbolic:2", "--p0", "0,0.01", "--v0", "0,-50", "--t-end", "1",
                         "--steps", "10", "--output", (dir / "exit").string()});
  CHECK(r.code == kNumericalBreakdown);
  CHECK(std::filesystem::exists(dir / "exit.csv"));
}

TEST_CASE("lift subcommand") {
  const Run c = run_cli({"lift", "--bundle", "warped_line:const", "--base-start", "-0.5", "--base-velocity", "1",
                         "--t-end", "1", "--steps", "200"});
  CHECK(c.code == kOk);
  CHECK(c.out.find("lift geodesic: yes") != std::string::npos);
  CHECK(c.out.find("verdicts agree: yes") != std::string::npos);

  const Run l = run_cli({"lift", "--bundle", "warped_line:linear", "--base-start", "-0.5", "--base-velocity", "1",
                         "--t-end", "1", "--steps", "200"});
  CHECK(l.code == kOk);
  CHECK(l.out.find("lift geodesic: no") != std::string::npos);
  CHECK(l.out.find("condition holds: no") != std::string::npos);

  const Run h = run_cli({"lift", "--bundle", "hyperbolic:2", "--base-start", "0", "--base-velocity", "1", "--p0",
                         "0,2", "--t-end", "1", "--steps", "100"});
  CHECK(h.code == kOk);
  CHECK(h.out.find("inapplicable") != std::string::npos);

  CHECK(run_cli({"lift", "--bundle", "hyperbolic:2", "--base-start", "0", "--base-velocity", "1", "--p0", "0.5,2"})
            .code == kConfigError);
  CHECK(run_cli({"lift", "--bundle", "hyperbolic:2"}).code == kConfigError);

  // Base curve from a CSV file.
  const auto dir = temp_dir();
  const auto csv = dir / "base.csv";
  {
    std::ofstream f(csv);
    f << "t,x1,v1\n";
    for (int i = 0; i <= 50; ++i) f << i * 0.02 << "," << -0.5 + i * 0.02 << ",1\n";
  }
  const Run fromfile = run_cli({"lift", "--bundle", "warped_line:const", "--base-curve", csv.string()});
  CHECK(fromfile.code == kOk);
}

TEST_CASE("list-bundles") {
  const Run r = run_cli({"list-bundles"});
  CHECK(r.code == kOk);
  const json list = json::parse(r.out);
  CHECK(list.size() == csub::builtin_bundle_specs().size());
}
