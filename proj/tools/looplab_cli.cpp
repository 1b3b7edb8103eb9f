// looplab command-line front end.
//
//   looplab <enumerate|sd|mc|cup|doublecup|crosscheck|golden> [--config PATH]
//           [--order N] [--graph NAME] [--delta X] [--seed S] [--out PATH]
//           [--json] [--set key=value ...]
//
// Exit codes: 0 success, 1 usage or parse error, 2 regime or resource error,
// 3 check failure.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "looplab/config.hpp"
#include "looplab/enumerate.hpp"
#include "looplab/errors.hpp"
#include "looplab/exact.hpp"
#include "looplab/graph.hpp"
#include "looplab/mc.hpp"
#include "looplab/sd.hpp"

using namespace looplab;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRegime = 2;
constexpr int kExitCheck = 3;

// "cup", "B<n>", "quartic" or an explicit diagram such as "+:(1,4)(2,3)".
TLDiagram diagram_from_name(const std::string& name) {
  if (name == "cup") return TLDiagram::cup();
  if (name == "quartic") return TLDiagram::parse("+:(1,4)(2,3)");
  if (name.size() > 1 && name[0] == 'B' && std::all_of(name.begin() + 1, name.end(), ::isdigit))
    return TLDiagram::unnested(std::stoi(name.substr(1)));
  return TLDiagram::parse(name);
}

// potential = quartic | doublecup | list of diagrams separated by ';'.
std::vector<TLDiagram> potential_diagrams(const RunConfig& c) {
  const std::string p = c.get("potential");
  if (p.empty() || p == "none") return {};
  if (p == "doublecup") return {TLDiagram::parse("+:(1,2)(3,4)"), TLDiagram::parse("-:(1,2)(3,4)")};
  std::vector<TLDiagram> out;
  for (const auto& s : c.get_list("potential", ';')) out.push_back(diagram_from_name(s));
  return out;
}

PotentialSpec potential_spec(const RunConfig& c) {
  PotentialSpec spec;
  const auto ds = potential_diagrams(c);
  for (size_t i = 0; i < ds.size(); ++i) spec.terms.push_back({ds[i], static_cast<int>(i)});
  spec.num_couplings = std::max<int>(1, static_cast<int>(ds.size()));
  return spec;
}

std::vector<double> couplings(const RunConfig& c, int n) {
  auto t = c.get_doubles("t");
  if (t.empty()) t.assign(static_cast<size_t>(n), 0.0);
  if (static_cast<int>(t.size()) != n)
    throw ParseError("t has " + std::to_string(t.size()) + " entries, the potential has " + std::to_string(n) + " couplings");
  return t;
}

std::string superscript(int k) {
  static const char* digits[] = {"⁰", "¹", "²", "³", "⁴", "⁵", "⁶", "⁷", "⁸", "⁹"};
  std::string s;
  for (char ch : std::to_string(k)) s += digits[ch - '0'];
  return s;
}

// δ²+δ style rendering of a polynomial in δ.
std::string delta_poly_text(const DeltaPoly& p) {
  if (p.is_zero()) return "0";
  std::string out;
  for (int k = p.degree(); k >= 0; --k) {
    const Rational c = p.coeff(k);
    if (c == 0) continue;
    const bool neg = c < 0;
    const Rational a = neg ? Rational(-c) : c;
    if (!out.empty()) out += neg ? "-" : "+";
    else if (neg) out += "-";
    if (k == 0 || a != 1) out += rational_to_string(a);
    if (k >= 1) out += "δ";
    if (k >= 2) out += superscript(k);
  }
  return out;
}

std::string exponent_text(const Exponent& e) {
  std::string s = "(";
  for (size_t i = 0; i < e.size(); ++i) s += (i ? "," : "") + std::to_string(e[i]);
  return s + ")";
}

struct Output {
  std::ostringstream text;
  json data = json::object();
};

// ---------------------------------------------------------------------------

int cmd_enumerate(const RunConfig& c, Output& out) {
  ConfigurationProblem prob;
  prob.external = diagram_from_name(c.get("observable", "cup"));
  const auto ds = potential_diagrams(c);
  for (size_t i = 0; i < ds.size(); ++i) prob.vertex_types.push_back({ds[i], static_cast<int>(i)});
  prob.num_couplings = static_cast<int>(ds.size());
  prob.max_order = static_cast<int>(c.get_long("order", 0));
  EnumerationStats stats;
  const ExactSeries s = observable_series(prob, &stats);
  json records = json::array();
  for (const auto& [e, coef] : s.terms()) {
    out.text << exponent_text(e) << " ; " << delta_poly_text(coef) << "\n";
    records.push_back({{"exponent", e}, {"delta_coefficients", coef.list_string()}});
  }
  if (s.is_zero()) out.text << exponent_text(Exponent(static_cast<size_t>(prob.num_couplings), 0)) << " ; 0\n";
  out.data["observable"] = prob.external->to_string();
  out.data["order"] = prob.max_order;
  out.data["coefficients"] = records;
  out.data["accepted"] = stats.accepted;
  return 0;
}

FloatSeries sd_series_for(const RunConfig& c, const WeightedGraph& g, const TLDiagram& obs, int order) {
  const PotentialSpec pot = potential_spec(c);
  const int deg = std::max(2, pot.degree());
  const int max_len = static_cast<int>(c.get_long("max_length", obs.num_points() + deg * order + 2));
  WordTable table(g, pot, max_len, order);
  return observable_from_table(table, obs, static_cast<int>(c.get_long("vertex", 0)));
}

int cmd_sd(const RunConfig& c, Output& out) {
  const WeightedGraph g = named_graph(c.get("graph", "A3"));
  const TLDiagram obs = diagram_from_name(c.get("observable", "cup"));
  const int order = static_cast<int>(c.get_long("order", 2));
  const FloatSeries s = sd_series_for(c, g, obs, order);
  const auto t = couplings(c, potential_spec(c).num_couplings);
  json records = json::array();
  for (const auto& [e, coef] : s.terms()) {
    out.text << exponent_text(e) << " ; " << format_double(coef) << "\n";
    records.push_back({{"exponent", e}, {"value", coef}});
  }
  const double value = s.evaluate(t, g.delta());
  out.text << "value at t = " << format_double(value) << "\n";
  out.data["graph"] = c.get("graph", "A3");
  out.data["delta"] = g.delta();
  out.data["coefficients"] = records;
  out.data["value"] = value;
  return 0;
}

struct McResult {
  TraceEstimate estimate;
  std::string manifest;
};

McResult run_mc(const RunConfig& c, const WeightedGraph& g, const TLDiagram& obs) {
  EnsembleSpec spec;
  spec.graph = g;
  spec.M = c.get_double("M", 40);
  spec.K = c.get_double("K", 4.0);
  spec.potential = potential_spec(c);
  spec.couplings = couplings(c, spec.potential.num_couplings);
  spec.seed = static_cast<std::uint64_t>(c.get_long("seed", 1));
  ChainOptions opts;
  opts.sweeps = c.get_long("sweeps", 20000);
  opts.burn_in = c.get_long("burn_in", opts.sweeps / 10);
  const std::string rounding = c.get("rounding", "interpolate");
  if (rounding != "interpolate" && rounding != "floor") throw ParseError("rounding must be floor or interpolate");
  const Rounding mode = rounding == "floor" ? Rounding::Floor : Rounding::Interpolate;
  const int v = static_cast<int>(c.get_long("vertex", 0));
  auto est = estimate_observables(spec, opts, {{"observable", embed_tl(obs, spec.graph), v}}, mode);
  return {est.estimates.at(0), manifest_record(spec, obs.to_string(), est.estimates.at(0), opts, mode)};
}

int cmd_mc(const RunConfig& c, Output& out) {
  const WeightedGraph g = named_graph(c.get("graph", "A3"));
  const TLDiagram obs = diagram_from_name(c.get("observable", "cup"));
  const McResult r = run_mc(c, g, obs);
  out.text << "estimate " << format_double(r.estimate.mean) << " +- " << format_double(r.estimate.std_error) << " ("
           << r.estimate.samples << " samples)\n";
  out.data = json::parse(r.manifest);
  return 0;
}

int cmd_cup(const RunConfig& c, Output& out) {
  const double delta = c.get_double("delta", std::sqrt(2.0));
  const auto t = c.get_doubles("t");
  const int J = static_cast<int>(c.get_long("moments", 8));
  const CupSolution s = cup_solve(t, delta, c.get_double("K", 10.0), J);
  out.text << "support [" << format_double(s.measure.a) << ", " << format_double(s.measure.b) << "]\n";
  for (int k = 0; k <= J; ++k) out.text << "m" << k << " = " << format_double(s.measure.moments[static_cast<size_t>(k)]) << "\n";
  out.data["delta"] = delta;
  out.data["t"] = t;
  out.data["endpoints"] = {s.measure.a, s.measure.b};
  out.data["R"] = s.R;
  out.data["moments"] = s.measure.moments;
  return 0;
}

// Table series against the frame solved from the spectral minimizer.
json golden_table(double p, double kappa, double delta, double tol, std::ostream& text, bool& ok) {
  const EllipticFrame f = elliptic_frame_solved(p, kappa, delta);
  const CoupledMeasures m =
      doublecup_minimize(DoubleCupCouplings::from_appendix(f.alpha, f.beta), delta);
  const std::map<std::string, double> solved = {
      {"alpha", f.alpha}, {"beta", f.beta}, {"a1", f.a1}, {"a2", f.a2}, {"b1", f.b1}, {"b2", f.b2},
      {"mean", m.tilde_plus_moment(1)}, {"second", m.tilde_plus_moment(2)}};
  json rows = json::array();
  text << "series      table                      solved                     rel delta\n";
  for (const auto& ts : small_coupling_tables()) {
    const double tv = ts.evaluate(p, kappa, delta), sv = solved.at(ts.name);
    const double d = std::abs(tv - sv) / std::abs(sv);
    ok = ok && d < tol;
    text << std::left << std::setw(12) << ts.name << std::setw(27) << format_double(tv) << std::setw(27)
         << format_double(sv) << format_double(d) << (d < tol ? "" : "  (above tolerance)") << "\n";
    rows.push_back({{"series", ts.name}, {"table", tv}, {"solved", sv}, {"relative_delta", d}});
  }
  return rows;
}

int cmd_doublecup(const RunConfig& c, Output& out) {
  const double delta = c.get_double("delta", std::sqrt(2.0));
  DoubleCupCouplings cp;
  const bool from_pk = c.has("p");
  if (from_pk) {
    const EllipticFrame f = elliptic_frame_from_pk(c.get_double("p", 1e-3), c.get_double("kappa", 1.0), delta);
    cp = DoubleCupCouplings::from_appendix(f.alpha, f.beta);
  } else {
    cp = DoubleCupCouplings::from_t(c.get_double("t_plus", 0.0), c.get_double("t_minus", 0.0));
  }
  DoubleCupOptions opts;
  opts.num_moments = static_cast<int>(c.get_long("moments", 8));
  const CoupledMeasures m = doublecup_minimize(cp, delta, opts);
  out.text << "alpha_app " << format_double(cp.alpha_app()) << " beta_app " << format_double(cp.beta_app()) << "\n";
  out.text << "tilde nu_+ support [" << format_double(m.tilde_plus_lower()) << ", " << format_double(m.tilde_plus_upper())
           << "]\n";
  out.text << "tilde nu_- support [" << format_double(m.tilde_minus_lower()) << ", "
           << format_double(m.tilde_minus_upper()) << "]\n";
  for (int k = 0; k <= opts.num_moments; ++k)
    out.text << "m" << k << " plus " << format_double(m.nu_plus.moments[static_cast<size_t>(k)]) << " minus "
             << format_double(m.nu_minus.moments[static_cast<size_t>(k)]) << "\n";
  out.data["delta"] = delta;
  out.data["alpha_app"] = cp.alpha_app();
  out.data["beta_app"] = cp.beta_app();
  out.data["tilde_plus_support"] = {m.tilde_plus_lower(), m.tilde_plus_upper()};
  out.data["tilde_minus_support"] = {m.tilde_minus_lower(), m.tilde_minus_upper()};
  out.data["moments_plus"] = m.nu_plus.moments;
  out.data["moments_minus"] = m.nu_minus.moments;
  if (cp.alpha > 0) {
    const FloatSeries gen = potts_generating_function(m, static_cast<int>(c.get_long("order", 4)));
    std::vector<double> coeffs;
    for (int n = 0; n <= gen.max_degree(); ++n) coeffs.push_back(gen.coeff({n}));
    for (size_t n = 0; n < coeffs.size(); ++n) out.text << "C[" << n << "] = " << format_double(coeffs[n]) << "\n";
    out.data["generating_function"] = coeffs;
  }
  if (from_pk && c.get("golden", "false") == "true") {
    bool ok = true;
    out.data["golden"] = golden_table(c.get_double("p", 1e-3), c.get_double("kappa", 1.0), delta,
                                      c.get_double("tolerance", 1e-6), out.text, ok);
    if (!ok) return kExitCheck;
  }
  return 0;
}

int cmd_golden(const RunConfig& c, Output& out) {
  bool ok = true;
  const double p = c.get_double("p", 1e-3), kappa = c.get_double("kappa", 1.0);
  const double delta = c.get_double("delta", std::sqrt(2.0));
  out.data["p"] = p;
  out.data["kappa"] = kappa;
  out.data["delta"] = delta;
  out.data["rows"] = golden_table(p, kappa, delta, c.get_double("tolerance", 1e-6), out.text, ok);
  return ok ? 0 : kExitCheck;
}

int cmd_crosscheck(const RunConfig& c, Output& out) {
  auto routes = c.get_list("routes");
  if (routes.size() < 2) throw ParseError("crosscheck needs routes = a,b");
  std::sort(routes.begin(), routes.end());
  const TLDiagram obs = diagram_from_name(c.get("observable", "cup"));
  const int order = static_cast<int>(c.get_long("order", 2));
  const double tol = c.get_double("tolerance", 1e-9);
  bool ok = true;
  json rows = json::array();

  auto enumerated = [&] {
    ConfigurationProblem prob;
    prob.external = obs;
    const auto ds = potential_diagrams(c);
    for (size_t i = 0; i < ds.size(); ++i) prob.vertex_types.push_back({ds[i], static_cast<int>(i)});
    prob.num_couplings = std::max<int>(1, static_cast<int>(ds.size()));
    prob.max_order = order;
    return observable_series(prob);
  };

  if (routes == std::vector<std::string>{"enumerate", "sd"}) {
    const WeightedGraph g = named_graph(c.get("graph", "A3"));
    const ExactSeries ex = enumerated();
    const FloatSeries sd = sd_series_for(c, g, obs, order);
    std::set<Exponent> keys;
    for (const auto& [e, v] : ex.terms()) keys.insert(e);
    for (const auto& [e, v] : sd.terms()) keys.insert(e);
    for (const auto& e : keys) {
      const double a = ex.coeff(e).eval(g.delta()), b = sd.coeff(e);
      const bool good = std::abs(a - b) <= tol * std::max(1.0, std::abs(a));
      ok = ok && good;
      out.text << exponent_text(e) << " enumerate " << format_double(a) << " sd " << format_double(b)
               << (good ? " ok" : " MISMATCH") << "\n";
      rows.push_back({{"exponent", e}, {"enumerate", a}, {"sd", b}, {"ok", good}});
    }
  } else if (routes == std::vector<std::string>{"enumerate", "fixture"}) {
    std::ifstream in(c.get("fixture"));
    if (!in) throw ParseError("cannot open fixture: " + c.get("fixture"));
    const ExactSeries fx = ExactSeries::read(in);
    const ExactSeries ex = enumerated();
    std::set<Exponent> keys;
    for (const auto& [e, v] : ex.terms()) keys.insert(e);
    for (const auto& [e, v] : fx.terms()) keys.insert(e);
    for (const auto& e : keys) {
      const bool good = e.size() == static_cast<size_t>(ex.num_vars()) && ex.coeff(e) == fx.coeff(e);
      ok = ok && good;
      out.text << exponent_text(e) << " enumerate " << delta_poly_text(ex.coeff(e)) << " fixture "
               << delta_poly_text(fx.coeff(e)) << (good ? " ok" : " MISMATCH") << "\n";
      rows.push_back({{"exponent", e}, {"ok", good}});
    }
  } else if (routes == std::vector<std::string>{"mc", "sd"}) {
    const WeightedGraph g = named_graph(c.get("graph", "A3"));
    const FloatSeries sd = sd_series_for(c, g, obs, order);
    const double ref = sd.evaluate(couplings(c, potential_spec(c).num_couplings), g.delta());
    const McResult r = run_mc(c, g, obs);
    const double z = (r.estimate.mean - ref) / r.estimate.std_error;
    ok = std::abs(z) <= 3.0;
    out.text << "sd " << format_double(ref) << " mc " << format_double(r.estimate.mean) << " +- "
             << format_double(r.estimate.std_error) << " z " << format_double(z) << (ok ? " ok" : " MISMATCH") << "\n";
    rows.push_back({{"sd", ref}, {"mc", r.estimate.mean}, {"std_error", r.estimate.std_error}, {"z", z}});
  } else {
    throw ResourceError("route combination not available: " + c.get("routes"));
  }
  out.data["rows"] = rows;
  out.data["ok"] = ok;
  return ok ? 0 : kExitCheck;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"looplab: planar-algebra observables, loop equations and matrix-model checks"};
  std::string subcommand, config_path, out_path, graph, seed, order, delta;
  bool as_json = false;
  std::vector<std::string> overrides;
  app.add_option("subcommand", subcommand, "enumerate | sd | mc | cup | doublecup | crosscheck | golden")->required();
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--order", order, "series order");
  app.add_option("--graph", graph, "graph name (A<n>, two<n>, Alarge:<delta>[:<length>])");
  app.add_option("--delta", delta, "loop fugacity");
  app.add_option("--seed", seed, "Monte Carlo seed");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_flag("--json", as_json, "write JSON instead of text");
  app.add_option("--set", overrides, "extra key=value settings");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  int code = 0;
  Output out;
  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    cfg.subcommand = subcommand;
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("--set expects key=value: " + kv);
      cfg.set(subcommand + "." + kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!order.empty()) cfg.set(subcommand + ".order", order);
    if (!graph.empty()) cfg.set(subcommand + ".graph", graph);
    if (!delta.empty()) cfg.set(subcommand + ".delta", delta);
    if (!seed.empty()) cfg.set(subcommand + ".seed", seed);

    if (subcommand == "enumerate") code = cmd_enumerate(cfg, out);
    else if (subcommand == "sd") code = cmd_sd(cfg, out);
    else if (subcommand == "mc") code = cmd_mc(cfg, out);
    else if (subcommand == "cup") code = cmd_cup(cfg, out);
    else if (subcommand == "doublecup") code = cmd_doublecup(cfg, out);
    else if (subcommand == "golden") code = cmd_golden(cfg, out);
    else if (subcommand == "crosscheck") code = cmd_crosscheck(cfg, out);
    else throw ParseError("unknown subcommand: " + subcommand);
    out.data["manifest"] = cfg.to_text();
  } catch (const std::invalid_argument& e) {
    // ParseError, ShadingError, DimensionError and friends: bad input.
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RegimeError& e) {
    std::cerr << e.what() << "\n";
    return kExitRegime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRegime;
  }

  const std::string payload = as_json ? out.data.dump(2) + "\n" : out.text.str();
  if (out_path.empty()) {
    std::cout << payload;
  } else {
    std::ofstream f(out_path);
    if (!f) {
      std::cerr << "error: cannot write " << out_path << "\n";
      return kExitUsage;
    }
    f << payload;
  }
  return code;
}
