#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <sstream>

#include "CLI11.hpp"
#include "msym/errors.hpp"
#include "msym/hamiltonian.hpp"
#include "msym/lagrangian.hpp"
#include "msym/parser.hpp"
#include "msym/unified.hpp"

namespace msym::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

int parse_dim(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  int d = 0;
  try {
    d = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || d < 1) throw ModelError(key + " must be a positive integer, got '" + value + "'");
  return d;
}

double parse_number(const std::string& text) {
  const Expression e = parse(text);
  if (!e.is_constant()) throw ModelError("domain bounds must be numbers, got '" + text + "'");
  return e.value().to_double();
}

Domain parse_domain(const std::string& text, int m) {
  static const std::regex interval(R"(\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\])");
  Domain out;
  std::string rest;
  auto it = std::sregex_iterator(text.begin(), text.end(), interval);
  std::size_t last = 0;
  for (; it != std::sregex_iterator(); ++it) {
    const auto& mt = *it;
    const std::string gap = trim(text.substr(last, static_cast<std::size_t>(mt.position()) - last));
    if (!(gap.empty() && out.empty()) && gap != "x") throw ModelError("malformed domain '" + text + "'");
    const double lo = parse_number(mt[1].str());
    const double hi = parse_number(mt[2].str());
    if (!(lo < hi)) throw ModelError("domain interval must have lo < hi in '" + text + "'");
    out.emplace_back(lo, hi);
    last = static_cast<std::size_t>(mt.position() + mt.length());
  }
  if (!trim(text.substr(last)).empty() || out.empty()) throw ModelError("malformed domain '" + text + "'");
  if (static_cast<int>(out.size()) != m) {
    throw ModelError("domain has " + std::to_string(out.size()) + " intervals but base_dim is " + std::to_string(m));
  }
  return out;
}

std::string indent(const std::string& block) {
  std::ostringstream os;
  std::istringstream is(block);
  std::string line;
  while (std::getline(is, line)) os << "  " << line << "\n";
  return os.str();
}

double max_spacing(const SectionGrid& g) {
  double h = 0.0;
  for (int a = 0; a < g.base_dim(); ++a) h = std::max(h, g.spacing(a));
  return h;
}

std::string sci(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// derive

int cmd_derive(const ModelFile& mf, std::ostream& out) {
  const FieldModel& model = mf.model;
  const int m = model.m;
  const int n = model.n;
  out << "model: base_dim = " << m << ", fiber_dim = " << n << "\n";
  out << "L = " << model.lagrangian.to_string() << "\n\n";

  const auto pc = poincare_cartan(model);
  out << "Theta_L:\n" << indent(to_string(pc.theta));
  out << "Omega_L:\n" << indent(to_string(pc.omega)) << "\n";

  const auto reg = regularity_certificate(model, {});
  out << "Hessian det = " << reg.determinant.to_string() << "\n";
  if (reg.identically_singular) {
    out << "det = 0 identically: the Legendre map is not a local diffeomorphism\n";
  }

  const LegendreMaps lm = legendre(model);
  out << "\nFL:\n";
  for (const auto& s : momentum_symbols(m, n)) out << "  " << s.name() << " = " << lm.restricted().at(s).to_string() << "\n";
  out << "~FL:\n";
  for (const auto& s : momentum_symbols(m, n)) out << "  " << s.name() << " = " << lm.extended().at(s).to_string() << "\n";
  out << "  p = " << lm.extended().at(Symbol::affine()).to_string() << "\n\n";

  out << "EL equations:\n" << indent(el_system(model).to_string()) << "\n";

  bool singular = false;
  try {
    const HamiltonianSystem hs = hamiltonian_system(lm);
    out << "Legendre inverse: " << to_string(lm.inverse_kind()) << "\n";
    if (hs.h()) {
      const Expression& h = *hs.h();
      out << "h = " << h.to_string() << "\n";
      out << "Theta_h:\n" << indent(to_string(*hs.theta()));
      out << "Omega_h:\n" << indent(to_string(*hs.omega()));
      out << "HDW equations:\n";
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) {
          out << "  dy" << a << "/dx" << nu << " = " << differentiate(h, Symbol::p(a, nu)).to_string() << "\n";
        }
      for (int a = 1; a <= n; ++a) {
        out << "  ";
        for (int nu = 1; nu <= m; ++nu) out << (nu > 1 ? " + " : "") << "dp" << a << "_" << nu << "/dx" << nu;
        out << " = " << (-differentiate(h, Symbol::y(a))).to_string() << "\n";
      }
    } else {
      out << "h: no closed form; evaluated through the numeric Legendre inverse\n";
      out << "HDW equations:\n";
      for (int a = 1; a <= n; ++a)
        for (int nu = 1; nu <= m; ++nu) out << "  dy" << a << "/dx" << nu << " = dh/dp" << a << "_" << nu << "\n";
      for (int a = 1; a <= n; ++a) {
        out << "  ";
        for (int nu = 1; nu <= m; ++nu) out << (nu > 1 ? " + " : "") << "dp" << a << "_" << nu << "/dx" << nu;
        out << " = -dh/dy" << a << "\n";
      }
    }
  } catch (const RegularityError& e) {
    singular = true;
    out << "h: not available (" << e.what() << ")\n";
  }

  const UnifiedSystem us = build_unified(model);
  out << "\nunified constraint:\n  " << us.constraint.to_string() << " = 0\n";
  out << "primary constraints:\n";
  for (const auto& c : us.primary_constraints) out << "  " << c.to_string() << " = 0\n";
  return singular ? kSingular : kOk;
}

// ---------------------------------------------------------------------------
// check

int cmd_check(const ModelFile& mf, int samples, std::uint64_t seed, std::ostream& out) {
  const FieldModel& model = mf.model;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Assignment> points;
  for (int k = 0; k < samples; ++k) {
    Assignment a;
    for (const auto& s : model.space(SpaceTag::jet)->coordinates()) a[s] = unit(rng);
    points.push_back(std::move(a));
  }
  const auto rep = regularity_certificate(model, points);
  out << "det = " << rep.determinant.to_string() << "\n";
  if (rep.identically_singular) {
    out << "det = 0 identically\n";
    out << "verdict: singular\n";
    return kSingular;
  }
  int regular = 0;
  const RegularitySample* bad = nullptr;
  for (const auto& s : rep.samples) {
    if (s.regular) {
      ++regular;
    } else if (!bad) {
      bad = &s;
    }
  }
  out << "regular at " << regular << " of " << rep.samples.size() << " sample points\n";
  if (bad) {
    out << "first singular sample:";
    for (const auto& [s, v] : bad->point) out << " " << s.name() << "=" << v;
    if (bad->determinant) out << " det=" << *bad->determinant;
    if (!bad->error.empty()) out << " (" << bad->error << ")";
    out << "\n";
    out << "verdict: singular\n";
    return kSingular;
  }
  out << "Legendre inverse: " << to_string(legendre(model).inverse_kind()) << "\n";
  out << "verdict: regular\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// solve

void print_report(std::ostream& out, const std::string& name, const SolveReport& r) {
  out << name << ": " << (r.converged ? "converged" : "diverged") << " after " << r.iterations
      << " iterations, residual sup = " << sci(r.residual_sup) << ", l2 = " << sci(r.residual_l2) << " (" << r.message
      << ")\n";
}

int cmd_solve(const ModelFile& mf, int grid, const std::string& formalism, const std::string& out_path,
              std::ostream& out) {
  const FieldModel& model = mf.model;
  const auto boundary = mf.boundary();
  std::optional<SolveResult> el;
  std::optional<SolveResult> hdw;
  if (formalism == "el" || formalism == "both") {
    el = solve_el(model, mf.domain, grid, boundary);
    print_report(out, "el", el->report);
  }
  if (formalism == "hdw" || formalism == "both") {
    hdw = solve_hdw(hamiltonian_system(model), mf.domain, grid, boundary);
    print_report(out, "hdw", hdw->report);
  }

  SectionGrid result = el ? legendre_section(model, el->grid) : prolongation(hdw->grid);
  if (el && hdw) {
    const double h = max_spacing(result);
    double diff = 0.0;
    for (int a = 1; a <= model.n; ++a)
      for (std::size_t k = 0; k < result.node_count(); ++k)
        diff = std::max(diff, std::fabs(el->grid.y(a)[k] - hdw->grid.y(a)[k]));
    out << "max |y_el - y_hdw| = " << sci(diff) << " = " << sci(diff / (h * h)) << " h^2\n";
    // keep the Lagrangian fields and the Hamiltonian momenta
    for (int a = 1; a <= model.n; ++a)
      for (int nu = 1; nu <= model.m; ++nu) result.p(a, nu) = hdw->grid.p(a, nu);
  }
  write_csv_file(result, out_path);
  out << "wrote " << out_path << " (" << result.node_count() << " nodes)\n";
  const bool ok = (!el || el->report.converged) && (!hdw || hdw->report.converged);
  return ok ? kOk : kDiverged;
}

// ---------------------------------------------------------------------------
// verify

struct Verdicts {
  std::ostream& out;
  bool all = true;
  void record(bool pass, const std::string& name, const std::string& detail) {
    all = all && pass;
    out << (pass ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
  }
};

int cmd_verify(const ModelFile& mf, const std::string& path, bool unified, int variational, std::uint64_t seed,
               std::ostream& out) {
  const FieldModel& model = mf.model;
  const SectionGrid psi = read_csv_file(path);
  if (psi.base_dim() != model.m || psi.fiber_dim() != model.n) {
    throw ModelError("solution file dimensions do not match the model");
  }
  const double h = max_spacing(psi);
  const double allowance = kEquivalenceAllowance * h * h;
  out << "grid: " << psi.node_count() << " nodes, h = " << h << ", allowance K h^2 = " << sci(allowance) << "\n";
  Verdicts v{out};

  const auto fwd = verify_equivalence(model, psi);
  v.record(fwd.passed, "equivalence (FL o j1 phi solves HDW)", fwd.message);

  if (psi.has_momenta()) {
    const HamiltonianSystem hs = hamiltonian_system(model);
    const auto conv = verify_equivalence_converse(model, hs, psi);
    v.record(conv.passed, "equivalence (stored momenta, HDW to EL)", conv.message);
  }

  if (unified) {
    const UnifiedSystem us = build_unified(model);
    SectionGrid psi0 = psi;
    if (!psi0.has_velocities() || !psi0.has_momenta()) psi0 = legendre_section(model, psi);
    const auto r = unified_residual(us, psi0);
    auto group = [&](const std::string& name, const ResidualNorms& nr) {
      std::ostringstream os;
      os << "sup = " << sci(nr.sup) << " = " << sci(nr.sup / (h * h)) << " h^2 at "
         << location_string(psi0, nr.sup_node);
      v.record(nr.sup <= allowance, "unified " + name, os.str());
    };
    group("primary constraints", r.primary_norms);
    group("holonomy", r.holonomy_norms);
    group("Euler-Lagrange", r.euler_norms);
  }

  if (variational > 0) {
    const auto vr = variational_check(model, psi, variational, seed);
    const double bound = 5.0 * h * h;
    std::ostringstream os;
    os << "max scaled first variation = " << sci(vr.max_scaled) << " over " << variational << " bumps (bound 5 h^2 = "
       << sci(bound) << ")";
    v.record(vr.max_scaled <= bound, "variational criticality", os.str());
  }
  out << (v.all ? "all checks passed\n" : "some checks failed\n");
  return v.all ? kOk : kVerificationFailed;
}

}  // namespace

std::vector<Expression> ModelFile::boundary() const {
  if (!boundary_text) throw ModelError("the model file has no boundary entry");
  std::vector<Expression> out;
  std::stringstream ss(*boundary_text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(boundary_preset(trim(item), model.m));
  if (static_cast<int>(out.size()) != model.n) {
    throw ModelError("boundary needs " + std::to_string(model.n) + " entries separated by ';'");
  }
  return out;
}

ModelFile parse_model_file(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ModelError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    static const char* known[] = {"base_dim", "fiber_dim", "lagrangian", "domain", "boundary"};
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ModelError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!kv.emplace(key, value).second) throw ModelError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
  }
  for (const char* req : {"base_dim", "fiber_dim", "lagrangian"}) {
    if (!kv.count(req)) throw ModelError(std::string("missing key '") + req + "'");
  }
  ModelFile mf;
  const int m = parse_dim("base_dim", kv["base_dim"]);
  const int n = parse_dim("fiber_dim", kv["fiber_dim"]);
  mf.model = build_model(m, n, kv["lagrangian"]);
  if (kv.count("domain")) {
    mf.domain = parse_domain(kv["domain"], m);
  } else {
    mf.domain.assign(static_cast<std::size_t>(m), {-1.0, 1.0});
  }
  if (kv.count("boundary")) mf.boundary_text = kv["boundary"];
  return mf;
}

ModelFile read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot read model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_file(ss.str());
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lagrangian, Hamiltonian and unified field theory toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 20091106;
  app.add_option("--seed", seed, "seed for sampling and random variations");
  app.footer(
      "exit codes: 0 ok, 1 usage or input error, 2 singular Lagrangian or linearization,\n"
      "            3 solver diverged, 4 verification failed");

  std::string model_path;
  auto* derive = app.add_subcommand("derive", "print the symbolic derivation report");
  derive->add_option("model", model_path, "model file")->required();

  int samples = 50;
  auto* check = app.add_subcommand("check", "regularity of the Lagrangian at random jet points");
  check->add_option("model", model_path, "model file")->required();
  check->add_option("--samples", samples, "number of sample points")->check(CLI::PositiveNumber);

  int grid = 0;
  std::string formalism = "el";
  std::string out_path;
  auto* solve = app.add_subcommand("solve", "solve the field equations on a grid");
  solve->add_option("model", model_path, "model file")->required();
  solve->add_option("--grid", grid, "points per axis")->required()->check(CLI::Range(3, 4097));
  solve->add_option("--formalism", formalism, "el, hdw or both")->check(CLI::IsMember({"el", "hdw", "both"}));
  solve->add_option("--out", out_path, "CSV output path")->required();

  std::string solution;
  bool unified = false;
  int variational = 0;
  auto* verify = app.add_subcommand("verify", "check a stored solution");
  verify->add_option("model", model_path, "model file")->required();
  verify->add_option("--solution", solution, "CSV written by solve")->required();
  verify->add_flag("--unified", unified, "check the three unified residual groups");
  verify->add_option("--variational", variational, "number of random bump variations")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  ModelFile mf;
  try {
    mf = read_model_file(model_path);
  } catch (const Error& e) {
    err << "error: " << model_path << ": " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (derive->parsed()) return cmd_derive(mf, out);
    if (check->parsed()) return cmd_check(mf, samples, seed, out);
    if (solve->parsed()) return cmd_solve(mf, grid, formalism, out_path, out);
    return cmd_verify(mf, solution, unified, variational, seed, out);
  } catch (const RegularityError& e) {
    err << "singular: " << e.what() << "\n";
    return kSingular;
  } catch (const DomainError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const ConvergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace msym::cli
