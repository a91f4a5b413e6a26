#include "vortexlab/cli.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vortexlab/canonical.hpp"
#include "vortexlab/field.hpp"
#include "vortexlab/geometry.hpp"
#include "vortexlab/gl.hpp"
#include "vortexlab/greens.hpp"
#include "vortexlab/harmonic.hpp"
#include "vortexlab/renorm.hpp"
#include "vortexlab/util.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- run context --------------------------------------------------------

struct Ctx {
  std::string command;
  std::string config_path;
  json cfg;
  std::string out;        // output directory
  std::string hash;       // 16-hex-digit run identity (config + overrides)
  std::uint64_t seed = 0;
  bool has_seed = false;
  int threads = 1;
  std::string stage = "config";  // module attribution for error reporting
  std::vector<std::string> outputs;
  std::string started;

  // Registers `name` as an output of this run and returns its full path.
  std::string path(const std::string& name) {
    outputs.push_back(name);
    return out + "/" + name;
  }
};

std::string now_utc() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tmv{};
  gmtime_r(&t, &tmv);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tmv);
  return buf;
}

// ---- config access ------------------------------------------------------

const json& need(const Ctx& c, const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key))
    throw InputError(c.command + ": config requires field '" + key + "'");
  return j.at(key);
}

double jnum(const json& j, const std::string& what) {
  if (!j.is_number()) throw InputError(what + " must be a number");
  return j.get<double>();
}

// Paths in the config resolve as given first (cwd-relative or absolute),
// then relative to the config file's own directory.
std::string resolve(const Ctx& c, const std::string& p) {
  if (fs::exists(p)) return p;
  fs::path alt = fs::path(c.config_path).parent_path() / p;
  if (fs::exists(alt)) return alt.string();
  return p;  // let the consumer report the open failure on the raw path
}

const char* kind_name(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::FlatTorus: return "flat_torus";
    case SurfaceKind::UnitSphere: return "unit_sphere";
    default: return "mesh";
  }
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json point_json(const SurfaceModel& S, const Point& p) {
  json a = json::array();
  a.push_back(p.pos.x());
  a.push_back(p.pos.y());
  if (S.kind != SurfaceKind::FlatTorus) a.push_back(p.pos.z());
  return a;
}

void write_json_file(Ctx& c, const std::string& name, const json& j) {
  std::string p = c.path(name);
  std::ofstream f(p);
  if (!f) throw InputError("cannot open for writing: " + p);
  f << j.dump(2) << "\n";
  if (!f) throw InputError("write failed: " + p);
}

// BallSet JSON with the run identity spliced in as the first key.
void write_ballset(Ctx& c, const std::string& name, const BallSet& bs) {
  std::string body = ballset_to_json(bs);
  std::string p = c.path(name);
  std::ofstream f(p);
  if (!f) throw InputError("cannot open for writing: " + p);
  f << "{\n  \"config\": \"" << c.hash << "\"," << body.substr(1);
  if (!f) throw InputError("write failed: " + p);
}

// ---- shared parsers -----------------------------------------------------

SurfaceModel parse_surface(Ctx& c) {
  c.stage = "geometry";
  const json& j = need(c, c.cfg, "surface");
  std::string kind = need(c, j, "kind").get<std::string>();
  if (kind == "flat_torus") {
    int n = need(c, j, "resolution").get<int>();
    return make_flat_torus(n);
  }
  if (kind == "unit_sphere") {
    int lvl = need(c, j, "subdivision").get<int>();
    return make_unit_sphere(lvl);
  }
  if (kind == "torus_of_revolution") {
    double R = j.value("R", 2.0), r = j.value("r", 1.0);
    int nu = j.value("nu", 48), nv = j.value("nv", 24);
    return build_surface(SurfaceKind::TriMesh, torus_of_revolution(R, r, nu, nv));
  }
  if (kind == "mesh") {
    std::string p = resolve(c, need(c, j, "path").get<std::string>());
    return build_surface(SurfaceKind::TriMesh, read_off(p));
  }
  throw InputError(
      "surface.kind must be flat_torus, unit_sphere, torus_of_revolution, "
      "or mesh (got '" + kind + "')");
}

Point parse_point(const Ctx& c, const SurfaceModel& S, const json& e) {
  if (e.is_number_integer()) {
    int v = e.get<int>();
    if (v < 0 || v >= (int)S.V.size())
      throw InputError("vortex vertex index " + std::to_string(v) +
                       " out of range [0, " + std::to_string(S.V.size()) + ")");
    Point p = Point::at_vertex(v);
    p.pos = S.V[v];
    return p;
  }
  if (!e.is_array())
    throw InputError(c.command +
                     ": each vortex position must be a vertex index, "
                     "[x, y] (flat torus), or [x, y, z]");
  if (e.size() == 2) {
    if (S.kind != SurfaceKind::FlatTorus)
      throw InputError("2-component vortex positions apply to the flat torus only");
    return Point::torus(jnum(e[0], "position"), jnum(e[1], "position"));
  }
  if (e.size() == 3) {
    Vec3 x(jnum(e[0], "position"), jnum(e[1], "position"),
           jnum(e[2], "position"));
    if (S.kind == SurfaceKind::FlatTorus)
      throw InputError("flat-torus vortex positions are [x, y] pairs");
    if (S.kind == SurfaceKind::UnitSphere) {
      if (x.norm() < 1e-12)
        throw InputError("sphere vortex position too close to the origin");
      return Point{x.normalized(), -1};
    }
    // Triangulated surface: pin to the nearest vertex.
    int best = 0;
    double bd = (S.V[0] - x).squaredNorm();
    for (int v = 1; v < (int)S.V.size(); ++v) {
      double d2 = (S.V[v] - x).squaredNorm();
      if (d2 < bd) { bd = d2; best = v; }
    }
    Point p = Point::at_vertex(best);
    p.pos = S.V[best];
    return p;
  }
  throw InputError("vortex position arrays must have 2 or 3 components");
}

VortexConfig parse_vortices(Ctx& c, const SurfaceModel& S) {
  c.stage = "greens";
  const json& j = need(c, c.cfg, "vortices");
  const json& ja = need(c, j, "a");
  const json& jd = need(c, j, "d");
  if (!ja.is_array() || !jd.is_array() || ja.size() != jd.size())
    throw InputError("vortices.a and vortices.d must be arrays of equal length");
  VortexConfig cfg;
  for (const json& e : jd) {
    if (!e.is_number_integer()) throw InputError("vortex degrees must be integers");
    cfg.d.push_back(e.get<int>());
  }
  for (const json& e : ja) cfg.a.push_back(parse_point(c, S, e));
  return cfg;
}

Eigen::VectorXd parse_phi(Ctx& c, const FluxLattice& L, int two_g) {
  bool nearest = !c.cfg.contains("phi") ||
                 (c.cfg["phi"].is_string() &&
                  c.cfg["phi"].get<std::string>() == "nearest_lattice");
  if (nearest) {
    if (two_g == 0) return Eigen::VectorXd();
    c.stage = "harmonic";
    return L.nearest_point(Eigen::VectorXd::Zero(two_g));
  }
  const json& j = c.cfg["phi"];
  if (!j.is_array() || (int)j.size() != two_g)
    throw InputError("phi must be \"nearest_lattice\" or an array of " +
                     std::to_string(two_g) + " numbers");
  Eigen::VectorXd phi(two_g);
  for (int i = 0; i < two_g; ++i) phi[i] = jnum(j[i], "phi");
  return phi;
}

Potential parse_potential(Ctx& c) {
  if (!c.cfg.contains("potential")) return Potential::gl();
  const json& j = c.cfg["potential"];
  std::string name =
      j.is_string() ? j.get<std::string>() : need(c, j, "name").get<std::string>();
  if (name == "gl") return Potential::gl();
  if (name == "mm") return Potential::mm();
  throw InputError("potential must be 'gl' or 'mm' (got '" + name + "')");
}

EnergyKind parse_kind(Ctx& c) {
  std::string k = c.cfg.value("energy", "intrinsic");
  if (k == "intrinsic") return EnergyKind::Intrinsic;
  if (k == "extrinsic") return EnergyKind::Extrinsic;
  if (k == "micromagnetic") return EnergyKind::Micromagnetic;
  throw InputError("energy must be intrinsic, extrinsic, or micromagnetic (got '" +
                   k + "')");
}

const char* kind_label(EnergyKind k) {
  switch (k) {
    case EnergyKind::Intrinsic: return "intrinsic";
    case EnergyKind::Extrinsic: return "extrinsic";
    default: return "micromagnetic";
  }
}

std::vector<double> parse_eps_list(Ctx& c) {
  const json& j = need(c, c.cfg, "epsilon");
  std::vector<double> eps;
  if (j.is_number()) {
    eps.push_back(j.get<double>());
  } else if (j.is_array() && !j.empty()) {
    for (const json& e : j) eps.push_back(jnum(e, "epsilon"));
  } else {
    throw InputError("epsilon must be a positive number or nonempty array");
  }
  for (double e : eps)
    if (!(e > 0.0)) throw InputError("epsilon values must be positive");
  return eps;
}

MinimizeEnergyOptions parse_min_options(Ctx& c) {
  MinimizeEnergyOptions o;
  if (!c.cfg.contains("options")) return o;
  const json& j = c.cfg["options"];
  o.flow_steps = j.value("flow_steps", o.flow_steps);
  o.max_iterations = j.value("max_iterations", o.max_iterations);
  o.memory = j.value("memory", o.memory);
  o.tol_rel = j.value("tol_rel", o.tol_rel);
  o.verbosity = j.value("verbosity", o.verbosity);
  return o;
}

DiscreteField initial_field(Ctx& c, const SurfaceModel& S) {
  const json j = c.cfg.value("init", json("random"));
  if (j.is_object() && j.contains("checkpoint")) {
    c.stage = "field";
    FieldCheckpoint ck =
        load_field(resolve(c, j.at("checkpoint").get<std::string>()));
    if (ck.field.surface_hash != S.content_hash)
      throw InputError(
          "init checkpoint was sampled on a different surface "
          "(surface hash mismatch)");
    return ck.field;
  }
  if (!j.is_string())
    throw InputError(
        "init must be \"random\", \"constant\", \"canonical\", or "
        "{\"checkpoint\": path}");
  std::string name = j.get<std::string>();
  if (name == "random") {
    if (!c.has_seed)
      throw InputError(c.command +
                       ": random initialization requires a seed "
                       "(config field \"seed\" or --seed)");
    return random_unit_field(S, c.seed);
  }
  if (name == "constant") return constant_field(S, cplx(1.0, 0.0));
  if (name == "canonical") {
    VortexConfig cfg = parse_vortices(c, S);
    c.stage = "greens";
    validate_config(S, cfg);
    GreenEvaluator gev(S);
    c.stage = "harmonic";
    HarmonicBasis HB = harmonic_basis(S);
    FluxLattice L = lattice(HB, gev, cfg);
    Eigen::VectorXd phi = parse_phi(c, L, 2 * S.genus);
    c.stage = "canonical";
    return build_ustar(gev, HB, cfg, phi).field;
  }
  throw InputError(
      "init must be \"random\", \"constant\", \"canonical\", or "
      "{\"checkpoint\": path}");
}

json surface_json(const SurfaceModel& S) {
  json j;
  j["kind"] = kind_name(S.kind);
  j["resolution"] = S.resolution;
  j["genus"] = S.genus;
  j["euler_characteristic"] = S.euler_char;
  j["vertices"] = (int)S.V.size();
  j["hash"] = hex16(S.content_hash);
  return j;
}

// ---- commands -----------------------------------------------------------

int cmd_renorm(Ctx& c) {
  SurfaceModel S = parse_surface(c);
  VortexConfig cfg = parse_vortices(c, S);
  c.stage = "greens";
  validate_config(S, cfg);
  GreenEvaluator gev(S);
  c.stage = "harmonic";
  HarmonicBasis HB = harmonic_basis(S);
  FluxLattice L = lattice(HB, gev, cfg);
  int two_g = 2 * S.genus;
  Eigen::VectorXd phi = parse_phi(c, L, two_g);
  bool on_lattice = two_g == 0 || L.member(phi);

  c.stage = "renorm";
  RenormReport rep = W_closed_form(gev, HB, cfg, phi);

  std::vector<double> radii = {4e-2, 1e-2, 2.5e-3};
  if (c.cfg.contains("radii")) {
    radii.clear();
    const json& jr = c.cfg["radii"];
    if (!jr.is_array() || jr.empty())
      throw InputError("radii must be a nonempty array of positive numbers");
    for (const json& e : jr) radii.push_back(jnum(e, "radii"));
    for (double r : radii)
      if (!(r > 0.0)) throw InputError("radii must be positive");
  }

  json quad = json::array();
  {
    CsvWriter csv(c.path("quadrature_convergence.csv"),
                  {"r", "W_quadrature", "W_closed", "error"},
                  "config " + c.hash);
    for (double r : radii) {
      double wq = W_quadrature(gev, HB, cfg, phi, r);
      double err = std::abs(wq - rep.W_closed);
      csv.row({r, wq, rep.W_closed, err});
      json row;
      row["r"] = r;
      row["W_quadrature"] = wq;
      row["error"] = err;
      quad.push_back(row);
    }
  }

  json rj;
  rj["config"] = c.hash;
  rj["command"] = "renorm";
  rj["surface"] = surface_json(S);
  json pos = json::array();
  for (const Point& p : cfg.a) pos.push_back(point_json(S, p));
  rj["vortices"] = {{"a", pos}, {"d", cfg.d}};
  rj["phi"] = vec_json(phi);
  rj["phi_on_lattice"] = on_lattice;
  if (two_g > 0) rj["lattice_zeta"] = vec_json(L.zeta);
  rj["W_closed"] = rep.W_closed;
  rj["terms"] = {{"green_pairs", rep.terms.green_pairs},
                 {"robin", rep.terms.robin},
                 {"psi0_vortex", rep.terms.psi0_vortex},
                 {"flux_sq", rep.terms.flux_sq},
                 {"psi0_dirichlet", rep.terms.psi0_dirichlet}};
  rj["quadrature"] = quad;

  bool want_tilde =
      c.cfg.value("tildeW", S.kind != SurfaceKind::FlatTorus);
  if (want_tilde && S.kind != SurfaceKind::FlatTorus && on_lattice) {
    c.stage = "canonical";
    CanonicalField ustar = build_ustar(gev, HB, cfg, phi);
    c.stage = "renorm";
    ThetaResult th = theta_minimize(S, ustar);
    rj["tildeW"] = th.tildeW;
    rj["theta_residual"] = th.residual;
    rj["W_total"] = rep.W_closed + th.tildeW;
  } else {
    rj["tildeW"] = nullptr;  // flat torus is not embedded, or phi off-lattice
  }
  write_json_file(c, "renorm_report.json", rj);
  return 0;
}

int cmd_minimize_w(Ctx& c) {
  SurfaceModel S = parse_surface(c);
  if (S.kind == SurfaceKind::TriMesh)
    throw InputError(
        "minimize-w runs on the analytic kinds (flat_torus, unit_sphere)");
  c.stage = "greens";
  GreenEvaluator gev(S);
  c.stage = "harmonic";
  HarmonicBasis HB = harmonic_basis(S);

  const json& jv = need(c, c.cfg, "vortices");
  VortexConfig init;
  bool random_init = !jv.contains("a");
  if (!random_init) {
    init = parse_vortices(c, S);
  } else {
    const json& jd = need(c, jv, "d");
    if (!jd.is_array() || jd.empty())
      throw InputError("vortices.d must be a nonempty array of integers");
    for (const json& e : jd) init.d.push_back(e.get<int>());
    if (!c.has_seed)
      throw InputError(
          "minimize-w with random initial positions requires a seed "
          "(config field \"seed\" or --seed)");
    Rng rng(c.seed);
    auto sample = [&]() -> Point {
      if (S.kind == SurfaceKind::FlatTorus)
        return Point::torus(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
      Vec3 x(rng.normal(), rng.normal(), rng.normal());
      while (x.norm() < 1e-8) x = Vec3(rng.normal(), rng.normal(), rng.normal());
      return Point{x.normalized(), -1};
    };
    for (std::size_t k = 0; k < init.d.size(); ++k) {
      Point p = sample();
      for (int tries = 0; tries < 1000; ++tries) {
        bool clear = true;
        for (const Point& q : init.a)
          if (geodesic_dist(S, p, q) < 1e-2) { clear = false; break; }
        if (clear) break;
        p = sample();
      }
      init.a.push_back(p);
    }
  }
  c.stage = "greens";
  validate_config(S, init);

  MinimizeWOptions opts;
  if (c.cfg.contains("options")) {
    const json& jo = c.cfg["options"];
    opts.max_outer = jo.value("max_outer", opts.max_outer);
    opts.step_frac = jo.value("step_frac", opts.step_frac);
    opts.tol_step = jo.value("tol_step", opts.tol_step);
    opts.extrinsic = jo.value("extrinsic", opts.extrinsic);
    opts.verbosity = jo.value("verbosity", opts.verbosity);
  }
  c.stage = "renorm";
  MinimizeWResult res = minimize_W(gev, HB, init, opts);

  {
    CsvWriter csv(c.path("minimize_w_positions.csv"),
                  {"vortex", "degree", "x", "y", "z"}, "config " + c.hash);
    for (std::size_t k = 0; k < res.cfg.a.size(); ++k)
      csv.row({(double)k, (double)res.cfg.d[k], res.cfg.a[k].pos.x(),
               res.cfg.a[k].pos.y(), res.cfg.a[k].pos.z()});
  }

  json rj;
  rj["config"] = c.hash;
  rj["command"] = "minimize-w";
  rj["surface"] = surface_json(S);
  rj["random_init"] = random_init;
  if (c.has_seed) rj["seed"] = c.seed;
  rj["W"] = res.W;
  rj["converged"] = res.converged;
  rj["annihilated"] = res.annihilated;
  rj["iterations"] = res.iterations;
  rj["message"] = res.message;
  rj["phi"] = vec_json(res.phi);
  json pos = json::array();
  for (const Point& p : res.cfg.a) pos.push_back(point_json(S, p));
  rj["positions"] = pos;
  rj["degrees"] = res.cfg.d;
  json seps = json::array();
  for (std::size_t i = 0; i < res.cfg.a.size(); ++i)
    for (std::size_t j = i + 1; j < res.cfg.a.size(); ++j) {
      json e;
      e["i"] = i;
      e["j"] = j;
      e["geodesic"] = geodesic_dist(S, res.cfg.a[i], res.cfg.a[j]);
      seps.push_back(e);
    }
  rj["separations"] = seps;
  write_json_file(c, "minimize_w_report.json", rj);
  return 0;
}

int cmd_gl(Ctx& c) {
  SurfaceModel S = parse_surface(c);
  Potential F = parse_potential(c);
  EnergyKind kind = parse_kind(c);
  std::vector<double> eps_list = parse_eps_list(c);
  MinimizeEnergyOptions mopts = parse_min_options(c);
  bool continuation = c.cfg.value("continuation", true);
  DiscreteField u0 = initial_field(c, S);

  json runs = json::array();
  CsvWriter summary(c.path("gl_summary.csv"),
                    {"epsilon", "energy", "grad_norm", "iterations", "converged"},
                    "config " + c.hash);
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    double eps = eps_list[i];
    c.stage = "gl";
    log_info("gl: minimizing at epsilon " + std::to_string(eps));
    MinimizeEnergyResult res = minimize_energy(S, kind, u0, eps, F, mopts);

    std::string tname = "gl_trajectory_eps" + std::to_string(i) + ".csv";
    {
      CsvWriter t(c.path(tname), {"iteration", "energy"}, "config " + c.hash);
      for (std::size_t k = 0; k < res.energy_history.size(); ++k)
        t.row({(double)k, res.energy_history[k]});
    }
    c.stage = "field";
    std::string ckname = "field_eps" + std::to_string(i) + ".csv";
    save_field(c.path(ckname), res.u, eps, F.name, "config " + c.hash);

    summary.row({eps, res.energy, res.grad_norm, (double)res.iterations,
                 res.converged ? 1.0 : 0.0});
    json run;
    run["epsilon"] = eps;
    run["energy"] = res.energy;
    run["grad_norm"] = res.grad_norm;
    run["iterations"] = res.iterations;
    run["converged"] = res.converged;
    run["message"] = res.message;
    run["checkpoint"] = ckname;
    run["trajectory"] = tname;
    if (kind == EnergyKind::Micromagnetic && res.Mperp.size() > 0)
      run["max_normal_component"] = res.Mperp.cwiseAbs().maxCoeff();
    runs.push_back(run);
    if (continuation) u0 = res.u;
  }

  json rj;
  rj["config"] = c.hash;
  rj["command"] = "gl";
  rj["surface"] = surface_json(S);
  rj["energy"] = kind_label(kind);
  rj["potential"] = F.name;
  if (c.has_seed) rj["seed"] = c.seed;
  rj["continuation"] = continuation;
  rj["runs"] = runs;
  write_json_file(c, "gl_report.json", rj);
  return 0;
}

int cmd_profile(Ctx& c) {
  Potential F = parse_potential(c);
  std::vector<double> tg = {0.2, 0.1, 0.05, 0.025};
  if (c.cfg.contains("t_grid")) {
    tg.clear();
    const json& jt = c.cfg["t_grid"];
    if (!jt.is_array() || jt.empty())
      throw InputError("t_grid must be a nonempty array of numbers in (0, 0.5)");
    for (const json& e : jt) tg.push_back(jnum(e, "t_grid"));
  }
  int grid = c.cfg.value("grid_size", 2000);
  std::string which = c.cfg.value("profiles", "both");
  bool do_in = which == "both" || which == "intrinsic";
  bool do_mm = which == "both" || which == "micromagnetic";
  if (!do_in && !do_mm)
    throw InputError(
        "profiles must be intrinsic, micromagnetic, or both (got '" + which +
        "')");

  std::vector<std::string> header = {"t"};
  if (do_in) { header.push_back("I_in"); header.push_back("gamma_in"); }
  if (do_mm) { header.push_back("I_mm"); header.push_back("gamma_mm"); }

  c.stage = "gl";
  ProfileSolution best_in, best_mm;
  double tmin = *std::min_element(tg.begin(), tg.end());
  json rows = json::array();
  {
    CsvWriter csv(c.path("profile_constants.csv"), header, "config " + c.hash);
    for (double t : tg) {
      std::vector<double> row = {t};
      json jr;
      jr["t"] = t;
      if (do_in) {
        ProfileSolution s = radial_profile_in(t, grid, F);
        row.push_back(s.I_value);
        row.push_back(s.I_value + PI * std::log(t));
        jr["I_in"] = s.I_value;
        jr["gamma_in"] = s.I_value + PI * std::log(t);
        if (t == tmin) best_in = s;
      }
      if (do_mm) {
        ProfileSolution s = radial_profile_mm(t, grid, F);
        row.push_back(s.I_value);
        row.push_back(s.I_value + PI * std::log(t));
        jr["I_mm"] = s.I_value;
        jr["gamma_mm"] = s.I_value + PI * std::log(t);
        if (t == tmin) best_mm = s;
      }
      csv.row(row);
      rows.push_back(jr);
    }
  }
  if (do_in) {
    CsvWriter csv(c.path("profile_curve_intrinsic.csv"), {"r", "f"},
                  "config " + c.hash);
    for (Eigen::Index i = 0; i < best_in.r.size(); ++i)
      csv.row({best_in.r[i], best_in.f[i]});
  }
  if (do_mm) {
    CsvWriter csv(c.path("profile_curve_micromagnetic.csv"), {"r", "angle"},
                  "config " + c.hash);
    for (Eigen::Index i = 0; i < best_mm.r.size(); ++i)
      csv.row({best_mm.r[i], best_mm.f[i]});
  }

  json rj;
  rj["config"] = c.hash;
  rj["command"] = "profile";
  rj["potential"] = F.name;
  rj["grid_size"] = grid;
  rj["rows"] = rows;
  if (do_in) {
    rj["gamma_in_at_min_t"] = best_in.I_value + PI * std::log(best_in.t);
    rj["iota_reference_intrinsic"] = iota_intrinsic(F);
  }
  if (do_mm) {
    rj["gamma_mm_at_min_t"] = best_mm.I_value + PI * std::log(best_mm.t);
    rj["iota_reference_micromagnetic"] = iota_micromagnetic(F);
  }
  write_json_file(c, "profile_report.json", rj);
  return 0;
}

int cmd_detect(Ctx& c) {
  SurfaceModel S = parse_surface(c);
  c.stage = "field";
  std::string ckpath = resolve(c, need(c, c.cfg, "checkpoint").get<std::string>());
  FieldCheckpoint ck = load_field(ckpath);
  if (ck.field.surface_hash != S.content_hash)
    throw InputError(
        "checkpoint was sampled on a different surface (surface hash mismatch)");
  double eps = c.cfg.value("epsilon", ck.epsilon);
  if (!(eps > 0.0)) throw InputError("epsilon must be positive");
  double sigma = c.cfg.value("sigma", 0.0);
  if (sigma <= 0.0) sigma = std::max(0.3, 2.0 * std::pow(eps, 0.7));
  BallOptions bopts;
  if (c.cfg.contains("options")) {
    const json& jo = c.cfg["options"];
    bopts.degree_budget = jo.value("degree_budget", bopts.degree_budget);
    bopts.q = jo.value("q", bopts.q);
  }
  c.stage = "vortex";
  BallSet bs = ball_construction(S, ck.field, eps, sigma, bopts);
  write_ballset(c, "balls.json", bs);

  int total = 0;
  json degrees = json::array();
  json balls = json::array();
  for (const Ball& b : bs.balls) {
    total += b.degree;
    degrees.push_back(b.degree);
    json jb;
    jb["center"] = {b.center.pos.x(), b.center.pos.y(), b.center.pos.z()};
    jb["radius"] = b.radius;
    jb["degree"] = b.degree;
    balls.push_back(jb);
  }
  json rj;
  rj["config"] = c.hash;
  rj["command"] = "detect";
  rj["surface"] = surface_json(S);
  rj["checkpoint"] = ckpath;
  rj["epsilon"] = eps;
  rj["sigma"] = sigma;
  rj["count"] = (int)bs.balls.size();
  rj["degrees"] = degrees;
  rj["total_degree"] = total;
  rj["euler_characteristic"] = S.euler_char;
  rj["degrees_match_chi"] = total == S.euler_char;
  rj["balls"] = balls;
  rj["diagnostics"] = bs.diagnostics;
  write_json_file(c, "detect_report.json", rj);
  return 0;
}

int cmd_validate_expansion(Ctx& c) {
  SurfaceModel S = parse_surface(c);
  Potential F = parse_potential(c);
  EnergyKind kind = parse_kind(c);
  std::vector<double> eps_list = parse_eps_list(c);
  MinimizeEnergyOptions mopts = parse_min_options(c);
  bool continuation = c.cfg.value("continuation", true);
  double sigma = c.cfg.value("sigma", 0.0);
  DiscreteField u0 = initial_field(c, S);
  c.stage = "greens";
  GreenEvaluator gev(S);
  c.stage = "harmonic";
  HarmonicBasis HB = harmonic_basis(S);

  json runs = json::array();
  CsvWriter csv(c.path("expansion_report.csv"),
                {"epsilon", "E", "n_pi_log_inv_eps", "W", "n_iota", "residual",
                 "tildeW", "n", "snap_distance", "degrees_match_chi"},
                "config " + c.hash);
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    double eps = eps_list[i];
    c.stage = "gl";
    log_info("validate-expansion: minimizing at epsilon " + std::to_string(eps));
    MinimizeEnergyResult res = minimize_energy(S, kind, u0, eps, F, mopts);
    EnergyReport er = expansion_report(gev, HB, res.u, eps, F, kind, sigma);

    c.stage = "field";
    std::string ckname = "field_eps" + std::to_string(i) + ".csv";
    save_field(c.path(ckname), res.u, eps, F.name, "config " + c.hash);
    write_ballset(c, "balls_eps" + std::to_string(i) + ".json", er.balls);

    csv.row({eps, er.energy, er.n * PI * std::log(1.0 / eps), er.W,
             er.n * er.iota, er.residual, er.tildeW, (double)er.n,
             er.snap_distance, er.degrees_match_chi ? 1.0 : 0.0});

    json run;
    run["epsilon"] = eps;
    run["energy"] = er.energy;
    run["converged"] = res.converged;
    run["iterations"] = res.iterations;
    run["minimizer_message"] = res.message;
    run["n"] = er.n;
    json det = json::array();
    for (std::size_t k = 0; k < er.detected.a.size(); ++k) {
      json v;
      v["position"] = point_json(S, er.detected.a[k]);
      v["degree"] = er.detected.d[k];
      det.push_back(v);
    }
    run["detected"] = det;
    run["degrees_match_chi"] = er.degrees_match_chi;
    run["phi"] = vec_json(er.phi);
    run["snap_distance"] = er.snap_distance;
    run["W"] = er.W;
    run["tildeW"] = er.tildeW;
    run["iota"] = er.iota;
    run["residual"] = er.residual;
    run["checkpoint"] = ckname;
    if (!er.message.empty()) run["message"] = er.message;
    runs.push_back(run);
    if (continuation) u0 = res.u;
  }

  json rj;
  rj["config"] = c.hash;
  rj["command"] = "validate-expansion";
  rj["surface"] = surface_json(S);
  rj["energy"] = kind_label(kind);
  rj["potential"] = F.name;
  if (c.has_seed) rj["seed"] = c.seed;
  rj["continuation"] = continuation;
  rj["runs"] = runs;
  write_json_file(c, "validation_report.json", rj);
  return 0;
}

// ---- driver -------------------------------------------------------------

struct SubSpec {
  const char* name;
  const char* desc;
  int (*fn)(Ctx&);
};

const SubSpec kSubs[] = {
    {"renorm",
     "closed-form and quadrature renormalized energies of a vortex "
     "configuration",
     cmd_renorm},
    {"minimize-w", "minimize the renormalized energy over vortex positions",
     cmd_minimize_w},
    {"gl", "minimize a Ginzburg-Landau energy and checkpoint the fields",
     cmd_gl},
    {"profile", "radial core profiles and their stabilized constants",
     cmd_profile},
    {"detect", "vortex ball construction on a saved field checkpoint",
     cmd_detect},
    {"validate-expansion",
     "minimize, detect, and report the energy expansion residual per epsilon",
     cmd_validate_expansion},
};

const std::set<std::string> kKnownKeys = {
    "surface", "potential", "vortices", "phi",       "epsilon",
    "seed",    "out",       "options",  "init",      "radii",
    "t_grid",  "grid_size", "profiles", "checkpoint", "sigma",
    "energy",  "continuation"};

void write_metadata(const Ctx& c) {
  json m;
  m["command"] = c.command;
  m["config"] = c.hash;
  m["config_path"] = c.config_path;
  m["out"] = c.out;
  m["threads"] = c.threads;
  if (c.has_seed)
    m["seed"] = c.seed;
  else
    m["seed"] = nullptr;
  m["started_utc"] = c.started;
  m["finished_utc"] = now_utc();
  m["outputs"] = c.outputs;
  std::ofstream f(c.out + "/metadata.json");
  if (f) f << m.dump(2) << "\n";
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{
      "vortexlab: renormalized vortex energies and Ginzburg-Landau "
      "expansions on closed surfaces"};
  app.require_subcommand(1);
  std::string config_path, out_override;
  int threads = 1;
  std::uint64_t seed = 0;
  for (const SubSpec& s : kSubs) {
    CLI::App* sub = app.add_subcommand(s.name, s.desc);
    sub->add_option("--config", config_path, "JSON run configuration file")
        ->required();
    sub->add_option("--out", out_override,
                    "output directory (overrides the config)");
    sub->add_option("--threads", threads,
                    "worker thread count (recorded in run metadata)");
    sub->add_option("--seed", seed, "RNG seed (overrides the config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().at(0);
  Ctx c;
  c.command = sub->get_name();
  c.config_path = config_path;
  c.started = now_utc();
  c.threads = threads;

  try {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) throw InputError("cannot open config: " + config_path);
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    std::uint64_t h = fnv1a64(bytes);
    h = fnv1a64(c.command, h);
    try {
      c.cfg = json::parse(bytes);
    } catch (const json::parse_error& e) {
      throw InputError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!c.cfg.is_object()) throw InputError("config root must be a JSON object");
    for (const auto& item : c.cfg.items())
      if (!kKnownKeys.count(item.key()))
        log_warn("unrecognized config field '" + item.key() + "'");

    if (sub->count("--seed") > 0) {
      c.seed = seed;
      c.has_seed = true;
      h = fnv1a64("seed=" + std::to_string(seed), h);
    } else if (c.cfg.contains("seed")) {
      if (!c.cfg["seed"].is_number_unsigned() && !c.cfg["seed"].is_number_integer())
        throw InputError("seed must be a nonnegative integer");
      c.seed = c.cfg["seed"].get<std::uint64_t>();
      c.has_seed = true;
    }
    c.hash = hex16(h);
    c.out = sub->count("--out") > 0 ? out_override
                                    : c.cfg.value("out", std::string("out"));
    if (c.out.empty()) throw InputError("output directory must be nonempty");
    fs::create_directories(c.out);
    if (c.threads < 1) throw InputError("--threads must be at least 1");
    Eigen::setNbThreads(c.threads);
    log_info("command " + c.command + ", config " + c.hash + ", out " + c.out);

    int rc = 1;
    for (const SubSpec& s : kSubs)
      if (c.command == s.name) rc = s.fn(c);
    write_metadata(c);
    return rc;
  } catch (const InputError& e) {
    std::fprintf(stderr, "config error [%s]: %s\n", c.stage.c_str(), e.what());
    return 2;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure [%s]: %s\n", c.stage.c_str(),
                 e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "failure [%s]: %s\n", c.stage.c_str(), e.what());
    return 3;
  }
}

}  // namespace vortexlab
