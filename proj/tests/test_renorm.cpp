#include <cmath>
#include <vector>

#include <Eigen/Geometry>

#include "doctest.h"
#include "vortexlab/renorm.hpp"

using namespace vortexlab;

namespace {

VortexConfig sphere_pair(double theta2) {
  return {{Point{{0.0, 0.0, 1.0}, -1},
           Point{{std::sin(theta2), 0.0, std::cos(theta2)}, -1}},
          {1, 1}};
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - mx) * (y[i] - my);
    den += (x[i] - mx) * (x[i] - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("closed form: sphere pair differences and term breakdown") {
  auto S = make_unit_sphere(3);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  Eigen::VectorXd none(0);

  auto cfg1 = sphere_pair(2.8);
  auto cfg2 = sphere_pair(1.1);
  auto r1 = W_closed_form(gev, HB, cfg1, none);
  auto r2 = W_closed_form(gev, HB, cfg2, none);

  // Identical-degree pairs on the round sphere differ only through the
  // Green's interaction.
  double dG = gev.eval(cfg1.a[0], cfg1.a[1]) - gev.eval(cfg2.a[0], cfg2.a[1]);
  CHECK(r1.W_closed - r2.W_closed ==
        doctest::Approx(4.0 * PI * PI * dG).epsilon(1e-10));

  auto total = [](const RenormReport& r) {
    return r.terms.green_pairs + r.terms.robin + r.terms.psi0_vortex +
           r.terms.flux_sq + r.terms.psi0_dirichlet;
  };
  CHECK(r1.W_closed == doctest::Approx(total(r1)).epsilon(1e-15));
  CHECK(r1.terms.psi0_vortex == 0.0);
  CHECK(r1.terms.psi0_dirichlet == 0.0);
  CHECK(r1.terms.flux_sq == 0.0);
  CHECK(r1.terms.robin == doctest::Approx(r2.terms.robin).epsilon(1e-6));

  VortexConfig bad{{cfg1.a[0], cfg1.a[0]}, {1, 1}};
  CHECK_THROWS_AS(W_closed_form(gev, HB, bad, none), InputError);
  CHECK_THROWS_AS(W_closed_form(gev, HB, cfg1, Eigen::VectorXd::Zero(2)),
                  InputError);
}

TEST_CASE("closed form: flat torus flux term and dipole collapse") {
  auto S = make_flat_torus(32);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point::torus(0.25, 0.25), Point::torus(0.75, 0.75)},
                   {1, -1}};

  Eigen::VectorXd phi0 = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd phi1(2);
  phi1 << TWO_PI, 0.0;
  auto w0 = W_closed_form(gev, HB, cfg, phi0);
  auto w1 = W_closed_form(gev, HB, cfg, phi1);
  CHECK(w1.W_closed - w0.W_closed ==
        doctest::Approx(0.5 * TWO_PI * TWO_PI).epsilon(1e-12));
  CHECK(w1.terms.flux_sq == 0.5 * phi1.squaredNorm());

  // Opposite degrees attract: W diverges to minus infinity like
  // 2 pi log(separation).
  std::vector<double> ls, Ws;
  for (double s : {0.05, 0.025, 0.0125, 0.00625}) {
    VortexConfig c{{Point::torus(0.3, 0.3), Point::torus(0.3 + s, 0.3)},
                   {1, -1}};
    ls.push_back(std::log(s));
    Ws.push_back(W_closed_form(gev, HB, c, phi0).W_closed);
  }
  CHECK(fit_slope(ls, Ws) == doctest::Approx(TWO_PI).epsilon(0.02));
}

TEST_CASE("quadrature: oracle agreement on sphere and torus") {
  std::vector<double> radii{4e-2, 1e-2, 2.5e-3};

  auto check_surface = [&](const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg,
                           const Eigen::VectorXd& phi) {
    double Wc = W_closed_form(gev, HB, cfg, phi).W_closed;
    std::vector<double> lr, le, err;
    for (double r : radii) {
      double Wq = W_quadrature(gev, HB, cfg, phi, r);
      err.push_back(std::abs(Wq - Wc));
      lr.push_back(std::log(r));
      le.push_back(std::log(err.back()));
    }
    // Errors shrink by at least half per 4x radius reduction and land
    // below 1e-2 at the finest radius.
    CHECK(err[1] < 0.5 * err[0]);
    CHECK(err[2] < 0.5 * err[1]);
    CHECK(err[2] <= 1e-2);
    CHECK(fit_slope(lr, le) >= 0.45);
  };

  auto Ssp = make_unit_sphere(3);
  GreenEvaluator gsp(Ssp);
  auto HBsp = harmonic_basis(Ssp);
  check_surface(gsp, HBsp, sphere_pair(2.4), Eigen::VectorXd(0));

  auto St = make_flat_torus(32);
  GreenEvaluator gt(St);
  auto HBt = harmonic_basis(St);
  VortexConfig cfg{{Point::torus(0.25, 0.25), Point::torus(0.75, 0.75)},
                   {1, -1}};
  Eigen::VectorXd phi = lattice(HBt, gt, cfg).nearest_point(
      Eigen::VectorXd::Zero(2));
  check_surface(gt, HBt, cfg, phi);

  // Radius domain guards.
  CHECK_THROWS_AS(W_quadrature(gt, HBt, cfg, phi, 0.6), InputError);
  CHECK_THROWS_AS(W_quadrature(gt, HBt, cfg, phi, -1.0), InputError);
}

TEST_CASE("position minimization: sphere pairs become antipodal") {
  auto S = make_unit_sphere(3);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);

  std::vector<VortexConfig> inits;
  inits.push_back({{Point{Vec3(0.3, -0.5, 0.8).normalized(), -1},
                    Point{Vec3(0.9, 0.1, -0.2).normalized(), -1}},
                   {1, 1}});
  inits.push_back({{Point{Vec3(-0.1, 0.7, 0.7).normalized(), -1},
                    Point{Vec3(0.4, 0.5, 0.76).normalized(), -1}},
                   {1, 1}});
  for (const auto& init : inits) {
    auto res = minimize_W(gev, HB, init);
    CHECK(res.converged);
    CHECK(!res.annihilated);
    CHECK(geodesic_dist(S, res.cfg.a[0], res.cfg.a[1]) ==
          doctest::Approx(PI).epsilon(1e-3 / PI));
  }

  // W is invariant under simultaneous rotation of the pair.
  Eigen::VectorXd none(0);
  auto base = sphere_pair(2.0);
  double w0 = W_closed_form(gev, HB, base, none).W_closed;
  for (double ang : {0.3, 1.1, 2.5}) {
    Eigen::AngleAxisd R(ang, Vec3(1.0, 2.0, -0.5).normalized());
    VortexConfig rot{{Point{R * base.a[0].pos, -1},
                      Point{R * base.a[1].pos, -1}},
                     {1, 1}};
    double w = W_closed_form(gev, HB, rot, none).W_closed;
    CHECK(std::abs(w - w0) < 1e-6);
  }
}

TEST_CASE("position minimization: torus dipole annihilates") {
  auto S = make_flat_torus(32);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig init{{Point::torus(0.3, 0.3), Point::torus(0.45, 0.3)},
                    {1, -1}};
  auto res = minimize_W(gev, HB, init);
  CHECK(res.annihilated);
  CHECK(res.message.find("annihilation") != std::string::npos);
  CHECK(geodesic_dist(S, res.cfg.a[0], res.cfg.a[1]) < 2e-3);
}

TEST_CASE("shape operator: sphere exact, torus of revolution fitted") {
  auto S = make_unit_sphere(2);
  Point x{Vec3(0.2, -0.4, 0.9).normalized(), -1};
  Vec3 n = x.pos;
  Vec3 v(0.3, 0.9, -0.1);
  Vec3 vt = v - v.dot(n) * n;
  Vec3 sv = shape_operator(S, x, v);
  CHECK(sv.dot(n) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sv.norm() == doctest::Approx(vt.norm()).epsilon(1e-14));
  Vec3 iu = n.cross(vt);
  CHECK(std::abs(shape_operator(S, x, vt).dot(iu)) < 1e-12);

  auto Sf = make_flat_torus(8);
  CHECK_THROWS_AS(shape_operator(Sf, Point::torus(0.1, 0.1), Vec3(1, 0, 0)),
                  InputError);

  auto Tm = build_surface(SurfaceKind::TriMesh, torus_of_revolution(1.0, 0.4, 64, 32));
  auto curvatures_at = [&](int v) {
    const Vec3& e1 = Tm.frames.e1[v];
    const Vec3& e2 = Tm.frames.e2[v];
    Eigen::Matrix2d M;
    Vec3 s1 = shape_operator(Tm, Point::at_vertex(v), e1);
    Vec3 s2 = shape_operator(Tm, Point::at_vertex(v), e2);
    M << s1.dot(e1), s2.dot(e1), s1.dot(e2), s2.dot(e2);
    CHECK(std::abs(M(0, 1) - M(1, 0)) < 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M);
    double k1 = std::abs(es.eigenvalues()[0]);
    double k2 = std::abs(es.eigenvalues()[1]);
    if (k1 > k2) std::swap(k1, k2);
    return std::pair<double, double>(k1, k2);
  };

  int outer = 0, inner = 0;
  double rmax = 0.0, rmin = 1e300;
  for (int v = 0; v < static_cast<int>(Tm.V.size()); ++v) {
    double rho = std::hypot(Tm.V[v].x(), Tm.V[v].y());
    if (rho > rmax) {
      rmax = rho;
      outer = v;
    }
    if (rho < rmin) {
      rmin = rho;
      inner = v;
    }
  }
  auto [ko1, ko2] = curvatures_at(outer);
  CHECK(ko1 == doctest::Approx(1.0 / 1.4).epsilon(0.03));
  CHECK(ko2 == doctest::Approx(1.0 / 0.4).epsilon(0.03));
  auto [ki1, ki2] = curvatures_at(inner);
  CHECK(ki1 == doctest::Approx(1.0 / 0.6).epsilon(0.03));
  CHECK(ki2 == doctest::Approx(1.0 / 0.4).epsilon(0.03));
}

TEST_CASE("bending energy: sphere constant, init invariance, mesh residual") {
  auto S = make_unit_sphere(4);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point{{0.0, 0.0, 1.0}, -1}, Point{{0.0, 0.0, -1.0}, -1}},
                   {1, 1}};
  auto CF = build_ustar(gev, HB, cfg, Eigen::VectorXd(0));
  auto th = theta_minimize(S, CF);
  CHECK(th.converged);

  double h = 0.0;
  for (double l : S.edge_length) h = std::max(h, l);
  CHECK(th.tildeW == doctest::Approx(TWO_PI).epsilon(
                         std::max(1e-3, 2.2 * h * h) / TWO_PI));
  // The minimizing phase is constant: its differential vanishes.
  CHECK((S.dec.d0 * th.theta.values).cwiseAbs().maxCoeff() < 1e-4);

  // Same minimum from a shifted start.
  auto th2 = theta_minimize(S, CF,
                            Eigen::VectorXd::Constant(S.V.size(), 0.7));
  CHECK(th2.tildeW == doctest::Approx(th.tildeW).epsilon(1e-10));

  // Genus-1 embedded mesh: the returned phase satisfies the discrete
  // optimality system of the minimized functional.
  auto Tm = build_surface(SurfaceKind::TriMesh, torus_of_revolution(1.0, 0.4, 32, 16));
  GreenEvaluator gtm(Tm);
  auto HBm = harmonic_basis(Tm);
  int vplus = 0, vminus = static_cast<int>(Tm.V.size()) / 2 + 5;
  VortexConfig mcfg{{Point::at_vertex(vplus), Point::at_vertex(vminus)},
                    {1, -1}};
  Eigen::VectorXd mphi = lattice(HBm, gtm, mcfg).nearest_point(
      Eigen::VectorXd::Zero(2));
  auto MCF = build_ustar(gtm, HBm, mcfg, mphi);
  auto tm = theta_minimize(Tm, MCF);
  CHECK(tm.converged);
  CHECK(tm.tildeW > 0.0);

  const Eigen::VectorXd& m = Tm.dec.star0;
  const Eigen::VectorXd& theta = tm.theta.values;
  Eigen::VectorXd lap = Tm.dec.L0 * theta;
  double rn = 0.0, scale = 0.0;
  for (int v = 0; v < static_cast<int>(Tm.V.size()); ++v) {
    cplx z = MCF.field.values[v];
    Vec3 u = z.real() * Tm.frames.e1[v] + z.imag() * Tm.frames.e2[v];
    Vec3 iu = -z.imag() * Tm.frames.e1[v] + z.real() * Tm.frames.e2[v];
    Vec3 Su = shape_operator(Tm, Point::at_vertex(v), u);
    Vec3 Siu = shape_operator(Tm, Point::at_vertex(v), iu);
    double a = Su.squaredNorm(), c = Siu.squaredNorm(), b = Su.dot(Siu);
    double g = lap[v] + m[v] * (b * std::cos(2.0 * theta[v]) -
                                0.5 * (a - c) * std::sin(2.0 * theta[v]));
    rn += g * g / m[v];
    scale += m[v] * 0.25 * (a + c) * (a + c);
  }
  CHECK(std::sqrt(rn) <= 1.1e-6 * std::sqrt(scale));
}

TEST_CASE("bending energy: total objective keeps the sphere minimizer") {
  auto S = make_unit_sphere(3);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig init{{Point{Vec3(0.6, 0.2, 0.77).normalized(), -1},
                     Point{Vec3(-0.3, 0.8, 0.52).normalized(), -1}},
                    {1, 1}};
  auto plain = minimize_W(gev, HB, init);
  MinimizeWOptions opts;
  opts.extrinsic = true;
  auto ext = minimize_W(gev, HB, init, opts);
  CHECK(ext.converged);
  for (int k = 0; k < 2; ++k)
    CHECK(geodesic_dist(S, plain.cfg.a[k], ext.cfg.a[k]) < 1e-3);
  // On the round sphere the bending term is the constant half-area.
  double area = S.dec.star0.sum();
  CHECK(ext.W - plain.W == doctest::Approx(0.5 * area).epsilon(1e-9));
}
