#include <doctest.h>

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "vortexlab/canonical.hpp"
#include "vortexlab/vortex.hpp"

using namespace vortexlab;

namespace {

VortexConfig torus_dipole() {
  return {{Point::torus(0.25, 0.25), Point::torus(0.75, 0.75)}, {1, -1}};
}

DiscreteField tapered_ustar(const SurfaceModel& S, const GreenEvaluator& gev,
                            const HarmonicBasis& HB, const VortexConfig& cfg,
                            double eps) {
  Eigen::VectorXd phi(2 * S.genus);
  if (S.genus > 0) {
    auto L = lattice(HB, gev, cfg);
    phi = L.nearest_point(Eigen::VectorXd::Zero(2 * S.genus));
  }
  auto CF = build_ustar(gev, HB, cfg, phi);
  auto dist = vortex_distance_field(S, cfg);
  DiscreteField u = CF.field;
  for (long v = 0; v < u.values.size(); ++v)
    u.values[v] *= std::min(1.0, dist[v] / (2.0 * eps));
  return u;
}

// Closed lattice loop on the offset torus grid: bottom row j0 from column a
// to b, a right flank climbing by up-right steps, the row j1 back, and a
// left flank descending the up-left chain above column a.  Valid while the
// flank columns stay inside [0, n).
std::vector<int> rect_loop(int n, int a, int b, int j0, int j1) {
  auto vid = [n](int i, int j) { return j * n + i; };
  std::vector<int> loop;
  for (int i = a; i <= b; ++i) loop.push_back(vid(i, j0));
  int ci = b;
  for (int j = j0; j < j1; ++j) {
    if (j % 2 == 1) ++ci;
    loop.push_back(vid(ci, j + 1));
  }
  std::vector<int> left;
  int li = a;
  for (int j = j0; j < j1; ++j) {
    if (j % 2 == 0) --li;
    left.push_back(vid(li, j + 1));
  }
  for (int i = ci - 1; i >= li; --i) loop.push_back(vid(i, j1));
  for (int k = static_cast<int>(left.size()) - 2; k >= 0; --k)
    loop.push_back(left[k]);
  loop.push_back(vid(a, j0));
  return loop;
}

DiscreteField renormalized(const DiscreteField& u) {
  DiscreteField ut = u;
  for (long v = 0; v < ut.values.size(); ++v)
    ut.values[v] /= std::max(std::abs(ut.values[v]), 0.5);
  return ut;
}

}  // namespace

TEST_CASE("current: constants, plane wave, quadratic scaling") {
  auto S = make_flat_torus(64);
  auto u1 = constant_field(S, cplx{1.0, 0.0});
  CHECK(current(S, u1).values.cwiseAbs().maxCoeff() == 0.0);

  DiscreteField uw = u1;
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v)
    uw.values[v] = std::polar(1.0, TWO_PI * S.V[v].x());
  auto HB = harmonic_basis(S);
  Eigen::VectorXd phi = flux_integrals(S, HB, uw);
  CHECK(phi[0] == doctest::Approx(TWO_PI).epsilon(0.01));
  CHECK(std::abs(phi[1]) < 1e-9);

  // j(rho u) = rho^2 j(u), exactly.
  DiscreteField us = uw;
  us.values *= 0.7;
  CHECK((current(S, us).values - 0.49 * current(S, uw).values)
            .cwiseAbs()
            .maxCoeff() < 1e-14);
}

TEST_CASE("vorticity: exact total, flat away from cores, core concentration") {
  auto S = make_flat_torus(48);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  auto cfg = torus_dipole();
  double eps = 0.02;
  auto u = tapered_ustar(S, gev, HB, cfg, eps);

  auto w = vorticity(S, u);
  CHECK(std::abs(w.values.sum()) < 1e-9);  // 2 pi chi on the torus

  auto dist = vortex_distance_field(S, cfg);
  double wmax = 0.0, core_plus = 0.0;
  for (int f = 0; f < static_cast<int>(S.F.size()); ++f) {
    double dmin = 1e300, dplus = 1e300;
    for (int k = 0; k < 3; ++k) {
      int v = S.F[f][k];
      dmin = std::min(dmin, dist[v]);
      dplus = std::min(dplus, geodesic_dist(S, Point{S.V[v], -1}, cfg.a[0]));
    }
    if (dmin > 0.1) wmax = std::max(wmax, std::abs(w.values[f]));
    if (dplus <= 0.1) core_plus += w.values[f];
  }
  CHECK(wmax < 1e-2);
  // The discrete winding of a unit field picks up a cubic sine defect on
  // the ring of faces crossing the 0.1 cutoff, about 1% at this grid.
  CHECK(core_plus == doctest::Approx(TWO_PI).epsilon(2e-2));

  auto Ssp = make_unit_sphere(3);
  auto c1 = constant_field(Ssp, cplx{1.0, 0.0});
  CHECK(vorticity(Ssp, c1).values.sum() ==
        doctest::Approx(4.0 * PI).epsilon(1e-9));
}

TEST_CASE("degree: plane vortex, conjugate, rejection near zeros") {
  auto S = make_flat_torus(32);
  int f = containing_face(S, Point::torus(0.5, 0.5));
  REQUIRE(f >= 0);
  Vec3 z0 = S.face_center(f);

  DiscreteField u = constant_field(S, cplx{1.0, 0.0});
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    double dx = wrap_half(S.V[v].x() - z0.x());
    double dy = wrap_half(S.V[v].y() - z0.y());
    cplx z{dx, dy};
    u.values[v] = z / std::abs(z);
  }
  std::vector<int> tri{S.F[f][0], S.F[f][1], S.F[f][2], S.F[f][0]};
  auto r = degree(S, u, tri);
  CHECK(r.degree == 1);
  CHECK(r.defect < 1e-12);

  DiscreteField uc = u;
  for (long v = 0; v < uc.values.size(); ++v)
    uc.values[v] = std::conj(uc.values[v]);
  CHECK(degree(S, uc, tri).degree == -1);

  // Amplitude below 1/4 on the contour is rejected.
  DiscreteField ud = u;
  ud.values[tri[0]] *= 0.2;
  CHECK_THROWS_AS(degree(S, ud, tri), InputError);
  // A non-edge step is rejected.
  CHECK_THROWS_AS(degree(S, u, {0, 2, 4, 0}), InputError);
  // A homology generator does not bound.
  std::vector<int> row;
  for (int i = 0; i < 32; ++i) row.push_back(i);
  row.push_back(0);
  CHECK_THROWS_AS(degree(S, u, row), InputError);
}

TEST_CASE("degree: contours around planted vortices, additivity") {
  auto S = make_flat_torus(48);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point::torus(0.25, 0.25), Point::torus(0.55, 0.22)},
                   {1, -1}};
  double eps = 0.015;
  auto u = tapered_ustar(S, gev, HB, cfg, eps);

  auto r1 = degree(S, u, rect_loop(48, 8, 16, 8, 16));
  CHECK(r1.degree == 1);
  CHECK(r1.defect < 0.05);
  auto r2 = degree(S, u, rect_loop(48, 22, 31, 7, 14));
  CHECK(r2.degree == -1);
  auto rboth = degree(S, u, rect_loop(48, 12, 36, 4, 20));
  CHECK(rboth.degree == r1.degree + r2.degree);
  auto rnone = degree(S, u, rect_loop(48, 30, 40, 30, 40));
  CHECK(rnone.degree == 0);
  CHECK(rnone.defect < 1e-6);

  // A contour through a core crosses |u| < 1/4.
  CHECK_THROWS_AS(degree(S, u, rect_loop(48, 8, 16, 12, 18)), InputError);
}

TEST_CASE("flux integrals: canonical round trip, gauge invariance") {
  auto S = make_flat_torus(64);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  auto cfg = torus_dipole();
  auto L = lattice(HB, gev, cfg);
  Eigen::VectorXd phi_star = L.nearest_point(Eigen::VectorXd::Zero(2));
  auto CF = build_ustar(gev, HB, cfg, phi_star);

  Eigen::VectorXd phi = flux_integrals(S, HB, CF.field);
  CHECK((phi - phi_star).cwiseAbs().maxCoeff() < 1e-3);

  DiscreteField ug = CF.field;
  ug.values *= std::polar(1.0, 1.234);
  Eigen::VectorXd phig = flux_integrals(S, HB, ug);
  CHECK((phig - phi).cwiseAbs().maxCoeff() < 1e-12);

  auto Ssp = make_unit_sphere(2);
  auto HBs = harmonic_basis(Ssp);
  CHECK(flux_integrals(Ssp, HBs, constant_field(Ssp, cplx{1.0, 0.0})).size() ==
        0);
}

TEST_CASE("ball construction: separated dipole on the torus") {
  auto S = make_flat_torus(48);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  auto cfg = torus_dipole();
  double eps = 0.02, sigma = 0.2;
  auto u = tapered_ustar(S, gev, HB, cfg, eps);

  auto bs = ball_construction(S, u, eps, sigma, {.degree_budget = 2});
  REQUIRE(bs.balls.size() == 2);
  int dsum = 0, dabs = 0;
  for (const auto& b : bs.balls) {
    dsum += b.degree;
    dabs += std::abs(b.degree);
    CHECK(b.radius == doctest::Approx(sigma).epsilon(1e-12));
  }
  CHECK(dsum == 0);
  CHECK(dabs == 2);
  CHECK(bs.diagnostics.empty());

  // Pairwise disjoint, low-amplitude set covered, radius sum within budget.
  double D = geodesic_dist(S, bs.balls[0].center, bs.balls[1].center);
  CHECK(D > bs.balls[0].radius + bs.balls[1].radius);
  double rsum = 0.0;
  for (const auto& b : bs.balls) rsum += b.radius;
  CHECK(rsum <= (2 + 1) * sigma + 1e-12);
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    if (std::abs(u.values[v]) > 0.5) continue;
    bool covered = false;
    for (const auto& b : bs.balls)
      covered = covered ||
                geodesic_dist(S, b.center, Point{S.V[v], -1}) <= b.radius;
    CHECK(covered);
  }

  // Detected centers sit on the planted vortices up to the mesh scale.
  VortexConfig det;
  for (const auto& b : bs.balls) {
    det.a.push_back(b.center);
    det.d.push_back(b.degree);
  }
  CHECK(w11_vortex_distance(S, det, cfg) < TWO_PI * 2 * 2 * sigma);
  CHECK(w11_vortex_distance(S, det, cfg) < TWO_PI * 4 * 0.05);

  // Vorticity of the renormalized field integrates to 2 pi deg per ball.
  auto w = vorticity(S, renormalized(u));
  for (const auto& b : bs.balls) {
    KahanSum acc;
    for (int f = 0; f < static_cast<int>(S.F.size()); ++f) {
      bool inside = true;
      for (int k = 0; k < 3; ++k)
        inside = inside && geodesic_dist(S, b.center,
                                         Point{S.V[S.F[f][k]], -1}) <= b.radius;
      if (inside) acc.add(w.values[f]);
    }
    CHECK(acc.value() == doctest::Approx(TWO_PI * b.degree).epsilon(1e-2));
  }

  std::string js = ballset_to_json(bs);
  CHECK(js.find("\"balls\"") != std::string::npos);
  CHECK(js.find("\"radius\"") != std::string::npos);
  CHECK(js.find("\"sigma\"") != std::string::npos);

  // Parameter domain checks.
  CHECK_THROWS_AS(ball_construction(S, u, eps, 0.44 + 0.1, {}), InputError);
  CHECK_THROWS_AS(ball_construction(S, u, eps, 0.01, {}), InputError);
}

TEST_CASE("ball construction: nearby same-sign cores merge on the sphere") {
  auto S = make_unit_sphere(4);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  double th = 0.1;
  VortexConfig cfg{{Point{{std::sin(th), 0.0, std::cos(th)}, -1},
                    Point{{-std::sin(th), 0.0, std::cos(th)}, -1}},
                   {1, 1}};
  // eps is chosen so the low-amplitude zone around each core is wider than
  // the mesh spacing at this subdivision; a sub-grid zone contains no
  // vertices and the field never drops below 1/2 anywhere discrete.
  double eps = 0.05, sigma = 0.2;
  Eigen::VectorXd none(0);
  auto CF = build_ustar(gev, HB, cfg, none);
  auto dist = vortex_distance_field(S, cfg);
  DiscreteField u = CF.field;
  for (long v = 0; v < u.values.size(); ++v)
    u.values[v] *= std::min(1.0, dist[v] / (2.0 * eps));

  auto bs = ball_construction(S, u, eps, sigma, {.degree_budget = 2});
  REQUIRE(bs.balls.size() == 1);
  CHECK(bs.balls[0].degree == 2);
  CHECK(bs.balls[0].radius == doctest::Approx(2 * sigma).epsilon(0.05));
  for (std::size_t k = 0; k < cfg.a.size(); ++k)
    CHECK(geodesic_dist(S, bs.balls[0].center, cfg.a[k]) <=
          bs.balls[0].radius);
}

TEST_CASE("ball construction: trivial and zero-degree fields") {
  auto S = make_flat_torus(32);
  auto u1 = constant_field(S, cplx{1.0, 0.0});
  auto bs = ball_construction(S, u1, 0.02, 0.2, {});
  CHECK(bs.balls.empty());

  // An amplitude dip with no winding yields a single zero-degree ball.
  DiscreteField ud = u1;
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    double d = geodesic_dist(S, Point{S.V[v], -1}, Point::torus(0.5, 0.5));
    ud.values[v] = std::min(1.0, d / 0.04);
  }
  bs = ball_construction(S, ud, 0.02, 0.2, {});
  REQUIRE(bs.balls.size() == 1);
  CHECK(bs.balls[0].degree == 0);
  int total = 0;
  for (const auto& b : bs.balls) total += b.degree;
  CHECK(total == 0);
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v)
    if (std::abs(ud.values[v]) <= 0.5)
      CHECK(geodesic_dist(S, bs.balls[0].center, Point{S.V[v], -1}) <=
            bs.balls[0].radius);
}

TEST_CASE("ball construction: pinned cores on a genus-1 mesh") {
  auto S =
      build_surface(SurfaceKind::TriMesh, torus_of_revolution(1, 0.4, 24, 12));
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  int vplus = 0, vminus = static_cast<int>(S.V.size()) / 2 + 3;
  VortexConfig cfg{{Point::at_vertex(vplus), Point::at_vertex(vminus)},
                   {1, -1}};
  auto L = lattice(HB, gev, cfg);
  Eigen::VectorXd phi = L.nearest_point(Eigen::VectorXd::Zero(2));
  auto CF = build_ustar(gev, HB, cfg, phi);
  auto dist = vortex_distance_field(S, cfg);
  DiscreteField u = CF.field;
  for (long v = 0; v < u.values.size(); ++v)
    u.values[v] *= std::min(1.0, dist[v] / 0.1);

  double eps = 0.05, sigma = 0.5;
  auto bs = ball_construction(S, u, eps, sigma, {.degree_budget = 2});
  REQUIRE(bs.balls.size() == 2);
  int dsum = 0;
  for (const auto& b : bs.balls) dsum += b.degree;
  CHECK(dsum == 0);
  double D = geodesic_dist(S, bs.balls[0].center, bs.balls[1].center);
  CHECK(D > bs.balls[0].radius + bs.balls[1].radius);
}

TEST_CASE("ball construction: randomized planted configurations") {
  auto S = make_flat_torus(48);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  Rng rng(0xB411u);
  double eps = 0.02, sigma = 0.15;
  for (int trial = 0; trial < 3; ++trial) {
    // A dipole pair with comfortable separation.
    VortexConfig cfg;
    for (;;) {
      cfg.a = {Point::torus(rng.uniform(0, 1), rng.uniform(0, 1)),
               Point::torus(rng.uniform(0, 1), rng.uniform(0, 1))};
      cfg.d = {1, -1};
      if (geodesic_dist(S, cfg.a[0], cfg.a[1]) > 2.5 * sigma) break;
    }
    auto u = tapered_ustar(S, gev, HB, cfg, eps);
    auto bs = ball_construction(S, u, eps, sigma, {.degree_budget = 2});
    VortexConfig det;
    int dabs = 0;
    for (const auto& b : bs.balls)
      if (b.degree != 0) {
        det.a.push_back(b.center);
        det.d.push_back(b.degree);
        dabs += std::abs(b.degree);
      }
    CHECK(dabs == 2);
    CHECK(w11_vortex_distance(S, det, cfg) <= TWO_PI * 2 * sigma * dabs);
  }
}

TEST_CASE("lambda and Lambda: closed forms, monotonicity, subadditivity") {
  double c2 = 0.25;
  // Flat case integrates to the exact logarithm.
  for (double eps : {1e-2, 1e-3})
    for (double sigma : {0.05, 0.2, 0.4}) {
      double c4 = 4.0 * PI / c2;
      double exact = PI * std::log(1.0 + sigma / (c4 * eps));
      CHECK(Lambda_eps(sigma, eps, c2, 0.0) ==
            doctest::Approx(exact).epsilon(1e-9));
    }

  // lambda(0) is the potential wall c2/(4 eps); nonincreasing in r.
  double eps = 5e-3;
  CHECK(lambda_eps(0.0, eps, c2, 1.0) ==
        doctest::Approx(c2 / (4.0 * eps)).epsilon(1e-14));
  double prev = lambda_eps(0.0, eps, c2, 1.0);
  for (int i = 1; i <= 60; ++i) {
    double r = 1.2 * i / 60.0;
    double cur = lambda_eps(r, eps, c2, 1.0);
    CHECK(cur <= prev + 1e-14);
    prev = cur;
  }
  CHECK(lambda_eps(1.0, eps, c2, 1.0) == 0.0);

  // Subadditivity of Lambda on sampled pairs (curved constants).
  for (double s1 : {0.05, 0.15, 0.3})
    for (double s2 : {0.05, 0.2}) {
      double lhs = Lambda_eps(s1 + s2, eps, c2, 1.0);
      double rhs = Lambda_eps(s1, eps, c2, 1.0) + Lambda_eps(s2, eps, c2, 1.0);
      CHECK(lhs <= rhs + 1e-10);
    }

  // Logarithmic lower bound with the curvature correction.
  for (double e2 : {1e-2, 1e-3})
    for (double sigma : {0.05, 0.2, 0.4}) {
      double c4 = 4.0 * PI / c2;
      double bound = PI * std::log(1.0 + sigma / (c4 * e2)) -
                     0.5 * PI * sigma * sigma;
      CHECK(Lambda_eps(sigma, e2, c2, 1.0) >= bound - 1e-9);
      CHECK(Lambda_eps(sigma, e2, c2, 0.0) >=
            PI * (std::log(sigma / e2) - 4.0));
    }
}
