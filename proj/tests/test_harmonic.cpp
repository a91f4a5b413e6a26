#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vortexlab/harmonic.hpp"

using namespace vortexlab;

namespace {

double gram(const SurfaceModel& S, const Eigen::VectorXd& a,
            const Eigen::VectorXd& b) {
  return (S.dec.star1.cwiseProduct(a)).dot(b);
}

VortexConfig torus_dipole() {
  return {{Point::torus(0.25, 0.25), Point::torus(0.75, 0.75)}, {1, -1}};
}

}  // namespace

TEST_CASE("flat torus basis: identity periods, exact discrete harmonicity") {
  auto S = make_flat_torus(12);
  auto HB = harmonic_basis(S);
  REQUIRE(HB.genus == 1);
  REQUIRE(HB.forms.size() == 2);
  CHECK(HB.analytic);

  CHECK((HB.alpha - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <
        1e-13);
  CHECK(HB.alpha_cond == doctest::Approx(1.0).epsilon(1e-10));

  // Discrete Gram matrix of {dx, dy} is exactly the identity on a flat mesh.
  CHECK(gram(S, HB.forms[0].values, HB.forms[0].values) ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(gram(S, HB.forms[1].values, HB.forms[1].values) ==
        doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(gram(S, HB.forms[0].values, HB.forms[1].values)) < 1e-13);

  for (const auto& f : HB.forms) {
    CHECK((S.dec.d1 * f.values).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((S.dec.d0.transpose() * S.dec.star1.cwiseProduct(f.values))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  CHECK(harmonic_value(S, HB, 0, Point::torus(0.3, 0.9))[0] == 1.0);
  CHECK(harmonic_value(S, HB, 1, Point::torus(0.3, 0.9))[1] == 1.0);
}

TEST_CASE("sphere has no harmonic forms") {
  auto S = make_unit_sphere(2);
  auto HB = harmonic_basis(S);
  CHECK(HB.genus == 0);
  CHECK(HB.forms.empty());
  CHECK(HB.alpha.size() == 0);
}

TEST_CASE("genus-1 mesh basis: kernel residuals, orthonormality, periods") {
  auto S = build_surface(SurfaceKind::TriMesh, torus_of_revolution(1, 0.4, 32, 16));
  auto HB = harmonic_basis(S);
  REQUIRE(HB.forms.size() == 2);

  for (const auto& f : HB.forms) {
    CHECK((S.dec.d1 * f.values).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((S.dec.d0.transpose() * S.dec.star1.cwiseProduct(f.values))
              .cwiseAbs()
              .maxCoeff() < 1e-6);
  }
  CHECK(gram(S, HB.forms[0].values, HB.forms[0].values) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(gram(S, HB.forms[1].values, HB.forms[1].values) ==
        doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(gram(S, HB.forms[0].values, HB.forms[1].values)) < 1e-8);

  // Loops close and stay on edges.
  for (const auto& loop : HB.loops) {
    REQUIRE(loop.size() >= 3);
    CHECK(loop.front() == loop.back());
    for (std::size_t s = 0; s + 1 < loop.size(); ++s)
      CHECK(S.edge_index(loop[s], loop[s + 1]) >= 0);
  }
  CHECK(std::abs(HB.alpha.determinant()) > 1e-6);
  CHECK(HB.alpha_cond < 1e4);
}

TEST_CASE("closed-form quantization angles on the torus") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);

  Eigen::VectorXd z = zeta(HB, gev, torus_dipole());
  CHECK(z[0] == doctest::Approx(PI).epsilon(1e-12));
  CHECK(z[1] == doctest::Approx(PI).epsilon(1e-12));

  // Degree-weighted positions summing to an integer vector: angles vanish.
  VortexConfig sym{{Point::torus(0.5, 0.5), Point::torus(0.25, 0.75),
                    Point::torus(0.75, 0.25)},
                   {2, -1, -1}};
  Eigen::VectorXd zs = zeta(HB, gev, sym);
  CHECK(dist_to_2pi_lattice(zs[0]) < 1e-12);
  CHECK(dist_to_2pi_lattice(zs[1]) < 1e-12);
}

TEST_CASE("zeta agrees with the line-integral evaluation") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point::torus(0.21, 0.37), Point::torus(0.66, 0.84)},
                   {1, -1}};
  Eigen::VectorXd zc = zeta(HB, gev, cfg);
  Eigen::VectorXd zi = zeta_by_integration(HB, gev, cfg);
  for (int l = 0; l < 2; ++l)
    CHECK(dist_to_2pi_lattice(zc[l] - zi[l]) < 1e-4);
}

TEST_CASE("line-integral zeta is loop independent") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point::torus(0.21, 0.37), Point::torus(0.66, 0.84)},
                   {1, -1}};
  Eigen::VectorXd ref = zeta_by_integration(HB, gev, cfg, 0.02);
  for (double anchor : {0.11, 0.52, 0.93}) {
    Eigen::VectorXd z = zeta_by_integration(HB, gev, cfg, anchor);
    for (int l = 0; l < 2; ++l)
      CHECK(dist_to_2pi_lattice(z[l] - ref[l]) < 1e-4);
  }
}

TEST_CASE("line-integral zeta detours around close vortices") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg{{Point::torus(0.21, 0.37), Point::torus(0.66, 0.84)},
                   {1, -1}};
  Eigen::VectorXd zc = zeta(HB, gev, cfg);
  // Anchor the loops 5e-3 away from the first vortex: inside the detour
  // radius, forcing arc replacements on both loops.
  Eigen::VectorXd z = zeta_by_integration(HB, gev, cfg, 0.37 + 5e-3);
  CHECK(dist_to_2pi_lattice(z[0] - zc[0]) < 1e-4);
  Eigen::VectorXd z2 = zeta_by_integration(HB, gev, cfg, 0.21 + 5e-3);
  CHECK(dist_to_2pi_lattice(z2[1] - zc[1]) < 1e-4);
}

TEST_CASE("zeta is invariant under merging coincident vortices") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  Point a = Point::torus(0.31, 0.57), b = Point::torus(0.73, 0.11);
  VortexConfig split{{a, a, b}, {1, 1, -2}};
  VortexConfig merged{{a, b}, {2, -2}};
  Eigen::VectorXd z1 = zeta(HB, gev, split);
  Eigen::VectorXd z2 = zeta(HB, gev, merged);
  CHECK((z1 - z2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zeta moves no faster than the vortex distance") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg = torus_dipole();
  for (double t : {1e-3, 1e-2}) {
    VortexConfig moved = cfg;
    moved.a[0] = Point::torus(0.25 + t * 0.6, 0.25 + t * 0.8);
    double w = w11_vortex_distance(S, cfg, moved);
    Eigen::VectorXd dz = zeta(HB, gev, cfg) - zeta(HB, gev, moved);
    for (int l = 0; l < 2; ++l)
      CHECK(dist_to_2pi_lattice(dz[l]) <= 1.01 * w);
  }
}

TEST_CASE("flux lattice membership and nearest point") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  FluxLattice L = lattice(HB, gev, torus_dipole());

  CHECK((L.gen - TWO_PI * Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() <
        1e-12);
  CHECK(L.zeta[0] == doctest::Approx(PI).epsilon(1e-12));

  Eigen::Vector2d phi(PI, PI);
  CHECK(L.member(phi));
  CHECK(L.member(Eigen::Vector2d(-PI, PI)));
  CHECK(!L.member(Eigen::Vector2d(PI, PI + 0.01)));

  Eigen::Vector2d np = L.nearest_point(Eigen::Vector2d(0, 0));
  CHECK(std::abs(np[0]) == doctest::Approx(PI).epsilon(1e-12));
  CHECK(std::abs(np[1]) == doctest::Approx(PI).epsilon(1e-12));
  CHECK(np.norm() == doctest::Approx(PI * std::sqrt(2.0)).epsilon(1e-12));
  CHECK((L.nearest_point(np) - np).cwiseAbs().maxCoeff() < 1e-12);

  auto Sp = make_unit_sphere(2);
  GreenEvaluator gs(Sp);
  auto HBs = harmonic_basis(Sp);
  VortexConfig scfg{{Point{{0, 0, 1}, -1}, Point{{0, 0, -1}, -1}}, {1, 1}};
  FluxLattice Ls = lattice(HBs, gs, scfg);
  CHECK(Ls.genus == 0);
  CHECK(Ls.member(Eigen::VectorXd(0)));
}

TEST_CASE("lattice distance: translates, symmetry, guards") {
  auto S = make_flat_torus(8);
  GreenEvaluator gev(S);
  auto HB = harmonic_basis(S);
  VortexConfig cfg = torus_dipole();
  FluxLattice L1 = lattice(HB, gev, cfg);

  CHECK(lattice_distance(L1, L1) == 0.0);

  // Rigid translation: degree-weighted sum unchanged, distance zero.
  VortexConfig shifted{{Point::torus(0.25 + 1e-3, 0.25), Point::torus(0.75 + 1e-3, 0.75)},
                       {1, -1}};
  FluxLattice L2 = lattice(HB, gev, shifted);
  CHECK(lattice_distance(L1, L2) < 1e-10);

  // Single vortex moved: distance bounded by 2 pi |delta| and symmetric.
  VortexConfig one{{Point::torus(0.25, 0.25 + 1e-3), Point::torus(0.75, 0.75)},
                   {1, -1}};
  FluxLattice L3 = lattice(HB, gev, one);
  double d13 = lattice_distance(L1, L3);
  CHECK(d13 > 0.0);
  CHECK(d13 <= TWO_PI * 2e-3);
  CHECK(lattice_distance(L3, L1) == doctest::Approx(d13).epsilon(1e-12));

  // Relabeling leaves the lattice untouched.
  VortexConfig relabeled{{cfg.a[1], cfg.a[0]}, {cfg.d[1], cfg.d[0]}};
  CHECK(lattice_distance(L1, lattice(HB, gev, relabeled)) < 1e-12);

  auto M = build_surface(SurfaceKind::TriMesh, torus_of_revolution(1, 0.4, 24, 12));
  GreenEvaluator gm(M);
  auto HBm = harmonic_basis(M);
  VortexConfig mcfg{{Point::at_vertex(3), Point::at_vertex(150)}, {1, -1}};
  FluxLattice Lm = lattice(HBm, gm, mcfg);
  CHECK_THROWS_AS(lattice_distance(L1, Lm), InputError);
}

TEST_CASE("minimal connection distance") {
  auto S = make_flat_torus(8);
  VortexConfig cfg = torus_dipole();
  CHECK(w11_vortex_distance(S, cfg, cfg) == 0.0);

  // One vortex moved by t: a single dipole of length t.
  auto Sp = make_unit_sphere(2);
  VortexConfig s1{{Point{{0, 0, 1}, -1}, Point{{0, 0, -1}, -1}}, {1, 1}};
  double t = 0.3;
  VortexConfig s2{{Point{{std::sin(t), 0, std::cos(t)}, -1}, Point{{0, 0, -1}, -1}},
                  {1, 1}};
  CHECK(w11_vortex_distance(Sp, s1, s2) == doctest::Approx(TWO_PI * t).epsilon(1e-12));

  // Crossing pairing: matches brute force over all assignments.
  VortexConfig c1{{Point::torus(0.1, 0.1), Point::torus(0.2, 0.8),
                   Point::torus(0.6, 0.5), Point::torus(0.9, 0.9)},
                  {1, -1, 1, -1}};
  VortexConfig c2{{Point::torus(0.15, 0.35), Point::torus(0.4, 0.75),
                   Point::torus(0.75, 0.4), Point::torus(0.85, 0.1)},
                  {1, -1, 1, -1}};
  double got = w11_vortex_distance(S, c1, c2);
  std::vector<Point> pos{c1.a[0], c1.a[2], c2.a[1], c2.a[3]};
  std::vector<Point> neg{c1.a[1], c1.a[3], c2.a[0], c2.a[2]};
  std::vector<int> perm{0, 1, 2, 3};
  double best = 1e300;
  do {
    double tot = 0;
    for (int i = 0; i < 4; ++i) tot += geodesic_dist(S, pos[i], neg[perm[i]]);
    best = std::min(best, tot);
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(got == doctest::Approx(TWO_PI * best).epsilon(1e-12));

  // Degree-2 charges expand into unit copies.
  VortexConfig d2a{{Point::torus(0.2, 0.2), Point::torus(0.7, 0.7)}, {2, -2}};
  VortexConfig d2b{{Point::torus(0.2, 0.3), Point::torus(0.7, 0.7)}, {2, -2}};
  CHECK(w11_vortex_distance(S, d2a, d2b) ==
        doctest::Approx(TWO_PI * 2 * 0.1).epsilon(1e-9));

  VortexConfig unbalanced{{Point::torus(0.2, 0.2), Point::torus(0.7, 0.7)},
                          {1, 1}};
  CHECK_THROWS_AS(w11_vortex_distance(S, cfg, unbalanced), InputError);
}

TEST_CASE("quantization angles on a genus-1 mesh integrate the stream") {
  auto M = build_surface(SurfaceKind::TriMesh, torus_of_revolution(1, 0.4, 32, 16));
  GreenEvaluator gev(M);
  auto HB = harmonic_basis(M);
  int v1 = 5, v2 = static_cast<int>(M.V.size()) / 2 + 3;
  VortexConfig cfg{{Point::at_vertex(v1), Point::at_vertex(v2)}, {1, -1}};
  Eigen::VectorXd z = zeta(HB, gev, cfg);
  REQUIRE(z.size() == 2);
  for (int l = 0; l < 2; ++l) {
    CHECK(z[l] >= 0.0);
    CHECK(z[l] < TWO_PI);
  }
  // Loops through a vortex vertex get rerouted, not rejected.
  VortexConfig on_loop{{Point::at_vertex(HB.loops[0][1]), Point::at_vertex(v2)},
                       {1, -1}};
  CHECK_NOTHROW(zeta(HB, gev, on_loop));
}
