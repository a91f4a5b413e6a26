#include "vortexlab/harmonic.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>

namespace vortexlab {

namespace {

// Fundamental cycles of a tree-cotree split: BFS primal tree, BFS dual tree
// over the remaining edges, 2g leftover edges close independent loops.
struct TreeCotree {
  std::vector<std::vector<int>> cycles;  // closed vertex paths
};

TreeCotree tree_cotree(const SurfaceModel& S) {
  const int nv = static_cast<int>(S.V.size());
  const int ne = static_cast<int>(S.E.size());
  std::vector<char> in_tree(ne, 0), crossed(ne, 0);
  std::vector<int> parent(nv, -1);
  std::vector<char> seen(nv, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int e : S.vertex_edges[v]) {
      int w = S.E[e][0] == v ? S.E[e][1] : S.E[e][0];
      if (seen[w]) continue;
      seen[w] = 1;
      parent[w] = v;
      in_tree[e] = 1;
      q.push(w);
    }
  }
  std::vector<char> fseen(S.F.size(), 0);
  std::queue<int> fq;
  fq.push(0);
  fseen[0] = 1;
  while (!fq.empty()) {
    int f = fq.front();
    fq.pop();
    for (int k = 0; k < 3; ++k) {
      int e = S.face_edges[f][k];
      if (in_tree[e] || crossed[e]) continue;
      int g = S.edge_faces[e][0] == f ? S.edge_faces[e][1] : S.edge_faces[e][0];
      if (fseen[g]) continue;
      fseen[g] = 1;
      crossed[e] = 1;
      fq.push(g);
    }
  }
  auto root_path = [&](int v) {
    std::vector<int> p{v};
    while (parent[p.back()] >= 0) p.push_back(parent[p.back()]);
    return p;
  };
  TreeCotree out;
  for (int e = 0; e < ne; ++e) {
    if (in_tree[e] || crossed[e]) continue;
    auto [u, v] = S.E[e];
    std::vector<int> pu = root_path(u), pv = root_path(v);
    while (pu.size() > 1 && pv.size() > 1 &&
           pu[pu.size() - 2] == pv[pv.size() - 2]) {
      pu.pop_back();
      pv.pop_back();
    }
    // u .. lca .. v, then the leftover edge closes v -> u.
    std::vector<int> loop(pu.begin(), pu.end());
    for (auto it = pv.rbegin() + 1; it != pv.rend(); ++it) loop.push_back(*it);
    loop.push_back(u);
    out.cycles.push_back(std::move(loop));
  }
  return out;
}

double star1_inner(const SurfaceModel& S, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b) {
  return (S.dec.star1.cwiseProduct(a)).dot(b);
}

// Sum of +-form values along a closed vertex path.
double loop_sum(const SurfaceModel& S, const std::vector<int>& loop,
                const Eigen::VectorXd& form) {
  KahanSum acc;
  for (std::size_t s = 0; s + 1 < loop.size(); ++s) {
    int u = loop[s], v = loop[s + 1];
    int e = S.edge_index(u, v);
    if (e < 0) throw InputError("loop step is not a mesh edge");
    acc.add((u < v ? 1.0 : -1.0) * form[e]);
  }
  return acc.value();
}

double wrap_2pi(double x) {
  double r = std::fmod(x, TWO_PI);
  if (r < 0) r += TWO_PI;
  if (r >= TWO_PI) r -= TWO_PI;
  return r;
}

// Adaptive Simpson on [a, b].
double adsimp(const std::function<double(double)>& f, double a, double fa,
              double m, double fm, double b, double fb, double whole,
              double tol, int depth) {
  double lm = (a + m) / 2, rm = (m + b) / 2;
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6 * (fa + 4 * flm + fm);
  double right = (b - m) / 6 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * tol)
    return left + right + (left + right - whole) / 15;
  return adsimp(f, a, fa, lm, flm, m, fm, left, tol / 2, depth - 1) +
         adsimp(f, m, fm, rm, frm, b, fb, right, tol / 2, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (a == b) return 0.0;
  double m = (a + b) / 2;
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6 * (fa + 4 * fm + fb);
  return adsimp(f, a, fa, m, fm, b, fb, whole, tol, 24);
}

}  // namespace

HarmonicBasis harmonic_basis(const SurfaceModel& S) {
  HarmonicBasis HB;
  HB.genus = S.genus;
  HB.surface_hash = S.content_hash;
  if (S.genus == 0) {
    HB.alpha.resize(0, 0);
    return HB;
  }

  const int ne = static_cast<int>(S.E.size());
  if (S.kind == SurfaceKind::FlatTorus) {
    HB.analytic = true;
    DiscreteForm ex, ey;
    ex.values.resize(ne);
    ey.values.resize(ne);
    for (int e = 0; e < ne; ++e) {
      Vec3 d = S.edge_vec(S.E[e][0], S.E[e][1]);
      ex.values[e] = d.x();
      ey.values[e] = d.y();
    }
    HB.forms = {ex, ey};
    int n = S.resolution;
    std::vector<int> row, col;
    for (int i = 0; i < n; ++i) row.push_back(i);
    row.push_back(0);
    for (int j = 0; j < n; ++j) col.push_back(j * n);
    col.push_back(0);
    HB.loops = {row, col};
  } else {
    TreeCotree tc = tree_cotree(S);
    if (tc.cycles.size() != 2)
      throw NumericError("tree-cotree split did not yield two cycles");

    Eigen::SimplicialLDLT<SpMat> vsolve(pin_first(S.dec.L0));
    SpMat Ldual = S.dec.d1 * S.dec.star1.cwiseInverse().asDiagonal() *
                  SpMat(S.dec.d1.transpose());
    Eigen::SimplicialLDLT<SpMat> fsolve(pin_first(Ldual));
    if (vsolve.info() != Eigen::Success || fsolve.info() != Eigen::Success)
      throw NumericError("harmonic projection factorization failed");

    std::vector<Eigen::VectorXd> hs;
    for (const auto& cyc : tc.cycles) {
      // Cochain representing the period functional of this cycle in the
      // star1 inner product.
      Eigen::VectorXd c = Eigen::VectorXd::Zero(ne);
      for (std::size_t s = 0; s + 1 < cyc.size(); ++s) {
        int u = cyc[s], v = cyc[s + 1];
        int e = S.edge_index(u, v);
        c[e] += (u < v ? 1.0 : -1.0) / S.dec.star1[e];
      }
      // Strip the exact part ...
      Eigen::VectorXd bx = S.dec.d0.transpose() * S.dec.star1.cwiseProduct(c);
      bx[0] = 0.0;
      Eigen::VectorXd xi = vsolve.solve(bx);
      // ... and the coexact part.
      Eigen::VectorXd bb = S.dec.d1 * c;
      bb[0] = 0.0;
      Eigen::VectorXd beta = fsolve.solve(bb);
      Eigen::VectorXd h =
          c - S.dec.d0 * xi -
          S.dec.star1.cwiseInverse().cwiseProduct(S.dec.d1.transpose() * beta);
      hs.push_back(std::move(h));
    }
    // The pinned solves drop one row each; their residuals live in the
    // kernel directions and cancel in the projection, but verify.
    for (const auto& h : hs) {
      if ((S.dec.d1 * h).cwiseAbs().maxCoeff() > 1e-8 ||
          (S.dec.d0.transpose() * S.dec.star1.cwiseProduct(h))
                  .cwiseAbs()
                  .maxCoeff() > 1e-8)
        throw NumericError("harmonic projection residual too large");
    }
    double g11 = star1_inner(S, hs[0], hs[0]);
    Eigen::VectorXd h1 = hs[0] / std::sqrt(g11);
    Eigen::VectorXd h2 = hs[1] - star1_inner(S, h1, hs[1]) * h1;
    double g22 = star1_inner(S, h2, h2);
    if (g22 < 1e-12 * star1_inner(S, hs[1], hs[1]))
      throw NumericError("harmonic space dimension collapsed (mesh too coarse)");
    h2 /= std::sqrt(g22);
    DiscreteForm f1, f2;
    f1.values = h1;
    f2.values = h2;
    HB.forms = {f1, f2};
    HB.loops = tc.cycles;
  }

  const int m = 2 * S.genus;
  HB.alpha.resize(m, m);
  for (int l = 0; l < m; ++l)
    for (int k = 0; k < m; ++k)
      HB.alpha(l, k) = loop_sum(S, HB.loops[l], HB.forms[k].values);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(HB.alpha);
  double smin = svd.singularValues().minCoeff();
  if (smin < 1e-10)
    throw NumericError("degenerate period matrix");
  HB.alpha_cond = svd.singularValues().maxCoeff() / smin;
  return HB;
}

Vec2 harmonic_value(const SurfaceModel& S, const HarmonicBasis& HB, int k,
                    const Point& x) {
  (void)S;
  (void)x;
  if (!HB.analytic) throw InputError("pointwise basis values are analytic-only");
  return k == 0 ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
}

// ---- quantization angles ------------------------------------------------

namespace {

void check_degrees(const SurfaceModel& S, const VortexConfig& cfg) {
  if (cfg.a.size() != cfg.d.size())
    throw InputError("vortex positions and degrees differ in length");
  int sum = 0;
  for (int d : cfg.d) sum += d;
  if (sum != S.euler_char)
    throw InputError("vortex degrees must sum to the Euler characteristic");
  if (S.kind == SurfaceKind::TriMesh)
    for (const auto& p : cfg.a)
      if (p.vertex < 0) throw InputError("mesh vortices must be vertex-pinned");
}

// Reroute a vertex loop around the listed vertices through their one-rings.
std::vector<int> avoid_vertices(const SurfaceModel& S, std::vector<int> loop,
                                const std::vector<char>& blocked) {
  // Rotate the closed loop so it starts on an admissible vertex.
  loop.pop_back();
  std::size_t start = 0;
  while (start < loop.size() && blocked[loop[start]]) ++start;
  if (start == loop.size())
    throw InputError("no admissible loop: every vertex blocked");
  std::rotate(loop.begin(), loop.begin() + start, loop.end());
  loop.push_back(loop.front());

  std::vector<int> out;
  out.push_back(loop[0]);
  for (std::size_t s = 1; s + 1 < loop.size(); ++s) {
    int v = loop[s];
    if (!blocked[v]) {
      out.push_back(v);
      continue;
    }
    int p = out.back(), qn = loop[s + 1];
    const auto& ring = S.vertex_ring[v];
    auto pos = [&](int w) {
      for (std::size_t i = 0; i < ring.size(); ++i)
        if (ring[i] == w) return static_cast<int>(i);
      return -1;
    };
    int ip = pos(p), iq = pos(qn);
    if (ip < 0 || iq < 0)
      throw InputError("no admissible loop: detour entry not in the ring");
    int n = static_cast<int>(ring.size());
    // Two candidate arcs around the ring; prefer the shorter clean one.
    for (int attempt = 0; attempt < 2; ++attempt) {
      int dir = ((iq - ip + n) % n <= (ip - iq + n) % n) == (attempt == 0)
                    ? 1
                    : n - 1;
      std::vector<int> arc;
      bool clean = true;
      for (int i = (ip + dir) % n; i != iq; i = (i + dir) % n) {
        if (blocked[ring[i]]) {
          clean = false;
          break;
        }
        arc.push_back(ring[i]);
      }
      if (clean) {
        for (int w : arc) out.push_back(w);
        break;
      }
      if (attempt == 1)
        throw InputError("no admissible loop: ring detour blocked");
    }
  }
  out.push_back(out.front());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.back() != out.front()) out.push_back(out.front());
  return out;
}

}  // namespace

Eigen::VectorXd zeta(const HarmonicBasis& HB, const GreenEvaluator& gev,
                     const VortexConfig& cfg) {
  const SurfaceModel& S = gev.surface();
  if (HB.surface_hash != S.content_hash)
    throw InputError("basis belongs to a different surface");
  check_degrees(S, cfg);
  if (S.genus == 0) return Eigen::VectorXd(0);

  Eigen::VectorXd z(2 * S.genus);
  if (S.kind == SurfaceKind::FlatTorus) {
    KahanSum sx, sy;
    for (std::size_t k = 0; k < cfg.a.size(); ++k) {
      sx.add(cfg.d[k] * cfg.a[k].pos.x());
      sy.add(cfg.d[k] * cfg.a[k].pos.y());
    }
    z[0] = wrap_2pi(-TWO_PI * sy.value());
    z[1] = wrap_2pi(TWO_PI * sx.value());
    return z;
  }

  PsiField pf = psi_field(gev, cfg);
  std::vector<char> blocked(S.V.size(), 0);
  for (const auto& p : cfg.a) blocked[p.vertex] = 1;
  for (int l = 0; l < 2 * S.genus; ++l) {
    std::vector<int> loop = avoid_vertices(S, HB.loops[l], blocked);
    KahanSum acc;
    for (std::size_t s = 0; s + 1 < loop.size(); ++s) {
      int u = loop[s], v = loop[s + 1];
      int e = S.edge_index(u, v);
      if (e < 0) throw InputError("loop step is not a mesh edge");
      double sign = u < v ? 1.0 : -1.0;
      acc.add(sign * (pf.dstar_psi.values[e] + S.frames.transport[e]));
    }
    z[l] = wrap_2pi(acc.value());
  }
  return z;
}

Eigen::VectorXd zeta_by_integration(const HarmonicBasis& HB,
                                    const GreenEvaluator& gev,
                                    const VortexConfig& cfg, double anchor) {
  const SurfaceModel& S = gev.surface();
  if (S.kind != SurfaceKind::FlatTorus)
    throw InputError("line-integral zeta is implemented for the flat torus");
  if (HB.surface_hash != S.content_hash)
    throw InputError("basis belongs to a different surface");
  check_degrees(S, cfg);

  const double R = 2e-2;  // detour radius, twice the loop clearance floor
  Eigen::VectorXd z(2);
  for (int l = 0; l < 2; ++l) {
    // Loop coordinates: t runs along the loop, s is the transverse offset.
    // l = 0: horizontal loop y = c; l = 1: vertical loop x = c.
    auto coord_s = [&](const Point& p) {
      return l == 0 ? p.pos.y() : p.pos.x();
    };
    auto coord_t = [&](const Point& p) {
      return l == 0 ? p.pos.x() : p.pos.y();
    };
    double c;
    if (anchor >= 0) {
      c = anchor;
    } else {
      c = 0;
      double best = -1;
      for (int i = 0; i < 199; ++i) {
        double cand = i / 199.0, clear = 1;
        for (const auto& p : cfg.a)
          clear = std::min(clear, std::abs(wrap_half(coord_s(p) - cand)));
        if (clear > best) best = clear, c = cand;
      }
    }

    // Vortices whose detour disks the loop crosses, with chord intervals.
    struct Detour {
      double t0, t1;  // chord endpoints along the loop (t1 may exceed 1)
      double ts, ss;  // vortex center in loop coordinates
    };
    std::vector<Detour> det;
    for (const auto& p : cfg.a) {
      double ds = wrap_half(coord_s(p) - c);
      if (std::abs(ds) >= R) continue;
      double w = std::sqrt(R * R - ds * ds);
      double tc = frac(coord_t(p));
      det.push_back({tc - w, tc + w, tc, ds});
    }
    std::sort(det.begin(), det.end(),
              [](const Detour& a, const Detour& b) { return a.t0 < b.t0; });
    for (std::size_t i = 0; i + 1 < det.size(); ++i)
      if (det[i].t1 > det[i + 1].t0)
        throw InputError("no admissible loop: detour disks overlap");
    if (!det.empty() &&
        det.back().t1 - 1.0 > det.front().t0)
      throw InputError("no admissible loop: detour disks overlap");

    auto point_at = [&](double t, double s) {
      return l == 0 ? Point::torus(t, s) : Point::torus(s, t);
    };
    // Loop-direction component of j at parameter t on the straight part.
    auto f_line = [&](double t) {
      Vec2 j = dstar_psi_value(gev, cfg, point_at(t, c));
      return l == 0 ? j[0] : j[1];
    };

    KahanSum acc;
    double cursor = det.empty() ? 0.0 : det.front().t0;
    double end = cursor + 1.0;
    for (std::size_t i = 0; i <= det.size(); ++i) {
      double stop = i < det.size() ? det[i].t0 : end;
      if (i > 0) {
        // Arc around det[i-1] on the far side of the loop from the vortex:
        // entry/exit where the circle meets the line, traversal through the
        // pole opposite the vortex (sign handled by the oriented integral).
        const Detour& dv = det[i - 1];
        double w = std::sqrt(R * R - dv.ss * dv.ss);
        double th0 = std::atan2(-dv.ss, -w);
        double th1 = std::atan2(-dv.ss, w);
        auto f_arc = [&](double th) {
          double t = dv.ts + R * std::cos(th);
          double s = c + dv.ss + R * std::sin(th);
          Vec2 j = dstar_psi_value(gev, cfg, point_at(t, s));
          double jt = l == 0 ? j[0] : j[1];
          double js = l == 0 ? j[1] : j[0];
          return R * (-std::sin(th) * jt + std::cos(th) * js);
        };
        acc.add(integrate(f_arc, th0, th1, 1e-9));
        cursor = dv.t1;
      }
      acc.add(integrate(f_line, cursor, stop, 1e-9));
      cursor = stop;
    }
    z[l] = wrap_2pi(acc.value());
  }
  return z;
}

// ---- flux lattice -------------------------------------------------------

bool FluxLattice::member(const Eigen::VectorXd& phi) const {
  if (phi.size() != 2 * genus) throw InputError("flux vector of wrong size");
  Eigen::VectorXd r = alpha * phi + zeta;
  for (int i = 0; i < r.size(); ++i)
    if (dist_to_2pi_lattice(r[i]) > tol) return false;
  return true;
}

Eigen::VectorXd FluxLattice::nearest_point(const Eigen::VectorXd& phi) const {
  if (phi.size() != 2 * genus) throw InputError("flux vector of wrong size");
  Eigen::VectorXd r = (alpha * phi + zeta) / TWO_PI;
  Eigen::VectorXd zr(r.size());
  for (int i = 0; i < r.size(); ++i) zr[i] = std::round(r[i]);
  return alpha_inv * (TWO_PI * zr - zeta);
}

FluxLattice lattice(const HarmonicBasis& HB, const GreenEvaluator& gev,
                    const VortexConfig& cfg) {
  FluxLattice L;
  L.genus = HB.genus;
  L.basis_hash = HB.surface_hash;
  L.tol = gev.surface().kind == SurfaceKind::TriMesh ? 1e-3 : 1e-6;
  L.zeta = zeta(HB, gev, cfg);
  L.alpha = HB.alpha;
  if (HB.genus > 0) {
    L.alpha_inv = HB.alpha.inverse();
    L.gen = TWO_PI * L.alpha_inv;
    L.offset = -L.alpha_inv * L.zeta;
  } else {
    L.alpha_inv.resize(0, 0);
    L.gen.resize(0, 0);
    L.offset.resize(0);
  }
  return L;
}

double lattice_distance(const FluxLattice& L1, const FluxLattice& L2) {
  if (L1.genus != L2.genus || L1.basis_hash != L2.basis_hash)
    throw InputError("flux lattices built over different bases");
  if (L1.genus == 0) return 0.0;
  Eigen::VectorXd delta = L1.offset - L2.offset;
  Eigen::VectorXd z0 = L1.gen.colPivHouseholderQr().solve(delta);
  double best = 1e300;
  const int m = static_cast<int>(z0.size());
  std::vector<int> idx(m, -2);
  // Babai rounding plus a +-2 window, ample for the near-orthogonal bases
  // produced here.
  std::function<void(int)> rec = [&](int i) {
    if (i == m) {
      Eigen::VectorXd z(m);
      for (int j = 0; j < m; ++j) z[j] = std::round(z0[j]) + idx[j];
      best = std::min(best, (delta - L1.gen * z).norm());
      return;
    }
    for (int s = -2; s <= 2; ++s) {
      idx[i] = s;
      rec(i + 1);
    }
  };
  rec(0);
  return best;
}

double w11_vortex_distance(const SurfaceModel& S, const VortexConfig& cfg1,
                           const VortexConfig& cfg2) {
  int s1 = 0, s2 = 0;
  for (int d : cfg1.d) s1 += d;
  for (int d : cfg2.d) s2 += d;
  if (s1 != s2)
    throw InputError("total degrees differ; minimal connection undefined");

  std::vector<Point> pos, neg;
  auto add = [&](const VortexConfig& cfg, bool flip) {
    for (std::size_t k = 0; k < cfg.a.size(); ++k) {
      int d = flip ? -cfg.d[k] : cfg.d[k];
      for (int c = 0; c < std::abs(d); ++c)
        (d > 0 ? pos : neg).push_back(cfg.a[k]);
    }
  };
  add(cfg1, false);
  add(cfg2, true);
  if (pos.size() != neg.size())
    throw NumericError("charge expansion imbalance");
  const int n = static_cast<int>(pos.size());
  if (n == 0) return 0.0;

  Eigen::MatrixXd cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = geodesic_dist(S, pos[i], neg[j]);

  // Hungarian algorithm, potentials form.
  const double INF = 1e300;
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, INF);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
          if (cur < minv[j]) minv[j] = cur, way[j] = j0;
          if (minv[j] < delta) delta = minv[j], j1 = j;
        }
      for (int j = 0; j <= n; ++j)
        if (used[j])
          u[p[j]] += delta, v[j] -= delta;
        else
          minv[j] -= delta;
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0;
  for (int j = 1; j <= n; ++j) total += cost(p[j] - 1, j - 1);
  return TWO_PI * total;
}

}  // namespace vortexlab
