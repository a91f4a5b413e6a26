#include "vortexlab/vortex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

namespace vortexlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_field(const SurfaceModel& S, const DiscreteField& u) {
  if (u.surface_hash != S.content_hash)
    throw InputError("field does not belong to this surface");
  if (u.values.size() != static_cast<long>(S.V.size()))
    throw InputError("field value count does not match the surface");
}

Point vertex_point(const SurfaceModel& S, int v) {
  return {S.V[v], S.kind == SurfaceKind::TriMesh ? v : -1};
}

double point_dist(const SurfaceModel& S, const Point& a, const Point& b) {
  return geodesic_dist(S, a, b);
}

// Point at geodesic distance t from a toward b, for the analytic kinds.
Point point_between(const SurfaceModel& S, const Point& a, const Point& b,
                    double t) {
  if (S.kind == SurfaceKind::FlatTorus) {
    double ax = a.vertex >= 0 ? S.V[a.vertex].x() : a.pos.x();
    double ay = a.vertex >= 0 ? S.V[a.vertex].y() : a.pos.y();
    double bx = b.vertex >= 0 ? S.V[b.vertex].x() : b.pos.x();
    double by = b.vertex >= 0 ? S.V[b.vertex].y() : b.pos.y();
    double dx = wrap_half(bx - ax), dy = wrap_half(by - ay);
    double len = std::hypot(dx, dy);
    if (len < 1e-14) return a;
    return Point::torus(ax + t * dx / len, ay + t * dy / len);
  }
  Vec3 p = (a.vertex >= 0 ? S.V[a.vertex] : a.pos).normalized();
  Vec3 q = (b.vertex >= 0 ? S.V[b.vertex] : b.pos).normalized();
  Vec3 axis = q - p * p.dot(q);
  double an = axis.norm();
  if (an < 1e-14) return a;
  axis /= an;
  return {std::cos(t) * p + std::sin(t) * axis, -1};
}

struct GrowBall {
  Point center;
  double r0 = 0.0;  // radius floor from seeding or merging
  int deg = 0;

  double radius_at(double s) const {
    return std::max(r0, s * std::abs(static_cast<double>(deg)));
  }
};

// Smallest ball containing both, degrees summed.  On triangulated surfaces
// the center is the vertex minimizing the covering radius in the same graph
// metric used for all other distances, so containment is preserved.
GrowBall merge_balls(const SurfaceModel& S, const GrowBall& a,
                     const GrowBall& b, double s) {
  double ra = a.radius_at(s), rb = b.radius_at(s);
  GrowBall m;
  m.deg = a.deg + b.deg;
  if (S.kind == SurfaceKind::TriMesh) {
    int best = -1;
    double bestr = kInf;
    for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
      Point pv = vertex_point(S, v);
      double val = std::max(point_dist(S, pv, a.center) + ra,
                            point_dist(S, pv, b.center) + rb);
      if (val < bestr) {
        bestr = val;
        best = v;
      }
    }
    m.center = vertex_point(S, best);
    m.r0 = bestr;
    return m;
  }
  double D = point_dist(S, a.center, b.center);
  if (D + rb <= ra) {
    m.center = a.center;
    m.r0 = ra;
  } else if (D + ra <= rb) {
    m.center = b.center;
    m.r0 = rb;
  } else {
    double rn = 0.5 * (D + ra + rb);
    m.center = point_between(S, a.center, b.center, rn - ra);
    m.r0 = rn;
  }
  return m;
}

// Merge every touching pair at growth parameter s until pairwise disjoint.
void resolve_overlaps(const SurfaceModel& S, std::vector<GrowBall>& balls,
                      double s) {
  bool again = true;
  while (again) {
    again = false;
    for (std::size_t i = 0; i < balls.size() && !again; ++i)
      for (std::size_t j = i + 1; j < balls.size() && !again; ++j) {
        double D = point_dist(S, balls[i].center, balls[j].center);
        if (D <= balls[i].radius_at(s) + balls[j].radius_at(s) + 1e-12) {
          GrowBall m = merge_balls(S, balls[i], balls[j], s);
          balls.erase(balls.begin() + j);
          balls[i] = m;
          again = true;
        }
      }
  }
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double fa, double m, double fm, double b, double fb,
                        double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, fa, lm, flm, m, fm, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(f, m, fm, rm, frm, b, fb, right, 0.5 * tol,
                          depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (b <= a) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, fa, m, fm, b, fb, whole, tol, 40);
}

}  // namespace

DiscreteForm current(const SurfaceModel& S, const DiscreteField& u) {
  check_field(S, u);
  DiscreteForm j{1, Eigen::VectorXd::Zero(static_cast<long>(S.E.size()))};
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    j.values[e] = std::imag(std::conj(u.values[a]) * u.values[b] *
                            std::polar(1.0, -S.frames.transport[e]));
  }
  return j;
}

DiscreteForm vorticity(const SurfaceModel& S, const DiscreteField& u) {
  DiscreteForm j = current(S, u);
  Eigen::VectorXd w = S.dec.d1 * j.values;
  for (int f = 0; f < static_cast<int>(S.F.size()); ++f)
    w[f] += S.frames.face_holonomy[f];
  return {2, w};
}

DegreeResult degree(const SurfaceModel& S, const DiscreteField& u,
                    const std::vector<int>& contour) {
  check_field(S, u);
  std::vector<int> path = contour;
  if (path.size() >= 2 && path.front() == path.back()) path.pop_back();
  if (path.size() < 3)
    throw InputError("degree contour needs at least three distinct sites");
  for (int v : path) {
    if (v < 0 || v >= static_cast<int>(S.V.size()))
      throw InputError("degree contour site out of range");
    if (std::abs(u.values[v]) < 0.25)
      throw InputError("|u| < 1/4 on the degree contour");
  }

  int n = static_cast<int>(path.size());
  std::vector<char> wall(S.E.size(), 0);
  std::vector<int> left_seeds, right_seeds;
  KahanSum arg_sum;
  for (int i = 0; i < n; ++i) {
    int x = path[i], y = path[(i + 1) % n];
    int e = S.edge_index(x, y);
    if (e < 0) throw InputError("degree contour step is not an edge");
    wall[e] = 1;
    bool fwd = S.E[e][0] == x;
    left_seeds.push_back(S.edge_faces[e][fwd ? 0 : 1]);
    right_seeds.push_back(S.edge_faces[e][fwd ? 1 : 0]);
    double rho = transport_angle(S, x, y);
    arg_sum.add(std::arg(u.values[y] * std::polar(1.0, -rho) *
                         std::conj(u.values[x])));
  }

  // Region left of the contour, flooding across non-contour edges.
  std::vector<char> in(S.F.size(), 0);
  std::vector<int> stack;
  for (int f : left_seeds)
    if (!in[f]) {
      in[f] = 1;
      stack.push_back(f);
    }
  while (!stack.empty()) {
    int f = stack.back();
    stack.pop_back();
    for (int k = 0; k < 3; ++k) {
      int e = S.face_edges[f][k];
      if (wall[e]) continue;
      int g = S.edge_faces[e][0] == f ? S.edge_faces[e][1] : S.edge_faces[e][0];
      if (!in[g]) {
        in[g] = 1;
        stack.push_back(g);
      }
    }
  }
  for (int f : right_seeds)
    if (in[f])
      throw InputError("degree contour does not bound a region on its left");

  KahanSum hol;
  for (int f = 0; f < static_cast<int>(S.F.size()); ++f)
    if (in[f]) hol.add(S.frames.face_holonomy[f]);

  double wind = (arg_sum.value() + hol.value()) / TWO_PI;
  long d = std::lround(wind);
  double defect = std::abs(wind - static_cast<double>(d));
  if (defect >= 0.2) {
    std::ostringstream os;
    os << "degree winding " << wind << " is " << defect
       << " away from an integer; contour too close to a core";
    throw NumericError(os.str());
  }
  return {static_cast<int>(d), defect};
}

Eigen::VectorXd flux_integrals(const SurfaceModel& S, const HarmonicBasis& HB,
                               const DiscreteField& u) {
  check_field(S, u);
  if (HB.surface_hash != S.content_hash)
    throw InputError("harmonic basis belongs to a different surface");
  // Quadrature of the current against each harmonic form.  Per edge the
  // phase advance is sampled on the principal branch and weighted by the
  // endpoint amplitudes: for near-unit fields this agrees with the sine
  // form to third order, but it stays accurate when a single edge carries
  // an O(1) phase increment next to a vortex core, where the sine would
  // bias every ring by its cubic defect.
  Eigen::VectorXd jq(static_cast<long>(S.E.size()));
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    std::complex<double> w = std::conj(u.values[a]) * u.values[b] *
                             std::polar(1.0, -S.frames.transport[e]);
    double amp = std::abs(u.values[a]) * std::abs(u.values[b]);
    jq[e] = amp == 0.0 ? 0.0 : amp * std::arg(w / amp);
  }
  Eigen::VectorXd phi(static_cast<long>(HB.forms.size()));
  for (std::size_t k = 0; k < HB.forms.size(); ++k) {
    KahanSum acc;
    for (int e = 0; e < static_cast<int>(S.E.size()); ++e)
      acc.add(S.dec.star1[e] * jq[e] * HB.forms[k].values[e]);
    phi[static_cast<long>(k)] = acc.value();
  }
  return phi;
}

// ---- ball construction --------------------------------------------------

BallSet ball_construction(const SurfaceModel& S, const DiscreteField& u,
                          double eps, double sigma, const BallOptions& opts) {
  check_field(S, u);
  if (!(eps > 0.0)) throw InputError("ball construction needs eps > 0");
  double r0max = S.kind == SurfaceKind::FlatTorus    ? 0.45
                 : S.kind == SurfaceKind::UnitSphere ? 1.5
                     : 0.35 * std::sqrt(S.total_area);
  if (!(sigma > 0.0) || sigma > r0max)
    throw InputError("growth radius sigma outside the admissible range");
  if (sigma < std::pow(eps, opts.q))
    throw InputError("growth radius sigma below eps^q");
  if (eps >= sigma) throw InputError("eps must be smaller than sigma");

  int nF = static_cast<int>(S.F.size());
  int nE = static_cast<int>(S.E.size());

  // Renormalized field u/max(|u|,1/2) and its per-face winding mass
  // d j + holonomy; summed over a region with unit-length boundary this is
  // 2 pi times the boundary degree up to a third-order defect.
  DiscreteField ut = u;
  for (long v = 0; v < ut.values.size(); ++v)
    ut.values[v] /= std::max(std::abs(ut.values[v]), 0.5);
  DiscreteForm jt = current(S, ut);
  Eigen::VectorXd W = S.dec.d1 * jt.values;
  for (int f = 0; f < nF; ++f) W[f] += S.frames.face_holonomy[f];

  // Low-amplitude faces and their connected components.
  std::vector<char> zface(nF, 0);
  for (int f = 0; f < nF; ++f)
    for (int k = 0; k < 3; ++k)
      if (std::abs(u.values[S.F[f][k]]) <= 0.5) zface[f] = 1;
  std::vector<int> comp(nF, -1);
  std::vector<std::vector<int>> comp_faces;
  for (int f = 0; f < nF; ++f) {
    if (!zface[f] || comp[f] >= 0) continue;
    int cid = static_cast<int>(comp_faces.size());
    comp_faces.emplace_back();
    std::vector<int> stack{f};
    comp[f] = cid;
    while (!stack.empty()) {
      int g = stack.back();
      stack.pop_back();
      comp_faces[cid].push_back(g);
      for (int k = 0; k < 3; ++k) {
        int e = S.face_edges[g][k];
        int h =
            S.edge_faces[e][0] == g ? S.edge_faces[e][1] : S.edge_faces[e][0];
        if (zface[h] && comp[h] < 0) {
          comp[h] = cid;
          stack.push_back(h);
        }
      }
    }
  }
  int nc = static_cast<int>(comp_faces.size());

  BallSet out;
  out.sigma = sigma;
  out.epsilon = eps;
  if (nc == 0) return out;

  // Step 1: grow a measuring region around each component until its boundary
  // has |u| >= 1/2 and radius >= eps, absorbing any other component the
  // region reaches, then read the degree off the accumulated winding mass.
  std::vector<char> processed(nc, 0);
  std::vector<GrowBall> active, zeros;
  for (int c = 0; c < nc; ++c) {
    if (processed[c]) continue;
    processed[c] = 1;
    std::vector<int> absorbed{c};
    std::vector<char> inR(nF, 0);
    int region_size = 0;
    KahanSum wsum;
    std::vector<int> pending = comp_faces[c];
    auto add_face = [&](int f) {
      if (inR[f]) return;
      inR[f] = 1;
      ++region_size;
      wsum.add(W[f]);
      if (comp[f] >= 0 && !processed[comp[f]]) {
        processed[comp[f]] = 1;
        absorbed.push_back(comp[f]);
        for (int g : comp_faces[comp[f]]) pending.push_back(g);
      }
    };
    while (!pending.empty()) {
      int f = pending.back();
      pending.pop_back();
      add_face(f);
    }

    int cen = -1;
    double camp = kInf;
    for (int f : comp_faces[c])
      for (int k = 0; k < 3; ++k) {
        double a = std::abs(u.values[S.F[f][k]]);
        if (a < camp) {
          camp = a;
          cen = S.F[f][k];
        }
      }
    Point center0 = vertex_point(S, cen);

    long meas = 0;
    for (int ring = 0;; ++ring) {
      bool clean = true;
      double mind = kInf;
      for (int e = 0; e < nE && clean; ++e) {
        if (inR[S.edge_faces[e][0]] == inR[S.edge_faces[e][1]]) continue;
        for (int side = 0; side < 2; ++side) {
          int v = S.E[e][side];
          if (std::abs(u.values[v]) < 0.5) {
            clean = false;
            break;
          }
          mind = std::min(mind, point_dist(S, center0, vertex_point(S, v)));
        }
      }
      if (clean && mind >= eps) {
        double wind = wsum.value() / TWO_PI;
        meas = std::lround(wind);
        if (std::abs(wind - static_cast<double>(meas)) < 0.2) break;
      }
      if (region_size >= nF || ring > 200)
        throw NumericError(
            "cannot isolate a low-amplitude component on a clean contour");
      std::vector<int> addl;
      for (int e = 0; e < nE; ++e) {
        int f0 = S.edge_faces[e][0], f1 = S.edge_faces[e][1];
        if (inR[f0] && !inR[f1]) addl.push_back(f1);
        if (inR[f1] && !inR[f0]) addl.push_back(f0);
      }
      pending = addl;
      while (!pending.empty()) {
        int f = pending.back();
        pending.pop_back();
        add_face(f);
      }
    }

    // Seed ball: centered at the smallest amplitude over everything the
    // region absorbed, radius covering all corners of those components.
    int cen2 = -1;
    double camp2 = kInf;
    for (int cc : absorbed)
      for (int f : comp_faces[cc])
        for (int k = 0; k < 3; ++k) {
          double a = std::abs(u.values[S.F[f][k]]);
          if (a < camp2) {
            camp2 = a;
            cen2 = S.F[f][k];
          }
        }
    Point center = vertex_point(S, cen2);
    double rad = eps;
    for (int cc : absorbed)
      for (int f : comp_faces[cc])
        for (int k = 0; k < 3; ++k)
          rad = std::max(rad,
                         point_dist(S, center, vertex_point(S, S.F[f][k])));
    GrowBall b{center, rad, static_cast<int>(meas)};
    (b.deg != 0 ? active : zeros).push_back(b);
  }

  // Step 2: synchronized growth at radius sigma'*|d|, merging collisions
  // into the smallest enclosing ball, until sigma' reaches sigma.
  resolve_overlaps(S, active, 0.0);
  double s = 0.0;
  while (s < sigma && active.size() > 1) {
    double best_t = kInf;
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        double D = point_dist(S, active[i].center, active[j].center);
        auto gap = [&](double t) {
          return active[i].radius_at(t) + active[j].radius_at(t) - D;
        };
        if (gap(sigma) < 0.0) continue;
        double lo = s, hi = sigma;
        for (int it = 0; it < 60; ++it) {
          double mid = 0.5 * (lo + hi);
          (gap(mid) >= 0.0 ? hi : lo) = mid;
        }
        best_t = std::min(best_t, hi);
      }
    if (best_t > sigma) break;
    s = best_t;
    resolve_overlaps(S, active, s);
  }
  for (GrowBall& b : active) b.r0 = b.radius_at(sigma);

  // Step 3: absorb zero-degree components, then restore disjointness.
  std::vector<GrowBall> all = active;
  for (const GrowBall& z : zeros) all.push_back(z);
  resolve_overlaps(S, all, sigma);

  long totdeg = 0;
  KahanSum rsum;
  for (const GrowBall& b : all) {
    out.balls.push_back({b.center, b.radius_at(sigma), b.deg});
    totdeg += std::abs(b.deg);
    rsum.add(b.radius_at(sigma));
  }
  if (totdeg > opts.degree_budget) {
    std::ostringstream os;
    os << "total absolute degree " << totdeg << " exceeds the budget "
       << opts.degree_budget;
    out.diagnostics.push_back(os.str());
  }
  if (rsum.value() > (opts.degree_budget + 1) * sigma) {
    std::ostringstream os;
    os << "radius sum " << rsum.value() << " exceeds (n+1) sigma = "
       << (opts.degree_budget + 1) * sigma;
    out.diagnostics.push_back(os.str());
  }

  // Energy floor diagnostic (analytic kinds, where per-vertex distances are
  // exact): covariant Dirichlet energy inside each nonzero-degree ball
  // should carry at least |d| (pi log(sigma/eps) - c).
  if (S.analytic) {
    double floor_c = 15.0;
    for (std::size_t bi = 0; bi < out.balls.size(); ++bi) {
      const Ball& b = out.balls[bi];
      if (b.degree == 0) continue;
      std::vector<char> inb(S.V.size(), 0);
      for (int v = 0; v < static_cast<int>(S.V.size()); ++v)
        inb[v] = point_dist(S, b.center, vertex_point(S, v)) <= b.radius;
      KahanSum dir;
      for (int e = 0; e < nE; ++e) {
        int a = S.E[e][0], bb = S.E[e][1];
        if (!inb[a] || !inb[bb]) continue;
        cplx diff = u.values[bb] * std::polar(1.0, -S.frames.transport[e]) -
                    u.values[a];
        dir.add(0.5 * S.dec.star1[e] * std::norm(diff));
      }
      double floor = std::abs(b.degree) * (PI * std::log(sigma / eps) - floor_c);
      if (dir.value() < floor) {
        std::ostringstream os;
        os << "ball " << bi << " carries Dirichlet energy " << dir.value()
           << " below the degree floor " << floor;
        out.diagnostics.push_back(os.str());
      }
    }
  }
  return out;
}

std::string ballset_to_json(const BallSet& bs) {
  std::ostringstream os;
  os << "{\n  \"balls\": [";
  for (std::size_t i = 0; i < bs.balls.size(); ++i) {
    const Ball& b = bs.balls[i];
    os << (i ? ",\n    " : "\n    ");
    os << "{\"center\": [" << fmt_g17(b.center.pos.x()) << ", "
       << fmt_g17(b.center.pos.y()) << ", " << fmt_g17(b.center.pos.z())
       << "], \"radius\": " << fmt_g17(b.radius)
       << ", \"degree\": " << b.degree << "}";
  }
  os << (bs.balls.empty() ? "]" : "\n  ]");
  os << ",\n  \"sigma\": " << fmt_g17(bs.sigma);
  os << ",\n  \"epsilon\": " << fmt_g17(bs.epsilon);
  if (!bs.diagnostics.empty()) {
    os << ",\n  \"diagnostics\": [";
    for (std::size_t i = 0; i < bs.diagnostics.size(); ++i) {
      if (i) os << ", ";
      os << '"' << bs.diagnostics[i] << '"';
    }
    os << "]";
  }
  os << "\n}\n";
  return os.str();
}

// ---- energy lower-bound profiles ----------------------------------------

double lambda_eps(double r, double eps, double c2, double c3) {
  if (!(eps > 0.0) || !(c2 > 0.0))
    throw InputError("lambda_eps needs eps > 0 and c2 > 0");
  if (r < 0.0) throw InputError("lambda_eps needs r >= 0");
  double A = c2 / (4.0 * eps);
  if (r == 0.0) return A;
  double B = PI * std::max(1.0 - c3 * r * r, 0.0) / r;
  if (B <= 0.0) return 0.0;
  return A * B / (A + B);
}

double Lambda_eps(double sigma, double eps, double c2, double c3) {
  if (!(sigma > 0.0)) throw InputError("Lambda_eps needs sigma > 0");
  double hi = sigma;
  if (c3 > 0.0) hi = std::min(sigma, 1.0 / std::sqrt(c3));
  auto f = [&](double r) { return lambda_eps(r, eps, c2, c3); };
  double scale = PI * std::log(1.0 + sigma * c2 / (4.0 * PI * eps)) + 1.0;
  return integrate(f, 0.0, hi, 1e-12 * scale);
}

}  // namespace vortexlab
