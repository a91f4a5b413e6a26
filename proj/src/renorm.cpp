#include "vortexlab/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "vortexlab/util.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {

namespace {

void require_same_surface(const SurfaceModel& S, const HarmonicBasis& HB) {
  if (HB.surface_hash != S.content_hash)
    throw InputError("harmonic basis was built for a different surface");
}

Vec3 point_pos(const SurfaceModel& S, const Point& x) {
  if (x.vertex >= 0) return S.V[x.vertex];
  return x.pos;
}

double min_pair_dist(const SurfaceModel& S, const VortexConfig& cfg) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < cfg.a.size(); ++k)
    for (std::size_t l = k + 1; l < cfg.a.size(); ++l)
      m = std::min(m, geodesic_dist(S, cfg.a[k], cfg.a[l]));
  return m;
}

// ---- quadrature of the current energy -----------------------------------

double smooth5(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return ((6.0 * s - 15.0) * s + 10.0) * s * s * s;
}

// 1 inside rho <= R0, 0 outside rho >= R1, quintic ramp in log rho.
double cap_weight(double rho, double R0, double R1) {
  if (rho <= R0) return 1.0;
  if (rho >= R1) return 0.0;
  double s = (std::log(rho) - std::log(R0)) / (std::log(R1) - std::log(R0));
  return 1.0 - smooth5(s);
}

// Frame components of the canonical current at an analytic point.
Vec2 current_value(const GreenEvaluator& gev, const HarmonicBasis& HB,
                   const VortexConfig& cfg, const Eigen::VectorXd& phi,
                   const Point& x) {
  Vec2 j = dstar_psi_value(gev, cfg, x);
  for (std::size_t k = 0; k < HB.forms.size(); ++k)
    j += phi[static_cast<long>(k)] *
         harmonic_value(gev.surface(), HB, static_cast<int>(k), x);
  return j;
}

// Log-radial polar rule for the weighted energy in one vortex cap.
double cap_integral(const GreenEvaluator& gev, const HarmonicBasis& HB,
                    const VortexConfig& cfg, const Eigen::VectorXd& phi,
                    std::size_t k, double r, double R0, double R1) {
  const SurfaceModel& S = gev.surface();
  double t0 = std::log(r), t1 = std::log(R1);
  int M = std::max(48, static_cast<int>(16.0 * (t1 - t0) / std::log(2.0)) + 1);
  const int Nphi = 64;
  double dt = (t1 - t0) / M, dphi = TWO_PI / Nphi;

  Vec3 p = point_pos(S, cfg.a[k]);
  Vec3 e1, e2, nrm;
  if (S.kind == SurfaceKind::UnitSphere) analytic_frame(S, cfg.a[k], e1, e2, nrm);

  KahanSum acc;
  for (int i = 0; i < M; ++i) {
    double rho = std::exp(t0 + (i + 0.5) * dt);
    double w = cap_weight(rho, R0, R1);
    if (w == 0.0) continue;
    double jac = S.kind == SurfaceKind::UnitSphere ? std::sin(rho) * rho
                                                   : rho * rho;
    for (int jj = 0; jj < Nphi; ++jj) {
      double ang = (jj + 0.5) * dphi;
      Point x;
      if (S.kind == SurfaceKind::FlatTorus) {
        x = Point::torus(p.x() + rho * std::cos(ang),
                         p.y() + rho * std::sin(ang));
      } else {
        Vec3 dir = std::cos(ang) * e1 + std::sin(ang) * e2;
        x = Point{(std::cos(rho) * p + std::sin(rho) * dir).normalized(), -1};
      }
      Vec2 jv = current_value(gev, HB, cfg, phi, x);
      acc.add(w * 0.5 * jv.squaredNorm() * jac * dt * dphi);
    }
  }
  return acc.value();
}

// Background rule: the energy weighted by one minus the sum of cap weights.
double background_integral(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg, const Eigen::VectorXd& phi,
                           const std::vector<double>& R0,
                           const std::vector<double>& R1) {
  const SurfaceModel& S = gev.surface();
  KahanSum acc;
  auto weight_at = [&](const Point& x) {
    double w = 1.0;
    for (std::size_t k = 0; k < cfg.a.size(); ++k)
      w -= cap_weight(geodesic_dist(S, x, cfg.a[k]), R0[k], R1[k]);
    return std::max(0.0, w);
  };
  if (S.kind == SurfaceKind::FlatTorus) {
    const int M = 256;
    double da = 1.0 / (static_cast<double>(M) * M);
    for (int i = 0; i < M; ++i)
      for (int j = 0; j < M; ++j) {
        Point x = Point::torus((i + 0.5) / M, (j + 0.5) / M);
        double w = weight_at(x);
        if (w <= 1e-14) continue;
        acc.add(w * 0.5 * current_value(gev, HB, cfg, phi, x).squaredNorm() *
                da);
      }
  } else {
    const int Nt = 384, Np = 384;
    double dth = PI / Nt, dph = TWO_PI / Np;
    for (int i = 0; i < Nt; ++i) {
      double th = (i + 0.5) * dth, st = std::sin(th), ct = std::cos(th);
      for (int j = 0; j < Np; ++j) {
        double ph = (j + 0.5) * dph;
        Point x{{st * std::cos(ph), st * std::sin(ph), ct}, -1};
        double w = weight_at(x);
        if (w <= 1e-14) continue;
        acc.add(w * 0.5 * current_value(gev, HB, cfg, phi, x).squaredNorm() *
                st * dth * dph);
      }
    }
  }
  return acc.value();
}

// ---- fitted second fundamental forms ------------------------------------

using ShapeTable = std::vector<Eigen::Matrix2d>;

std::shared_ptr<const ShapeTable> fitted_shape(const SurfaceModel& S) {
  static std::mutex mu;
  static std::unordered_map<std::uint64_t, std::shared_ptr<const ShapeTable>>
      cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(S.content_hash);
    if (it != cache.end()) return it->second;
  }
  auto table = std::make_shared<ShapeTable>(S.V.size());
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    // Two-ring sample set.
    std::vector<int> samples;
    std::vector<char> seen(S.V.size(), 0);
    seen[v] = 1;
    for (int w : S.vertex_ring[v])
      if (!seen[w]) {
        seen[w] = 1;
        samples.push_back(w);
      }
    std::size_t one_ring = samples.size();
    for (std::size_t i = 0; i < one_ring; ++i)
      for (int w : S.vertex_ring[samples[i]])
        if (!seen[w]) {
          seen[w] = 1;
          samples.push_back(w);
        }
    const Vec3& e1 = S.frames.e1[v];
    const Vec3& e2 = S.frames.e2[v];
    const Vec3& n = S.frames.normal[v];
    Eigen::MatrixXd A(samples.size(), 5);
    Eigen::VectorXd h(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      Vec3 d = S.V[samples[i]] - S.V[v];
      double x1 = d.dot(e1), x2 = d.dot(e2);
      A(static_cast<long>(i), 0) = x1;
      A(static_cast<long>(i), 1) = x2;
      A(static_cast<long>(i), 2) = 0.5 * x1 * x1;
      A(static_cast<long>(i), 3) = x1 * x2;
      A(static_cast<long>(i), 4) = 0.5 * x2 * x2;
      h[static_cast<long>(i)] = d.dot(n);
    }
    Eigen::VectorXd c = A.colPivHouseholderQr().solve(h);
    Eigen::Matrix2d m;
    m << c[2], c[3], c[3], c[4];
    (*table)[v] = m;
  }
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(S.content_hash, table);
  return table;
}

int closest_vertex(const SurfaceModel& S, const Point& x) {
  if (x.vertex >= 0) return x.vertex;
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    double d = (S.V[v] - x.pos).squaredNorm();
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

// ---- position retraction for the minimizer ------------------------------

Point retract(const SurfaceModel& S, const Point& a, const Vec2& delta) {
  Vec3 e1, e2, n;
  analytic_frame(S, a, e1, e2, n);
  Vec3 p = point_pos(S, a);
  if (S.kind == SurfaceKind::FlatTorus) {
    Vec3 q = p + delta.x() * e1 + delta.y() * e2;
    return Point::torus(q.x(), q.y());
  }
  Vec3 v = delta.x() * e1 + delta.y() * e2;
  double t = v.norm();
  if (t < 1e-300) return Point{p, -1};
  return Point{(std::cos(t) * p + std::sin(t) * (v / t)).normalized(), -1};
}

}  // namespace

// ---- closed form ---------------------------------------------------------

RenormReport W_closed_form(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg,
                           const Eigen::VectorXd& phi) {
  const SurfaceModel& S = gev.surface();
  require_same_surface(S, HB);
  validate_config(S, cfg);
  if (phi.size() != 2 * HB.genus)
    throw InputError("flux vector of wrong size for the surface genus");

  RenormReport rep;
  KahanSum green;
  for (std::size_t l = 0; l < cfg.a.size(); ++l)
    for (std::size_t k = l + 1; k < cfg.a.size(); ++k)
      green.add(static_cast<double>(cfg.d[l]) * cfg.d[k] *
                gev.eval(cfg.a[l], cfg.a[k]));
  rep.terms.green_pairs = 4.0 * PI * PI * green.value();

  KahanSum robin, psi0v;
  for (std::size_t k = 0; k < cfg.a.size(); ++k) {
    robin.add(static_cast<double>(cfg.d[k]) * cfg.d[k] *
              gev.robin_mass(cfg.a[k]));
    psi0v.add(cfg.d[k] * gev.psi0_value(cfg.a[k]));
  }
  rep.terms.robin = 2.0 * PI * PI * robin.value();
  rep.terms.psi0_vortex = TWO_PI * psi0v.value();
  rep.terms.flux_sq = 0.5 * phi.squaredNorm();
  rep.terms.psi0_dirichlet = gev.psi0_dirichlet();

  rep.W_closed = rep.terms.green_pairs + rep.terms.robin +
                 rep.terms.psi0_vortex + rep.terms.flux_sq +
                 rep.terms.psi0_dirichlet;
  return rep;
}

// ---- quadrature ----------------------------------------------------------

double W_quadrature(const GreenEvaluator& gev, const HarmonicBasis& HB,
                    const VortexConfig& cfg, const Eigen::VectorXd& phi,
                    double r) {
  const SurfaceModel& S = gev.surface();
  require_same_surface(S, HB);
  validate_config(S, cfg);
  if (phi.size() != 2 * HB.genus)
    throw InputError("flux vector of wrong size for the surface genus");
  if (!(r > 0.0)) throw InputError("quadrature radius must be positive");
  double mind = min_pair_dist(S, cfg);
  if (std::sqrt(r) > mind)
    throw InputError(
        "quadrature radius too large: sqrt(r) exceeds the minimal vortex "
        "separation");

  double dsq = 0.0;
  for (int d : cfg.d) dsq += static_cast<double>(d) * d;

  if (S.kind == SurfaceKind::TriMesh) {
    // Discrete fallback: edge energy of the canonical current away from the
    // excluded balls.
    DiscreteForm j = jstar(gev, HB, cfg, phi);
    Eigen::VectorXd dist = vortex_distance_field(S, cfg);
    KahanSum acc;
    for (int e = 0; e < static_cast<int>(S.E.size()); ++e)
      if (dist[S.E[e][0]] >= r && dist[S.E[e][1]] >= r)
        acc.add(0.5 * S.dec.star1[e] * j.values[e] * j.values[e]);
    return acc.value() + PI * std::log(r) * dsq;
  }

  double capmax = S.kind == SurfaceKind::FlatTorus ? 0.2 : 0.6;
  std::vector<double> R0(cfg.a.size()), R1(cfg.a.size());
  for (std::size_t k = 0; k < cfg.a.size(); ++k) {
    double rho = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < cfg.a.size(); ++l)
      if (l != k) rho = std::min(rho, geodesic_dist(S, cfg.a[k], cfg.a[l]));
    R0[k] = std::min(0.22 * rho, capmax);
    R1[k] = 2.0 * R0[k];
    if (r >= R0[k])
      throw InputError(
          "quadrature radius too large for the near-vortex caps");
  }

  KahanSum total;
  for (std::size_t k = 0; k < cfg.a.size(); ++k)
    total.add(cap_integral(gev, HB, cfg, phi, k, r, R0[k], R1[k]));
  total.add(background_integral(gev, HB, cfg, phi, R0, R1));
  return total.value() + PI * std::log(r) * dsq;
}

// ---- position minimization ----------------------------------------------

MinimizeWResult minimize_W(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& init,
                           const MinimizeWOptions& opts) {
  const SurfaceModel& S = gev.surface();
  require_same_surface(S, HB);
  if (S.kind == SurfaceKind::TriMesh)
    throw InputError(
        "vortex position optimization needs an analytic surface kind");
  if (opts.extrinsic && S.kind == SurfaceKind::FlatTorus)
    throw InputError("the bending term needs an embedded surface");
  validate_config(S, init);

  const double scale = S.kind == SurfaceKind::FlatTorus ? 1.0 : PI;
  const double h = 1e-4 * scale;
  const std::size_t n = init.a.size();

  MinimizeWResult res;
  res.cfg = init;

  auto flux_for = [&](const VortexConfig& c) {
    FluxLattice L = lattice(HB, gev, c);
    return L.nearest_point(Eigen::VectorXd::Zero(2 * HB.genus));
  };
  auto objective = [&](const VortexConfig& c, const Eigen::VectorXd& phi) {
    // A trial step may land two vortices exactly on top of each other; make
    // that a rejected (infinite) trial rather than an input error.
    if (min_pair_dist(S, c) <= 1e-12)
      return std::numeric_limits<double>::infinity();
    double W = W_closed_form(gev, HB, c, phi).W_closed;
    if (opts.extrinsic) {
      CanonicalField CF = build_ustar(gev, HB, c, phi);
      W += theta_minimize(S, CF).tildeW;
    }
    return W;
  };
  auto annihilating = [&](const VortexConfig& c, std::string& msg) {
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t l = k + 1; l < n; ++l)
        if (c.d[k] * c.d[l] < 0 &&
            geodesic_dist(S, c.a[k], c.a[l]) < 1e-3) {
          std::ostringstream os;
          os << "annihilation direction between vortices " << k << " and "
             << l << "; no interior minimum";
          msg = os.str();
          return true;
        }
    return false;
  };

  res.phi = flux_for(res.cfg);
  double alpha = opts.step_frac * scale;
  for (int it = 0; it < opts.max_outer; ++it) {
    res.iterations = it;
    if (annihilating(res.cfg, res.message)) {
      res.annihilated = true;
      break;
    }
    res.phi = flux_for(res.cfg);
    double F0 = objective(res.cfg, res.phi);

    // Central differences along the tangent frame of each vortex.
    std::vector<Vec2> g(n);
    double gmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (int i = 0; i < 2; ++i) {
        Vec2 dir = Vec2::Zero();
        dir[i] = h;
        VortexConfig cp = res.cfg, cm = res.cfg;
        cp.a[k] = retract(S, res.cfg.a[k], dir);
        cm.a[k] = retract(S, res.cfg.a[k], -dir);
        g[k][i] = (objective(cp, res.phi) - objective(cm, res.phi)) /
                  (2.0 * h);
      }
      gmax = std::max(gmax, g[k].norm());
    }
    if (gmax * scale < 1e-12) {
      res.converged = true;
      break;
    }

    // Backtracking step on positions, flux frozen.
    double gsq = 0.0;
    for (std::size_t k = 0; k < n; ++k) gsq += g[k].squaredNorm();
    double a = std::min(alpha, opts.step_frac * scale / gmax);
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      VortexConfig ct = res.cfg;
      for (std::size_t k = 0; k < n; ++k)
        ct.a[k] = retract(S, res.cfg.a[k], (-a * g[k]).eval());
      double Ft = objective(ct, res.phi);
      if (Ft <= F0 - 1e-4 * a * gsq) {
        res.cfg = ct;
        accepted = true;
        break;
      }
      a *= 0.5;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
    alpha = std::min(2.0 * a, 10.0 * scale);
    Eigen::VectorXd phi_new = flux_for(res.cfg);
    bool phi_stable = phi_new.size() == 0 ||
                      (phi_new - res.phi).cwiseAbs().maxCoeff() < 1e-12;
    res.phi = phi_new;
    if (a * gmax < opts.tol_step * scale && phi_stable) {
      res.converged = true;
      break;
    }
  }
  if (!res.annihilated) {
    std::string msg;
    if (annihilating(res.cfg, msg)) {
      res.annihilated = true;
      res.message = msg;
    }
  }
  res.phi = flux_for(res.cfg);
  res.W = objective(res.cfg, res.phi);
  if (res.converged && res.message.empty()) res.message = "converged";
  return res;
}

// ---- shape operator ------------------------------------------------------

Vec3 shape_operator(const SurfaceModel& S, const Point& x, const Vec3& v) {
  if (S.kind == SurfaceKind::FlatTorus)
    throw InputError("the flat torus is not embedded; no shape operator");
  if (S.kind == SurfaceKind::UnitSphere) {
    Vec3 n = point_pos(S, x).normalized();
    return -(v - v.dot(n) * n);
  }
  int vx = closest_vertex(S, x);
  auto table = fitted_shape(S);
  const Vec3& e1 = S.frames.e1[vx];
  const Vec3& e2 = S.frames.e2[vx];
  Eigen::Vector2d p(v.dot(e1), v.dot(e2));
  Eigen::Vector2d q = (*table)[vx] * p;
  return q.x() * e1 + q.y() * e2;
}

Eigen::Matrix2d shape_matrix_at_vertex(const SurfaceModel& S, int v) {
  if (S.kind == SurfaceKind::FlatTorus)
    throw InputError("the flat torus is not embedded; no shape operator");
  if (v < 0 || v >= static_cast<int>(S.V.size()))
    throw InputError("shape_matrix_at_vertex: vertex index out of range");
  if (S.kind == SurfaceKind::UnitSphere)
    return -Eigen::Matrix2d::Identity();
  return (*fitted_shape(S))[v];
}

// ---- bending-energy phase correction ------------------------------------

ThetaResult theta_minimize(const SurfaceModel& S, const CanonicalField& CF,
                           const Eigen::VectorXd& theta0) {
  if (S.kind == SurfaceKind::FlatTorus)
    throw InputError("the flat torus is not embedded; no bending energy");
  const long V = static_cast<long>(S.V.size());
  if (CF.field.values.size() != V)
    throw InputError("canonical field does not match the surface");
  if (theta0.size() != 0 && theta0.size() != V)
    throw InputError("initial phase field does not match the surface");

  // Pointwise quadratic form of the bending density in the angle 2 Theta:
  // |S(e^{i Theta} u)|^2 = P + Q cos(2 Theta) + b sin(2 Theta).
  Eigen::VectorXd P(V), Q(V), B(V);
  std::shared_ptr<const ShapeTable> table;
  if (S.kind == SurfaceKind::TriMesh) table = fitted_shape(S);
  for (long v = 0; v < V; ++v) {
    cplx z = CF.field.values[v];
    Eigen::Vector2d p(z.real(), z.imag()), q(-z.imag(), z.real());
    Eigen::Vector2d Sp, Sq;
    if (S.kind == SurfaceKind::UnitSphere) {
      Sp = -p;
      Sq = -q;
    } else {
      Sp = (*table)[v] * p;
      Sq = (*table)[v] * q;
    }
    double a = Sp.squaredNorm(), c = Sq.squaredNorm();
    P[v] = 0.5 * (a + c);
    Q[v] = 0.5 * (a - c);
    B[v] = Sp.dot(Sq);
  }
  const Eigen::VectorXd& m = S.dec.star0;

  auto value = [&](const Eigen::VectorXd& th) {
    double quad = 0.5 * th.dot(S.dec.L0 * th);
    KahanSum pt;
    for (long v = 0; v < V; ++v)
      pt.add(m[v] * 0.5 *
             (P[v] + Q[v] * std::cos(2.0 * th[v]) +
              B[v] * std::sin(2.0 * th[v])));
    return quad + pt.value();
  };
  auto gradient = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd g = S.dec.L0 * th;
    for (long v = 0; v < V; ++v)
      g[v] += m[v] * (B[v] * std::cos(2.0 * th[v]) -
                      Q[v] * std::sin(2.0 * th[v]));
    return g;
  };

  double curv = 0.0, rscale = 0.0;
  for (long v = 0; v < V; ++v) {
    curv = std::max(curv, std::abs(Q[v]) + std::abs(B[v]));
    rscale += m[v] * P[v] * P[v];
  }
  rscale = std::sqrt(rscale) + 1e-30;

  SpMat M = S.dec.L0;
  Eigen::VectorXd shift = (2.0 * curv + 1e-12) * m;
  for (long v = 0; v < V; ++v) M.coeffRef(v, v) += shift[v];
  Eigen::SimplicialLDLT<SpMat> solver(M);
  if (solver.info() != Eigen::Success)
    throw NumericError("bending preconditioner factorization failed");

  ThetaResult res;
  Eigen::VectorXd th =
      theta0.size() == V ? theta0 : Eigen::VectorXd::Zero(V).eval();
  const int max_iter = 10000;
  double F0 = value(th);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    Eigen::VectorXd g = gradient(th);
    double rn = 0.0;
    for (long v = 0; v < V; ++v) rn += g[v] * g[v] / m[v];
    res.residual = std::sqrt(rn);
    if (res.residual <= 1e-6 * rscale) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd z = solver.solve(g);
    double slope = g.dot(z);
    double a = 1.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd tt = th - a * z;
      double Ft = value(tt);
      if (Ft <= F0 - 1e-4 * a * slope) {
        th = tt;
        F0 = Ft;
        ok = true;
        break;
      }
      a *= 0.5;
    }
    if (!ok) {
      res.message = "line search stalled";
      break;
    }
  }
  if (!res.converged && res.message.empty()) {
    std::ostringstream os;
    os << "no convergence in " << max_iter
       << " iterations; residual " << res.residual;
    res.message = os.str();
  }
  res.theta = DiscreteForm{0, th};
  res.tildeW = F0;
  return res;
}

}  // namespace vortexlab
