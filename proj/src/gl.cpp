#include "vortexlab/gl.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "vortexlab/canonical.hpp"

namespace vortexlab {

namespace {

void check_field(const SurfaceModel& S, const DiscreteField& u) {
  if (u.surface_hash != S.content_hash)
    throw InputError("field does not belong to this surface");
  if (u.values.size() != static_cast<long>(S.V.size()))
    throw InputError("field size does not match the surface");
}

cplx site(const Eigen::VectorXd& x, int v) {
  return cplx(x[2 * v], x[2 * v + 1]);
}

}  // namespace

// ---- amplitude potentials ------------------------------------------------

Potential Potential::gl() {
  Potential P;
  P.name = "gl";
  P.F = [](double s) { return (1.0 - s) * (1.0 - s); };
  P.dF = [](double s) { return -2.0 * (1.0 - s); };
  P.domain_max = 2.0;
  return P;
}

Potential Potential::mm() {
  Potential P;
  P.name = "mm";
  P.F = [](double s) { return 1.0 - s; };
  P.dF = [](double) { return -1.0; };
  P.domain_max = 1.0;
  return P;
}

double potential_growth_constant(const Potential& P) {
  if (!P.F || !P.dF) throw InputError("potential must define F and dF");
  if (std::abs(P.F(1.0)) > 1e-12)
    throw InputError("potential must vanish at unit amplitude: F(1) = " +
                     fmt_g17(P.F(1.0)));
  const int ngrid = 512;
  double C = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= ngrid; ++i) {
    double s = P.domain_max * static_cast<double>(i) / ngrid;
    double gap = 1.0 - s;
    if (std::abs(gap) < 1e-9) continue;
    C = std::min(C, P.F(s * s) / (gap * gap));
  }
  if (!(C > 0.0))
    throw InputError(
        "potential lacks quadratic growth away from unit amplitude: C = " +
        fmt_g17(C));
  return C;
}

// ---- energies ------------------------------------------------------------

EnergyBreakdown energy_in(const SurfaceModel& S, const DiscreteField& u,
                          double eps, const Potential& F) {
  check_field(S, u);
  if (!(eps > 0.0)) throw InputError("epsilon must be positive");
  if (!F.F) throw InputError("potential must define F");
  const long V = static_cast<long>(S.V.size());
  EnergyBreakdown out;
  out.site_density = Eigen::VectorXd::Zero(V);
  KahanSum dir, pot;
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    cplx diff = u.values[b] * std::polar(1.0, -S.frames.transport[e]) -
                u.values[a];
    double c = 0.5 * S.dec.star1[e] * std::norm(diff);
    dir.add(c);
    out.site_density[a] += 0.5 * c;
    out.site_density[b] += 0.5 * c;
  }
  const double cpot = 1.0 / (4.0 * eps * eps);
  for (long v = 0; v < V; ++v) {
    double c = cpot * S.dec.star0[v] * F.F(std::norm(u.values[v]));
    pot.add(c);
    out.site_density[v] += c;
  }
  out.dirichlet = dir.value();
  out.potential = pot.value();
  out.total = out.dirichlet + out.potential;
  for (long v = 0; v < V; ++v) out.site_density[v] /= S.dec.star0[v];
  return out;
}

EnergyBreakdown energy_ex(const SurfaceModel& S, const DiscreteField& m,
                          double eps, const Potential& F) {
  if (S.kind == SurfaceKind::FlatTorus)
    throw InputError("extrinsic energy requires an embedded surface");
  EnergyBreakdown out = energy_in(S, m, eps, F);
  const long V = static_cast<long>(S.V.size());
  KahanSum sh;
  for (long v = 0; v < V; ++v) {
    Eigen::Matrix2d A = shape_matrix_at_vertex(S, static_cast<int>(v));
    Eigen::Vector2d p(m.values[v].real(), m.values[v].imag());
    double c = 0.5 * S.dec.star0[v] * (A * p).squaredNorm();
    sh.add(c);
    out.site_density[v] += c / S.dec.star0[v];
  }
  out.shape = sh.value();
  out.total += out.shape;
  return out;
}

namespace {

// Ambient unit vectors M = m + Mperp N per vertex after constraint check.
std::vector<Vec3> mm_realize(const SurfaceModel& S, const MMField& M) {
  check_field(S, M.m);
  const long V = static_cast<long>(S.V.size());
  if (M.Mperp.size() != V)
    throw InputError("normal component size does not match the surface");
  std::vector<Vec3> amb(S.V.size());
  for (long v = 0; v < V; ++v) {
    double s = std::norm(M.m.values[v]) + M.Mperp[v] * M.Mperp[v];
    if (std::abs(s - 1.0) > 1e-8)
      throw InputError("micromagnetic field violates |m|^2 + Mperp^2 = 1 at "
                       "site " + std::to_string(v) + " by " +
                       fmt_g17(std::abs(s - 1.0)));
    amb[v] = M.m.values[v].real() * S.frames.e1[v] +
             M.m.values[v].imag() * S.frames.e2[v] +
             M.Mperp[v] * S.frames.normal[v];
  }
  return amb;
}

}  // namespace

EnergyBreakdown energy_mm(const SurfaceModel& S, const MMField& M, double eps,
                          const Potential& F) {
  if (!(eps > 0.0)) throw InputError("epsilon must be positive");
  if (!F.F) throw InputError("potential must define F");
  std::vector<Vec3> amb = mm_realize(S, M);
  const long V = static_cast<long>(S.V.size());
  EnergyBreakdown out;
  out.site_density = Eigen::VectorXd::Zero(V);
  KahanSum dir, pot;
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    double c = 0.5 * S.dec.star1[e] * (amb[b] - amb[a]).squaredNorm();
    dir.add(c);
    out.site_density[a] += 0.5 * c;
    out.site_density[b] += 0.5 * c;
  }
  const double cpot = 1.0 / (4.0 * eps * eps);
  for (long v = 0; v < V; ++v) {
    double inplane = 1.0 - M.Mperp[v] * M.Mperp[v];
    double c = cpot * S.dec.star0[v] * F.F(inplane);
    pot.add(c);
    out.site_density[v] += c;
  }
  out.dirichlet = dir.value();
  out.potential = pot.value();
  out.total = out.dirichlet + out.potential;
  for (long v = 0; v < V; ++v) out.site_density[v] /= S.dec.star0[v];
  return out;
}

MMDecomposition mm_decomposition(const SurfaceModel& S, const MMField& M) {
  std::vector<Vec3> amb = mm_realize(S, M);
  MMDecomposition out;
  KahanSum direct, split;
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    direct.add(0.5 * S.dec.star1[e] * (amb[b] - amb[a]).squaredNorm());
    cplx dt = M.m.values[b] * std::polar(1.0, -S.frames.transport[e]) -
              M.m.values[a];
    double dn = M.Mperp[b] - M.Mperp[a];
    split.add(0.5 * S.dec.star1[e] * (std::norm(dt) + dn * dn));
  }
  // Curvature share of the tangential derivative, lumped per vertex.
  if (S.kind != SurfaceKind::FlatTorus) {
    const long V = static_cast<long>(S.V.size());
    for (long v = 0; v < V; ++v) {
      Eigen::Matrix2d A = shape_matrix_at_vertex(S, static_cast<int>(v));
      Eigen::Vector2d p(M.m.values[v].real(), M.m.values[v].imag());
      split.add(0.5 * S.dec.star0[v] * (A * p).squaredNorm());
    }
  }
  out.direct = direct.value();
  out.decomposed = split.value();
  out.residual = std::abs(out.direct - out.decomposed);
  return out;
}

double dirichlet_outside(const SurfaceModel& S, const DiscreteField& u,
                         const VortexConfig& cfg, double r) {
  check_field(S, u);
  if (!(r > 0.0)) throw InputError("exclusion radius must be positive");
  validate_config(S, cfg);
  Eigen::VectorXd dist = vortex_distance_field(S, cfg);
  KahanSum acc;
  for (int e = 0; e < static_cast<int>(S.E.size()); ++e) {
    int a = S.E[e][0], b = S.E[e][1];
    if (dist[a] < r || dist[b] < r) continue;
    cplx diff = u.values[b] * std::polar(1.0, -S.frames.transport[e]) -
                u.values[a];
    acc.add(0.5 * S.dec.star1[e] * std::norm(diff));
  }
  return acc.value();
}

// ---- minimization --------------------------------------------------------

namespace {

struct OptProblem {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> grad;
  std::function<void(Eigen::VectorXd&)> project;
  double tau0 = 1e-3;  // initial flow step from a curvature estimate
};

struct OptOutcome {
  Eigen::VectorXd x;
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> history;
};

OptOutcome minimize_vec(const OptProblem& P, Eigen::VectorXd x,
                        const MinimizeEnergyOptions& opts) {
  OptOutcome out;
  P.project(x);
  double E = P.value(x);
  Eigen::VectorXd g(x.size()), xt(x.size()), gt(x.size());
  P.grad(x, g);
  out.history.push_back(E);
  int it = 0;
  auto tol = [&](double energy) {
    return opts.tol_rel * std::max(energy, 1e-6);
  };

  // Stage 1: projected gradient flow with an adaptive step.
  double tau = P.tau0;
  for (; it < opts.flow_steps && it < opts.max_iterations; ++it) {
    double gn = g.norm();
    if (gn < tol(E)) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    for (int tries = 0; tries < 40; ++tries) {
      xt = x - tau * g;
      P.project(xt);
      double Et = P.value(xt);
      if (Et <= E - 1e-4 * tau * gn * gn || Et < E) {
        x.swap(xt);
        E = Et;
        accepted = true;
        tau = std::min(tau * 1.3, 1e6 * P.tau0);
        break;
      }
      tau *= 0.5;
    }
    if (!accepted) break;  // hand over to the quasi-Newton stage
    P.grad(x, g);
    out.history.push_back(E);
  }

  // Stage 2: projected L-BFGS with Armijo backtracking.
  std::deque<Eigen::VectorXd> hist_s, hist_y;
  std::deque<double> hist_rho;
  Eigen::VectorXd d(x.size()), q(x.size());
  bool stalled = false;
  while (!out.converged && it < opts.max_iterations) {
    double gn = g.norm();
    if (gn < tol(E)) {
      out.converged = true;
      break;
    }
    // Two-loop recursion.
    q = -g;
    std::vector<double> alpha_i(hist_s.size());
    for (int i = static_cast<int>(hist_s.size()) - 1; i >= 0; --i) {
      alpha_i[i] = hist_rho[i] * hist_s[i].dot(q);
      q -= alpha_i[i] * hist_y[i];
    }
    if (!hist_s.empty()) {
      double gamma = hist_s.back().dot(hist_y.back()) /
                     hist_y.back().squaredNorm();
      q *= gamma;
    } else {
      q *= tau;
    }
    for (std::size_t i = 0; i < hist_s.size(); ++i) {
      double beta = hist_rho[i] * hist_y[i].dot(q);
      q += (alpha_i[i] - beta) * hist_s[i];
    }
    d = q;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      d = -g;
      slope = -gn * gn;
      hist_s.clear();
      hist_y.clear();
      hist_rho.clear();
    }
    bool accepted = false;
    double alpha = 1.0;
    for (int tries = 0; tries < 40; ++tries) {
      xt = x + alpha * d;
      P.project(xt);
      double Et = P.value(xt);
      if (Et <= E + 1e-4 * alpha * slope || Et < E) {
        P.grad(xt, gt);
        Eigen::VectorXd sv = xt - x;
        Eigen::VectorXd yv = gt - g;
        double sy = sv.dot(yv);
        if (sy > 1e-12 * sv.norm() * yv.norm()) {
          hist_s.push_back(std::move(sv));
          hist_y.push_back(std::move(yv));
          hist_rho.push_back(1.0 / sy);
          if (static_cast<int>(hist_s.size()) > opts.memory) {
            hist_s.pop_front();
            hist_y.pop_front();
            hist_rho.pop_front();
          }
        }
        x.swap(xt);
        g.swap(gt);
        E = Et;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    ++it;
    if (!accepted) {
      stalled = true;
      break;
    }
    out.history.push_back(E);
  }

  out.x = std::move(x);
  out.energy = E;
  out.grad_norm = g.norm();
  out.iterations = it;
  if (out.converged) {
    out.message = "converged";
  } else if (stalled) {
    out.message = "line search stalled before reaching tolerance";
  } else {
    out.message = "iteration budget exhausted";
  }
  return out;
}

}  // namespace

MinimizeEnergyResult minimize_energy(const SurfaceModel& S, EnergyKind kind,
                                     const DiscreteField& init, double eps,
                                     const Potential& F,
                                     const MinimizeEnergyOptions& opts) {
  check_field(S, init);
  if (!(eps > 0.0)) throw InputError("epsilon must be positive");
  if (!F.F || !F.dF) throw InputError("potential must define F and dF");
  if (kind == EnergyKind::Extrinsic && S.kind == SurfaceKind::FlatTorus)
    throw InputError("extrinsic energy requires an embedded surface");
  const long V = static_cast<long>(S.V.size());
  const int NE = static_cast<int>(S.E.size());
  const double cpot = 1.0 / (4.0 * eps * eps);

  // Shared edge data.
  std::vector<cplx> tp(NE);
  for (int e = 0; e < NE; ++e)
    tp[e] = std::polar(1.0, -S.frames.transport[e]);

  // Curvature scale for the first flow step.
  double row_max = 0.0;
  for (long v = 0; v < V; ++v) {
    double s = 0.0;
    for (int e : S.vertex_edges[v]) s += S.dec.star1[e];
    row_max = std::max(row_max, s);
  }
  double star0_max = S.dec.star0.maxCoeff();
  double tau0 = 1.0 / (2.0 * row_max + 2.0 * star0_max / (eps * eps));

  OptProblem P;
  P.tau0 = tau0;
  MinimizeEnergyResult res;

  if (kind == EnergyKind::Micromagnetic) {
    // Variables: ambient 3-vector per vertex, renormalized after each step.
    Eigen::VectorXd x(3 * V);
    for (long v = 0; v < V; ++v) {
      cplx m = init.values[v];
      double a2 = std::norm(m);
      if (a2 > 1.0) {
        m /= std::sqrt(a2);
        a2 = 1.0;
      }
      double mp = std::sqrt(std::max(0.0, 1.0 - a2));
      Vec3 amb = m.real() * S.frames.e1[v] + m.imag() * S.frames.e2[v] +
                 mp * S.frames.normal[v];
      x.segment<3>(3 * v) = amb;
    }
    P.value = [&](const Eigen::VectorXd& y) {
      KahanSum acc;
      for (int e = 0; e < NE; ++e) {
        int a = S.E[e][0], b = S.E[e][1];
        acc.add(0.5 * S.dec.star1[e] *
                (y.segment<3>(3 * b) - y.segment<3>(3 * a)).squaredNorm());
      }
      for (long v = 0; v < V; ++v) {
        double mn = y.segment<3>(3 * v).dot(S.frames.normal[v]);
        acc.add(cpot * S.dec.star0[v] * F.F(1.0 - mn * mn));
      }
      return acc.value();
    };
    P.grad = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
      g.setZero();
      for (int e = 0; e < NE; ++e) {
        int a = S.E[e][0], b = S.E[e][1];
        Eigen::Vector3d dv =
            S.dec.star1[e] * (y.segment<3>(3 * b) - y.segment<3>(3 * a));
        g.segment<3>(3 * a) -= dv;
        g.segment<3>(3 * b) += dv;
      }
      for (long v = 0; v < V; ++v) {
        double mn = y.segment<3>(3 * v).dot(S.frames.normal[v]);
        double w = cpot * S.dec.star0[v] * F.dF(1.0 - mn * mn) * (-2.0) * mn;
        g.segment<3>(3 * v) += w * Eigen::Vector3d(S.frames.normal[v]);
      }
      // Tangential part only: the unit-length constraint absorbs the radial
      // component, which otherwise plateaus the gradient norm at the
      // multiplier size and never meets the stopping tolerance.
      for (long v = 0; v < V; ++v) {
        Eigen::Vector3d M = y.segment<3>(3 * v);
        double n2 = M.squaredNorm();
        if (n2 > 1e-24)
          g.segment<3>(3 * v) -= (g.segment<3>(3 * v).dot(M) / n2) * M;
      }
    };
    P.project = [&](Eigen::VectorXd& y) {
      for (long v = 0; v < V; ++v) {
        double n = y.segment<3>(3 * v).norm();
        if (n < 1e-12)
          y.segment<3>(3 * v) = Eigen::Vector3d(S.frames.normal[v]);
        else
          y.segment<3>(3 * v) /= n;
      }
    };
    OptOutcome oc = minimize_vec(P, std::move(x), opts);
    res.u.surface_hash = S.content_hash;
    res.u.values.resize(V);
    res.Mperp.resize(V);
    for (long v = 0; v < V; ++v) {
      Eigen::Vector3d M = oc.x.segment<3>(3 * v);
      res.u.values[v] = cplx(M.dot(S.frames.e1[v]), M.dot(S.frames.e2[v]));
      res.Mperp[v] = M.dot(S.frames.normal[v]);
    }
    res.energy = oc.energy;
    res.grad_norm = oc.grad_norm;
    res.iterations = oc.iterations;
    res.converged = oc.converged;
    res.message = oc.message;
    res.energy_history = std::move(oc.history);
    return res;
  }

  // Intrinsic / extrinsic: complex site values as interleaved reals.
  std::vector<Eigen::Matrix2d> A;
  if (kind == EnergyKind::Extrinsic) {
    A.resize(S.V.size());
    for (long v = 0; v < V; ++v) {
      Eigen::Matrix2d Sm = shape_matrix_at_vertex(S, static_cast<int>(v));
      A[v] = Sm.transpose() * Sm;
    }
  }
  Eigen::VectorXd x(2 * V);
  for (long v = 0; v < V; ++v) {
    x[2 * v] = init.values[v].real();
    x[2 * v + 1] = init.values[v].imag();
  }
  P.value = [&](const Eigen::VectorXd& y) {
    KahanSum acc;
    for (int e = 0; e < NE; ++e) {
      int a = S.E[e][0], b = S.E[e][1];
      cplx diff = site(y, b) * tp[e] - site(y, a);
      acc.add(0.5 * S.dec.star1[e] * std::norm(diff));
    }
    for (long v = 0; v < V; ++v) {
      double s = y[2 * v] * y[2 * v] + y[2 * v + 1] * y[2 * v + 1];
      double c = cpot * S.dec.star0[v] * F.F(s);
      if (kind == EnergyKind::Extrinsic) {
        Eigen::Vector2d p(y[2 * v], y[2 * v + 1]);
        c += 0.5 * S.dec.star0[v] * p.dot(A[v] * p);
      }
      acc.add(c);
    }
    return acc.value();
  };
  P.grad = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    g.setZero();
    for (int e = 0; e < NE; ++e) {
      int a = S.E[e][0], b = S.E[e][1];
      cplx diff = site(y, b) * tp[e] - site(y, a);
      cplx ga = -S.dec.star1[e] * diff;
      cplx gb = S.dec.star1[e] * diff * std::conj(tp[e]);
      g[2 * a] += ga.real();
      g[2 * a + 1] += ga.imag();
      g[2 * b] += gb.real();
      g[2 * b + 1] += gb.imag();
    }
    for (long v = 0; v < V; ++v) {
      double s = y[2 * v] * y[2 * v] + y[2 * v + 1] * y[2 * v + 1];
      double w = 2.0 * cpot * S.dec.star0[v] * F.dF(s);
      g[2 * v] += w * y[2 * v];
      g[2 * v + 1] += w * y[2 * v + 1];
      if (kind == EnergyKind::Extrinsic) {
        Eigen::Vector2d p(y[2 * v], y[2 * v + 1]);
        Eigen::Vector2d q = S.dec.star0[v] * (A[v] * p);
        g[2 * v] += q.x();
        g[2 * v + 1] += q.y();
      }
    }
  };
  P.project = [&](Eigen::VectorXd& y) {
    for (long v = 0; v < V; ++v) {
      double s = y[2 * v] * y[2 * v] + y[2 * v + 1] * y[2 * v + 1];
      if (s > 1.0) {
        double inv = 1.0 / std::sqrt(s);
        y[2 * v] *= inv;
        y[2 * v + 1] *= inv;
      }
    }
  };
  OptOutcome oc = minimize_vec(P, std::move(x), opts);
  res.u.surface_hash = S.content_hash;
  res.u.values.resize(V);
  for (long v = 0; v < V; ++v)
    res.u.values[v] = site(oc.x, static_cast<int>(v));
  res.energy = oc.energy;
  res.grad_norm = oc.grad_norm;
  res.iterations = oc.iterations;
  res.converged = oc.converged;
  res.message = oc.message;
  res.energy_history = std::move(oc.history);
  return res;
}

DiscreteField random_unit_field(const SurfaceModel& S, std::uint64_t seed) {
  Rng rng(seed);
  DiscreteField u;
  u.surface_hash = S.content_hash;
  u.values.resize(static_cast<long>(S.V.size()));
  for (long v = 0; v < u.values.size(); ++v)
    u.values[v] = std::polar(1.0, rng.uniform(0.0, TWO_PI));
  return u;
}

// ---- radial core profiles ------------------------------------------------

namespace {

// Minimizes  pi * sum_i h_i rbar_i [ (df_i/h_i)^2 + g(fmid)/rbar^2
//                                    + F(g(fmid))/(2 t^2) ]
// with the outer value fixed; g(f) = f^2 (amplitude form) or sin^2 f (angle
// form).  Damped Newton on the tridiagonal system.
ProfileSolution solve_profile(double t, int n, const Potential& P,
                              bool angle_form) {
  if (!(t > 0.0 && t < 0.5))
    throw InputError("profile ratio t must lie in (0, 0.5)");
  if (n < 16) throw InputError("profile grid needs at least 16 points");
  if (!P.F || !P.dF) throw InputError("potential must define F and dF");
  const double rmin = 1e-6;
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i)
    r[i] = rmin * std::pow(1.0 / rmin, i / (n - 1.0));
  r[n - 1] = 1.0;
  const double bc = angle_form ? 0.5 * PI : 1.0;
  Eigen::VectorXd f(n);
  for (int i = 0; i < n; ++i) f[i] = bc * std::min(1.0, r[i] / t);
  f[n - 1] = bc;

  const double ct = 1.0 / (2.0 * t * t);
  auto gfun = [&](double v, double& g0, double& g1, double& g2) {
    if (angle_form) {
      double s = std::sin(v);
      g0 = s * s;
      g1 = std::sin(2.0 * v);
      g2 = 2.0 * std::cos(2.0 * v);
    } else {
      g0 = v * v;
      g1 = 2.0 * v;
      g2 = 2.0;
    }
  };
  auto density = [&](double v, double rbar, double& p0, double& p1,
                     double& p2) {
    double g0, g1, g2;
    gfun(v, g0, g1, g2);
    double F1 = P.dF(g0);
    double F2 = (P.dF(g0 + 1e-6) - P.dF(g0 - 1e-6)) / 2e-6;
    double inv2 = 1.0 / (rbar * rbar);
    p0 = g0 * inv2 + ct * P.F(g0);
    p1 = g1 * inv2 + ct * F1 * g1;
    p2 = g2 * inv2 + ct * (F2 * g1 * g1 + F1 * g2);
  };

  auto energy = [&](const Eigen::VectorXd& y) {
    KahanSum acc;
    for (int i = 0; i + 1 < n; ++i) {
      double h = r[i + 1] - r[i], rbar = 0.5 * (r[i] + r[i + 1]);
      double df = (y[i + 1] - y[i]) / h, fm = 0.5 * (y[i] + y[i + 1]);
      double p0, p1, p2;
      density(fm, rbar, p0, p1, p2);
      acc.add(PI * h * rbar * (df * df + p0));
    }
    return acc.value();
  };

  const int m = n - 1;  // unknowns f[0..m-1]
  Eigen::VectorXd grad(m), diag(m), off(m - 1);
  auto assemble = [&](const Eigen::VectorXd& y) {
    grad.setZero();
    diag.setZero();
    off.setZero();
    for (int i = 0; i + 1 < n; ++i) {
      double h = r[i + 1] - r[i], rbar = 0.5 * (r[i] + r[i + 1]);
      double w = PI * h * rbar;
      double df = (y[i + 1] - y[i]) / h, fm = 0.5 * (y[i] + y[i + 1]);
      double p0, p1, p2;
      density(fm, rbar, p0, p1, p2);
      double gq = 2.0 * w * df / h;  // d/df_{i+1} of the difference part
      double gm = 0.5 * w * p1;
      double hq = 2.0 * w / (h * h);
      double hm = 0.25 * w * p2;
      if (i < m) {
        grad[i] += -gq + gm;
        diag[i] += hq + hm;
      }
      if (i + 1 < m) {
        grad[i + 1] += gq + gm;
        diag[i + 1] += hq + hm;
        off[i] += -hq + hm;
      }
    }
  };

  double E = energy(f);
  double mu = 0.0;
  Eigen::VectorXd lower(m - 1), dvec(m), rhs(m), delta(m), ft(n);
  bool done = false;
  int iter = 0;
  for (; iter < 200 && !done; ++iter) {
    assemble(f);
    double gmax = grad.cwiseAbs().maxCoeff();
    if (gmax <= 1e-10 * std::max(1.0, std::abs(E))) {
      done = true;
      break;
    }
    bool accepted = false;
    for (int attempt = 0; attempt < 25 && !accepted; ++attempt) {
      // Thomas solve of (H + mu I) delta = -grad.
      bool ok = true;
      dvec = diag;
      dvec.array() += mu;
      rhs = -grad;
      for (int i = 1; i < m; ++i) {
        if (dvec[i - 1] <= 0.0) {
          ok = false;
          break;
        }
        double wfac = off[i - 1] / dvec[i - 1];
        dvec[i] -= wfac * off[i - 1];
        rhs[i] -= wfac * rhs[i - 1];
      }
      if (ok && dvec[m - 1] <= 0.0) ok = false;
      if (ok) {
        delta[m - 1] = rhs[m - 1] / dvec[m - 1];
        for (int i = m - 2; i >= 0; --i)
          delta[i] = (rhs[i] - off[i] * delta[i + 1]) / dvec[i];
        double step = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
          ft = f;
          ft.head(m) += step * delta.head(m);
          double Et = energy(ft);
          if (Et < E + 1e-12 * std::abs(E)) {
            f = ft;
            E = Et;
            accepted = true;
            mu = mu * 0.25;
            break;
          }
          step *= 0.5;
        }
      }
      if (!accepted) mu = std::max(mu * 10.0, 1e-8 * diag.maxCoeff());
    }
    if (!accepted)
      throw NumericError("radial profile Newton iteration stalled");
  }
  if (!done) throw NumericError("radial profile did not reach tolerance");

  ProfileSolution sol;
  sol.r = r;
  sol.f = f;
  sol.I_value = E;
  sol.t = t;
  return sol;
}

}  // namespace

ProfileSolution radial_profile_in(double t, int grid_size,
                                  const Potential& F) {
  return solve_profile(t, grid_size, F, false);
}

ProfileSolution radial_profile_mm(double t, int grid_size,
                                  const Potential& F) {
  return solve_profile(t, grid_size, F, true);
}

double iota_intrinsic(const Potential& F, double t) {
  return radial_profile_in(t, 2000, F).I_value + PI * std::log(t);
}

double iota_micromagnetic(const Potential& F, double t) {
  return radial_profile_mm(t, 2000, F).I_value + PI * std::log(t);
}

// ---- energy-expansion validation -----------------------------------------

EnergyReport expansion_report(const GreenEvaluator& gev,
                              const HarmonicBasis& HB, const DiscreteField& u,
                              double eps, const Potential& F, EnergyKind kind,
                              double detect_sigma) {
  const SurfaceModel& S = gev.surface();
  check_field(S, u);
  if (!(eps > 0.0)) throw InputError("epsilon must be positive");

  EnergyReport rep;
  rep.eps = eps;
  switch (kind) {
    case EnergyKind::Intrinsic:
      rep.energy = energy_in(S, u, eps, F).total;
      break;
    case EnergyKind::Extrinsic:
      rep.energy = energy_ex(S, u, eps, F).total;
      break;
    case EnergyKind::Micromagnetic: {
      MMField M;
      M.m = u;
      const long V = static_cast<long>(S.V.size());
      M.Mperp.resize(V);
      for (long v = 0; v < V; ++v) {
        double a2 = std::norm(M.m.values[v]);
        if (a2 > 1.0) {
          M.m.values[v] /= std::sqrt(a2);
          a2 = 1.0;
        }
        M.Mperp[v] = std::sqrt(std::max(0.0, 1.0 - a2));
      }
      rep.energy = energy_mm(S, M, eps, F).total;
      break;
    }
  }

  double sigma =
      detect_sigma > 0.0 ? detect_sigma : std::max(0.3, 2.0 * std::pow(eps, 0.7));
  rep.balls = ball_construction(S, u, eps, sigma);
  int sum_d = 0;
  for (const Ball& b : rep.balls.balls) {
    if (b.degree == 0) continue;
    rep.detected.a.push_back(b.center);
    rep.detected.d.push_back(b.degree);
    rep.n += std::abs(b.degree);
    sum_d += b.degree;
  }
  rep.degrees_match_chi = (sum_d == S.euler_char);
  Eigen::VectorXd raw = flux_integrals(S, HB, u);
  if (!rep.degrees_match_chi) {
    rep.phi = raw;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.W = rep.iota = rep.residual = nan;
    rep.message = "detected degrees sum to " + std::to_string(sum_d) +
                  ", Euler characteristic is " +
                  std::to_string(S.euler_char) +
                  "; minimization has not converged to a vortex state";
    return rep;
  }

  FluxLattice L = lattice(HB, gev, rep.detected);
  rep.phi = L.nearest_point(raw);
  rep.snap_distance = (raw - rep.phi).norm();
  rep.W = W_closed_form(gev, HB, rep.detected, rep.phi).W_closed;
  if (kind == EnergyKind::Extrinsic) {
    CanonicalField CF = build_ustar(gev, HB, rep.detected, rep.phi);
    rep.tildeW = theta_minimize(S, CF).tildeW;
  }
  rep.iota = kind == EnergyKind::Micromagnetic ? iota_micromagnetic(F)
                                               : iota_intrinsic(F);
  rep.residual = rep.energy - rep.n * PI * std::log(1.0 / eps) - rep.W -
                 rep.tildeW - rep.n * rep.iota;
  rep.message = "ok";
  return rep;
}

}  // namespace vortexlab
