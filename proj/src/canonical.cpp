#include "vortexlab/canonical.hpp"

#include <algorithm>
#include <queue>

namespace vortexlab {

namespace {

void require_same_surface(const SurfaceModel& S, const HarmonicBasis& HB) {
  if (HB.surface_hash != S.content_hash)
    throw InputError("harmonic basis was built for a different surface");
}

// Ancestor chain v, parent(v), ..., root.
std::vector<int> chain_to_root(const std::vector<int>& parent, int v) {
  std::vector<int> c;
  for (int x = v; x != -1; x = parent[x]) c.push_back(x);
  return c;
}

// Cycle closed by the non-tree edge (a, b): a .. lca .. b, a.
std::vector<int> fundamental_cycle(const std::vector<int>& parent, int a,
                                   int b) {
  std::vector<int> ca = chain_to_root(parent, a);
  std::vector<int> cb = chain_to_root(parent, b);
  std::size_t ia = ca.size(), ib = cb.size();
  while (ia > 0 && ib > 0 && ca[ia - 1] == cb[ib - 1]) {
    --ia;
    --ib;
  }
  // ca[0..ia] ends at the LCA; cb[0..ib-1] is the other branch, deepest first.
  std::vector<int> cyc(ca.begin(), ca.begin() + static_cast<long>(ia) + 1);
  for (std::size_t k = ib; k-- > 0;) cyc.push_back(cb[k]);
  cyc.push_back(a);
  return cyc;
}

}  // namespace

DiscreteForm jstar(const GreenEvaluator& gev, const HarmonicBasis& HB,
                   const VortexConfig& cfg, const Eigen::VectorXd& phi) {
  const SurfaceModel& S = gev.surface();
  require_same_surface(S, HB);
  if (phi.size() != static_cast<Eigen::Index>(2 * S.genus))
    throw InputError("flux vector length must be twice the genus");
  if (!phi.allFinite()) throw InputError("flux vector must be finite");
  PsiField pf = psi_field(gev, cfg);
  DiscreteForm j = pf.dstar_psi;
  for (int k = 0; k < 2 * S.genus; ++k)
    j.values += phi[k] * HB.forms[static_cast<std::size_t>(k)].values;
  return j;
}

Eigen::VectorXd vortex_distance_field(const SurfaceModel& S,
                                      const VortexConfig& cfg) {
  const auto nv = static_cast<Eigen::Index>(S.V.size());
  Eigen::VectorXd dist(nv);
  if (S.kind != SurfaceKind::TriMesh) {
    for (Eigen::Index v = 0; v < nv; ++v) {
      Point p{S.V[static_cast<std::size_t>(v)], -1};
      double best = 1e300;
      for (const auto& a : cfg.a) best = std::min(best, geodesic_dist(S, p, a));
      dist[v] = best;
    }
    return dist;
  }
  dist.setConstant(1e300);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
  for (const auto& a : cfg.a) {
    if (a.vertex < 0 || a.vertex >= nv)
      throw InputError("mesh vortices must be pinned to vertices");
    dist[a.vertex] = 0.0;
    pq.push({0.0, a.vertex});
  }
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (int e : S.vertex_edges[static_cast<std::size_t>(v)]) {
      int w = S.E[static_cast<std::size_t>(e)][0] == v
                  ? S.E[static_cast<std::size_t>(e)][1]
                  : S.E[static_cast<std::size_t>(e)][0];
      double nd = d + S.edge_length[static_cast<std::size_t>(e)];
      if (nd < dist[w]) {
        dist[w] = nd;
        pq.push({nd, w});
      }
    }
  }
  return dist;
}

cplx holonomy_transport(const SurfaceModel& S, const DiscreteForm& j,
                        const std::vector<int>& path, cplx v0,
                        const VortexConfig& cfg, double r_min) {
  if (path.empty()) throw InputError("empty transport path");
  Eigen::VectorXd dist = vortex_distance_field(S, cfg);
  for (int v : path) {
    if (v < 0 || v >= static_cast<int>(S.V.size()))
      throw InputError("transport path vertex out of range");
    if (dist[v] < r_min)
      throw InputError("transport path enters the vortex exclusion radius");
  }
  KahanSum ang;
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    int u = path[s], v = path[s + 1];
    int e = S.edge_index(u, v);
    if (e < 0) throw InputError("transport path leaves the edge graph");
    double sign = (u == S.E[static_cast<std::size_t>(e)][0]) ? 1.0 : -1.0;
    ang.add(sign * j.values[e]);
    ang.add(transport_angle(S, u, v));
  }
  return v0 * std::polar(1.0, ang.value());
}

CanonicalField build_ustar(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg, const Eigen::VectorXd& phi,
                           cplx base_vector) {
  const SurfaceModel& S = gev.surface();
  require_same_surface(S, HB);
  validate_config(S, cfg);

  FluxLattice L = lattice(HB, gev, cfg);
  if (S.genus > 0) {
    if (phi.size() != L.zeta.size())
      throw InputError("flux vector length must be twice the genus");
    Eigen::VectorXd q = L.alpha * phi + L.zeta;
    int worst = 0;
    double defect = 0.0;
    for (Eigen::Index l = 0; l < q.size(); ++l) {
      double d = dist_to_2pi_lattice(q[l]);
      if (d > defect) {
        defect = d;
        worst = static_cast<int>(l);
      }
    }
    if (defect > L.tol) {
      throw InputError(
          "flux vector is off the quantization lattice: row " +
          std::to_string(worst + 1) + " defect " + fmt_g17(defect));
    }
  } else if (phi.size() != 0) {
    throw InputError("flux vector must be empty on a genus-0 surface");
  }

  CanonicalField out;
  out.jstar = jstar(gev, HB, cfg, phi);
  out.cfg = cfg;
  out.phi = phi;
  out.base_vector = base_vector;

  const int nv = static_cast<int>(S.V.size());
  Eigen::VectorXd dist = vortex_distance_field(S, cfg);
  int base = 0;
  for (int v = 1; v < nv; ++v)
    if (dist[v] > dist[base]) base = v;
  out.base_vertex = base;

  std::vector<int> parent(static_cast<std::size_t>(nv), -1);
  std::vector<char> seen(static_cast<std::size_t>(nv), 0);
  std::vector<char> in_tree(S.E.size(), 0);
  out.field.surface_hash = S.content_hash;
  out.field.values.resize(nv);
  out.field.values.setZero();
  out.field.values[base] = base_vector;
  seen[static_cast<std::size_t>(base)] = 1;
  std::queue<int> q;
  q.push(base);
  std::vector<std::pair<int, int>> nbrs;  // (vertex, edge), sorted by vertex
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    nbrs.clear();
    for (int e : S.vertex_edges[static_cast<std::size_t>(v)]) {
      int w = S.E[static_cast<std::size_t>(e)][0] == v
                  ? S.E[static_cast<std::size_t>(e)][1]
                  : S.E[static_cast<std::size_t>(e)][0];
      nbrs.push_back({w, e});
    }
    std::sort(nbrs.begin(), nbrs.end());
    for (auto [w, e] : nbrs) {
      if (seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = 1;
      parent[static_cast<std::size_t>(w)] = v;
      in_tree[static_cast<std::size_t>(e)] = 1;
      double sign = (v == S.E[static_cast<std::size_t>(e)][0]) ? 1.0 : -1.0;
      double ang = sign * out.jstar.values[e] + transport_angle(S, v, w);
      out.field.values[w] = out.field.values[v] * std::polar(1.0, ang);
      q.push(w);
    }
  }

  std::vector<int> cotree;
  for (std::size_t e = 0; e < S.E.size(); ++e)
    if (!in_tree[e]) cotree.push_back(static_cast<int>(e));
  std::vector<char> is_vortex(static_cast<std::size_t>(nv), 0);
  if (S.kind == SurfaceKind::TriMesh)
    for (const auto& a : cfg.a) is_vortex[static_cast<std::size_t>(a.vertex)] = 1;

  Rng rng(0xA0D17u);
  int audited = 0;
  for (int trial = 0; trial < 400 && audited < 20; ++trial) {
    int e = cotree[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(cotree.size()) - 1))];
    int a = S.E[static_cast<std::size_t>(e)][0];
    int b = S.E[static_cast<std::size_t>(e)][1];
    if (S.kind == SurfaceKind::TriMesh) {
      std::vector<int> cyc = fundamental_cycle(parent, a, b);
      bool blocked = false;
      for (int v : cyc)
        if (is_vortex[static_cast<std::size_t>(v)]) blocked = true;
      if (blocked) continue;  // fractional holonomy through a vortex star
    }
    double ang = out.jstar.values[e] + transport_angle(S, a, b);
    cplx w = out.field.values[a] * std::polar(1.0, ang);
    double defect =
        std::abs(std::arg(w * std::conj(out.field.values[b])));
    out.max_audit_defect = std::max(out.max_audit_defect, defect);
    ++audited;
  }
  if (audited == 0)
    throw NumericError("no admissible holonomy audit cycle found");
  if (out.max_audit_defect >= 1e-2)
    throw NumericError("holonomy audit failed: worst loop defect " +
                       fmt_g17(out.max_audit_defect));

  KahanSum num, den;
  for (std::size_t e = 0; e < S.E.size(); ++e) {
    int A = S.E[e][0], B = S.E[e][1];
    double rho = transport_angle(S, A, B);
    double jd = std::imag(std::conj(out.field.values[A]) *
                          out.field.values[B] * std::polar(1.0, -rho));
    double r = jd - out.jstar.values[static_cast<Eigen::Index>(e)];
    num.add(S.dec.star1[static_cast<Eigen::Index>(e)] * r * r);
    den.add(S.dec.star1[static_cast<Eigen::Index>(e)] *
            out.jstar.values[static_cast<Eigen::Index>(e)] *
            out.jstar.values[static_cast<Eigen::Index>(e)]);
  }
  out.current_rel_l2 = std::sqrt(num.value() / std::max(den.value(), 1e-300));
  return out;
}

}  // namespace vortexlab
