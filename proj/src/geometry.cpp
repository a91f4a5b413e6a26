#include "vortexlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <queue>
#include <unordered_map>

namespace vortexlab {

int SurfaceModel::edge_index(int u, int v) const {
  if (u > v) std::swap(u, v);
  for (int e : vertex_edges[u])
    if (E[e][0] == u && E[e][1] == v) return e;
  return -1;
}

Vec3 SurfaceModel::edge_vec(int u, int v) const {
  if (kind == SurfaceKind::FlatTorus) {
    Vec3 d = V[v] - V[u];
    return {wrap_half(d.x()), wrap_half(d.y()), 0.0};
  }
  return V[v] - V[u];
}

std::array<Vec3, 3> SurfaceModel::face_corners(int f) const {
  const auto& fc = F[f];
  Vec3 c0 = V[fc[0]];
  return {c0, c0 + edge_vec(fc[0], fc[1]), c0 + edge_vec(fc[0], fc[2])};
}

Vec3 SurfaceModel::face_center(int f) const {
  auto c = face_corners(f);
  Vec3 b = (c[0] + c[1] + c[2]) / 3.0;
  if (kind == SurfaceKind::FlatTorus) return {frac(b.x()), frac(b.y()), 0.0};
  return b;
}

static double corner_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  // angle at a; atan2 form stays accurate for thin corners
  Vec3 u = b - a, v = c - a;
  return std::atan2(u.cross(v).norm(), u.dot(v));
}

SurfaceModel build_surface(SurfaceKind kind, MeshData mesh) {
  SurfaceModel S;
  S.kind = kind;
  S.analytic = kind != SurfaceKind::TriMesh;
  S.V = std::move(mesh.vertices);
  S.F = std::move(mesh.faces);
  const int nv = static_cast<int>(S.V.size());
  const int nf = static_cast<int>(S.F.size());
  if (nv < 4 || nf < 4) throw InputError("mesh too small to be a closed surface");

  for (const auto& f : S.F) {
    for (int k = 0; k < 3; ++k)
      if (f[k] < 0 || f[k] >= nv) throw InputError("face references missing vertex");
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw InputError("face repeats a vertex");
  }

  // Directed half-edges: uniqueness gives manifoldness, pairing gives a
  // closed oriented surface.
  std::unordered_map<std::uint64_t, int> half;  // (u,v) -> face
  half.reserve(3 * S.F.size());
  auto hkey = [nv](int u, int v) {
    return static_cast<std::uint64_t>(u) * static_cast<std::uint64_t>(nv) + v;
  };
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int u = S.F[f][k], v = S.F[f][(k + 1) % 3];
      if (!half.emplace(hkey(u, v), f).second)
        throw InputError("nonmanifold or inconsistently oriented mesh");
    }
  }
  for (const auto& [key, f] : half) {
    (void)f;
    int u = static_cast<int>(key / nv), v = static_cast<int>(key % nv);
    if (!half.count(hkey(v, u))) throw InputError("mesh has boundary");
  }

  // Canonical edge list.
  std::vector<std::array<int, 2>> edges;
  edges.reserve(half.size() / 2);
  for (const auto& [key, f] : half) {
    (void)f;
    int u = static_cast<int>(key / nv), v = static_cast<int>(key % nv);
    if (u < v) edges.push_back({u, v});
  }
  std::sort(edges.begin(), edges.end());
  S.E = std::move(edges);
  const int ne = static_cast<int>(S.E.size());

  S.euler_char = nv - ne + nf;
  if (S.euler_char != 2 && S.euler_char != 0)
    throw InputError("surface must have genus 0 or 1, got chi = " +
                     std::to_string(S.euler_char));
  S.genus = (2 - S.euler_char) / 2;

  std::unordered_map<std::uint64_t, int> eidx;
  eidx.reserve(S.E.size());
  for (int e = 0; e < ne; ++e) eidx[hkey(S.E[e][0], S.E[e][1])] = e;

  S.vertex_edges.assign(nv, {});
  for (int e = 0; e < ne; ++e) {
    S.vertex_edges[S.E[e][0]].push_back(e);
    S.vertex_edges[S.E[e][1]].push_back(e);
  }

  S.edge_faces.assign(ne, {-1, -1});
  S.face_edges.assign(nf, {});
  S.face_edge_sign.assign(nf, {});
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int u = S.F[f][k], v = S.F[f][(k + 1) % 3];
      int e = eidx.at(hkey(std::min(u, v), std::max(u, v)));
      S.face_edges[f][k] = e;
      S.face_edge_sign[f][k] = (u < v) ? 1 : -1;
      S.edge_faces[e][(u < v) ? 0 : 1] = f;
    }
  }

  // Geometry of faces and edges.
  S.face_area.resize(nf);
  double mean_area = 0.0;
  for (int f = 0; f < nf; ++f) {
    auto c = S.face_corners(f);
    S.face_area[f] = 0.5 * (c[1] - c[0]).cross(c[2] - c[0]).norm();
    mean_area += S.face_area[f] / nf;
  }
  for (int f = 0; f < nf; ++f)
    if (S.face_area[f] < 1e-14 * mean_area)
      throw InputError("degenerate triangle at face " + std::to_string(f));

  S.edge_length.resize(ne);
  KahanSum area_sum, len_sum;
  for (int e = 0; e < ne; ++e) {
    S.edge_length[e] = S.edge_vec(S.E[e][0], S.E[e][1]).norm();
    len_sum.add(S.edge_length[e]);
  }
  for (int f = 0; f < nf; ++f) area_sum.add(S.face_area[f]);
  S.total_area = area_sum.value();
  S.mean_edge_length = len_sum.value() / ne;

  // Cyclic one-rings from the face orientation: in face (v, b, c) the
  // successor of b around v is c.
  S.vertex_ring.assign(nv, {});
  {
    std::vector<std::unordered_map<int, int>> succ(nv);
    for (int f = 0; f < nf; ++f)
      for (int k = 0; k < 3; ++k) {
        int v = S.F[f][k], b = S.F[f][(k + 1) % 3], c = S.F[f][(k + 2) % 3];
        succ[v][b] = c;
      }
    for (int v = 0; v < nv; ++v) {
      auto& m = succ[v];
      if (m.empty()) throw InputError("isolated vertex " + std::to_string(v));
      int start = m.begin()->first, cur = start;
      std::vector<int> ring;
      do {
        ring.push_back(cur);
        auto it = m.find(cur);
        if (it == m.end()) throw InputError("open vertex star");
        cur = it->second;
        if (ring.size() > m.size()) throw InputError("nonmanifold vertex star");
      } while (cur != start);
      if (ring.size() != m.size()) throw InputError("nonmanifold vertex star");
      S.vertex_ring[v] = std::move(ring);
    }
  }

  // Corner angles per face, reused for frames and for the DEC stars.
  std::vector<std::array<double, 3>> cangle(nf);
  for (int f = 0; f < nf; ++f) {
    auto c = S.face_corners(f);
    cangle[f][0] = corner_angle(c[0], c[1], c[2]);
    cangle[f][1] = corner_angle(c[1], c[2], c[0]);
    cangle[f][2] = corner_angle(c[2], c[0], c[1]);
  }
  auto face_corner_of = [&](int f, int v) {
    for (int k = 0; k < 3; ++k)
      if (S.F[f][k] == v) return k;
    throw InputError("vertex not in face");
  };

  // Frames.
  auto& fr = S.frames;
  fr.e1.resize(nv);
  fr.e2.resize(nv);
  fr.normal.resize(nv);
  fr.defect.assign(nv, 0.0);
  fr.transport.assign(ne, 0.0);
  fr.face_holonomy.assign(nf, 0.0);

  if (kind == SurfaceKind::FlatTorus) {
    for (int v = 0; v < nv; ++v) {
      fr.e1[v] = {1, 0, 0};
      fr.e2[v] = {0, 1, 0};
      fr.normal[v] = {0, 0, 1};
    }
    // Global flat chart: transport, defects and holonomies vanish exactly.
  } else {
    std::vector<Vec3> face_normal(nf);
    for (int f = 0; f < nf; ++f) {
      auto c = S.face_corners(f);
      face_normal[f] = (c[1] - c[0]).cross(c[2] - c[0]).normalized();
    }
    for (int v = 0; v < nv; ++v) {
      Vec3 n = Vec3::Zero();
      if (kind == SurfaceKind::UnitSphere) {
        n = S.V[v].normalized();
      } else {
        const auto& ring = S.vertex_ring[v];
        int m = static_cast<int>(ring.size());
        for (int i = 0; i < m; ++i) {
          int b = ring[i], c = ring[(i + 1) % m];
          int f = half.at(hkey(v, b));
          (void)c;
          n += cangle[f][face_corner_of(f, v)] * face_normal[f];
        }
        n.normalize();
      }
      int axis = 0;
      for (int k = 1; k < 3; ++k)
        if (std::abs(n[k]) < std::abs(n[axis])) axis = k;
      Vec3 r = Vec3::Unit(axis);
      fr.normal[v] = n;
      fr.e1[v] = (r - r.dot(n) * n).normalized();
      fr.e2[v] = n.cross(fr.e1[v]);
    }

    // Normalized polar angles of the outgoing edges: walking the ring adds
    // the corner angle of the face in between, then the whole star is scaled
    // to total turning 2*pi.  The chart is anchored to the frame direction
    // of the first ring edge, so frame components and transport agree up to
    // the cone distortion.
    std::vector<std::unordered_map<int, double>> out_angle(nv);
    for (int v = 0; v < nv; ++v) {
      const auto& ring = S.vertex_ring[v];
      int m = static_cast<int>(ring.size());
      std::vector<double> cum(m, 0.0);
      KahanSum tot;
      for (int i = 0; i < m; ++i) {
        int b = ring[i];
        int f = half.at(hkey(v, b));  // face (v, b, next)
        double a = cangle[f][face_corner_of(f, v)];
        tot.add(a);
        if (i + 1 < m) cum[i + 1] = cum[i] + a;
      }
      double theta_v = tot.value();
      fr.defect[v] = TWO_PI - theta_v;
      double scale = TWO_PI / theta_v;
      Vec3 d0 = S.edge_vec(v, ring[0]);
      double base = std::atan2(d0.dot(fr.e2[v]), d0.dot(fr.e1[v]));
      auto& oa = out_angle[v];
      oa.reserve(m);
      for (int i = 0; i < m; ++i) oa[ring[i]] = base + scale * cum[i];
    }
    for (int e = 0; e < ne; ++e) {
      int u = S.E[e][0], v = S.E[e][1];
      fr.transport[e] =
          principal_angle(out_angle[v].at(u) + PI - out_angle[u].at(v));
    }
    for (int f = 0; f < nf; ++f) {
      double h = 0.0;
      for (int k = 0; k < 3; ++k)
        h += S.face_edge_sign[f][k] * fr.transport[S.face_edges[f][k]];
      fr.face_holonomy[f] = principal_angle(h);
    }
  }

  // DEC operators.
  auto& dec = S.dec;
  dec.star2.resize(nf);
  for (int f = 0; f < nf; ++f) dec.star2[f] = 1.0 / S.face_area[f];

  dec.star1.setZero(ne);
  for (int f = 0; f < nf; ++f) {
    auto c = S.face_corners(f);
    for (int k = 0; k < 3; ++k) {
      int e = S.face_edges[f][k];
      double opp = cangle[f][(k + 2) % 3];  // angle opposite edge (k, k+1)
      double w = 0.5 / std::tan(opp);
      if (!(w > 0.0)) {
        // Obtuse corner: fall back to the barycentric dual length for this
        // face so the diagonal star stays positive definite.
        Vec3 mid = 0.5 * (c[k] + c[(k + 1) % 3]);
        Vec3 bary = (c[0] + c[1] + c[2]) / 3.0;
        w = (bary - mid).norm() / (c[(k + 1) % 3] - c[k]).norm();
      }
      dec.star1[e] += w;
    }
  }
  for (int e = 0; e < ne; ++e)
    if (!(dec.star1[e] > 0.0))
      throw NumericError("nonpositive edge star at edge " + std::to_string(e));

  dec.star0.setZero(nv);
  for (int f = 0; f < nf; ++f) {
    auto c = S.face_corners(f);
    bool obtuse = cangle[f][0] > PI / 2 || cangle[f][1] > PI / 2 ||
                  cangle[f][2] > PI / 2;
    for (int k = 0; k < 3; ++k) {
      double contrib;
      if (!obtuse) {
        // Voronoi area: (|vb|^2 cot(angle at c) + |vc|^2 cot(angle at b)) / 8
        double lb = (c[(k + 1) % 3] - c[k]).squaredNorm();
        double lc = (c[(k + 2) % 3] - c[k]).squaredNorm();
        contrib = (lb / std::tan(cangle[f][(k + 2) % 3]) +
                   lc / std::tan(cangle[f][(k + 1) % 3])) /
                  8.0;
      } else if (cangle[f][k] > PI / 2) {
        contrib = S.face_area[f] / 2.0;
      } else {
        contrib = S.face_area[f] / 4.0;
      }
      dec.star0[S.F[f][k]] += contrib;
    }
  }

  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(2 * ne);
    for (int e = 0; e < ne; ++e) {
      t.emplace_back(e, S.E[e][0], -1.0);
      t.emplace_back(e, S.E[e][1], 1.0);
    }
    dec.d0.resize(ne, nv);
    dec.d0.setFromTriplets(t.begin(), t.end());
  }
  {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(3 * nf);
    for (int f = 0; f < nf; ++f)
      for (int k = 0; k < 3; ++k)
        t.emplace_back(f, S.face_edges[f][k],
                       static_cast<double>(S.face_edge_sign[f][k]));
    dec.d1.resize(nf, ne);
    dec.d1.setFromTriplets(t.begin(), t.end());
  }
  dec.L0 = dec.d0.transpose() * dec.star1.asDiagonal() * dec.d0;
  dec.L0.makeCompressed();

  // Content hash over coordinates and connectivity.
  {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const void* p, std::size_t n) {
      h = fnv1a64({static_cast<const char*>(p), n}, h);
    };
    for (const auto& p : S.V) {
      double c[3] = {p.x(), p.y(), p.z()};
      mix(c, sizeof c);
    }
    for (const auto& f : S.F) mix(f.data(), sizeof(int) * 3);
    S.content_hash = h;
  }
  return S;
}

SurfaceModel make_flat_torus(int n) {
  SurfaceModel S = build_surface(SurfaceKind::FlatTorus, flat_torus_grid(n));
  S.resolution = n;
  return S;
}

SurfaceModel make_unit_sphere(int level) {
  SurfaceModel S = build_surface(SurfaceKind::UnitSphere, icosphere(level));
  S.resolution = level;
  return S;
}

SurfaceModel make_trimesh(const std::string& off_path) {
  SurfaceModel S = build_surface(SurfaceKind::TriMesh, read_off(off_path));
  S.mesh_path = off_path;
  return S;
}

double total_defect(const SurfaceModel& S) {
  if (S.kind == SurfaceKind::FlatTorus) return 0.0;
  KahanSum s;
  for (double d : S.frames.defect) s.add(d);
  return s.value();
}

double gaussian_curvature(const SurfaceModel& S, const Point& x) {
  switch (S.kind) {
    case SurfaceKind::FlatTorus:
      return 0.0;
    case SurfaceKind::UnitSphere:
      return 1.0;
    default: {
      int v = x.vertex;
      if (v < 0) throw InputError("mesh curvature query needs a vertex point");
      return S.frames.defect[v] / S.dec.star0[v];
    }
  }
}

double transport_angle(const SurfaceModel& S, int u, int v) {
  int e = S.edge_index(u, v);
  if (e < 0) throw InputError("transport requested across a non-edge");
  double rho = S.frames.transport[e];
  return (u < v) ? rho : -rho;
}

cplx transport_along(const SurfaceModel& S, const std::vector<int>& path,
                     cplx z0) {
  cplx z = z0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    z *= std::polar(1.0, transport_angle(S, path[i], path[i + 1]));
  return z;
}

void analytic_frame(const SurfaceModel& S, const Point& x, Vec3& e1, Vec3& e2,
                    Vec3& n) {
  if (S.kind == SurfaceKind::FlatTorus) {
    e1 = {1, 0, 0};
    e2 = {0, 1, 0};
    n = {0, 0, 1};
    return;
  }
  if (S.kind != SurfaceKind::UnitSphere)
    throw InputError("analytic frame undefined for triangulated surfaces");
  n = x.pos.normalized();
  int axis = 0;
  for (int k = 1; k < 3; ++k)
    if (std::abs(n[k]) < std::abs(n[axis])) axis = k;
  Vec3 r = Vec3::Unit(axis);
  e1 = (r - r.dot(n) * n).normalized();
  e2 = n.cross(e1);
}

// ---- geodesic distance --------------------------------------------------

namespace {

// Edge graph of the once-subdivided mesh (vertices + edge midpoints); its
// shortest paths over-estimate geodesics by O(h) which suffices for the
// validation uses.
struct GeodesicGraph {
  std::vector<std::vector<std::pair<int, double>>> adj;

  explicit GeodesicGraph(const SurfaceModel& S) {
    int nv = static_cast<int>(S.V.size());
    int ne = static_cast<int>(S.E.size());
    adj.resize(nv + ne);
    auto link = [this](int a, int b, double w) {
      adj[a].push_back({b, w});
      adj[b].push_back({a, w});
    };
    for (int e = 0; e < ne; ++e) {
      link(S.E[e][0], nv + e, 0.5 * S.edge_length[e]);
      link(nv + e, S.E[e][1], 0.5 * S.edge_length[e]);
    }
    for (int f = 0; f < static_cast<int>(S.F.size()); ++f) {
      auto c = S.face_corners(f);
      for (int k = 0; k < 3; ++k) {
        int e1 = S.face_edges[f][k], e2 = S.face_edges[f][(k + 1) % 3];
        Vec3 m1 = 0.5 * (c[k] + c[(k + 1) % 3]);
        Vec3 m2 = 0.5 * (c[(k + 1) % 3] + c[(k + 2) % 3]);
        link(nv + e1, nv + e2, (m2 - m1).norm());
        link(nv + e1, S.F[f][(k + 2) % 3], (c[(k + 2) % 3] - m1).norm());
      }
    }
  }

  double dist(int a, int b) const {
    std::vector<double> d(adj.size(), std::numeric_limits<double>::infinity());
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> q;
    d[a] = 0.0;
    q.push({0.0, a});
    while (!q.empty()) {
      auto [dd, x] = q.top();
      q.pop();
      if (dd > d[x]) continue;
      if (x == b) return dd;
      for (auto [y, w] : adj[x])
        if (d[x] + w < d[y]) {
          d[y] = d[x] + w;
          q.push({d[y], y});
        }
    }
    return d[b];
  }
};

int nearest_vertex(const SurfaceModel& S, const Point& p) {
  if (p.vertex >= 0) return p.vertex;
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (int v = 0; v < static_cast<int>(S.V.size()); ++v) {
    double d = (S.V[v] - p.pos).squaredNorm();
    if (d < bd) {
      bd = d;
      best = v;
    }
  }
  return best;
}

std::map<std::uint64_t, std::shared_ptr<GeodesicGraph>>& geo_cache() {
  static std::map<std::uint64_t, std::shared_ptr<GeodesicGraph>> c;
  return c;
}

}  // namespace

double geodesic_dist(const SurfaceModel& S, const Point& x, const Point& y) {
  switch (S.kind) {
    case SurfaceKind::FlatTorus: {
      double px = x.vertex >= 0 ? S.V[x.vertex].x() : x.pos.x();
      double py = x.vertex >= 0 ? S.V[x.vertex].y() : x.pos.y();
      double qx = y.vertex >= 0 ? S.V[y.vertex].x() : y.pos.x();
      double qy = y.vertex >= 0 ? S.V[y.vertex].y() : y.pos.y();
      return std::hypot(wrap_half(qx - px), wrap_half(qy - py));
    }
    case SurfaceKind::UnitSphere: {
      Vec3 p = (x.vertex >= 0 ? S.V[x.vertex] : x.pos).normalized();
      Vec3 q = (y.vertex >= 0 ? S.V[y.vertex] : y.pos).normalized();
      return std::atan2(p.cross(q).norm(), p.dot(q));
    }
    default: {
      auto& cache = geo_cache();
      auto it = cache.find(S.content_hash);
      if (it == cache.end())
        it = cache.emplace(S.content_hash, std::make_shared<GeodesicGraph>(S))
                 .first;
      return it->second->dist(nearest_vertex(S, x), nearest_vertex(S, y));
    }
  }
}

SpMat pin_first(const SpMat& L) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(L.nonZeros() + 1);
  for (int k = 0; k < L.outerSize(); ++k)
    for (SpMat::InnerIterator it(L, k); it; ++it)
      if (it.row() != 0 && it.col() != 0)
        t.emplace_back(it.row(), it.col(), it.value());
  t.emplace_back(0, 0, 1.0);
  SpMat M(L.rows(), L.cols());
  M.setFromTriplets(t.begin(), t.end());
  return M;
}

}  // namespace vortexlab
