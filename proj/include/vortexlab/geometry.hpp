#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vortexlab/util.hpp"

namespace vortexlab {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using SpMat = Eigen::SparseMatrix<double>;

enum class SurfaceKind { FlatTorus, UnitSphere, TriMesh };

// A sample site on a surface.  Analytic kinds admit arbitrary positions
// (flat torus: (x, y, 0) with coordinates mod 1; sphere: |pos| = 1); a
// nonnegative `vertex` pins the point to a mesh vertex, which triangulated
// surfaces require for operations that lump sources at vertices.
struct Point {
  Vec3 pos = Vec3::Zero();
  int vertex = -1;

  static Point torus(double x, double y) { return {{frac(x), frac(y), 0.0}, -1}; }
  static Point at_vertex(int v) { return {Vec3::Zero(), v}; }
};

// Raw triangle soup; `build_surface` turns it into a SurfaceModel.
struct MeshData {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

// Per-vertex orthonormal tangent frames plus the Levi-Civita transport
// angles that connect them.
//
// Angles at a cone vertex are normalized by 2*pi / (total corner angle), so
// parallel transport around a vertex star picks up exactly the angle defect
// and the face holonomies sum to 2*pi*chi.
struct FrameAtlas {
  std::vector<Vec3> e1, e2, normal;   // e2 = normal x e1
  std::vector<double> transport;      // per canonical edge (u < v): rho_(u,v)
  std::vector<double> defect;         // per-vertex angle defect
  std::vector<double> face_holonomy;  // principal value of the edge-transport
                                      // sum around each oriented face
};

// Diagonal Hodge stars and exterior derivatives of the primal complex.
// star1 uses the cotangent weights with a barycentric fallback keeping every
// entry strictly positive; star0 is the mixed-Voronoi vertex area.
struct DecOps {
  SpMat d0;                     // edges x vertices
  SpMat d1;                     // faces x edges
  Eigen::VectorXd star0;        // vertex areas
  Eigen::VectorXd star1;        // edge weights
  Eigen::VectorXd star2;        // 1 / face area
  SpMat L0;                     // d0^T star1 d0, the cotangent Laplacian
};

struct SurfaceModel {
  SurfaceKind kind = SurfaceKind::TriMesh;
  int resolution = 0;      // grid size n (torus) or subdivision level (sphere)
  std::string mesh_path;   // source file, if loaded
  int genus = 0;
  int euler_char = 0;
  double total_area = 0.0;
  double mean_edge_length = 0.0;
  bool analytic = false;   // closed-form metric data available

  std::vector<Vec3> V;
  std::vector<std::array<int, 3>> F;   // consistently oriented (outward CCW)
  std::vector<std::array<int, 2>> E;   // canonical edges, E[e][0] < E[e][1]

  // Adjacency.  edge_faces[e] = {left, right} with `left` the face that
  // traverses e in its canonical direction.  vertex_ring[v] lists neighbors
  // in cyclic order matching face orientation.
  std::vector<std::array<int, 2>> edge_faces;
  std::vector<std::vector<int>> vertex_edges;
  std::vector<std::vector<int>> vertex_ring;
  std::vector<std::array<int, 3>> face_edges;
  std::vector<std::array<int, 3>> face_edge_sign;

  std::vector<double> face_area;
  std::vector<double> edge_length;

  FrameAtlas frames;
  DecOps dec;

  std::uint64_t content_hash = 0;  // over vertex coordinates and faces

  int edge_index(int u, int v) const;  // -1 if absent
  // Displacement from vertex u to vertex v as used by the metric (flat torus
  // wraps each coordinate to [-1/2, 1/2)).
  Vec3 edge_vec(int u, int v) const;
  // Corner positions of face f in a common chart (torus faces unwrap around
  // their first corner).
  std::array<Vec3, 3> face_corners(int f) const;
  Vec3 face_center(int f) const;
};

// Value of a discrete k-form.  1-forms are stored on canonical edge
// orientations; reading an edge against orientation negates, so reversal
// antisymmetry holds by construction.
struct DiscreteForm {
  int degree = 1;
  Eigen::VectorXd values;
};

// ---- construction -------------------------------------------------------

// n x n periodic grid on the unit square with rows offset by half a cell,
// so every corner angle stays acute and all cotangent weights positive.
// n must be even and >= 4.
MeshData flat_torus_grid(int n);

// Icosphere: `level` loop subdivisions of the icosahedron, vertices projected
// to the unit sphere.
MeshData icosphere(int level);

// Embedded genus-1 test surface: tube radius r around a circle of radius R.
MeshData torus_of_revolution(double R, double r, int nu, int nv);

// Icosphere scaled by (ax, ay, az).
MeshData ellipsoid(double ax, double ay, double az, int level);

MeshData read_off(const std::string& path);
void write_off(const std::string& path, const MeshData& mesh);

// Validates (closed, oriented, manifold, genus <= 1, no degenerate faces),
// then assembles adjacency, frames, transport angles and DEC operators.
SurfaceModel build_surface(SurfaceKind kind, MeshData mesh);

SurfaceModel make_flat_torus(int n);
SurfaceModel make_unit_sphere(int level);
SurfaceModel make_trimesh(const std::string& off_path);

// ---- metric queries -----------------------------------------------------

// Exact on the analytic kinds; Dijkstra on the once-subdivided edge graph
// for triangulated surfaces (an upper bound within a few percent, adequate
// for validation distances, not for quadrature).
double geodesic_dist(const SurfaceModel& S, const Point& x, const Point& y);

// Gaussian curvature lumped at vertices: angle defect / vertex area.
// Analytic kinds report the exact value (0 and 1).
double gaussian_curvature(const SurfaceModel& S, const Point& x);

// Parallel transport of a tangent vector along a vertex path (consecutive
// entries must share an edge).  `z0` is in the frame of path.front(); the
// result is in the frame of path.back().
cplx transport_along(const SurfaceModel& S, const std::vector<int>& path,
                     cplx z0);

// Transport angle for the directed edge u -> v (frame of u to frame of v).
double transport_angle(const SurfaceModel& S, int u, int v);

// Tangent frame vectors at an arbitrary point of an analytic surface.
void analytic_frame(const SurfaceModel& S, const Point& x, Vec3& e1, Vec3& e2,
                    Vec3& n);

// Sum of angle defects (mesh Gauss-Bonnet; equals 2*pi*chi to rounding).
double total_defect(const SurfaceModel& S);

// Copy of a singular consistent system matrix with row/column 0 replaced by
// the identity, making it definite.  Solutions of the pinned system solve
// the original one exactly when the RHS components sum to zero.
SpMat pin_first(const SpMat& L);

}  // namespace vortexlab
