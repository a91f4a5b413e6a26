#pragma once

#include <memory>

#include "vortexlab/geometry.hpp"

namespace vortexlab {

// Vortex positions with their integer degrees.  Valid only when positions
// are pairwise distinct, every degree is nonzero, and the degrees sum to the
// Euler characteristic of the surface.
struct VortexConfig {
  std::vector<Point> a;
  std::vector<int> d;
};

void validate_config(const SurfaceModel& S, const VortexConfig& cfg);

// Face of S containing x (analytic kinds; barycentric test). -1 if none.
int containing_face(const SurfaceModel& S, const Point& x);

struct PsiField;
class GreenEvaluator;
PsiField psi_field(const GreenEvaluator& gev, const VortexConfig& cfg);

// Green's function of the Laplace-Beltrami operator in the mean-zero gauge:
// -Delta_x G(.,y) = delta_y - 1/Vol, integral of G(.,y) = 0.
//
// Flat torus: 1-D resummed Fourier series (exponentially convergent except
// on the diagonal).  Sphere: zonal closed form.  TriMesh: factorized
// cotangent Laplacian with lumped vertex sources, cached per source.
class GreenEvaluator {
 public:
  explicit GreenEvaluator(const SurfaceModel& S);

  const SurfaceModel& surface() const { return *S_; }

  double eval(const Point& x, const Point& y) const;

  // Robin mass H(x,x): Richardson extrapolation of G + log(dist)/2pi along
  // a shrinking probe sequence (analytic kinds), or an even-polynomial
  // regression against the log kernel over a near annulus (TriMesh).
  double robin_mass(const Point& x) const;

  // Tangent-frame components of grad_x G(x,y).  Analytic kinds only.
  Vec2 grad_x(const Point& x, const Point& y) const;

  // psi0 solve and its Dirichlet energy, cached (exact zeros on the
  // constant-curvature kinds).
  const Eigen::VectorXd& psi0() const;
  double psi0_value(const Point& x) const;
  double psi0_dirichlet() const;

 private:
  const SurfaceModel* S_;
  struct Impl;
  std::shared_ptr<Impl> impl_;
  friend PsiField psi_field(const GreenEvaluator&, const VortexConfig&);
};

// -Delta psi0 = -kappa + kappa_bar, mean zero.  Vertex 0-form.
DiscreteForm psi0_field(const SurfaceModel& S);

// The stream data of the vortex configuration: the 2-form psi (face
// integrals of *psi) and the 1-form d*psi on edges.
//
// The edge form comes from a dual-grid solve: d*psi = star1^{-1} d1^T p with
// p per face, so it is exactly coclosed, exactly star1-orthogonal to every
// closed form, and carries exactly 2 pi d_k - Omega_f of circulation per
// vortex face.  Those exact identities are what the holonomy construction
// downstream relies on.
struct PsiField {
  DiscreteForm psi;          // degree 2: face-integrated psi
  DiscreteForm dstar_psi;    // degree 1: edge-integrated d*psi
  Eigen::VectorXd star_psi;  // pointwise *psi per face, area-mean zero
};

PsiField psi_field(const GreenEvaluator& gev, const VortexConfig& cfg);

// Pointwise evaluators for analytic kinds (series / closed form).
// Rejected within 1e-6 of a vortex.
double star_psi_value(const GreenEvaluator& gev, const VortexConfig& cfg,
                      const Point& x);
// Frame components of the 1-form d*psi = p_y dx - p_x dy at x.
Vec2 dstar_psi_value(const GreenEvaluator& gev, const VortexConfig& cfg,
                     const Point& x);

}  // namespace vortexlab
