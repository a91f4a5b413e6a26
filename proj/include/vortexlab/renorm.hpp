#pragma once

#include <limits>
#include <map>
#include <string>

#include "vortexlab/canonical.hpp"

namespace vortexlab {

// Additive breakdown of the closed-form interaction energy.  The total is
// the exact sum of the five entries.
struct RenormTerms {
  double green_pairs = 0.0;      // 4 pi^2 sum_{l<k} d_l d_k G(a_l, a_k)
  double robin = 0.0;            // 2 pi^2 sum_k d_k^2 H(a_k, a_k)
  double psi0_vortex = 0.0;      // 2 pi sum_k d_k psi0(a_k)
  double flux_sq = 0.0;          // |phi|^2 / 2
  double psi0_dirichlet = 0.0;   // integral of |d psi0|^2 / 2
};

struct RenormReport {
  double W_closed = 0.0;
  std::map<double, double> W_quadrature;  // radius -> value, when computed
  double tildeW = std::numeric_limits<double>::quiet_NaN();
  DiscreteForm theta_field{0, Eigen::VectorXd()};
  RenormTerms terms;
};

// Closed-form interaction energy of a vortex configuration with flux phi.
// phi may be any vector of the right dimension; it need not sit on the
// quantization lattice.  Coincident vortices are rejected.
RenormReport W_closed_form(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg, const Eigen::VectorXd& phi);

// Resolvent of the same energy by direct quadrature of the current energy
// over the surface minus geodesic balls of radius r around the vortices,
// plus pi log r sum d_k^2.  Analytic kinds integrate the pointwise current
// with log-radial polar rules near each vortex blended into a background
// grid; triangulated surfaces fall back to a discrete edge-energy sum.
// Rejected when sqrt(r) exceeds the minimal pairwise vortex distance or r
// does not fit under the near-vortex caps.
double W_quadrature(const GreenEvaluator& gev, const HarmonicBasis& HB,
                    const VortexConfig& cfg, const Eigen::VectorXd& phi,
                    double r);

struct MinimizeWOptions {
  int max_outer = 200;          // outer position iterations
  double step_frac = 0.05;      // first trial displacement / length scale
  double tol_step = 1e-6;       // convergence: max displacement / scale
  bool extrinsic = false;       // add the bending energy tildeW (embedded)
  int verbosity = 0;
};

struct MinimizeWResult {
  VortexConfig cfg;
  Eigen::VectorXd phi;
  double W = 0.0;               // final objective value
  bool annihilated = false;     // opposite degrees collapsed
  bool converged = false;
  int iterations = 0;
  std::string message;
};

// Local minimization of W over vortex positions: finite-difference gradient
// in tangent normal coordinates with Armijo backtracking and retraction onto
// the surface, alternating with the exact flux update (nearest lattice point
// to the origin of the lattice re-evaluated at the current positions).
// Opposite-degree vortices approaching within 1e-3 stop the run with an
// annihilation report.  Analytic kinds only.
MinimizeWResult minimize_W(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& init,
                           const MinimizeWOptions& opts = {});

// Shape operator v -> -dN(v) of an embedded surface applied to an ambient
// tangent vector at x.  The unit sphere is exact (-identity on the tangent
// plane); triangulated surfaces use a per-vertex second fundamental form
// fitted by least squares over the two-ring, evaluated at the vertex
// nearest to x.  Flat tori are rejected (not embedded).
Vec3 shape_operator(const SurfaceModel& S, const Point& x, const Vec3& v);

// Same operator as a 2x2 matrix in the tangent frame (e1, e2) of vertex v,
// so per-vertex loops can apply it without repeated nearest-vertex lookups.
Eigen::Matrix2d shape_matrix_at_vertex(const SurfaceModel& S, int v);

struct ThetaResult {
  DiscreteForm theta{0, Eigen::VectorXd()};  // vertex 0-form
  double tildeW = 0.0;
  double residual = 0.0;   // Euler-Lagrange residual, mass-weighted L2
  int iterations = 0;
  bool converged = false;
  std::string message;
};

// Minimize the bending energy (1/2) int |dTheta|^2 + |S(e^{iTheta} u*)|^2
// over real phase corrections Theta by preconditioned gradient descent,
// starting from theta0 (zero when empty).  Returns the minimizing Theta and
// the minimum value tildeW; the residual is the mass-weighted norm of the
// discrete Euler-Lagrange operator of this functional.  Embedded surfaces
// only.
ThetaResult theta_minimize(const SurfaceModel& S, const CanonicalField& ustar,
                           const Eigen::VectorXd& theta0 = Eigen::VectorXd());

}  // namespace vortexlab
