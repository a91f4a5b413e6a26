#pragma once

#include "vortexlab/greens.hpp"

namespace vortexlab {

// Orthonormal basis of the harmonic 1-form space with generator loops and
// the period matrix alpha_{lk} = sum over loop l of eta_k.
//
// Flat torus: the global closed forms with frame components (1,0) and (0,1);
// their edge restrictions are exactly discrete-harmonic and the discrete
// Gram matrix is exactly the identity.  Genus-1 TriMesh: Hodge projection of
// the tree-cotree fundamental cycles (see harmonic_basis).  Sphere: empty.
struct HarmonicBasis {
  int genus = 0;
  std::vector<DiscreteForm> forms;      // 2g edge 1-forms, orthonormal
  std::vector<std::vector<int>> loops;  // 2g closed vertex paths (first==last)
  Eigen::MatrixXd alpha;                // 2g x 2g periods
  double alpha_cond = 1.0;
  bool analytic = false;  // flat-torus closed-form basis
  std::uint64_t surface_hash = 0;
};

HarmonicBasis harmonic_basis(const SurfaceModel& S);

// Frame components of basis form k at x; analytic flat-torus basis only.
Vec2 harmonic_value(const SurfaceModel& S, const HarmonicBasis& HB, int k,
                    const Point& x);

// The quantization angles: integral of (d*psi + connection) around each
// generator loop, reduced to [0, 2pi).  Flat torus uses the closed form
// zeta_1 = -2pi sum d_k a_k^y, zeta_2 = +2pi sum d_k a_k^x (mod 2pi);
// TriMesh integrates edge values along the generator loops, detouring
// around vortex vertices through their one-rings.
Eigen::VectorXd zeta(const HarmonicBasis& HB, const GreenEvaluator& gev,
                     const VortexConfig& cfg);

// Independent line-integral evaluation on the flat torus: straight generator
// loops anchored at the given offset, with circular-arc detours of radius
// 2*r_min around vortices closer than that to the loop.  anchor < 0 picks
// the offset with maximal vortex clearance.  Rejects configurations whose
// detour disks overlap along the loop.
Eigen::VectorXd zeta_by_integration(const HarmonicBasis& HB,
                                    const GreenEvaluator& gev,
                                    const VortexConfig& cfg,
                                    double anchor = -1.0);

// The translated flux lattice 2pi alpha^{-1} Z^{2g} - alpha^{-1} zeta.
struct FluxLattice {
  int genus = 0;
  Eigen::MatrixXd alpha, alpha_inv;
  Eigen::MatrixXd gen;      // 2pi alpha^{-1}, columns generate
  Eigen::VectorXd zeta;     // representative in [0, 2pi)^{2g}
  Eigen::VectorXd offset;   // -alpha^{-1} zeta
  double tol = 1e-6;        // membership tolerance on alpha*phi + zeta
  std::uint64_t basis_hash = 0;

  bool member(const Eigen::VectorXd& phi) const;
  Eigen::VectorXd nearest_point(const Eigen::VectorXd& phi) const;
};

FluxLattice lattice(const HarmonicBasis& HB, const GreenEvaluator& gev,
                    const VortexConfig& cfg);

// Hausdorff distance between two translates of the same flux lattice.
double lattice_distance(const FluxLattice& L1, const FluxLattice& L2);

// 2pi times the minimal-connection cost between the signed dipole
// decompositions of the two configurations (perfect matching on unit
// charges, geodesic costs).
double w11_vortex_distance(const SurfaceModel& S, const VortexConfig& cfg1,
                           const VortexConfig& cfg2);

}  // namespace vortexlab
