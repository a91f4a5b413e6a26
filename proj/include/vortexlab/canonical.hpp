#pragma once

#include "vortexlab/field.hpp"
#include "vortexlab/harmonic.hpp"

namespace vortexlab {

// The coclosed current ansatz j* = d*psi + sum_k phi_k eta_k as an edge
// 1-form.  phi may be any finite vector of length 2g; whether it sits on the
// quantization lattice is checked by build_ustar, not here.
DiscreteForm jstar(const GreenEvaluator& gev, const HarmonicBasis& HB,
                   const VortexConfig& cfg, const Eigen::VectorXd& phi);

// Per-vertex geodesic distance to the nearest vortex: closed form on the
// analytic kinds, multi-source Dijkstra on the edge graph for meshes.
Eigen::VectorXd vortex_distance_field(const SurfaceModel& S,
                                      const VortexConfig& cfg);

// Transport of a tangent vector along a vertex path: each directed edge
// rotates by its current value plus the Levi-Civita angle, so the norm is
// preserved exactly.  v0 lives in the frame of path.front(), the result in
// the frame of path.back().  Paths passing within r_min of a vortex are
// rejected.
cplx holonomy_transport(const SurfaceModel& S, const DiscreteForm& j,
                        const std::vector<int>& path, cplx v0,
                        const VortexConfig& cfg, double r_min = 1e-3);

struct CanonicalField {
  DiscreteForm jstar;    // the edge current the field realizes
  DiscreteField field;   // unit amplitude at every site
  int base_vertex = 0;
  cplx base_vector{1.0, 0.0};
  VortexConfig cfg;
  Eigen::VectorXd phi;
  double max_audit_defect = 0.0;  // worst closed-loop angle defect sampled
  double current_rel_l2 = 0.0;    // star1-norm gap between j(field) and jstar
};

// Canonical harmonic unit field by breadth-first spanning-tree transport
// from the most vortex-distant site.  phi must sit on the flux lattice
// within its membership tolerance; a violation is rejected citing the worst
// quantization row and its defect.  After construction, 20 seeded
// fundamental-cycle audits (skipping cycles through vortex vertices, whose
// holonomy is genuinely fractional) must close to within 1e-2.
CanonicalField build_ustar(const GreenEvaluator& gev, const HarmonicBasis& HB,
                           const VortexConfig& cfg, const Eigen::VectorXd& phi,
                           cplx base_vector = cplx{1.0, 0.0});

}  // namespace vortexlab
