#pragma once

#include "vortexlab/field.hpp"
#include "vortexlab/harmonic.hpp"

namespace vortexlab {

// Edge current j(u): per canonical edge (a, b), Im(conj(u_a) u_b e^{-i rho}),
// the transport-covariant phase increment scaled by the amplitudes.
DiscreteForm current(const SurfaceModel& S, const DiscreteField& u);

// Face vorticity d j(u) + curvature mass, with the per-face holonomy playing
// the curvature role; its total is exactly 2 pi chi for any field.
DiscreteForm vorticity(const SurfaceModel& S, const DiscreteField& u);

struct DegreeResult {
  int degree = 0;
  double defect = 0.0;  // |raw winding - degree| before rounding
};

// Topological degree around a closed vertex contour: covariant phase
// increments plus the holonomy of the enclosed faces (the region left of the
// contour), over 2 pi, rounded.  Rejects contours with |u| < 1/4 on them,
// contours that do not bound, and windings farther than 0.2 from an integer.
DegreeResult degree(const SurfaceModel& S, const DiscreteField& u,
                    const std::vector<int>& contour);

// L2 pairings of j(u) with the harmonic basis; empty on genus 0.
Eigen::VectorXd flux_integrals(const SurfaceModel& S, const HarmonicBasis& HB,
                               const DiscreteField& u);

// ---- vortex ball construction ------------------------------------------

struct Ball {
  Point center;
  double radius = 0.0;
  int degree = 0;
};

struct BallSet {
  std::vector<Ball> balls;
  double sigma = 0.0;
  double epsilon = 0.0;
  std::vector<std::string> diagnostics;  // non-gating energy/budget notes
};

struct BallOptions {
  int degree_budget = 8;  // the n of the radius bound sum r <= (n+1) sigma
  double q = 0.7;         // admissible sigma starts at eps^q
};

// Grow-and-merge localization of the low-amplitude set {|u| <= 1/2}:
// seed balls around its nonzero-degree components, synchronized growth at
// radius sigma'*|d| with merges into smallest enclosing balls until sigma'
// reaches sigma, then zero-degree components are absorbed.  The result is
// pairwise disjoint, covers the low-amplitude set, and the nonzero-degree
// radii sum to sigma * sum |d|.
BallSet ball_construction(const SurfaceModel& S, const DiscreteField& u,
                          double eps, double sigma,
                          const BallOptions& opts = {});

std::string ballset_to_json(const BallSet& bs);

// ---- energy lower-bound profiles ----------------------------------------

// lambda_eps(r) = min over s in (0,1] of c2/(4 eps) (1-s)^2 + s^2 B(r) with
// B(r) = pi (1 - c3 r^2)_+ / r; the minimum is the harmonic mean A B/(A+B).
double lambda_eps(double r, double eps, double c2 = 0.25, double c3 = 0.0);

// Integral of lambda_eps over (0, sigma); for c3 = 0 it equals
// pi log(1 + sigma c2/(4 pi eps)) exactly.
double Lambda_eps(double sigma, double eps, double c2 = 0.25,
                  double c3 = 0.0);

}  // namespace vortexlab
