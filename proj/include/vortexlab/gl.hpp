#pragma once

#include <functional>
#include <map>

#include "vortexlab/renorm.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {

// ---- amplitude potentials ------------------------------------------------

// Pointwise well F acting on the squared amplitude s = |u|^2.  domain_max
// bounds the amplitude range the well is meant for; the growth check below
// samples s in [0, domain_max].
struct Potential {
  std::string name;
  std::function<double(double)> F;   // F(s)
  std::function<double(double)> dF;  // F'(s)
  std::map<std::string, double> parameters;
  double domain_max = 2.0;

  static Potential gl();  // (1 - s)^2, the classical quartic well
  static Potential mm();  // 1 - s on [0, 1], the unit-constraint well
};

// Validates the well shape: F(1) = 0 (within 1e-12) and F(s^2) >= C (1-s)^2
// for some C > 0 on a sampled amplitude grid s in [0, domain_max].  Returns
// the largest such grid constant C; rejects wells violating either property.
double potential_growth_constant(const Potential& P);

// ---- energies ------------------------------------------------------------

struct EnergyBreakdown {
  double total = 0.0;
  double dirichlet = 0.0;  // gradient part (ambient 3-component for the
                           // micromagnetic energy)
  double shape = 0.0;      // extrinsic shape-operator part
  double potential = 0.0;  // 1/(4 eps^2) F(|u|^2) part
  Eigen::VectorXd site_density;  // energy per unit area attributed per vertex
};

// Covariant Dirichlet energy plus amplitude potential:
//   1/2 sum_e star1_e |u_b e^{-i rho_e} - u_a|^2
//   + 1/(4 eps^2) sum_v star0_v F(|u_v|^2).
// The transported edge difference makes constant-phase gauge invariance
// exact by construction.
EnergyBreakdown energy_in(const SurfaceModel& S, const DiscreteField& u,
                          double eps, const Potential& F);

// Extrinsic energy of a tangent field on an embedded surface: energy_in
// plus the bending term 1/2 sum_v star0_v |S(m_v)|^2 with S the per-vertex
// shape operator.  Flat tori are rejected.
EnergyBreakdown energy_ex(const SurfaceModel& S, const DiscreteField& m,
                          double eps, const Potential& F);

// Unit-length ambient field M = m + Mperp N, tangential part m in the vertex
// frames plus a normal scalar per site.
struct MMField {
  DiscreteField m;
  Eigen::VectorXd Mperp;
};

// Micromagnetic energy: the Dirichlet part is the direct finite difference
// of the ambient 3-component field M (ground truth; no tangential/normal
// splitting), the potential acts on the in-plane share 1 - (M.N)^2.
// Requires | |m|^2 + Mperp^2 - 1 | <= 1e-8 at every site.
EnergyBreakdown energy_mm(const SurfaceModel& S, const MMField& M, double eps,
                          const Potential& F);

// Diagnostic splitting of the micromagnetic Dirichlet term: `direct` is the
// ambient 3-component sum used by energy_mm, `decomposed` re-evaluates it as
// transported in-plane differences + lumped shape term + normal-scalar
// differences.  The two agree up to curvature cross-terms.
struct MMDecomposition {
  double direct = 0.0;
  double decomposed = 0.0;
  double residual = 0.0;  // |direct - decomposed|
};
MMDecomposition mm_decomposition(const SurfaceModel& S, const MMField& M);

// Covariant Dirichlet energy of u restricted to the edges whose endpoints
// both sit at geodesic distance >= r from every vortex of cfg; bridges the
// discrete energy to the truncated renormalized energy.
double dirichlet_outside(const SurfaceModel& S, const DiscreteField& u,
                         const VortexConfig& cfg, double r);

// ---- minimization --------------------------------------------------------

enum class EnergyKind { Intrinsic, Extrinsic, Micromagnetic };

struct MinimizeEnergyOptions {
  int flow_steps = 200;       // gradient-flow warmup iterations
  int max_iterations = 10000; // total budget including the quasi-Newton stage
  int memory = 8;             // L-BFGS history length
  double tol_rel = 1e-6;      // stop at |grad| < tol_rel * max(energy, 1e-6)
  int verbosity = 0;
};

struct MinimizeEnergyResult {
  DiscreteField u;        // minimizer (tangential part for Micromagnetic)
  Eigen::VectorXd Mperp;  // normal component (Micromagnetic only)
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
  std::vector<double> energy_history;  // accepted-step energies, nonincreasing
};

// Minimizes the selected energy from init: gradient flow with adaptive step
// for flow_steps iterations, then projected L-BFGS.  After every accepted
// step amplitudes are clamped to |u| <= 1 (Intrinsic/Extrinsic) or the
// 3-component field is renormalized to unit length (Micromagnetic; the
// initial normal component is +sqrt(1 - |init|^2) after clamping).
MinimizeEnergyResult minimize_energy(const SurfaceModel& S, EnergyKind kind,
                                     const DiscreteField& init, double eps,
                                     const Potential& F,
                                     const MinimizeEnergyOptions& opts = {});

// Unit-amplitude field with independent uniform random phases per site.
DiscreteField random_unit_field(const SurfaceModel& S, std::uint64_t seed);

// ---- radial core profiles ------------------------------------------------

struct ProfileSolution {
  Eigen::VectorXd r;  // geometric grid in (0, 1]
  Eigen::VectorXd f;  // amplitude values (intrinsic) or angles (micromagnetic)
  double I_value = 0.0;
  double t = 0.0;
};

// Minimizes pi * int_0^1 [f'^2 + f^2/r^2 + F(f^2)/(2 t^2)] r dr with
// f(1) = 1 on a geometric grid (Newton iteration, gradient residual 1e-10).
ProfileSolution radial_profile_in(double t, int grid_size = 2000,
                                  const Potential& F = Potential::gl());

// Angle form of the unit-length profile: minimizes
// pi * int_0^1 [phi'^2 + sin^2(phi)/r^2 + F(sin^2 phi)/(2 t^2)] r dr with
// phi(1) = pi/2; the in-plane amplitude is sin(phi).
ProfileSolution radial_profile_mm(double t, int grid_size = 2000,
                                  const Potential& F = Potential::gl());

// Stabilized core constants I(t) + pi log t at a small t.
double iota_intrinsic(const Potential& F = Potential::gl(), double t = 5e-3);
double iota_micromagnetic(const Potential& F = Potential::gl(),
                          double t = 5e-3);

// ---- energy-expansion validation -----------------------------------------

struct EnergyReport {
  double energy = 0.0;  // energy of the supplied field for the given kind
  double eps = 0.0;
  int n = 0;                   // total detected |degree|
  VortexConfig detected;       // nonzero-degree ball centers and degrees
  Eigen::VectorXd phi;         // flux pairing snapped to the nearest lattice point
  double snap_distance = 0.0;  // distance from the raw pairing to the lattice
  double W = 0.0;              // renormalized interaction at the detected data
  double tildeW = 0.0;         // bending term (Extrinsic kind only)
  double iota = 0.0;           // per-vortex core constant
  double residual = 0.0;  // energy - n pi log(1/eps) - W [- tildeW] - n iota
  BallSet balls;
  bool degrees_match_chi = true;
  std::string message;
};

// Detects vortices of u by the ball construction, snaps its flux pairing to
// the quantization lattice, evaluates the renormalized energy at the
// detected data, and reports the expansion residual
//   energy - n pi log(1/eps) - W - n iota   (+ tildeW subtracted for the
// extrinsic kind).  detect_sigma = 0 selects max(0.3, 2 eps^0.7).  When the
// detected degrees do not sum to the Euler characteristic the renormalized
// terms are left NaN and degrees_match_chi is false.
EnergyReport expansion_report(const GreenEvaluator& gev,
                              const HarmonicBasis& HB, const DiscreteField& u,
                              double eps, const Potential& F,
                              EnergyKind kind = EnergyKind::Intrinsic,
                              double detect_sigma = 0.0);

}  // namespace vortexlab
