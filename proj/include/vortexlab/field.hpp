#pragma once

#include "vortexlab/geometry.hpp"

namespace vortexlab {

// Complex amplitude per mesh vertex, components in that vertex's tangent
// frame of the surface identified by surface_hash.
struct DiscreteField {
  std::uint64_t surface_hash = 0;
  Eigen::VectorXcd values;
};

DiscreteField constant_field(const SurfaceModel& S, cplx z);

// Checkpoint: CSV body (site, re, im) under a commented header that pins the
// surface hash, the field parameter epsilon, and the potential name.
struct FieldCheckpoint {
  DiscreteField field;
  double epsilon = 0.0;
  std::string potential;
};

// `extra_comment`, when nonempty, is written as one extra "# ..." header
// line (the reader skips comment keys it does not recognize).
void save_field(const std::string& path, const DiscreteField& u,
                double epsilon, const std::string& potential,
                const std::string& extra_comment = "");
FieldCheckpoint load_field(const std::string& path);

}  // namespace vortexlab
