#include "vortexlab/field.hpp"

#include <cinttypes>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vortexlab {

DiscreteField constant_field(const SurfaceModel& S, cplx z) {
  DiscreteField u;
  u.surface_hash = S.content_hash;
  u.values = Eigen::VectorXcd::Constant(static_cast<Eigen::Index>(S.V.size()), z);
  return u;
}

void save_field(const std::string& path, const DiscreteField& u,
                double epsilon, const std::string& potential,
                const std::string& extra_comment) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open checkpoint for writing: " + path);
  f << "# vortexlab field checkpoint v1\n";
  f << "# surface " << hex16(u.surface_hash) << "\n";
  f << "# epsilon " << fmt_g17(epsilon) << "\n";
  f << "# potential " << potential << "\n";
  if (!extra_comment.empty()) f << "# " << extra_comment << "\n";
  f << "# sites " << u.values.size() << "\n";
  f << "site,re,im\n";
  for (Eigen::Index i = 0; i < u.values.size(); ++i)
    f << i << "," << fmt_g17(u.values[i].real()) << ","
      << fmt_g17(u.values[i].imag()) << "\n";
  if (!f) throw InputError("write failed: " + path);
}

FieldCheckpoint load_field(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open checkpoint: " + path);
  FieldCheckpoint ck;
  std::string line;
  long nsites = -1;
  while (std::getline(f, line) && !line.empty() && line[0] == '#') {
    std::istringstream ss(line.substr(1));
    std::string key;
    ss >> key;
    if (key == "surface") {
      std::string hx;
      ss >> hx;
      ck.field.surface_hash = std::strtoull(hx.c_str(), nullptr, 16);
    } else if (key == "epsilon") {
      ss >> ck.epsilon;
    } else if (key == "potential") {
      ss >> ck.potential;
    } else if (key == "sites") {
      ss >> nsites;
    }
  }
  if (nsites < 0) throw InputError("checkpoint missing site count: " + path);
  if (line != "site,re,im")
    throw InputError("checkpoint missing column header: " + path);
  ck.field.values.resize(nsites);
  ck.field.values.setZero();
  long seen = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    long idx;
    double re, im;
    if (std::sscanf(line.c_str(), "%ld,%lf,%lf", &idx, &re, &im) != 3)
      throw InputError("malformed checkpoint row: " + line);
    if (idx < 0 || idx >= nsites)
      throw InputError("checkpoint site index out of range: " + line);
    ck.field.values[idx] = cplx(re, im);
    ++seen;
  }
  if (seen != nsites)
    throw InputError("checkpoint row count does not match declared sites");
  return ck;
}

}  // namespace vortexlab
