#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "vortexlab/geometry.hpp"

namespace vortexlab {

MeshData flat_torus_grid(int n) {
  if (n < 4 || n % 2 != 0)
    throw InputError("flat torus grid size must be even and >= 4");
  MeshData m;
  m.vertices.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      m.vertices.push_back(
          {frac((i + 0.5 * (j & 1)) / n), static_cast<double>(j) / n, 0.0});
  auto id = [n](int i, int j) { return ((j % n + n) % n) * n + ((i % n + n) % n); };
  m.faces.reserve(2u * n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      if (j % 2 == 0) {
        m.faces.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        m.faces.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      } else {
        m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
        m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
  return m;
}

MeshData icosphere(int level) {
  if (level < 0 || level > 8) throw InputError("icosphere level out of range");
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  MeshData m;
  m.vertices = {{-1, p, 0}, {1, p, 0},   {-1, -p, 0}, {1, -p, 0},
                {0, -1, p}, {0, 1, p},   {0, -1, -p}, {0, 1, -p},
                {p, 0, -1}, {p, 0, 1},   {-p, 0, -1}, {-p, 0, 1}};
  for (auto& v : m.vertices) v.normalize();
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      int idx = static_cast<int>(m.vertices.size());
      m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      mid[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * m.faces.size());
    for (const auto& f : m.faces) {
      int ab = midpoint(f[0], f[1]);
      int bc = midpoint(f[1], f[2]);
      int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  return m;
}

MeshData torus_of_revolution(double R, double r, int nu, int nv) {
  if (!(R > r && r > 0) || nu < 3 || nv < 3)
    throw InputError("invalid torus of revolution parameters");
  MeshData m;
  m.vertices.reserve(static_cast<std::size_t>(nu) * nv);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      double u = TWO_PI * i / nu, v = TWO_PI * j / nv;
      m.vertices.push_back({(R + r * std::cos(v)) * std::cos(u),
                            (R + r * std::cos(v)) * std::sin(u),
                            r * std::sin(v)});
    }
  auto id = [nu, nv](int i, int j) {
    return ((i % nu + nu) % nu) * nv + ((j % nv + nv) % nv);
  };
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j) {
      m.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return m;
}

MeshData ellipsoid(double ax, double ay, double az, int level) {
  if (!(ax > 0 && ay > 0 && az > 0)) throw InputError("invalid ellipsoid axes");
  MeshData m = icosphere(level);
  for (auto& v : m.vertices) {
    v.x() *= ax;
    v.y() *= ay;
    v.z() *= az;
  }
  return m;
}

MeshData read_off(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file: " + path);
  auto next_line = [&in](std::string& line) {
    while (std::getline(in, line)) {
      auto h = line.find('#');
      if (h != std::string::npos) line.erase(h);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  };
  std::string line;
  if (!next_line(line)) throw InputError("empty mesh file: " + path);
  {
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag != "OFF") throw InputError("not an OFF file: " + path);
  }
  if (!next_line(line)) throw InputError("truncated OFF header: " + path);
  std::size_t nv = 0, nf = 0, ne = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> nv >> nf >> ne)) throw InputError("bad OFF counts: " + path);
  }
  MeshData m;
  m.vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_line(line)) throw InputError("truncated OFF vertices: " + path);
    std::istringstream ss(line);
    double x, y, z;
    if (!(ss >> x >> y >> z)) throw InputError("bad OFF vertex line: " + path);
    m.vertices.push_back({x, y, z});
  }
  m.faces.reserve(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    if (!next_line(line)) throw InputError("truncated OFF faces: " + path);
    std::istringstream ss(line);
    int k, a, b, c;
    if (!(ss >> k >> a >> b >> c) || k != 3)
      throw InputError("OFF face is not a triangle: " + path);
    m.faces.push_back({a, b, c});
  }
  return m;
}

void write_off(const std::string& path, const MeshData& mesh) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path);
  out << "OFF\n"
      << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const auto& v : mesh.vertices)
    out << fmt_g17(v.x()) << ' ' << fmt_g17(v.y()) << ' ' << fmt_g17(v.z())
        << '\n';
  for (const auto& f : mesh.faces)
    out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  if (!out) throw InputError("failed writing mesh: " + path);
}

}  // namespace vortexlab
