#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "digeo/mesh.hpp"
#include "digeo/oracles.hpp"

namespace digeo::testing {

inline Mesh from_obj(const std::string& text) {
  std::istringstream in(text);
  return load_obj(in);
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close(const Vec3d& a, const Vec3d& b, double tol) {
  return norm(a - b) <= tol;
}

// Shared fixtures; built once per process.
inline const Mesh& icosphere(int subdiv) {
  static Mesh cache[8] = {make_icosphere(0), make_icosphere(1), make_icosphere(2),
                          make_icosphere(3), make_icosphere(4), make_icosphere(5),
                          make_icosphere(6), make_icosphere(7)};
  return cache[subdiv];
}

// Two unit right triangles sharing the diagonal, in the z=0 plane.
inline Mesh two_triangle_square() {
  return Mesh::build({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}},
                     {{0, 1, 2}, {0, 2, 3}});
}

// A planar annulus (square with a square hole), triangulated, z=0.
Mesh planar_annulus(int ring_cells);

// Six-triangle fan around a saddle-shaped center vertex (z alternates).
Mesh saddle_fan(double height);

// Moebius strip: n quads with a half twist, triangulated (non-orientable).
Mesh moebius_strip(int n);

}  // namespace digeo::testing
