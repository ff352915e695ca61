#include "digeo/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace digeo {

Vec3d sphere_exp(const Vec3d& p, const Vec3d& v) {
  if (std::abs(norm(p) - 1.0) > 1e-10) throw NotOnSphere("sphere_exp: |p| != 1");
  double len = norm(v);
  if (len < 1e-12) return p;  // removable singularity
  if (std::abs(dot(p, v)) > 1e-10 * len) throw NotTangent("sphere_exp: p.v != 0");
  return p * std::cos(len) + v * (std::sin(len) / len);
}

SphereJacobians sphere_jacobians(const Vec3d& p, const Vec3d& v) {
  if (std::abs(norm(p) - 1.0) > 1e-10) throw NotOnSphere("sphere_jacobians: |p| != 1");
  double len = norm(v);
  if (len <= 0) throw DegenerateDirection("sphere_jacobians: v = 0");
  if (std::abs(dot(p, v)) > 1e-10 * len) throw NotTangent("sphere_jacobians: p.v != 0");

  double c = std::cos(len), s = std::sin(len);
  SphereJacobians out;
  out.j_p = Mat3::zero();
  for (int i = 0; i < 3; ++i) out.j_p(i, i) = c;

  // J_v = [(I - p v^T)/|v| - v v^T/|v|^3] sin|v| + (v v^T/|v|^2) cos|v|
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double id = i == j ? 1.0 : 0.0;
      out.j_v(i, j) = (id - p[i] * v[j]) / len * s - v[i] * v[j] / (len * len * len) * s +
                      v[i] * v[j] / (len * len) * c;
    }
  return out;
}

Vec3d torus_embed(const TorusState& s) {
  double w = s.r_major + s.r_minor * std::cos(s.beta);
  return {w * std::cos(s.alpha), w * std::sin(s.alpha), s.r_minor * std::sin(s.beta)};
}

Vec3d torus_velocity_ambient(const TorusState& s) {
  double w = s.r_major + s.r_minor * std::cos(s.beta);
  Vec3d f_alpha{-w * std::sin(s.alpha), w * std::cos(s.alpha), 0.0};
  Vec3d f_beta{-s.r_minor * std::sin(s.beta) * std::cos(s.alpha),
               -s.r_minor * std::sin(s.beta) * std::sin(s.alpha),
               s.r_minor * std::cos(s.beta)};
  return f_alpha * s.alpha_dot + f_beta * s.beta_dot;
}

TorusState torus_state_from_ambient(const Vec3d& p, const Vec3d& v, double r_major,
                                    double r_minor) {
  if (!(r_major > r_minor && r_minor > 0))
    throw InvalidArgs("torus requires R > r > 0");
  TorusState s;
  s.r_major = r_major;
  s.r_minor = r_minor;
  s.alpha = std::atan2(p.y, p.x);
  double rho = std::hypot(p.x, p.y);
  s.beta = std::atan2(p.z, rho - r_major);

  double w = r_major + r_minor * std::cos(s.beta);
  Vec3d f_alpha{-w * std::sin(s.alpha), w * std::cos(s.alpha), 0.0};
  Vec3d f_beta{-r_minor * std::sin(s.beta) * std::cos(s.alpha),
               -r_minor * std::sin(s.beta) * std::sin(s.alpha),
               r_minor * std::cos(s.beta)};
  // Diagonal metric: project the (already near-tangent) velocity.
  s.alpha_dot = dot(v, f_alpha) / (w * w);
  s.beta_dot = dot(v, f_beta) / (r_minor * r_minor);
  return s;
}

namespace {

struct TorusDeriv {
  double alpha, beta, alpha_dot, beta_dot;
};

TorusDeriv torus_rhs(const TorusState& s) {
  double w = s.r_major + s.r_minor * std::cos(s.beta);
  double alpha_dd = 2.0 * (s.r_minor * std::sin(s.beta) / w) * s.alpha_dot * s.beta_dot;
  double beta_dd = -(w * std::sin(s.beta) / s.r_minor) * s.alpha_dot * s.alpha_dot;
  return {s.alpha_dot, s.beta_dot, alpha_dd, beta_dd};
}

double metric_speed(const TorusState& s) {
  double w = s.r_major + s.r_minor * std::cos(s.beta);
  return std::sqrt(w * w * s.alpha_dot * s.alpha_dot +
                   s.r_minor * s.r_minor * s.beta_dot * s.beta_dot);
}

}  // namespace

TorusExpResult torus_exp(const TorusState& state0, double length, double step) {
  TorusState s = state0;
  double speed0 = metric_speed(s);
  if (length <= 0 || speed0 <= 0) return {s, torus_embed(s)};
  s.alpha_dot /= speed0;
  s.beta_dot /= speed0;

  int n = std::max(1, int(std::ceil(length / step)));
  double h = length / n;
  auto advance = [](const TorusState& st, const TorusDeriv& d, double dt) {
    TorusState r = st;
    r.alpha += d.alpha * dt;
    r.beta += d.beta * dt;
    r.alpha_dot += d.alpha_dot * dt;
    r.beta_dot += d.beta_dot * dt;
    return r;
  };
  for (int i = 0; i < n; ++i) {
    TorusDeriv k1 = torus_rhs(s);
    TorusDeriv k2 = torus_rhs(advance(s, k1, h / 2));
    TorusDeriv k3 = torus_rhs(advance(s, k2, h / 2));
    TorusDeriv k4 = torus_rhs(advance(s, k3, h));
    s.alpha += h / 6 * (k1.alpha + 2 * k2.alpha + 2 * k3.alpha + k4.alpha);
    s.beta += h / 6 * (k1.beta + 2 * k2.beta + 2 * k3.beta + k4.beta);
    s.alpha_dot += h / 6 * (k1.alpha_dot + 2 * k2.alpha_dot + 2 * k3.alpha_dot + k4.alpha_dot);
    s.beta_dot += h / 6 * (k1.beta_dot + 2 * k2.beta_dot + 2 * k3.beta_dot + k4.beta_dot);
  }
  if (std::abs(metric_speed(s) - 1.0) > 1e-6)
    throw StepTooLarge("torus_exp: metric speed drifted; reduce step");
  return {s, torus_embed(s)};
}

SurfacePoint pi_exp(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const PiConfig& cfg) {
  if (cfg.step_size <= 0) throw InvalidArgs("pi_exp: step size must be positive");
  double target = norm(v);
  SurfacePoint cur = p;
  if (target < 1e-15) return cur;
  Vec3d pos = embed(cur, m);
  Vec3d dir = normalized(v);
  int max_iters =
      cfg.max_iterations > 0 ? cfg.max_iterations : int(10.0 * target / cfg.step_size) + 100;

  double traced = 0;
  for (int it = 0; it < max_iters; ++it) {
    double s = std::min(cfg.step_size, target - traced);
    Vec3d q = pos + dir * s;

    // Brute-force closest point over all faces.
    int best_f = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    Vec3d best_b{1, 0, 0};
    for (int f = 0; f < m.face_count(); ++f) {
      Vec3d b = project_to_face(m, f, q);
      const auto& c = m.faces[f];
      Vec3d pt = m.vertices[c[0]] * b[0] + m.vertices[c[1]] * b[1] + m.vertices[c[2]] * b[2];
      double d2 = norm2(q - pt);
      if (d2 < best_d2) {
        best_d2 = d2;
        best_f = f;
        best_b = b;
      }
    }

    Vec3d n_old = m.face_normals[cur.face];
    Vec3d n_new = m.face_normals[best_f];
    SurfacePoint next{best_f, best_b};
    Vec3d next_pos = embed(next, m);

    Vec3d axis = cross(n_old, n_new);
    double axis_len = norm(axis);
    if (axis_len > 1e-14) {
      double ang = std::atan2(axis_len, dot(n_old, n_new));
      dir = rotate_about(dir, axis / axis_len, ang);
    }
    dir = normalized(dir - n_new * dot(dir, n_new));

    traced += norm(next_pos - pos);
    pos = next_pos;
    cur = next;
    if (traced >= target - 1e-12 * target) return cur;
  }
  throw MaxIterations("pi_exp: iteration cap reached before target length");
}

// --- Fixtures ---

Mesh make_icosphere(int subdiv) {
  if (subdiv < 0) throw InvalidArgs("icosphere subdiv must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v = normalized(v);
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
      {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
      {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

  for (int level = 0; level < subdiv; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back(normalized(verts[a] + verts[b]));
      int idx = int(verts.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return Mesh::build(std::move(verts), std::move(faces));
}

Mesh make_torus(double r_major, double r_minor, int n_alpha, int n_beta) {
  if (!(r_major > r_minor && r_minor > 0)) throw InvalidArgs("torus requires R > r > 0");
  if (n_alpha < 3 || n_beta < 3) throw InvalidArgs("torus resolution must be >= 3");
  std::vector<Vec3d> verts;
  verts.reserve(size_t(n_alpha) * n_beta);
  for (int i = 0; i < n_alpha; ++i) {
    double a = 2.0 * M_PI * i / n_alpha;
    for (int j = 0; j < n_beta; ++j) {
      double b = 2.0 * M_PI * j / n_beta;
      TorusState s;
      s.alpha = a;
      s.beta = b;
      s.r_major = r_major;
      s.r_minor = r_minor;
      verts.push_back(torus_embed(s));
    }
  }
  auto vid = [&](int i, int j) { return (i % n_alpha) * n_beta + (j % n_beta); };
  std::vector<std::array<int, 3>> faces;
  faces.reserve(size_t(2) * n_alpha * n_beta);
  for (int i = 0; i < n_alpha; ++i)
    for (int j = 0; j < n_beta; ++j) {
      faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return Mesh::build(std::move(verts), std::move(faces));
}

Mesh make_plane(int nx, int ny, double size, std::uint64_t seed) {
  if (nx < 1 || ny < 1) throw InvalidArgs("plane resolution must be >= 1");
  Rng rng(seed);
  double dx = size / nx, dy = size / ny;
  std::vector<Vec3d> verts;
  verts.reserve(size_t(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      Vec3d p{i * dx, j * dy, 0.0};
      if (seed != 0 && i > 0 && i < nx && j > 0 && j < ny) {
        p.x += rng.uniform(-0.3, 0.3) * dx;
        p.y += rng.uniform(-0.3, 0.3) * dy;
      }
      verts.push_back(p);
    }
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 3>> faces;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      bool flip = seed != 0 && rng.uniform() < 0.5;
      if (flip) {
        faces.push_back({a, b, d});
        faces.push_back({b, c, d});
      } else {
        faces.push_back({a, b, c});
        faces.push_back({a, c, d});
      }
    }
  return Mesh::build(std::move(verts), std::move(faces));
}

Mesh make_cylinder(double radius, double height, int n_around, int n_height) {
  if (radius <= 0 || height <= 0) throw InvalidArgs("cylinder dimensions must be positive");
  if (n_around < 3 || n_height < 1) throw InvalidArgs("cylinder resolution too low");
  std::vector<Vec3d> verts;
  for (int j = 0; j <= n_height; ++j) {
    double z = height * j / n_height;
    for (int i = 0; i < n_around; ++i) {
      double a = 2.0 * M_PI * i / n_around;
      verts.push_back({radius * std::cos(a), radius * std::sin(a), z});
    }
  }
  auto vid = [&](int i, int j) { return j * n_around + (i % n_around); };
  std::vector<std::array<int, 3>> faces;
  for (int j = 0; j < n_height; ++j)
    for (int i = 0; i < n_around; ++i) {
      faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  return Mesh::build(std::move(verts), std::move(faces));
}

Mesh make_cone(double radius, double height, int n_around) {
  if (radius <= 0 || height <= 0) throw InvalidArgs("cone dimensions must be positive");
  if (n_around < 3) throw InvalidArgs("cone resolution too low");
  std::vector<Vec3d> verts;
  for (int i = 0; i < n_around; ++i) {
    double a = 2.0 * M_PI * i / n_around;
    verts.push_back({radius * std::cos(a), radius * std::sin(a), 0.0});
  }
  verts.push_back({0.0, 0.0, height});  // apex
  int apex = n_around;
  std::vector<std::array<int, 3>> faces;
  for (int i = 0; i < n_around; ++i)
    faces.push_back({i, (i + 1) % n_around, apex});
  return Mesh::build(std::move(verts), std::move(faces));
}

}  // namespace digeo
