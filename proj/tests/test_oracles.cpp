#include <doctest.h>

#include <cmath>

#include "digeo/tracer.hpp"
#include "digeo/oracles.hpp"
#include "helpers.hpp"

using namespace digeo;
using namespace digeo::testing;

TEST_CASE("sphere exp basics") {
  Vec3d p{0, 0, 1};
  CHECK(close(sphere_exp(p, {0, 0, 0}), p, 1e-15));
  CHECK(close(sphere_exp(p, {M_PI / 2, 0, 0}), {1, 0, 0}, 1e-12));
  CHECK(close(sphere_exp(p, {2 * M_PI, 0, 0}), p, 1e-9));
  CHECK(close(norm(sphere_exp(p, {0.3, 0.4, 0})), 1.0, 1e-12));
}

TEST_CASE("sphere exp input validation") {
  CHECK_THROWS_AS(sphere_exp({0, 0, 2}, {1, 0, 0}), NotOnSphere);
  CHECK_THROWS_AS(sphere_exp({0, 0, 1}, {0, 0, 1}), NotTangent);
}

TEST_CASE("sphere jacobian closed forms at special lengths") {
  Vec3d p{0, 0, 1};
  Vec3d v{M_PI / 2, 0, 0};
  auto j = sphere_jacobians(p, v);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) CHECK(close(j.j_p(i, k), 0.0, 1e-12));

  Vec3d tiny{1e-6, 0, 0};
  auto jt = sphere_jacobians(p, tiny);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(close(jt.j_v(i, k), i == k ? 1.0 : 0.0, 1e-5));
}

TEST_CASE("sphere jacobian w.r.t. v matches central finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    double z = rng.uniform(-1, 1), phi = 2 * M_PI * rng.uniform();
    double r = std::sqrt(1 - z * z);
    Vec3d p{r * std::cos(phi), r * std::sin(phi), z};
    Vec3d t1 = normalized(cross(p, std::abs(p.z) < 0.9 ? Vec3d{0, 0, 1} : Vec3d{1, 0, 0}));
    Vec3d t2 = cross(p, t1);
    double a = 2 * M_PI * rng.uniform();
    double len = rng.uniform(0.1, 1.4);
    Vec3d v = (t1 * std::cos(a) + t2 * std::sin(a)) * len;

    auto j = sphere_jacobians(p, v);
    const double h = 1e-6;
    for (int col = 0; col < 2; ++col) {
      Vec3d dv = (col == 0 ? t1 : t2) * h;
      // Keep perturbations tangent so the oracle stays on the sphere.
      Vec3d fp = sphere_exp(p, v + dv);
      Vec3d fm = sphere_exp(p, v - dv);
      Vec3d fd = (fp - fm) / (2 * h);
      Vec3d an = j.j_v * (dv / h);
      CHECK(close(fd, an, 1e-6));
    }
  }
}

TEST_CASE("torus pure minor-circle motion keeps alpha fixed") {
  TorusState s;
  s.r_major = 2;
  s.r_minor = 1;
  s.alpha = 0.7;
  s.beta = 0.2;
  s.alpha_dot = 0;
  s.beta_dot = 1;
  auto r = torus_exp(s, 1.5, 1e-3);
  CHECK(close(r.state.alpha, 0.7, 1e-12));
  CHECK(close(r.state.beta, 0.2 + 1.5 / 1.0, 1e-9));  // unit speed: beta' = 1/r
}

TEST_CASE("outer equator is a geodesic") {
  TorusState s;
  s.r_major = 2;
  s.r_minor = 1;
  s.alpha = 0;
  s.beta = 0;  // outer equator: the beta'' forcing term vanishes at sin(0)=0
  s.alpha_dot = 1;
  s.beta_dot = 0;
  auto r = torus_exp(s, 2.0, 1e-3);
  CHECK(close(r.state.beta, 0.0, 1e-10));
  CHECK(close(norm(r.endpoint - Vec3d{0, 0, 0}), 3.0, 1e-9));  // stays on radius R+r
}

TEST_CASE("torus integrator conserves metric speed to 1e-8") {
  TorusState s;
  s.r_major = 2;
  s.r_minor = 1;
  s.alpha = 0.4;
  s.beta = 0.9;
  s.alpha_dot = 0.8;
  s.beta_dot = -0.5;
  double len = 3.0;
  auto r = torus_exp(s, len, len / 2048);
  double w = r.state.r_major + r.state.r_minor * std::cos(r.state.beta);
  double speed = std::sqrt(w * w * r.state.alpha_dot * r.state.alpha_dot +
                           r.state.r_minor * r.state.r_minor * r.state.beta_dot *
                               r.state.beta_dot);
  CHECK(close(speed, 1.0, 1e-8));  // unit-normalised at entry
}

TEST_CASE("projection integration tracks the torus integrator") {
  const double R = 1.0 / 3.0, r = 1.0 / 6.0;
  Mesh m = make_torus(R, r, 48, 24);
  Rng rng(19);
  double mean = 0;
  const int n = 3;
  for (int i = 0; i < n; ++i) {
    int f = rng.uniform_int(m.face_count());
    SurfacePoint p{f, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
    const auto& c = m.faces[f];
    Vec3d t1 = normalized(m.vertices[c[1]] - m.vertices[c[0]]);
    Vec3d nrm = m.face_normals[f];
    Vec3d dir = rotate_about(t1 - nrm * dot(t1, nrm), nrm, rng.uniform(0, 2 * M_PI));
    Vec3d v = normalized(dir) * 0.3;
    PiConfig cfg;
    cfg.step_size = 1e-3 * norm(v);
    SurfacePoint q = pi_exp(m, p, v, cfg);
    TorusState s0 = torus_state_from_ambient(embed(p, m), v, R, r);
    auto ref = torus_exp(s0, norm(v), norm(v) / 2048);
    mean += norm(embed(q, m) - ref.endpoint) / n;
  }
  CHECK(mean <= 2e-2);
}

TEST_CASE("torus integrator conserves metric speed and is time symmetric") {
  TorusState s;
  s.r_major = 2;
  s.r_minor = 1;
  s.alpha = 0.3;
  s.beta = 1.1;
  s.alpha_dot = 0.4;
  s.beta_dot = -0.7;
  double len = 2.5;
  auto fwd = torus_exp(s, len, len / 4096);

  // Unit speed is normalized inside; conservation shows as |g(v,v)-1| small,
  // already enforced by the StepTooLarge guard at 1e-6; re-check tighter.
  TorusState back = fwd.state;
  back.alpha_dot = -back.alpha_dot;
  back.beta_dot = -back.beta_dot;
  auto rtn = torus_exp(back, len, len / 4096);
  Vec3d start = torus_embed(s);
  CHECK(close(rtn.endpoint, start, 1e-6));
}

TEST_CASE("torus state from ambient point and velocity round-trips") {
  TorusState s;
  s.r_major = 2;
  s.r_minor = 1;
  s.alpha = 1.2;
  s.beta = -0.8;
  s.alpha_dot = 0.5;
  s.beta_dot = 0.3;
  Vec3d p = torus_embed(s);
  Vec3d v = torus_velocity_ambient(s);
  TorusState rec = torus_state_from_ambient(p, v, 2, 1);
  CHECK(close(rec.alpha, s.alpha, 1e-12));
  CHECK(close(rec.beta, s.beta, 1e-12));
  CHECK(close(rec.alpha_dot, s.alpha_dot, 1e-12));
  CHECK(close(rec.beta_dot, s.beta_dot, 1e-12));
}

TEST_CASE("projection integration is exact on a planar mesh") {
  Mesh m = make_plane(4, 4, 4.0, 0);
  SurfacePoint p{0, {0.2, 0.4, 0.4}};
  Vec3d v{1.3, 0.9, 0};
  PiConfig cfg;
  cfg.step_size = 0.05;
  SurfacePoint q = pi_exp(m, p, v, cfg);
  CHECK(close(embed(q, m), embed(p, m) + v, 1e-9));
}

TEST_CASE("projection integration respects the iteration cap") {
  Mesh m = make_plane(1, 1, 1.0, 0);
  PiConfig cfg;
  cfg.step_size = 1e-4;
  cfg.max_iterations = 3;
  CHECK_THROWS_AS(pi_exp(m, {0, {0.4, 0.3, 0.3}}, {0.5, 0.2, 0}, cfg), MaxIterations);
}

TEST_CASE("projection integration converges toward the traced endpoint as s shrinks") {
  const Mesh& m = icosphere(3);
  Rng rng(13);
  double prev = std::numeric_limits<double>::infinity();
  for (double frac : {1e-1, 1e-2, 1e-3}) {
    Rng local(13);
    double dev = 0;
    const int n = 4;
    for (int i = 0; i < n; ++i) {
      int f = local.uniform_int(m.face_count());
      SurfacePoint p{f, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
      const auto& c = m.faces[f];
      Vec3d t1 = normalized(m.vertices[c[1]] - m.vertices[c[0]]);
      Vec3d nrm = m.face_normals[f];
      Vec3d dir = rotate_about(t1 - nrm * dot(t1, nrm), nrm, local.uniform(0, 2 * M_PI));
      Vec3d v = normalized(dir) * 0.9;
      PiConfig cfg;
      cfg.step_size = frac * norm(v);
      SurfacePoint q = pi_exp(m, p, v, cfg);
      auto tr = digeo::trace(m, p, {p, v});
      dev += norm(embed(q, m) - embed(tr.final_point, m)) / n;
    }
    CHECK(dev <= prev * 1.1);  // monotone within 10% slack
    prev = dev;
  }
}

TEST_CASE("fixture generators produce the expected counts") {
  CHECK(icosphere(0).face_count() == 20);
  CHECK(icosphere(3).face_count() == 1280);
  CHECK(make_torus(2, 1, 64, 32).face_count() == 2 * 64 * 32);
  CHECK(make_plane(3, 2, 1.0, 0).face_count() == 12);
  CHECK(make_cylinder(1, 2, 16, 4).face_count() == 2 * 16 * 4);
  CHECK(make_cone(1, 1, 12).face_count() == 12);
}

TEST_CASE("icosphere vertices lie exactly on the unit sphere") {
  const Mesh& m = icosphere(3);
  for (const auto& v : m.vertices) CHECK(close(norm(v), 1.0, 1e-12));
}

TEST_CASE("torus vertices lie exactly on the analytic torus") {
  Mesh t = make_torus(2, 1, 32, 16);
  for (const auto& p : t.vertices) {
    double rho = std::hypot(p.x, p.y);
    double d = std::hypot(rho - 2.0, p.z);
    CHECK(close(d, 1.0, 1e-12));
  }
}

TEST_CASE("randomised plane triangulations stay planar and load") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Mesh m = make_plane(6, 6, 1.0, seed);
    CHECK(m.face_count() == 72);
    for (const auto& v : m.vertices) CHECK(v.z == 0.0);
  }
}
