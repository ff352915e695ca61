#pragma once

#include "digeo/geometry.hpp"
#include "digeo/mesh.hpp"

namespace digeo {

// --- Closed-form sphere operators (unit sphere) ---

// Endpoint of the great-circle geodesic from p with tangent v.
Vec3d sphere_exp(const Vec3d& p, const Vec3d& v);

struct SphereJacobians {
  Mat3 j_p;  // d Exp / d p
  Mat3 j_v;  // d Exp / d v
};
SphereJacobians sphere_jacobians(const Vec3d& p, const Vec3d& v);

// --- Torus geodesic IVP ---

struct TorusState {
  double alpha = 0, beta = 0;
  double alpha_dot = 0, beta_dot = 0;
  double r_major = 2, r_minor = 1;
};

Vec3d torus_embed(const TorusState& s);
Vec3d torus_velocity_ambient(const TorusState& s);

// Angular state for an ambient point/velocity pair. The point is projected
// onto the analytic torus first; the resulting speed equals ||v||.
TorusState torus_state_from_ambient(const Vec3d& p, const Vec3d& v, double r_major,
                                    double r_minor);

struct TorusExpResult {
  TorusState state;
  Vec3d endpoint;
};

// Integrates the geodesic equations with classic fixed-step RK4 until the
// arc-length parameter reaches `length`. The initial velocity is rescaled to
// unit metric speed. Throws StepTooLarge if the metric speed drifts by more
// than 1e-6 relative.
TorusExpResult torus_exp(const TorusState& state0, double length, double step);

// --- Projection Integration baseline ---

struct PiConfig {
  double step_size = 1e-3;  // ambient length per step
  int max_iterations = 0;   // 0 = derived from length/step
};

// Alternates a straight ambient step with a brute-force closest-point
// projection over all faces, rotating the direction into each new face
// plane. O(F) per step by construction; kept as an accuracy baseline.
SurfacePoint pi_exp(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const PiConfig& cfg);

// --- Parametric fixtures ---

Mesh make_icosphere(int subdiv);
Mesh make_torus(double r_major, double r_minor, int n_alpha, int n_beta);
// Axis-aligned square [0,size]^2 in the z=0 plane, (nx x ny) quads split into
// triangles. seed == 0 gives the regular diagonal split; seed > 0 randomises
// diagonal orientation and jitters interior vertices in-plane.
Mesh make_plane(int nx, int ny, double size = 1.0, std::uint64_t seed = 0);
Mesh make_cylinder(double radius, double height, int n_around, int n_height);
// Open cone side surface: apex at z = height, boundary circle at z = 0.
Mesh make_cone(double radius, double height, int n_around);

}  // namespace digeo
