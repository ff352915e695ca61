#pragma once

#include <array>
#include <optional>
#include <vector>

#include "digeo/geometry.hpp"
#include "digeo/mesh.hpp"
#include "digeo/tracer.hpp"

namespace digeo {

// Orthonormal right-handed frame at a surface point, aligned with a tangent
// direction: e_par = v/|v|, e_perp = normal x e_par.
struct TangentFrame {
  SurfacePoint origin;
  Vec3d e_par, e_perp, normal;
};

// Non-orthogonal frame spanned by the normalized face edges u_hat, v_hat,
// with the Moore-Penrose pseudo-inverse rows for projecting ambient vectors
// onto basis coefficients.
struct BaryFrame {
  SurfacePoint origin;
  Vec3d u_hat, v_hat;
  Vec3d pinv_row0, pinv_row1;  // rows of (M^T M)^-1 M^T
};

struct GfdConfig {
  double eps_v = 1e-4;
  double eps_p = 1e-4;
};
GfdConfig default_gfd_config(const Mesh& m);  // 1e-4 x mean edge length

// Local-frame Jacobians of Exp_p(v). j_v maps perturbation coefficients in
// frame_in_v to basis coefficients in frame_out; j_p likewise from
// frame_in_p. For the extrinsic-proxy scheme j_v is stored as the identity
// with the frame rotation carried in rotation_ep, and j_p is exactly zero.
struct JacobianPair {
  Mat2 j_v = Mat2::identity();
  Mat2 j_p = Mat2::zero();
  TangentFrame frame_in_v;
  BaryFrame frame_in_p;
  BaryFrame frame_out;
  std::optional<Mat3> rotation_ep;
  std::array<bool, 2> degraded_v{false, false};  // one-sided fallback used
  std::array<bool, 2> degraded_p{false, false};
};

TangentFrame make_tangent_frame(const Mesh& m, const SurfacePoint& p, const Vec3d& v);
BaryFrame make_bary_frame(const Mesh& m, const SurfacePoint& p);

// Extrinsic-proxy Jacobians from a forward trace: the rigid rotation between
// the start frame and its parallel-transported image at the endpoint. The
// forward map is rotation_ep = M_p' M_p^T; the backward pass applies its
// transpose, transporting upstream gradients from p' back to p.
JacobianPair ep_jacobians(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                          const GeodesicTrace& trace);

// Geodesic finite differences, Jacobian w.r.t. the tangent vector: one full
// retrace perturbed along e_perp plus a short continuation from p' for the
// parallel column.
Mat2 gfd_jacobian_v(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const GeodesicTrace& trace, const GfdConfig& cfg);

// Jacobian w.r.t. the start point: perturb p along u_hat/v_hat by short exp
// maps, parallel-transport v to the perturbed starts, retrace.
Mat2 gfd_jacobian_p(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const GeodesicTrace& trace, const GfdConfig& cfg);

// Both GFD Jacobians with the perturbation traces grouped into two
// trace_batch rounds. Arithmetic path identical to the unbatched ops.
JacobianPair gfd_batched(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                         const GeodesicTrace& trace, const GfdConfig& cfg,
                         int workers = 0);

struct GfdSample {
  SurfacePoint p;
  Vec3d v;
};

// Vectorized GFD across samples: round one traces base + perturbation seeds
// for every sample, round two the dependent retraces.
std::vector<JacobianPair> gfd_batched_many(const Mesh& m,
                                           const std::vector<GfdSample>& samples,
                                           const GfdConfig& cfg, int workers = 0);

// Chain rule: grad_out holds the covariant components M^T g of the upstream
// ambient gradient g on frame_out. Returns coefficient gradients w.r.t. the
// frame_in_v axes and the frame_in_p axes.
std::pair<std::array<double, 2>, std::array<double, 2>> pullback(
    const std::array<double, 2>& grad_out, const JacobianPair& jac);

// Ambient-to-ambient convenience wrapper around pullback: lifts the result
// back to ambient vectors in the tangent planes at p.
struct PulledGradients {
  Vec3d grad_v;
  Vec3d grad_p;
};
PulledGradients pullback_ambient(const Vec3d& grad_at_endpoint, const JacobianPair& jac);

std::array<double, 2> frame_out_covector(const BaryFrame& f, const Vec3d& g);

}  // namespace digeo
