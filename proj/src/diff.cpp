#include "digeo/diff.hpp"

#include <cmath>
#include <functional>

namespace digeo {

GfdConfig default_gfd_config(const Mesh& m) {
  double eps = 1e-4 * m.mean_edge_length();
  return {eps, eps};
}

TangentFrame make_tangent_frame(const Mesh& m, const SurfacePoint& p, const Vec3d& v) {
  if (norm(v) < 1e-12) throw DegenerateDirection("tangent frame needs a nonzero direction");
  TangentFrame f;
  f.origin = p;
  f.normal = m.face_normals[p.face];
  Vec3d in_plane = v - f.normal * dot(v, f.normal);
  if (norm(in_plane) < 1e-12 * norm(v))
    throw DegenerateDirection("direction is normal to the face");
  f.e_par = normalized(in_plane);
  f.e_perp = cross(f.normal, f.e_par);
  return f;
}

BaryFrame make_bary_frame(const Mesh& m, const SurfacePoint& p) {
  const auto& c = m.faces[p.face];
  BaryFrame f;
  f.origin = p;
  f.u_hat = normalized(m.vertices[c[1]] - m.vertices[c[0]]);
  f.v_hat = normalized(m.vertices[c[2]] - m.vertices[c[0]]);
  // (M^T M)^-1 M^T for M = [u_hat v_hat]
  double g11 = dot(f.u_hat, f.u_hat), g12 = dot(f.u_hat, f.v_hat), g22 = dot(f.v_hat, f.v_hat);
  double det = g11 * g22 - g12 * g12;
  f.pinv_row0 = (f.u_hat * g22 - f.v_hat * g12) / det;
  f.pinv_row1 = (f.v_hat * g11 - f.u_hat * g12) / det;
  return f;
}

std::array<double, 2> frame_out_covector(const BaryFrame& f, const Vec3d& g) {
  return {dot(f.u_hat, g), dot(f.v_hat, g)};
}

JacobianPair ep_jacobians(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                          const GeodesicTrace& trace) {
  if (norm(v) < 1e-12) throw DegenerateDirection("ep_jacobians: |v| too small");
  JacobianPair out;
  out.frame_in_v = make_tangent_frame(m, p, v);
  out.frame_in_p = make_bary_frame(m, p);
  out.frame_out = make_bary_frame(m, trace.final_point);

  // Frame at the endpoint from the parallel-transported direction (the
  // tangent transported along its own geodesic is the final direction).
  Vec3d n_out = m.face_normals[trace.final_point.face];
  Vec3d e_par_out = normalized(trace.final_dir - n_out * dot(trace.final_dir, n_out));
  Vec3d e_perp_out = cross(n_out, e_par_out);

  Mat3 m_p = Mat3::from_columns(out.frame_in_v.e_par, out.frame_in_v.e_perp,
                                out.frame_in_v.normal);
  Mat3 m_q = Mat3::from_columns(e_par_out, e_perp_out, n_out);
  out.rotation_ep = m_q * m_p.transposed();

  out.j_v = Mat2::identity();
  out.j_p = Mat2::zero();
  return out;
}

namespace {

struct TraceJob {
  SurfacePoint start;
  Vec3d vec;
  std::optional<Vec3d> payload;
};

using Runner = std::function<std::vector<GeodesicTrace>(const std::vector<TraceJob>&)>;

TraceConfig quiet_config() {
  TraceConfig tc;
  tc.record_polyline = false;
  return tc;
}

Runner serial_runner(const Mesh& m) {
  return [&m](const std::vector<TraceJob>& jobs) {
    std::vector<GeodesicTrace> out;
    out.reserve(jobs.size());
    for (const auto& j : jobs) {
      TraceConfig tc = quiet_config();
      tc.transport_payload = j.payload;
      out.push_back(trace(m, j.start, {j.start, j.vec}, tc));
    }
    return out;
  };
}

Runner batch_runner(const Mesh& m, int workers) {
  return [&m, workers](const std::vector<TraceJob>& jobs) {
    BatchRequest req;
    req.mesh = &m;
    req.config = quiet_config();
    bool any_payload = false;
    for (const auto& j : jobs) any_payload = any_payload || j.payload.has_value();
    req.starts.reserve(jobs.size());
    req.dirs.reserve(jobs.size());
    if (any_payload) req.payloads.reserve(jobs.size());
    for (const auto& j : jobs) {
      req.starts.push_back(j.start);
      req.dirs.push_back({j.start, j.vec});
      if (any_payload) req.payloads.push_back(j.payload.value_or(Vec3d{0, 0, 0}));
    }
    return trace_batch(req, workers);
  };
}

bool reached(const GeodesicTrace& t) {
  return t.status == TraceStatus::Ok &&
         t.terminated_by == TraceTermination::LengthReached;
}

void require_base(const GeodesicTrace& base) {
  if (!reached(base))
    throw Error("gfd: the base trace did not reach its requested length");
}

// One forward-difference column. When the positive perturbation escaped the
// mesh (boundary termination), fall back to the one-sided difference on the
// other side; a column that fails both ways is zeroed and flagged.
template <class MinusSide>
Vec3d fd_column(const Mesh& m, const GeodesicTrace& plus, double eps, const Vec3d& ref,
                const MinusSide& minus_side, bool& degraded) {
  if (reached(plus)) return (embed(plus.final_point, m) - ref) / eps;
  degraded = true;
  GeodesicTrace minus = minus_side();
  if (reached(minus)) return (ref - embed(minus.final_point, m)) / eps;
  return {0, 0, 0};
}

struct JvJobs {
  TraceJob perp;                    // round 1
  TraceJob par(const GeodesicTrace& base, double eps) const {
    return {base.final_point, base.final_dir * eps, std::nullopt};
  }
};

JvJobs make_jv_jobs(const TangentFrame& fv, const SurfacePoint& p, const Vec3d& v,
                    double eps) {
  return {TraceJob{p, v + fv.e_perp * eps, std::nullopt}};
}

Mat2 assemble_jv(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                 const GeodesicTrace& base, const TangentFrame& fv, const BaryFrame& fout,
                 const GeodesicTrace& perp_tr, const GeodesicTrace& par_tr, double eps,
                 std::array<bool, 2>& degraded) {
  Vec3d ref = embed(base.final_point, m);

  Vec3d col_par = fd_column(
      m, par_tr, eps, ref,
      [&] {
        TraceConfig tc = quiet_config();
        return trace(m, base.final_point, {base.final_point, base.final_dir * -eps}, tc);
      },
      degraded[0]);
  Vec3d col_perp = fd_column(
      m, perp_tr, eps, ref,
      [&] {
        TraceConfig tc = quiet_config();
        return trace(m, p, {p, v - fv.e_perp * eps}, tc);
      },
      degraded[1]);

  auto a = std::array<double, 2>{dot(fout.pinv_row0, col_par), dot(fout.pinv_row1, col_par)};
  auto b = std::array<double, 2>{dot(fout.pinv_row0, col_perp), dot(fout.pinv_row1, col_perp)};
  return Mat2{a[0], b[0], a[1], b[1]};
}

Mat2 assemble_jp(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                 const GeodesicTrace& base, const BaryFrame& fp, const BaryFrame& fout,
                 const GeodesicTrace& seed_u, const GeodesicTrace& seed_v,
                 const GeodesicTrace& ret_u, const GeodesicTrace& ret_v, double eps,
                 std::array<bool, 2>& degraded) {
  if (!reached(seed_u) || !reached(seed_v) || !seed_u.transported_payload ||
      !seed_v.transported_payload)
    throw Error("gfd: start-point perturbation seeds failed to trace");

  Vec3d ref = embed(base.final_point, m);
  auto minus_retrace = [&](const Vec3d& seed_dir) {
    TraceConfig tc = quiet_config();
    tc.transport_payload = v;
    GeodesicTrace back = trace(m, p, {p, seed_dir * -eps}, tc);
    if (!reached(back) || !back.transported_payload) return GeodesicTrace{};
    TraceConfig tc2 = quiet_config();
    return trace(m, back.final_point, {back.final_point, *back.transported_payload}, tc2);
  };

  Vec3d col_u = fd_column(m, ret_u, eps, ref, [&] { return minus_retrace(fp.u_hat); },
                          degraded[0]);
  Vec3d col_v = fd_column(m, ret_v, eps, ref, [&] { return minus_retrace(fp.v_hat); },
                          degraded[1]);

  auto a = std::array<double, 2>{dot(fout.pinv_row0, col_u), dot(fout.pinv_row1, col_u)};
  auto b = std::array<double, 2>{dot(fout.pinv_row0, col_v), dot(fout.pinv_row1, col_v)};
  return Mat2{a[0], b[0], a[1], b[1]};
}

}  // namespace

Mat2 gfd_jacobian_v(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const GeodesicTrace& base, const GfdConfig& cfg) {
  require_base(base);
  TangentFrame fv = make_tangent_frame(m, p, v);
  BaryFrame fout = make_bary_frame(m, base.final_point);
  Runner run = serial_runner(m);

  JvJobs jobs = make_jv_jobs(fv, p, v, cfg.eps_v);
  auto round1 = run({jobs.perp});
  auto round2 = run({jobs.par(base, cfg.eps_v)});
  std::array<bool, 2> degraded{false, false};
  return assemble_jv(m, p, v, base, fv, fout, round1[0], round2[0], cfg.eps_v, degraded);
}

Mat2 gfd_jacobian_p(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                    const GeodesicTrace& base, const GfdConfig& cfg) {
  require_base(base);
  BaryFrame fp = make_bary_frame(m, p);
  BaryFrame fout = make_bary_frame(m, base.final_point);
  Runner run = serial_runner(m);

  auto round1 = run({TraceJob{p, fp.u_hat * cfg.eps_p, v},
                     TraceJob{p, fp.v_hat * cfg.eps_p, v}});
  std::vector<TraceJob> round2_jobs;
  for (const auto& seed : round1) {
    if (reached(seed) && seed.transported_payload)
      round2_jobs.push_back({seed.final_point, *seed.transported_payload, std::nullopt});
    else
      round2_jobs.push_back({p, Vec3d{0, 0, 0}, std::nullopt});  // placeholder
  }
  auto round2 = run(round2_jobs);
  std::array<bool, 2> degraded{false, false};
  return assemble_jp(m, p, v, base, fp, fout, round1[0], round1[1], round2[0], round2[1],
                     cfg.eps_p, degraded);
}

JacobianPair gfd_batched(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                         const GeodesicTrace& base, const GfdConfig& cfg, int workers) {
  require_base(base);
  JacobianPair out;
  out.frame_in_v = make_tangent_frame(m, p, v);
  out.frame_in_p = make_bary_frame(m, p);
  out.frame_out = make_bary_frame(m, base.final_point);
  Runner run = batch_runner(m, workers);

  JvJobs jv = make_jv_jobs(out.frame_in_v, p, v, cfg.eps_v);
  auto round1 = run({jv.perp, TraceJob{p, out.frame_in_p.u_hat * cfg.eps_p, v},
                     TraceJob{p, out.frame_in_p.v_hat * cfg.eps_p, v}});
  std::vector<TraceJob> r2jobs{jv.par(base, cfg.eps_v)};
  for (int i = 1; i <= 2; ++i) {
    if (reached(round1[i]) && round1[i].transported_payload)
      r2jobs.push_back(
          {round1[i].final_point, *round1[i].transported_payload, std::nullopt});
    else
      r2jobs.push_back({p, Vec3d{0, 0, 0}, std::nullopt});
  }
  auto round2 = run(r2jobs);

  out.j_v = assemble_jv(m, p, v, base, out.frame_in_v, out.frame_out, round1[0], round2[0],
                        cfg.eps_v, out.degraded_v);
  out.j_p = assemble_jp(m, p, v, base, out.frame_in_p, out.frame_out, round1[1], round1[2],
                        round2[1], round2[2], cfg.eps_p, out.degraded_p);
  return out;
}

std::vector<JacobianPair> gfd_batched_many(const Mesh& m,
                                           const std::vector<GfdSample>& samples,
                                           const GfdConfig& cfg, int workers) {
  const int n = int(samples.size());
  std::vector<JacobianPair> out(n);
  if (n == 0) return out;

  std::vector<TraceJob> round1;
  round1.reserve(size_t(4) * n);
  std::vector<TangentFrame> fvs(n);
  std::vector<BaryFrame> fps(n);
  for (int i = 0; i < n; ++i) {
    const auto& s = samples[i];
    fvs[i] = make_tangent_frame(m, s.p, s.v);
    fps[i] = make_bary_frame(m, s.p);
    round1.push_back({s.p, s.v, std::nullopt});                        // base
    round1.push_back({s.p, s.v + fvs[i].e_perp * cfg.eps_v, std::nullopt});
    round1.push_back({s.p, fps[i].u_hat * cfg.eps_p, s.v});
    round1.push_back({s.p, fps[i].v_hat * cfg.eps_p, s.v});
  }
  Runner run = batch_runner(m, workers);
  auto r1 = run(round1);

  std::vector<TraceJob> round2;
  round2.reserve(size_t(3) * n);
  for (int i = 0; i < n; ++i) {
    const GeodesicTrace& base = r1[4 * i];
    require_base(base);
    round2.push_back({base.final_point, base.final_dir * cfg.eps_v, std::nullopt});
    for (int k = 2; k <= 3; ++k) {
      const GeodesicTrace& seed = r1[4 * i + k];
      if (reached(seed) && seed.transported_payload)
        round2.push_back({seed.final_point, *seed.transported_payload, std::nullopt});
      else
        round2.push_back({samples[i].p, Vec3d{0, 0, 0}, std::nullopt});
    }
  }
  auto r2 = run(round2);

  for (int i = 0; i < n; ++i) {
    const auto& s = samples[i];
    const GeodesicTrace& base = r1[4 * i];
    JacobianPair& jp = out[i];
    jp.frame_in_v = fvs[i];
    jp.frame_in_p = fps[i];
    jp.frame_out = make_bary_frame(m, base.final_point);
    jp.j_v = assemble_jv(m, s.p, s.v, base, fvs[i], jp.frame_out, r1[4 * i + 1], r2[3 * i],
                         cfg.eps_v, jp.degraded_v);
    jp.j_p = assemble_jp(m, s.p, s.v, base, fps[i], jp.frame_out, r1[4 * i + 2],
                         r1[4 * i + 3], r2[3 * i + 1], r2[3 * i + 2], cfg.eps_p,
                         jp.degraded_p);
  }
  return out;
}

std::pair<std::array<double, 2>, std::array<double, 2>> pullback(
    const std::array<double, 2>& grad_out, const JacobianPair& jac) {
  if (jac.rotation_ep) {
    // EP: j_v is the identity in matched frames. Lift the covector to the
    // tangential ambient gradient at p' and read off its components on the
    // transported frame axes R e_par, R e_perp.
    Vec3d g_tan = jac.frame_out.pinv_row0 * grad_out[0] + jac.frame_out.pinv_row1 * grad_out[1];
    const Mat3& r = *jac.rotation_ep;
    Vec3d e_par_out = r * jac.frame_in_v.e_par;
    Vec3d e_perp_out = r * jac.frame_in_v.e_perp;
    std::array<double, 2> gv{dot(e_par_out, g_tan), dot(e_perp_out, g_tan)};
    gv = jac.j_v.transposed() * gv;
    return {gv, {0.0, 0.0}};
  }
  std::array<double, 2> gv = jac.j_v.transposed() * grad_out;
  std::array<double, 2> gp = jac.j_p.transposed() * grad_out;
  return {gv, gp};
}

PulledGradients pullback_ambient(const Vec3d& grad_at_endpoint, const JacobianPair& jac) {
  auto grad_out = frame_out_covector(jac.frame_out, grad_at_endpoint);
  auto [gv, gp] = pullback(grad_out, jac);
  PulledGradients out;
  out.grad_v = jac.frame_in_v.e_par * gv[0] + jac.frame_in_v.e_perp * gv[1];
  out.grad_p = jac.frame_in_p.pinv_row0 * gp[0] + jac.frame_in_p.pinv_row1 * gp[1];
  return out;
}

}  // namespace digeo
