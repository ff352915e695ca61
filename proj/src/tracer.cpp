#include "digeo/tracer.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace digeo {

namespace {

template <class S>
struct Tol;
template <>
struct Tol<double> {
  static constexpr double bary = kBaryTol;
  static constexpr double dir_rel = 1e-12;
  static constexpr double angle = 1e-12;
};
template <>
struct Tol<float> {
  static constexpr float bary = kBaryTolF;
  static constexpr float dir_rel = 1e-5f;
  static constexpr float angle = 1e-5f;
};

// Isometry mapping tangent vectors across a fold: decompose on the shared
// edge direction and the in-plane edge normals of the two faces. Equals the
// rotation by the dihedral angle restricted to the tangent planes, and never
// references face orientation, so non-orientable meshes work.
template <class S>
struct EdgeTransport {
  Vec3<S> edge;     // unit, same ambient vector for both faces
  Vec3<S> in_from;  // unit in-plane edge normal pointing into the from-face
  Vec3<S> in_to;    // unit in-plane edge normal pointing into the to-face

  Vec3<S> operator()(const Vec3<S>& w) const {
    return edge * dot(w, edge) - in_to * dot(w, in_from);
  }
};

template <class S>
struct Kernel {
  const Mesh& m;
  const TraceConfig& cfg;
  int max_steps;

  int face = 0;
  Vec3<S> bary{};
  Vec3<S> dir{};
  S remaining = 0;
  S target = 0;

  bool has_payload = false;
  Vec3<S> payload{};
  S payload_norm = 0;
  bool want_q = false;
  Vec3<S> q0{1, 0, 0}, q1{0, 1, 0}, q2{0, 0, 1};

  StepEvent last_event = StepEvent::Advanced;
  GeodesicTrace out;

  enum class Outcome { Continue, Finished, Boundary, Maxed, Stalled };

  Kernel(const Mesh& mesh, const TraceConfig& config)
      : m(mesh),
        cfg(config),
        max_steps(config.max_steps > 0 ? config.max_steps : default_max_steps(mesh)) {}

  Vec3<S> vert(int i) const { return Vec3<S>(m.vertices[i]); }
  Vec3<S> fnormal(int f) const { return Vec3<S>(m.face_normals[f]); }

  SurfacePoint widened_point() const {
    // Renormalise in double so emitted points satisfy the simplex contract
    // even when the stepping arithmetic ran in single precision.
    Vec3d b{double(bary.x), double(bary.y), double(bary.z)};
    double s = b[0] + b[1] + b[2];
    if (s > 0 && s != 1.0) b = b / s;
    return {face, b};
  }

  void push_point(S seg_len) {
    out.traced_length += double(seg_len);
    if (!cfg.record_polyline) return;
    out.points.push_back(widened_point());
    out.segment_lengths.push_back(double(seg_len));
  }

  template <class Map>
  void apply_transport(const Map& t) {
    if (has_payload) {
      payload = t(payload);
      S n = norm(payload);
      if (n > 0) payload *= payload_norm / n;
    }
    if (want_q) {
      q0 = t(q0);
      q1 = t(q1);
      q2 = t(q2);
    }
  }

  // In-plane unit normal of edge (va, vc) pointing toward corner voff.
  Vec3<S> edge_inward(int va, int vc, int voff) const {
    Vec3<S> a = vert(va);
    Vec3<S> e = normalized(vert(vc) - a);
    Vec3<S> w = vert(voff) - a;
    return normalized(w - e * dot(w, e));
  }

  EdgeTransport<S> make_edge_transport(int f_from, int f_to, int va, int vc) const {
    int off_from = -1, off_to = -1;
    for (int k = 0; k < 3; ++k) {
      int u = m.faces[f_from][k];
      if (u != va && u != vc) off_from = u;
      int w = m.faces[f_to][k];
      if (w != va && w != vc) off_to = w;
    }
    EdgeTransport<S> t;
    t.edge = normalized(vert(vc) - vert(va));
    t.in_from = edge_inward(va, vc, off_from);
    t.in_to = edge_inward(va, vc, off_to);
    return t;
  }

  // Coefficients of w on the edges (x1-x0, x2-x0) of face g at local corner
  // k. Least-squares, so out-of-plane components project away.
  std::pair<S, S> wedge_coeffs(int g, int k, const Vec3<S>& w) const {
    Vec3<S> x0 = vert(m.faces[g][k]);
    Vec3<S> e1 = vert(m.faces[g][(k + 1) % 3]) - x0;
    Vec3<S> e2 = vert(m.faces[g][(k + 2) % 3]) - x0;
    S g11 = dot(e1, e1), g12 = dot(e1, e2), g22 = dot(e2, e2);
    S det = g11 * g22 - g12 * g12;
    S r1 = dot(e1, w), r2 = dot(e2, w);
    return {(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det};
  }

  bool wedge_contains(int g, int k, const Vec3<S>& w) const {
    auto [c1, c2] = wedge_coeffs(g, k, w);
    S mag = std::abs(c1) + std::abs(c2);
    if (mag <= 0) return false;
    S tol = Tol<S>::dir_rel * mag;
    return c1 >= -tol && c2 >= -tol;
  }

  void snap_bary() {
    for (int i = 0; i < 3; ++i) {
      if (bary[i] <= Tol<S>::bary) bary[i] = 0;
    }
    S s = bary[0] + bary[1] + bary[2];
    if (s > 0) bary = bary / s;
    for (int i = 0; i < 3; ++i) {
      if (bary[i] >= S(1) - Tol<S>::bary) {
        bary = Vec3<S>{0, 0, 0};
        bary[i] = 1;
        break;
      }
    }
  }

  int vertex_corner() const {
    for (int i = 0; i < 3; ++i)
      if (bary[i] == S(1)) return i;
    return -1;
  }

  Outcome stall(const std::string& why) {
    out.status = TraceStatus::Stalled;
    out.error = why;
    return Outcome::Stalled;
  }

  // Straight barycentric advance in the current face: exits across an edge,
  // lands on a vertex, or consumes the remaining length.
  Outcome advance() {
    auto [bv1, bv2] = wedge_coeffs(face, 0, dir);
    Vec3<S> bv{-(bv1 + bv2), bv1, bv2};

    S scale = std::abs(bv[0]) + std::abs(bv[1]) + std::abs(bv[2]);
    if (!std::isfinite(double(scale)) || scale <= 0)
      return stall("degenerate direction in face");
    S tol = Tol<S>::dir_rel * scale;

    S best = std::numeric_limits<S>::infinity();
    int exit_edge = -1;
    for (int i = 0; i < 3; ++i) {
      if (bv[i] >= -tol) continue;
      S lambda = -bary[i] / bv[i];
      if (lambda < 0) lambda = 0;
      if (lambda < best) {
        best = lambda;
        exit_edge = i;
      }
    }
    if (exit_edge < 0) return stall("no positive exit parameter");

    if (best >= remaining) {
      bary += bv * remaining;
      snap_bary();
      push_point(remaining);
      remaining = 0;
      last_event = StepEvent::Advanced;
      return Outcome::Finished;
    }

    bary += bv * best;
    bary[exit_edge] = 0;
    snap_bary();
    remaining -= best;
    push_point(best);

    if (vertex_corner() >= 0) {
      last_event = StepEvent::Advanced;
      return Outcome::Continue;  // vertex branch on the next transition
    }
    if (bary[exit_edge] != 0) {
      last_event = StepEvent::Advanced;
      return Outcome::Continue;
    }
    return cross_edge(exit_edge);
  }

  Outcome cross_edge(int k) {
    int g = m.face_adjacency[face][k];
    if (g < 0) {
      if (cfg.hole_avoidance) return slide_from_edge(k);
      last_event = StepEvent::BoundaryStop;
      return Outcome::Boundary;
    }
    int va = m.faces[face][(k + 1) % 3];
    int vc = m.faces[face][(k + 2) % 3];
    S wa = bary[(k + 1) % 3], wc = bary[(k + 2) % 3];

    EdgeTransport<S> t = make_edge_transport(face, g, va, vc);
    dir = normalized(t(dir));
    apply_transport(t);

    Vec3<S> nb{0, 0, 0};
    nb[m.corner_of(g, va)] = wa;
    nb[m.corner_of(g, vc)] = wc;
    face = g;
    bary = nb;
    snap_bary();
    last_event = StepEvent::CrossedEdge;
    return Outcome::Continue;
  }

  // theta_l = theta_r continuation through vertex x0, arriving via `face`.
  // Returns false when the fan ends at the boundary first.
  bool fan_walk(int x0) {
    S theta = S(m.vertex_total_angle[x0]);
    S half = theta / 2;
    Vec3<S> x0p = vert(x0);
    Vec3<S> rev = -dir;

    int k0 = m.corner_of(face, x0);
    int p1 = m.faces[face][(k0 + 1) % 3];
    int p2 = m.faces[face][(k0 + 2) % 3];
    S a1 = angle_between(rev, vert(p1) - x0p);
    S a2 = angle_between(rev, vert(p2) - x0p);

    int x1 = a1 <= a2 ? p1 : p2;
    S alpha = std::min(a1, a2);
    int g = face;
    int near_vertex = -1;
    Vec3<S> carried = dir;  // incoming direction carried through the fan

    // Half the total angle is reached within one cycle of the fan.
    int guard = int(m.vertex_faces(x0).size()) + 2;
    while (alpha < half - Tol<S>::angle) {
      if (--guard < 0) return false;
      int gn = m.neighbor_across(g, x0, x1);
      if (gn < 0) return false;
      int x2 = -1;
      for (int k = 0; k < 3; ++k) {
        int u = m.faces[gn][k];
        if (u != x0 && u != x1) x2 = u;
      }
      alpha += angle_between(vert(x1) - x0p, vert(x2) - x0p);
      EdgeTransport<S> t = make_edge_transport(g, gn, x0, x1);
      carried = t(carried);
      apply_transport(t);
      near_vertex = x1;
      g = gn;
      x1 = x2;
    }

    S beta = std::max(S(0), alpha - half);
    Vec3<S> e_far = normalized(vert(x1) - x0p);
    Vec3<S> n_g = fnormal(g);
    Vec3<S> e_near = near_vertex >= 0 ? normalized(vert(near_vertex) - x0p) : rev;
    S side = signed_angle(e_far, e_near, n_g) >= 0 ? S(1) : S(-1);
    Vec3<S> outgoing = rotate_about(e_far, n_g, side * beta);
    outgoing = normalized(outgoing - n_g * dot(outgoing, n_g));

    if (has_payload || want_q) {
      Vec3<S> carried_in_plane = normalized(carried - n_g * dot(carried, n_g));
      S rho = signed_angle(carried_in_plane, outgoing, n_g);
      auto rot = [&](const Vec3<S>& w) { return rotate_about(w, n_g, rho); };
      apply_transport(rot);
    }

    face = g;
    bary = Vec3<S>{0, 0, 0};
    bary[m.corner_of(g, x0)] = 1;
    dir = outgoing;
    last_event = StepEvent::CrossedVertex;
    return true;
  }

  // Hole avoidance at a boundary vertex: resume on the incident face with
  // the smallest transport error (projection angle, infinite when the
  // projected direction exits the face), else slide along the boundary.
  Outcome blue_vertex(int x0) {
    int best_face = -1;
    S best_err = std::numeric_limits<S>::infinity();
    for (int g : m.vertex_faces(x0)) {
      Vec3<S> n = fnormal(g);
      Vec3<S> proj = dir - n * dot(dir, n);
      if (norm(proj) < S(1e-6)) continue;
      if (!wedge_contains(g, m.corner_of(g, x0), proj)) continue;
      S err = angle_between(dir, proj);
      if (err < best_err) {
        best_err = err;
        best_face = g;
      }
    }
    if (best_face >= 0) {
      Vec3<S> n = fnormal(best_face);
      auto project = [&](const Vec3<S>& w) { return w - n * dot(w, n); };
      dir = normalized(project(dir));
      apply_transport(project);
      face = best_face;
      bary = Vec3<S>{0, 0, 0};
      bary[m.corner_of(best_face, x0)] = 1;
      last_event = StepEvent::BoundarySlide;
      // Advance straight away: re-dispatching at this vertex would re-enter
      // the boundary branch without consuming any length.
      return advance();
    }
    return slide_from_vertex(x0);
  }

  Outcome slide_from_vertex(int x0) {
    int best_to = -1, best_face = -1;
    S best_align = -std::numeric_limits<S>::infinity();
    for (int g : m.vertex_faces(x0)) {
      int k0 = m.corner_of(g, x0);
      for (int off = 1; off <= 2; ++off) {
        int kc = (k0 + off) % 3;
        int y = m.faces[g][kc];
        int opp = 3 - k0 - kc;  // corner opposite edge (x0, y)
        if (m.face_adjacency[g][opp] >= 0) continue;
        S align = dot(dir, normalized(vert(y) - vert(x0)));
        if (align > best_align || (align == best_align && y < best_to)) {
          best_align = align;
          best_to = y;
          best_face = g;
        }
      }
    }
    if (best_to < 0) {
      last_event = StepEvent::BoundaryStop;
      return Outcome::Boundary;
    }
    return slide_along(best_face, x0, best_to, S(0));
  }

  Outcome slide_from_edge(int k) {
    int va = m.faces[face][(k + 1) % 3];
    int vc = m.faces[face][(k + 2) % 3];
    Vec3<S> pos = vert(va) * bary[(k + 1) % 3] + vert(vc) * bary[(k + 2) % 3];
    S da = dot(dir, normalized(vert(va) - pos));
    S dc = dot(dir, normalized(vert(vc) - pos));
    int to = da >= dc ? va : vc;
    int from = to == va ? vc : va;
    S t0 = to == va ? bary[(k + 1) % 3] : bary[(k + 2) % 3];  // weight of `to`
    return slide_along(face, from, to, t0);
  }

  // Slide toward vertex `to` from parameter t0 in [0,1), consuming length.
  // The carried direction is kept so tracing can resume (App-style hole
  // rounding); transports are identity along the slide.
  Outcome slide_along(int g, int from, int to, S t0) {
    S edge_len = norm(vert(to) - vert(from));
    S left = edge_len * (S(1) - t0);
    S consume = std::min(left, remaining);
    S t1 = t0 + consume / edge_len;

    face = g;
    bary = Vec3<S>{0, 0, 0};
    bary[m.corner_of(g, from)] = S(1) - t1;
    bary[m.corner_of(g, to)] = t1;
    snap_bary();
    remaining -= consume;
    push_point(consume);
    last_event = StepEvent::BoundarySlide;
    if (remaining <= 0) {
      remaining = 0;
      return Outcome::Finished;
    }
    return Outcome::Continue;
  }

  // Dispatch at a vertex point: fan-walk arrivals, re-anchor departures.
  Outcome at_vertex(int k0) {
    int x0 = m.faces[face][k0];
    if (cfg.hole_avoidance && m.vertex_on_boundary[x0]) return blue_vertex(x0);

    if (wedge_contains(face, k0, -dir)) {  // arriving through this face
      if (fan_walk(x0)) return Outcome::Continue;
      last_event = StepEvent::BoundaryStop;
      return Outcome::Boundary;
    }
    if (wedge_contains(face, k0, dir)) return advance();

    // Departing into some other incident face: re-anchor where the
    // projected direction points inward with the best margin.
    int best_face = -1;
    S best_margin = -std::numeric_limits<S>::infinity();
    for (int g : m.vertex_faces(x0)) {
      auto [c1, c2] = wedge_coeffs(g, m.corner_of(g, x0), dir);
      S mag = std::abs(c1) + std::abs(c2);
      if (mag <= 0) continue;
      S margin = std::min(c1, c2) / mag;
      if (margin > best_margin) {
        best_margin = margin;
        best_face = g;
      }
    }
    if (best_face >= 0 && best_margin >= -Tol<S>::dir_rel) {
      Vec3<S> n = fnormal(best_face);
      auto project = [&](const Vec3<S>& w) { return w - n * dot(w, n); };
      Vec3<S> proj = project(dir);
      if (norm(proj) > 0) {
        dir = normalized(proj);
        apply_transport(project);
        face = best_face;
        bary = Vec3<S>{0, 0, 0};
        bary[m.corner_of(best_face, x0)] = 1;
        return advance();
      }
    }
    if (fan_walk(x0)) return Outcome::Continue;
    last_event = StepEvent::BoundaryStop;
    return Outcome::Boundary;
  }

  Outcome step() {
    int k0 = vertex_corner();
    if (k0 >= 0) return at_vertex(k0);
    return advance();
  }

  bool initialise(const SurfacePoint& p, const Vec3d& v) {
    if (p.face < 0 || p.face >= m.face_count())
      throw InvalidArgs("trace: start face out of range");
    if (!bary_valid(p.bary, 1e-6))
      throw InvalidArgs("trace: start barycentric coordinates not in the simplex");
    face = p.face;
    bary = Vec3<S>(p.bary);
    snap_bary();

    target = S(norm(v));
    remaining = target;
    out.requested_length = double(target);

    Vec3<S> n = fnormal(face);
    Vec3<S> vv = Vec3<S>(v);
    Vec3<S> in_plane = vv - n * dot(vv, n);
    if (target > 0 && norm(in_plane) < S(1e-12) * target) {
      stall("initial direction is normal to the anchor face");
      return false;
    }
    dir = normalized(in_plane);

    if (cfg.transport_payload) {
      has_payload = true;
      payload = Vec3<S>(*cfg.transport_payload);
      payload_norm = norm(payload);
    }
    want_q = cfg.want_transport_matrix;

    if (cfg.record_polyline) out.points.push_back(widened_point());
    return true;
  }

  GeodesicTrace run(const SurfacePoint& p, const Vec3d& v) {
    if (!initialise(p, v)) {
      finalise();
      return std::move(out);
    }
    Outcome oc = Outcome::Finished;
    int steps = 0;
    while (remaining > 0) {
      if (steps++ >= max_steps) {
        oc = Outcome::Maxed;
        break;
      }
      oc = step();
      if (oc != Outcome::Continue) break;
    }
    switch (oc) {
      case Outcome::Finished:
      case Outcome::Continue:
        out.terminated_by = TraceTermination::LengthReached;
        break;
      case Outcome::Boundary:
        out.terminated_by = TraceTermination::Boundary;
        break;
      case Outcome::Maxed:
        out.terminated_by = TraceTermination::MaxSteps;
        break;
      case Outcome::Stalled:
        break;
    }
    finalise();
    return std::move(out);
  }

  void finalise() {
    out.final_point = widened_point();
    out.final_dir = target > 0 ? Vec3d(dir) : Vec3d{0, 0, 0};
    if (has_payload) out.transported_payload = Vec3d(payload);
    if (want_q) out.transport_matrix = Mat3::from_columns(Vec3d(q0), Vec3d(q1), Vec3d(q2));
  }
};

GeodesicTrace run_trace(const Mesh& m, const SurfacePoint& p, const Vec3d& v,
                        const TraceConfig& cfg) {
  if (cfg.use_f32) {
    Kernel<float> k(m, cfg);
    return k.run(p, v);
  }
  Kernel<double> k(m, cfg);
  return k.run(p, v);
}

}  // namespace

int default_max_steps(const Mesh& m) {
  return int(10.0 * std::sqrt(double(m.face_count()))) + 100;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  int base = omp_get_max_threads();
  if (const char* env = std::getenv("DIGEO_WORKERS")) {
    int cap = std::atoi(env);
    if (cap > 0) base = std::min(base, cap);
  }
  return std::max(1, base);
}

GeodesicTrace trace(const Mesh& m, const SurfacePoint& p, const TangentVector& v,
                    const TraceConfig& cfg) {
  GeodesicTrace t = run_trace(m, p, v.dir, cfg);
  if (t.status == TraceStatus::Stalled) throw NumericalStall("trace: " + t.error);
  return t;
}

namespace {

template <class Fn>
std::vector<GeodesicTrace> batch_common(const BatchRequest& req, Fn&& dispatch) {
  if (!req.mesh) throw InvalidArgs("trace_batch: missing mesh");
  if (req.starts.size() != req.dirs.size())
    throw InvalidArgs("trace_batch: starts and dirs differ in length");
  if (!req.payloads.empty() && req.payloads.size() != req.starts.size())
    throw InvalidArgs("trace_batch: payloads must be empty or match the batch size");
  std::vector<GeodesicTrace> out(req.starts.size());
  dispatch(out);
  return out;
}

GeodesicTrace run_one(const BatchRequest& req, int i) {
  TraceConfig cfg = req.config;
  // A zero payload slot means "no payload": transporting zero is zero, and
  // skipping it keeps payload-free elements off the transport bookkeeping.
  if (!req.payloads.empty() && norm2(req.payloads[i]) > 0)
    cfg.transport_payload = req.payloads[i];
  try {
    return run_trace(*req.mesh, req.starts[i], req.dirs[i].dir, cfg);
  } catch (const Error& e) {
    GeodesicTrace t;
    t.status = TraceStatus::Stalled;
    t.error = e.what();
    return t;
  }
}

}  // namespace

std::vector<GeodesicTrace> trace_batch(const BatchRequest& req, int workers) {
  const int w = resolve_workers(workers);
  return batch_common(req, [&](std::vector<GeodesicTrace>& out) {
    const int n = int(out.size());
#pragma omp parallel for schedule(dynamic, 8) num_threads(w)
    for (int i = 0; i < n; ++i) out[i] = run_one(req, i);
  });
}

std::vector<GeodesicTrace> trace_batch_serial(const BatchRequest& req) {
  return batch_common(req, [&](std::vector<GeodesicTrace>& out) {
    const int n = int(out.size());
    for (int i = 0; i < n; ++i) out[i] = run_one(req, i);
  });
}

bool traces_bit_equal(const GeodesicTrace& a, const GeodesicTrace& b) {
  if (a.points.size() != b.points.size()) return false;
  for (size_t i = 0; i < a.points.size(); ++i)
    if (!(a.points[i] == b.points[i])) return false;
  if (a.segment_lengths != b.segment_lengths) return false;
  if (!(a.final_point == b.final_point)) return false;
  if (!(a.final_dir == b.final_dir)) return false;
  if (a.traced_length != b.traced_length) return false;
  if (a.terminated_by != b.terminated_by) return false;
  if (a.status != b.status) return false;
  if (a.transported_payload.has_value() != b.transported_payload.has_value()) return false;
  if (a.transported_payload && !(*a.transported_payload == *b.transported_payload))
    return false;
  return true;
}

// --- Public single-transition operations ---

StepResult geodesic_step(const Mesh& m, const SurfacePoint& p, const Vec3d& v_unit,
                         double remaining, const TraceConfig& cfg) {
  if (p.face < 0 || p.face >= m.face_count())
    throw InvalidArgs("geodesic_step: face out of range");
  Kernel<double> k(m, cfg);
  k.face = p.face;
  k.bary = p.bary;
  k.snap_bary();
  k.dir = normalized(v_unit);
  k.target = remaining;
  k.remaining = remaining;

  double before = k.remaining;
  auto oc = k.step();
  if (oc == Kernel<double>::Outcome::Stalled)
    throw NumericalStall("geodesic_step: " + k.out.error);

  StepResult r;
  r.point = k.widened_point();
  r.dir = Vec3d(k.dir);
  r.step_length = before - double(k.remaining);
  r.finished = oc == Kernel<double>::Outcome::Finished;
  r.event = k.last_event;
  return r;
}

std::pair<SurfacePoint, Vec3d> transport_over_edge(const Mesh& m, int f, const Vec3d& b,
                                                   const Vec3d& v) {
  if (f < 0 || f >= m.face_count())
    throw InvalidArgs("transport_over_edge: face out of range");
  SurfacePoint p{f, b};
  auto cls = classify(p);
  if (cls.kind != PointClass::Edge)
    throw InvalidArgs("transport_over_edge: point is not on an edge");
  int k = cls.local;
  int g = m.face_adjacency[f][k];
  if (g < 0) throw InvalidArgs("transport_over_edge: edge is on the boundary");

  TraceConfig cfg;
  Kernel<double> kr(m, cfg);
  int va = m.faces[f][(k + 1) % 3];
  int vc = m.faces[f][(k + 2) % 3];
  auto t = kr.make_edge_transport(f, g, va, vc);
  Vec3d vp = t(v);
  double n = norm(vp);
  if (n > 0) vp *= norm(v) / n;

  Vec3d nb{0, 0, 0};
  nb[m.corner_of(g, va)] = b[(k + 1) % 3];
  nb[m.corner_of(g, vc)] = b[(k + 2) % 3];
  return {{g, nb}, vp};
}

std::pair<SurfacePoint, Vec3d> transport_over_vertex(const Mesh& m, int f, const Vec3d& b,
                                                     const Vec3d& v) {
  if (f < 0 || f >= m.face_count())
    throw InvalidArgs("transport_over_vertex: face out of range");
  SurfacePoint p{f, b};
  auto cls = classify(p);
  if (cls.kind != PointClass::Vertex)
    throw InvalidArgs("transport_over_vertex: point is not at a vertex");

  TraceConfig cfg;
  Kernel<double> k(m, cfg);
  k.face = f;
  k.bary = b;
  k.snap_bary();
  double speed = norm(v);
  k.dir = normalized(v);
  k.remaining = k.target = 1;
  int x0 = m.faces[f][cls.local];
  if (!k.fan_walk(x0))
    throw BoundaryHit("transport_over_vertex: fan ends at the boundary");
  return {k.widened_point(), Vec3d(k.dir) * speed};
}

std::pair<SurfacePoint, Vec3d> boundary_continue(const Mesh& m, const SurfacePoint& p,
                                                 const Vec3d& v) {
  if (p.face < 0 || p.face >= m.face_count())
    throw InvalidArgs("boundary_continue: face out of range");
  auto cls = classify(p);
  TraceConfig cfg;
  cfg.hole_avoidance = true;
  cfg.record_polyline = false;
  Kernel<double> k(m, cfg);
  k.face = p.face;
  k.bary = p.bary;
  k.snap_bary();
  double speed = norm(v);
  k.dir = normalized(v);
  k.remaining = k.target = std::numeric_limits<double>::infinity();

  if (cls.kind == PointClass::Vertex) {
    int x0 = m.faces[p.face][cls.local];
    if (!m.vertex_on_boundary[x0])
      throw InvalidArgs("boundary_continue: vertex is not on the boundary");
    k.blue_vertex(x0);
  } else if (cls.kind == PointClass::Edge) {
    if (m.face_adjacency[p.face][cls.local] >= 0)
      throw InvalidArgs("boundary_continue: edge is not on the boundary");
    k.slide_from_edge(cls.local);
  } else {
    throw InvalidArgs("boundary_continue: point is not on the boundary");
  }
  return {k.widened_point(), Vec3d(k.dir) * speed};
}

}  // namespace digeo
