#include "digeo/opt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

namespace digeo {

namespace {

// Cyclic fan of faces around each vertex in winding order, with cumulative
// interior-angle offsets, for intrinsic angle coordinates at vertices.
// Requires consistently oriented faces (the parametric fixtures are).
struct VertexFans {
  struct Fan {
    std::vector<int> faces;      // ccw order
    std::vector<double> offset;  // angle coordinate of each face's first edge
    double theta = 0;
    bool closed = true;
  };
  std::vector<Fan> fans;

  explicit VertexFans(const Mesh& m) {
    fans.resize(m.vertex_count());
    for (int u = 0; u < m.vertex_count(); ++u) build(m, u);
  }

  // Within face g (corner of u), the first edge points to corner k+1 and the
  // second to corner k+2; the ccw successor lies across the second edge.
  static int first_vertex(const Mesh& m, int g, int u) {
    int k = m.corner_of(g, u);
    return m.faces[g][(k + 1) % 3];
  }
  static int second_vertex(const Mesh& m, int g, int u) {
    int k = m.corner_of(g, u);
    return m.faces[g][(k + 2) % 3];
  }

  void build(const Mesh& m, int u) {
    Fan& fan = fans[u];
    auto incident = m.vertex_faces(u);
    if (incident.empty()) return;

    int start = incident[0];
    if (m.vertex_on_boundary[u]) {
      // Walk backwards to the fan's open end.
      int g = start;
      for (size_t guard = 0; guard <= incident.size(); ++guard) {
        int prev = m.neighbor_across(g, u, first_vertex(m, g, u));
        if (prev < 0) break;
        g = prev;
        if (g == start) break;  // inconsistent orientation guard
      }
      start = g;
      fan.closed = false;
    }

    int g = start;
    double acc = 0;
    for (size_t i = 0; i < incident.size(); ++i) {
      fan.faces.push_back(g);
      fan.offset.push_back(acc);
      Vec3d x0 = m.vertices[u];
      acc += angle_between(m.vertices[first_vertex(m, g, u)] - x0,
                           m.vertices[second_vertex(m, g, u)] - x0);
      int next = m.neighbor_across(g, u, second_vertex(m, g, u));
      if (next < 0) {
        if (i + 1 != incident.size())
          throw Error("vertex fan is not a single consistently wound sequence; "
                      "gcvt requires consistently oriented meshes");
        break;
      }
      if (next == start) {
        if (i + 1 != incident.size())
          throw Error("vertex fan closed early; inconsistent face winding");
        break;
      }
      g = next;
    }
    fan.theta = m.vertex_total_angle[u];
  }

  // Intrinsic ccw coordinate in [0, theta) of an in-plane direction at u,
  // expressed inside face g.
  double coord(const Mesh& m, int u, int g, const Vec3d& dir) const {
    const Fan& fan = fans[u];
    auto it = std::find(fan.faces.begin(), fan.faces.end(), g);
    if (it == fan.faces.end()) throw Error("face not incident to vertex");
    size_t idx = size_t(it - fan.faces.begin());
    Vec3d x0 = m.vertices[u];
    Vec3d e_first = m.vertices[first_vertex(m, g, u)] - x0;
    double in_face = signed_angle(e_first, dir, m.face_normals[g]);
    if (in_face < 0) in_face = 0;  // clamp directions on the first edge
    return fan.offset[idx] + in_face;
  }
};

struct Dev2 {
  double x = 0, y = 0;
};

Dev2 rot2(const Dev2& w, double ang) {
  double c = std::cos(ang), s = std::sin(ang);
  return {c * w.x - s * w.y, s * w.x + c * w.y};
}

}  // namespace

VoronoiPartition voronoi(const Mesh& m, const SeedSet& seeds) {
  const int nv = m.vertex_count();
  const int ns = int(seeds.seeds.size());
  if (ns < 1) throw InvalidArgs("voronoi: need at least one seed");

  VertexFans fans(m);

  VoronoiPartition part;
  part.seed_count = ns;
  part.assignment.assign(nv, -1);
  part.distances.assign(nv, std::numeric_limits<double>::infinity());
  part.log_vectors.assign(nv, Vec3d{0, 0, 0});

  // Per-vertex development state relative to the owning seed.
  std::vector<Dev2> dev(nv);           // developed position in the seed frame
  std::vector<Dev2> dev_in(nv);        // developed unit direction of arrival
  std::vector<int> prev(nv, -1);       // parent vertex (-1: direct from seed)

  // Seed frames: right-handed 2D basis in the seed face plane.
  std::vector<Vec3d> fe1(ns), fe2(ns), fpos(ns);
  for (int i = 0; i < ns; ++i) {
    const SurfacePoint& s = seeds.seeds[i];
    Vec3d n = m.face_normals[s.face];
    const auto& c = m.faces[s.face];
    Vec3d e1 = normalized(m.vertices[c[1]] - m.vertices[c[0]]);
    fe1[i] = normalized(e1 - n * dot(e1, n));
    fe2[i] = cross(n, fe1[i]);
    fpos[i] = embed(s, m);
  }

  // Seeds sitting exactly at a vertex become graph roots directly; their
  // zero-length hop would otherwise leave the development unanchored.
  std::vector<int> seed_root_vertex(ns, -1);
  for (int i = 0; i < ns; ++i) {
    auto cls = classify(seeds.seeds[i]);
    if (cls.kind == PointClass::Vertex)
      seed_root_vertex[i] = m.faces[seeds.seeds[i].face][cls.local];
  }

  using Item = std::tuple<double, int, int, int>;  // dist, seed, vertex, parent
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;

  for (int i = 0; i < ns; ++i) {
    if (seed_root_vertex[i] >= 0) {
      pq.emplace(0.0, i, seed_root_vertex[i], -1);
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      int v = m.faces[seeds.seeds[i].face][k];
      pq.emplace(norm(m.vertices[v] - fpos[i]), i, v, -1);
    }
  }

  while (!pq.empty()) {
    auto [d, s, v, pv] = pq.top();
    pq.pop();
    if (part.assignment[v] >= 0) continue;

    // Recompute the development along the accepted parent link.
    Dev2 z, win;
    if (pv < 0) {
      Vec3d d3 = m.vertices[v] - fpos[s];
      double len = norm(d3);
      if (len <= 0) {
        win = {1, 0};
      } else {
        win = {dot(d3, fe1[s]) / len, dot(d3, fe2[s]) / len};
        double wn = std::hypot(win.x, win.y);
        win = wn > 0 ? Dev2{win.x / wn, win.y / wn} : Dev2{1, 0};
      }
      z = {win.x * len, win.y * len};
    } else {
      // Turn at pv: incoming arrives along dev_in[pv]; the outgoing edge
      // (pv -> v) sits at the normalised intrinsic ccw angle from the
      // reversed incoming edge.
      Vec3d x0 = m.vertices[pv];
      Vec3d out_dir = m.vertices[v] - x0;
      double len = norm(out_dir);
      int g_out = -1;
      for (int g : m.vertex_faces(pv))
        if (m.corner_of(g, v) >= 0) g_out = g;
      const auto& fan = fans.fans[pv];
      double theta = fan.theta;

      if (prev[pv] < 0 && pv == seed_root_vertex[s]) {
        // Root vertex: anchor the outgoing direction by its normalised fan
        // angle relative to the seed-frame axis.
        double co = fans.coord(m, pv, g_out, out_dir);
        double cr = fans.coord(m, pv, seeds.seeds[s].face, fe1[s]);
        double diff = co - cr;
        if (fan.closed) {
          diff = std::fmod(diff, theta);
          if (diff < 0) diff += theta;
        }
        double psi = 2.0 * M_PI / theta * diff;
        win = {std::cos(psi), std::sin(psi)};
        z = {win.x * len, win.y * len};
      } else {
        Vec3d back_dir = prev[pv] < 0 ? fpos[s] - x0 : m.vertices[prev[pv]] - x0;
        int g_in = -1;
        if (prev[pv] < 0) {
          g_in = seeds.seeds[s].face;
        } else {
          for (int g : m.vertex_faces(pv))
            if (m.corner_of(g, prev[pv]) >= 0) g_in = g;
        }
        double ci = fans.coord(m, pv, g_in, back_dir);
        double co = fans.coord(m, pv, g_out, out_dir);
        double diff = co - ci;
        if (fan.closed) {
          diff = std::fmod(diff, theta);
          if (diff < 0) diff += theta;
        }
        double ang = 2.0 * M_PI / theta * diff;
        win = rot2({-dev_in[pv].x, -dev_in[pv].y}, ang);
        z = {dev[pv].x + win.x * len, dev[pv].y + win.y * len};
      }
    }

    part.assignment[v] = s;
    part.distances[v] = d;
    prev[v] = pv;
    dev[v] = z;
    dev_in[v] = win;
    double zn = std::hypot(z.x, z.y);
    if (zn > 0 && d > 0)
      part.log_vectors[v] = (fe1[s] * (z.x / zn) + fe2[s] * (z.y / zn)) * d;

    for (int g : m.vertex_faces(v)) {
      int k = m.corner_of(g, v);
      for (int off = 1; off <= 2; ++off) {
        int w = m.faces[g][(k + off) % 3];
        if (part.assignment[w] >= 0) continue;
        double nd = d + norm(m.vertices[w] - m.vertices[v]);
        // <= keeps equal-distance candidates in the queue so the seed-index
        // ordering resolves exact ties toward the lowest seed.
        if (nd <= part.distances[w]) {
          part.distances[w] = nd;  // tentative; final value set on pop
          pq.emplace(nd, s, w, v);
        }
      }
    }
  }
  // Restore infinity markers for unreachable vertices (none on connected meshes).
  for (int v = 0; v < nv; ++v)
    if (part.assignment[v] < 0) part.distances[v] = std::numeric_limits<double>::infinity();
  return part;
}

TangentVector karcher_direction(const Mesh& m, const VoronoiPartition& part,
                                const SeedSet& seeds, int i) {
  TangentVector out;
  out.anchor = seeds.seeds[i];
  Vec3d acc{0, 0, 0};
  double wsum = 0;
  for (int v = 0; v < m.vertex_count(); ++v) {
    if (part.assignment[v] != i) continue;
    double w = m.vertex_area[v];
    acc += part.log_vectors[v] * w;
    wsum += w;
  }
  if (wsum <= 0) return out;  // empty cell: zero direction
  Vec3d n = m.face_normals[out.anchor.face];
  Vec3d dir = acc / wsum;
  out.dir = dir - n * dot(dir, n);
  return out;
}

double gcvt_energy(const Mesh& m, const SeedSet& seeds, const VoronoiPartition& part) {
  double e = 0;
  for (int v = 0; v < m.vertex_count(); ++v) {
    if (part.assignment[v] < 0) continue;
    double d = part.distances[v];
    e += m.vertex_area[v] * d * d;
  }
  return e / (2.0 * double(seeds.seeds.size()));
}

namespace {

// Exp over the product manifold with per-seed transports.
struct ProductExp {
  SeedSet seeds;
  std::vector<Mat3> transports;
  std::vector<double> moved;
};

ProductExp product_exp(const Mesh& m, const SeedSet& s, const std::vector<Vec3d>& v,
                       double scale) {
  BatchRequest req;
  req.mesh = &m;
  req.config.record_polyline = false;
  req.config.want_transport_matrix = true;
  const int n = int(s.seeds.size());
  for (int i = 0; i < n; ++i) {
    req.starts.push_back(s.seeds[i]);
    req.dirs.push_back({s.seeds[i], v[i] * scale});
  }
  auto traces = trace_batch(req);

  ProductExp out;
  out.seeds.seeds.resize(n);
  out.transports.resize(n);
  out.moved.resize(n);
  for (int i = 0; i < n; ++i) {
    if (traces[i].status != TraceStatus::Ok)
      throw NumericalStall("product exp: seed " + std::to_string(i) + ": " + traces[i].error);
    out.seeds.seeds[i] = traces[i].final_point;
    out.transports[i] = traces[i].transport_matrix.value_or(Mat3::identity());
    out.moved[i] = traces[i].traced_length;
  }
  return out;
}

std::vector<Vec3d> apply_transports(const std::vector<Mat3>& q, const std::vector<Vec3d>& v,
                                    bool adjoint) {
  std::vector<Vec3d> out(v.size());
  for (size_t i = 0; i < v.size(); ++i)
    out[i] = adjoint ? q[i].transposed() * v[i] : q[i] * v[i];
  return out;
}

}  // namespace

double bundle_dot(const std::vector<Vec3d>& x, const std::vector<Vec3d>& y) {
  double s = 0;
  for (size_t i = 0; i < x.size(); ++i) s += dot(x[i], y[i]);
  return s;
}

std::vector<Vec3d> lbfgs_descend(const std::vector<Vec3d>& v,
                                 const std::deque<LbfgsPair>& memory, double h_diag) {
  struct Rec {
    static std::vector<Vec3d> go(const std::vector<Vec3d>& v,
                                 const std::deque<LbfgsPair>& mem, int level, double h) {
      if (level < 0) {
        std::vector<Vec3d> out(v.size());
        for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] * h;
        return out;
      }
      const LbfgsPair& pr = mem[size_t(level)];
      double ba = bundle_dot(pr.b, pr.a);
      double guard = 1e-12 * std::sqrt(bundle_dot(pr.a, pr.a) * bundle_dot(pr.b, pr.b));
      if (!(ba > guard)) {
        // Curvature breakdown: bypass this pair but keep descending.
        auto pulled = apply_transports(pr.q, v, true);
        auto inner = go(pulled, mem, level - 1, h);
        return apply_transports(pr.q, inner, false);
      }
      double rho = 1.0 / ba;

      std::vector<Vec3d> vt(v.size());
      double av = bundle_dot(pr.a, v);
      for (size_t i = 0; i < v.size(); ++i) vt[i] = v[i] - pr.b[i] * (rho * av);

      auto pulled = apply_transports(pr.q, vt, true);
      auto inner = go(pulled, mem, level - 1, h);
      auto vh = apply_transports(pr.q, inner, false);

      double bvh = bundle_dot(pr.b, vh);
      std::vector<Vec3d> out(v.size());
      for (size_t i = 0; i < v.size(); ++i)
        out[i] = vh[i] - pr.a[i] * (rho * bvh) + pr.a[i] * (rho * av);
      return out;
    }
  };
  return Rec::go(v, memory, int(memory.size()) - 1, h_diag);
}

LbfgsResult mesh_lbfgs(const Mesh& m, const SeedSet& seeds0, const EnergyFn& f,
                       const DirectionFn& grad, const LbfgsConfig& cfg) {
  LbfgsResult res;
  res.seeds = seeds0;
  std::deque<LbfgsPair> memory;
  double h_diag = 1.0;
  long calls = 0;

  auto energy_of = [&](const SeedSet& s) {
    ++calls;
    return f(s);
  };

  double f_cur = energy_of(res.seeds);
  std::vector<Vec3d> descent = grad(res.seeds);  // v_i = -grad f
  res.trajectory.push_back({0, f_cur, calls, 0.0});

  for (int t = 0; t < cfg.max_iters; ++t) {
    std::vector<Vec3d> v = lbfgs_descend(descent, memory, h_diag);
    double dir_deriv = -bundle_dot(descent, v);  // <grad f, V>
    if (dir_deriv > 0) {
      // Not a descent direction (degenerate memory); fall back to steepest.
      v = descent;
      dir_deriv = -bundle_dot(descent, v);
    }

    const double candidates[3] = {cfg.eta0, 0.1 * cfg.eta0, 0.01 * cfg.eta0};
    double accepted_alpha = -1;
    double f_best = std::numeric_limits<double>::infinity();
    double alpha_best = -1;
    ProductExp best_move;
    for (double alpha : candidates) {
      ProductExp moved = product_exp(m, res.seeds, v, alpha);
      double f_new = energy_of(moved.seeds);
      if (f_new <= f_cur + cfg.c1 * alpha * dir_deriv) {
        accepted_alpha = alpha;
        f_best = f_new;
        best_move = std::move(moved);
        break;
      }
      if (f_new < f_best) {
        f_best = f_new;
        alpha_best = alpha;
        best_move = std::move(moved);
      }
    }
    if (accepted_alpha < 0) {
      if (f_best < f_cur) {
        accepted_alpha = alpha_best;  // best decreasing candidate fallback
        // The cached partition belongs to the last candidate; re-evaluate the
        // chosen one so the gradient below stays cache-hot and counted.
        f_best = energy_of(best_move.seeds);
      } else {
        res.line_search_failed = true;
        break;
      }
    }

    // Memory update with vector transport along the accepted step.
    std::vector<Vec3d> grad_old(descent.size());
    for (size_t i = 0; i < descent.size(); ++i) grad_old[i] = -descent[i];

    LbfgsPair pair;
    pair.q = best_move.transports;
    pair.a.resize(descent.size());
    for (size_t i = 0; i < descent.size(); ++i)
      pair.a[i] = pair.q[i] * (v[i] * accepted_alpha);

    res.seeds = best_move.seeds;
    f_cur = f_best;
    descent = grad(res.seeds);
    std::vector<Vec3d> grad_new(descent.size());
    for (size_t i = 0; i < descent.size(); ++i) grad_new[i] = -descent[i];

    auto grad_old_t = apply_transports(pair.q, grad_old, false);
    pair.b.resize(descent.size());
    for (size_t i = 0; i < descent.size(); ++i) pair.b[i] = grad_new[i] - grad_old_t[i];

    double bb = bundle_dot(pair.b, pair.b);
    double ab = bundle_dot(pair.a, pair.b);
    if (bb > 0 && std::isfinite(ab / bb)) h_diag = ab / bb;
    memory.push_back(std::move(pair));
    while (int(memory.size()) > cfg.memory) memory.pop_front();

    double step_norm = 0;
    for (double l : best_move.moved) step_norm += l * l;
    step_norm = std::sqrt(step_norm);
    res.trajectory.push_back({t + 1, f_cur, calls, step_norm});
    if (cfg.step_tol > 0 && step_norm < cfg.step_tol) break;
  }
  return res;
}

SeedSet lloyd_step(const Mesh& m, const SeedSet& seeds, double rate) {
  VoronoiPartition part = voronoi(m, seeds);
  std::vector<Vec3d> dirs(seeds.seeds.size());
  for (int i = 0; i < int(seeds.seeds.size()); ++i)
    dirs[i] = karcher_direction(m, part, seeds, i).dir;
  return product_exp(m, seeds, dirs, rate).seeds;
}

LbfgsResult run_lloyd(const Mesh& m, const SeedSet& seeds0, int iters, double rate) {
  LbfgsResult res;
  res.seeds = seeds0;
  GcvtEvaluator eval(m);
  res.trajectory.push_back({0, eval.energy(res.seeds), eval.calls(), 0.0});
  for (int t = 0; t < iters; ++t) {
    auto dirs = eval.directions(res.seeds);
    auto moved = product_exp(m, res.seeds, dirs, rate);
    res.seeds = moved.seeds;
    double e = eval.energy(res.seeds);
    double step_norm = 0;
    for (double l : moved.moved) step_norm += l * l;
    res.trajectory.push_back({t + 1, e, eval.calls(), std::sqrt(step_norm)});
  }
  return res;
}

double GcvtEvaluator::energy(const SeedSet& s) {
  return gcvt_energy(m_, s, partition(s));
}

std::vector<Vec3d> GcvtEvaluator::directions(const SeedSet& s) {
  const VoronoiPartition& part = partition(s);
  std::vector<Vec3d> out(s.seeds.size());
  for (int i = 0; i < int(s.seeds.size()); ++i)
    out[i] = karcher_direction(m_, part, s, i).dir;
  return out;
}

const VoronoiPartition& GcvtEvaluator::partition(const SeedSet& s) {
  if (!cached_seeds_ || !(*cached_seeds_ == s)) {
    cached_part_ = voronoi(m_, s);
    cached_seeds_ = s;
    ++calls_;
  }
  return cached_part_;
}

}  // namespace digeo
