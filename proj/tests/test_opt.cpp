#include <doctest.h>

#include <cmath>
#include <deque>

#include "digeo/io.hpp"
#include "digeo/opt.hpp"
#include "digeo/oracles.hpp"
#include "helpers.hpp"

using namespace digeo;
using namespace digeo::testing;

namespace {

// Rotationally symmetric triangulated disk in the z=0 plane.
Mesh disk_mesh(int rings, int sectors, double radius) {
  std::vector<Vec3d> verts{{0, 0, 0}};
  for (int r = 1; r <= rings; ++r) {
    double rho = radius * r / rings;
    for (int k = 0; k < sectors; ++k) {
      double a = 2.0 * M_PI * k / sectors;
      verts.push_back({rho * std::cos(a), rho * std::sin(a), 0.0});
    }
  }
  auto vid = [&](int r, int k) { return 1 + (r - 1) * sectors + (k % sectors); };
  std::vector<std::array<int, 3>> faces;
  for (int k = 0; k < sectors; ++k) faces.push_back({0, vid(1, k), vid(1, k + 1)});
  for (int r = 1; r < rings; ++r)
    for (int k = 0; k < sectors; ++k) {
      int a = vid(r, k), b = vid(r, k + 1), c = vid(r + 1, k + 1), d = vid(r + 1, k);
      faces.push_back({a, d, c});
      faces.push_back({a, c, b});
    }
  return Mesh::build(std::move(verts), std::move(faces));
}

// Deterministic bumpy closed surface for Lloyd/LBFGS runs.
Mesh bumpy_sphere(int subdiv) {
  Mesh m = make_icosphere(subdiv);
  std::vector<Vec3d> verts = m.vertices;
  for (auto& v : verts) {
    double bump = 1.0 + 0.15 * std::sin(3.0 * v.x) * std::sin(2.0 * v.y + 1.0) +
                  0.1 * std::cos(2.0 * v.z);
    v = v * bump;
  }
  std::vector<std::array<int, 3>> faces = m.faces;
  return Mesh::build(std::move(verts), std::move(faces));
}

SeedSet random_seeds(const Mesh& m, int n, Rng& rng) {
  SeedSet s;
  for (int i = 0; i < n; ++i) s.seeds.push_back(sample_surface_point(m, rng));
  return s;
}

SeedSet clustered_seeds(const Mesh& m, int n, Rng& rng) {
  SurfacePoint center = sample_surface_point(m, rng);
  double r = 0.25 * std::sqrt(m.total_area());
  SeedSet s;
  for (int i = 0; i < n; ++i) {
    TangentVector v = sample_tangent(m, center, rng, 0.0, r);
    TraceConfig cfg;
    cfg.record_polyline = false;
    s.seeds.push_back(trace(m, center, v, cfg).final_point);
  }
  return s;
}

// Classical Euclidean two-loop L-BFGS application (test oracle).
std::vector<Vec3d> two_loop_reference(const std::vector<Vec3d>& v,
                                      const std::vector<std::vector<Vec3d>>& s_list,
                                      const std::vector<std::vector<Vec3d>>& y_list,
                                      double h_diag) {
  int k = int(s_list.size());
  std::vector<Vec3d> q = v;
  std::vector<double> alpha(k);
  for (int i = k - 1; i >= 0; --i) {
    double rho = 1.0 / bundle_dot(y_list[i], s_list[i]);
    alpha[i] = rho * bundle_dot(s_list[i], q);
    for (size_t j = 0; j < q.size(); ++j) q[j] -= y_list[i][j] * alpha[i];
  }
  for (auto& x : q) x *= h_diag;
  for (int i = 0; i < k; ++i) {
    double rho = 1.0 / bundle_dot(y_list[i], s_list[i]);
    double beta = rho * bundle_dot(y_list[i], q);
    for (size_t j = 0; j < q.size(); ++j) q[j] += s_list[i][j] * (alpha[i] - beta);
  }
  return q;
}

}  // namespace

TEST_CASE("single seed owns every vertex") {
  const Mesh& m = icosphere(2);
  SeedSet s;
  s.seeds.push_back({0, {0.4, 0.3, 0.3}});
  auto part = voronoi(m, s);
  for (int v = 0; v < m.vertex_count(); ++v) CHECK(part.assignment[v] == 0);
}

TEST_CASE("a seed placed at a vertex has zero distance there") {
  const Mesh& m = icosphere(2);
  int f = 17;
  SeedSet s;
  s.seeds.push_back({f, {1, 0, 0}});
  auto part = voronoi(m, s);
  CHECK(part.distances[m.faces[f][0]] == 0.0);
}

TEST_CASE("antipodal seeds split the icosphere into equal hemispheres") {
  const Mesh& m = icosphere(3);
  int f_top = -1, f_bot = -1;
  double best_top = -2, best_bot = 2;
  for (int f = 0; f < m.face_count(); ++f) {
    Vec3d c = (m.vertices[m.faces[f][0]] + m.vertices[m.faces[f][1]] +
               m.vertices[m.faces[f][2]]) / 3.0;
    if (c.z > best_top) {
      best_top = c.z;
      f_top = f;
    }
    if (c.z < best_bot) {
      best_bot = c.z;
      f_bot = f;
    }
  }
  SeedSet s;
  s.seeds.push_back({f_top, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  s.seeds.push_back({f_bot, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  auto part = voronoi(m, s);
  int c0 = 0, c1 = 0;
  for (int v = 0; v < m.vertex_count(); ++v) (part.assignment[v] == 0 ? c0 : c1)++;
  CHECK(std::abs(c0 - c1) <= int(0.05 * m.vertex_count()));
}

TEST_CASE("energy of a single triangle matches the hand computation") {
  Mesh m = Mesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}});
  SeedSet s;
  s.seeds.push_back({0, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  auto part = voronoi(m, s);
  double energy = gcvt_energy(m, s, part);

  // Every vertex connects directly to the seed, so the graph distance is
  // Euclidean and the energy is sum A(x) d^2 / (2 S) by hand.
  Vec3d c{1.0 / 3, 1.0 / 3, 0};
  double area_third = 0.5 / 3.0;
  double expected = 0.0;
  for (const Vec3d& x : m.vertices) expected += area_third * norm2(x - c);
  expected /= 2.0;
  CHECK(close(energy, expected, 1e-12));
}

TEST_CASE("karcher direction vanishes for a symmetric cell") {
  Mesh m = disk_mesh(8, 16, 1.0);
  SeedSet s;
  s.seeds.push_back({0, {1, 0, 0}});  // exactly at the centre vertex
  auto part = voronoi(m, s);
  TangentVector dir = karcher_direction(m, part, s, 0);
  CHECK(norm(dir.dir) <= 1e-6);
}

TEST_CASE("lloyd converges to the centroid of a planar disk") {
  Mesh m = disk_mesh(10, 16, 1.0);
  SeedSet s;
  s.seeds.push_back({m.face_count() - 3, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  for (int it = 0; it < 60; ++it) s = lloyd_step(m, s);
  CHECK(norm(embed(s.seeds[0], m)) <= 1e-3);
}

TEST_CASE("a converged configuration stays put under a lloyd step") {
  Mesh m = disk_mesh(8, 16, 1.0);
  SeedSet s;
  s.seeds.push_back({0, {1, 0, 0}});  // the symmetric fixed point
  SeedSet s1 = lloyd_step(m, s);
  CHECK(norm(embed(s1.seeds[0], m) - embed(s.seeds[0], m)) <= 1e-8);
}

TEST_CASE("lloyd steps never increase the energy") {
  const Mesh& m = icosphere(2);
  Rng rng(71);
  for (int t = 0; t < 100; ++t) {
    SeedSet s = random_seeds(m, 8, rng);
    double e0 = gcvt_energy(m, s, voronoi(m, s));
    SeedSet s1 = lloyd_step(m, s);
    double e1 = gcvt_energy(m, s1, voronoi(m, s1));
    CHECK(e1 <= e0 + 1e-10);
  }
}

TEST_CASE("energy with one seed per vertex is numerically zero") {
  Mesh m = disk_mesh(3, 6, 1.0);
  SeedSet s;
  for (int v = 0; v < m.vertex_count(); ++v) {
    int f = m.vertex_faces(v)[0];
    Vec3d b{0, 0, 0};
    b[m.corner_of(f, v)] = 1;
    s.seeds.push_back({f, b});
  }
  auto part = voronoi(m, s);
  CHECK(gcvt_energy(m, s, part) <= 1e-12);
}

TEST_CASE("clustered seeds decrease energy for at least twenty lloyd steps") {
  Mesh m = bumpy_sphere(4);  // ~51 vertices per cell for 50 seeds
  Rng rng(73);
  SeedSet s = clustered_seeds(m, 50, rng);
  auto res = run_lloyd(m, s, 22);
  for (size_t i = 1; i < res.trajectory.size(); ++i)
    CHECK(res.trajectory[i].energy < res.trajectory[i - 1].energy + 1e-12);
}

TEST_CASE("descent base cases") {
  std::deque<LbfgsPair> empty;
  std::vector<Vec3d> v{{1, 2, 3}, {-1, 0, 2}};
  auto out = lbfgs_descend(v, empty, 1.0);
  CHECK(close(out[0], v[0], 0.0));
  CHECK(close(out[1], v[1], 0.0));

  auto scaled = lbfgs_descend(v, empty, 0.25);
  CHECK(close(scaled[0], v[0] * 0.25, 1e-15));

  std::vector<Vec3d> zero{{0, 0, 0}, {0, 0, 0}};
  auto z = lbfgs_descend(zero, empty, 1.0);
  CHECK(norm(z[0]) == 0.0);
  CHECK(norm(z[1]) == 0.0);
}

TEST_CASE("stored pairs reproduce the classical two-loop result") {
  Rng rng(79);
  auto rnd = [&] {
    return Vec3d{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  };
  for (int pairs = 1; pairs <= 3; ++pairs) {
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 4;
      std::deque<LbfgsPair> mem;
      std::vector<std::vector<Vec3d>> s_list, y_list;
      bool ok = true;
      for (int pi = 0; pi < pairs; ++pi) {
        LbfgsPair pair;
        for (int i = 0; i < n; ++i) {
          pair.a.push_back(rnd());
          pair.b.push_back(rnd());
          pair.q.push_back(Mat3::identity());
        }
        if (bundle_dot(pair.a, pair.b) < 0.1) ok = false;
        s_list.push_back(pair.a);
        y_list.push_back(pair.b);
        mem.push_back(std::move(pair));
      }
      if (!ok) continue;
      double h = rng.uniform(0.2, 2.0);
      std::vector<Vec3d> v;
      for (int i = 0; i < n; ++i) v.push_back(rnd());
      auto ours = lbfgs_descend(v, mem, h);
      auto ref = two_loop_reference(v, s_list, y_list, h);
      for (int i = 0; i < n; ++i) CHECK(close(ours[i], ref[i], 1e-10));
    }
  }
}

TEST_CASE("flat-mesh optimiser equals Euclidean L-BFGS per iterate") {
  Mesh m = make_plane(10, 10, 4.0, 0);
  Rng rng(89);
  const int n_seeds = 5;
  SeedSet s0;
  std::vector<Vec3d> targets;
  while (int(s0.seeds.size()) < n_seeds) {
    SurfacePoint p = sample_surface_point(m, rng);
    Vec3d pos = embed(p, m);
    if (pos.x < 0.8 || pos.x > 3.2 || pos.y < 0.8 || pos.y > 3.2) continue;
    s0.seeds.push_back(p);
    targets.push_back(pos + Vec3d{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0});
  }

  auto energy = [&](const SeedSet& s) {
    double e = 0;
    for (int i = 0; i < n_seeds; ++i) e += 0.5 * norm2(embed(s.seeds[i], m) - targets[i]);
    return e;
  };
  auto directions = [&](const SeedSet& s) {
    std::vector<Vec3d> d(n_seeds);
    for (int i = 0; i < n_seeds; ++i) d[i] = targets[i] - embed(s.seeds[i], m);
    return d;
  };

  LbfgsConfig cfg;
  cfg.max_iters = 8;
  auto mesh_run = mesh_lbfgs(m, s0, energy, directions, cfg);

  // Euclidean reference: identical recursion and line search on flat state.
  std::vector<Vec3d> x;
  for (const auto& p : s0.seeds) x.push_back(embed(p, m));
  std::deque<LbfgsPair> mem;
  double h_diag = 1.0;
  auto efun = [&](const std::vector<Vec3d>& xs) {
    double e = 0;
    for (int i = 0; i < n_seeds; ++i) e += 0.5 * norm2(xs[i] - targets[i]);
    return e;
  };
  std::vector<std::vector<Vec3d>> iterates{x};
  for (int t = 0; t < cfg.max_iters; ++t) {
    std::vector<Vec3d> desc(n_seeds);
    for (int i = 0; i < n_seeds; ++i) desc[i] = targets[i] - x[i];
    auto v = lbfgs_descend(desc, mem, h_diag);
    double f0 = efun(x);
    double dir_deriv = -bundle_dot(desc, v);
    double accepted = -1;
    std::vector<Vec3d> xn;
    for (double alpha : {cfg.eta0, 0.1 * cfg.eta0, 0.01 * cfg.eta0}) {
      xn = x;
      for (int i = 0; i < n_seeds; ++i) xn[i] += v[i] * alpha;
      if (efun(xn) <= f0 + cfg.c1 * alpha * dir_deriv) {
        accepted = alpha;
        break;
      }
    }
    REQUIRE(accepted > 0);
    LbfgsPair pair;
    for (int i = 0; i < n_seeds; ++i) {
      pair.a.push_back(v[i] * accepted);
      pair.q.push_back(Mat3::identity());
    }
    std::vector<Vec3d> g_old(n_seeds), g_new(n_seeds);
    for (int i = 0; i < n_seeds; ++i) g_old[i] = x[i] - targets[i];
    x = xn;
    for (int i = 0; i < n_seeds; ++i) g_new[i] = x[i] - targets[i];
    pair.b.resize(n_seeds);
    for (int i = 0; i < n_seeds; ++i) pair.b[i] = g_new[i] - g_old[i];
    h_diag = bundle_dot(pair.a, pair.b) / bundle_dot(pair.b, pair.b);
    mem.push_back(std::move(pair));
    while (int(mem.size()) > cfg.memory) mem.pop_front();
    iterates.push_back(x);
  }

  REQUIRE(mesh_run.trajectory.size() == iterates.size());
  for (size_t t = 0; t < iterates.size(); ++t)
    CHECK(close(mesh_run.trajectory[t].energy, efun(iterates[t]), 1e-8));
  for (int i = 0; i < n_seeds; ++i)
    CHECK(close(embed(mesh_run.seeds.seeds[i], m), iterates.back()[i], 1e-8));
}

TEST_CASE("quadratic single-seed problem converges in a few iterations") {
  Mesh m = make_plane(10, 10, 4.0, 0);
  SeedSet s0;
  s0.seeds.push_back({0, {1.0 / 3, 1.0 / 3, 1.0 / 3}});
  Vec3d target{2.2, 1.9, 0};
  auto energy = [&](const SeedSet& s) {
    return 0.5 * norm2(embed(s.seeds[0], m) - target);
  };
  auto directions = [&](const SeedSet& s) {
    return std::vector<Vec3d>{target - embed(s.seeds[0], m)};
  };
  LbfgsConfig cfg;
  cfg.eta0 = 1.0;  // the quadratic's exact step is inside the candidate set
  cfg.max_iters = 5;
  auto res = mesh_lbfgs(m, s0, energy, directions, cfg);
  CHECK(norm(embed(res.seeds.seeds[0], m) - target) <= 1e-4);
}

TEST_CASE("optimiser trajectories are monotone on the gcvt objective") {
  Mesh m = bumpy_sphere(2);
  Rng rng(97);
  SeedSet s0 = clustered_seeds(m, 12, rng);
  GcvtEvaluator eval(m);
  auto energy = [&](const SeedSet& s) { return eval.energy(s); };
  auto directions = [&](const SeedSet& s) { return eval.directions(s); };
  LbfgsConfig cfg;
  cfg.max_iters = 10;
  auto res = mesh_lbfgs(m, s0, energy, directions, cfg);
  for (size_t t = 1; t < res.trajectory.size(); ++t)
    CHECK(res.trajectory[t].energy <= res.trajectory[t - 1].energy + 1e-12);
  // Seeds stay on the mesh.
  for (const auto& seed : res.seeds.seeds) CHECK(bary_valid(seed.bary, 1e-9));
}

TEST_CASE("mesh lbfgs beats lloyd from clustered starts (smoke)") {
  Mesh m = bumpy_sphere(3);
  Rng rng(101);
  int wins = 0;
  for (int run = 0; run < 3; ++run) {
    SeedSet s0 = clustered_seeds(m, 30, rng);
    auto lloyd = run_lloyd(m, s0, 25);
    GcvtEvaluator eval(m);
    auto energy = [&](const SeedSet& s) { return eval.energy(s); };
    auto dirs = [&](const SeedSet& s) { return eval.directions(s); };
    LbfgsConfig cfg;
    cfg.max_iters = 25;
    auto lb = mesh_lbfgs(m, s0, energy, dirs, cfg);
    if (lb.trajectory.back().energy <= lloyd.trajectory.back().energy) ++wins;
  }
  CHECK(wins >= 2);
}
