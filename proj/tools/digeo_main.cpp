// digeo: straightest-geodesic tracing, differentiation, and optimisation on
// triangle meshes. Subcommands: gen, trace, expmap, gradcheck, benchmark,
// oracle-compare, gcvt.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include "digeo/diff.hpp"
#include "digeo/gradcheck.hpp"
#include "digeo/io.hpp"
#include "digeo/mesh.hpp"
#include "digeo/opt.hpp"
#include "digeo/oracles.hpp"
#include "digeo/tracer.hpp"

using namespace digeo;
using nlohmann::json;

namespace {

struct GlobalOpts {
  int workers = 0;
  std::uint64_t seed_rng = 42;
  std::string precision = "f64";
  bool f32() const { return precision == "f32"; }
};

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

struct Quantiles {
  double median, p25, p75;
};

Quantiles quantiles(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  auto at = [&](double q) {
    double idx = q * (xs.size() - 1);
    size_t lo = size_t(idx);
    size_t hi = std::min(lo + 1, xs.size() - 1);
    double w = idx - double(lo);
    return xs[lo] * (1 - w) + xs[hi] * w;
  };
  return {at(0.5), at(0.25), at(0.75)};
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  out << text;
}

Mesh mesh_from_file(const std::string& path) { return load_obj_file(path); }

BatchRequest sample_batch(const Mesh& m, int n, Rng& rng, double min_len, double max_len) {
  BatchRequest req;
  req.mesh = &m;
  req.config.record_polyline = false;
  for (int i = 0; i < n; ++i) {
    SurfacePoint p = sample_surface_point(m, rng);
    req.starts.push_back(p);
    req.dirs.push_back(sample_tangent(m, p, rng, min_len, max_len));
  }
  return req;
}

// --- gen ---

struct GenArgs {
  std::string shape = "icosphere";
  int subdiv = 4;
  double r_major = 1.0 / 3.0, r_minor = 1.0 / 6.0;
  int n_alpha = 64, n_beta = 32;
  int nx = 16, ny = 16;
  double size = 1.0;
  std::uint64_t plane_seed = 0;
  double radius = 0.5, height = 1.0;
  int n_around = 32, n_height = 16;
  std::string out;
};

int cmd_gen(const GlobalOpts&, const GenArgs& a) {
  Mesh m;
  if (a.shape == "icosphere") {
    m = make_icosphere(a.subdiv);
  } else if (a.shape == "torus") {
    m = make_torus(a.r_major, a.r_minor, a.n_alpha, a.n_beta);
  } else if (a.shape == "plane") {
    m = make_plane(a.nx, a.ny, a.size, a.plane_seed);
  } else if (a.shape == "cylinder") {
    m = make_cylinder(a.radius, a.height, a.n_around, a.n_height);
  } else if (a.shape == "cone") {
    m = make_cone(a.radius, a.height, a.n_around);
  } else {
    throw InvalidArgs("unknown shape '" + a.shape + "'");
  }
  write_obj_file(m, a.out);
  std::cout << "wrote " << a.out << " (" << m.vertex_count() << " vertices, "
            << m.face_count() << " faces)\n";
  return 0;
}

// --- trace / expmap ---

struct TraceArgs {
  std::string mesh, points, dirs, out, polyline;
  bool hole_avoidance = false;
  int max_steps = 0;
};

BatchRequest load_trace_request(const Mesh& m, const TraceArgs& a, const GlobalOpts& g) {
  std::ifstream pin(a.points);
  if (!pin) throw IOError("cannot open '" + a.points + "'");
  std::ifstream din(a.dirs);
  if (!din) throw IOError("cannot open '" + a.dirs + "'");
  auto pts = read_points_csv(pin);
  auto dirs = read_vectors_csv(din);
  if (pts.size() != dirs.size())
    throw InvalidArgs("points and dirs row counts differ");
  BatchRequest req;
  req.mesh = &m;
  req.config.hole_avoidance = a.hole_avoidance;
  req.config.max_steps = a.max_steps;
  req.config.use_f32 = g.f32();
  req.starts = pts;
  for (size_t i = 0; i < pts.size(); ++i) req.dirs.push_back({pts[i], dirs[i]});
  return req;
}

int cmd_trace(const GlobalOpts& g, const TraceArgs& a) {
  Mesh m = mesh_from_file(a.mesh);
  BatchRequest req = load_trace_request(m, a, g);
  auto traces = trace_batch(req, g.workers);
  write_text_file(a.out, traces_to_json(traces));
  if (!a.polyline.empty()) {
    std::ofstream out(a.polyline);
    if (!out) throw IOError("cannot open '" + a.polyline + "'");
    write_traces_obj(out, m, traces);
  }
  int failed = 0;
  for (const auto& t : traces)
    if (t.status != TraceStatus::Ok) ++failed;
  std::cout << "traced " << traces.size() << " geodesics (" << failed << " failed) -> "
            << a.out << "\n";
  return 0;
}

int cmd_expmap(const GlobalOpts& g, const TraceArgs& a) {
  Mesh m = mesh_from_file(a.mesh);
  BatchRequest req = load_trace_request(m, a, g);
  req.config.record_polyline = false;
  auto traces = trace_batch(req, g.workers);
  std::ofstream out(a.out);
  if (!out) throw IOError("cannot open '" + a.out + "'");
  out.precision(17);
  out << "face,b0,b1,b2,px,py,pz,dx,dy,dz\n";
  for (const auto& t : traces) {
    Vec3d pos = embed(t.final_point, m);
    out << t.final_point.face << "," << t.final_point.bary[0] << ","
        << t.final_point.bary[1] << "," << t.final_point.bary[2] << "," << pos.x << ","
        << pos.y << "," << pos.z << "," << t.final_dir.x << "," << t.final_dir.y << ","
        << t.final_dir.z << "\n";
  }
  std::cout << "wrote " << traces.size() << " endpoints -> " << a.out << "\n";
  return 0;
}

// --- gradcheck ---

struct GradArgs {
  std::string mesh, scheme = "gfd", out;
  int samples = 200;
  double min_len = 0.1, max_len = M_PI / 2;
};

int cmd_gradcheck(const GlobalOpts& g, const GradArgs& a) {
  Mesh m = mesh_from_file(a.mesh);
  DiffScheme scheme = a.scheme == "ep" ? DiffScheme::Ep : DiffScheme::Gfd;
  auto report =
      run_gradcheck(m, scheme, a.samples, g.seed_rng, a.min_len, a.max_len, g.workers);
  write_text_file(a.out, gradcheck_to_json(report));
  std::cout << "scheme=" << a.scheme << " median_cos_v=" << report.median_cos_v
            << " median_cos_p=" << report.median_cos_p
            << " median_norm_ratio_v=" << report.median_norm_ratio_v << " -> " << a.out
            << "\n";
  return 0;
}

// --- benchmark ---

struct BenchArgs {
  std::string out;
  std::vector<int> batch_sizes{100, 1000, 10000, 100000};
  std::vector<int> subdivs{3, 4, 5, 6};
  int face_sweep_batch = 2000;
  int reps = 5;
  bool with_pi = false;
  int pi_samples = 3;
};

struct BenchRow {
  std::string section, mesh, backend;
  int faces = 0, batch = 0;
  Quantiles q{};
  double per_trace_us = 0;
};

void append_row(std::vector<BenchRow>& rows, const std::string& section,
                const std::string& mesh_name, int faces, int batch,
                const std::string& backend, std::vector<double> times_ms) {
  BenchRow r;
  r.section = section;
  r.mesh = mesh_name;
  r.faces = faces;
  r.batch = batch;
  r.backend = backend;
  r.q = quantiles(times_ms);
  r.per_trace_us = r.q.median * 1000.0 / std::max(1, batch);
  rows.push_back(r);
}

int cmd_benchmark(const GlobalOpts& g, const BenchArgs& a) {
  std::vector<BenchRow> rows;

  auto run_batches = [&](const Mesh& m, const std::string& name, int batch,
                         const std::string& section) {
    Rng rng(g.seed_rng);
    BatchRequest req = sample_batch(m, batch, rng, 0.1, M_PI / 2);
    req.config.use_f32 = g.f32();
    for (const char* backend : {"serial", "parallel"}) {
      std::vector<double> times;
      for (int rep = 0; rep < a.reps; ++rep) {
        double t0 = now_ms();
        auto out = backend == std::string("serial") ? trace_batch_serial(req)
                                                    : trace_batch(req, g.workers);
        times.push_back(now_ms() - t0);
        if (out.empty()) throw Error("empty benchmark batch");
      }
      append_row(rows, section, name, m.face_count(), batch, backend, times);
    }
    if (a.with_pi) {
      int n_pi = std::min<int>(a.pi_samples, batch);
      std::vector<double> times;
      PiConfig pc;
      for (int rep = 0; rep < a.reps; ++rep) {
        double t0 = now_ms();
        for (int i = 0; i < n_pi; ++i) {
          pc.step_size = 1e-3 * norm(req.dirs[i].dir);
          pi_exp(m, req.starts[i], req.dirs[i].dir, pc);
        }
        times.push_back((now_ms() - t0) * double(batch) / n_pi);  // extrapolated
      }
      append_row(rows, section, name, m.face_count(), batch, "pi", times);
    }
  };

  {
    Mesh m = make_icosphere(4);
    for (int batch : a.batch_sizes) run_batches(m, "icosphere4", batch, "batch_sweep");
  }
  for (int s : a.subdivs) {
    Mesh m = make_icosphere(s);
    run_batches(m, "icosphere" + std::to_string(s), a.face_sweep_batch, "face_sweep");
  }

  std::ofstream out(a.out);
  if (!out) throw IOError("cannot open '" + a.out + "'");
  out << "section,mesh,faces,batch,backend,median_ms,p25_ms,p75_ms,per_trace_us\n";
  out.precision(6);
  for (const auto& r : rows)
    out << r.section << "," << r.mesh << "," << r.faces << "," << r.batch << ","
        << r.backend << "," << r.q.median << "," << r.q.p25 << "," << r.q.p75 << ","
        << r.per_trace_us << "\n";
  std::cout << "wrote " << rows.size() << " benchmark rows -> " << a.out << "\n";
  return 0;
}

// --- oracle-compare ---

struct OracleArgs {
  std::string shape = "sphere";
  int subdiv = 5;
  double r_major = 1.0 / 3.0, r_minor = 1.0 / 6.0;
  int n_alpha = 128, n_beta = 64;
  int samples = 1000;
  double min_len = -1, max_len = -1;
  bool with_pi = false;
  int pi_samples = 16;
  bool refine = false;
  std::string out;
};

struct OracleStats {
  double mean_error = 0;
  double seq_par_max_dev = 0;
  double f32_f64_mean_dev = 0;
};

OracleStats sphere_oracle_stats(const Mesh& m, int samples, std::uint64_t seed,
                                double min_len, double max_len, int workers, bool f32) {
  Rng rng(seed);
  BatchRequest req = sample_batch(m, samples, rng, min_len, max_len);
  req.config.use_f32 = f32;
  auto par = trace_batch(req, workers);
  auto seq = trace_batch(req, 1);

  OracleStats st;
  BatchRequest req32 = req;
  req32.config.use_f32 = true;
  auto low = f32 ? std::vector<GeodesicTrace>{} : trace_batch(req32, workers);
  for (int i = 0; i < samples; ++i) {
    Vec3d ps = normalized(embed(req.starts[i], m));
    Vec3d v = req.dirs[i].dir;
    Vec3d vs = v - ps * dot(v, ps);
    vs = normalized(vs) * norm(v);
    Vec3d ref = sphere_exp(ps, vs);
    st.mean_error += norm(embed(par[i].final_point, m) - ref) / samples;
    st.seq_par_max_dev = std::max(
        st.seq_par_max_dev, norm(embed(par[i].final_point, m) - embed(seq[i].final_point, m)));
    if (!traces_bit_equal(par[i], seq[i]))
      st.seq_par_max_dev = std::max(st.seq_par_max_dev, 1.0);
    if (!low.empty())
      st.f32_f64_mean_dev +=
          norm(embed(par[i].final_point, m) - embed(low[i].final_point, m)) / samples;
  }
  return st;
}

int cmd_oracle_compare(const GlobalOpts& g, const OracleArgs& a) {
  json report;
  report["schema"] = kOracleSchema;
  report["shape"] = a.shape;
  report["samples"] = a.samples;

  if (a.shape == "sphere") {
    double min_len = a.min_len > 0 ? a.min_len : 0.1;
    double max_len = a.max_len > 0 ? a.max_len : M_PI / 2;
    Mesh m = make_icosphere(a.subdiv);
    auto st = sphere_oracle_stats(m, a.samples, g.seed_rng, min_len, max_len, g.workers,
                                  g.f32());
    report["faces"] = m.face_count();
    report["mean_error"] = st.mean_error;
    report["seq_par_max_dev"] = st.seq_par_max_dev;
    report["f32_f64_mean_dev"] = st.f32_f64_mean_dev;
    if (a.refine) {
      Mesh m2 = make_icosphere(a.subdiv + 1);
      auto st2 = sphere_oracle_stats(m2, a.samples, g.seed_rng, min_len, max_len,
                                     g.workers, g.f32());
      report["mean_error_refined"] = st2.mean_error;
      report["refinement_decreases_error"] = st2.mean_error < st.mean_error;
    }
    if (a.with_pi) {
      Rng rng(g.seed_rng);
      BatchRequest req = sample_batch(m, a.pi_samples, rng, min_len, max_len);
      auto base = trace_batch(req, g.workers);
      double pi_dev = 0;
      PiConfig pc;
      for (int i = 0; i < a.pi_samples; ++i) {
        pc.step_size = 1e-3 * norm(req.dirs[i].dir);
        SurfacePoint q = pi_exp(m, req.starts[i], req.dirs[i].dir, pc);
        pi_dev += norm(embed(q, m) - embed(base[i].final_point, m)) / a.pi_samples;
      }
      report["pi_vs_trace_mean_dev"] = pi_dev;
    }
  } else if (a.shape == "torus") {
    double scale = 2.0 * (a.r_major + a.r_minor);  // outer diameter
    double min_len = a.min_len > 0 ? a.min_len : 0.1 * scale;
    double max_len = a.max_len > 0 ? a.max_len : 1.0 * scale;
    Mesh m = make_torus(a.r_major, a.r_minor, a.n_alpha, a.n_beta);
    auto eval = [&](const Mesh& mesh) {
      Rng rng(g.seed_rng);
      BatchRequest req = sample_batch(mesh, a.samples, rng, min_len, max_len);
      req.config.use_f32 = g.f32();
      auto traces = trace_batch(req, g.workers);
      double mean_error = 0;
      for (int i = 0; i < a.samples; ++i) {
        Vec3d p = embed(req.starts[i], mesh);
        TorusState s0 = torus_state_from_ambient(p, req.dirs[i].dir, a.r_major, a.r_minor);
        double len = norm(req.dirs[i].dir);
        auto ref = torus_exp(s0, len, len / 2048);
        mean_error += norm(embed(traces[i].final_point, mesh) - ref.endpoint) / a.samples;
      }
      return mean_error;
    };
    report["faces"] = m.face_count();
    report["mean_error"] = eval(m);
    if (a.refine) {
      Mesh m2 = make_torus(a.r_major, a.r_minor, a.n_alpha * 2, a.n_beta * 2);
      double e2 = eval(m2);
      report["mean_error_refined"] = e2;
      report["refinement_decreases_error"] = e2 < double(report["mean_error"]);
    }
  } else {
    throw InvalidArgs("oracle-compare: unknown shape '" + a.shape + "'");
  }

  write_text_file(a.out, report.dump(2));
  std::cout << report.dump(2) << "\n";
  return 0;
}

// --- gcvt ---

struct GcvtArgs {
  std::string mesh;
  std::string seeds = "uniform";
  int n = 50;
  std::string method = "lbfgs";
  int iters = 30;
  int runs = 1;
  double eta0 = -1;  // default depends on method
  std::string out;
};

SeedSet make_seeds(const Mesh& m, const std::string& kind, int n, Rng& rng) {
  SeedSet s;
  if (kind == "uniform") {
    for (int i = 0; i < n; ++i) s.seeds.push_back(sample_surface_point(m, rng));
    return s;
  }
  if (kind == "clustered") {
    SurfacePoint center = sample_surface_point(m, rng);
    double r = 0.25 * std::sqrt(m.total_area());
    TraceConfig cfg;
    cfg.record_polyline = false;
    for (int i = 0; i < n; ++i) {
      TangentVector v = sample_tangent(m, center, rng, 0.0, r);
      s.seeds.push_back(trace(m, center, v, cfg).final_point);
    }
    return s;
  }
  throw InvalidArgs("gcvt: unknown seeding '" + kind + "'");
}

int cmd_gcvt(const GlobalOpts& g, const GcvtArgs& a) {
  Mesh m = mesh_from_file(a.mesh);
  std::ofstream out(a.out);
  if (!out) throw IOError("cannot open '" + a.out + "'");
  out << "run,method,iter,energy,func_calls\n";
  out.precision(12);

  for (int run = 0; run < a.runs; ++run) {
    Rng rng(g.seed_rng + std::uint64_t(run));
    SeedSet s0 = make_seeds(m, a.seeds, a.n, rng);
    LbfgsResult res;
    if (a.method == "lloyd") {
      res = run_lloyd(m, s0, a.iters, a.eta0 > 0 ? a.eta0 : 1.0);
    } else if (a.method == "lbfgs") {
      GcvtEvaluator eval(m);
      auto energy = [&](const SeedSet& s) { return eval.energy(s); };
      auto dirs = [&](const SeedSet& s) { return eval.directions(s); };
      LbfgsConfig cfg;
      cfg.max_iters = a.iters;
      cfg.eta0 = a.eta0 > 0 ? a.eta0 : 0.5;
      res = mesh_lbfgs(m, s0, energy, dirs, cfg);
    } else {
      throw InvalidArgs("gcvt: unknown method '" + a.method + "'");
    }
    for (const auto& rec : res.trajectory)
      out << run << "," << a.method << "," << rec.iter << "," << rec.energy << ","
          << rec.func_calls << "\n";
  }
  std::cout << "wrote " << a.runs << " " << a.method << " runs -> " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentiable straightest geodesics on triangle meshes"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--workers", g.workers, "worker threads (overrides DIGEO_WORKERS)");
  app.add_option("--seed-rng", g.seed_rng, "random seed");
  app.add_option("--precision", g.precision, "f32 or f64 stepping arithmetic")
      ->check(CLI::IsMember({"f32", "f64"}));

  GenArgs gen;
  auto* cgen = app.add_subcommand("gen", "generate a parametric fixture mesh");
  cgen->add_option("--shape", gen.shape)
      ->check(CLI::IsMember({"icosphere", "torus", "plane", "cylinder", "cone"}));
  cgen->add_option("--subdiv", gen.subdiv);
  cgen->add_option("--r-major", gen.r_major);
  cgen->add_option("--r-minor", gen.r_minor);
  cgen->add_option("--n-alpha", gen.n_alpha);
  cgen->add_option("--n-beta", gen.n_beta);
  cgen->add_option("--nx", gen.nx);
  cgen->add_option("--ny", gen.ny);
  cgen->add_option("--size", gen.size);
  cgen->add_option("--plane-seed", gen.plane_seed);
  cgen->add_option("--radius", gen.radius);
  cgen->add_option("--height", gen.height);
  cgen->add_option("--n-around", gen.n_around);
  cgen->add_option("--n-height", gen.n_height);
  cgen->add_option("--out", gen.out)->required();

  TraceArgs tr;
  auto* ctrace = app.add_subcommand("trace", "trace geodesics from points and vectors");
  ctrace->add_option("--mesh", tr.mesh)->required();
  ctrace->add_option("--points", tr.points)->required();
  ctrace->add_option("--dirs", tr.dirs)->required();
  ctrace->add_flag("--hole-avoidance", tr.hole_avoidance);
  ctrace->add_option("--max-steps", tr.max_steps);
  ctrace->add_option("--out", tr.out)->required();
  ctrace->add_option("--polyline", tr.polyline, "also write an OBJ polyline file");

  TraceArgs em;
  auto* cexp = app.add_subcommand("expmap", "exponential map endpoints as CSV");
  cexp->add_option("--mesh", em.mesh)->required();
  cexp->add_option("--points", em.points)->required();
  cexp->add_option("--dirs", em.dirs)->required();
  cexp->add_flag("--hole-avoidance", em.hole_avoidance);
  cexp->add_option("--max-steps", em.max_steps);
  cexp->add_option("--out", em.out)->required();

  GradArgs gr;
  auto* cgrad = app.add_subcommand("gradcheck", "gradient check against sphere closed forms");
  cgrad->alias("grad-check");
  cgrad->add_option("--mesh", gr.mesh)->required();
  cgrad->add_option("--scheme", gr.scheme)->check(CLI::IsMember({"ep", "gfd"}));
  cgrad->add_option("--samples", gr.samples);
  cgrad->add_option("--min-len", gr.min_len);
  cgrad->add_option("--max-len", gr.max_len);
  cgrad->add_option("--out", gr.out)->required();

  BenchArgs be;
  auto* cbench = app.add_subcommand("benchmark", "batch tracing benchmark sweeps");
  cbench->add_option("--out", be.out)->required();
  cbench->add_option("--batch-sizes", be.batch_sizes)->delimiter(',');
  cbench->add_option("--subdivs", be.subdivs)->delimiter(',');
  cbench->add_option("--batch", be.face_sweep_batch);
  cbench->add_option("--reps", be.reps);
  cbench->add_flag("--with-pi", be.with_pi);
  cbench->add_option("--pi-samples", be.pi_samples);

  OracleArgs oc;
  auto* coracle = app.add_subcommand("oracle-compare",
                                     "endpoint accuracy against analytic exponential maps");
  coracle->add_option("--shape", oc.shape)->check(CLI::IsMember({"sphere", "torus"}));
  coracle->add_option("--subdiv", oc.subdiv);
  coracle->add_option("--r-major", oc.r_major);
  coracle->add_option("--r-minor", oc.r_minor);
  coracle->add_option("--n-alpha", oc.n_alpha);
  coracle->add_option("--n-beta", oc.n_beta);
  coracle->add_option("--samples", oc.samples);
  coracle->add_option("--min-len", oc.min_len);
  coracle->add_option("--max-len", oc.max_len);
  coracle->add_flag("--with-pi", oc.with_pi);
  coracle->add_option("--pi-samples", oc.pi_samples);
  coracle->add_flag("--refine", oc.refine);
  coracle->add_option("--out", oc.out)->required();

  GcvtArgs gc;
  auto* cgcvt = app.add_subcommand("gcvt", "centroidal Voronoi tessellation runs");
  cgcvt->add_option("--mesh", gc.mesh)->required();
  cgcvt->add_option("--seeds", gc.seeds)->check(CLI::IsMember({"uniform", "clustered"}));
  cgcvt->add_option("--n", gc.n);
  cgcvt->add_option("--method", gc.method)->check(CLI::IsMember({"lloyd", "lbfgs"}));
  cgcvt->add_option("--iters", gc.iters);
  cgcvt->add_option("--runs", gc.runs);
  cgcvt->add_option("--eta0", gc.eta0);
  cgcvt->add_option("--out", gc.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cgen) return cmd_gen(g, gen);
    if (*ctrace) return cmd_trace(g, tr);
    if (*cexp) return cmd_expmap(g, em);
    if (*cgrad) return cmd_gradcheck(g, gr);
    if (*cbench) return cmd_benchmark(g, be);
    if (*coracle) return cmd_oracle_compare(g, oc);
    if (*cgcvt) return cmd_gcvt(g, gc);
  } catch (const Error& e) {
    json err{{"error", "digeo"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err{{"error", "internal"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
