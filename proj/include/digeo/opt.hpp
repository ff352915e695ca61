#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "digeo/geometry.hpp"
#include "digeo/mesh.hpp"
#include "digeo/tracer.hpp"

namespace digeo {

struct SeedSet {
  std::vector<SurfacePoint> seeds;
  bool operator==(const SeedSet& o) const = default;
};

struct VoronoiPartition {
  std::vector<int> assignment;    // per vertex: owning seed (ties -> lowest index)
  std::vector<double> distances;  // per vertex: graph distance to its seed
  // Ambient approximation of log_{seed}(vertex): developed direction in the
  // seed's face plane, magnitude equal to the path length.
  std::vector<Vec3d> log_vectors;
  int seed_count = 0;
};

// Multi-source shortest paths over the edge graph, seeds injected as virtual
// nodes connected to their face's vertices by ambient distance. Alongside
// distances, each path is developed into the owning seed's tangent plane
// edge by edge, turning at vertices by the normalised intrinsic angle
// (2*pi / total angle), which approximates the log map.
VoronoiPartition voronoi(const Mesh& m, const SeedSet& seeds);

// Area-weighted Karcher-mean direction of cell i (uniform density), in the
// seed's face plane. Empty cells give a zero direction.
TangentVector karcher_direction(const Mesh& m, const VoronoiPartition& part,
                                const SeedSet& seeds, int i);

// E(S) = 1/(2S) sum_i sum_{x in cell i} A(x) d(x)^2 with the same distance
// used for the assignment.
double gcvt_energy(const Mesh& m, const SeedSet& seeds, const VoronoiPartition& part);

// One Karcher move per seed through the exponential map (exactly one
// partition/energy evaluation).
SeedSet lloyd_step(const Mesh& m, const SeedSet& seeds, double rate = 1.0);

// --- Riemannian limited-memory quasi-Newton on the product manifold ---

using EnergyFn = std::function<double(const SeedSet&)>;
// Returns the per-seed descent directions v_i (the negative gradient).
using DirectionFn = std::function<std::vector<Vec3d>(const SeedSet&)>;

struct LbfgsConfig {
  double eta0 = 0.5;       // base step; candidates are eta0, 0.1 eta0, 0.01 eta0
  int memory = 8;
  int max_iters = 30;
  double c1 = 1e-4;        // sufficient-decrease constant
  double step_tol = 0.0;   // stop when the accepted move is below this
};

struct OptRecord {
  int iter = 0;
  double energy = 0;
  long func_calls = 0;  // cumulative energy evaluations
  double step = 0;
};

struct LbfgsResult {
  SeedSet seeds;
  std::vector<OptRecord> trajectory;
  bool line_search_failed = false;
};

LbfgsResult mesh_lbfgs(const Mesh& m, const SeedSet& seeds0, const EnergyFn& f,
                       const DirectionFn& grad, const LbfgsConfig& cfg);

// Lloyd driver with the same record format (one call per iteration).
LbfgsResult run_lloyd(const Mesh& m, const SeedSet& seeds0, int iters, double rate = 1.0);

// Caches the partition of the last evaluated seed set so that the gradient
// at an accepted line-search point costs no extra evaluation.
class GcvtEvaluator {
 public:
  explicit GcvtEvaluator(const Mesh& m) : m_(m) {}
  double energy(const SeedSet& s);
  std::vector<Vec3d> directions(const SeedSet& s);
  const VoronoiPartition& partition(const SeedSet& s);
  long calls() const { return calls_; }

 private:
  const Mesh& m_;
  long calls_ = 0;
  std::optional<SeedSet> cached_seeds_;
  VoronoiPartition cached_part_;
};

// --- internals exposed for tests ---

// Limited-memory pair living at the state it was created in, together with
// the transport along the step that led there.
struct LbfgsPair {
  std::vector<Vec3d> a;  // transported accepted step
  std::vector<Vec3d> b;  // gradient difference
  std::vector<Mat3> q;   // per-seed transport of that step
};

double bundle_dot(const std::vector<Vec3d>& x, const std::vector<Vec3d>& y);

// Recursive two-sided inverse-Hessian application (newest pair last).
std::vector<Vec3d> lbfgs_descend(const std::vector<Vec3d>& v,
                                 const std::deque<LbfgsPair>& memory, double h_diag);

}  // namespace digeo
