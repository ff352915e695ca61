#pragma once

#include <optional>
#include <string>
#include <vector>

#include "digeo/geometry.hpp"
#include "digeo/mesh.hpp"

namespace digeo {

struct BoundaryHit : Error { using Error::Error; };

enum class TraceTermination { LengthReached, Boundary, MaxSteps };
enum class TraceStatus { Ok, Stalled };

struct TraceConfig {
  int max_steps = 0;        // 0: derived as 10*sqrt(F) + 100
  bool hole_avoidance = false;
  std::optional<Vec3d> transport_payload;
  bool want_transport_matrix = false;  // accumulate the tangent-to-tangent map
  bool record_polyline = true;
  bool use_f32 = false;     // run the stepping arithmetic in single precision
};

struct GeodesicTrace {
  std::vector<SurfacePoint> points;       // polyline vertices at transitions
  std::vector<double> segment_lengths;    // one entry per consecutive point pair
  SurfacePoint final_point;
  Vec3d final_dir{0, 0, 0};               // unit vector in the final face plane
  double traced_length = 0;
  double requested_length = 0;
  TraceTermination terminated_by = TraceTermination::LengthReached;
  std::optional<Vec3d> transported_payload;
  std::optional<Mat3> transport_matrix;   // maps T_p -> T_final, zero on normals
  TraceStatus status = TraceStatus::Ok;
  std::string error;
};

bool traces_bit_equal(const GeodesicTrace& a, const GeodesicTrace& b);

struct BatchRequest {
  const Mesh* mesh = nullptr;
  std::vector<SurfacePoint> starts;
  std::vector<TangentVector> dirs;        // dirs[i].anchor must equal starts[i]
  std::vector<Vec3d> payloads;            // optional, per element; empty or size N
  TraceConfig config;
};

// --- Single-step state machine (double precision) ---

enum class StepEvent { Advanced, CrossedEdge, CrossedVertex, BoundarySlide, BoundaryStop };

struct StepResult {
  SurfacePoint point;
  Vec3d dir{0, 0, 0};    // unit direction after the step
  double step_length = 0;
  bool finished = false;  // requested length fully consumed
  StepEvent event = StepEvent::Advanced;
};

// One transition of the tracing state machine: an in-face advance, an edge
// crossing, a vertex crossing, or a boundary event, depending on where p
// sits and where v points. `remaining` is the length still to be traced.
StepResult geodesic_step(const Mesh& m, const SurfacePoint& p, const Vec3d& v_unit,
                         double remaining, const TraceConfig& cfg = {});

// Re-expresses an edge point in the adjacent face and maps v across the
// fold. The map is the rotation by the dihedral angle about the shared edge
// (computed from the two in-plane edge frames, so it is orientation-free).
// Requires p to lie on an interior edge of f.
std::pair<SurfacePoint, Vec3d> transport_over_edge(const Mesh& m, int f, const Vec3d& b,
                                                   const Vec3d& v);

// Crosses a vertex choosing the exit face so the left/right curve angles
// match (half the total vertex angle on each side). Throws BoundaryHit when
// the fan ends before half the total angle is accumulated.
std::pair<SurfacePoint, Vec3d> transport_over_vertex(const Mesh& m, int f, const Vec3d& b,
                                                     const Vec3d& v);

// Hole-avoidance continuation for a point on the mesh boundary: picks the
// incident face minimising the transport error of v, projects v onto it, or
// slides along the boundary when no face admits inward motion.
std::pair<SurfacePoint, Vec3d> boundary_continue(const Mesh& m, const SurfacePoint& p,
                                                 const Vec3d& v);

// --- Full traces ---

GeodesicTrace trace(const Mesh& m, const SurfacePoint& p, const TangentVector& v,
                    const TraceConfig& cfg = {});

// One task per geodesic over the shared immutable mesh; results land at the
// request index and are bitwise identical for any worker count.
std::vector<GeodesicTrace> trace_batch(const BatchRequest& req, int workers = 0);
// Serial reference implementation (no OpenMP), kept for testing.
std::vector<GeodesicTrace> trace_batch_serial(const BatchRequest& req);

// Worker resolution: explicit argument, else DIGEO_WORKERS, else OpenMP
// default; always at least 1.
int resolve_workers(int requested);

int default_max_steps(const Mesh& m);

}  // namespace digeo
