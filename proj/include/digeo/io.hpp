#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "digeo/geometry.hpp"
#include "digeo/mesh.hpp"
#include "digeo/tracer.hpp"

namespace digeo {

// CSV: header "face,b0,b1,b2", one surface point per row.
std::vector<SurfacePoint> read_points_csv(std::istream& in);
void write_points_csv(std::ostream& out, const std::vector<SurfacePoint>& pts);

// CSV: header "dx,dy,dz", one ambient vector per row.
std::vector<Vec3d> read_vectors_csv(std::istream& in);
void write_vectors_csv(std::ostream& out, const std::vector<Vec3d>& vs);

// JSON schemas are versioned; tests pin them.
inline constexpr const char* kTracesSchema = "digeo.traces/1";
inline constexpr const char* kPointsSchema = "digeo.points/1";
inline constexpr const char* kGradCheckSchema = "digeo.gradcheck/1";
inline constexpr const char* kOracleSchema = "digeo.oracle-compare/1";

std::string traces_to_json(const std::vector<GeodesicTrace>& traces);
std::string points_to_json(const std::vector<SurfacePoint>& pts);
std::vector<SurfacePoint> points_from_json(const std::string& text);

// OBJ polyline export of trace polylines ("v" + "l" records).
void write_traces_obj(std::ostream& out, const Mesh& m,
                      const std::vector<GeodesicTrace>& traces);

// --- Random sampling (uniform over area, sqrt trick for barycentrics,
// uniform in-plane direction, uniform length in [min_len, max_len]) ---

SurfacePoint sample_surface_point(const Mesh& m, Rng& rng);
TangentVector sample_tangent(const Mesh& m, const SurfacePoint& p, Rng& rng,
                             double min_len, double max_len);

}  // namespace digeo
