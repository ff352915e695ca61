#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "digeo/geometry.hpp"

namespace digeo {

// Barycentric snap threshold: coordinates within tau of 0/1 are classified
// as edge/vertex hits. Prevents stalls when a trace lands numerically on a
// simplex boundary.
inline constexpr double kBaryTol = 1e-10;
inline constexpr float kBaryTolF = 1e-6f;

struct SurfacePoint {
  int face = -1;
  Vec3d bary{0, 0, 0};

  SurfacePoint() = default;
  SurfacePoint(int f, const Vec3d& b) : face(f), bary(b) {}
  bool operator==(const SurfacePoint& o) const = default;
};

enum class PointClass { Interior, Edge, Vertex };

struct PointClassification {
  PointClass kind = PointClass::Interior;
  int local = -1;  // local vertex id for Vertex, local edge id for Edge
};

// Immutable triangle mesh with the derived quantities tracing needs.
// Adjacency is stored per face as the neighbour across each edge (keyed by
// sorted vertex pairs, no half-edges), which admits non-orientable input.
// Local edge k of a face is the edge opposite corner k, i.e. the locus
// bary[k] == 0.
class Mesh {
 public:
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<std::array<int, 3>> face_adjacency;  // -1 = boundary
  std::vector<Vec3d> face_normals;
  std::vector<double> face_areas;
  std::vector<double> vertex_total_angle;
  std::vector<double> vertex_area;
  std::vector<bool> vertex_on_boundary;

  int vertex_count() const { return int(vertices.size()); }
  int face_count() const { return int(faces.size()); }

  const std::array<int, 3>& corners(int f) const { return faces[f]; }
  // Local index of global vertex v in face f, or -1.
  int corner_of(int f, int v) const {
    const auto& c = faces[f];
    if (c[0] == v) return 0;
    if (c[1] == v) return 1;
    if (c[2] == v) return 2;
    return -1;
  }
  // Face adjacent to f across the edge opposite local corner k.
  int neighbor(int f, int k) const { return face_adjacency[f][k]; }
  // Face adjacent to f across edge (global vertices a, b), or -1.
  int neighbor_across(int f, int a, int b) const;
  bool edge_is_boundary(int f, int k) const { return face_adjacency[f][k] < 0; }

  double mean_edge_length() const { return mean_edge_length_; }
  double total_area() const { return total_area_; }

  // Faces incident to a vertex (unordered).
  std::span<const int> vertex_faces(int v) const;

  static Mesh build(std::vector<Vec3d> vertices,
                    std::vector<std::array<int, 3>> faces);

 private:
  double mean_edge_length_ = 0;
  double total_area_ = 0;
  std::vector<int> vertex_face_offsets_;
  std::vector<int> vertex_face_list_;
};

struct TangentVector {
  SurfacePoint anchor;
  Vec3d dir{0, 0, 0};  // ambient vector in the anchor face plane
};

// OBJ input. Faces with more than three vertices are fan-split; normals and
// texture coordinates in the file are ignored. Rejects non-manifold edges
// (three or more incident faces) and zero-area triangles.
Mesh load_obj(std::istream& in);
Mesh load_obj_file(const std::string& path);
void write_obj(const Mesh& m, std::ostream& out);
void write_obj_file(const Mesh& m, const std::string& path);

// Disjoint union with offset indices, for heterogeneous batches.
Mesh concat_meshes(const Mesh& a, const Mesh& b);

Vec3d embed(const SurfacePoint& p, const Mesh& m);
PointClassification classify(const SurfacePoint& p, double tol = kBaryTol);
bool bary_valid(const Vec3d& b, double tol = 1e-9);

// Barycentric coordinates of the closest point to q on face f.
Vec3d project_to_face(const Mesh& m, int f, const Vec3d& q);

double total_angle(int vertex, const Mesh& m);

}  // namespace digeo
