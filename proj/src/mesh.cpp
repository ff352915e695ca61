#include "digeo/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace digeo {

namespace {

double interior_angle(const Vec3d& apex, const Vec3d& a, const Vec3d& b) {
  return angle_between(a - apex, b - apex);
}

}  // namespace

int Mesh::neighbor_across(int f, int a, int b) const {
  for (int k = 0; k < 3; ++k) {
    int u = faces[f][(k + 1) % 3], v = faces[f][(k + 2) % 3];
    if ((u == a && v == b) || (u == b && v == a)) return face_adjacency[f][k];
  }
  return -1;
}

std::span<const int> Mesh::vertex_faces(int v) const {
  return {vertex_face_list_.data() + vertex_face_offsets_[v],
          vertex_face_list_.data() + vertex_face_offsets_[v + 1]};
}

Mesh Mesh::build(std::vector<Vec3d> vertices, std::vector<std::array<int, 3>> faces) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.faces = std::move(faces);
  const int nv = m.vertex_count();
  const int nf = m.face_count();

  for (int f = 0; f < nf; ++f) {
    const auto& c = m.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (c[k] < 0 || c[k] >= nv)
        throw ParseError("face " + std::to_string(f) + " references vertex out of range");
    }
    if (c[0] == c[1] || c[1] == c[2] || c[0] == c[2])
      throw DegenerateFaceError("face " + std::to_string(f) + " has repeated vertices");
  }

  // Normals, areas; reject degenerate triangles whose frame is undefined.
  m.face_normals.resize(nf);
  m.face_areas.resize(nf);
  m.total_area_ = 0;
  for (int f = 0; f < nf; ++f) {
    const auto& c = m.faces[f];
    Vec3d e1 = m.vertices[c[1]] - m.vertices[c[0]];
    Vec3d e2 = m.vertices[c[2]] - m.vertices[c[0]];
    Vec3d n = cross(e1, e2);
    double a2 = norm(n);
    double longest2 = std::max({norm2(e1), norm2(e2), norm2(m.vertices[c[2]] - m.vertices[c[1]])});
    if (a2 <= 1e-14 * longest2 || longest2 == 0.0)
      throw DegenerateFaceError("face " + std::to_string(f) + " has zero area");
    m.face_normals[f] = n / a2;
    m.face_areas[f] = 0.5 * a2;
    m.total_area_ += m.face_areas[f];
  }

  // Adjacency via sorted vertex pairs; an edge with 3+ incident faces is
  // rejected as non-manifold.
  std::map<std::pair<int, int>, std::pair<int, int>> edge_face;  // edge -> (face, local k)
  m.face_adjacency.assign(nf, {-1, -1, -1});
  for (int f = 0; f < nf; ++f) {
    for (int k = 0; k < 3; ++k) {
      int a = m.faces[f][(k + 1) % 3], b = m.faces[f][(k + 2) % 3];
      auto key = std::minmax(a, b);
      auto it = edge_face.find(key);
      if (it == edge_face.end()) {
        edge_face[key] = {f, k};
      } else if (it->second.first >= 0) {
        auto [g, kg] = it->second;
        m.face_adjacency[f][k] = g;
        m.face_adjacency[g][kg] = f;
        it->second = {-2, -2};  // seen twice
      } else {
        throw NonManifoldError("edge (" + std::to_string(key.first) + "," +
                               std::to_string(key.second) + ") incident to 3+ faces");
      }
    }
  }

  m.vertex_on_boundary.assign(nv, false);
  double edge_len_sum = 0;
  std::int64_t edge_count = 0;
  for (const auto& [key, val] : edge_face) {
    edge_len_sum += norm(m.vertices[key.first] - m.vertices[key.second]);
    ++edge_count;
    if (val.first >= 0) {  // seen once: boundary edge
      m.vertex_on_boundary[key.first] = true;
      m.vertex_on_boundary[key.second] = true;
    }
  }
  m.mean_edge_length_ = edge_count ? edge_len_sum / double(edge_count) : 0.0;

  // Total angles and vertex areas (one third of incident triangle areas).
  m.vertex_total_angle.assign(nv, 0.0);
  m.vertex_area.assign(nv, 0.0);
  for (int f = 0; f < nf; ++f) {
    const auto& c = m.faces[f];
    for (int k = 0; k < 3; ++k) {
      m.vertex_total_angle[c[k]] += interior_angle(
          m.vertices[c[k]], m.vertices[c[(k + 1) % 3]], m.vertices[c[(k + 2) % 3]]);
      m.vertex_area[c[k]] += m.face_areas[f] / 3.0;
    }
  }

  // Vertex->faces CSR.
  m.vertex_face_offsets_.assign(nv + 1, 0);
  for (int f = 0; f < nf; ++f)
    for (int k = 0; k < 3; ++k) m.vertex_face_offsets_[m.faces[f][k] + 1]++;
  for (int v = 0; v < nv; ++v) m.vertex_face_offsets_[v + 1] += m.vertex_face_offsets_[v];
  m.vertex_face_list_.resize(nf * 3);
  {
    std::vector<int> cursor(m.vertex_face_offsets_.begin(), m.vertex_face_offsets_.end() - 1);
    for (int f = 0; f < nf; ++f)
      for (int k = 0; k < 3; ++k) m.vertex_face_list_[cursor[m.faces[f][k]]++] = f;
  }

  return m;
}

Mesh load_obj(std::istream& in) {
  std::vector<Vec3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int lineno = 0;

  auto parse_index = [&](const std::string& tok) -> int {
    // "v", "v/vt", "v//vn", "v/vt/vn"; negative indices are relative.
    size_t slash = tok.find('/');
    std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
    int idx = 0;
    try {
      idx = std::stoi(head);
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno) + ": bad face index '" + tok + "'");
    }
    if (idx < 0) idx = int(vertices.size()) + idx + 1;
    if (idx < 1 || idx > int(vertices.size()))
      throw ParseError("line " + std::to_string(lineno) + ": face index out of range");
    return idx - 1;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Vec3d p;
      if (!(ls >> p.x >> p.y >> p.z))
        throw ParseError("line " + std::to_string(lineno) + ": malformed vertex");
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_index(tok));
      if (poly.size() < 3)
        throw ParseError("line " + std::to_string(lineno) + ": face with <3 vertices");
      for (size_t i = 1; i + 1 < poly.size(); ++i)
        faces.push_back({poly[0], poly[i], poly[i + 1]});
    }
    // vn/vt/usemtl/etc. ignored; derived data is recomputed.
  }
  if (vertices.empty() || faces.empty()) throw ParseError("OBJ contains no triangles");
  return Mesh::build(std::move(vertices), std::move(faces));
}

Mesh load_obj_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open '" + path + "'");
  return load_obj(in);
}

void write_obj(const Mesh& m, std::ostream& out) {
  out.precision(17);
  for (const auto& v : m.vertices) out << "v " << v.x << " " << v.y << " " << v.z << "\n";
  for (const auto& f : m.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
}

void write_obj_file(const Mesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot open '" + path + "' for writing");
  write_obj(m, out);
}

Mesh concat_meshes(const Mesh& a, const Mesh& b) {
  std::vector<Vec3d> vertices = a.vertices;
  vertices.insert(vertices.end(), b.vertices.begin(), b.vertices.end());
  std::vector<std::array<int, 3>> faces = a.faces;
  int off = a.vertex_count();
  for (const auto& f : b.faces) faces.push_back({f[0] + off, f[1] + off, f[2] + off});
  return Mesh::build(std::move(vertices), std::move(faces));
}

Vec3d embed(const SurfacePoint& p, const Mesh& m) {
  const auto& c = m.faces[p.face];
  return m.vertices[c[0]] * p.bary[0] + m.vertices[c[1]] * p.bary[1] +
         m.vertices[c[2]] * p.bary[2];
}

PointClassification classify(const SurfacePoint& p, double tol) {
  int imax = 0, imin = 0;
  for (int i = 1; i < 3; ++i) {
    if (p.bary[i] > p.bary[imax]) imax = i;
    if (p.bary[i] < p.bary[imin]) imin = i;
  }
  if (p.bary[imax] >= 1.0 - tol) return {PointClass::Vertex, imax};
  if (p.bary[imin] <= tol) return {PointClass::Edge, imin};
  return {PointClass::Interior, -1};
}

bool bary_valid(const Vec3d& b, double tol) {
  double s = b[0] + b[1] + b[2];
  if (std::abs(s - 1.0) > tol) return false;
  for (int i = 0; i < 3; ++i)
    if (b[i] < -tol || b[i] > 1.0 + tol) return false;
  return true;
}

Vec3d project_to_face(const Mesh& m, int f, const Vec3d& q) {
  const auto& c = m.faces[f];
  const Vec3d& x0 = m.vertices[c[0]];
  Vec3d e1 = m.vertices[c[1]] - x0, e2 = m.vertices[c[2]] - x0;
  auto [b1, b2] = plane_coefficients(e1, e2, q - x0);

  if (b1 >= 0 && b2 >= 0 && b1 + b2 <= 1.0) return {1.0 - b1 - b2, b1, b2};

  // Clamp to the nearest point on each edge segment and keep the best.
  Vec3d best{1, 0, 0};
  double best_d2 = std::numeric_limits<double>::infinity();
  const Vec3d pts[3] = {x0, m.vertices[c[1]], m.vertices[c[2]]};
  for (int k = 0; k < 3; ++k) {
    const Vec3d& a = pts[(k + 1) % 3];
    const Vec3d& b = pts[(k + 2) % 3];
    Vec3d ab = b - a;
    double t = std::clamp(dot(q - a, ab) / norm2(ab), 0.0, 1.0);
    Vec3d pt = a + ab * t;
    double d2 = norm2(q - pt);
    if (d2 < best_d2) {
      best_d2 = d2;
      Vec3d bb{0, 0, 0};
      bb[(k + 1) % 3] = 1.0 - t;
      bb[(k + 2) % 3] = t;
      best = bb;
    }
  }
  return best;
}

double total_angle(int vertex, const Mesh& m) { return m.vertex_total_angle[vertex]; }

}  // namespace digeo
