#include "digeo/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace digeo {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<SurfacePoint> read_points_csv(std::istream& in) {
  std::vector<SurfacePoint> pts;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find("face") != std::string::npos) continue;  // header row
    }
    auto cols = split_csv_line(line);
    if (cols.size() != 4) throw ParseError("points csv: expected face,b0,b1,b2");
    try {
      pts.push_back({std::stoi(cols[0]),
                     {std::stod(cols[1]), std::stod(cols[2]), std::stod(cols[3])}});
    } catch (const std::exception&) {
      throw ParseError("points csv: bad row '" + line + "'");
    }
  }
  return pts;
}

void write_points_csv(std::ostream& out, const std::vector<SurfacePoint>& pts) {
  out.precision(17);
  out << "face,b0,b1,b2\n";
  for (const auto& p : pts)
    out << p.face << "," << p.bary[0] << "," << p.bary[1] << "," << p.bary[2] << "\n";
}

std::vector<Vec3d> read_vectors_csv(std::istream& in) {
  std::vector<Vec3d> vs;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.find("dx") != std::string::npos) continue;
    }
    auto cols = split_csv_line(line);
    if (cols.size() != 3) throw ParseError("vectors csv: expected dx,dy,dz");
    try {
      vs.push_back({std::stod(cols[0]), std::stod(cols[1]), std::stod(cols[2])});
    } catch (const std::exception&) {
      throw ParseError("vectors csv: bad row '" + line + "'");
    }
  }
  return vs;
}

void write_vectors_csv(std::ostream& out, const std::vector<Vec3d>& vs) {
  out.precision(17);
  out << "dx,dy,dz\n";
  for (const auto& v : vs) out << v.x << "," << v.y << "," << v.z << "\n";
}

namespace {

json point_to_json(const SurfacePoint& p) {
  return json{{"face", p.face}, {"bary", {p.bary[0], p.bary[1], p.bary[2]}}};
}

SurfacePoint point_from_json(const json& j) {
  SurfacePoint p;
  p.face = j.at("face").get<int>();
  auto b = j.at("bary");
  p.bary = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()};
  return p;
}

const char* termination_name(TraceTermination t) {
  switch (t) {
    case TraceTermination::LengthReached: return "length_reached";
    case TraceTermination::Boundary: return "boundary";
    case TraceTermination::MaxSteps: return "max_steps";
  }
  return "unknown";
}

}  // namespace

std::string traces_to_json(const std::vector<GeodesicTrace>& traces) {
  json arr = json::array();
  for (const auto& t : traces) {
    json jt;
    jt["final_point"] = point_to_json(t.final_point);
    jt["final_dir"] = {t.final_dir.x, t.final_dir.y, t.final_dir.z};
    jt["traced_length"] = t.traced_length;
    jt["requested_length"] = t.requested_length;
    jt["terminated_by"] = termination_name(t.terminated_by);
    jt["ok"] = t.status == TraceStatus::Ok;
    if (t.status != TraceStatus::Ok) jt["error"] = t.error;
    json pts = json::array();
    for (const auto& p : t.points) pts.push_back(point_to_json(p));
    jt["points"] = std::move(pts);
    jt["segment_lengths"] = t.segment_lengths;
    if (t.transported_payload) {
      const Vec3d& w = *t.transported_payload;
      jt["transported_payload"] = {w.x, w.y, w.z};
    }
    arr.push_back(std::move(jt));
  }
  json root{{"schema", kTracesSchema}, {"traces", std::move(arr)}};
  return root.dump(2);
}

std::string points_to_json(const std::vector<SurfacePoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(point_to_json(p));
  json root{{"schema", kPointsSchema}, {"points", std::move(arr)}};
  return root.dump(2);
}

std::vector<SurfacePoint> points_from_json(const std::string& text) {
  json root = json::parse(text);
  if (root.value("schema", "") != kPointsSchema)
    throw ParseError("points json: unexpected schema");
  std::vector<SurfacePoint> out;
  for (const auto& j : root.at("points")) out.push_back(point_from_json(j));
  return out;
}

void write_traces_obj(std::ostream& out, const Mesh& m,
                      const std::vector<GeodesicTrace>& traces) {
  out.precision(17);
  int base = 1;
  for (const auto& t : traces) {
    for (const auto& p : t.points) {
      Vec3d q = embed(p, m);
      out << "v " << q.x << " " << q.y << " " << q.z << "\n";
    }
    if (t.points.size() >= 2) {
      out << "l";
      for (size_t i = 0; i < t.points.size(); ++i) out << " " << base + int(i);
      out << "\n";
    }
    base += int(t.points.size());
  }
}

SurfacePoint sample_surface_point(const Mesh& m, Rng& rng) {
  double pick = rng.uniform() * m.total_area();
  double acc = 0;
  int face = m.face_count() - 1;
  for (int f = 0; f < m.face_count(); ++f) {
    acc += m.face_areas[f];
    if (pick <= acc) {
      face = f;
      break;
    }
  }
  double r1 = std::sqrt(rng.uniform());
  double r2 = rng.uniform();
  return {face, {1.0 - r1, r1 * (1.0 - r2), r1 * r2}};
}

TangentVector sample_tangent(const Mesh& m, const SurfacePoint& p, Rng& rng,
                             double min_len, double max_len) {
  const auto& c = m.faces[p.face];
  Vec3d t1 = normalized(m.vertices[c[1]] - m.vertices[c[0]]);
  Vec3d n = m.face_normals[p.face];
  t1 = normalized(t1 - n * dot(t1, n));
  Vec3d t2 = cross(n, t1);
  double phi = 2.0 * M_PI * rng.uniform();
  double len = rng.uniform(min_len, max_len);
  TangentVector v;
  v.anchor = p;
  v.dir = (t1 * std::cos(phi) + t2 * std::sin(phi)) * len;
  return v;
}

}  // namespace digeo
