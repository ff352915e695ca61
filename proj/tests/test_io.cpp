#include <doctest.h>

#include <json.hpp>

#include <fstream>
#include <sstream>

#include "digeo/io.hpp"
#include "digeo/oracles.hpp"
#include "digeo/tracer.hpp"
#include "helpers.hpp"

using namespace digeo;
using namespace digeo::testing;

namespace {

std::string golden_path(const std::string& name) {
  return std::string(DIGEO_GOLDEN_DIR) + "/" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("surface point csv round trip") {
  std::vector<SurfacePoint> pts{{3, {0.25, 0.5, 0.25}}, {17, {1, 0, 0}}};
  std::ostringstream out;
  write_points_csv(out, pts);
  std::istringstream in(out.str());
  auto back = read_points_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == pts[0]);
  CHECK(back[1] == pts[1]);
}

TEST_CASE("vector csv round trip") {
  std::vector<Vec3d> vs{{0.1, -0.2, 0.3}, {1, 0, 0}};
  std::ostringstream out;
  write_vectors_csv(out, vs);
  std::istringstream in(out.str());
  auto back = read_vectors_csv(in);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == vs[0]);
  CHECK(back[1] == vs[1]);
}

TEST_CASE("malformed csv rows are rejected") {
  std::istringstream bad1("face,b0,b1,b2\n1,0.5,0.5\n");
  CHECK_THROWS_AS(read_points_csv(bad1), ParseError);
  std::istringstream bad2("dx,dy,dz\na,b,c\n");
  CHECK_THROWS_AS(read_vectors_csv(bad2), ParseError);
}

TEST_CASE("points json round trip keeps the schema") {
  std::vector<SurfacePoint> pts{{2, {0.5, 0.25, 0.25}}};
  std::string text = points_to_json(pts);
  auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["schema"] == kPointsSchema);
  auto back = points_from_json(text);
  REQUIRE(back.size() == 1);
  CHECK(back[0] == pts[0]);
}

TEST_CASE("trace json matches the pinned golden structure") {
  // Deterministic fixture: one trace on the flat two-triangle square.
  Mesh m = two_triangle_square();
  SurfacePoint p{0, {0.5, 0.25, 0.25}};
  TangentVector v{p, {0.25, 0.5, 0.0}};
  auto t = trace(m, p, v);
  std::string text = traces_to_json({t});

  auto produced = nlohmann::json::parse(text);
  auto golden = nlohmann::json::parse(read_file(golden_path("trace_square.json")));
  CHECK(produced == golden);  // exact: doubles compare bit-for-bit
}

TEST_CASE("obj polyline export lists every polyline point") {
  const Mesh& m = icosphere(2);
  Rng rng(3);
  SurfacePoint p = sample_surface_point(m, rng);
  TangentVector v = sample_tangent(m, p, rng, 0.8, 0.8);
  auto t = trace(m, p, v);
  std::ostringstream out;
  write_traces_obj(out, m, {t});
  std::string text = out.str();
  size_t vcount = 0, pos = 0;
  while ((pos = text.find("\nv ", pos)) != std::string::npos) {
    ++vcount;
    ++pos;
  }
  if (text.rfind("v ", 0) == 0) ++vcount;
  CHECK(vcount == t.points.size());
  CHECK(text.find("\nl ") != std::string::npos);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  const Mesh& m = icosphere(2);
  Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) {
    SurfacePoint pa = sample_surface_point(m, a);
    SurfacePoint pb = sample_surface_point(m, b);
    CHECK(pa == pb);
    TangentVector va = sample_tangent(m, pa, a, 0.1, 1.0);
    TangentVector vb = sample_tangent(m, pb, b, 0.1, 1.0);
    CHECK(va.dir == vb.dir);
  }
}

TEST_CASE("surface sampling weights faces by area") {
  // Two triangles, one four times the area of the other.
  Mesh m = Mesh::build({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {-2, 0, 0}, {0, -2, 0}},
                       {{0, 1, 2}, {0, 4, 3}});
  Rng rng(7);
  int big = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i)
    if (sample_surface_point(m, rng).face == 1) ++big;
  double frac = double(big) / n;
  CHECK(frac > 0.76);
  CHECK(frac < 0.84);  // expected 0.8
}
