#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace digeo {

template <class S>
struct Vec3 {
  S x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(S x_, S y_, S z_) : x(x_), y(y_), z(z_) {}
  template <class U>
  explicit Vec3(const Vec3<U>& o) : x(S(o.x)), y(S(o.y)), z(S(o.z)) {}

  S& operator[](int i) { return (&x)[i]; }
  S operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3 operator*(S s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(S s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(S s) { x *= s; y *= s; z *= s; return *this; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

template <class S> inline Vec3<S> operator*(S s, const Vec3<S>& v) { return v * s; }

template <class S> inline S dot(const Vec3<S>& a, const Vec3<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class S> inline Vec3<S> cross(const Vec3<S>& a, const Vec3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class S> inline S norm2(const Vec3<S>& v) { return dot(v, v); }
template <class S> inline S norm(const Vec3<S>& v) { return std::sqrt(norm2(v)); }
template <class S> inline Vec3<S> normalized(const Vec3<S>& v) {
  S n = norm(v);
  return n > S(0) ? v / n : Vec3<S>{0, 0, 0};
}

// Unsigned angle in [0, pi], numerically stable near 0 and pi.
template <class S> inline S angle_between(const Vec3<S>& a, const Vec3<S>& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

// Signed angle from a to b around unit axis, in (-pi, pi].
template <class S>
inline S signed_angle(const Vec3<S>& a, const Vec3<S>& b, const Vec3<S>& axis) {
  return std::atan2(dot(cross(a, b), axis), dot(a, b));
}

// Rodrigues rotation of v about unit axis.
template <class S>
inline Vec3<S> rotate_about(const Vec3<S>& v, const Vec3<S>& axis, S angle) {
  S c = std::cos(angle), s = std::sin(angle);
  return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (S(1) - c));
}

using Vec3d = Vec3<double>;
using Vec3f = Vec3<float>;

struct Mat3 {
  // Row-major 3x3.
  std::array<double, 9> m{};

  static Mat3 identity() {
    Mat3 r;
    r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    return r;
  }
  static Mat3 zero() { return Mat3{}; }
  static Mat3 from_columns(const Vec3d& c0, const Vec3d& c1, const Vec3d& c2) {
    Mat3 r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
  }

  double operator()(int r, int c) const { return m[3 * r + c]; }
  double& operator()(int r, int c) { return m[3 * r + c]; }

  Vec3d col(int c) const { return {m[c], m[3 + c], m[6 + c]}; }
  Vec3d row(int r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }

  Vec3d operator*(const Vec3d& v) const {
    return {dot(row(0), v), dot(row(1), v), dot(row(2), v)};
  }
  Mat3 operator*(const Mat3& o) const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
        r(i, j) = s;
      }
    return r;
  }
  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
    return r;
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

struct Mat2 {
  // Row-major 2x2.
  double a = 0, b = 0, c = 0, d = 0;

  static Mat2 identity() { return {1, 0, 0, 1}; }
  static Mat2 zero() { return {}; }

  std::array<double, 2> operator*(const std::array<double, 2>& v) const {
    return {a * v[0] + b * v[1], c * v[0] + d * v[1]};
  }
  Mat2 transposed() const { return {a, c, b, d}; }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  double max_abs() const {
    return std::max({std::abs(a), std::abs(b), std::abs(c), std::abs(d)});
  }
};

// Solves the 2x2 SPD Gram system for coefficients of v on the (possibly
// non-orthogonal) in-plane basis {e1, e2}.
inline std::array<double, 2> plane_coefficients(const Vec3d& e1, const Vec3d& e2,
                                                const Vec3d& v) {
  double g11 = dot(e1, e1), g12 = dot(e1, e2), g22 = dot(e2, e2);
  double r1 = dot(e1, v), r2 = dot(e2, v);
  double det = g11 * g22 - g12 * g12;
  return {(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det};
}

// Deterministic RNG (xoshiro256** + explicit float mapping), so streams do
// not depend on the standard library's distribution implementations.
struct Rng {
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) {  // in [0, n)
    return int(next_u64() % std::uint64_t(n));
  }

 private:
  struct SplitMix {
    std::uint64_t s;
    explicit SplitMix(std::uint64_t seed) : s(seed) {}
    std::uint64_t operator()() {
      std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return z ^ (z >> 31);
    }
  };
  // xoshiro256** seeded from splitmix64.
  struct Gen {
    std::uint64_t s0, s1, s2, s3;
    explicit Gen(std::uint64_t seed) {
      SplitMix sm(seed);
      s0 = sm(); s1 = sm(); s2 = sm(); s3 = sm();
    }
    static std::uint64_t rotl(std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    }
    std::uint64_t operator()() {
      std::uint64_t result = rotl(s1 * 5, 7) * 9;
      std::uint64_t t = s1 << 17;
      s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
      s3 = rotl(s3, 45);
      return result;
    }
  } gen_;
};

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct ParseError : Error { using Error::Error; };
struct NonManifoldError : Error { using Error::Error; };
struct DegenerateFaceError : Error { using Error::Error; };
struct NumericalStall : Error { using Error::Error; };
struct DegenerateDirection : Error { using Error::Error; };
struct NotOnSphere : Error { using Error::Error; };
struct NotTangent : Error { using Error::Error; };
struct StepTooLarge : Error { using Error::Error; };
struct MaxIterations : Error { using Error::Error; };
struct InvalidArgs : Error { using Error::Error; };
struct IOError : Error { using Error::Error; };

}  // namespace digeo
