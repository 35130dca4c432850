#pragma once
// Exact torus coordinates: 1024-bit dyadic fixed point, arithmetic mod 1.
#include <quadmath.h>

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>

namespace hyp {

using f128 = __float128;

constexpr int kFixWords = 16;

struct Fix {
    // w[0] is the most significant word; value = sum w[i] 2^{-64(i+1)}
    std::array<uint64_t, kFixWords> w{};

    static Fix from_double(double d);
    static Fix from_ratio(int64_t num, int64_t den);
    double unit() const;     // representative in [0,1)
    double signed_val() const; // representative in [-1/2,1/2)
    f128 unit_q() const;       // [0,1) to 113 bits
    bool is_zero() const;
    Fix operator-() const;
    Fix& operator+=(const Fix& o);
    Fix& operator-=(const Fix& o);
    Fix mul(int64_t k) const;
    bool operator==(const Fix& o) const { return w == o.w; }
    bool operator!=(const Fix& o) const { return w != o.w; }
    std::string hex() const;
};

inline Fix operator+(Fix a, const Fix& b) { a += b; return a; }
inline Fix operator-(Fix a, const Fix& b) { a -= b; return a; }

struct Torus2 {
    Fix a, b;
    bool operator==(const Torus2& o) const { return a == o.a && b == o.b; }
    bool operator!=(const Torus2& o) const { return !(*this == o); }
};

struct Mat2i {
    int64_t m00 = 1, m01 = 0, m10 = 0, m11 = 1;
    Mat2i inverse() const; // requires det = +-1
    Mat2i operator*(const Mat2i& o) const;
    int64_t det() const { return m00 * m11 - m01 * m10; }
    int64_t trace() const { return m00 + m11; }
};

Torus2 apply(const Mat2i& m, const Torus2& u);
Torus2 add_offset(const Torus2& u, double d1, double d2);
// shortest representative of u - v, as doubles
void torus_diff(const Torus2& u, const Torus2& v, double& d1, double& d2);
double torus_dist(const Torus2& u, const Torus2& v);
// same, keeping 113 bits of the difference
void torus_diff_q(const Torus2& u, const Torus2& v, f128& d1, f128& d2);
size_t hash_torus(const Torus2& u);

} // namespace hyp
