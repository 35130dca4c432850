#include "hypcode/fixed.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hyp {

using u128 = unsigned __int128;

Fix Fix::from_double(double d)
{
    Fix r;
    if (d == 0.0 || !std::isfinite(d))
        return r;
    int e = 0;
    double f = std::frexp(std::fabs(d), &e);
    uint64_t mant = (uint64_t)std::ldexp(f, 53);
    // value = mant * 2^(e-53); bit index counted from the least significant bit
    int s = e - 53 + 64 * kFixWords;
    for (int bit = 0; bit < 53; ++bit) {
        if (!((mant >> bit) & 1ULL))
            continue;
        int pos = s + bit;
        if (pos < 0 || pos >= 64 * kFixWords)
            continue;
        int word = kFixWords - 1 - pos / 64;
        r.w[word] |= 1ULL << (pos % 64);
    }
    return d < 0 ? -r : r;
}

Fix Fix::from_ratio(int64_t num, int64_t den)
{
    if (den <= 0)
        throw std::invalid_argument("from_ratio: den must be positive");
    int64_t n = num % den;
    if (n < 0)
        n += den;
    // long division, one word at a time
    Fix r;
    u128 rem = (u128)n;
    for (int i = 0; i < kFixWords; ++i) {
        u128 cur = rem << 64;
        r.w[i] = (uint64_t)(cur / (u128)den);
        rem = cur % (u128)den;
    }
    return r;
}

double Fix::unit() const
{
    return std::ldexp((double)w[0], -64) + std::ldexp((double)w[1], -128);
}

double Fix::signed_val() const
{
    bool neg = (w[0] >> 63) & 1ULL;
    Fix m = neg ? -*this : *this;
    int i = 0;
    while (i < kFixWords && m.w[i] == 0)
        ++i;
    if (i == kFixWords)
        return 0.0;
    double v = std::ldexp((double)m.w[i], -64 * (i + 1));
    if (i + 1 < kFixWords)
        v += std::ldexp((double)m.w[i + 1], -64 * (i + 2));
    return neg ? -v : v;
}

f128 Fix::unit_q() const
{
    return ldexpq((f128)w[0], -64) + ldexpq((f128)w[1], -128);
}

static f128 signed_q(const Fix& x)
{
    bool neg = (x.w[0] >> 63) & 1ULL;
    Fix m = neg ? -x : x;
    int i = 0;
    while (i < kFixWords && m.w[i] == 0)
        ++i;
    if (i == kFixWords)
        return 0;
    f128 v = ldexpq((f128)m.w[i], -64 * (i + 1));
    if (i + 1 < kFixWords)
        v += ldexpq((f128)m.w[i + 1], -64 * (i + 2));
    return neg ? -v : v;
}

bool Fix::is_zero() const
{
    for (auto x : w)
        if (x)
            return false;
    return true;
}

Fix Fix::operator-() const
{
    Fix r;
    for (int i = 0; i < kFixWords; ++i)
        r.w[i] = ~w[i];
    // add one ulp
    for (int i = kFixWords - 1; i >= 0; --i) {
        if (++r.w[i] != 0)
            break;
    }
    return r;
}

Fix& Fix::operator+=(const Fix& o)
{
    uint64_t carry = 0;
    for (int i = kFixWords - 1; i >= 0; --i) {
        u128 s = (u128)w[i] + o.w[i] + carry;
        w[i] = (uint64_t)s;
        carry = (uint64_t)(s >> 64);
    }
    return *this;
}

Fix& Fix::operator-=(const Fix& o)
{
    *this += -o;
    return *this;
}

Fix Fix::mul(int64_t k) const
{
    bool neg = k < 0;
    uint64_t kk = neg ? (uint64_t)(-(k + 1)) + 1 : (uint64_t)k;
    Fix r;
    uint64_t carry = 0;
    for (int i = kFixWords - 1; i >= 0; --i) {
        u128 p = (u128)w[i] * kk + carry;
        r.w[i] = (uint64_t)p;
        carry = (uint64_t)(p >> 64);
    }
    return neg ? -r : r;
}

std::string Fix::hex() const
{
    std::string s;
    char buf[17];
    for (auto x : w) {
        std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)x);
        s += buf;
    }
    return s;
}

Mat2i Mat2i::inverse() const
{
    int64_t d = det();
    if (d != 1 && d != -1)
        throw std::invalid_argument("matrix not unimodular");
    return {m11 * d, -m01 * d, -m10 * d, m00 * d};
}

Mat2i Mat2i::operator*(const Mat2i& o) const
{
    return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
            m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
}

Torus2 apply(const Mat2i& m, const Torus2& u)
{
    Torus2 r;
    r.a = u.a.mul(m.m00) + u.b.mul(m.m01);
    r.b = u.a.mul(m.m10) + u.b.mul(m.m11);
    return r;
}

Torus2 add_offset(const Torus2& u, double d1, double d2)
{
    Torus2 r = u;
    r.a += Fix::from_double(d1);
    r.b += Fix::from_double(d2);
    return r;
}

void torus_diff(const Torus2& u, const Torus2& v, double& d1, double& d2)
{
    d1 = (u.a - v.a).signed_val();
    d2 = (u.b - v.b).signed_val();
}

void torus_diff_q(const Torus2& u, const Torus2& v, f128& d1, f128& d2)
{
    d1 = signed_q(u.a - v.a);
    d2 = signed_q(u.b - v.b);
}

double torus_dist(const Torus2& u, const Torus2& v)
{
    double d1, d2;
    torus_diff(u, v, d1, d2);
    return std::hypot(d1, d2);
}

size_t hash_torus(const Torus2& u)
{
    size_t h = 1469598103934665603ULL;
    for (int i = 0; i < kFixWords; ++i) {
        h = (h ^ u.a.w[i]) * 1099511628211ULL;
        h = (h ^ u.b.w[i]) * 1099511628211ULL;
    }
    return h;
}

} // namespace hyp
