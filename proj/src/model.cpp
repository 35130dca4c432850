#include "hypcode/model.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace hyp {

RoofKind parse_roof_kind(const std::string& s)
{
    if (s == "const")
        return RoofKind::Const;
    if (s == "cos")
        return RoofKind::Cos;
    if (s == "stretch")
        return RoofKind::Stretch;
    throw std::invalid_argument("unknown roof kind '" + s + "'");
}

std::string roof_kind_name(RoofKind k)
{
    switch (k) {
    case RoofKind::Const: return "const";
    case RoofKind::Cos: return "cos";
    case RoofKind::Stretch: return "stretch";
    }
    return "?";
}

static double wrap_half(double d)
{
    d -= std::floor(d);
    return d >= 0.5 ? d - 1.0 : d;
}

ModelFlow::ModelFlow(const ModelConfig& cfg) : cfg_(cfg), A_(cfg.A)
{
    if (A_.det() != 1)
        throw std::invalid_argument("matrix must have determinant 1");
    if (std::llabs(A_.trace()) <= 2)
        throw std::invalid_argument("matrix must be hyperbolic (|trace| > 2)");
    Ainv_ = A_.inverse();
    Ad_ << (double)A_.m00, (double)A_.m01, (double)A_.m10, (double)A_.m11;
    double tr = (double)A_.trace();
    double disc = std::sqrt(tr * tr - 4.0);
    lambda_ = (std::fabs(tr) + disc) / 2.0;
    double lu = tr > 0 ? lambda_ : -lambda_;
    double ls = 1.0 / lu;
    // eigenvectors of [[a,b],[c,d]] for eigenvalue l: (b, l-a) or (l-d, c)
    auto eig = [&](double l) {
        Eigen::Vector2d v;
        if (A_.m01 != 0)
            v << (double)A_.m01, l - (double)A_.m00;
        else
            v << l - (double)A_.m11, (double)A_.m10;
        v.normalize();
        if (v(0) < 0 || (v(0) == 0 && v(1) < 0))
            v = -v;
        return v;
    };
    nu_ = eig(lu);
    ns_ = eig(ls);
    if (ns_.dot(nu_) < -1e-12)
        ns_ = -ns_;
    switch (cfg_.roof) {
    case RoofKind::Const:
        rmin_ = rmax_ = 1.0;
        break;
    case RoofKind::Cos:
        if (!(cfg_.delta >= 0 && cfg_.delta < 1))
            throw std::invalid_argument("cos roof needs 0 <= delta < 1");
        rmin_ = 1.0 - cfg_.delta;
        rmax_ = 1.0 + cfg_.delta;
        break;
    case RoofKind::Stretch:
        if (!(cfg_.delta >= 0))
            throw std::invalid_argument("stretch roof needs delta >= 0");
        rmin_ = 1.0;
        rmax_ = 1.0 + cfg_.delta;
        break;
    }
}

double ModelFlow::roof_at(double u1, double u2) const
{
    switch (cfg_.roof) {
    case RoofKind::Const:
        return 1.0;
    case RoofKind::Cos:
        return 1.0 + cfg_.delta * std::cos(2.0 * M_PI * u1);
    case RoofKind::Stretch: {
        // slowdown bump: the orbit lingers longer above a neighbourhood of one point
        double d1 = wrap_half(u1 - cfg_.stretch_u1), d2 = wrap_half(u2 - cfg_.stretch_u2);
        double w = cfg_.stretch_width;
        return 1.0 + cfg_.delta * std::exp(-(d1 * d1 + d2 * d2) / (w * w));
    }
    }
    return 1.0;
}

static f128 wrap_half_q(f128 d)
{
    d -= floorq(d + 0.5Q);
    return d;
}

f128 ModelFlow::roof_q(const Torus2& u) const
{
    f128 u1 = u.a.unit_q(), u2 = u.b.unit_q();
    switch (cfg_.roof) {
    case RoofKind::Const:
        return 1;
    case RoofKind::Cos:
        return 1 + (f128)cfg_.delta * cosq(2 * M_PIq * u1);
    case RoofKind::Stretch: {
        f128 d1 = wrap_half_q(u1 - cfg_.stretch_u1), d2 = wrap_half_q(u2 - cfg_.stretch_u2);
        f128 w = cfg_.stretch_width;
        return 1 + (f128)cfg_.delta * expq(-(d1 * d1 + d2 * d2) / (w * w));
    }
    }
    return 1;
}

Eigen::Vector2d ModelFlow::roof_grad(const Torus2& u) const
{
    double u1 = u.a.unit(), u2 = u.b.unit();
    switch (cfg_.roof) {
    case RoofKind::Const:
        return Eigen::Vector2d::Zero();
    case RoofKind::Cos:
        return Eigen::Vector2d(-2.0 * M_PI * cfg_.delta * std::sin(2.0 * M_PI * u1), 0.0);
    case RoofKind::Stretch: {
        double d1 = wrap_half(u1 - cfg_.stretch_u1), d2 = wrap_half(u2 - cfg_.stretch_u2);
        double w2 = cfg_.stretch_width * cfg_.stretch_width;
        double e = cfg_.delta * std::exp(-(d1 * d1 + d2 * d2) / w2);
        return Eigen::Vector2d(-2.0 * d1 / w2 * e, -2.0 * d2 / w2 * e);
    }
    }
    return Eigen::Vector2d::Zero();
}

PointM ModelFlow::normalize(PointM x) const
{
    double r = roof(x.u);
    while (x.h >= r) {
        x.h -= r;
        x.u = apply(A_, x.u);
        r = roof(x.u);
    }
    while (x.h < 0) {
        x.u = apply(Ainv_, x.u);
        x.h += roof(x.u);
    }
    return x;
}

Torus2 random_torus(std::mt19937_64& rng)
{
    Torus2 u;
    for (auto& w : u.a.w)
        w = rng();
    for (auto& w : u.b.w)
        w = rng();
    return u;
}

PointM ModelFlow::random_point(std::mt19937_64& rng) const
{
    PointM x;
    x.u = random_torus(rng);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    x.h = U(rng) * roof(x.u);
    return x;
}

long crossings(const ModelFlow& m, const PointM& x, double t)
{
    long k = 0;
    PointM y = x;
    double s = y.h + t;
    if (t >= 0) {
        double r = m.roof(y.u);
        while (s >= r) {
            s -= r;
            y.u = apply(m.A(), y.u);
            r = m.roof(y.u);
            ++k;
        }
    } else {
        while (s < 0) {
            y.u = apply(m.Ainv(), y.u);
            s += m.roof(y.u);
            --k;
        }
    }
    return k;
}

PointM flow(const ModelFlow& m, const PointM& x, double t)
{
    PointM y = x;
    y.h += t;
    return m.normalize(y);
}

Eigen::Matrix2d matrix_power(const ModelFlow& m, long k)
{
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d B = k >= 0 ? m.Ad() : m.Ad().inverse();
    for (long i = 0; i < std::labs(k); ++i)
        P = B * P;
    return P;
}

Eigen::Matrix3d dflow(const ModelFlow& m, const PointM& x, double t)
{
    Eigen::Matrix2d F = Eigen::Matrix2d::Identity();
    Eigen::RowVector2d dh = Eigen::RowVector2d::Zero();
    PointM y = x;
    double s = y.h + t;
    if (t >= 0) {
        double r = m.roof(y.u);
        while (s >= r) {
            dh -= m.roof_grad(y.u).transpose() * F;
            s -= r;
            y.u = apply(m.A(), y.u);
            F = m.Ad() * F;
            r = m.roof(y.u);
        }
    } else {
        Eigen::Matrix2d Ai = m.Ad().inverse();
        while (s < 0) {
            y.u = apply(m.Ainv(), y.u);
            F = Ai * F;
            dh += m.roof_grad(y.u).transpose() * F;
            s += m.roof(y.u);
        }
    }
    Eigen::Matrix3d D = Eigen::Matrix3d::Zero();
    D.topLeftCorner<2, 2>() = F;
    D.block<1, 2>(2, 0) = dh;
    D(2, 2) = 1.0;
    return D;
}

Eigen::Vector3d one_form_project(const ModelFlow&, const PointM&, const Eigen::Vector3d& v)
{
    // theta = dh, so theta(X) = 1 and Ker theta is the fibre plane
    Eigen::Vector3d w = v;
    w(2) = 0.0;
    return w;
}

Eigen::Matrix2d induced_phi(const ModelFlow& m, const PointM& x, double t)
{
    return dflow(m, x, t).topLeftCorner<2, 2>();
}

Splitting splitting_directions(const ModelFlow& m, const PointM&)
{
    Splitting sp;
    Eigen::Vector2d u(1.0, 0.3), s(1.0, -0.3);
    Eigen::Matrix2d Ai = m.Ad().inverse();
    for (int it = 1; it <= 200; ++it) {
        Eigen::Vector2d u2 = (m.Ad() * u).normalized();
        Eigen::Vector2d s2 = (Ai * s).normalized();
        if (u2(0) < 0)
            u2 = -u2;
        if (s2(0) < 0)
            s2 = -s2;
        double du = (u2 - u).norm(), ds = (s2 - s).norm();
        u = u2;
        s = s2;
        sp.iterations = it;
        if (du < 1e-14 && ds < 1e-14) {
            sp.converged = true;
            break;
        }
    }
    if (s.dot(u) < 0)
        s = -s;
    sp.ns = s;
    sp.nu = u;
    return sp;
}

std::string format_point(const PointM& x)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "(%.17g, %.17g, %.17g)", x.u.a.unit(), x.u.b.unit(), x.h);
    return buf;
}

double angle_between(const Eigen::Vector2d& a, const Eigen::Vector2d& b)
{
    double c = a.dot(b) / (a.norm() * b.norm());
    c = std::max(-1.0, std::min(1.0, c));
    return std::acos(c);
}

} // namespace hyp
