#include "doctest.h"

#include <cmath>
#include <random>

#include "hypcode/model.hpp"

using namespace hyp;

namespace {

ModelFlow make(RoofKind k)
{
    ModelConfig c;
    c.roof = k;
    return ModelFlow(c);
}

double mat_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

} // namespace

TEST_CASE("fixed point arithmetic")
{
    Fix h = Fix::from_ratio(1, 2);
    CHECK(h.unit() == 0.5);
    CHECK((h + h).is_zero());
    Fix t = Fix::from_ratio(1, 3);
    CHECK((t.mul(3)).is_zero() == false); // 3 * floor(2^1024/3) is one ulp short
    CHECK((t + t + t + Fix::from_double(std::ldexp(1.0, -1024))).is_zero());
    CHECK(Fix::from_double(-0.25).unit() == 0.75);
    CHECK(Fix::from_double(1.75).unit() == 0.75);
    CHECK(Fix::from_double(-0.25).signed_val() == -0.25);
    CHECK(Fix::from_double(1e-200).signed_val() == doctest::Approx(1e-200));

    std::mt19937_64 rng(11);
    Mat2i A{2, 1, 1, 1};
    for (int i = 0; i < 100; ++i) {
        Torus2 u = random_torus(rng);
        CHECK(apply(A.inverse(), apply(A, u)) == u);
        CHECK(apply(A * A, u) == apply(A, apply(A, u)));
        Fix a = random_torus(rng).a, b = random_torus(rng).a;
        CHECK((a + b) - b == a);
        CHECK(a.mul(5) == a + a + a + a + a);
        CHECK(a.mul(-2) == -(a + a));
    }
}

TEST_CASE("model basics")
{
    auto m = make(RoofKind::Const);
    CHECK(m.lambda() == doctest::Approx((3 + std::sqrt(5.0)) / 2));
    CHECK(m.log_lambda() < 1.0);

    ModelConfig bad;
    bad.A = {1, 1, 0, 1};
    CHECK_THROWS(ModelFlow(bad));
    bad.A = {2, 1, 1, 2};
    CHECK_THROWS(ModelFlow(bad));
}

TEST_CASE("flow examples and group law")
{
    std::mt19937_64 rng(12);
    auto m = make(RoofKind::Const);
    PointM x{random_torus(rng), 0.0};
    auto y = flow(m, x, 0.0);
    CHECK(y.u == x.u);
    CHECK(y.h == 0.0);
    y = flow(m, x, 1.0);
    CHECK(y.u == apply(m.A(), x.u));
    CHECK(y.h == 0.0);
    y = flow(m, PointM{x.u, 0.3}, 2.5);
    CHECK(y.u == apply(m.A() * m.A(), x.u));
    CHECK(y.h == doctest::Approx(0.8));

    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto mm = make(kind);
        std::uniform_real_distribution<double> T(-3, 3);
        for (int i = 0; i < 200; ++i) {
            auto p = mm.random_point(rng);
            double a = T(rng), b = T(rng);
            auto l = flow(mm, flow(mm, p, a), b);
            auto r = flow(mm, p, a + b);
            // crossing decided on either side of a roof at rounding level
            if (l.u == r.u)
                CHECK(std::fabs(l.h - r.h) < 1e-12);
            else
                CHECK(std::min(std::fabs(l.h), std::fabs(r.h)) < 1e-12);
        }
    }
}

TEST_CASE("dflow")
{
    std::mt19937_64 rng(13);
    auto m = make(RoofKind::Const);
    PointM x{random_torus(rng), 0.0};
    CHECK(mat_err(dflow(m, x, 0.0), Eigen::Matrix3d::Identity()) == 0.0);
    auto D = dflow(m, x, 1.0);
    CHECK(mat_err(D.topLeftCorner<2, 2>(), m.Ad()) == 0.0);
    CHECK(D.topLeftCorner<2, 2>().determinant() == doctest::Approx(1.0));

    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto mm = make(kind);
        std::uniform_real_distribution<double> T(-2.5, 2.5);
        for (int i = 0; i < 200; ++i) {
            auto p = mm.random_point(rng);
            double a = T(rng), b = T(rng);
            Eigen::Matrix3d lhs = dflow(mm, p, a + b);
            Eigen::Matrix3d rhs = dflow(mm, flow(mm, p, a), b) * dflow(mm, p, a);
            CHECK(mat_err(lhs, rhs) < 1e-10);
        }
    }
}

TEST_CASE("dflow against finite differences on the cos roof")
{
    // the flow-time row: d(height)/du measured by moving the fibre point
    std::mt19937_64 rng(14);
    auto m = make(RoofKind::Cos);
    for (int i = 0; i < 20; ++i) {
        auto p = m.random_point(rng);
        double t = 2.3;
        auto D = dflow(m, p, t);
        auto base = flow(m, p, t);
        double h = 1e-7;
        for (int j = 0; j < 2; ++j) {
            PointM q = p;
            q.u = add_offset(p.u, j == 0 ? h : 0, j == 1 ? h : 0);
            auto img = flow(m, q, t);
            if (crossings(m, q, t) != crossings(m, p, t))
                continue;
            double d1, d2;
            torus_diff(img.u, base.u, d1, d2);
            CHECK(d1 / h == doctest::Approx(D(0, j)).epsilon(1e-5));
            CHECK(d2 / h == doctest::Approx(D(1, j)).epsilon(1e-5));
            CHECK((img.h - base.h) / h == doctest::Approx(D(2, j)).epsilon(1e-4));
        }
    }
}

TEST_CASE("one form projection")
{
    std::mt19937_64 rng(15);
    auto m = make(RoofKind::Cos);
    auto x = m.random_point(rng);
    Eigen::Vector3d X(0, 0, 1), w(0.3, -0.7, 0);
    CHECK(one_form_project(m, x, X).norm() == 0.0);
    CHECK(one_form_project(m, x, w) == w);
    CHECK(one_form_project(m, x, X * 2.5 + w) == w);
    Eigen::Vector3d v(0.1, 0.2, 0.3);
    auto p = one_form_project(m, x, v);
    CHECK(one_form_project(m, x, p) == p);
}

TEST_CASE("induced linear Poincare flow")
{
    std::mt19937_64 rng(16);
    auto m = make(RoofKind::Const);
    PointM x{random_torus(rng), 0.0};
    CHECK(mat_err(induced_phi(m, x, 0.0), Eigen::Matrix2d::Identity()) == 0.0);
    CHECK(mat_err(induced_phi(m, x, 1.0), m.Ad()) == 0.0);
    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto mm = make(kind);
        for (int i = 0; i < 100; ++i) {
            auto p = mm.random_point(rng);
            Eigen::Matrix2d lhs = induced_phi(mm, p, 1.3);
            Eigen::Matrix2d rhs = induced_phi(mm, flow(mm, p, 0.5), 0.8) * induced_phi(mm, p, 0.5);
            CHECK(mat_err(lhs, rhs) < 1e-10);
        }
    }
    // norm bound for short intervals that stay below the roof
    const double rho = m.config().rho;
    for (int i = 0; i < 100; ++i) {
        auto p = m.random_point(rng);
        double t = std::uniform_real_distribution<double>(0, 2 * rho)(rng);
        if (crossings(m, p, t) != 0)
            continue;
        CHECK(induced_phi(m, p, t).norm() <= std::exp(4 * rho) * std::sqrt(2.0));
    }
}

TEST_CASE("splitting directions")
{
    auto m = make(RoofKind::Const);
    std::mt19937_64 rng(17);
    auto x = m.random_point(rng);
    auto sp = splitting_directions(m, x);
    CHECK(sp.converged);
    Eigen::Vector2d nu(1.0, (std::sqrt(5.0) - 1) / 2), ns(1.0, -(std::sqrt(5.0) + 1) / 2);
    nu.normalize();
    ns.normalize();
    CHECK((sp.nu - nu).norm() < 1e-12);
    CHECK((sp.ns - ns).norm() < 1e-12);
    CHECK((m.nu() - nu).norm() < 1e-15);
    CHECK((m.ns() - ns).norm() < 1e-15);
    double ang = angle_between(sp.ns, sp.nu);
    CHECK(ang > 0);
    CHECK(ang <= M_PI / 2 + 1e-15);

    // invariance of the splitting under the induced flow
    auto mc = make(RoofKind::Cos);
    for (int i = 0; i < 50; ++i) {
        auto p = mc.random_point(rng);
        double t = std::uniform_real_distribution<double>(0, 3)(rng);
        Eigen::Vector2d a = induced_phi(mc, p, t) * mc.nu();
        Eigen::Vector2d b = induced_phi(mc, p, t) * mc.ns();
        double au = angle_between(a, mc.nu()), as = angle_between(b, mc.ns());
        CHECK(std::min(au, M_PI - au) < 1e-9);
        CHECK(std::min(as, M_PI - as) < 1e-9);
    }
}

TEST_CASE("point format")
{
    PointM x{Torus2{Fix::from_double(0.25), Fix::from_double(0.5)}, 0.125};
    CHECK(format_point(x) == "(0.25, 0.5, 0.125)");
}
