#include "doctest.h"

#include <cmath>
#include <random>

#include "hypcode/nuh.hpp"

using namespace hyp;

namespace {

ModelFlow make(RoofKind k)
{
    ModelConfig c;
    c.roof = k;
    return ModelFlow(c);
}

// constant roof: integral of e^{2 chi t} lambda^{-2k(t)} from height h
double const_roof_integral(double chi, double lambda, double tau)
{
    double W1 = (std::exp(2 * chi) - 1) / (2 * chi);
    double tail = W1 / (1 - std::exp(2 * chi) / (lambda * lambda));
    return (std::exp(2 * chi * tau) - 1) / (2 * chi) + std::exp(2 * chi * tau) / (lambda * lambda) * tail;
}

// brute force: Simpson on each smooth piece of e^{2 chi t} |Phi^t n|^2, pieces cut at the roof crossings
double brute_integral(const ModelFlow& m, const PointM& x0, const Eigen::Vector2d& n, double chi, int dir)
{
    const double T = 18; // longer windows lose A^k n to rounding
    PointM x = m.normalize(x0);
    std::vector<double> cuts{0};
    double t = dir > 0 ? m.roof(x.u) - x.h : x.h;
    Torus2 v = x.u;
    while (t < T) {
        cuts.push_back(t);
        v = dir > 0 ? apply(m.A(), v) : apply(m.Ainv(), v);
        t += m.roof(v);
    }
    cuts.push_back(T);
    double sum = 0;
    const int N = 64;
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        double a = cuts[i] + 1e-12, b = cuts[i + 1] - 1e-12, h = (b - a) / N;
        auto f = [&](double s) {
            Eigen::Vector2d w = induced_phi(m, x, dir * s) * n;
            return std::exp(2 * chi * s) * w.squaredNorm();
        };
        double acc = f(a) + f(b);
        for (int k = 1; k < N; ++k)
            acc += (k % 2 ? 4 : 2) * f(a + k * h);
        sum += acc * h / 3;
    }
    return sum;
}

} // namespace

TEST_CASE("panel quadrature")
{
    for (double c : {0.5, 1.0, 2.0})
        for (double len : {0.01, 0.3, 1.0, 1.1, 7.3})
            CHECK(exp_integral(c, len) == doctest::Approx((std::exp(c * len) - 1) / c).epsilon(1e-14));
    CHECK(exp_integral(1.0, 0.0) == 0.0);
}

TEST_CASE("s and u against the geometric series")
{
    auto m = make(RoofKind::Const);
    Nuh nuh(m);
    const double chi = m.config().chi, rho = m.config().rho, lam = m.lambda();
    std::mt19937_64 rng(31);
    // height zero: the series in its plain form
    Torus2 u0 = random_torus(rng);
    auto su0 = nuh.su_at(u0, 0.0);
    double series = (std::exp(2 * chi) - 1) / (2 * chi) / (1 - std::exp(2 * chi) / (lam * lam));
    CHECK(su0.s == doctest::Approx(2 * std::exp(2 * rho) * std::sqrt(series)).epsilon(1e-12));
    CHECK(su0.rel_err < 1e-8);
    for (int i = 0; i < 500; ++i) {
        PointM x = m.random_point(rng);
        auto su = nuh.compute_su(x);
        double s = 2 * std::exp(2 * rho) * std::sqrt(const_roof_integral(chi, lam, 1 - x.h));
        double u = 2 * std::exp(2 * rho) * std::sqrt(const_roof_integral(chi, lam, x.h));
        CHECK(su.s == doctest::Approx(s).epsilon(1e-10));
        CHECK(su.u == doctest::Approx(u).epsilon(1e-10));
        CHECK(su.s >= std::sqrt(2.0));
        CHECK(su.u >= std::sqrt(2.0));
    }
}

TEST_CASE("s and u on the cos roof against direct integration")
{
    auto m = make(RoofKind::Cos);
    Nuh nuh(m);
    std::mt19937_64 rng(32);
    for (int i = 0; i < 3; ++i) {
        PointM x = m.random_point(rng);
        auto su = nuh.compute_su(x);
        double c = 4 * std::exp(4 * m.config().rho);
        double bs = c * brute_integral(m, x, m.ns(), m.config().chi, +1);
        double bu = c * brute_integral(m, x, m.nu(), m.config().chi, -1);
        CHECK(su.s * su.s == doctest::Approx(bs).epsilon(1e-6));
        CHECK(su.u * su.u == doctest::Approx(bu).epsilon(1e-6));
    }
    for (int i = 0; i < 500; ++i) {
        auto su = nuh.compute_su(m.random_point(rng));
        CHECK(su.s >= std::sqrt(2.0));
        CHECK(su.u >= std::sqrt(2.0));
    }
}

TEST_CASE("divergent integral")
{
    auto m = make(RoofKind::Const);
    CHECK_THROWS_AS(Nuh(m, m.log_lambda() + 0.1), DivergentIntegral);
}

TEST_CASE("chart matrix")
{
    auto m = make(RoofKind::Cos);
    Nuh nuh(m);
    std::mt19937_64 rng(33);
    for (int i = 0; i < 100; ++i) {
        auto p = nuh.params(m.random_point(rng));
        CHECK(p.C.norm() <= 1.0);
        CHECK(p.C.operator()(0, 0) == doctest::Approx(m.ns()(0) / p.s));
        CHECK(p.C.inverse().norm() == doctest::Approx(p.C_inv_frob).epsilon(1e-12));
        CHECK(p.Q <= std::pow(m.config().eps, 3.0));
        CHECK(p.Q >= nuh.Q_lower());
        CHECK(p.Q <= nuh.Q_upper());
        CHECK(p.alpha > 0);
        CHECK(p.alpha <= M_PI / 2 + 1e-15);
    }
}

TEST_CASE("reduced cocycle")
{
    const double rho = 0.2;
    std::mt19937_64 rng(34);
    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto m = make(kind);
        Nuh nuh(m);
        const double chi = m.config().chi;
        auto AB0 = nuh.reduce(m.random_point(rng), 0.0);
        CHECK(AB0(0) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(AB0(1) == doctest::Approx(1.0).epsilon(1e-14));
        std::uniform_real_distribution<double> T(1e-3, 2 * rho);
        for (int i = 0; i < 200; ++i) {
            PointM x = m.random_point(rng);
            double t = T(rng);
            double off;
            auto AB = nuh.reduce(x, t, &off);
            CHECK(off <= 1e-8);
            CHECK(std::fabs(AB(0)) > std::exp(-4 * rho));
            CHECK(std::fabs(AB(0)) < std::exp(-chi * t));
            CHECK(std::fabs(AB(1)) > std::exp(chi * t));
            CHECK(std::fabs(AB(1)) < std::exp(4 * rho));
            CHECK(AB(0) * AB(1) > 0);
            // closed form: flat metric, so Phi^t n^s = A^k n^s
            long k = crossings(m, x, t);
            PointM y = flow(m, x, t);
            auto sx = nuh.compute_su(x), sy = nuh.compute_su(y);
            double lk = std::pow(m.lambda(), (double)k);
            CHECK(AB(0) == doctest::Approx(sy.s / (lk * sx.s)).epsilon(1e-9));
            CHECK(AB(1) == doctest::Approx(lk * sy.u / sx.u).epsilon(1e-9));
            // ratios under short flow times
            double ts = std::uniform_real_distribution<double>(-2 * rho, 2 * rho)(rng);
            auto sz = nuh.compute_su(flow(m, x, ts));
            CHECK(std::fabs(std::log(sz.s / sx.s)) <= 10 * rho);
            CHECK(std::fabs(std::log(sz.u / sx.u)) <= 10 * rho);
            auto pz = nuh.params(flow(m, x, ts)), px = nuh.params(x);
            CHECK(std::fabs(std::log(std::sin(pz.alpha) / std::sin(px.alpha))) <= 8 * rho);
            CHECK(std::fabs(std::log(pz.Q / px.Q)) <= 250 * rho);
        }
    }
}

TEST_CASE("q: certified infimum against a dense grid")
{
    std::mt19937_64 rng(35);
    auto m = make(RoofKind::Cos);
    Nuh nuh(m);
    const double eps = m.config().eps, H = nuh.default_horizon();
    for (int i = 0; i < 2; ++i) {
        PointM x = m.random_point(rng);
        auto lq = nuh.compute_q(x, H);
        const double step = i == 0 ? 0.03 : 0.11;
        CHECK(lq.q == std::min(lq.qs, lq.qu));
        CHECK(lq.q <= eps * nuh.params(x).Q);
        // grid over twice the horizon
        double gs = 1e300, gu = 1e300;
        for (double t = 0; t <= 2 * H; t += step) {
            gs = std::min(gs, std::exp(eps * t) * nuh.params(flow(m, x, t)).Q);
            gu = std::min(gu, std::exp(eps * t) * nuh.params(flow(m, x, -t)).Q);
        }
        // also the exact minimiser, approached from both sides
        for (double d : {-1e-12, 1e-12}) {
            gs = std::min(gs, std::exp(eps * (lq.t_s + d)) * nuh.params(flow(m, x, lq.t_s + d)).Q);
            gu = std::min(gu, std::exp(eps * (std::fabs(lq.t_u + d))) * nuh.params(flow(m, x, lq.t_u + d)).Q);
        }
        CHECK(eps * gs == doctest::Approx(lq.qs).epsilon(1e-9));
        CHECK(eps * gu == doctest::Approx(lq.qu).epsilon(1e-9));
    }
    CHECK_THROWS_AS(nuh.compute_q(m.random_point(rng), 1.0), HorizonTooShort);
}

TEST_CASE("q is tempered along the flow")
{
    std::mt19937_64 rng(36);
    auto m = make(RoofKind::Const);
    Nuh nuh(m);
    const double eps = m.config().eps, H = nuh.default_horizon();
    for (int i = 0; i < 20; ++i) {
        PointM x = m.random_point(rng);
        double t = std::uniform_real_distribution<double>(-3, 3)(rng);
        double a = nuh.compute_q(x, H).q, b = nuh.compute_q(flow(m, x, t), H).q;
        CHECK(std::fabs(std::log(b / a)) <= eps * std::fabs(t) * (1 + 1e-9) + 1e-12);
    }
}

TEST_CASE("z-indexed p: recursion, brute force and certificates")
{
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> U(0, 1);
    const double eps = 0.02;
    for (int trial = 0; trial < 6; ++trial) {
        int n = 200;
        std::vector<double> steps(n - 1), Q(n);
        for (auto& s : steps)
            s = 0.15 + 0.04 * U(rng);
        for (auto& q : Q)
            q = 1e-12 * (1 + 3 * U(rng));
        auto z = z_indexed_p(steps, Q, eps, 1e-12, 0.07, 0.4);
        std::vector<f128> lq(n);
        for (int i = 0; i < n; ++i)
            lq[i] = logq((f128)eps * (f128)Q[i]);
        for (int i = 0; i < n; ++i) {
            // definition: eps inf e^{eps(t_m - t_i)} Q_m over the window
            f128 bs = 1e4000Q, bu = 1e4000Q;
            for (int mm = i; mm < n; ++mm)
                bs = fminq(bs, lq[mm] + (f128)eps * (z.T[mm] - z.T[i]));
            for (int mm = 0; mm <= i; ++mm)
                bu = fminq(bu, lq[mm] + (f128)eps * (z.T[i] - z.T[mm]));
            CHECK(bs == z.log_ps[i]);
            CHECK(bu == z.log_pu[i]);
            CHECK(z.ps[i] <= eps * Q[i]);
            if (i + 1 < n) {
                f128 rec = fminq(logq((f128)eps * (f128)Q[i]), (f128)eps * (f128)steps[i] + z.log_ps[i + 1]);
                CHECK((double)fabsq(rec - z.log_ps[i]) < 1e-28);
            }
        }
        CHECK(z.s_certified_end > n / 2);
        CHECK(z.u_certified_begin < n / 2);
    }
    // constant Q: every index is maximal
    std::vector<double> steps(50, 0.2), Q(51, 3e-13);
    auto z = z_indexed_p(steps, Q, eps, 3e-13, 0.07, 0.4);
    for (int i = 0; i < 51; ++i) {
        CHECK(z.ps[i] == doctest::Approx(eps * 3e-13).epsilon(1e-15));
        CHECK(z.arg_s[i] == i);
    }
    std::vector<double> bad(50, 0.01);
    CHECK_THROWS_AS(z_indexed_p(bad, Q, eps, 3e-13, 0.07, 0.4), SpacingViolation);
}
