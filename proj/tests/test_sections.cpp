#include "doctest.h"

#include <cmath>
#include <random>

#include "hypcode/sections.hpp"

using namespace hyp;

namespace {

ModelFlow make(RoofKind k)
{
    ModelConfig c;
    c.roof = k;
    return ModelFlow(c);
}

Torus2 random_in(const Disc& d, std::mt19937_64& rng, double shrink = 1.0)
{
    std::uniform_real_distribution<double> U(-1, 1);
    return Torus2{Fix::from_double(d.c1 + shrink * d.a1 * U(rng)), Fix::from_double(d.c2 + shrink * d.a2 * U(rng))};
}

// first hit by marching the flow in small steps
double march_first_hit(const Sections& S, const PointM& x, double tmax, double dt)
{
    const auto& m = S.model();
    for (double t = 0; t <= tmax; t += dt) {
        PointM y = flow(m, x, t);
        int T = S.tile_of(y.u);
        for (double h : S.levels(T))
            if (h >= y.h && h < y.h + dt)
                return t + (h - y.h);
    }
    return -1;
}

} // namespace

TEST_CASE("constant roof layout")
{
    auto m = make(RoofKind::Const);
    Sections S(m, default_sections(RoofKind::Const), m.config().rho);
    CHECK(S.discs().size() == 216);
    const double s = S.config().color_step;
    for (const auto& d : S.discs())
        CHECK(d.height == doctest::Approx(1.0 / 12 + d.level / 6.0 + S.color(d.tile) * s).epsilon(1e-14));
    CHECK(S.min_return_bound() >= std::sqrt(m.config().eps));
    CHECK(S.max_return_bound() < m.config().rho);
    CHECK(S.min_return_bound() == doctest::Approx(1.0 / 6 - 3 * s));
    CHECK(S.max_return_bound() == doctest::Approx(1.0 / 6 + 3 * s));
    for (const auto& d : S.hat_discs())
        CHECK(d.radius() < 2 * m.config().rho);
}

TEST_CASE("return times stay inside [sqrt(eps), rho)")
{
    std::mt19937_64 rng(21);
    for (auto kind : {RoofKind::Const, RoofKind::Cos, RoofKind::Stretch}) {
        auto m = make(kind);
        Sections S(m, default_sections(kind), m.config().rho);
        CHECK(S.min_return_bound() >= std::sqrt(m.config().eps));
        CHECK(S.max_return_bound() < m.config().rho);
        for (int i = 0; i < 3000; ++i) {
            Torus2 u = random_torus(rng);
            int T = S.tile_of(u);
            int lv = std::uniform_int_distribution<int>(0, (int)S.levels(T).size() - 1)(rng);
            Hit h = S.hit_of(u, lv);
            double t;
            Hit n = S.next(h, &t);
            CHECK(t >= S.min_return_bound());
            CHECK(t <= S.max_return_bound());
            // the flow really lands on the next hit
            PointM y = flow(m, S.point(h), t);
            CHECK(y.u == n.u);
            CHECK(std::fabs(y.h - S.height(n)) < 1e-12);
            double tb;
            Hit b = S.prev(n, &tb);
            CHECK(b.u == h.u);
            CHECK(b.level == h.level);
            CHECK(tb == doctest::Approx(t).epsilon(1e-13));
        }
    }
}

TEST_CASE("first hit against marching")
{
    std::mt19937_64 rng(22);
    auto m = make(RoofKind::Cos);
    Sections S(m, default_sections(RoofKind::Cos), m.config().rho);
    for (int i = 0; i < 100; ++i) {
        PointM x = m.random_point(rng);
        double t;
        S.first_hit(x, &t);
        double tm = march_first_hit(S, x, 0.5, 1e-4);
        CHECK(tm >= 0);
        CHECK(std::fabs(tm - t) < 2e-4);
    }
}

TEST_CASE("cover check and the missing level fixture")
{
    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto m = make(kind);
        Sections S(m, default_sections(kind), m.config().rho);
        auto rep = S.check_cover(25, 16);
        CHECK(rep.samples == 10000);
        CHECK(rep.max_time < m.config().rho);
    }
    auto m = make(RoofKind::Const);
    auto cfg = default_sections(RoofKind::Const);
    cfg.drop_level = 2;
    Sections S(m, cfg, m.config().rho);
    bool thrown = false;
    try {
        S.check_cover(25, 16);
    } catch (const CoverageFailure& e) {
        thrown = true;
        CHECK(e.time >= m.config().rho);
        // the witness really is far from the section in flow time
        double t;
        S.first_hit(e.witness, &t);
        double tm = march_first_hit(S, e.witness, 1.0, 1e-4);
        CHECK(std::fabs(tm - t) < 2e-4);
    }
    CHECK(thrown);
}

TEST_CASE("partial order on the security section")
{
    std::mt19937_64 rng(23);
    for (auto kind : {RoofKind::Const, RoofKind::Cos}) {
        auto m = make(kind);
        const double rho = m.config().rho;
        Sections S(m, default_sections(kind), rho);
        auto rep = S.check_partial_order();
        CHECK(rep.ok);
        CHECK(rep.overlapping > 0);
        CHECK(rep.min_separation > 1e-4);

        // sampled oracle: no pair of discs reaches each other in both directions within 2 rho
        const auto& H = S.hat_discs();
        const double w = 2 * rho;
        int two_way = 0, tried = 0;
        for (int trial = 0; trial < 400; ++trial) {
            const Disc& a = H[std::uniform_int_distribution<size_t>(0, H.size() - 1)(rng)];
            // pick a neighbour that overlaps in the fibre
            std::vector<const Disc*> nb;
            for (const auto& b : H)
                if (b.id != a.id && S.in_box(b, Torus2{Fix::from_double(a.c1), Fix::from_double(a.c2)}, a.a1 + a.a2))
                    nb.push_back(&b);
            if (nb.empty())
                continue;
            const Disc& b = *nb[std::uniform_int_distribution<size_t>(0, nb.size() - 1)(rng)];
            auto reach = [&](const Disc& from, const Disc& to) {
                for (int k = 0; k < 30; ++k) {
                    Torus2 u = random_in(from, rng);
                    try {
                        double t = S.project_t(to, PointM{u, from.height}, w);
                        if (t >= 0 && t <= w)
                            return true;
                    } catch (const OutOfBox&) {
                    }
                }
                return false;
            };
            ++tried;
            if (reach(a, b) && reach(b, a))
                ++two_way;
        }
        CHECK(tried > 100);
        CHECK(two_way == 0);
    }
}

TEST_CASE("flow box projection")
{
    std::mt19937_64 rng(24);
    auto m = make(RoofKind::Cos);
    const double rho = m.config().rho;
    Sections S(m, default_sections(RoofKind::Cos), rho);
    int found = 0;
    for (int i = 0; i < 500; ++i) {
        PointM x = m.random_point(rng);
        double t0;
        Hit h = S.first_hit(x, &t0);
        const Disc& d = S.hat_discs()[S.disc_of(h).id];
        double t = S.project_t(d, x, 4 * rho);
        CHECK(std::fabs(t - t0) < 1e-12);
        PointM y = S.project_q(d, x, 4 * rho);
        CHECK(std::fabs(y.h - d.height) < 1e-12);
        CHECK(S.in_box(d, y.u));
        ++found;
    }
    CHECK(found == 500);
    // far away points are rejected
    const Disc& d = S.hat_discs()[0];
    PointM far{Torus2{Fix::from_double(d.c1 + 0.5), Fix::from_double(d.c2 + 0.5)}, d.height};
    bool out = false;
    try {
        S.project_t(d, far, 4 * rho);
    } catch (const OutOfBox&) {
        out = true;
    }
    CHECK(out);
}

TEST_CASE("projection regularity")
{
    std::mt19937_64 rng(25);
    auto m = make(RoofKind::Cos);
    const double rho = m.config().rho;
    Sections S(m, default_sections(RoofKind::Cos), rho);
    const auto& H = S.hat_discs();
    double worst_t = 0, worst_q = 0;
    int pairs = 0;
    for (int i = 0; i < 2000; ++i) {
        const Disc& a = H[std::uniform_int_distribution<size_t>(0, H.size() - 1)(rng)];
        Disc inner = a;
        inner.a1 *= 0.5;
        inner.a2 *= 0.5;
        Torus2 u = random_in(inner, rng), v = add_offset(u, 1e-5, -7e-6);
        // target: the disc hit next from u, as a security disc
        Hit h = S.first_hit(PointM{u, a.height + 1e-9});
        const Disc& b = H[S.disc_of(h).id];
        double tu, tv;
        try {
            tu = S.project_t(b, PointM{u, a.height}, 4 * rho);
            tv = S.project_t(b, PointM{v, a.height}, 4 * rho);
        } catch (const OutOfBox&) {
            continue;
        }
        PointM qu = S.project_q(b, PointM{u, a.height}, 4 * rho), qv = S.project_q(b, PointM{v, a.height}, 4 * rho);
        double d0 = torus_dist(u, v);
        worst_t = std::max(worst_t, std::fabs(tu - tv) / d0);
        if (crossings(m, PointM{u, a.height}, tu) == 0)
            worst_q = std::max(worst_q, torus_dist(qu.u, qv.u) / d0);
        ++pairs;
    }
    CHECK(pairs > 1000);
    CHECK(worst_t <= 1.0);
    CHECK(worst_q <= 2.0);
}

TEST_CASE("holonomy maps")
{
    std::mt19937_64 rng(26);
    auto m = make(RoofKind::Cos);
    Sections S(m, default_sections(RoofKind::Cos), m.config().rho);
    int differs = 0;
    for (int i = 0; i < 500; ++i) {
        Torus2 u = random_torus(rng);
        int T = S.tile_of(u);
        int lv = std::uniform_int_distribution<int>(0, (int)S.levels(T).size() - 1)(rng);
        Hit x = S.hit_of(u, lv);
        auto g = holonomy(S, x, +1);
        double t;
        Torus2 img = holonomy_apply(S, g, x.u, &t);
        CHECK(img == g.target.u);
        double t2;
        S.next(x, &t2);
        CHECK(t == doctest::Approx(t2).epsilon(1e-14));
        // inverse holonomy undoes it
        auto gi = holonomy(S, g.target, -1);
        CHECK(holonomy_apply(S, gi, img) == x.u);

        // a nearby point on the security disc whose own return lands elsewhere
        const Disc& hd = S.hat_discs()[S.disc_of(x).id];
        Torus2 y = random_in(hd, rng);
        Torus2 gy = holonomy_apply(S, g, y);
        Hit fy = S.first_hit(PointM{y, hd.height + 1e-12});
        if (!(fy.u == gy && S.height(fy) == S.height(g.target)))
            ++differs;
    }
    CHECK(differs > 0);
}
