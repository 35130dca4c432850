#include "doctest.h"

#include <cmath>
#include <memory>
#include <random>
#include <set>

#include "hypcode/markov.hpp"

using namespace hyp;

namespace {

ModelFlow make(RoofKind k)
{
    ModelConfig c;
    c.roof = k;
    return ModelFlow(c);
}

struct World {
    ModelFlow m;
    Nuh nuh;
    Sections S;
    Alphabet a;
    std::vector<std::unique_ptr<OrbitData>> orbits;
    MarkovInput in;
    std::vector<long> periodic_samples;
    std::unique_ptr<MarkovCover> cover;

    explicit World(RoofKind k, int generic) : m(make(k)), nuh(m), S(m, default_sections(k), m.config().rho), a(nuh, S)
    {
        long pad = (long)(nuh.default_horizon() / S.min_return_bound()) + 50;
        EncoderConfig cfg;
        in.S = &S;
        in.a = &a;
        auto add = [&](OrbitData o, long lo, long hi) {
            orbits.push_back(std::make_unique<OrbitData>(std::move(o)));
            in.encs.push_back(encode_orbit(*orbits.back(), lo, hi, a, nuh, S, cfg));
            in.orbits.push_back(orbits.back().get());
        };
        auto per = [&](int64_t n1, int64_t den, const char* name) {
            Hit h = S.hit_of(fix_point_from_ratio(n1, 0, den), 0);
            auto o = periodic_orbit(S, h, 1, name);
            o = periodic_orbit(S, h, (2 * pad + 100) / o.period + 1, name);
            compute_hit_params(nuh, S, o);
            long lo = pad, hi = o.size() - pad;
            add(std::move(o), lo, hi);
        };
        per(0, 1, "O1");
        per(1, 2, "O2");
        const OrbitData& o1 = *orbits[0];
        const OrbitData& o2 = *orbits[1];
        Torus2 q = fix_point_from_ratio(1, 0, 2);
        for (int kind : {+1, -1}) {
            Torus2 p = het_point(m, q, kind);
            auto h = kind > 0 ? het_orbit(S, S.hit_of(p, 0), o1, o2, 320, pad, "h12")
                              : het_orbit(S, S.hit_of(p, 0), o2, o1, 320, pad, "h21");
            compute_hit_params(nuh, S, h);
            long lo = h.exact_lo, hi = h.exact_hi;
            add(std::move(h), lo, hi);
        }
        std::mt19937_64 rng(5);
        for (int r = 0; r < generic; ++r) {
            auto o = generic_orbit(S, S.first_hit(m.random_point(rng)), pad + 150, pad + 150, "g");
            compute_hit_params(nuh, S, o);
            long lo = pad, hi = o.size() - pad;
            add(std::move(o), lo, hi);
        }
        a.build_edges(in.encs, cfg.eps);
        cover = std::make_unique<MarkovCover>(in, MarkovConfig{});
        for (long e = 0; e < 2; ++e)
            for (long i = 0; i < in.encs[e].size(); ++i)
                periodic_samples.push_back(cover->sample_of({e, i}));
    }
};

World& const_world()
{
    static World w(RoofKind::Const, 4);
    return w;
}

} // namespace

TEST_CASE("samples and the return map")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    std::set<long> per(w.periodic_samples.begin(), w.periodic_samples.end());
    // one sample per point of the two periodic orbits
    CHECK((long)per.size() == w.orbits[0]->period + w.orbits[1]->period);
    for (const auto& s : c.samples()) {
        CHECK(!s.Z.empty());
        if (s.next >= 0) {
            CHECK(c.sample(s.next).prev >= 0);
            CHECK(s.t_next > 0);
            CHECK((double)s.t_next < c.sections().rho());
        }
    }
    // the periodic orbit is closed under H
    for (long s : per) {
        CHECK(per.count(c.sample(s).next));
        CHECK(per.count(c.sample(s).prev));
    }
}

TEST_CASE("fibres and brackets")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    long checked = 0;
    for (long v = 0; v < c.rect_count(); ++v)
        for (long f : c.rect(v)) {
            const auto& F = c.fibre(f);
            // x lies on its own fibres
            CHECK(std::fabs(F.s.eval(F.xy(0)) - F.xy(1)) <= 1e-9 * (std::fabs(F.xy(1)) + 1e-12));
            CHECK(std::fabs(F.u.eval(F.xy(1)) - F.xy(0)) <= 1e-9 * (std::fabs(F.xy(0)) + 1e-12));
            auto z = c.bracket(f, f);
            CHECK((z - F.xy).cwiseAbs().maxCoeff() <= 1e-9 * (F.xy.cwiseAbs().maxCoeff() + 1e-12));
            ++checked;
        }
    CHECK(checked > 0);
    // bracket lies on both fibres
    for (long v = 0; v < c.rect_count(); ++v) {
        const auto& r = c.rect(v);
        if (r.size() < 2)
            continue;
        auto z = c.bracket(r[0], r[1]);
        const auto& X = c.fibre(r[0]);
        const auto& Y = c.fibre(r[1]);
        CHECK(std::fabs(X.s.eval(z(0)) - z(1)) <= 1e-12 + 1e-9 * std::fabs(z(1)));
        CHECK(std::fabs(Y.u.eval(z(1)) - z(0)) <= 1e-12 + 1e-9 * std::fabs(z(0)));
    }
    CHECK(c.dichotomy_violations() == 0);
}

TEST_CASE("overlap sets and E elements")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    for (long v = 0; v < c.rect_count(); ++v) {
        if (c.rect(v).empty())
            continue;
        const auto& I = c.I(v);
        CHECK(std::binary_search(I.begin(), I.end(), v));
        for (long u : I)
            CHECK(std::binary_search(c.I(u).begin(), c.I(u).end(), v));
        for (long f : c.rect(v))
            CHECK(c.E(f).size() == 2 * I.size());
        double cap = std::pow(4.0, (double)I.size());
        CHECK((double)c.E_count(v) <= cap);
    }
}

TEST_CASE("refinement and the Markov property")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    for (int N = 2; N <= 3; ++N) {
        auto p = refine(c, N);
        auto q = refine(c, N - 1);
        // finer classes sit inside coarser ones, so on common samples there are at least as many
        std::set<long> coarse;
        for (const auto& cl : p.classes) {
            for (long s : cl)
                CHECK(q.cls[s] == q.cls[cl[0]]);
            coarse.insert(q.cls[cl[0]]);
        }
        CHECK(p.size() >= (long)coarse.size());
        CHECK(p.boundary >= q.boundary);
    }
    auto p = refine(c, c.config().N);
    auto rep = markov_check(c, p);
    CHECK(rep.violations == 0);
    CHECK(rep.holonomy_mismatch == 0);
    CHECK(rep.bracket_law_failures == 0);
    CHECK(rep.flagged_fraction() < 1e-3);
    if (rep.hyperbolic_pairs > 0)
        CHECK(rep.worst_rate < 0);
    auto roof = roof_check(c, p);
    CHECK(roof.checked > 0);
    CHECK(roof.min > 0);
    CHECK(roof.max < c.sections().rho());
    CHECK(roof.conjugacy_err < 1e-9);
}

TEST_CASE("second coding")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    auto p = refine(c, c.config().N);
    std::mt19937_64 rng(2);
    auto cyl = cylinder_check(c, p, 4, 40, rng);
    CHECK(cyl.words == 40);
    CHECK(cyl.empty == 0);
    auto af = affiliation(c, p);
    CHECK(af.symmetric);
    for (long r = 0; r < p.size(); ++r)
        CHECK(af.affiliated(r, r));
    // preimages of an interior sample
    long tested = 0;
    for (long s = 0; s < (long)p.cls.size() && tested < 10; ++s) {
        try {
            auto pr = preimage_search(c, p, af, s, 4);
            CHECK(pr.count >= 1);
            CHECK(pr.count <= pr.bound);
            for (size_t d = 1; d < pr.counts_by_depth.size(); ++d)
                CHECK(pr.counts_by_depth[d] >= 1);
            ++tested;
        } catch (const std::invalid_argument&) {
        }
    }
    CHECK(tested == 10);
    auto b = bowen_check(c, p, af, 100);
    CHECK(b.coincident > 0);
    CHECK(b.coincident_ok == b.coincident);
    CHECK(b.pairs > 0);
    CHECK(b.recovered == b.pairs);
    CHECK(b.max_shift < 3 * c.sections().rho());
    auto lift = lift_hyperbolic_set(c, p, w.periodic_samples);
    CHECK(lift.transitive);
    CHECK(lift.covered == lift.samples);
}

TEST_CASE("cylinder diameters")
{
    auto& w = const_world();
    const auto& c = *w.cover;
    auto p = refine(c, c.config().N);
    std::mt19937_64 rng(4);
    auto fit = diameter_fit(c, p, 4, 12, 20, rng);
    REQUIRE(fit.words > 0);
    CHECK(fit.theta > 0);
    CHECK(fit.theta < 1);
    CHECK(fit.r2 > 0.99);
    CHECK(fit.pi_hat_err < 1e-6);
    for (size_t i = 1; i < fit.mean_log_diam.size(); ++i)
        CHECK(fit.mean_log_diam[i] < fit.mean_log_diam[i - 1]);
}

TEST_CASE("partition table")
{
    auto& w = const_world();
    auto p = refine(*w.cover, 3);
    auto csv = partition_csv(*w.cover, p);
    CHECK(csv.rfind("class,size", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == p.size() + 1);
}
