#include "doctest.h"

#include <cmath>
#include <random>

#include "hypcode/coarse.hpp"
#include "json.hpp"

using namespace hyp;

namespace {

ModelFlow make(RoofKind k)
{
    ModelConfig c;
    c.roof = k;
    return ModelFlow(c);
}

struct Setup {
    ModelFlow m;
    Nuh nuh;
    Sections S;
    explicit Setup(RoofKind k) : m(make(k)), nuh(m), S(m, default_sections(k), m.config().rho) {}
};

OrbitData periodic(const Setup& s, int64_t n1, int64_t n2, int64_t den, long hits, const char* name)
{
    Hit h = s.S.hit_of(fix_point_from_ratio(n1, n2, den), 0);
    auto o = periodic_orbit(s.S, h, 1, name);
    o = periodic_orbit(s.S, h, hits / o.period + 1, name);
    compute_hit_params(s.nuh, s.S, o);
    return o;
}

// horizon in hits plus a margin
long pad_for(const Setup& s) { return (long)(s.nuh.default_horizon() / s.S.min_return_bound()) + 50; }

void check_ladder(const Encoding& e, double eps)
{
    for (const auto& x : e.idx) {
        CHECK(x.log_as() <= 0);
        CHECK(x.log_au() <= 0);
        CHECK(x.log_as() > -eps);
        CHECK(x.log_au() > -eps);
    }
    CHECK(e.tail_s < eps * eps);
    CHECK(e.tail_u < eps * eps);
    CHECK(!e.horizon_limited);
}

} // namespace

TEST_CASE("i128 formatting")
{
    CHECK(i128_str(0) == "0");
    CHECK(i128_str(-42) == "-42");
    i128 big = (i128)1000000000000LL * (i128)1000000000000LL;
    CHECK(i128_str(big) == "1000000000000000000000000");
}

TEST_CASE("heteroclinic point")
{
    Setup s(RoofKind::Const);
    Torus2 q = fix_point_from_ratio(1, 0, 2);
    // independent long double decomposition of q = alpha nu + beta ns
    long double lu = (3.0L + std::sqrt(5.0L)) / 2, ls = (3.0L - std::sqrt(5.0L)) / 2;
    long double nu2 = lu - 2, ns2 = ls - 2;
    long double D = ns2 - nu2;
    long double alpha = 0.5L * ns2 / D, beta = -0.5L * nu2 / D;
    Torus2 p = het_point(s.m, q, +1), r = het_point(s.m, q, -1);
    auto frac = [](long double x) { return x - std::floor(x); };
    CHECK(std::fabs((double)(p.a.unit() - frac(alpha))) < 1e-15);
    CHECK(std::fabs((double)(p.b.unit() - frac(alpha * nu2))) < 1e-15);
    CHECK(std::fabs((double)(r.a.unit() - frac(beta))) < 1e-15);
    CHECK(std::fabs((double)(r.b.unit() - frac(beta * ns2))) < 1e-15);
    // A^n p -> orbit of q and A^-n p -> 0 at rate lambda^-n
    Torus2 x = p, y = p;
    for (int i = 0; i < 240; ++i) {
        x = apply(s.m.A(), x);
        y = apply(s.m.Ainv(), y);
    }
    CHECK(torus_dist(x, q) < 1e-95);
    CHECK(torus_dist(y, Torus2{}) < 1e-95);
    CHECK(torus_dist(x, q) > 1e-105);
}

TEST_CASE("hit parameters: serial and parallel agree")
{
    Setup s(RoofKind::Cos);
    std::mt19937_64 rng(3);
    auto o = generic_orbit(s.S, s.S.first_hit(s.m.random_point(rng)), 20, 20, "g");
    std::vector<double> Q1, q1, Q2, q2;
    compute_hit_params(s.nuh, s.S, o.hits, Q1, q1, false);
    compute_hit_params(s.nuh, s.S, o.hits, Q2, q2, true);
    CHECK(Q1 == Q2);
    CHECK(q1 == q2);
    CHECK(Q1[5] == s.nuh.params(s.S.point(o.hits[5])).Q);
    // repeated hits share values
    auto per = periodic(s, 0, 0, 1, 40, "O1");
    CHECK(per.Q[0] == per.Q[per.period]);
}

TEST_CASE("periodic orbits encode periodically")
{
    for (auto k : {RoofKind::Const, RoofKind::Cos}) {
        Setup s(k);
        long pad = pad_for(s);
        Alphabet a(s.nuh, s.S);
        EncoderConfig cfg;
        for (auto [n1, den, name] : {std::tuple{0, 1, "O1"}, std::tuple{1, 2, "O2"}}) {
            auto o = periodic(s, n1, 0, den, 2 * pad + 200, name);
            auto e = encode_orbit(o, pad, o.size() - pad, a, s.nuh, s.S, cfg);
            REQUIRE(e.size() > 3 * o.period);
            for (long i = 0; i + o.period < e.size(); ++i)
                CHECK(e.vertex[i] == e.vertex[i + o.period]);
            check_ladder(e, cfg.eps);
            CHECK(recheck_encoding(e, a, cfg.eps) == 0);
            auto g = encoding_gpo(s.S, a, e);
            auto sh = shadow(s.S, g, 40);
            CHECK(torus_dist(sh.point.u, o.hits[e.idx[g.zero].hit].u) < 1e-8);
        }
    }
}

TEST_CASE("generic orbits round trip")
{
    for (auto k : {RoofKind::Const, RoofKind::Cos}) {
        Setup s(k);
        const double tol = k == RoofKind::Const ? 1e-6 : 1e-4;
        long pad = pad_for(s);
        std::mt19937_64 rng(11);
        Alphabet a(s.nuh, s.S);
        EncoderConfig cfg;
        std::vector<Encoding> encs;
        for (int r = 0; r < 3; ++r) {
            auto o = generic_orbit(s.S, s.S.first_hit(s.m.random_point(rng)), pad + 60, pad + 60, "g");
            compute_hit_params(s.nuh, s.S, o);
            auto e = encode_orbit(o, pad, o.size() - pad, a, s.nuh, s.S, cfg);
            CHECK(e.size() > 60);
            check_ladder(e, cfg.eps);
            CHECK(recheck_encoding(e, a, cfg.eps) == 0);
            auto g = encoding_gpo(s.S, a, e);
            auto sh = shadow(s.S, g, 40);
            CHECK(torus_dist(sh.point.u, o.hits[e.idx[g.zero].hit].u) < tol);
            encs.push_back(e);
        }
        auto st = a.build_edges(encs, cfg.eps);
        CHECK(st.realized > 0);
        CHECK(st.realized_failed == 0);
        for (const auto& e : encs)
            for (long i = 0; i + 1 < e.size(); ++i)
                CHECK(a.has_edge(e.vertex[i], e.vertex[i + 1]));
    }
}

TEST_CASE("heteroclinic orbits attach to the periodic nets")
{
    Setup s(RoofKind::Const);
    long pad = pad_for(s);
    Alphabet a(s.nuh, s.S);
    EncoderConfig cfg;
    auto o1 = periodic(s, 0, 0, 1, 2 * pad + 100, "O1");
    auto o2 = periodic(s, 1, 0, 2, 2 * pad + 100, "O2");
    auto e1 = encode_orbit(o1, pad, o1.size() - pad, a, s.nuh, s.S, cfg);
    auto e2 = encode_orbit(o2, pad, o2.size() - pad, a, s.nuh, s.S, cfg);
    long nets = a.net().size();
    CHECK(nets == o1.period + o2.period);
    Torus2 p = het_point(s.m, fix_point_from_ratio(1, 0, 2), +1);
    auto h = het_orbit(s.S, s.S.hit_of(p, 0), o1, o2, 320, pad, "h12");
    CHECK(h.exact_lo == pad);
    compute_hit_params(s.nuh, s.S, h);
    auto e = encode_orbit(h, pad - 20, h.size() - pad + 20, a, s.nuh, s.S, cfg);
    check_ladder(e, cfg.eps);
    CHECK(recheck_encoding(e, a, cfg.eps) == 0);
    // first and last indices are periodic continuations: their net points are the periodic ones
    CHECK(e.idx.front().net < nets);
    CHECK(e.idx.back().net < nets);
    CHECK(a.net().size() > nets);
    // the orbit stays on the right periodic orbit in each tail
    CHECK(a.net()[e.idx.front().net].hit.u == o1.hits[0].u);
    bool on_o2 = false;
    for (long j = 0; j < o2.period; ++j)
        on_o2 |= a.net()[e.idx.back().net].hit.u == o2.hits[j].u;
    CHECK(on_o2);
}

TEST_CASE("lazy net matching")
{
    Setup s(RoofKind::Cos);
    std::mt19937_64 rng(5);
    Hit x = s.S.first_hit(s.m.random_point(rng));
    auto o = generic_orbit(s.S, x, 3, 3, "a");
    Hit y = x;
    y.u = add_offset(x.u, 1e-200, -1e-200);
    auto near = generic_orbit(s.S, y, 3, 3, "b");
    Hit z = x;
    z.u = add_offset(x.u, 1e-60, 0);
    auto far = generic_orbit(s.S, z, 3, 3, "c");
    compute_hit_params(s.nuh, s.S, o);
    compute_hit_params(s.nuh, s.S, near);
    compute_hit_params(s.nuh, s.S, far);
    CHECK(LazyNet::threshold(o, 3) < 1e-100);
    LazyNet net(s.nuh, s.S, 2);
    long id = net.find_or_insert(o, 3);
    CHECK(net.find(o, 3) == id);
    CHECK(net.find(near, 3) == id);
    CHECK(net.find(far, 3) == -1);
    CHECK(net.find_or_insert(near, 3) == id);
    CHECK(net.find_or_insert(far, 3) == 1);
    CHECK_THROWS_AS(net.find_or_insert(o, 1), NetOverflow);
}

TEST_CASE("pruning")
{
    Setup s(RoofKind::Const);
    long pad = pad_for(s);
    Alphabet a(s.nuh, s.S);
    EncoderConfig cfg;
    std::vector<Encoding> encs;
    std::mt19937_64 rng(2);
    for (int r = 0; r < 2; ++r) {
        auto o = generic_orbit(s.S, s.S.first_hit(s.m.random_point(rng)), pad + 20, pad + 20, "g");
        compute_hit_params(s.nuh, s.S, o);
        encs.push_back(encode_orbit(o, pad, o.size() - pad, a, s.nuh, s.S, cfg));
    }
    a.build_edges(encs, cfg.eps);
    const auto& v0 = a.vertices()[encs[0].vertex[5]];
    long iso = a.vertex(v0.net, v0.Ks + 1, v0.Ku);
    long before = a.size();
    CHECK(a.graph().out((int)iso).empty());
    CHECK(prune_relevant(a, encs) == 1);
    CHECK(a.size() == before - 1);
    CHECK(prune_relevant(a, encs) == 0);
    for (const auto& e : encs) {
        CHECK(recheck_encoding(e, a, cfg.eps) == 0);
        for (long i = 0; i + 1 < e.size(); ++i)
            CHECK(a.has_edge(e.vertex[i], e.vertex[i + 1]));
    }
}

TEST_CASE("encoder input validation")
{
    Setup s(RoofKind::Const);
    auto o = periodic(s, 0, 0, 1, 100, "O1");
    Alphabet a(s.nuh, s.S);
    EncoderConfig cfg;
    cfg.beta = 2;
    CHECK_THROWS_AS(encode_orbit(o, 10, 90, a, s.nuh, s.S, cfg), std::invalid_argument);
    // a window far shorter than the horizon has no certified maximal index
    cfg.beta = 1;
    CHECK_THROWS_AS(encode_orbit(o, 10, 90, a, s.nuh, s.S, cfg), SurgeryFailure);
}

TEST_CASE("encoder trace")
{
    Setup s(RoofKind::Const);
    long pad = pad_for(s);
    Alphabet a(s.nuh, s.S);
    auto o = periodic(s, 0, 0, 1, 2 * pad + 20, "O1");
    auto e = encode_orbit(o, pad, o.size() - pad, a, s.nuh, s.S, EncoderConfig{});
    auto j = nlohmann::json::parse(encoding_json(e));
    CHECK(j["name"] == "O1");
    CHECK((long)j["indices"].size() == e.size());
    CHECK(j["indices"][0]["Ks"].get<std::string>() == i128_str(e.idx[0].Ks));
    CHECK(a.charts_csv().find("id,net,Ks,Ku") == 0);
    CHECK(a.edges_dot().find("digraph") != std::string::npos);
}
