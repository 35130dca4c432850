#include "hypcode/coarse.hpp"

#include <gmpxx.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace hyp {

std::string i128_str(i128 v)
{
    if (v == 0)
        return "0";
    bool neg = v < 0;
    unsigned __int128 u = neg ? -(unsigned __int128)v : (unsigned __int128)v;
    std::string s;
    while (u) {
        s.push_back(char('0' + (int)(u % 10)));
        u /= 10;
    }
    if (neg)
        s.push_back('-');
    std::reverse(s.begin(), s.end());
    return s;
}

static bool same_hit(const Hit& a, const Hit& b) { return a.tile == b.tile && a.level == b.level && a.u == b.u; }

OrbitData periodic_orbit(const Sections& S, const Hit& h, long cycles, const std::string& name)
{
    std::vector<Hit> cyc{h};
    std::vector<f128> st;
    Hit cur = h;
    while (true) {
        Holonomy g = holonomy(S, cur, +1);
        st.push_back(holonomy_time_q(S, g, cur.u));
        cur = g.target;
        if (same_hit(cur, h))
            break;
        cyc.push_back(cur);
        if (cyc.size() > 100000)
            throw std::runtime_error("periodic_orbit: no return within 1e5 hits");
    }
    OrbitData o;
    o.name = name;
    o.period = (long)cyc.size();
    for (long c = 0; c < cycles; ++c)
        for (long i = 0; i < o.period; ++i) {
            o.hits.push_back(cyc[i]);
            if (c + 1 < cycles || i + 1 < o.period)
                o.steps.push_back(st[i]);
        }
    o.exact_lo = 0;
    o.exact_hi = o.size();
    return o;
}

OrbitData generic_orbit(const Sections& S, const Hit& h, long before, long after, const std::string& name)
{
    Hit cur = h;
    for (long i = 0; i < before; ++i)
        cur = S.prev(cur);
    OrbitData o;
    o.name = name;
    for (long i = 0; i <= before + after; ++i) {
        o.hits.push_back(cur);
        if (i < before + after) {
            Holonomy g = holonomy(S, cur, +1);
            o.steps.push_back(holonomy_time_q(S, g, cur.u));
            cur = g.target;
        }
    }
    o.exact_lo = 0;
    o.exact_hi = o.size();
    return o;
}

static const int kMpBits = 1100;

static mpf_class fix_to_mpf(const Fix& f)
{
    mpf_class r(0, kMpBits);
    for (int i = kFixWords - 1; i >= 0; --i) {
        r += mpf_class((unsigned long)f.w[i], kMpBits);
        r /= mpf_class(18446744073709551616.0, kMpBits);
    }
    return r;
}

static Fix mpf_to_fix(mpf_class x)
{
    x.set_prec(kMpBits);
    mpf_class fl(0, kMpBits);
    mpf_floor(fl.get_mpf_t(), x.get_mpf_t());
    x -= fl;
    Fix r;
    const mpf_class two64(18446744073709551616.0, kMpBits);
    for (int i = 0; i < kFixWords; ++i) {
        x *= two64;
        mpf_floor(fl.get_mpf_t(), x.get_mpf_t());
        r.w[i] = (uint64_t)fl.get_ui();
        x -= fl;
    }
    return r;
}

Torus2 fix_point_from_ratio(int64_t n1, int64_t n2, int64_t den)
{
    return {Fix::from_ratio(n1, den), Fix::from_ratio(n2, den)};
}

Torus2 het_point(const ModelFlow& m, const Torus2& q, int kind)
{
    mpf_set_default_prec(kMpBits);
    const Mat2i& A = m.A();
    mpf_class a(A.m00, kMpBits), b(A.m01, kMpBits), c(A.m10, kMpBits), d(A.m11, kMpBits);
    mpf_class tr = a + d, det = a * d - b * c;
    mpf_class disc = tr * tr - 4 * det;
    mpf_class sq = sqrt(disc);
    mpf_class lu = (tr + sq) / 2, ls = (tr - sq) / 2;
    if (A.m01 == 0)
        throw std::invalid_argument("het_point: A must have a nonzero off-diagonal entry");
    // eigenvectors (b, lambda - a)
    mpf_class nu1 = b, nu2 = lu - a, ns1 = b, ns2 = ls - a;
    mpf_class q1 = fix_to_mpf(q.a), q2 = fix_to_mpf(q.b);
    // q = alpha nu + beta ns
    mpf_class D = nu1 * ns2 - ns1 * nu2;
    mpf_class alpha = (q1 * ns2 - ns1 * q2) / D;
    mpf_class beta = (nu1 * q2 - q1 * nu2) / D;
    mpf_class p1, p2;
    if (kind > 0) {
        p1 = alpha * nu1;
        p2 = alpha * nu2;
    } else {
        p1 = beta * ns1;
        p2 = beta * ns2;
    }
    return {mpf_to_fix(p1), mpf_to_fix(p2)};
}

static long find_on_cycle(const OrbitData& per, const Hit& h)
{
    for (long j = 0; j < per.period; ++j)
        if (per.hits[j].tile == h.tile && per.hits[j].level == h.level && torus_dist(per.hits[j].u, h.u) < 1e-100)
            return j;
    return -1;
}

OrbitData het_orbit(const Sections& S, const Hit& h, const OrbitData& past, const OrbitData& future, int crossings,
                    long pad, const std::string& name)
{
    if (past.period <= 0 || future.period <= 0 || past.size() < 2 * past.period || future.size() < 2 * future.period)
        throw std::invalid_argument("het_orbit needs periodic orbits with two stored cycles");
    std::vector<Hit> fwd{h}, bwd;
    std::vector<f128> fst, bst;
    Hit cur = h;
    for (int k = 0; k < crossings;) {
        Holonomy g = holonomy(S, cur, +1);
        fst.push_back(holonomy_time_q(S, g, cur.u));
        cur = g.target;
        k += g.crossings;
        fwd.push_back(cur);
    }
    cur = h;
    for (int k = 0; k < crossings;) {
        Holonomy g = holonomy(S, cur, -1);
        bst.push_back(-holonomy_time_q(S, g, cur.u));
        cur = g.target;
        k -= g.crossings;
        bwd.push_back(cur);
    }
    long jf = find_on_cycle(future, fwd.back());
    long jp = find_on_cycle(past, bwd.back());
    if (jf < 0 || jp < 0)
        throw std::runtime_error("het_orbit: orbit does not reach the periodic orbits");
    OrbitData o;
    o.name = name;
    // past continuation: hits jp - pad .. jp - 1 of the past cycle
    long P = past.period;
    for (long i = pad; i >= 1; --i) {
        long j = ((jp - i) % P + P) % P;
        o.hits.push_back(past.hits[j]);
        o.steps.push_back(past.steps[j]);
    }
    o.exact_lo = o.size();
    for (long i = (long)bwd.size() - 1; i >= 0; --i) {
        o.hits.push_back(bwd[i]);
        o.steps.push_back(bst[i]);
    }
    for (size_t i = 0; i < fwd.size(); ++i) {
        o.hits.push_back(fwd[i]);
        if (i + 1 < fwd.size())
            o.steps.push_back(fst[i]);
    }
    o.exact_hi = o.size();
    {
        Holonomy g = holonomy(S, fwd.back(), +1);
        o.steps.push_back(holonomy_time_q(S, g, fwd.back().u));
    }
    long Pf = future.period;
    for (long i = 1; i <= pad; ++i) {
        long j = (jf + i) % Pf;
        o.hits.push_back(future.hits[j]);
        if (i < pad)
            o.steps.push_back(future.steps[j]);
    }
    return o;
}

void compute_hit_params(const Nuh& nuh, const Sections& S, const std::vector<Hit>& hits, std::vector<double>& Q,
                        std::vector<double>& q, bool parallel)
{
    // repeated hits (periodic continuations) are evaluated once
    std::unordered_map<size_t, std::vector<long>> seen;
    std::vector<long> rep(hits.size());
    std::vector<long> uniq;
    for (size_t i = 0; i < hits.size(); ++i) {
        size_t key = hash_torus(hits[i].u) ^ ((size_t)(hits[i].tile * 131 + hits[i].level) * 0x9e3779b97f4a7c15ULL);
        long found = -1;
        for (long j : seen[key])
            if (same_hit(hits[j], hits[i])) {
                found = j;
                break;
            }
        if (found < 0) {
            seen[key].push_back((long)i);
            uniq.push_back((long)i);
            rep[i] = (long)i;
        } else
            rep[i] = found;
    }
    Q.assign(hits.size(), 0);
    q.assign(hits.size(), 0);
    const double H = nuh.default_horizon();
    const long nu = (long)uniq.size();
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
    for (long k = 0; k < nu; ++k) {
        long i = uniq[k];
        PointM x = S.point(hits[i]);
        Q[i] = nuh.params(x).Q;
        q[i] = nuh.compute_q(x, H).q;
    }
    for (size_t i = 0; i < hits.size(); ++i) {
        Q[i] = Q[rep[i]];
        q[i] = q[rep[i]];
    }
}

void compute_hit_params(const Nuh& nuh, const Sections& S, OrbitData& o, bool parallel)
{
    compute_hit_params(nuh, S, o.hits, o.Q, o.q, parallel);
}

// ---- lazy net

static const int kCellBits = 390;

static Fix truncate_fix(const Fix& f)
{
    Fix r = f;
    int word = kCellBits / 64, bit = kCellBits % 64;
    // keep the leading kCellBits bits
    if (bit)
        r.w[word] &= ~((1ULL << (64 - bit)) - 1);
    for (int i = word + (bit ? 1 : 0); i < kFixWords; ++i)
        r.w[i] = 0;
    return r;
}

static Fix cell_unit()
{
    Fix u;
    int word = (kCellBits - 1) / 64, bit = (kCellBits - 1) % 64;
    u.w[word] = 1ULL << (63 - bit);
    return u;
}

LazyNet::LazyNet(const Nuh& nuh, const Sections& S, long cap) : nuh_(&nuh), S_(&S), cap_(cap) {}

size_t LazyNet::cell_key(int disc, const Torus2& u) const
{
    return hash_torus(u) ^ ((size_t)disc * 0x9e3779b97f4a7c15ULL);
}

double LazyNet::threshold(const OrbitData& o, long n)
{
    double q = o.q[n];
    if (n > 0)
        q = std::min(q, o.q[n - 1]);
    if (n + 1 < o.size())
        q = std::min(q, o.q[n + 1]);
    return 0.5 * std::pow(std::exp(-1.0) * q, 8);
}

bool LazyNet::matches(const NetPoint& p, const OrbitData& o, long n) const
{
    const Sections& S = *S_;
    auto disc = [&](const Hit& h) { return S.disc_id(h.tile, h.level); };
    if (n == 0 || n + 1 >= o.size())
        return false;
    const Hit& x = o.hits[n];
    const Hit& xn = o.hits[n + 1];
    const Hit& xp = o.hits[n - 1];
    if (disc(x) != disc(p.hit) || disc(xn) != disc(p.next) || disc(xp) != disc(p.prev))
        return false;
    double thr = threshold(o, n);
    if (torus_dist(x.u, p.hit.u) >= thr || torus_dist(xn.u, p.next.u) >= thr || torus_dist(xp.u, p.prev.u) >= thr)
        return false;
    // frame distance at the three positions
    auto c0 = nuh_->params(S.point(x)).C, c1 = nuh_->params(S.point(xn)).C, cm = nuh_->params(S.point(xp)).C;
    if (torus_dist(x.u, p.hit.u) + (c0 - p.chart.C).norm() >= thr)
        return false;
    if (torus_dist(xn.u, p.next.u) + (c1 - p.chart_next.C).norm() >= thr)
        return false;
    if (torus_dist(xp.u, p.prev.u) + (cm - p.chart_prev.C).norm() >= thr)
        return false;
    const double e3 = nuh_->eps() / 3;
    return std::fabs(std::log(o.Q[n] / p.Q)) <= e3 && std::fabs(std::log(o.q[n] / p.q)) <= e3;
}

long LazyNet::find(const OrbitData& o, long n) const
{
    const Hit& x = o.hits[n];
    int disc = S_->disc_id(x.tile, x.level);
    Torus2 t{truncate_fix(x.u.a), truncate_fix(x.u.b)};
    Fix unit = cell_unit();
    for (int da = -1; da <= 1; ++da)
        for (int db = -1; db <= 1; ++db) {
            Torus2 c = t;
            if (da)
                c.a = da > 0 ? c.a + unit : c.a - unit;
            if (db)
                c.b = db > 0 ? c.b + unit : c.b - unit;
            auto it = grid_.find(cell_key(disc, c));
            if (it == grid_.end())
                continue;
            for (long id : it->second)
                if (matches(pts_[id], o, n))
                    return id;
        }
    return -1;
}

long LazyNet::find_or_insert(const OrbitData& o, long n)
{
    long id = find(o, n);
    if (id >= 0)
        return id;
    if ((long)pts_.size() >= cap_)
        throw NetOverflow("lazy net exceeds its cap", (long)pts_.size());
    if (n == 0 || n + 1 >= o.size())
        throw std::out_of_range("net points need both neighbours in the window");
    NetPoint p;
    p.hit = o.hits[n];
    p.next = o.hits[n + 1];
    p.prev = o.hits[n - 1];
    p.Q = o.Q[n];
    p.q = o.q[n];
    p.chart = pesin_chart(*nuh_, *S_, p.hit);
    p.chart_next = pesin_chart(*nuh_, *S_, S_->next(p.hit));
    p.chart_prev = pesin_chart(*nuh_, *S_, S_->prev(p.hit));
    pts_.push_back(p);
    id = (long)pts_.size() - 1;
    const Hit& x = o.hits[n];
    Torus2 t{truncate_fix(x.u.a), truncate_fix(x.u.b)};
    grid_[cell_key(S_->disc_id(x.tile, x.level), t)].push_back(id);
    return id;
}

// ---- alphabet

Alphabet::Alphabet(const Nuh& nuh, const Sections& S) : nuh_(&nuh), S_(&S), net_(nuh, S) {}

long Alphabet::find_vertex(long net, i128 Ks, i128 Ku) const
{
    auto it = index_.find({net, Ks, Ku});
    return it == index_.end() ? -1 : it->second;
}

long Alphabet::vertex(long net, i128 Ks, i128 Ku)
{
    long id = find_vertex(net, Ks, Ku);
    if (id >= 0)
        return id;
    Vertex v;
    v.net = net;
    v.Ks = Ks;
    v.Ku = Ku;
    const NetPoint& p = net_[net];
    f128 step = (f128)nuh_->eps() * (f128)nuh_->eps() * (f128)p.q;
    v.chart = {p.chart, -step * (f128)Ks, -step * (f128)Ku};
    id = (long)verts_.size();
    verts_.push_back(v);
    index_[{net, Ks, Ku}] = id;
    graph_.add_vertex("v" + std::to_string(id));
    if ((long)by_net_.size() <= net)
        by_net_.resize(net + 1);
    by_net_[net].push_back(id);
    return id;
}

EdgeReport Alphabet::test_edge(long a, long b, double eps, int grid) const
{
    const Vertex& va = verts_[a];
    const Vertex& vb = verts_[b];
    return edge_test(*S_, va.chart, vb.chart, net_[va.net].chart_next, net_[vb.net].chart_prev, eps, grid);
}

EdgeStats Alphabet::build_edges(const std::vector<Encoding>& encs, double eps, int grid)
{
    EdgeStats st;
    std::map<std::pair<long, long>, char> realized;
    for (const auto& e : encs)
        for (long i = 0; i + 1 < e.size(); ++i)
            realized[{e.vertex[i], e.vertex[i + 1]}] = 1;
    std::vector<std::pair<long, long>> cand;
    for (const auto& [tr, _] : transitions_) {
        if (tr.first >= (long)by_net_.size() || tr.second >= (long)by_net_.size())
            continue;
        for (long v : by_net_[tr.first])
            for (long w : by_net_[tr.second])
                cand.push_back({v, w});
    }
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    std::vector<char> ok(cand.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long i = 0; i < (long)cand.size(); ++i)
        ok[i] = test_edge(cand[i].first, cand[i].second, eps, grid).ok();
    for (size_t i = 0; i < cand.size(); ++i) {
        ++st.tested;
        bool r = realized.count(cand[i]);
        if (r)
            ++st.realized;
        if (ok[i]) {
            ++st.accepted;
            if (!graph_.has_edge((int)cand[i].first, (int)cand[i].second))
                graph_.add_edge((int)cand[i].first, (int)cand[i].second);
        } else if (r)
            ++st.realized_failed;
    }
    return st;
}

std::string Alphabet::charts_csv() const
{
    std::ostringstream os;
    os << "id,net,Ks,Ku," << chart_csv_header();
    for (size_t i = 0; i < verts_.size(); ++i)
        os << i << "," << verts_[i].net << "," << i128_str(verts_[i].Ks) << "," << i128_str(verts_[i].Ku) << ","
           << chart_csv_row(verts_[i].chart);
    return os.str();
}

std::string Alphabet::edges_dot() const { return graph_.to_dot("alphabet"); }

std::vector<long> Alphabet::restrict_to(const std::vector<char>& keep)
{
    std::vector<long> map(verts_.size(), -1);
    std::vector<Vertex> nv;
    for (size_t i = 0; i < verts_.size(); ++i)
        if (keep[i]) {
            map[i] = (long)nv.size();
            nv.push_back(verts_[i]);
        }
    MarkovGraph g;
    for (size_t i = 0; i < nv.size(); ++i)
        g.add_vertex("v" + std::to_string(i));
    for (auto [a, b] : graph_.edges())
        if (map[a] >= 0 && map[b] >= 0)
            g.add_edge((int)map[a], (int)map[b]);
    verts_ = std::move(nv);
    graph_ = std::move(g);
    index_.clear();
    by_net_.assign(by_net_.size(), {});
    for (size_t i = 0; i < verts_.size(); ++i) {
        index_[{verts_[i].net, verts_[i].Ks, verts_[i].Ku}] = (long)i;
        by_net_[verts_[i].net].push_back((long)i);
    }
    return map;
}

// ---- encoder

static i128 ceil_ratio(f128 x)
{
    f128 c = ceilq(x);
    return (i128)c;
}

Encoding encode_orbit(const OrbitData& o, long lo, long hi, Alphabet& a, const Nuh& nuh, const Sections& S,
                      const EncoderConfig& cfg)
{
    if (cfg.beta >= 2)
        throw std::invalid_argument("coarse graining needs beta < 2");
    const long N = o.size();
    const f128 eps = cfg.eps;
    auto z = z_indexed_p(o.steps, o.Q, cfg.eps, nuh.Q_lower(), S.min_return_bound(), S.max_return_bound());
    const f128 lam = powq(eps, 1.5Q);
    // maximal indices
    std::vector<char> smax(N, 0), umax(N, 0);
    long Ms = -1, mu = -1;
    for (long n = 0; n + 1 < z.s_certified_end; ++n) {
        smax[n] = !(z.log_ps[n] >= lam + z.log_ps[n + 1]);
        if (smax[n])
            Ms = n;
    }
    for (long n = N - 1; n >= std::max(1L, z.u_certified_begin + 1); --n) {
        umax[n] = !(z.log_pu[n] >= lam + z.log_pu[n - 1]);
        if (umax[n])
            mu = n;
    }
    if (Ms < 0 || mu < 0)
        throw SurgeryFailure("no maximal index in the certified window", 0);
    long L = std::max({lo, mu, 1L}), Hh = std::min({hi, Ms + 1, N - 1});
    if (L >= Hh)
        throw SurgeryFailure("encoding range is empty after the maximal-index trim", L);

    Encoding e;
    e.name = o.name;
    e.lo = L;
    e.hi = Hh;
    std::vector<long> net(Hh - L);
    for (long n = L; n < Hh; ++n)
        net[n - L] = a.net().find_or_insert(o, n);
    auto qstep = [&](long n) {
        return eps * eps * (f128)a.net()[net[n - L]].q;
    };
    // q of the net point at n, for indices outside [L, Hh) the orbit's own value (identical there)
    auto qstep_any = [&](long n) {
        if (n >= L && n < Hh)
            return qstep(n);
        return eps * eps * (f128)o.q[n];
    };
    std::vector<i128> Ks(Ms + 1 - L), Ku(Hh - mu);
    std::vector<f128> las(Ms + 1 - L), lau(Hh - mu);
    // s: backward induction from the last maximal index
    f128 la_next = 0;
    for (long n = Ms; n >= L; --n) {
        f128 lP = z.log_ps[n], st = qstep_any(n);
        i128 K;
        if (smax[n])
            K = ceil_ratio(-lP / st);
        else {
            f128 P = expq(lP);
            K = ceil_ratio(-(lP + la_next - eps * P / 4) / st);
            f128 la = -st * (f128)K - lP;
            if (la < la_next - eps * P / 2)
                throw SurgeryFailure("s ladder step exceeds the allowed drop at index " + std::to_string(n), n);
        }
        f128 la = -st * (f128)K - lP;
        Ks[n - L] = K;
        las[n - L] = la;
        la_next = la;
    }
    // u: forward induction from the first maximal index
    f128 la_prev = 0;
    for (long n = mu; n < Hh; ++n) {
        f128 lP = z.log_pu[n], st = qstep_any(n);
        i128 K;
        if (umax[n])
            K = ceil_ratio(-lP / st);
        else {
            f128 P = expq(lP);
            K = ceil_ratio(-(lP + la_prev - eps * P / 4) / st);
            f128 la = -st * (f128)K - lP;
            if (la < la_prev - eps * P / 2)
                throw SurgeryFailure("u ladder step exceeds the allowed drop at index " + std::to_string(n), n);
        }
        f128 la = -st * (f128)K - lP;
        Ku[n - mu] = K;
        lau[n - mu] = la;
        la_prev = la;
    }
    // tail sums over growing runs
    {
        double run = 0;
        for (long n = Ms; n >= L; --n) {
            if (smax[n])
                run = 0;
            else {
                run += (double)expq(z.log_ps[n]);
                e.tail_s = std::max(e.tail_s, run);
            }
        }
        run = 0;
        for (long n = mu; n < Hh; ++n) {
            if (umax[n])
                run = 0;
            else {
                run += (double)expq(z.log_pu[n]);
                e.tail_u = std::max(e.tail_u, run);
            }
        }
    }
    e.min_log_a = 0;
    for (long n = L; n < Hh; ++n) {
        EncodedIndex x;
        x.hit = n;
        x.net = net[n - L];
        x.log_Ps = z.log_ps[n];
        x.log_Pu = z.log_pu[n];
        x.s_max = smax[n];
        x.u_max = umax[n];
        x.Ks = Ks[n - L];
        x.Ku = Ku[n - mu];
        f128 st = qstep(n);
        x.log_ps = -st * (f128)x.Ks;
        x.log_pu = -st * (f128)x.Ku;
        e.s_maximal += x.s_max;
        e.u_maximal += x.u_max;
        e.min_log_a = std::min({e.min_log_a, x.log_as(), x.log_au()});
        e.max_log_a = std::max({e.max_log_a, x.log_as(), x.log_au()});
        e.idx.push_back(x);
        e.vertex.push_back(a.vertex(x.net, x.Ks, x.Ku));
        if (n > L)
            a.note_transition(net[n - 1 - L], x.net);
    }
    e.horizon_limited = e.s_maximal < 2 || e.u_maximal < 2;
    return e;
}

long recheck_encoding(const Encoding& e, const Alphabet& a, double eps, int grid)
{
    long bad = 0, m = e.size() - 1;
#pragma omp parallel for reduction(+ : bad) schedule(dynamic, 16)
    for (long i = 0; i < m; ++i)
        bad += !a.test_edge(e.vertex[i], e.vertex[i + 1], eps, grid).ok();
    return bad;
}

Gpo encoding_gpo(const Sections& S, const Alphabet& a, const Encoding& e)
{
    std::vector<DoubleChart> v;
    for (long id : e.vertex)
        v.push_back(a.vertices()[id].chart);
    return make_gpo(S, std::move(v), e.size() / 2);
}

long prune_relevant(Alphabet& a, std::vector<Encoding>& encs)
{
    std::vector<char> keep(a.size(), 0);
    for (const auto& e : encs)
        for (long v : e.vertex)
            keep[v] = 1;
    long before = a.size();
    auto map = a.restrict_to(keep);
    for (auto& e : encs)
        for (auto& v : e.vertex)
            v = map[v];
    return before - a.size();
}

std::string encoding_json(const Encoding& e)
{
    nlohmann::ordered_json j;
    j["name"] = e.name;
    j["lo"] = e.lo;
    j["hi"] = e.hi;
    j["s_maximal"] = e.s_maximal;
    j["u_maximal"] = e.u_maximal;
    j["horizon_limited"] = e.horizon_limited;
    j["tail_s"] = e.tail_s;
    j["tail_u"] = e.tail_u;
    j["min_log_a"] = (double)e.min_log_a;
    auto arr = nlohmann::ordered_json::array();
    for (long i = 0; i < e.size(); ++i) {
        const auto& x = e.idx[i];
        nlohmann::ordered_json r;
        r["hit"] = x.hit;
        r["vertex"] = e.vertex[i];
        r["net"] = x.net;
        r["log_Ps"] = f128_str(x.log_Ps, 30);
        r["log_Pu"] = f128_str(x.log_Pu, 30);
        r["s"] = x.s_max ? "maximal" : "growing";
        r["u"] = x.u_max ? "maximal" : "growing";
        r["Ks"] = i128_str(x.Ks);
        r["Ku"] = i128_str(x.Ku);
        r["log_as"] = (double)x.log_as();
        r["log_au"] = (double)x.log_au();
        arr.push_back(r);
    }
    j["indices"] = arr;
    return j.dump(1);
}

} // namespace hyp
