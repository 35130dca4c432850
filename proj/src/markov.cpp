#include "hypcode/markov.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hyp {

static bool same_hit(const Hit& a, const Hit& b) { return a.tile == b.tile && a.level == b.level && a.u == b.u; }

static size_t hit_key(const Sections& S, const Hit& h)
{
    return hash_torus(h.u) ^ ((size_t)S.disc_id(h.tile, h.level) * 0x9e3779b97f4a7c15ULL);
}

MarkovCover::MarkovCover(const MarkovInput& in, const MarkovConfig& cfg) : in_(in), cfg_(cfg)
{
    if (!in_.S || !in_.a || in_.encs.size() != in_.orbits.size())
        throw std::invalid_argument("markov cover needs sections, alphabet and one orbit per encoding");
    build_samples();
    build_fibres();
    build_I();
    build_E();
}

long MarkovCover::sample_of(const Occurrence& o) const { return occ_sample_[o.enc][o.idx]; }

long MarkovCover::fibre_id(long sample, long v) const
{
    auto it = fib_index_.find({sample, v});
    return it == fib_index_.end() ? -1 : it->second;
}

void MarkovCover::build_samples()
{
    const Sections& S = *in_.S;
    std::unordered_map<size_t, std::vector<long>> index;
    occ_sample_.resize(in_.encs.size());
    for (size_t e = 0; e < in_.encs.size(); ++e) {
        const Encoding& en = in_.encs[e];
        const OrbitData& o = *in_.orbits[e];
        occ_sample_[e].resize(en.size());
        for (long i = 0; i < en.size(); ++i) {
            const Hit& h = o.hits[en.idx[i].hit];
            auto& bucket = index[hit_key(S, h)];
            long id = -1;
            for (long j : bucket)
                if (same_hit(samples_[j].hit, h)) {
                    id = j;
                    break;
                }
            if (id < 0) {
                id = (long)samples_.size();
                samples_.push_back({});
                samples_.back().hit = h;
                bucket.push_back(id);
            }
            samples_[id].occ.push_back({(long)e, i});
            samples_[id].Z.push_back(en.vertex[i]);
            occ_sample_[e][i] = id;
        }
    }
    for (auto& s : samples_) {
        std::sort(s.Z.begin(), s.Z.end());
        s.Z.erase(std::unique(s.Z.begin(), s.Z.end()), s.Z.end());
    }
    for (size_t e = 0; e < in_.encs.size(); ++e) {
        const Encoding& en = in_.encs[e];
        const OrbitData& o = *in_.orbits[e];
        for (long i = 0; i + 1 < en.size(); ++i) {
            long a = occ_sample_[e][i], b = occ_sample_[e][i + 1];
            if (en.idx[i + 1].hit != en.idx[i].hit + 1)
                throw std::logic_error("encoded indices are not consecutive");
            Sample& sa = samples_[a];
            if (sa.next >= 0 && sa.next != b)
                throw std::runtime_error("return map is not single valued on the samples");
            sa.next = b;
            sa.t_next = o.steps[en.idx[i].hit];
            Sample& sb = samples_[b];
            if (sb.prev >= 0 && sb.prev != a)
                throw std::runtime_error("inverse return map is not single valued on the samples");
            sb.prev = a;
        }
    }
    rect_.assign(in_.a->size(), {});
}

void MarkovCover::build_fibres()
{
    const Sections& S = *in_.S;
    const auto& verts = in_.a->vertices();
    // best occurrence for each (sample, vertex): the most room on both sides
    struct Job {
        long sample, vertex;
        Occurrence occ;
        int ds, du;
    };
    std::map<std::pair<long, long>, Job> best;
    for (long s = 0; s < (long)samples_.size(); ++s)
        for (const auto& oc : samples_[s].occ) {
            const Encoding& en = in_.encs[oc.enc];
            long v = en.vertex[oc.idx];
            int ds = (int)std::min<long>(cfg_.fibre_depth, en.size() - 1 - oc.idx);
            int du = (int)std::min<long>(cfg_.fibre_depth, oc.idx);
            auto it = best.find({s, v});
            if (it == best.end() || std::min(ds, du) > std::min(it->second.ds, it->second.du))
                best[{s, v}] = {s, v, oc, ds, du};
        }
    std::vector<Job> jobs;
    for (auto& [k, j] : best)
        jobs.push_back(j);
    std::vector<char> need(in_.encs.size(), 0);
    for (const auto& j : jobs)
        need[j.occ.enc] = 1;
    std::vector<Gpo> gpos(in_.encs.size());
    for (size_t e = 0; e < in_.encs.size(); ++e)
        if (need[e])
            gpos[e] = encoding_gpo(S, *in_.a, in_.encs[e]);
    fib_.resize(jobs.size());
    const long nj = (long)jobs.size();
#pragma omp parallel for schedule(dynamic, 32)
    for (long k = 0; k < nj; ++k) {
        const Job& j = jobs[k];
        const Encoding& en = in_.encs[j.occ.enc];
        const OrbitData& o = *in_.orbits[j.occ.enc];
        const Gpo& g = gpos[j.occ.enc];
        const long i = j.occ.idx;
        FibreChart f;
        f.sample = j.sample;
        f.vertex = j.vertex;
        f.xy = chart_invert(verts[j.vertex].chart.chart, samples_[j.sample].hit.u);
        f.depth_s = j.ds;
        f.depth_u = j.du;
        // seeds pass through the orbit itself, so x lies on its own fibres
        auto at = [&](long n) { return chart_invert(g.v[n].chart, o.hits[en.idx[n].hit].u); };
        try {
            if (j.ds > 0) {
                auto seed = AdmissibleCurve::constant(CurveKind::S, g.v[i + j.ds].ps(), at(i + j.ds)(1));
                f.s = stable_curve(g, i, j.ds, &seed).curve;
            } else
                f.s = AdmissibleCurve::constant(CurveKind::S, g.v[i].ps(), f.xy(1));
        } catch (const GraphReparamFailure&) {
            f.s = AdmissibleCurve::constant(CurveKind::S, g.v[i].ps(), f.xy(1));
            f.depth_s = 0;
        }
        try {
            if (j.du > 0) {
                auto seed = AdmissibleCurve::constant(CurveKind::U, g.v[i - j.du].pu(), at(i - j.du)(0));
                f.u = unstable_curve(g, i, j.du, &seed).curve;
            } else
                f.u = AdmissibleCurve::constant(CurveKind::U, g.v[i].pu(), f.xy(0));
        } catch (const GraphReparamFailure&) {
            f.u = AdmissibleCurve::constant(CurveKind::U, g.v[i].pu(), f.xy(0));
            f.depth_u = 0;
        }
        fib_[k] = std::move(f);
    }
    for (long k = 0; k < nj; ++k) {
        fib_index_[{fib_[k].sample, fib_[k].vertex}] = k;
        rect_[fib_[k].vertex].push_back(k);
    }
}

double MarkovCover::s_defect(long fx, long fy) const
{
    const FibreChart& x = fib_[fx];
    const FibreChart& y = fib_[fy];
    if (fx == fy)
        return 0;
    double d = std::fabs(y.xy(1) - x.s.eval(y.xy(0)));
    double tol = cfg_.tau * std::fabs(y.xy(0) - x.xy(0)) + 1e-300;
    return d / tol;
}

double MarkovCover::u_defect(long fx, long fy) const
{
    const FibreChart& x = fib_[fx];
    const FibreChart& y = fib_[fy];
    if (fx == fy)
        return 0;
    double d = std::fabs(y.xy(0) - x.u.eval(y.xy(1)));
    double tol = cfg_.tau * std::fabs(y.xy(1) - x.xy(1)) + 1e-300;
    return d / tol;
}

Eigen::Vector2d MarkovCover::bracket(long fx, long fy) const
{
    const FibreChart& x = fib_[fx];
    const FibreChart& y = fib_[fy];
    if (x.vertex != y.vertex)
        throw BracketFailure("bracket of samples in different rectangles");
    Eigen::Vector2d z(y.xy(0), x.xy(1));
    for (int it = 0; it < 100; ++it) {
        Eigen::Vector2d n;
        n(1) = x.s.eval(z(0));
        n(0) = y.u.eval(n(1));
        double step = (n - z).cwiseAbs().maxCoeff();
        z = n;
        if (step <= 1e-15 * std::max(z.cwiseAbs().maxCoeff(), 1e-300))
            return z;
    }
    double res = std::fabs(z(1) - x.s.eval(z(0))) + std::fabs(z(0) - y.u.eval(z(1)));
    if (res > 1e-12 * std::max(z.cwiseAbs().maxCoeff(), 1e-300))
        throw BracketFailure("bracket iteration did not converge");
    return z;
}

PointM MarkovCover::bracket_point(long fx, long fy) const
{
    const auto& v = in_.a->vertices()[fib_[fx].vertex];
    return chart_apply(v.chart.chart, bracket(fx, fy));
}

void MarkovCover::build_I()
{
    const double rho = in_.S->rho();
    std::vector<std::set<long>> I(rect_.size());
    for (long v = 0; v < (long)rect_.size(); ++v)
        if (!rect_[v].empty())
            I[v].insert(v);
    auto link = [&](const Sample& a, const Sample& b) {
        for (long v : a.Z)
            for (long w : b.Z) {
                I[v].insert(w);
                I[w].insert(v);
            }
    };
    for (const auto& s : samples_) {
        link(s, s);
        f128 t = 0;
        const Sample* cur = &s;
        while (cur->next >= 0) {
            t += cur->t_next;
            if (t > (f128)rho)
                break;
            cur = &samples_[cur->next];
            link(s, *cur);
        }
    }
    I_.resize(rect_.size());
    for (size_t v = 0; v < I.size(); ++v)
        I_[v].assign(I[v].begin(), I[v].end());
}

namespace {

using P2 = Eigen::Vector2d;

double cross(const P2& a, const P2& b) { return a(0) * b(1) - a(1) * b(0); }

bool inside(const std::vector<P2>& poly, const P2& p)
{
    int pos = 0, neg = 0;
    for (size_t i = 0; i < poly.size(); ++i) {
        double c = cross(poly[(i + 1) % poly.size()] - poly[i], p - poly[i]);
        pos += c >= 0;
        neg += c <= 0;
    }
    return pos == (int)poly.size() || neg == (int)poly.size();
}

bool seg_cross(const P2& a, const P2& b, const P2& c, const P2& d)
{
    double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
    return ((d1 >= 0) != (d2 >= 0) || d1 == 0 || d2 == 0) && ((d3 >= 0) != (d4 >= 0) || d3 == 0 || d4 == 0);
}

bool polyline_meets(const std::vector<P2>& line, const std::vector<P2>& poly)
{
    for (const auto& p : line)
        if (inside(poly, p))
            return true;
    for (size_t i = 0; i + 1 < line.size(); ++i)
        for (size_t k = 0; k < poly.size(); ++k)
            if (seg_cross(line[i], line[i + 1], poly[k], poly[(k + 1) % poly.size()]))
                return true;
    return false;
}

} // namespace

void MarkovCover::build_E()
{
    const Sections& S = *in_.S;
    const auto& verts = in_.a->vertices();
    const double rho = S.rho();
    const double w = cfg_.window;
    // projection of the enclosure box of Z(b) to the chart of a
    std::map<std::pair<long, long>, std::vector<P2>> quads;
    for (long a = 0; a < (long)I_.size(); ++a)
        for (long b : I_[a]) {
            if (b == a)
                continue;
            const PesinChart& cb = verts[b].chart.chart;
            const PesinChart& ca = verts[a].chart.chart;
            const Disc& da = S.disc_of(ca.hit);
            double r = w * verts[b].chart.pmin();
            std::vector<P2> q;
            try {
                for (auto [sx, sy] : {std::pair{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}) {
                    PointM pt = chart_apply(cb, P2(sx * r, sy * r));
                    PointM pr = S.project_q(da, pt, rho);
                    q.push_back(chart_invert(ca, pr.u));
                }
            } catch (const std::exception&) {
                q.clear();
            }
            quads[{a, b}] = q;
        }
    esig_.assign(fib_.size(), "");
    const long nf = (long)fib_.size();
#pragma omp parallel for schedule(dynamic, 64)
    for (long f = 0; f < nf; ++f) {
        const FibreChart& x = fib_[f];
        const long v = x.vertex;
        const double r = w * verts[v].chart.pmin();
        const int K = 16;
        std::vector<P2> ls, lu;
        for (int i = 0; i <= K; ++i) {
            double t = -r + 2 * r * i / K;
            ls.push_back(P2(t, x.s.eval(t)));
            lu.push_back(P2(x.u.eval(t), t));
        }
        std::string sig;
        for (long b : I_[v]) {
            if (b == v) {
                sig += "11";
                continue;
            }
            const auto& q = quads.at({v, b});
            if (q.empty()) {
                sig += "00";
                continue;
            }
            sig += polyline_meets(ls, q) ? '1' : '0';
            sig += polyline_meets(lu, q) ? '1' : '0';
        }
        esig_[f] = sig;
    }
}

long MarkovCover::E_count(long v) const
{
    std::set<std::string> e;
    for (long f : rect_[v])
        e.insert(esig_[f]);
    return (long)e.size();
}

long MarkovCover::dichotomy_violations() const
{
    long bad = 0;
    for (const auto& r : rect_) {
        if (r.size() < 2 || r.size() > 400)
            continue;
        const size_t n = r.size();
        for (int kind = 0; kind < 2; ++kind) {
            std::vector<std::vector<char>> on(n, std::vector<char>(n));
            for (size_t i = 0; i < n; ++i)
                for (size_t j = 0; j < n; ++j)
                    on[i][j] = kind == 0 ? on_s(r[i], r[j]) : on_u(r[i], r[j]);
            for (size_t i = 0; i < n; ++i)
                for (size_t j = i + 1; j < n; ++j) {
                    bool share = false;
                    for (size_t k = 0; k < n && !share; ++k)
                        share = on[i][k] && on[j][k];
                    if (share && on[i] != on[j])
                        ++bad;
                }
        }
    }
    return bad;
}

// ---- refinement

Partition refine(const MarkovCover& c, int N)
{
    Partition p;
    p.N = N;
    const auto& smp = c.samples();
    p.cls.assign(smp.size(), -1);
    std::map<std::string, long> ids;
    for (long s = 0; s < (long)smp.size(); ++s) {
        // H^k for |k| <= N
        std::vector<long> orbit(2 * N + 1, -1);
        orbit[N] = s;
        bool ok = true;
        for (int k = 1; k <= N && ok; ++k) {
            orbit[N + k] = smp[orbit[N + k - 1]].next;
            ok = orbit[N + k] >= 0;
        }
        for (int k = 1; k <= N && ok; ++k) {
            orbit[N - k] = smp[orbit[N - k + 1]].prev;
            ok = orbit[N - k] >= 0;
        }
        if (!ok) {
            ++p.boundary;
            continue;
        }
        std::ostringstream sig;
        for (long t : orbit) {
            sig << '|';
            for (long v : smp[t].Z)
                sig << v << ':' << c.E(c.fibre_id(t, v)) << ',';
        }
        auto [it, fresh] = ids.try_emplace(sig.str(), (long)p.classes.size());
        if (fresh) {
            p.classes.push_back({});
            p.Z.push_back(smp[s].Z);
        }
        p.classes[it->second].push_back(s);
        p.cls[s] = it->second;
    }
    for (long r = 0; r < p.size(); ++r)
        p.G.add_vertex("R" + std::to_string(r));
    for (long s = 0; s < (long)smp.size(); ++s) {
        long n = smp[s].next;
        if (p.cls[s] >= 0 && n >= 0 && p.cls[n] >= 0 && !p.G.has_edge((int)p.cls[s], (int)p.cls[n]))
            p.G.add_edge((int)p.cls[s], (int)p.cls[n]);
    }
    return p;
}

// ---- Markov property

MarkovReport markov_check(const MarkovCover& c, const Partition& p)
{
    MarkovReport rep;
    const auto& smp = c.samples();
    const auto& verts = c.alphabet().vertices();
    const Sections& S = c.sections();
    for (long s = 0; s < (long)smp.size(); ++s)
        if (smp[s].next >= 0) {
            Hit h = holonomy(S, smp[s].hit, +1).target;
            if (!same_hit(h, smp[smp[s].next].hit))
                ++rep.holonomy_mismatch;
        }
    auto note = [&](double d, long x, long y, const char* kind) {
        rep.worst_defect = std::max(rep.worst_defect, d);
        if (d > 2) {
            ++rep.violations;
            if (rep.witnesses.size() < 20)
                rep.witnesses.push_back(std::string(kind) + " fibre of sample " + std::to_string(x) +
                                        " does not map into the fibre at sample " + std::to_string(y));
        } else if (d > 1)
            ++rep.flagged;
    };
    for (long r = 0; r < p.size(); ++r) {
        const auto& M = p.classes[r];
        const auto& Zr = p.Z[r];
        auto all_on = [&](long x, long y, bool s_kind) {
            for (long v : Zr) {
                long fx = c.fibre_id(x, v), fy = c.fibre_id(y, v);
                if (!(s_kind ? c.on_s(fx, fy) : c.on_u(fx, fy)))
                    return false;
            }
            return true;
        };
        auto defect = [&](long x, long y, bool s_kind, long cls) {
            double d = 0;
            for (long v : p.Z[cls]) {
                long fx = c.fibre_id(x, v), fy = c.fibre_id(y, v);
                d = std::max(d, s_kind ? c.s_defect(fx, fy) : c.u_defect(fx, fy));
            }
            return d;
        };
        for (long x : M)
            for (long y : M) {
                if (x == y)
                    continue;
                for (int kind = 0; kind < 2; ++kind) {
                    bool s_kind = kind == 0;
                    if (!all_on(x, y, s_kind))
                        continue;
                    long hx = s_kind ? smp[x].next : smp[x].prev;
                    long hy = s_kind ? smp[y].next : smp[y].prev;
                    if (hx < 0 || hy < 0 || p.cls[hx] < 0 || p.cls[hy] < 0)
                        continue;
                    (s_kind ? rep.pairs_s : rep.pairs_u)++;
                    ++rep.points;
                    if (p.cls[hy] != p.cls[hx]) {
                        ++rep.class_mismatch;
                        ++rep.violations;
                        if (rep.witnesses.size() < 20)
                            rep.witnesses.push_back("image of sample " + std::to_string(y) + " left the class of " +
                                                    std::to_string(hx));
                        continue;
                    }
                    note(defect(hx, hy, s_kind, p.cls[hx]), hx, hy, s_kind ? "s" : "u");
                    if (s_kind) {
                        // contraction along the s-fibre
                        std::vector<double> ld;
                        long a = x, b = y;
                        for (int n = 0; n < 30 && a >= 0 && b >= 0; ++n) {
                            double d = torus_dist(smp[a].hit.u, smp[b].hit.u);
                            if (d <= 0)
                                break;
                            ld.push_back(std::log(d));
                            a = smp[a].next;
                            b = smp[b].next;
                        }
                        if (ld.size() >= 6) {
                            double n = (double)ld.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
                            for (size_t i = 0; i < ld.size(); ++i) {
                                sx += (double)i;
                                sy += ld[i];
                                sxx += (double)i * (double)i;
                                sxy += (double)i * ld[i];
                            }
                            double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
                            ++rep.hyperbolic_pairs;
                            rep.worst_rate = std::max(rep.worst_rate, slope);
                        }
                    }
                }
            }
        // product structure on a bounded number of pairs
        const long v = Zr.front();
        const double win = c.config().window * verts[v].chart.pmin();
        long done = 0;
        for (size_t i = 0; i < M.size() && done < c.config().max_bracket_pairs; ++i)
            for (size_t j = 0; j < M.size() && done < c.config().max_bracket_pairs; ++j, ++done) {
                long fx = c.fibre_id(M[i], v), fy = c.fibre_id(M[j], v);
                ++rep.brackets;
                Eigen::Vector2d z;
                try {
                    z = c.bracket(fx, fy);
                } catch (const BracketFailure&) {
                    ++rep.bracket_law_failures;
                    continue;
                }
                const auto& X = c.fibre(fx);
                double scale = std::max((X.xy - c.fibre(fy).xy).cwiseAbs().maxCoeff(), 1e-300);
                if (i == j && (z - X.xy).cwiseAbs().maxCoeff() > 1e-9 * (X.xy.cwiseAbs().maxCoeff() + win))
                    ++rep.bracket_law_failures;
                bool on_sample = false;
                for (long m : M)
                    if ((c.fibre(c.fibre_id(m, v)).xy - z).cwiseAbs().maxCoeff() <= c.config().tau * scale) {
                        on_sample = true;
                        break;
                    }
                rep.brackets_on_samples += on_sample;
                rep.brackets_in_window += z.cwiseAbs().maxCoeff() <= win;
            }
    }
    return rep;
}

// ---- second coding

static std::vector<long> path_of(const MarkovCover& c, long s, int n)
{
    // H^k s for k in [-n, n], -1 where unsampled
    const auto& smp = c.samples();
    std::vector<long> out(2 * n + 1, -1);
    out[n] = s;
    for (int k = 1; k <= n && out[n + k - 1] >= 0; ++k)
        out[n + k] = smp[out[n + k - 1]].next;
    for (int k = 1; k <= n && out[n - k + 1] >= 0; ++k)
        out[n - k] = smp[out[n - k + 1]].prev;
    return out;
}

static bool companion_path(const MarkovCover& c, const Partition& p, const std::vector<int>& word,
                           std::vector<long>& verts)
{
    const Alphabet& a = c.alphabet();
    const size_t L = word.size();
    std::vector<std::vector<long>> cand(L), back(L);
    for (size_t k = 0; k < L; ++k)
        cand[k] = p.Z[word[k]];
    std::vector<std::vector<char>> ok(L);
    ok[0].assign(cand[0].size(), 1);
    back[0].assign(cand[0].size(), -1);
    for (size_t k = 1; k < L; ++k) {
        ok[k].assign(cand[k].size(), 0);
        back[k].assign(cand[k].size(), -1);
        for (size_t j = 0; j < cand[k].size(); ++j)
            for (size_t i = 0; i < cand[k - 1].size(); ++i)
                if (ok[k - 1][i] && a.has_edge(cand[k - 1][i], cand[k][j])) {
                    ok[k][j] = 1;
                    back[k][j] = (long)i;
                    break;
                }
    }
    long j = -1;
    for (size_t i = 0; i < cand[L - 1].size(); ++i)
        if (ok[L - 1][i]) {
            j = (long)i;
            break;
        }
    if (j < 0)
        return false;
    verts.assign(L, -1);
    for (long k = (long)L - 1; k >= 0; --k) {
        verts[k] = cand[k][j];
        j = back[k][j];
    }
    return true;
}

CylinderReport cylinder_check(const MarkovCover& c, const Partition& p, int n, long words, std::mt19937_64& rng)
{
    CylinderReport rep;
    if (p.size() == 0)
        return rep;
    const auto& smp = c.samples();
    const auto& verts = c.alphabet().vertices();
    std::uniform_int_distribution<long> pick(0, p.size() - 1);
    for (long w = 0; w < words; ++w) {
        std::vector<int> word{(int)pick(rng)};
        while ((int)word.size() < 2 * n + 1) {
            const auto& out = p.G.out(word.back());
            if (out.empty())
                break;
            std::uniform_int_distribution<size_t> d(0, out.size() - 1);
            word.push_back(out[d(rng)]);
        }
        if ((int)word.size() < 2 * n + 1) {
            --w; // dead end, draw again
            if (++rep.words > 100 * words)
                break;
            --rep.words;
            continue;
        }
        ++rep.words;
        bool realized = false;
        for (long s : p.classes[word[0]]) {
            long t = s;
            int k = 0;
            while (k < (int)word.size() && t >= 0 && p.cls[t] == word[k]) {
                t = smp[t].next;
                ++k;
            }
            if (k == (int)word.size()) {
                realized = true;
                break;
            }
        }
        if (realized) {
            ++rep.realized;
            continue;
        }
        std::vector<long> vs;
        bool shadowed = false;
        if (companion_path(c, p, word, vs)) {
            std::vector<DoubleChart> ch;
            for (long v : vs)
                ch.push_back(verts[v].chart);
            try {
                Gpo g = make_gpo(c.sections(), std::move(ch), n);
                auto sh = shadow(c.sections(), g, n, n);
                shadowed = sh.in_small_window;
            } catch (const std::exception&) {
                shadowed = false;
            }
        }
        if (shadowed)
            ++rep.companion;
        else
            ++rep.empty;
    }
    return rep;
}

static bool occurrence_window(const MarkovCover& c, long s, int n, Occurrence& out)
{
    for (const auto& o : c.sample(s).occ) {
        long sz = c.input().encs[o.enc].size();
        if (o.idx - n >= 0 && o.idx + n < sz) {
            out = o;
            return true;
        }
    }
    return false;
}

static double box_diameter(const Gpo& g, long at, int n, const Eigen::Matrix2d& C0)
{
    // strips |a . d| <= b with d the chart difference at v[at]
    std::vector<Eigen::RowVector2d> A;
    std::vector<double> B;
    Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
    auto add = [&](const Eigen::Matrix2d& M, double w) {
        for (int r = 0; r < 2; ++r) {
            A.push_back(M.row(r));
            B.push_back(2 * w);
        }
    };
    add(P, g.v[at].pmin());
    for (int k = 1; k <= n; ++k) {
        P = g.steps[at + k - 1].M * P;
        add(P, g.v[at + k].pmin());
    }
    P.setIdentity();
    for (int k = 1; k <= n; ++k) {
        P = P * g.steps[at - k].M.inverse();
        add(P, g.v[at - k].pmin());
    }
    double best = 0;
    const size_t m = A.size();
    for (size_t i = 0; i < m; ++i)
        for (size_t j = i + 1; j < m; ++j)
            for (int si = -1; si <= 1; si += 2)
                for (int sj = -1; sj <= 1; sj += 2) {
                    Eigen::Matrix2d L;
                    L.row(0) = A[i];
                    L.row(1) = A[j];
                    double det = L.determinant();
                    if (std::fabs(det) <= 1e-14 * L.cwiseAbs().maxCoeff() * L.cwiseAbs().maxCoeff())
                        continue;
                    Eigen::Vector2d d = L.inverse() * Eigen::Vector2d(si * B[i], sj * B[j]);
                    bool feas = true;
                    for (size_t k = 0; k < m && feas; ++k)
                        feas = std::fabs(A[k] * d) <= B[k] * (1 + 1e-9);
                    if (feas)
                        best = std::max(best, (C0 * d).norm());
                }
    return best;
}

double cylinder_diameter(const MarkovCover& c, long sample, int n)
{
    Occurrence o;
    if (!occurrence_window(c, sample, n, o))
        return -1;
    const Encoding& e = c.input().encs[o.enc];
    const auto& verts = c.alphabet().vertices();
    std::vector<DoubleChart> ch;
    for (long k = o.idx - n; k <= o.idx + n; ++k)
        ch.push_back(verts[e.vertex[k]].chart);
    Gpo g = make_gpo(c.sections(), std::move(ch), n);
    return box_diameter(g, n, n, g.v[n].chart.C);
}

static void linfit(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& r2)
{
    double n = (double)x.size(), mx = 0, my = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    slope = sxy / sxx;
    r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1;
}

DiameterFit diameter_fit(const MarkovCover& c, const Partition& p, int lo, int hi, long words, std::mt19937_64& rng)
{
    DiameterFit fit;
    std::vector<long> pool;
    for (long s = 0; s < (long)p.cls.size(); ++s) {
        Occurrence o;
        if (p.cls[s] >= 0 && occurrence_window(c, s, hi, o))
            pool.push_back(s);
    }
    if (pool.empty())
        return fit;
    std::shuffle(pool.begin(), pool.end(), rng);
    if ((long)pool.size() > words)
        pool.resize(words);
    for (int n = lo; n <= hi; ++n)
        fit.depth.push_back(n);
    fit.mean_log_diam.assign(fit.depth.size(), 0);
    const auto& verts = c.alphabet().vertices();
    for (long s : pool) {
        std::vector<double> xs, ys;
        for (size_t i = 0; i < fit.depth.size(); ++i) {
            double d = cylinder_diameter(c, s, fit.depth[i]);
            xs.push_back(fit.depth[i]);
            ys.push_back(std::log(d));
            fit.mean_log_diam[i] += ys.back();
        }
        double sl, r2;
        linfit(xs, ys, sl, r2);
        fit.worst_word_r2 = std::min(fit.worst_word_r2, r2);
        // pi hat of the sampled path is the shadow of its companion gpo
        Occurrence o;
        occurrence_window(c, s, hi, o);
        const Encoding& e = c.input().encs[o.enc];
        std::vector<DoubleChart> ch;
        for (long k = o.idx - hi; k <= o.idx + hi; ++k)
            ch.push_back(verts[e.vertex[k]].chart);
        try {
            Gpo g = make_gpo(c.sections(), std::move(ch), hi);
            auto sh = shadow(c.sections(), g, hi, hi);
            fit.pi_hat_err = std::max(fit.pi_hat_err, torus_dist(sh.point.u, c.sample(s).hit.u));
        } catch (const std::exception&) {
            fit.pi_hat_err = 1;
        }
        ++fit.words;
    }
    std::vector<double> xs;
    for (size_t i = 0; i < fit.depth.size(); ++i) {
        fit.mean_log_diam[i] /= (double)fit.words;
        xs.push_back(fit.depth[i]);
    }
    double sl;
    linfit(xs, fit.mean_log_diam, sl, fit.r2);
    fit.theta = std::exp(sl);
    return fit;
}

RoofReport roof_check(const MarkovCover& c, const Partition& p)
{
    RoofReport rep;
    const auto& smp = c.samples();
    const Sections& S = c.sections();
    for (long s = 0; s < (long)smp.size(); ++s) {
        if (p.cls[s] < 0 || smp[s].next < 0)
            continue;
        double r = (double)smp[s].t_next;
        ++rep.checked;
        rep.min = std::min(rep.min, r);
        rep.max = std::max(rep.max, r);
        PointM y = flow(S.model(), S.point(smp[s].hit), r);
        PointM z = S.point(smp[smp[s].next].hit);
        double dh = std::fabs(y.h - z.h);
        rep.conjugacy_err = std::max(rep.conjugacy_err, torus_dist(y.u, z.u) + std::min(dh, std::fabs(dh - S.model().roof(z.u))));
    }
    return rep;
}

// ---- affiliation

bool Affiliation::affiliated(long r, long s) const { return std::binary_search(adj[r].begin(), adj[r].end(), s); }

Affiliation affiliation(const MarkovCover& c, const Partition& p)
{
    Affiliation af;
    std::unordered_map<long, std::vector<long>> by_z;
    for (long r = 0; r < p.size(); ++r)
        for (long v : p.Z[r])
            by_z[v].push_back(r);
    af.adj.resize(p.size());
    af.N.assign(p.size(), 0);
    for (long r = 0; r < p.size(); ++r) {
        std::set<std::pair<long, long>> A;
        for (long v : p.Z[r])
            for (long w : c.I(v)) {
                auto it = by_z.find(w);
                if (it == by_z.end())
                    continue;
                for (long s : it->second)
                    A.insert({s, w});
            }
        af.N[r] = (long)A.size();
        for (auto [s, w] : A)
            af.adj[r].push_back(s);
        std::sort(af.adj[r].begin(), af.adj[r].end());
        af.adj[r].erase(std::unique(af.adj[r].begin(), af.adj[r].end()), af.adj[r].end());
    }
    for (long r = 0; r < p.size() && af.symmetric; ++r)
        for (long s : af.adj[r])
            if (!af.affiliated(s, r)) {
                af.symmetric = false;
                break;
            }
    return af;
}

static long most_frequent(const std::vector<long>& v)
{
    std::map<long, long> cnt;
    for (long x : v)
        if (x >= 0)
            ++cnt[x];
    long best = -1, bc = 0;
    for (auto [k, n] : cnt)
        if (n > bc) {
            best = k;
            bc = n;
        }
    return best;
}

PreimageResult preimage_search(const MarkovCover& c, const Partition& p, const Affiliation& af, long sample, int n)
{
    PreimageResult res;
    res.sample = sample;
    auto path = path_of(c, sample, n);
    for (long t : path)
        if (t < 0 || p.cls[t] < 0)
            throw std::invalid_argument("preimage search needs n classified returns both ways");
    const auto& smp = c.samples();
    std::vector<long> fut, past;
    for (int k = 1; k <= n; ++k) {
        fut.push_back(p.cls[path[n + k]]);
        past.push_back(p.cls[path[n - k]]);
    }
    res.R = most_frequent(fut);
    res.S = most_frequent(past);
    res.bound = af.N[res.R] * af.N[res.S];
    // candidates: affiliated to R_k and sharing a rectangle with H^k x
    std::vector<std::vector<long>> cand(2 * n + 1);
    for (int k = 0; k <= 2 * n; ++k) {
        const auto& Zx = smp[path[k]].Z;
        for (long s : af.adj[p.cls[path[k]]]) {
            bool share = false;
            for (long v : p.Z[s])
                share |= std::binary_search(Zx.begin(), Zx.end(), v);
            if (share)
                cand[k].push_back(s);
        }
    }
    // admissible words over [-d, d] by dynamic programming
    for (int d = 0; d <= n; ++d) {
        std::vector<long> cnt(cand[n - d].size(), 1);
        for (int k = n - d + 1; k <= n + d; ++k) {
            std::vector<long> nc(cand[k].size(), 0);
            for (size_t j = 0; j < cand[k].size(); ++j)
                for (size_t i = 0; i < cand[k - 1].size(); ++i)
                    if (p.G.has_edge((int)cand[k - 1][i], (int)cand[k][j]))
                        nc[j] += cnt[i];
            cnt = nc;
        }
        res.counts_by_depth.push_back(std::accumulate(cnt.begin(), cnt.end(), 0L));
    }
    res.count = res.counts_by_depth.back();
    return res;
}

BowenReport bowen_check(const MarkovCover& c, const Partition& p, const Affiliation& af, int min_window)
{
    BowenReport rep;
    const auto& smp = c.samples();
    const double gamma = 3 * c.sections().rho();
    for (long s = 0; s < (long)smp.size(); ++s) {
        long q = smp[s].prev;
        if (p.cls[s] < 0 || q < 0 || p.cls[q] < 0)
            continue;
        ++rep.coincident;
        rep.coincident_ok += af.affiliated(p.cls[s], p.cls[q]);
    }
    const int cap = 400;
    // affiliated at every common step; len is the shorter of the two sides
    auto everywhere = [&](long x, long y, int& len) {
        int side[2] = {0, 0};
        for (int dir = 0; dir < 2; ++dir) {
            long a = x, b = y;
            for (int k = 0; k < cap; ++k) {
                a = dir == 0 ? smp[a].next : smp[a].prev;
                b = dir == 0 ? smp[b].next : smp[b].prev;
                if (a < 0 || b < 0 || p.cls[a] < 0 || p.cls[b] < 0)
                    break;
                if (!af.affiliated(p.cls[a], p.cls[b]))
                    return false;
                ++side[dir];
            }
        }
        len = std::min(side[0], side[1]);
        return true;
    };
    for (long r = 0; r < p.size(); ++r) {
        const auto& M = p.classes[r];
        for (long sidx : af.adj[r]) {
            const auto& MS = p.classes[sidx];
            // bounded sampling of pairs per class pair
            for (size_t i = 0; i < M.size() && i < 8; ++i)
                for (size_t j = 0; j < MS.size() && j < 8; ++j) {
                    long x = M[i], y = MS[j];
                    if (x == y)
                        continue;
                    int len = 0;
                    if (!everywhere(x, y, len) || len < min_window)
                        continue;
                    ++rep.pairs;
                    // orbit matching: y = H^j x within a few returns either way
                    double shift = 1e300;
                    f128 t = 0;
                    long q = x;
                    for (int k = 1; k <= 8 && q >= 0; ++k) {
                        t += smp[q].t_next;
                        q = smp[q].next;
                        if (q == y) {
                            shift = (double)t;
                            break;
                        }
                    }
                    t = 0;
                    q = x;
                    for (int k = 1; k <= 8; ++k) {
                        long b = smp[q].prev;
                        if (b < 0)
                            break;
                        t += smp[b].t_next;
                        q = b;
                        if (q == y) {
                            shift = std::min(shift, (double)t);
                            break;
                        }
                    }
                    if (shift < gamma) {
                        ++rep.recovered;
                        rep.max_shift = std::max(rep.max_shift, shift);
                    } else if (rep.failures.size() < 20)
                        rep.failures.push_back("samples " + std::to_string(x) + " and " + std::to_string(y) +
                                               " are affiliated everywhere but not matched within 3 rho");
                }
        }
    }
    return rep;
}

LiftResult lift_hyperbolic_set(const MarkovCover& c, const Partition& p, const std::vector<long>& samples)
{
    (void)c;
    LiftResult res;
    res.samples = (long)samples.size();
    std::set<long> want;
    for (long s : samples)
        if (p.cls[s] >= 0)
            want.insert(p.cls[s]);
    if (want.empty())
        return res;
    auto comps = irreducible_components(p.G);
    for (const auto& comp : comps) {
        std::set<long> cs(comp.begin(), comp.end());
        if (!cs.count(*want.begin()))
            continue;
        res.component.assign(cs.begin(), cs.end());
        res.transitive = std::includes(cs.begin(), cs.end(), want.begin(), want.end());
        for (long s : samples)
            res.covered += p.cls[s] >= 0 && cs.count(p.cls[s]);
    }
    return res;
}

std::string partition_csv(const MarkovCover& c, const Partition& p)
{
    std::ostringstream os;
    os << "class,size,rectangles,first_sample,u1,u2,level,tile\n";
    for (long r = 0; r < p.size(); ++r) {
        const auto& s = c.sample(p.classes[r][0]);
        os << r << "," << p.classes[r].size() << ",";
        for (size_t i = 0; i < p.Z[r].size(); ++i)
            os << (i ? " " : "") << p.Z[r][i];
        char buf[128];
        std::snprintf(buf, sizeof buf, ",%ld,%.17g,%.17g,%d,%d\n", p.classes[r][0], s.hit.u.a.unit(), s.hit.u.b.unit(),
                      s.hit.level, s.hit.tile);
        os << buf;
    }
    return os.str();
}

} // namespace hyp
