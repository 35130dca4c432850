#include "hypcode/sections.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hyp {

static double wrap_half(double d)
{
    d -= std::floor(d);
    return d >= 0.5 ? d - 1.0 : d;
}

SectionConfig default_sections(RoofKind k)
{
    SectionConfig c;
    if (k == RoofKind::Const)
        return c;
    // the roof varies by up to |grad r| * tile width inside a tile, so use thin tiles across the gradient
    c.n1 = k == RoofKind::Cos ? 20 : 48;
    c.n2 = k == RoofKind::Cos ? 4 : 48;
    c.base = 0.075;
    c.margin = 0.0754;
    c.color_step = 0.002;
    c.gap = 0.17;
    return c;
}

double Disc::radius() const { return std::sqrt(a1 * a1 + a2 * a2); }

std::pair<double, double> Sections::roof_range(double lo1, double hi1, double lo2, double hi2) const
{
    const auto& mc = m_->config();
    if (mc.roof == RoofKind::Const)
        return {1.0, 1.0};
    if (mc.roof == RoofKind::Cos) {
        // extrema of cos(2 pi u1) on [lo1,hi1]: interior critical points or the ends
        double c0 = std::cos(2 * M_PI * lo1), c1 = std::cos(2 * M_PI * hi1);
        double lo = std::min(c0, c1), hi = std::max(c0, c1);
        if (std::ceil(lo1 - 0.5) + 0.5 <= hi1)
            lo = -1;
        if (std::ceil(lo1) <= hi1)
            hi = 1;
        return {1.0 + mc.delta * lo, 1.0 + mc.delta * hi};
    }
    // sampled extrema widened by a Lipschitz allowance
    const int n = 32;
    double lo = 1e300, hi = -1e300, lip = 0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            double u1 = lo1 + (hi1 - lo1) * i / n, u2 = lo2 + (hi2 - lo2) * j / n;
            double r = m_->roof_at(u1, u2);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
            Torus2 u{Fix::from_double(u1), Fix::from_double(u2)};
            lip = std::max(lip, m_->roof_grad(u).norm());
        }
    double h = 0.5 * std::hypot(hi1 - lo1, hi2 - lo2) / n;
    return {std::max(m_->roof_min(), lo - 1.5 * lip * h), std::min(m_->roof_max(), hi + 1.5 * lip * h)};
}

Sections::Sections(const ModelFlow& m, const SectionConfig& cfg, double rho) : m_(&m), cfg_(cfg), rho_(rho)
{
    if (cfg.n1 < 1 || cfg.n2 < 1 || cfg.gap <= 0 || cfg.hat_scale < 1)
        throw std::invalid_argument("bad section layout");
    const double w1 = 1.0 / cfg.n1, w2 = 1.0 / cfg.n2;
    const int nt = tiles();
    levels_.resize(nt);
    first_.resize(nt);
    int id = 0;
    for (int t = 0; t < nt; ++t) {
        int i = t % cfg.n1, j = t / cfg.n1;
        double c1 = cfg.offset + (i + 0.5) * w1, c2 = cfg.offset + (j + 0.5) * w2;
        double h1 = 0.5 * w1 * cfg.hat_scale, h2 = 0.5 * w2 * cfg.hat_scale;
        double rmin = roof_range(c1 - h1, c1 + h1, c2 - h2, c2 + h2).first;
        double base = cfg.base + color(t) * cfg.color_step;
        double top = rmin - cfg.margin + color(t) * cfg.color_step;
        if (!(top > base))
            throw std::invalid_argument("section levels do not fit under the roof");
        int steps = std::max(1, (int)std::lround((top - base) / cfg.gap));
        auto& L = levels_[t];
        for (int k = 0; k <= steps; ++k)
            L.push_back(k == steps ? top : base + (top - base) * k / steps);
        if (cfg.drop_level >= 0 && cfg.drop_level < (int)L.size() && L.size() > 1)
            L.erase(L.begin() + cfg.drop_level);
    }
    separate_levels();
    for (int t = 0; t < nt; ++t) {
        const auto& L = levels_[t];
        int i = t % cfg.n1, j = t / cfg.n1;
        double c1 = cfg.offset + (i + 0.5) * w1, c2 = cfg.offset + (j + 0.5) * w2;
        double h1 = 0.5 * w1 * cfg.hat_scale, h2 = 0.5 * w2 * cfg.hat_scale;
        first_[t] = id;
        for (int k = 0; k < (int)L.size(); ++k) {
            Disc d;
            d.id = id++;
            d.tile = t;
            d.level = k;
            d.c1 = c1 - std::floor(c1);
            d.c2 = c2 - std::floor(c2);
            d.a1 = 0.5 * w1;
            d.a2 = 0.5 * w2;
            d.height = L[k];
            discs_.push_back(d);
            d.a1 = h1;
            d.a2 = h2;
            hat_.push_back(d);
        }
    }

    // return time bounds: spacing inside a tile, and the gap across the roof
    rmin_ = 1e300;
    rmax_ = 0;
    double base_lo = 1e300, base_hi = -1e300;
    for (int t = 0; t < nt; ++t) {
        base_lo = std::min(base_lo, levels_[t].front());
        base_hi = std::max(base_hi, levels_[t].front());
        for (size_t k = 1; k < levels_[t].size(); ++k) {
            double g = levels_[t][k] - levels_[t][k - 1];
            rmin_ = std::min(rmin_, g);
            rmax_ = std::max(rmax_, g);
        }
    }
    for (int t = 0; t < nt; ++t) {
        const Disc& d = discs_[first_[t]];
        auto [lo, hi] = roof_range(d.c1 - d.a1, d.c1 + d.a1, d.c2 - d.a2, d.c2 + d.a2);
        double top = levels_[t].back();
        rmin_ = std::min(rmin_, lo - top + base_lo);
        rmax_ = std::max(rmax_, hi - top + base_hi);
    }
}

// nudge levels so that overlapping security discs never share a height
void Sections::separate_levels()
{
    const int nt = tiles();
    const double w1 = 1.0 / cfg_.n1, w2 = 1.0 / cfg_.n2, sep = cfg_.min_separation;
    auto overlap = [&](int a, int b) {
        int ia = a % cfg_.n1, ja = a / cfg_.n1, ib = b % cfg_.n1, jb = b / cfg_.n1;
        double d1 = std::fabs(wrap_half((ia - ib) * w1)), d2 = std::fabs(wrap_half((ja - jb) * w2));
        return d1 <= w1 * cfg_.hat_scale + 1e-12 && d2 <= w2 * cfg_.hat_scale + 1e-12;
    };
    for (int t = 1; t < nt; ++t) {
        std::vector<double> taken;
        for (int o = 0; o < t; ++o)
            if (overlap(t, o))
                taken.insert(taken.end(), levels_[o].begin(), levels_[o].end());
        for (auto& h : levels_[t]) {
            auto clash = [&](double v) {
                for (double x : taken)
                    if (std::fabs(x - v) < sep)
                        return true;
                return false;
            };
            double h0 = h;
            for (int j = 1; clash(h) && j < 64; ++j)
                h = h0 + (j % 2 ? 1 : -1) * ((j + 1) / 2) * sep * 0.5;
            if (clash(h))
                throw std::runtime_error("could not separate section levels");
        }
    }
}

int Sections::color(int tile) const
{
    int i = tile % cfg_.n1, j = tile / cfg_.n1;
    return (i % 2) + 2 * (j % 2);
}

int Sections::tile_of(const Torus2& u) const
{
    double x = u.a.unit() - cfg_.offset, y = u.b.unit() - cfg_.offset;
    x -= std::floor(x);
    y -= std::floor(y);
    int i = std::min(cfg_.n1 - 1, (int)(x * cfg_.n1));
    int j = std::min(cfg_.n2 - 1, (int)(y * cfg_.n2));
    return i + cfg_.n1 * j;
}

void Sections::tile_coords(int tile, const Torus2& u, double& d1, double& d2) const
{
    const Disc& d = discs_[first_[tile]];
    d1 = wrap_half(u.a.unit() - d.c1);
    d2 = wrap_half(u.b.unit() - d.c2);
}

bool Sections::in_box(const Disc& d, const Torus2& u, double slack) const
{
    double d1 = wrap_half(u.a.unit() - d.c1), d2 = wrap_half(u.b.unit() - d.c2);
    return std::fabs(d1) <= d.a1 + slack && std::fabs(d2) <= d.a2 + slack;
}

Hit Sections::hit_of(const Torus2& u, int level) const
{
    Hit h{u, tile_of(u), level};
    if (level < 0 || level >= (int)levels_[h.tile].size())
        throw std::out_of_range("no such level");
    return h;
}

Hit Sections::next(const Hit& h, double* t, int* k) const
{
    const auto& L = levels_[h.tile];
    if (h.level + 1 < (int)L.size()) {
        if (t)
            *t = L[h.level + 1] - L[h.level];
        if (k)
            *k = 0;
        return {h.u, h.tile, h.level + 1};
    }
    Hit n;
    n.u = apply(m_->A(), h.u);
    n.tile = tile_of(n.u);
    n.level = 0;
    if (t)
        *t = m_->roof(h.u) - L[h.level] + levels_[n.tile][0];
    if (k)
        *k = 1;
    return n;
}

Hit Sections::prev(const Hit& h, double* t, int* k) const
{
    const auto& L = levels_[h.tile];
    if (h.level > 0) {
        if (t)
            *t = L[h.level] - L[h.level - 1];
        if (k)
            *k = 0;
        return {h.u, h.tile, h.level - 1};
    }
    Hit p;
    p.u = apply(m_->Ainv(), h.u);
    p.tile = tile_of(p.u);
    p.level = (int)levels_[p.tile].size() - 1;
    if (t)
        *t = L[0] + m_->roof(p.u) - levels_[p.tile].back();
    if (k)
        *k = 1;
    return p;
}

Hit Sections::first_hit(const PointM& x0, double* t) const
{
    PointM x = m_->normalize(x0);
    int T = tile_of(x.u);
    const auto& L = levels_[T];
    auto it = std::lower_bound(L.begin(), L.end(), x.h);
    if (it != L.end()) {
        if (t)
            *t = *it - x.h;
        return {x.u, T, (int)(it - L.begin())};
    }
    Hit n;
    n.u = apply(m_->A(), x.u);
    n.tile = tile_of(n.u);
    n.level = 0;
    if (t)
        *t = m_->roof(x.u) - x.h + levels_[n.tile][0];
    return n;
}

CoverReport Sections::check_cover(int gf, int gh) const
{
    CoverReport rep;
    // irrational shift keeps the grid off the tile edges
    const double s1 = 0.5 * (std::sqrt(5.0) - 1) / gf, s2 = (std::sqrt(2.0) - 1) / gf;
    for (int i = 0; i < gf; ++i)
        for (int j = 0; j < gf; ++j) {
            Torus2 u{Fix::from_double((i + s1) / gf), Fix::from_double((j + s2) / gf)};
            double r = m_->roof(u);
            int T = tile_of(u);
            const auto& L = levels_[T];
            for (int k = 0; k < gh; ++k) {
                double h = r * (k + 0.5) / gh;
                // time since the last hit
                auto it = std::upper_bound(L.begin(), L.end(), h);
                double back;
                if (it != L.begin()) {
                    back = h - *(it - 1);
                } else {
                    Torus2 p = apply(m_->Ainv(), u);
                    back = h + m_->roof(p) - levels_[tile_of(p)].back();
                }
                double fwd;
                first_hit(PointM{u, h}, &fwd);
                double worst = std::max(back, fwd);
                ++rep.samples;
                rep.max_time = std::max(rep.max_time, worst);
                if (!(back < rho_) || !(fwd < rho_)) {
                    char buf[160];
                    std::snprintf(buf, sizeof buf,
                                  "section misses the flow box: point (%.6f, %.6f, %.6f) is %.6f from the section",
                                  u.a.unit(), u.b.unit(), h, worst);
                    throw CoverageFailure(buf, PointM{u, h}, worst);
                }
            }
        }
    return rep;
}

OrderReport Sections::check_partial_order() const
{
    OrderReport rep;
    const double w = 2 * rho_;
    for (size_t i = 0; i < hat_.size(); ++i)
        for (size_t j = i + 1; j < hat_.size(); ++j) {
            const Disc &a = hat_[i], &b = hat_[j];
            ++rep.pairs;
            double d1 = std::fabs(wrap_half(a.c1 - b.c1)), d2 = std::fabs(wrap_half(a.c2 - b.c2));
            if (d1 > a.a1 + b.a1 || d2 > a.a2 + b.a2)
                continue;
            ++rep.overlapping;
            rep.min_separation = std::min(rep.min_separation, std::fabs(a.height - b.height));
        }
    // a two-way connection inside the window needs either equal heights or a loop through the roof
    rep.ok = rep.min_separation > 0 && 2 * w < m_->roof_min();
    return rep;
}

double Sections::project_t(const Disc& d, const PointM& x0, double window) const
{
    PointM x = m_->normalize(x0);
    double best = 1e300;
    if (in_box(d, x.u))
        best = d.height - x.h;
    Torus2 f = apply(m_->A(), x.u);
    if (in_box(d, f)) {
        double t = m_->roof(x.u) - x.h + d.height;
        if (std::fabs(t) < std::fabs(best))
            best = t;
    }
    Torus2 b = apply(m_->Ainv(), x.u);
    if (in_box(d, b)) {
        double t = -(x.h + m_->roof(b) - d.height);
        if (std::fabs(t) < std::fabs(best))
            best = t;
    }
    if (!(std::fabs(best) <= window))
        throw OutOfBox("point is not in the flow box of disc " + std::to_string(d.id));
    return best;
}

PointM Sections::project_q(const Disc& d, const PointM& x, double window) const
{
    double t = project_t(d, x, window);
    PointM y = m_->normalize(x);
    y.h += t;
    return m_->normalize(y);
}

std::string Sections::csv() const
{
    std::ostringstream os;
    os << "id,tile,level,c1,c2,half1,half2,height,radius\n";
    char buf[200];
    for (const auto& d : discs_) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", d.id, d.tile, d.level,
                      d.c1, d.c2, d.a1, d.a2, d.height, d.radius());
        os << buf;
    }
    return os.str();
}

Holonomy holonomy(const Sections& S, const Hit& x, int dir)
{
    Holonomy g;
    g.source = x;
    if (dir > 0)
        g.target = S.next(x, &g.time, &g.crossings);
    else {
        g.target = S.prev(x, &g.time, &g.crossings);
        g.time = -g.time;
        g.crossings = -g.crossings;
    }
    return g;
}

Torus2 holonomy_apply(const Sections& S, const Holonomy& g, const Torus2& y, double* t)
{
    const auto& m = S.model();
    double dh = S.height(g.target) - S.height(g.source);
    if (g.crossings == 0) {
        if (t)
            *t = dh;
        return y;
    }
    if (g.crossings > 0) {
        if (t)
            *t = dh + m.roof(y);
        return apply(m.A(), y);
    }
    Torus2 p = apply(m.Ainv(), y);
    if (t)
        *t = dh - m.roof(p);
    return p;
}

} // namespace hyp
