#include "hypcode/charts.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hyp {

PesinChart pesin_chart(const Nuh& nuh, const Sections& S, const Hit& x)
{
    PesinChart c;
    c.hit = x;
    c.base = S.point(x);
    c.par = nuh.params(c.base);
    c.C = c.par.C;
    c.Cinv = c.C.inverse();
    const Disc& d = S.hat_discs()[S.disc_id(x.tile, x.level)];
    double d1, d2;
    S.tile_coords(x.tile, x.u, d1, d2);
    double margin = std::min(d.a1 - std::fabs(d1), d.a2 - std::fabs(d2));
    double cn = c.C.cwiseAbs().rowwise().sum().maxCoeff();
    c.radius = std::min(kExpRadius, std::max(0.0, margin) / cn);
    return c;
}

PointM chart_apply(const PesinChart& c, const Eigen::Vector2d& v)
{
    if (std::max(std::fabs(v(0)), std::fabs(v(1))) > c.radius)
        throw DomainExceeded("chart argument outside the chart domain");
    Eigen::Vector2d w = c.C * v;
    return {add_offset(c.base.u, w(0), w(1)), c.base.h};
}

Eigen::Vector2d chart_invert(const PesinChart& c, const Torus2& y)
{
    double d1, d2;
    torus_diff(y, c.base.u, d1, d2);
    return c.Cinv * Eigen::Vector2d(d1, d2);
}

double chart_distance(const PesinChart& a, const PesinChart& b)
{
    double d = torus_dist(a.base.u, b.base.u) + std::fabs(a.base.h - b.base.h);
    return d + (a.C - b.C).norm();
}

bool overlap_test(const PesinChart& a, f128 log_eta1, const PesinChart& b, f128 log_eta2, double eps)
{
    f128 r = log_eta1 - log_eta2;
    if (r > eps || r < -eps)
        return false;
    double d = chart_distance(a, b);
    if (d == 0)
        return true;
    return logq((f128)d) < 4 * (log_eta1 + log_eta2);
}

double change_of_coords_defect(const PesinChart& a, const PesinChart& b, double eta, int grid)
{
    double worst = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            Eigen::Vector2d v(-eta + 2 * eta * i / (grid - 1), -eta + 2 * eta * j / (grid - 1));
            PointM p = chart_apply(b, v);
            Eigen::Vector2d w = chart_invert(a, p.u);
            worst = std::max(worst, (w - v).norm());
        }
    // affine map, so the derivative defect is constant
    Eigen::Matrix2d D = a.Cinv * b.C - Eigen::Matrix2d::Identity();
    return std::max(worst, D.norm());
}

Eigen::Vector2d ChartMapDecomp::node(int i, int j) const
{
    return {-window + 2 * window * i / (n - 1), -window + 2 * window * j / (n - 1)};
}

ChartMapDecomp chart_return_map(const Sections& S, const PesinChart& x, const PesinChart& target, int dir,
                                int grid, double holder_exp, double window)
{
    const auto& m = S.model();
    Holonomy g = holonomy(S, x.hit, dir);
    if (S.disc_id(g.target.tile, g.target.level) != S.disc_id(target.hit.tile, target.hit.level))
        throw std::invalid_argument("target chart is not on the holonomy target disc");
    ChartMapDecomp d;
    d.n = grid;
    d.holder_exp = holder_exp;
    d.window = window > 0 ? window : 10 * x.par.Q;
    d.time = g.time;
    Eigen::Matrix2d Ak = matrix_power(m, g.crossings);
    d.L = target.Cinv * Ak * x.C;
    d.A = d.L(0, 0);
    d.B = d.L(1, 1);
    d.F.resize(grid * grid);
    d.H.resize(grid * grid);
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            Eigen::Vector2d v = d.node(i, j);
            PointM y = chart_apply(x, v);
            Torus2 z = holonomy_apply(S, g, y.u);
            Eigen::Vector2d w = chart_invert(target, z);
            d.F[i * grid + j] = w;
            d.H[i * grid + j] = w - Eigen::Vector2d(d.A * v(0), d.B * v(1));
        }
    double h = 2 * d.window / (grid - 1);
    std::vector<Eigen::Matrix2d> dH(grid * grid);
    auto at = [&](int i, int j) { return d.H[i * grid + j]; };
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            int i0 = std::max(0, i - 1), i1 = std::min(grid - 1, i + 1);
            int j0 = std::max(0, j - 1), j1 = std::min(grid - 1, j + 1);
            Eigen::Matrix2d D;
            D.col(0) = (at(i1, j) - at(i0, j)) / (h * (i1 - i0));
            D.col(1) = (at(i, j1) - at(i, j0)) / (h * (j1 - j0));
            dH[i * grid + j] = D;
        }
    int c = grid / 2;
    d.H0 = at(c, c).norm();
    d.dH0 = dH[c * grid + c].norm();
    for (int k = 0; k < grid * grid; ++k) {
        d.H_sup = std::max(d.H_sup, d.H[k].norm());
        d.dH_sup = std::max(d.dH_sup, dH[k].norm());
    }
    for (int a = 0; a < grid * grid; ++a)
        for (int b = a + 1; b < grid * grid; ++b) {
            double dist = (d.node(a / grid, a % grid) - d.node(b / grid, b % grid)).norm();
            double q = (dH[a] - dH[b]).norm() / std::pow(dist, holder_exp);
            d.holder = std::max(d.holder, q);
        }
    return d;
}

static void enforce_bound(bool ok, bool enforce, const char* what, double v, double b)
{
    if (!ok && enforce)
        throw BoundViolation(std::string("chart map bound violated: ") + what, what, v, b);
}

DecompCheck check_return_bounds(const ChartMapDecomp& d, const ModelConfig& mc, bool enforce)
{
    DecompCheck r;
    r.rL = std::fabs(d.time);
    double lo = std::exp(-4 * mc.rho), hi = std::exp(4 * mc.rho);
    double contr = std::exp(-mc.chi * r.rL);
    double a = std::fabs(d.A), b = std::fabs(d.B);
    r.A_ok = lo < a && a < contr;
    r.B_ok = 1 / contr < b && b < hi;
    // H(0) and dH(0) vanish up to rounding
    double tol0 = 1e-9 * d.window, tol1 = 1e-8;
    r.H_ok = d.H0 <= tol0 && d.dH0 <= tol1 && d.norm_c1() < mc.eps;
    enforce_bound(r.A_ok, enforce, "A", a, contr);
    enforce_bound(r.B_ok, enforce, "B", b, 1 / contr);
    enforce_bound(r.H_ok, enforce, "H", d.norm_c1(), mc.eps);
    return r;
}

DecompCheck check_relaxed_bounds(const ChartMapDecomp& d, const ModelConfig& mc, double eta, bool enforce)
{
    DecompCheck r;
    r.rL = std::fabs(d.time);
    double lo = std::exp(-4 * mc.rho), hi = std::exp(4 * mc.rho);
    double contr = std::exp(-mc.chi * r.rL);
    double a = std::fabs(d.A), b = std::fabs(d.B);
    r.A_ok = lo < a && a < contr;
    r.B_ok = 1 / contr < b && b < hi;
    r.H_ok = d.H0 < mc.eps * eta && d.dH0 < mc.eps * std::pow(eta, mc.beta / 3) && d.norm_c1() < mc.eps;
    enforce_bound(r.A_ok, enforce, "A", a, contr);
    enforce_bound(r.B_ok, enforce, "B", b, 1 / contr);
    enforce_bound(r.H_ok, enforce, "H", d.norm_c1(), mc.eps);
    return r;
}

f128 holonomy_time_q(const Sections& S, const Holonomy& g, const Torus2& y)
{
    const auto& m = S.model();
    f128 dh = (f128)S.height(g.target) - (f128)S.height(g.source);
    if (g.crossings > 0)
        return dh + m.roof_q(y);
    if (g.crossings < 0)
        return dh - m.roof_q(apply(m.Ainv(), y));
    return dh;
}

TransitionTime transition_time(const Sections& S, const DoubleChart& v, const DoubleChart& w, int grid)
{
    TransitionTime tt;
    tt.grid = grid;
    f128 inf = std::numeric_limits<double>::infinity();
    tt.T_plus = inf;
    tt.T_minus = inf;
    Holonomy gp = holonomy(S, v.chart.hit, +1);
    Holonomy gm = holonomy(S, w.chart.hit, -1);
    double ev = v.pmin() / 20, ew = w.pmin() / 20;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            double si = grid > 1 ? -1 + 2.0 * i / (grid - 1) : 0, sj = grid > 1 ? -1 + 2.0 * j / (grid - 1) : 0;
            PointM a = chart_apply(v.chart, {ev * si, ev * sj});
            tt.T_plus = std::min(tt.T_plus, holonomy_time_q(S, gp, a.u));
            PointM b = chart_apply(w.chart, {ew * si, ew * sj});
            tt.T_minus = std::min(tt.T_minus, -holonomy_time_q(S, gm, b.u));
        }
    tt.T = std::min(tt.T_plus, tt.T_minus);
    double cell = grid > 1 ? 2.0 / (grid - 1) : 2.0;
    double lv = ev * cell * std::sqrt(0.5) * v.chart.C.norm();
    double lw = ew * cell * std::sqrt(0.5) * w.chart.C.norm();
    // the return time is 1-Lipschitz off the crossings and r-Lipschitz across them
    double lip = 1.0;
    const auto& m = S.model();
    if (!m.constant_roof())
        lip = std::max(1.0, 2 * M_PI * m.config().delta * std::max(std::fabs(m.A().m00) + std::fabs(m.A().m01),
                                                                    std::fabs(m.A().m10) + std::fabs(m.A().m11)));
    tt.lip_err = lip * std::max(lv, lw);
    return tt;
}

void gpo2_check(const DoubleChart& v, const DoubleChart& w, f128 T, double eps, EdgeReport& r)
{
    f128 e = eps;
    f128 lQx = logq(e * (f128)v.chart.par.Q);
    f128 lQy = logq(e * (f128)w.chart.par.Q);
    f128 ps = expq(v.log_ps), qu = expq(w.log_pu);
    f128 ma = std::min(e * T + w.log_ps, -e + lQx);
    f128 ha = std::min(e * T + w.log_ps, lQx);
    // equality cases carry f128 rounding from different summation orders
    const f128 tol = 1e-30Q;
    r.a_lo = -e * ps + ma <= v.log_ps + tol;
    r.a_hi = v.log_ps <= ha + tol;
    f128 mb = std::min(e * T + v.log_pu, -e + lQy);
    f128 hb = std::min(e * T + v.log_pu, lQy);
    r.b_lo = -e * qu + mb <= w.log_pu + tol;
    r.b_hi = w.log_pu <= hb + tol;
    r.T = T;
    r.log_ratio = v.log_pmin() - w.log_pmin();
}

EdgeReport edge_test(const Sections& S, const DoubleChart& v, const DoubleChart& w, const PesinChart& fx,
                     const PesinChart& fy, double eps, int grid)
{
    EdgeReport r;
    f128 lq = w.log_pmin(), lp = v.log_pmin();
    r.gpo1_fwd = overlap_test(fx, lq, w.chart, lq, eps);
    r.gpo1_bwd = overlap_test(fy, lp, v.chart, lp, eps);
    if (!r.gpo1())
        return r;
    auto tt = transition_time(S, v, w, grid);
    gpo2_check(v, w, tt.T, eps, r);
    return r;
}

EdgeReport edge_test(const Nuh& nuh, const Sections& S, const DoubleChart& v, const DoubleChart& w, double eps)
{
    PesinChart fx = pesin_chart(nuh, S, S.next(v.chart.hit));
    PesinChart fy = pesin_chart(nuh, S, S.prev(w.chart.hit));
    return edge_test(S, v, w, fx, fy, eps);
}

double remark_inclusion_ratio(const Sections& S, const DoubleChart& v, const DoubleChart& w, int grid)
{
    Holonomy g = holonomy(S, w.chart.hit, -1);
    if (S.disc_id(g.target.tile, g.target.level) != S.disc_id(v.chart.hit.tile, v.chart.hit.level))
        return std::numeric_limits<double>::infinity();
    double ew = w.pmin() / 20, lim = v.pmin() / 15;
    double worst = 0;
    for (int i = 0; i < grid; ++i)
        for (int j = 0; j < grid; ++j) {
            Eigen::Vector2d a(ew * (-1 + 2.0 * i / (grid - 1)), ew * (-1 + 2.0 * j / (grid - 1)));
            Torus2 z = holonomy_apply(S, g, chart_apply(w.chart, a).u);
            Eigen::Vector2d b = chart_invert(v.chart, z);
            worst = std::max(worst, b.cwiseAbs().maxCoeff() / lim);
        }
    return worst;
}

std::string chart_csv_header() { return "tile,level,u1,u2,h,s,u,Q,log_ps,log_pu\n"; }

std::string chart_csv_row(const DoubleChart& v)
{
    const auto& c = v.chart;
    char buf[400];
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%s\n", c.hit.tile, c.hit.level,
                  c.base.u.a.unit(), c.base.u.b.unit(), c.base.h, c.par.s, c.par.u, c.par.Q,
                  f128_str(v.log_ps, 30).c_str(), f128_str(v.log_pu, 30).c_str());
    return buf;
}

} // namespace hyp
