#include "hypcode/gpo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace hyp {

ChartStep chart_step(const Sections& S, const PesinChart& x, const PesinChart& y)
{
    Holonomy g = holonomy(S, x.hit, +1);
    if (S.disc_id(g.target.tile, g.target.level) != S.disc_id(y.hit.tile, y.hit.level))
        throw std::invalid_argument("chart step: y is not on the disc of f(x)");
    ChartStep st;
    st.crossings = g.crossings;
    st.M = y.Cinv * matrix_power(S.model(), g.crossings) * x.C;
    st.c = chart_invert(y, holonomy_apply(S, g, x.base.u));
    return st;
}

AdmissibleCurve AdmissibleCurve::constant(CurveKind k, double p, double value)
{
    AdmissibleCurve c;
    c.kind = k;
    c.p = p;
    c.F.assign(kSamples, value);
    return c;
}

// Catmull-Rom slope at node i, per unit parameter
static double node_slope(const std::vector<double>& F, int i, double h)
{
    int n = (int)F.size();
    if (i == 0)
        return (F[1] - F[0]) / h;
    if (i == n - 1)
        return (F[n - 1] - F[n - 2]) / h;
    return (F[i + 1] - F[i - 1]) / (2 * h);
}

double AdmissibleCurve::eval(double t) const
{
    int n = (int)F.size();
    double h = this->h();
    if (t <= -p)
        return F[0] + (t + p) * node_slope(F, 0, h);
    if (t >= p)
        return F[n - 1] + (t - p) * node_slope(F, n - 1, h);
    int i = std::min(n - 2, (int)std::floor((t + p) / h));
    double s = (t - t_at(i)) / h;
    double m0 = node_slope(F, i, h) * h, m1 = node_slope(F, i + 1, h) * h;
    double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * F[i] + (s3 - 2 * s2 + s) * m0 + (-2 * s3 + 3 * s2) * F[i + 1] + (s3 - s2) * m1;
}

double AdmissibleCurve::deriv(double t) const
{
    int n = (int)F.size();
    double h = this->h();
    if (t <= -p)
        return node_slope(F, 0, h);
    if (t >= p)
        return node_slope(F, n - 1, h);
    int i = std::min(n - 2, (int)std::floor((t + p) / h));
    double s = (t - t_at(i)) / h;
    double m0 = node_slope(F, i, h) * h, m1 = node_slope(F, i + 1, h) * h;
    double s2 = s * s;
    double d = (6 * s2 - 6 * s) * F[i] + (3 * s2 - 4 * s + 1) * m0 + (-6 * s2 + 6 * s) * F[i + 1] + (3 * s2 - 2 * s) * m1;
    return d / h;
}

std::string AdmissibleCurve::csv() const
{
    std::ostringstream os;
    os << "t,F\n";
    char buf[80];
    for (size_t i = 0; i < F.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t_at((int)i), F[i]);
        os << buf;
    }
    return os.str();
}

Admissibility admissibility(const AdmissibleCurve& c, double pmin, double beta)
{
    Admissibility a;
    a.F0 = std::fabs(c.eval(0));
    a.dF0 = std::fabs(c.deriv(0));
    int n = (int)c.F.size();
    std::vector<double> D(n);
    for (int i = 0; i < n; ++i) {
        D[i] = node_slope(c.F, i, c.h());
        a.dF_sup = std::max(a.dF_sup, std::fabs(D[i]));
    }
    double ex = beta / 3;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            a.holder = std::max(a.holder, std::fabs(D[i] - D[j]) / std::pow(c.t_at(j) - c.t_at(i), ex));
    a.am1 = a.F0 <= 1e-3 * pmin;
    a.am2 = a.dF0 <= 0.5 * std::pow(pmin, ex);
    a.am3 = a.dF_sup + a.holder <= 0.5;
    return a;
}

double c0_distance(const AdmissibleCurve& a, const AdmissibleCurve& b)
{
    double p = std::min(a.p, b.p), d = 0;
    const int n = AdmissibleCurve::kSamples;
    for (int i = 0; i < n; ++i) {
        double t = -p + 2 * p * i / (n - 1);
        d = std::max(d, std::fabs(a.eval(t) - b.eval(t)));
    }
    return d;
}

double c1_distance(const AdmissibleCurve& a, const AdmissibleCurve& b)
{
    double p = std::min(a.p, b.p), d = 0;
    const int n = AdmissibleCurve::kSamples;
    for (int i = 0; i < n; ++i) {
        double t = -p + 2 * p * i / (n - 1);
        d = std::max(d, std::fabs(a.deriv(t) - b.deriv(t)));
    }
    return c0_distance(a, b) + d;
}

AdmissibleCurve graph_transform_s(const ChartStep& st, const AdmissibleCurve& V, double p_v)
{
    if (V.kind != CurveKind::S)
        throw std::invalid_argument("graph_transform_s needs an s-curve");
    AdmissibleCurve out = AdmissibleCurve::constant(CurveKind::S, p_v);
    const auto& M = st.M;
    for (int i = 0; i < (int)out.F.size(); ++i) {
        double t = out.t_at(i);
        // eta with [f(t,eta)]_2 = V([f(t,eta)]_1)
        double eta = (V.eval(M(0, 0) * t + st.c(0)) - st.c(1) - M(1, 0) * t) / M(1, 1);
        bool done = false;
        for (int k = 0; k < 60 && !done; ++k) {
            double xi = M(0, 0) * t + M(0, 1) * eta + st.c(0);
            double nxt = (V.eval(xi) - st.c(1) - M(1, 0) * t) / M(1, 1);
            done = std::fabs(nxt - eta) <= 1e-15 * (std::fabs(nxt) + 1e-3 * p_v) || nxt == eta;
            eta = nxt;
        }
        double xi = M(0, 0) * t + M(0, 1) * eta + st.c(0);
        if (!done || !std::isfinite(eta) || std::fabs(xi) > V.p * 1.01)
            throw GraphReparamFailure("s graph transform: image leaves the curve domain");
        out.F[i] = eta;
    }
    return out;
}

AdmissibleCurve graph_transform_u(const ChartStep& st, const AdmissibleCurve& V, double q_w)
{
    if (V.kind != CurveKind::U)
        throw std::invalid_argument("graph_transform_u needs a u-curve");
    AdmissibleCurve out = AdmissibleCurve::constant(CurveKind::U, q_w);
    const auto& M = st.M;
    // eta'(t) = M10 V(t) + M11 t + c1 must be strictly monotone
    double sgn = 0;
    for (int i = 0; i < (int)V.F.size(); ++i) {
        double d = M(1, 0) * V.deriv(V.t_at(i)) + M(1, 1);
        if (d == 0 || (sgn != 0 && (d > 0) != (sgn > 0)))
            throw GraphReparamFailure("u graph transform: image is not a graph");
        sgn = d;
    }
    for (int i = 0; i < (int)out.F.size(); ++i) {
        double s = out.t_at(i);
        double t = (s - st.c(1)) / M(1, 1);
        bool done = false;
        for (int k = 0; k < 60 && !done; ++k) {
            double r = M(1, 0) * V.eval(t) + M(1, 1) * t + st.c(1) - s;
            double nxt = t - r / (M(1, 0) * V.deriv(t) + M(1, 1));
            done = std::fabs(nxt - t) <= 1e-15 * (std::fabs(nxt) + 1e-3 * V.p) || nxt == t;
            t = nxt;
        }
        if (!done || !std::isfinite(t) || std::fabs(t) > V.p * 1.01)
            throw GraphReparamFailure("u graph transform: preimage leaves the curve domain");
        out.F[i] = M(0, 0) * V.eval(t) + M(0, 1) * t + st.c(0);
    }
    return out;
}

Gpo make_gpo(const Sections& S, std::vector<DoubleChart> v, long zero)
{
    Gpo g;
    g.v = std::move(v);
    g.zero = zero;
    for (long i = 0; i + 1 < g.size(); ++i)
        g.steps.push_back(chart_step(S, g.v[i].chart, g.v[i + 1].chart));
    return g;
}

CurveResult stable_curve(const Gpo& g, long at, int depth, const AdmissibleCurve* seed)
{
    if (at < 0 || at + depth >= g.size())
        throw std::out_of_range("stable curve needs depth future charts");
    const auto& last = g.v[at + depth];
    CurveResult r;
    r.curve = seed ? *seed : AdmissibleCurve::constant(CurveKind::S, last.ps());
    r.contraction = 1;
    for (long i = at + depth - 1; i >= at; --i) {
        r.curve = graph_transform_s(g.steps[i], r.curve, g.v[i].ps());
        r.contraction /= std::fabs(g.steps[i].M(1, 1));
    }
    r.certificate = r.contraction * 1.002 * last.ps();
    return r;
}

CurveResult unstable_curve(const Gpo& g, long at, int depth, const AdmissibleCurve* seed)
{
    if (at >= g.size() || at - depth < 0)
        throw std::out_of_range("unstable curve needs depth past charts");
    const auto& first = g.v[at - depth];
    CurveResult r;
    r.curve = seed ? *seed : AdmissibleCurve::constant(CurveKind::U, first.pu());
    r.contraction = 1;
    for (long i = at - depth; i < at; ++i) {
        r.curve = graph_transform_u(g.steps[i], r.curve, g.v[i + 1].pu());
        r.contraction *= std::fabs(g.steps[i].M(0, 0));
    }
    r.certificate = r.contraction * 1.002 * first.pu();
    return r;
}

Eigen::Vector2d follow(const Sections& S, const Gpo& g, long at, const Torus2& y, long n, Torus2* out)
{
    Torus2 z = y;
    long i = at;
    while (i != at + n) {
        int dir = n > 0 ? 1 : -1;
        Holonomy h = holonomy(S, g.v[i].chart.hit, dir);
        z = holonomy_apply(S, h, z);
        i += dir;
    }
    if (out)
        *out = z;
    return chart_invert(g.v[i].chart, z);
}

ShadowResult shadow(const Sections& S, const Gpo& g, int depth, long at, double tol_rel)
{
    if (at < 0)
        at = g.zero;
    ShadowResult r;
    auto cs = stable_curve(g, at, depth);
    auto cu = unstable_curve(g, at, depth);
    r.vs = cs.curve;
    r.vu = cu.curve;
    r.cert_s = cs.certificate;
    r.cert_u = cu.certificate;
    const auto& v0 = g.v[at];
    double pm = v0.pmin();
    r.tolerance = tol_rel * pm;
    double xi = 0;
    bool done = false;
    for (int k = 0; k < 200 && !done; ++k) {
        double nxt = r.vu.eval(r.vs.eval(xi));
        done = std::fabs(nxt - xi) <= r.tolerance;
        xi = nxt;
    }
    double eta = r.vs.eval(xi);
    if (!done || std::fabs(xi) > v0.pu() || std::fabs(eta) > v0.ps())
        throw NoIntersection("stable and unstable curves do not meet in the chart window");
    r.xy = {xi, eta};
    r.residual = std::fabs(xi - r.vu.eval(eta));
    r.point = chart_apply(v0.chart, r.xy);
    r.in_small_window = r.xy.cwiseAbs().maxCoeff() <= 1e-2 * pm;

    Eigen::Vector2d ts = v0.chart.C * Eigen::Vector2d(1, r.vs.deriv(xi));
    Eigen::Vector2d tu = v0.chart.C * Eigen::Vector2d(r.vu.deriv(eta), 1);
    double sang = std::fabs(ts(0) * tu(1) - ts(1) * tu(0)) / (ts.norm() * tu.norm());
    r.angle_log_ratio = std::log(sang / std::fabs(std::sin(v0.chart.par.alpha)));

    r.windows_ok = true;
    for (long n = -depth; n <= depth; ++n) {
        if (n == 0 || at + n < 0 || at + n >= g.size())
            continue;
        Eigen::Vector2d w = follow(S, g, at, r.point.u, n);
        double ratio = w.cwiseAbs().maxCoeff() / (10 * g.v[at + n].chart.par.Q);
        r.worst_window = std::max(r.worst_window, ratio);
        r.windows_ok = r.windows_ok && ratio <= 1;
        ++r.window_checked;
    }
    return r;
}

f128 first_roof(const Sections& S, const Gpo& g, const ShadowResult& sh, long at)
{
    if (at < 0)
        at = g.zero;
    return holonomy_time_q(S, holonomy(S, g.v[at].chart.hit, +1), sh.point.u);
}

CenterLift center_lift(const Sections& S, const AdmissibleCurve& curve, const Gpo& g, long at, int depth,
                       const std::vector<double>& times)
{
    if (curve.kind != CurveKind::S)
        throw std::invalid_argument("center lift needs a stable curve");
    if (at + depth >= g.size())
        throw std::out_of_range("center lift needs depth future charts");
    const auto& ch = g.v[at].chart;
    const int n = (int)curve.F.size();
    std::vector<Torus2> y(n);
    for (int i = 0; i < n; ++i)
        y[i] = chart_apply(ch, {curve.t_at(i), curve.F[i]}).u;
    Torus2 z = chart_apply(ch, {0.0, curve.eval(0)}).u;

    CenterLift L;
    double chi = S.model().config().chi;
    L.rate = chi * S.min_return_bound() / 2;
    L.c = chi * S.min_return_bound() / (2 * S.max_return_bound());
    std::vector<std::vector<f128>> D(depth + 1, std::vector<f128>(n, 0));
    std::vector<std::vector<double>> fd(depth + 1, std::vector<double>(n, 0));
    std::vector<f128> Tz(depth + 1, 0);
    std::vector<f128> ty(n, 0);
    for (int k = 0;; ++k) {
        for (int i = 0; i < n; ++i) {
            double d1, d2;
            torus_diff(y[i], z, d1, d2);
            fd[k][i] = std::hypot(d1, d2);
        }
        if (k == depth)
            break;
        Holonomy h = holonomy(S, g.v[at + k].chart.hit, +1);
        f128 tz = holonomy_time_q(S, h, z);
        Tz[k + 1] = Tz[k] + tz;
        double inc = 0;
        for (int i = 0; i < n; ++i) {
            ty[i] += holonomy_time_q(S, h, y[i]);
            D[k + 1][i] = ty[i] - Tz[k + 1];
            inc = std::max(inc, (double)fabsq(D[k + 1][i] - D[k][i]));
            y[i] = holonomy_apply(S, h, y[i]);
        }
        z = holonomy_apply(S, h, z);
        L.increments.push_back(inc);
    }
    L.delta = D[depth];
    for (double s : times) {
        int k = 0;
        while (k + 1 <= depth && Tz[k + 1] <= (f128)s)
            ++k;
        if (k == depth)
            throw std::out_of_range("center lift: depth too small for the requested time");
        double worst = 0;
        for (int i = 0; i < n; ++i) {
            double d0 = fd[0][i] + (double)fabsq(L.delta[i]);
            if (d0 == 0)
                continue;
            double ds = fd[k][i] + (double)fabsq(L.delta[i] - D[k][i]);
            worst = std::max(worst, ds / d0);
        }
        L.times.push_back(s);
        L.ratios.push_back(worst);
    }
    return L;
}

std::string shadow_json(const ShadowResult& r)
{
    nlohmann::ordered_json j;
    j["u1"] = r.point.u.a.unit();
    j["u2"] = r.point.u.b.unit();
    j["h"] = r.point.h;
    j["xi"] = r.xy(0);
    j["eta"] = r.xy(1);
    j["residual"] = r.residual;
    j["tolerance"] = r.tolerance;
    j["in_small_window"] = r.in_small_window;
    j["windows_checked"] = r.window_checked;
    j["windows_ok"] = r.windows_ok;
    j["worst_window_ratio"] = r.worst_window;
    j["angle_log_ratio"] = r.angle_log_ratio;
    j["stable_certificate"] = r.cert_s;
    j["unstable_certificate"] = r.cert_u;
    return j.dump(2);
}

} // namespace hyp
