#include "hypcode/nuh.hpp"

#include <algorithm>
#include <cmath>

namespace hyp {

namespace {

// 8-point Gauss-Legendre on [-1,1]
const double kGLx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                        0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
const double kGLw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                        0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

} // namespace

double exp_integral(double c, double len)
{
    if (len <= 0)
        return 0.0;
    int panels = std::max(1, (int)std::ceil(std::fabs(c) * len));
    double h = len / panels, sum = 0;
    for (int p = 0; p < panels; ++p) {
        double a = p * h, mid = a + h / 2, acc = 0;
        for (int i = 0; i < 8; ++i)
            acc += kGLw[i] * std::exp(c * (mid + h / 2 * kGLx[i]));
        sum += acc * h / 2;
    }
    return sum;
}

Nuh::Nuh(const ModelFlow& m) : Nuh(m, m.config().chi) {}

Nuh::Nuh(const ModelFlow& m, double chi) : m_(&m), chi_(chi)
{
    const auto& c = m.config();
    eps_ = c.eps;
    rho_ = c.rho;
    beta_ = c.beta;
    init();
}

void Nuh::init()
{
    c4_ = 4 * std::exp(4 * rho_);
    l2_ = 1.0 / (m_->lambda() * m_->lambda());
    if (!(chi_ > 0))
        throw std::invalid_argument("chi must be positive");
    if (l2_ * std::exp(2 * chi_ * m_->roof_max()) >= 1.0)
        throw DivergentIntegral("chi is not below the expansion rate per unit time; the Lyapunov integral diverges");
    double rlo = m_->roof_min(), rhi = m_->roof_max();
    double smax = exp_integral(2 * chi_, rhi) / (1 - l2_ * std::exp(2 * chi_ * rhi));
    double smin = exp_integral(2 * chi_, rlo) / (1 - l2_ * std::exp(2 * chi_ * rlo));
    // s^2 + u^2 is convex along a panel: largest at its ends, smallest in the middle
    double sum_hi = (1 + l2_) * smax;
    double sum_lo = 2 * exp_integral(2 * chi_, rlo / 2) + 2 * std::exp(chi_ * rlo) * l2_ * smin;
    double sa = std::sin(angle_between(m_->ns(), m_->nu()));
    q_lo_ = std::pow(eps_, 3 / beta_) * std::pow(c4_ * sum_hi / (sa * sa), -6 / beta_);
    q_hi_ = std::pow(eps_, 3 / beta_) * std::pow(c4_ * sum_lo / (sa * sa), -6 / beta_);
}

double Nuh::default_horizon() const { return std::log(q_hi_ / q_lo_) / eps_ + 1.0; }

double Nuh::panel_sum(const std::vector<double>& r, double& err) const
{
    double rlo = m_->roof_min(), rhi = m_->roof_max();
    double tlo = exp_integral(2 * chi_, rlo) / (1 - l2_ * std::exp(2 * chi_ * rlo));
    double thi = exp_integral(2 * chi_, rhi) / (1 - l2_ * std::exp(2 * chi_ * rhi));
    double F = 0.5 * (tlo + thi), e = 0.5 * (thi - tlo);
    for (size_t k = r.size(); k-- > 0;) {
        double g = std::exp(2 * chi_ * r[k]) * l2_;
        F = exp_integral(2 * chi_, r[k]) + g * F;
        e *= g;
    }
    err = e;
    return F;
}

SUValue Nuh::su_at(const Torus2& u, double h) const
{
    std::vector<double> fr(kPanels), br(kPanels);
    Torus2 v = u;
    for (int k = 0; k < kPanels; ++k) {
        v = apply(m_->A(), v);
        fr[k] = m_->roof(v);
    }
    v = u;
    for (int k = 0; k < kPanels; ++k) {
        v = apply(m_->Ainv(), v);
        br[k] = m_->roof(v);
    }
    double ef, eb;
    double F = panel_sum(fr, ef), B = panel_sum(br, eb);
    double tau = m_->roof(u) - h;
    double s2 = exp_integral(2 * chi_, tau) + std::exp(2 * chi_ * tau) * l2_ * F;
    double u2 = exp_integral(2 * chi_, h) + std::exp(2 * chi_ * h) * l2_ * B;
    SUValue r;
    r.s = std::sqrt(c4_ * s2);
    r.u = std::sqrt(c4_ * u2);
    r.rel_err = std::max(std::exp(2 * chi_ * tau) * l2_ * ef / s2, std::exp(2 * chi_ * h) * l2_ * eb / u2);
    return r;
}

SUValue Nuh::compute_su(const PointM& x) const
{
    PointM y = m_->normalize(x);
    return su_at(y.u, y.h);
}

double Nuh::Q_from(double s, double u) const
{
    double sa = std::sin(angle_between(m_->ns(), m_->nu()));
    double f2 = (s * s + u * u) / (sa * sa);
    return std::pow(eps_, 3 / beta_) * std::pow(f2, -6 / beta_);
}

HypParams Nuh::params(const PointM& x) const
{
    HypParams p;
    p.base = m_->normalize(x);
    auto su = su_at(p.base.u, p.base.h);
    p.ns = m_->ns();
    p.nu = m_->nu();
    p.s = su.s;
    p.u = su.u;
    p.alpha = angle_between(p.ns, p.nu);
    p.C.col(0) = p.ns / p.s;
    p.C.col(1) = p.nu / p.u;
    p.C_inv_frob = std::sqrt(p.s * p.s + p.u * p.u) / std::fabs(std::sin(p.alpha));
    p.Q = Q_from(p.s, p.u);
    return p;
}

Eigen::Matrix2d Nuh::C_inv(const HypParams& p) const { return p.C.inverse(); }

Eigen::Vector2d Nuh::reduce(const PointM& x, double t, double* offdiag) const
{
    auto px = params(x);
    auto py = params(flow(*m_, x, t));
    Eigen::Matrix2d D = induced_phi(*m_, x, t);
    Eigen::Matrix2d M = py.C.inverse() * D * px.C;
    double off = std::max(std::fabs(M(0, 1)), std::fabs(M(1, 0)));
    if (offdiag)
        *offdiag = off;
    if (off > 1e-8)
        throw DiagonalizationResidual("reduced cocycle is not diagonal", off);
    return {M(0, 0), M(1, 1)};
}

LocalQ Nuh::compute_q(const PointM& x0, double H) const
{
    PointM x = m_->normalize(x0);
    // panels k = -Kb..Kf around the current one, with kPanels extra on each side for the sums
    std::vector<double> fwd{m_->roof(x.u)}, bwd;
    {
        double t = fwd[0] - x.h;
        Torus2 v = x.u;
        while (t <= H) {
            v = apply(m_->A(), v);
            fwd.push_back(m_->roof(v));
            t += fwd.back();
        }
        for (int k = 0; k < kPanels; ++k) {
            v = apply(m_->A(), v);
            fwd.push_back(m_->roof(v));
        }
        t = x.h;
        v = x.u;
        while (t <= H) {
            v = apply(m_->Ainv(), v);
            bwd.push_back(m_->roof(v));
            t += bwd.back();
        }
        for (int k = 0; k < kPanels; ++k) {
            v = apply(m_->Ainv(), v);
            bwd.push_back(m_->roof(v));
        }
    }
    const int nf = (int)fwd.size(), nb = (int)bwd.size();
    // F[k]: forward sum from the start of panel k (k = 0..nf-1); B[j]: backward sum from the end of panel -(j+1)
    std::vector<double> F(nf + 1), B(nb + 1), Bf(nf);
    double err;
    F[nf] = panel_sum({}, err);
    for (int k = nf - 1; k >= 0; --k)
        F[k] = exp_integral(2 * chi_, fwd[k]) + std::exp(2 * chi_ * fwd[k]) * l2_ * F[k + 1];
    B[nb] = panel_sum({}, err);
    for (int j = nb - 1; j >= 0; --j)
        B[j] = exp_integral(2 * chi_, bwd[j]) + std::exp(2 * chi_ * bwd[j]) * l2_ * B[j + 1];
    // backward sums from the end of forward panels
    Bf[0] = exp_integral(2 * chi_, fwd[0]) + std::exp(2 * chi_ * fwd[0]) * l2_ * B[0];
    for (int k = 1; k < nf; ++k)
        Bf[k] = exp_integral(2 * chi_, fwd[k]) + std::exp(2 * chi_ * fwd[k]) * l2_ * Bf[k - 1];
    // forward sums from the start of backward panels
    std::vector<double> Fb(nb);
    Fb[0] = exp_integral(2 * chi_, bwd[0]) + std::exp(2 * chi_ * bwd[0]) * l2_ * F[0];
    for (int j = 1; j < nb; ++j)
        Fb[j] = exp_integral(2 * chi_, bwd[j]) + std::exp(2 * chi_ * bwd[j]) * l2_ * Fb[j - 1];

    auto Qv = [&](double s2, double u2) { return Q_from(std::sqrt(c4_ * s2), std::sqrt(c4_ * u2)); };
    double tau = fwd[0] - x.h;
    double Q0 = Qv(exp_integral(2 * chi_, tau) + std::exp(2 * chi_ * tau) * l2_ * F[1],
                   exp_integral(2 * chi_, x.h) + std::exp(2 * chi_ * x.h) * l2_ * B[0]);
    LocalQ out;
    out.horizon = H;
    double best_s = Q0, best_u = Q0;
    // forward: both one-sided limits at each crossing
    double t = tau;
    for (int k = 0; k + 1 < nf && t <= H; ++k) {
        double w = std::exp(eps_ * t);
        double before = w * Qv(l2_ * F[k + 1], Bf[k]);
        double after = w * Qv(F[k + 1], l2_ * Bf[k]);
        if (std::min(before, after) < best_s) {
            best_s = std::min(before, after);
            out.t_s = t;
        }
        t += fwd[k + 1];
    }
    // backward
    t = x.h;
    for (int j = 0; j + 1 < nb && t <= H; ++j) {
        double w = std::exp(eps_ * t);
        double Fstart = j == 0 ? F[0] : Fb[j - 1];
        double after = w * Qv(Fstart, l2_ * B[j]);  // start of the later panel
        double before = w * Qv(l2_ * Fstart, B[j]); // end of the earlier panel
        if (std::min(before, after) < best_u) {
            best_u = std::min(before, after);
            out.t_u = -t;
        }
        t += bwd[j];
    }
    double cert = std::exp(eps_ * H) * q_lo_;
    double worst = std::max(best_s, best_u);
    if (worst > cert)
        throw HorizonTooShort("q horizon too short", std::log(worst / q_lo_) / eps_);
    out.qs = eps_ * best_s;
    out.qu = eps_ * best_u;
    out.q = std::min(out.qs, out.qu);
    return out;
}

ZIndexedP z_indexed_p(const std::vector<double>& steps, const std::vector<double>& Q, double eps, double Q_lower,
                      double lo, double hi)
{
    std::vector<f128> st(steps.begin(), steps.end());
    return z_indexed_p(st, Q, eps, Q_lower, lo, hi);
}

ZIndexedP z_indexed_p(const std::vector<f128>& steps, const std::vector<double>& Q, double eps, double Q_lower,
                      double lo, double hi)
{
    const long n = (long)Q.size();
    if (n == 0 || (long)steps.size() + 1 != n)
        throw std::invalid_argument("z_indexed_p needs one step between consecutive samples");
    ZIndexedP z;
    z.T.resize(n);
    z.T[0] = 0;
    for (long i = 0; i + 1 < n; ++i) {
        if (!(steps[i] >= lo && steps[i] <= hi))
            throw SpacingViolation("time spacing outside the allowed range at index " + std::to_string(i), i,
                                   (double)steps[i]);
        z.T[i + 1] = z.T[i] + steps[i];
    }
    std::vector<f128> lq(n);
    for (long i = 0; i < n; ++i)
        lq[i] = logq((f128)eps * (f128)Q[i]);
    const f128 e = eps;
    z.log_ps.resize(n);
    z.log_pu.resize(n);
    z.arg_s.resize(n);
    z.arg_u.resize(n);
    // p^s_n = min(eps Q_n, e^{eps(t_{n+1}-t_n)} p^s_{n+1}), carried as the index of the minimum
    z.arg_s[n - 1] = n - 1;
    z.log_ps[n - 1] = lq[n - 1];
    for (long i = n - 2; i >= 0; --i) {
        long m = z.arg_s[i + 1];
        f128 carried = lq[m] + e * (z.T[m] - z.T[i]);
        if (lq[i] <= carried) {
            z.arg_s[i] = i;
            z.log_ps[i] = lq[i];
        } else {
            z.arg_s[i] = m;
            z.log_ps[i] = carried;
        }
    }
    z.arg_u[0] = 0;
    z.log_pu[0] = lq[0];
    for (long i = 1; i < n; ++i) {
        long m = z.arg_u[i - 1];
        f128 carried = lq[m] + e * (z.T[i] - z.T[m]);
        if (lq[i] <= carried) {
            z.arg_u[i] = i;
            z.log_pu[i] = lq[i];
        } else {
            z.arg_u[i] = m;
            z.log_pu[i] = carried;
        }
    }
    // beyond the window every candidate exceeds eps Q_lower e^{eps |t|}
    const f128 lql = logq((f128)eps * (f128)Q_lower);
    z.s_certified_end = 0;
    while (z.s_certified_end < n && z.log_ps[z.s_certified_end] <= lql + e * (z.T[n - 1] - z.T[z.s_certified_end]))
        ++z.s_certified_end;
    z.u_certified_begin = n;
    while (z.u_certified_begin > 0 && z.log_pu[z.u_certified_begin - 1] <= lql + e * z.T[z.u_certified_begin - 1])
        --z.u_certified_begin;
    z.ps.resize(n);
    z.pu.resize(n);
    for (long i = 0; i < n; ++i) {
        z.ps[i] = (double)expq(z.log_ps[i]);
        z.pu[i] = (double)expq(z.log_pu[i]);
    }
    return z;
}

std::string f128_str(f128 x, int digits)
{
    char buf[96];
    quadmath_snprintf(buf, sizeof buf, "%.*Qg", digits, x);
    return buf;
}

} // namespace hyp
