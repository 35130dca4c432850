#pragma once
// Lyapunov change of coordinates: s, u, C(x), Q, q and the z-indexed p^s, p^u.
#include <quadmath.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/model.hpp"

namespace hyp {

class DivergentIntegral : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HorizonTooShort : public std::runtime_error {
public:
    HorizonTooShort(const std::string& w, double req) : std::runtime_error(w), required(req) {}
    double required;
};

class DiagonalizationResidual : public std::runtime_error {
public:
    DiagonalizationResidual(const std::string& w, double r) : std::runtime_error(w), residual(r) {}
    double residual;
};

class SpacingViolation : public std::runtime_error {
public:
    SpacingViolation(const std::string& w, long i, double s) : std::runtime_error(w), index(i), spacing(s) {}
    long index;
    double spacing;
};

struct SUValue {
    double s = 0, u = 0;
    double rel_err = 0; // certified relative error of s^2 and u^2 from the tail
};

struct HypParams {
    PointM base;
    Eigen::Vector2d ns, nu;
    double s = 0, u = 0, alpha = 0;
    Eigen::Matrix2d C;
    double C_inv_frob = 0, Q = 0;
};

struct LocalQ {
    double q = 0, qs = 0, qu = 0;
    double horizon = 0;
    double t_s = 0, t_u = 0; // where the infima are attained
};

// integral of e^{c t} over [0, len], composite 8-point Gauss-Legendre
double exp_integral(double c, double len);

class Nuh {
public:
    explicit Nuh(const ModelFlow& m);
    Nuh(const ModelFlow& m, double chi);

    const ModelFlow& model() const { return *m_; }
    double chi() const { return chi_; }
    double eps() const { return eps_; }
    double rho() const { return rho_; }
    double beta() const { return beta_; }

    // s,u at fibre point u and height h in [0, r(u)]; h = r(u) is the limit from below
    SUValue su_at(const Torus2& u, double h) const;
    SUValue compute_su(const PointM& x) const;
    double Q_from(double s, double u) const;
    HypParams params(const PointM& x) const;
    Eigen::Matrix2d C_inv(const HypParams& p) const;

    // C(phi^t x)^{-1} Phi^t C(x); returns (A_t, B_t)
    Eigen::Vector2d reduce(const PointM& x, double t, double* offdiag = nullptr) const;

    LocalQ compute_q(const PointM& x, double horizon) const;
    double Q_lower() const { return q_lo_; }
    double Q_upper() const { return q_hi_; }
    // horizon after which e^{eps t} Q_lower exceeds every value of Q
    double default_horizon() const;

    static constexpr int kPanels = 40; // panels summed before the geometric tail

private:
    const ModelFlow* m_;
    double chi_, eps_, rho_, beta_;
    double c4_;   // 4 e^{4 rho}
    double l2_;   // lambda^{-2}
    double q_lo_ = 0, q_hi_ = 0;
    void init();
    // sum over panels with the given lengths, then tail bounds
    double panel_sum(const std::vector<double>& r, double& err) const;
};

struct ZIndexedP {
    std::vector<f128> T;                 // exact cumulative times, T[0] = 0
    std::vector<f128> log_ps, log_pu;    // log p^s_n, log p^u_n
    std::vector<long> arg_s, arg_u;      // index attaining each infimum
    std::vector<double> ps, pu;
    long s_certified_end = 0;   // log_ps[n] exact for n < s_certified_end
    long u_certified_begin = 0; // log_pu[n] exact for n >= u_certified_begin
};

// steps[n] = t_{n+1} - t_n, Q[n] = Q(phi^{t_n} x); Q_lower bounds Q beyond the window
ZIndexedP z_indexed_p(const std::vector<double>& steps, const std::vector<double>& Q, double eps, double Q_lower,
                      double spacing_lo, double spacing_hi);
// exact steps
ZIndexedP z_indexed_p(const std::vector<f128>& steps, const std::vector<double>& Q, double eps, double Q_lower,
                      double spacing_lo, double spacing_hi);

std::string f128_str(f128 x, int digits = 36);

} // namespace hyp
