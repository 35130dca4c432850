#pragma once
// Admissible curves, graph transforms, stable/unstable curves of gpo's, shadowing and center lifts.
#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/charts.hpp"

namespace hyp {

class GraphReparamFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoIntersection : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// f_{x,y} = Psi_y^{-1} g_x^+ Psi_x, affine in these charts
struct ChartStep {
    Eigen::Matrix2d M = Eigen::Matrix2d::Identity();
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    int crossings = 0;
    Eigen::Vector2d apply(const Eigen::Vector2d& v) const { return M * v + c; }
};
ChartStep chart_step(const Sections& S, const PesinChart& x, const PesinChart& y);

enum class CurveKind { S, U };

// s-curve: eta = F(xi), u-curve: xi = F(eta), parameter in [-p, p]
struct AdmissibleCurve {
    CurveKind kind = CurveKind::S;
    double p = 0;
    std::vector<double> F;
    static constexpr int kSamples = 65;

    static AdmissibleCurve constant(CurveKind k, double p, double value = 0);
    double t_at(int i) const { return -p + 2 * p * i / (double)(F.size() - 1); }
    double h() const { return 2 * p / (double)(F.size() - 1); }
    double eval(double t) const;
    double deriv(double t) const;
    std::string csv() const;
};

struct Admissibility {
    double F0 = 0, dF0 = 0, dF_sup = 0, holder = 0;
    bool am1 = false, am2 = false, am3 = false;
    bool ok() const { return am1 && am2 && am3; }
};
Admissibility admissibility(const AdmissibleCurve& c, double pmin, double beta);
double c0_distance(const AdmissibleCurve& a, const AdmissibleCurve& b);
double c1_distance(const AdmissibleCurve& a, const AdmissibleCurve& b);

// pull back an s-curve at w to v; p_v = p^s(v)
AdmissibleCurve graph_transform_s(const ChartStep& st, const AdmissibleCurve& at_w, double p_v);
// push forward a u-curve at v to w; q_w = q^u(w)
AdmissibleCurve graph_transform_u(const ChartStep& st, const AdmissibleCurve& at_v, double q_w);

// finite window v[0..n) of an eps-gpo, v[zero] is v_0
struct Gpo {
    std::vector<DoubleChart> v;
    std::vector<ChartStep> steps; // steps[i]: v[i] -> v[i+1]
    long zero = 0;
    long size() const { return (long)v.size(); }
};
Gpo make_gpo(const Sections& S, std::vector<DoubleChart> v, long zero);

struct CurveResult {
    AdmissibleCurve curve;
    double certificate = 0; // C0 distance bound to the limit curve
    double contraction = 0; // product of the per-step contraction factors
};
// V^s at v[at] from v[at..at+depth], V^u at v[at] from v[at-depth..at]
CurveResult stable_curve(const Gpo& g, long at, int depth, const AdmissibleCurve* seed = nullptr);
CurveResult unstable_curve(const Gpo& g, long at, int depth, const AdmissibleCurve* seed = nullptr);

struct ShadowResult {
    PointM point;            // exact fibre point on the disc of v_at
    Eigen::Vector2d xy;      // chart coordinates in Psi_{x_at}
    AdmissibleCurve vs, vu;
    double residual = 0;
    double tolerance = 0;
    bool in_small_window = false; // inside R[1e-2 (p^s ^ p^u)]
    int window_checked = 0;
    bool windows_ok = false;      // forward and backward images stay in R[10 Q]
    double worst_window = 0;      // largest |image|_inf / (10 Q)
    double angle_log_ratio = 0;   // log sin angle(V^s,V^u) / sin alpha(x)
    double cert_s = 0, cert_u = 0;
};
// relative root tolerance: tolerance = tol_rel * (p^s ^ p^u)
ShadowResult shadow(const Sections& S, const Gpo& g, int depth, long at = -1, double tol_rel = 1e-10);

// time from pi(v) to pi(sigma v): the holonomy time at the shadow point
f128 first_roof(const Sections& S, const Gpo& g, const ShadowResult& sh, long at = -1);

struct CenterLift {
    std::vector<f128> delta;      // Delta_depth at the curve samples
    std::vector<double> increments; // max_i |Delta_{n+1} - Delta_n|
    double rate = 0;              // chi inf r / 2 in units of returns: e^{-chi inf r n /2}
    double c = 0;                 // chi inf r / (2 sup r)
    // d(phi^t y~, phi^t z~) / d(y~, z~) at the requested times, worst sample
    std::vector<double> times, ratios;
};
CenterLift center_lift(const Sections& S, const AdmissibleCurve& curve, const Gpo& g, long at, int depth,
                       const std::vector<double>& times = {5.0});

// chart coordinates of the n-th holonomy image of a point of the disc of v_at
Eigen::Vector2d follow(const Sections& S, const Gpo& g, long at, const Torus2& y, long n, Torus2* out = nullptr);

std::string shadow_json(const ShadowResult& r);

} // namespace hyp
