#pragma once
// Pesin charts, double charts, chart return maps, transition times and GPO edges.
#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/nuh.hpp"
#include "hypcode/sections.hpp"

namespace hyp {

class DomainExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class BoundViolation : public std::runtime_error {
public:
    BoundViolation(const std::string& what, std::string q, double v, double b)
        : std::runtime_error(what), quantity(std::move(q)), value(v), bound(b) {}
    std::string quantity;
    double value, bound;
};

struct PesinChart {
    Hit hit;
    PointM base;
    HypParams par;
    Eigen::Matrix2d C, Cinv;
    double radius = 0.1; // domain half side, at most the exponential map radius
};

constexpr double kExpRadius = 0.1;

PesinChart pesin_chart(const Nuh& nuh, const Sections& S, const Hit& x);
// Psi_x(v): exact fibre point base + C v on the disc of x
PointM chart_apply(const PesinChart& c, const Eigen::Vector2d& v);
Eigen::Vector2d chart_invert(const PesinChart& c, const Torus2& y);

// d(x1,x2) + ||C1 - C2||, the quantity compared with (eta1 eta2)^4
double chart_distance(const PesinChart& a, const PesinChart& b);
bool overlap_test(const PesinChart& a, f128 log_eta1, const PesinChart& b, f128 log_eta2, double eps);
// sampled sup of |Psi_a^{-1} Psi_b - Id| and of its derivative over R[eta]
double change_of_coords_defect(const PesinChart& a, const PesinChart& b, double eta, int grid = 9);

// chart return map f = diag(A,B) + H sampled on R[window]
struct ChartMapDecomp {
    double A = 0, B = 0;
    Eigen::Matrix2d L = Eigen::Matrix2d::Zero(); // linear part of the map
    double window = 0;
    int n = 0;
    std::vector<Eigen::Vector2d> F, H; // row major, node (i,j) at (-w + 2w i/(n-1), -w + 2w j/(n-1))
    double H0 = 0, dH0 = 0, dH_sup = 0, H_sup = 0, holder = 0;
    double holder_exp = 0.5;
    double time = 0; // holonomy time at the base point
    Eigen::Vector2d node(int i, int j) const;
    double norm_c1() const { return H_sup + dH_sup + holder; }
};

// f_{x,target}^{dir}: holonomy g_x^{dir} read in the charts of x and target
ChartMapDecomp chart_return_map(const Sections& S, const PesinChart& x, const PesinChart& target, int dir = +1,
                                int grid = 33, double holder_exp = 0.5, double window = -1);

struct DecompCheck {
    bool A_ok = false, B_ok = false, H_ok = false;
    double rL = 0;
    bool ok() const { return A_ok && B_ok && H_ok; }
};
// bounds for f_x^+; throws BoundViolation when enforce is set
DecompCheck check_return_bounds(const ChartMapDecomp& d, const ModelConfig& mc, bool enforce);
// relaxed bounds for f_{x,y}^+ with overlap size eta
DecompCheck check_relaxed_bounds(const ChartMapDecomp& d, const ModelConfig& mc, double eta, bool enforce);

struct DoubleChart {
    PesinChart chart;
    f128 log_ps = 0, log_pu = 0;
    double ps() const { return (double)expq(log_ps); }
    double pu() const { return (double)expq(log_pu); }
    f128 log_pmin() const { return log_ps < log_pu ? log_ps : log_pu; }
    double pmin() const { return (double)expq(log_pmin()); }
};

struct TransitionTime {
    f128 T = 0, T_plus = 0, T_minus = 0;
    double lip_err = 0;
    int grid = 0;
};
// holonomy time from the disc of x through the point y of that disc, in quad precision
f128 holonomy_time_q(const Sections& S, const Holonomy& g, const Torus2& y);
TransitionTime transition_time(const Sections& S, const DoubleChart& v, const DoubleChart& w, int grid = 9);

struct EdgeReport {
    bool gpo1_fwd = false, gpo1_bwd = false;
    bool a_lo = false, a_hi = false, b_lo = false, b_hi = false;
    f128 T = 0;
    f128 log_ratio = 0; // log (p^s^p^u)/(q^s^q^u)
    bool gpo1() const { return gpo1_fwd && gpo1_bwd; }
    bool gpo2() const { return a_lo && a_hi && b_lo && b_hi; }
    bool ok() const { return gpo1() && gpo2(); }
};
// fx: chart at f(x); fy: chart at f^{-1}(y)
EdgeReport edge_test(const Sections& S, const DoubleChart& v, const DoubleChart& w, const PesinChart& fx,
                     const PesinChart& fy, double eps, int grid = 9);
EdgeReport edge_test(const Nuh& nuh, const Sections& S, const DoubleChart& v, const DoubleChart& w, double eps);
// GPO2 alone, for a given transition time
void gpo2_check(const DoubleChart& v, const DoubleChart& w, f128 T, double eps, EdgeReport& r);

// largest |g_y^-(Psi_y(a))|_inf / ((p^s^p^u)/15) over a grid of a in R[(q^s^q^u)/20]
double remark_inclusion_ratio(const Sections& S, const DoubleChart& v, const DoubleChart& w, int grid = 5);

std::string chart_csv_header();
std::string chart_csv_row(const DoubleChart& v);

} // namespace hyp
