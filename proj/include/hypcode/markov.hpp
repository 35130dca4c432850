#pragma once
// Markov cover on sample clouds, fibres, brackets, the refinement into R, the second coding and its checks.
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/coarse.hpp"

namespace hyp {

class BracketFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CylinderEmpty : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyRectangle : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MarkovConfig {
    int N = 3;               // refinement depth, ceil(rho / inf r) + 1
    double tau = 1e-6;       // fibre tolerance, relative to the separation along the fibre
    int fibre_depth = 40;
    double window = 1e-2;    // Z(v) sits in Psi_v(R[window * (p^s ^ p^u)])
    int max_bracket_pairs = 64; // per class
};

struct Occurrence {
    long enc = -1, idx = -1;
};

struct Sample {
    Hit hit;
    std::vector<Occurrence> occ;
    long next = -1, prev = -1;
    f128 t_next = 0;        // return time to next
    std::vector<long> Z;    // vertices v with the sample in Z(v), sorted
};

// a sample seen in the chart of one vertex, with its fibres there
struct FibreChart {
    long sample = -1, vertex = -1;
    Eigen::Vector2d xy = Eigen::Vector2d::Zero();
    AdmissibleCurve s, u;
    int depth_s = 0, depth_u = 0;
};

struct MarkovInput {
    const Sections* S = nullptr;
    const Alphabet* a = nullptr;
    std::vector<Encoding> encs;
    std::vector<const OrbitData*> orbits; // orbits[i] was encoded by encs[i]
};

class MarkovCover {
public:
    MarkovCover(const MarkovInput& in, const MarkovConfig& cfg);

    const MarkovConfig& config() const { return cfg_; }
    const Sections& sections() const { return *in_.S; }
    const Alphabet& alphabet() const { return *in_.a; }
    const MarkovInput& input() const { return in_; }
    const std::vector<Sample>& samples() const { return samples_; }
    const Sample& sample(long i) const { return samples_[i]; }
    long sample_of(const Occurrence& o) const;
    // rectangle Z(v): fibre-chart ids of its samples
    const std::vector<long>& rect(long v) const { return rect_[v]; }
    const FibreChart& fibre(long id) const { return fib_[id]; }
    long fibre_id(long sample, long v) const; // -1 if the sample is not in Z(v)
    long rect_count() const { return (long)rect_.size(); }

    // |eta_y - F^x_s(xi_y)| / (tau |xi_y - xi_x|), both fibre charts in one rectangle
    double s_defect(long fx, long fy) const;
    double u_defect(long fx, long fy) const;
    bool on_s(long fx, long fy) const { return s_defect(fx, fy) <= 1; }
    bool on_u(long fx, long fy) const { return u_defect(fx, fy) <= 1; }

    // [x,y]_Z = W^s(x,Z) cap W^u(y,Z), chart coordinates of Z
    Eigen::Vector2d bracket(long fx, long fy) const;
    PointM bracket_point(long fx, long fy) const;

    // I_Z: vertices w with phi^[-rho,rho] Z(v) cap Z(w) nonempty on samples
    const std::vector<long>& I(long v) const { return I_[v]; }
    // E-element of the sample in Z(v): two bits per w in I(v)
    const std::string& E(long fibre_id) const { return esig_[fibre_id]; }
    long E_count(long v) const;

    // dichotomy violations: pairs of s-fibres (u-fibres) that share a sample without coinciding
    long dichotomy_violations() const;

private:
    MarkovInput in_;
    MarkovConfig cfg_;
    std::vector<Sample> samples_;
    std::vector<std::vector<long>> occ_sample_; // [enc][idx] -> sample
    std::vector<FibreChart> fib_;
    std::vector<std::vector<long>> rect_;
    std::map<std::pair<long, long>, long> fib_index_;
    std::vector<std::vector<long>> I_;
    std::vector<std::string> esig_;
    void build_samples();
    void build_fibres();
    void build_I();
    void build_E();
};

// refinement of the cover by ~^N
struct Partition {
    int N = 0;
    std::vector<std::vector<long>> classes; // sample ids
    std::vector<long> cls;                  // sample -> class or -1
    std::vector<std::vector<long>> Z;       // common rectangles of each class
    long boundary = 0;                      // samples without N sampled returns both ways
    MarkovGraph G;                          // G hat: R -> S when H(R) meets S
    long size() const { return (long)classes.size(); }
};
Partition refine(const MarkovCover& c, int N);

struct MarkovReport {
    long pairs_s = 0, pairs_u = 0;         // fibre pairs checked
    long violations = 0, flagged = 0;      // defect > 2 tol, defect in (tol, 2 tol]
    double worst_defect = 0;
    long class_mismatch = 0;               // H(y) left the class of H(x)
    long brackets = 0, brackets_on_samples = 0, brackets_in_window = 0, bracket_law_failures = 0;
    long hyperbolic_pairs = 0;
    double worst_rate = -1e300;            // largest fitted log contraction per return along s-fibres
    long holonomy_mismatch = 0;
    long points = 0;
    std::vector<std::string> witnesses;
    double flagged_fraction() const { return points ? (double)flagged / (double)points : 0; }
};
MarkovReport markov_check(const MarkovCover& c, const Partition& p);

struct CylinderReport {
    long words = 0, realized = 0, companion = 0, empty = 0;
};
// random admissible words of G hat of length 2n+1; nonempty if a sample realizes them or a companion gpo shadows
CylinderReport cylinder_check(const MarkovCover& c, const Partition& p, int n, long words, std::mt19937_64& rng);

struct DiameterFit {
    std::vector<int> depth;
    std::vector<double> mean_log_diam;
    double theta = 0, r2 = 0;
    double worst_word_r2 = 1;
    long words = 0;
    double pi_hat_err = 0; // largest |shadow of the companion gpo - sample|
};
// certified torus diameter of the chart box of the companion gpo of a depth-n cylinder
double cylinder_diameter(const MarkovCover& c, long sample, int n);
DiameterFit diameter_fit(const MarkovCover& c, const Partition& p, int lo, int hi, long words, std::mt19937_64& rng);

struct RoofReport {
    long checked = 0;
    double min = 1e300, max = 0;
    double conjugacy_err = 0; // |phi^{r hat}(pi hat) - pi hat(sigma)|
};
RoofReport roof_check(const MarkovCover& c, const Partition& p);

struct Affiliation {
    std::vector<std::vector<long>> adj; // R ~ S
    std::vector<long> N;                // N(R) = #A(R)
    bool symmetric = true;
    bool affiliated(long r, long s) const;
};
Affiliation affiliation(const MarkovCover& c, const Partition& p);

struct PreimageResult {
    long sample = -1;
    long count = 0;
    long R = -1, S = -1;
    long bound = 0;
    std::vector<long> counts_by_depth;
};
// affiliated words of depth n that are admissible and compatible with the rectangles of the orbit of the sample
PreimageResult preimage_search(const MarkovCover& c, const Partition& p, const Affiliation& af, long sample, int n);

struct BowenReport {
    long coincident = 0, coincident_ok = 0;  // property (i)
    long pairs = 0, recovered = 0;           // property (ii)
    double max_shift = 0;
    std::vector<std::string> failures;
};
BowenReport bowen_check(const MarkovCover& c, const Partition& p, const Affiliation& af, int min_window);

struct LiftResult {
    std::vector<long> component; // classes
    bool transitive = false;
    long covered = 0, samples = 0;
};
// classes of the given samples' canonical lifts and the strongly connected component that contains them
LiftResult lift_hyperbolic_set(const MarkovCover& c, const Partition& p, const std::vector<long>& samples);

std::string partition_csv(const MarkovCover& c, const Partition& p);

} // namespace hyp
