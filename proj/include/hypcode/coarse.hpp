#pragma once
// Coarse graining: orbit windows, the lazy net, the ladder encoder and the alphabet of double charts.
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "hypcode/charts.hpp"
#include "hypcode/gpo.hpp"
#include "hypcode/symbolic.hpp"

namespace hyp {

using i128 = __int128;
std::string i128_str(i128 v);

class SurgeryFailure : public std::runtime_error {
public:
    SurgeryFailure(const std::string& w, long i) : std::runtime_error(w), index(i) {}
    long index;
};

class NetOverflow : public std::runtime_error {
public:
    NetOverflow(const std::string& w, long c) : std::runtime_error(w), count(c) {}
    long count;
};

// section orbit segment with exact hits and exact return times
struct OrbitData {
    std::string name;
    std::vector<Hit> hits;
    std::vector<f128> steps; // steps[i]: hits[i] -> hits[i+1]
    std::vector<double> Q, q;
    long period = 0;              // > 0 for periodic orbits
    long exact_lo = 0, exact_hi = 0; // exact iterates; outside are periodic continuations
    long size() const { return (long)hits.size(); }
};

// one cycle of the periodic section orbit through h, repeated
OrbitData periodic_orbit(const Sections& S, const Hit& h, long cycles, const std::string& name);
OrbitData generic_orbit(const Sections& S, const Hit& h, long before, long after, const std::string& name);
// point of W^u(0) cap W^s(q) (kind = +1) or W^s(0) cap W^u(q) (kind = -1), from an 1100-bit computation
Torus2 het_point(const ModelFlow& m, const Torus2& q, int kind);
Torus2 fix_point_from_ratio(int64_t n1, int64_t n2, int64_t den);
// exact iterates for `crossings` roof crossings each way, then the periodic orbits for `pad` hits
OrbitData het_orbit(const Sections& S, const Hit& h, const OrbitData& past, const OrbitData& future, int crossings,
                    long pad, const std::string& name);

// Q and q at every hit; repeated hits are evaluated once
void compute_hit_params(const Nuh& nuh, const Sections& S, OrbitData& o, bool parallel = true);
void compute_hit_params(const Nuh& nuh, const Sections& S, const std::vector<Hit>& hits, std::vector<double>& Q,
                        std::vector<double>& q, bool parallel);

struct NetPoint {
    Hit hit, next, prev;
    double Q = 0, q = 0;
    PesinChart chart, chart_next, chart_prev;
};

class LazyNet {
public:
    LazyNet(const Nuh& nuh, const Sections& S, long cap = 2000000);
    // net point within the closeness threshold at positions -1, 0, 1 of o, inserting o's hit if none
    long find_or_insert(const OrbitData& o, long n);
    long find(const OrbitData& o, long n) const;
    const NetPoint& operator[](long i) const { return pts_[i]; }
    long size() const { return (long)pts_.size(); }
    // d + |C - C| threshold for the hit n of o
    static double threshold(const OrbitData& o, long n);

private:
    const Nuh* nuh_;
    const Sections* S_;
    long cap_;
    std::vector<NetPoint> pts_;
    std::unordered_map<size_t, std::vector<long>> grid_;
    size_t cell_key(int disc, const Torus2& u) const;
    bool matches(const NetPoint& p, const OrbitData& o, long n) const;
};

struct EncodedIndex {
    long hit = 0;
    long net = -1;
    f128 log_Ps = 0, log_Pu = 0;
    bool s_max = false, u_max = false;
    i128 Ks = 0, Ku = 0;
    f128 log_ps = 0, log_pu = 0;
    f128 log_as() const { return log_ps - log_Ps; }
    f128 log_au() const { return log_pu - log_Pu; }
};

struct Encoding {
    std::string name;
    long lo = 0, hi = 0; // encoded hit range [lo, hi)
    std::vector<EncodedIndex> idx;
    std::vector<long> vertex;
    long s_maximal = 0, u_maximal = 0;
    bool horizon_limited = false;
    double tail_s = 0, tail_u = 0; // largest sum of P over a growing run
    f128 min_log_a = 0, max_log_a = -1e30;
    long size() const { return (long)idx.size(); }
};

struct Vertex {
    long net = -1;
    i128 Ks = 0, Ku = 0;
    DoubleChart chart;
};

struct EdgeStats {
    long tested = 0, accepted = 0;
    long realized = 0, realized_failed = 0;
};

class Alphabet {
public:
    Alphabet(const Nuh& nuh, const Sections& S);
    LazyNet& net() { return net_; }
    const LazyNet& net() const { return net_; }
    long vertex(long net, i128 Ks, i128 Ku);
    long find_vertex(long net, i128 Ks, i128 Ku) const;
    const std::vector<Vertex>& vertices() const { return verts_; }
    long size() const { return (long)verts_.size(); }
    const MarkovGraph& graph() const { return graph_; }
    bool has_edge(long a, long b) const { return graph_.has_edge((int)a, (int)b); }
    void note_transition(long net_a, long net_b) { transitions_[{net_a, net_b}] = true; }
    // run edge_test on every candidate pair
    EdgeStats build_edges(const std::vector<Encoding>& encs, double eps, int grid = 5);
    EdgeReport test_edge(long a, long b, double eps, int grid = 5) const;
    std::string charts_csv() const;
    std::string edges_dot() const;
    // keep the given vertices; returns old -> new ids
    std::vector<long> restrict_to(const std::vector<char>& keep);

private:
    const Nuh* nuh_;
    const Sections* S_;
    LazyNet net_;
    std::vector<Vertex> verts_;
    std::map<std::tuple<long, i128, i128>, long> index_;
    std::map<std::pair<long, long>, bool> transitions_;
    MarkovGraph graph_;
    std::vector<std::vector<long>> by_net_;
};

struct EncoderConfig {
    double eps = 0.02;
    double beta = 1.0;
};

// ladder surgery on [lo, hi) of the orbit; the range shrinks to where maximal indices exist
Encoding encode_orbit(const OrbitData& o, long lo, long hi, Alphabet& a, const Nuh& nuh, const Sections& S,
                      const EncoderConfig& cfg);
// GPO2 and GPO1 recheck of consecutive pairs, returns the number of failures
long recheck_encoding(const Encoding& e, const Alphabet& a, double eps, int grid = 5);
Gpo encoding_gpo(const Sections& S, const Alphabet& a, const Encoding& e);
// vertices used by the encodings, with the alphabet restricted to them; encodings are remapped
long prune_relevant(Alphabet& a, std::vector<Encoding>& encs);

std::string encoding_json(const Encoding& e);

} // namespace hyp
