#pragma once
// Topological Markov shifts and flows over finite graphs.
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hyp {

class MarkovGraph {
public:
    int add_vertex(const std::string& name);
    int vertex(const std::string& name) const; // -1 if absent
    int find_or_add(const std::string& name);
    void add_edge(int a, int b);
    bool has_edge(int a, int b) const;
    size_t size() const { return names_.size(); }
    size_t edge_count() const { return n_edges_; }
    const std::vector<int>& out(int v) const { return out_[v]; }
    const std::vector<int>& in(int v) const { return in_[v]; }
    const std::string& name(int v) const { return names_[v]; }
    std::vector<std::pair<int, int>> edges() const;

    // arbitrary per-vertex record, kept as serialized text
    std::map<int, std::string> payload;

    std::string to_dot(const std::string& graph_name = "G") const;
    std::string to_edge_text() const;
    static MarkovGraph from_edge_text(const std::string& text);
    static MarkovGraph from_dot(const std::string& text);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<std::vector<int>> out_, in_;
    size_t n_edges_ = 0;
};

// Eventually periodic bi-infinite path: ...PP core FF...
struct SymbolPath {
    std::vector<int> past_cycle;
    std::vector<int> core;
    std::vector<int> future_cycle;
    long origin = 0; // index of position 0 inside core

    int at(long n) const;
    bool valid(const MarkovGraph& g) const;
    // extent of the non-periodic part, relative to position 0
    long core_lo() const { return -origin; }
    long core_hi() const { return (long)core.size() - origin; }
};

SymbolPath shift(const SymbolPath& p, long k);
bool same_path(const SymbolPath& p, const SymbolPath& q);
double path_distance(const SymbolPath& p, const SymbolPath& q);

struct RoofFunction {
    std::function<double(const SymbolPath&)> eval;
    double inf = 1.0, sup = 1.0;
    int radius = 0; // coordinates |n| <= radius determine the value
    double operator()(const SymbolPath& p) const { return eval(p); }
};

RoofFunction constant_roof(double c);

double birkhoff_roof(const RoofFunction& r, const SymbolPath& p, long n);

struct SuspensionPoint {
    SymbolPath path;
    double height = 0.0;
};

SuspensionPoint suspension_flow(const RoofFunction& r, const SuspensionPoint& z, double t);
double bowen_walters_distance(const RoofFunction& r, const SuspensionPoint& a, const SuspensionPoint& b);

struct HolderFit {
    double C = 0.0, kappa = 1.0;
    size_t samples = 0;
};
// fit d(flow_t z, flow_t z') <= C d(z,z')^kappa over the supplied pairs and times
HolderFit fit_flow_holder(const RoofFunction& r,
                          const std::vector<std::pair<SuspensionPoint, SuspensionPoint>>& pairs,
                          const std::vector<double>& times);

struct RegularVerdict {
    bool regular = false;
    bool undetermined = false;
};
RegularVerdict regular_test(const SymbolPath& p);
// finite window w with position 0 at w[origin]
RegularVerdict regular_test_window(const std::vector<int>& w, long origin);

std::vector<std::vector<int>> irreducible_components(const MarkovGraph& g);
// O(V^3) all-pairs reachability, for cross-checking
std::vector<std::vector<int>> irreducible_components_bruteforce(const MarkovGraph& g);

std::string format_word(const MarkovGraph& g, const std::vector<int>& w);
std::vector<int> parse_word(const MarkovGraph& g, const std::string& s);
std::string format_point(const MarkovGraph& g, const SuspensionPoint& z);
SuspensionPoint parse_point(const MarkovGraph& g, const std::string& s);

} // namespace hyp
