#include "hypcode/symbolic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hyp {

int MarkovGraph::add_vertex(const std::string& name)
{
    auto it = index_.find(name);
    if (it != index_.end())
        throw std::invalid_argument("duplicate vertex " + name);
    int id = (int)names_.size();
    names_.push_back(name);
    index_[name] = id;
    out_.emplace_back();
    in_.emplace_back();
    return id;
}

int MarkovGraph::vertex(const std::string& name) const
{
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
}

int MarkovGraph::find_or_add(const std::string& name)
{
    int v = vertex(name);
    return v >= 0 ? v : add_vertex(name);
}

void MarkovGraph::add_edge(int a, int b)
{
    if (a < 0 || b < 0 || a >= (int)size() || b >= (int)size())
        throw std::out_of_range("edge endpoint is not a vertex");
    if (has_edge(a, b))
        return;
    auto& o = out_[a];
    o.insert(std::lower_bound(o.begin(), o.end(), b), b);
    auto& i = in_[b];
    i.insert(std::lower_bound(i.begin(), i.end(), a), a);
    ++n_edges_;
}

bool MarkovGraph::has_edge(int a, int b) const
{
    const auto& o = out_[a];
    return std::binary_search(o.begin(), o.end(), b);
}

std::vector<std::pair<int, int>> MarkovGraph::edges() const
{
    std::vector<std::pair<int, int>> e;
    e.reserve(n_edges_);
    for (int a = 0; a < (int)size(); ++a)
        for (int b : out_[a])
            e.emplace_back(a, b);
    return e;
}

std::string MarkovGraph::to_dot(const std::string& graph_name) const
{
    std::ostringstream os;
    os << "digraph " << graph_name << " {\n";
    for (size_t v = 0; v < size(); ++v)
        os << "  \"" << names_[v] << "\";\n";
    for (auto [a, b] : edges())
        os << "  \"" << names_[a] << "\" -> \"" << names_[b] << "\";\n";
    os << "}\n";
    return os.str();
}

std::string MarkovGraph::to_edge_text() const
{
    std::ostringstream os;
    for (size_t v = 0; v < size(); ++v)
        if (out_[v].empty() && in_[v].empty())
            os << "vertex " << names_[v] << "\n";
    for (auto [a, b] : edges())
        os << "edge " << names_[a] << " " << names_[b] << "\n";
    return os.str();
}

MarkovGraph MarkovGraph::from_edge_text(const std::string& text)
{
    MarkovGraph g;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kw, a, b;
        if (!(ls >> kw) || kw[0] == '#')
            continue;
        if (kw == "vertex" && ls >> a) {
            g.find_or_add(a);
        } else if (kw == "edge" && ls >> a >> b) {
            int va = g.find_or_add(a);
            int vb = g.find_or_add(b);
            g.add_edge(va, vb);
        } else {
            throw std::runtime_error("bad edge line " + std::to_string(lineno));
        }
    }
    return g;
}

static std::string unquote(std::string s)
{
    while (!s.empty() && (s.back() == ';' || s.back() == ' '))
        s.pop_back();
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        s = s.substr(1, s.size() - 2);
    return s;
}

MarkovGraph MarkovGraph::from_dot(const std::string& text)
{
    MarkovGraph g;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos)
            continue;
        line = line.substr(first);
        if (line.rfind("digraph", 0) == 0 || line[0] == '}')
            continue;
        auto arrow = line.find("->");
        if (arrow == std::string::npos) {
            auto name = unquote(line);
            if (!name.empty())
                g.find_or_add(name);
            continue;
        }
        auto a = unquote(line.substr(0, arrow));
        while (!a.empty() && a.back() == ' ')
            a.pop_back();
        auto rest = line.substr(arrow + 2);
        rest = rest.substr(rest.find_first_not_of(' '));
        auto b = unquote(rest);
        g.add_edge(g.find_or_add(unquote(a)), g.find_or_add(b));
    }
    return g;
}

// ---- paths ----

int SymbolPath::at(long n) const
{
    long idx = origin + n;
    long c = (long)core.size();
    if (idx >= 0 && idx < c)
        return core[idx];
    if (idx >= c) {
        if (future_cycle.empty())
            throw std::logic_error("path has no future cycle");
        long L = (long)future_cycle.size();
        return future_cycle[(idx - c) % L];
    }
    if (past_cycle.empty())
        throw std::logic_error("path has no past cycle");
    long L = (long)past_cycle.size();
    long back = (-idx - 1) % L;
    return past_cycle[L - 1 - back];
}

bool SymbolPath::valid(const MarkovGraph& g) const
{
    if (past_cycle.empty() || future_cycle.empty())
        return false;
    auto ok = [&](int v) { return v >= 0 && v < (int)g.size(); };
    for (auto* w : {&past_cycle, &core, &future_cycle})
        for (int v : *w)
            if (!ok(v))
                return false;
    auto cyc = [&](const std::vector<int>& c) {
        for (size_t i = 0; i < c.size(); ++i)
            if (!g.has_edge(c[i], c[(i + 1) % c.size()]))
                return false;
        return true;
    };
    if (!cyc(past_cycle) || !cyc(future_cycle))
        return false;
    // the finite stretch joining the two cycles
    long lo = core_lo() - 1, hi = core_hi();
    for (long n = lo; n < hi; ++n)
        if (!g.has_edge(at(n), at(n + 1)))
            return false;
    return true;
}

SymbolPath shift(const SymbolPath& p, long k)
{
    SymbolPath q = p;
    q.origin += k;
    return q;
}

static long horizon(const SymbolPath& p, const SymbolPath& q)
{
    long span = std::max({std::labs(p.core_lo()), std::labs(p.core_hi()),
                          std::labs(q.core_lo()), std::labs(q.core_hi())});
    long lf = std::lcm((long)p.future_cycle.size(), (long)q.future_cycle.size());
    long lp = std::lcm((long)p.past_cycle.size(), (long)q.past_cycle.size());
    return span + std::max(lf, lp) + 1;
}

bool same_path(const SymbolPath& p, const SymbolPath& q)
{
    return path_distance(p, q) == 0.0;
}

double path_distance(const SymbolPath& p, const SymbolPath& q)
{
    long B = horizon(p, q);
    for (long n = 0; n <= B; ++n) {
        if (p.at(n) != q.at(n) || p.at(-n) != q.at(-n))
            return std::exp(-(double)n);
    }
    return 0.0;
}

RoofFunction constant_roof(double c)
{
    RoofFunction r;
    r.eval = [c](const SymbolPath&) { return c; };
    r.inf = r.sup = c;
    r.radius = 0;
    return r;
}

double birkhoff_roof(const RoofFunction& r, const SymbolPath& p, long n)
{
    double s = 0.0;
    if (n >= 0) {
        for (long k = 0; k < n; ++k)
            s += r(shift(p, k));
        return s;
    }
    for (long k = n; k < 0; ++k)
        s += r(shift(p, k));
    return -s;
}

SuspensionPoint suspension_flow(const RoofFunction& r, const SuspensionPoint& z, double t)
{
    SuspensionPoint w = z;
    double s = z.height + t;
    if (s >= 0) {
        double rv = r(w.path);
        while (s >= rv) {
            s -= rv;
            w.path = shift(w.path, 1);
            rv = r(w.path);
        }
    } else {
        while (s < 0) {
            w.path = shift(w.path, -1);
            s += r(w.path);
        }
    }
    w.height = s;
    return w;
}

// smallest |n| with p_n != q_n, or -1 if the paths agree
static long first_difference(const SymbolPath& p, const SymbolPath& q)
{
    long B = horizon(p, q);
    for (long n = 0; n <= B; ++n)
        if (p.at(n) != q.at(n) || p.at(-n) != q.at(-n))
            return n;
    return -1;
}

// Sup of |f(a) - f(b)| over the test functions
//   f(p,t) = e^{-n} (w0(t) [p in c] + w1(t) [sp in c]),  c an n-cylinder,
// with weights (1-t, t) and (1-t, t^2), together with the circle distance of
// the normalized heights. Each f is continuous across the roof, so this is a
// metric on the suspension by construction.
double bowen_walters_distance(const RoofFunction& r, const SuspensionPoint& a, const SuspensionPoint& b)
{
    double ta = a.height / r(a.path);
    double tb = b.height / r(b.path);
    double dt = std::fabs(ta - tb);
    double best = std::min(dt, 1.0 - dt);

    const SymbolPath P[4] = {a.path, shift(a.path, 1), b.path, shift(b.path, 1)};
    long m[4][4];
    std::vector<long> levels{0};
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            m[i][j] = i == j ? -1 : first_difference(P[i], P[j]);
            if (m[i][j] >= 0)
                levels.push_back(m[i][j]);
        }
    auto in = [&](int i, int j, long n) { return m[i][j] < 0 || m[i][j] > n ? 1.0 : 0.0; };
    const double wa[2][2] = {{1 - ta, ta}, {1 - ta, ta * ta}};
    const double wb[2][2] = {{1 - tb, tb}, {1 - tb, tb * tb}};
    for (long n : levels) {
        double e = std::exp(-(double)n);
        for (int i = 0; i < 4; ++i)
            for (int k = 0; k < 2; ++k) {
                double v = (wa[k][0] * in(i, 0, n) - wb[k][0] * in(i, 2, n))
                         + (wa[k][1] * in(i, 1, n) - wb[k][1] * in(i, 3, n));
                best = std::max(best, e * std::fabs(v));
            }
    }
    return best;
}

HolderFit fit_flow_holder(const RoofFunction& r,
                          const std::vector<std::pair<SuspensionPoint, SuspensionPoint>>& pairs,
                          const std::vector<double>& times)
{
    std::vector<std::pair<double, double>> obs; // (d, d_t)
    for (auto& [z, w] : pairs) {
        double d = bowen_walters_distance(r, z, w);
        if (d <= 0)
            continue;
        for (double t : times) {
            double dt = bowen_walters_distance(r, suspension_flow(r, z, t), suspension_flow(r, w, t));
            obs.emplace_back(d, dt);
        }
    }
    HolderFit best;
    best.samples = obs.size();
    if (obs.empty())
        return best;
    // largest exponent on a grid whose constant stays moderate
    double fallbackC = 0, fallbackK = 0.05;
    for (int i = 20; i >= 1; --i) {
        double k = i * 0.05;
        double C = 0;
        for (auto [d, dt] : obs)
            C = std::max(C, dt / std::pow(d, k));
        if (i == 1)
            fallbackC = C;
        if (C <= 10.0) {
            best.C = C;
            best.kappa = k;
            return best;
        }
    }
    best.C = fallbackC;
    best.kappa = fallbackK;
    return best;
}

RegularVerdict regular_test(const SymbolPath& p)
{
    RegularVerdict v;
    v.regular = !p.past_cycle.empty() && !p.future_cycle.empty();
    return v;
}

RegularVerdict regular_test_window(const std::vector<int>& w, long origin)
{
    RegularVerdict v;
    auto has_repeat = [](auto b, auto e) {
        std::vector<int> s(b, e);
        std::sort(s.begin(), s.end());
        return std::adjacent_find(s.begin(), s.end()) != s.end();
    };
    if (origin < 0 || origin >= (long)w.size()) {
        v.undetermined = true;
        return v;
    }
    bool fut = has_repeat(w.begin() + origin, w.end());
    bool past = has_repeat(w.begin(), w.begin() + origin + 1);
    v.regular = fut && past;
    v.undetermined = !v.regular;
    return v;
}

// iterative Tarjan
std::vector<std::vector<int>> irreducible_components(const MarkovGraph& g)
{
    int n = (int)g.size();
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<char> on(n, 0);
    std::vector<int> stk;
    std::vector<std::pair<int, size_t>> call;
    int counter = 0, ncomp = 0;
    std::vector<std::vector<int>> comps;
    for (int s = 0; s < n; ++s) {
        if (index[s] >= 0)
            continue;
        call.emplace_back(s, 0);
        index[s] = low[s] = counter++;
        stk.push_back(s);
        on[s] = 1;
        while (!call.empty()) {
            auto& [v, i] = call.back();
            const auto& o = g.out(v);
            if (i < o.size()) {
                int w = o[i++];
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stk.push_back(w);
                    on[w] = 1;
                    call.emplace_back(w, 0);
                } else if (on[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::vector<int> c;
                int w;
                do {
                    w = stk.back();
                    stk.pop_back();
                    on[w] = 0;
                    comp[w] = ncomp;
                    c.push_back(w);
                } while (w != v);
                ++ncomp;
                comps.push_back(std::move(c));
            }
            int done = v;
            call.pop_back();
            if (!call.empty())
                low[call.back().first] = std::min(low[call.back().first], low[done]);
        }
    }
    std::vector<std::vector<int>> out;
    for (auto& c : comps) {
        bool has_edge = c.size() > 1 || g.has_edge(c[0], c[0]);
        if (!has_edge)
            continue;
        std::sort(c.begin(), c.end());
        out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::vector<int>> irreducible_components_bruteforce(const MarkovGraph& g)
{
    int n = (int)g.size();
    std::vector<std::vector<char>> R(n, std::vector<char>(n, 0));
    for (auto [a, b] : g.edges())
        R[a][b] = 1;
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (R[i][k])
                for (int j = 0; j < n; ++j)
                    if (R[k][j])
                        R[i][j] = 1;
    std::vector<char> used(n, 0);
    std::vector<std::vector<int>> out;
    for (int i = 0; i < n; ++i) {
        if (used[i] || !R[i][i])
            continue;
        std::vector<int> c;
        for (int j = 0; j < n; ++j)
            if (R[i][j] && R[j][i]) {
                c.push_back(j);
                used[j] = 1;
            }
        out.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---- text forms ----

static bool single_char_names(const MarkovGraph& g, const std::vector<int>& w)
{
    for (int v : w)
        if (g.name(v).size() != 1)
            return false;
    return true;
}

std::string format_word(const MarkovGraph& g, const std::vector<int>& w)
{
    std::string s;
    bool compact = single_char_names(g, w);
    for (size_t i = 0; i < w.size(); ++i) {
        if (!compact && i)
            s += '.';
        s += g.name(w[i]);
    }
    return s;
}

std::vector<int> parse_word(const MarkovGraph& g, const std::string& s)
{
    std::vector<int> w;
    if (s.empty())
        return w;
    auto push = [&](const std::string& name) {
        int v = g.vertex(name);
        if (v < 0)
            throw std::runtime_error("unknown vertex '" + name + "'");
        w.push_back(v);
    };
    if (s.find('.') != std::string::npos || g.vertex(s) >= 0) {
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, '.'))
            push(tok);
    } else {
        for (char c : s)
            push(std::string(1, c));
    }
    return w;
}

std::string format_point(const MarkovGraph& g, const SuspensionPoint& z)
{
    std::ostringstream os;
    os.precision(17);
    os << "(past=" << format_word(g, z.path.past_cycle) << ";core=" << format_word(g, z.path.core)
       << "@" << z.path.origin << ";future=" << format_word(g, z.path.future_cycle) << ", "
       << z.height << ")";
    return os.str();
}

SuspensionPoint parse_point(const MarkovGraph& g, const std::string& s)
{
    auto lp = s.find('('), rp = s.rfind(')'), comma = s.rfind(',');
    if (lp == std::string::npos || rp == std::string::npos || comma == std::string::npos)
        throw std::runtime_error("bad suspension point: " + s);
    std::string body = s.substr(lp + 1, comma - lp - 1);
    std::string h = s.substr(comma + 1, rp - comma - 1);
    SuspensionPoint z;
    z.height = std::stod(h);
    std::stringstream ss(body);
    std::string part;
    while (std::getline(ss, part, ';')) {
        auto eq = part.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad path: " + body);
        std::string key = part.substr(0, eq), val = part.substr(eq + 1);
        if (key == "past") {
            z.path.past_cycle = parse_word(g, val);
        } else if (key == "future") {
            z.path.future_cycle = parse_word(g, val);
        } else if (key == "core") {
            auto at = val.rfind('@');
            if (at == std::string::npos)
                throw std::runtime_error("core needs @origin");
            z.path.core = parse_word(g, val.substr(0, at));
            z.path.origin = std::stol(val.substr(at + 1));
        } else {
            throw std::runtime_error("unknown key " + key);
        }
    }
    return z;
}

} // namespace hyp
