#include "hypcode/pipeline.hpp"

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

namespace hyp {

namespace fs = std::filesystem;

Stage parse_stage(const std::string& s)
{
    static const std::pair<const char*, Stage> names[] = {
        {"sections", Stage::Sections}, {"nuh", Stage::Nuh},       {"charts", Stage::Charts}, {"gpo", Stage::Gpo},
        {"coarse", Stage::Coarse},     {"markov", Stage::Markov}, {"second", Stage::Second}};
    for (auto [n, st] : names)
        if (s == n)
            return st;
    throw ConfigError("unknown stage '" + s + "'");
}

std::string stage_name(Stage s)
{
    const char* n[] = {"sections", "nuh", "charts", "gpo", "coarse", "markov", "second"};
    return n[(int)s];
}

std::vector<int> criteria_of(Stage s)
{
    switch (s) {
    case Stage::Sections:
        return {1};
    case Stage::Nuh:
        return {2, 3, 4};
    case Stage::Charts:
        return {};
    case Stage::Gpo:
        return {5};
    case Stage::Coarse:
        return {6};
    case Stage::Markov:
        return {7, 10};
    case Stage::Second:
        return {8, 9};
    }
    return {};
}

bool RunResult::ok() const
{
    if (!hard_failure.empty())
        return false;
    for (const auto& c : criteria)
        if (!c.pass)
            return false;
    return true;
}

// ---- configuration

namespace {

void only_keys(const ojson& j, const std::string& where, std::initializer_list<const char*> keys)
{
    if (!j.is_object())
        throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys)
            known |= it.key() == k;
        if (!known)
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

template <class T>
void take(const ojson& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "'");
    }
}

} // namespace

PipelineConfig parse_config(const ojson& j)
{
    PipelineConfig c;
    only_keys(j, "config", {"model", "constants", "sections", "sampling", "encoder", "markov", "seed", "output"});
    if (j.contains("model")) {
        const auto& m = j["model"];
        only_keys(m, "model", {"matrix", "roof", "delta", "experimental", "stretch"});
        if (m.contains("matrix")) {
            std::vector<long> a;
            take(m, "matrix", a);
            if (a.size() != 4)
                throw ConfigError("matrix needs 4 entries");
            c.model.A = {a[0], a[1], a[2], a[3]};
        }
        if (m.contains("roof")) {
            std::string r;
            take(m, "roof", r);
            try {
                c.model.roof = parse_roof_kind(r);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        take(m, "delta", c.model.delta);
        take(m, "experimental", c.experimental);
        if (m.contains("stretch")) {
            const auto& s = m["stretch"];
            only_keys(s, "stretch", {"u1", "u2", "width"});
            take(s, "u1", c.model.stretch_u1);
            take(s, "u2", c.model.stretch_u2);
            take(s, "width", c.model.stretch_width);
        }
    }
    c.sections = default_sections(c.model.roof);
    if (j.contains("constants")) {
        const auto& k = j["constants"];
        only_keys(k, "constants", {"chi", "beta", "rho", "eps"});
        take(k, "chi", c.model.chi);
        take(k, "beta", c.model.beta);
        take(k, "rho", c.model.rho);
        take(k, "eps", c.model.eps);
    }
    if (j.contains("sections")) {
        const auto& s = j["sections"];
        only_keys(s, "sections", {"n1", "n2", "offset", "hat_scale", "base", "margin", "color_step", "gap"});
        take(s, "n1", c.sections.n1);
        take(s, "n2", c.sections.n2);
        take(s, "offset", c.sections.offset);
        take(s, "hat_scale", c.sections.hat_scale);
        take(s, "base", c.sections.base);
        take(s, "margin", c.sections.margin);
        take(s, "color_step", c.sections.color_step);
        take(s, "gap", c.sections.gap);
    }
    if (j.contains("sampling")) {
        const auto& s = j["sampling"];
        auto& o = c.sampling;
        only_keys(s, "sampling",
                  {"cover_grid_fibre", "cover_grid_height", "cocycle_samples", "diag_samples", "zp_orbits",
                   "zp_indices", "contraction_trials", "seed_depth", "generic_orbits", "generic_extra",
                   "het_crossings", "fibre_depth", "refine_N", "cylinder_depth", "cylinder_words", "diam_lo", "diam_hi",
                   "diam_words", "preimage_points", "preimage_depth", "bowen_window"});
        take(s, "cover_grid_fibre", o.cover_grid_fibre);
        take(s, "cover_grid_height", o.cover_grid_height);
        take(s, "cocycle_samples", o.cocycle_samples);
        take(s, "diag_samples", o.diag_samples);
        take(s, "zp_orbits", o.zp_orbits);
        take(s, "zp_indices", o.zp_indices);
        take(s, "contraction_trials", o.contraction_trials);
        take(s, "seed_depth", o.seed_depth);
        take(s, "generic_orbits", o.generic_orbits);
        take(s, "generic_extra", o.generic_extra);
        take(s, "het_crossings", o.het_crossings);
        take(s, "fibre_depth", o.fibre_depth);
        take(s, "refine_N", o.refine_N);
        take(s, "cylinder_depth", o.cylinder_depth);
        take(s, "cylinder_words", o.cylinder_words);
        take(s, "diam_lo", o.diam_lo);
        take(s, "diam_hi", o.diam_hi);
        take(s, "diam_words", o.diam_words);
        take(s, "preimage_points", o.preimage_points);
        take(s, "preimage_depth", o.preimage_depth);
        take(s, "bowen_window", o.bowen_window);
    }
    if (j.contains("encoder")) {
        const auto& e = j["encoder"];
        only_keys(e, "encoder", {"eps", "beta"});
        c.encoder.eps = c.model.eps;
        c.encoder.beta = c.model.beta;
        take(e, "eps", c.encoder.eps);
        take(e, "beta", c.encoder.beta);
    } else {
        c.encoder.eps = c.model.eps;
        c.encoder.beta = c.model.beta;
    }
    if (j.contains("markov")) {
        const auto& m = j["markov"];
        only_keys(m, "markov", {"tau", "window", "max_bracket_pairs"});
        take(m, "tau", c.markov.tau);
        take(m, "window", c.markov.window);
        take(m, "max_bracket_pairs", c.markov.max_bracket_pairs);
    }
    c.markov.N = c.sampling.refine_N;
    c.markov.fibre_depth = c.sampling.fibre_depth;
    take(j, "seed", c.seed);
    take(j, "output", c.output);
    validate(c);
    return c;
}

PipelineConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read " + path);
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("parse error: ") + e.what());
    }
    return parse_config(j);
}

void validate(const PipelineConfig& c)
{
    const auto& m = c.model;
    std::unique_ptr<ModelFlow> flow;
    try {
        flow = std::make_unique<ModelFlow>(m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (m.roof == RoofKind::Stretch && !c.experimental)
        throw ConfigError("the stretch roof needs model.experimental = true");
    if (!(m.chi > 0 && m.chi < flow->log_lambda()))
        throw ConfigError("need 0 < chi < log lambda");
    if (!(m.eps > 0 && m.eps < m.rho))
        throw ConfigError("need 0 < eps < rho");
    if (!(m.beta > 0 && m.beta < 2) || !(c.encoder.beta > 0 && c.encoder.beta < 2))
        throw ConfigError("need 0 < beta < 2");
    if (!(m.rho > 0 && m.rho < flow->roof_min()))
        throw ConfigError("need 0 < rho < min roof");
    const auto& s = c.sampling;
    auto positive = [](long v, const char* what) {
        if (v <= 0)
            throw ConfigError(std::string(what) + " must be positive");
    };
    positive(s.cover_grid_fibre, "cover_grid_fibre");
    positive(s.cover_grid_height, "cover_grid_height");
    positive(s.cocycle_samples, "cocycle_samples");
    positive(s.diag_samples, "diag_samples");
    positive(s.zp_orbits, "zp_orbits");
    positive(s.zp_indices, "zp_indices");
    positive(s.contraction_trials, "contraction_trials");
    positive(s.seed_depth, "seed_depth");
    positive(s.generic_extra, "generic_extra");
    positive(s.het_crossings, "het_crossings");
    positive(s.fibre_depth, "fibre_depth");
    positive(s.refine_N, "refine_N");
    positive(s.cylinder_depth, "cylinder_depth");
    positive(s.cylinder_words, "cylinder_words");
    positive(s.diam_words, "diam_words");
    positive(s.preimage_points, "preimage_points");
    positive(s.preimage_depth, "preimage_depth");
    positive(s.bowen_window, "bowen_window");
    if (s.generic_orbits < 0)
        throw ConfigError("generic_orbits must be >= 0");
    if (!(s.diam_lo >= 1 && s.diam_hi >= s.diam_lo + 2))
        throw ConfigError("need 1 <= diam_lo and diam_lo + 2 <= diam_hi");
    if (!(c.markov.tau > 0) || !(c.markov.window > 0 && c.markov.window <= 1))
        throw ConfigError("need tau > 0 and 0 < window <= 1");
}

// ---- run state

namespace {

struct World {
    const PipelineConfig& cfg;
    std::string dir;
    ModelFlow m;
    Nuh nuh;
    Sections S;
    std::unique_ptr<Alphabet> alpha;
    std::vector<std::unique_ptr<OrbitData>> orbits;
    std::vector<Encoding> encs;
    std::vector<long> generic; // encodings of generic orbits
    std::unique_ptr<MarkovCover> cover;
    std::unique_ptr<Partition> part;
    std::vector<long> periodic_samples;

    explicit World(const PipelineConfig& c, const std::string& d)
        : cfg(c), dir(d), m(c.model), nuh(m), S(m, c.sections, c.model.rho)
    {
    }
    std::mt19937_64 rng(uint64_t stream) const { return std::mt19937_64(cfg.seed * 1000003ULL + stream); }
    long pad() const { return (long)(nuh.default_horizon() / S.min_return_bound()) + 50; }
    void write(const std::string& name, const std::string& text) const
    {
        fs::path p = fs::path(dir) / name;
        fs::create_directories(p.parent_path());
        std::ofstream out(p, std::ios::binary);
        out << text;
    }
    void write_json(const std::string& name, const ojson& j) const { write(name, j.dump(2) + "\n"); }
};

// Q at every hit; z-indexed parameters need nothing else
void hit_Q(const World& w, OrbitData& o)
{
    o.Q.assign(o.size(), 0);
    const long n = o.size();
#pragma omp parallel for schedule(dynamic, 64)
    for (long i = 0; i < n; ++i)
        o.Q[i] = w.nuh.params(w.S.point(o.hits[i])).Q;
}

double rel_err(const Eigen::Matrix2d& a, const Eigen::Matrix2d& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

std::string fmt(double v)
{
    char b[40];
    std::snprintf(b, sizeof b, "%.17g", v);
    return b;
}

// ---- criterion 1

CriterionResult crit_cocycle(World& w)
{
    auto t0 = std::chrono::steady_clock::now();
    auto rng = w.rng(1);
    const auto& m = w.m;
    std::uniform_real_distribution<double> T(-3, 3);
    double worst_phi = 0, worst_birk = 0, worst_flow = 0;
    long n = w.cfg.sampling.cocycle_samples;
    for (long i = 0; i < n; ++i) {
        PointM x = m.random_point(rng);
        double a = T(rng), b = T(rng);
        Eigen::Matrix2d lhs = induced_phi(m, x, a + b);
        Eigen::Matrix2d rhs = induced_phi(m, flow(m, x, a), b) * induced_phi(m, x, a);
        worst_phi = std::max(worst_phi, rel_err(lhs, rhs));
        // roof sums along A-orbits: S_{p+q} = S_p + S_q o A^p, and the flow hits the base at S_p
        Torus2 u = random_torus(rng);
        int p = (int)(rng() % 12), q = (int)(rng() % 12);
        double Sp = 0, Sq = 0, Spq = 0;
        Torus2 v = u;
        for (int k = 0; k < p + q; ++k) {
            double r = m.roof(v);
            Spq += r;
            (k < p ? Sp : Sq) += r;
            v = apply(m.A(), v);
        }
        double back = 0;
        Torus2 z = u;
        for (int k = 0; k < p; ++k) {
            z = apply(m.Ainv(), z);
            back -= m.roof(z);
        }
        worst_birk = std::max(worst_birk, std::fabs(Spq - (Sp + Sq)) / std::max(1.0, Spq));
        // flows by S_p and by the backward sum land on the base over A^p u and A^-p u
        for (auto [t, target] : {std::pair{Sp + Sq, v}, std::pair{back, z}}) {
            PointM y = flow(m, PointM{u, 0.0}, t);
            double e;
            if (y.u == target)
                e = std::fabs(y.h);
            else
                e = std::fabs(y.h - m.roof(y.u)) + (apply(m.A(), y.u) == target ? 0 : 1);
            worst_flow = std::max(worst_flow, e);
        }
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CriterionResult r{1, "cocycle laws", false, {}};
    r.detail["samples"] = n;
    r.detail["phi_cocycle_err"] = worst_phi;
    r.detail["birkhoff_err"] = worst_birk;
    r.detail["flow_to_base_err"] = worst_flow;
    r.detail["tolerance"] = 1e-10;
    r.detail["runtime_under_5s"] = secs < 5;
    r.pass = worst_phi <= 1e-10 && worst_birk <= 1e-10 && worst_flow <= 1e-10 && secs < 5;
    return r;
}

// ---- criteria 2, 3, 4

// constant roof oracle: integral of e^{2 chi t} lambda^{-2 k(t)} from height 1 - tau
double const_integral(double chi, double lambda, double tau)
{
    double W1 = (std::exp(2 * chi) - 1) / (2 * chi);
    double tail = W1 / (1 - std::exp(2 * chi) / (lambda * lambda));
    return (std::exp(2 * chi * tau) - 1) / (2 * chi) + std::exp(2 * chi * tau) / (lambda * lambda) * tail;
}

CriterionResult crit_closed_form(World& w)
{
    CriterionResult r{2, "closed form s,u", true, {}};
    if (!w.m.constant_roof() || w.m.roof_min() != 1.0) {
        r.detail["applicable"] = false;
        return r;
    }
    r.detail["applicable"] = true;
    const double chi = w.m.config().chi, rho = w.m.config().rho, lam = w.m.lambda();
    auto rng = w.rng(2);
    double worst = 0, smin = 1e300;
    long n = 0;
    Hit h = w.S.first_hit(w.m.random_point(rng));
    for (int i = 0; i < 1000; ++i, h = w.S.next(h)) {
        PointM x = w.S.point(h);
        auto su = w.nuh.compute_su(x);
        double s = 2 * std::exp(2 * rho) * std::sqrt(const_integral(chi, lam, 1 - x.h));
        double u = 2 * std::exp(2 * rho) * std::sqrt(const_integral(chi, lam, x.h));
        worst = std::max({worst, std::fabs(su.s / s - 1), std::fabs(su.u / u - 1)});
        smin = std::min({smin, su.s, su.u});
        ++n;
    }
    r.detail["section_points"] = n;
    r.detail["worst_rel_err"] = worst;
    r.detail["min_s_u"] = smin;
    r.pass = worst <= 1e-6 && smin >= std::sqrt(2.0);
    return r;
}

CriterionResult crit_diag(World& w)
{
    CriterionResult r{3, "diagonalization bounds", false, {}};
    const auto& m = w.m;
    const double rho = m.config().rho, chi = m.config().chi;
    auto rng = w.rng(3);
    std::uniform_real_distribution<double> T(0, 2 * rho), Ts(-2 * rho, 2 * rho);
    double off_max = 0, ratio_su = 0, ratio_alpha = 0;
    long bad = 0, n = w.cfg.sampling.diag_samples;
    for (long i = 0; i < n; ++i) {
        PointM x = m.random_point(rng);
        double t = T(rng);
        if (t == 0)
            t = rho;
        double off;
        auto AB = w.nuh.reduce(x, t, &off);
        off_max = std::max(off_max, off);
        double a = std::fabs(AB(0)), b = std::fabs(AB(1));
        bad += !(a > std::exp(-4 * rho) && a < std::exp(-chi * t) && b > std::exp(chi * t) && b < std::exp(4 * rho));
        double ts = Ts(rng);
        PointM y = flow(m, x, ts);
        auto px = w.nuh.params(x), py = w.nuh.params(y);
        ratio_su = std::max({ratio_su, std::fabs(std::log(py.s / px.s)), std::fabs(std::log(py.u / px.u))});
        ratio_alpha = std::max(ratio_alpha, std::fabs(std::log(std::sin(py.alpha) / std::sin(px.alpha))));
    }
    r.detail["samples"] = n;
    r.detail["max_offdiag"] = off_max;
    r.detail["norm_bound_failures"] = bad;
    r.detail["max_log_ratio_su"] = ratio_su;
    r.detail["max_log_ratio_sin_alpha"] = ratio_alpha;
    r.pass = off_max <= 1e-8 && bad == 0 && ratio_su <= 10 * rho && ratio_alpha <= 8 * rho;
    return r;
}

CriterionResult crit_zindexed(World& w)
{
    CriterionResult r{4, "greedy recursion equivalence", false, {}};
    const double eps = w.nuh.eps(), rho = w.m.config().rho, beta = w.m.config().beta;
    const double frak_h = eps * rho + 250 * rho / beta;
    const long pad = w.pad(), ni = w.cfg.sampling.zp_indices;
    auto rng = w.rng(4);
    long mismatches = 0, compared = 0;
    double worst_ratio = 0;
    std::ostringstream csv;
    csv << "orbit,index,tile,level,u1,u2,h,Q,log_ps,log_pu\n";
    for (int k = 0; k < w.cfg.sampling.zp_orbits; ++k) {
        auto o = generic_orbit(w.S, w.S.first_hit(w.m.random_point(rng)), pad, pad + ni, "zp");
        hit_Q(w, o);
        auto z = z_indexed_p(o.steps, o.Q, eps, w.nuh.Q_lower(), w.S.min_return_bound(), w.S.max_return_bound());
        const long n = o.size();
        std::vector<f128> lq(n);
        for (long i = 0; i < n; ++i)
            lq[i] = logq((f128)eps * (f128)o.Q[i]);
        for (long i = pad; i < pad + ni; ++i) {
            f128 bs = 1e4000Q, bu = 1e4000Q;
            for (long j = i; j < n; ++j)
                bs = fminq(bs, lq[j] + (f128)eps * (z.T[j] - z.T[i]));
            for (long j = 0; j <= i; ++j)
                bu = fminq(bu, lq[j] + (f128)eps * (z.T[i] - z.T[j]));
            mismatches += (bs != z.log_ps[i]) + (bu != z.log_pu[i]);
            ++compared;
            // robustness against q on [t_i, t_{i+1}]
            PointM x = w.S.point(o.hits[i]);
            for (double f : {0.0, 0.5}) {
                auto lqx = w.nuh.compute_q(flow(w.m, x, f * (double)o.steps[i]), w.nuh.default_horizon());
                worst_ratio = std::max({worst_ratio, std::fabs((double)z.log_ps[i] - std::log(lqx.qs)),
                                        std::fabs((double)z.log_pu[i] - std::log(lqx.qu))});
            }
            if (k < 5) {
                const auto& h = o.hits[i];
                csv << k << "," << i << "," << h.tile << "," << h.level << "," << fmt(h.u.a.unit()) << ","
                    << fmt(h.u.b.unit()) << "," << fmt(w.S.height(h)) << "," << fmt(o.Q[i]) << ","
                    << f128_str(z.log_ps[i], 20) << "," << f128_str(z.log_pu[i], 20) << "\n";
            }
        }
    }
    w.write("params.csv", csv.str());
    r.detail["orbits"] = w.cfg.sampling.zp_orbits;
    r.detail["indices"] = compared;
    r.detail["mismatches"] = mismatches;
    r.detail["max_log_robustness"] = worst_ratio;
    r.detail["frak_h"] = frak_h;
    r.pass = mismatches == 0 && worst_ratio <= frak_h;
    return r;
}

// ---- criterion 5

AdmissibleCurve random_curve(CurveKind kind, double p, double pmin, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> U(-1, 1);
    double a = 0.9e-3 * pmin * U(rng), b = 0.4 * std::cbrt(pmin) * U(rng), c = 0.05 * std::cbrt(p) * U(rng);
    auto cv = AdmissibleCurve::constant(kind, p);
    for (int i = 0; i < AdmissibleCurve::kSamples; ++i) {
        double t = cv.t_at(i);
        cv.F[i] = a + b * t + c * t * t / p;
    }
    return cv;
}

Gpo orbit_gpo(World& w, std::mt19937_64& rng, long before, long after, std::vector<Hit>* hits_out = nullptr)
{
    const long pad = w.pad();
    auto o = generic_orbit(w.S, w.S.first_hit(w.m.random_point(rng)), pad + before, pad + after, "gpo");
    hit_Q(w, o);
    auto z = z_indexed_p(o.steps, o.Q, w.nuh.eps(), w.nuh.Q_lower(), w.S.min_return_bound(), w.S.max_return_bound());
    std::vector<DoubleChart> v;
    for (long i = pad; i < o.size() - pad; ++i) {
        v.push_back({pesin_chart(w.nuh, w.S, o.hits[i]), z.log_ps[i], z.log_pu[i]});
        if (hits_out)
            hits_out->push_back(o.hits[i]);
    }
    return make_gpo(w.S, std::move(v), before);
}

CriterionResult crit_graph_transform(World& w)
{
    CriterionResult r{5, "graph transform contraction", false, {}};
    auto rng = w.rng(5);
    const int depth = w.cfg.sampling.seed_depth;
    const long len = 120;
    std::vector<Hit> hits;
    Gpo g = orbit_gpo(w, rng, 4L * depth, len + 4L * depth, &hits);
    const double bound = std::exp(-w.m.config().chi * w.S.min_return_bound() / 2);
    double worst = 0;
    long inadmissible = 0;
    for (int t = 0; t < w.cfg.sampling.contraction_trials; ++t) {
        long i = 4L * depth + (long)(rng() % len);
        const auto& v = g.v[i];
        const auto& u = g.v[i + 1];
        auto V1 = random_curve(CurveKind::S, u.ps(), u.pmin(), rng), V2 = random_curve(CurveKind::S, u.ps(), u.pmin(), rng);
        auto o1 = graph_transform_s(g.steps[i], V1, v.ps()), o2 = graph_transform_s(g.steps[i], V2, v.ps());
        worst = std::max(worst, c0_distance(o1, o2) / c0_distance(V1, V2));
        inadmissible += !admissibility(o1, v.pmin(), w.m.config().beta).ok();
        auto U1 = random_curve(CurveKind::U, v.pu(), v.pmin(), rng), U2 = random_curve(CurveKind::U, v.pu(), v.pmin(), rng);
        auto p1 = graph_transform_u(g.steps[i], U1, u.pu()), p2 = graph_transform_u(g.steps[i], U2, u.pu());
        worst = std::max(worst, c0_distance(p1, p2) / c0_distance(U1, U2));
        inadmissible += !admissibility(p1, u.pmin(), w.m.config().beta).ok();
    }
    // two seeds from the same vertex: gap at depth 40, then at the depth the measured rate needs for 1e-8
    const long reach = 4L * depth;
    double gap_abs = 0, gap_window = 0, gap_init = 0, rate = 0;
    auto pair_gap = [&](long at, int d, bool s_kind, double& rel_init) {
        const auto& f = g.v[s_kind ? at + d : at - d];
        auto k = s_kind ? CurveKind::S : CurveKind::U;
        double p = s_kind ? f.ps() : f.pu();
        auto c1 = random_curve(k, p, f.pmin(), rng), c2 = random_curve(k, p, f.pmin(), rng);
        auto a = s_kind ? stable_curve(g, at, d, &c1) : unstable_curve(g, at, d, &c1);
        auto b = s_kind ? stable_curve(g, at, d, &c2) : unstable_curve(g, at, d, &c2);
        double gap = c0_distance(a.curve, b.curve);
        rel_init = gap / c0_distance(c1, c2);
        return gap;
    };
    const std::vector<long> ats{reach, reach + len / 2, reach + len - 1};
    for (long at : ats)
        for (bool sk : {true, false}) {
            double ri;
            double gap = pair_gap(at, depth, sk, ri);
            gap_abs = std::max(gap_abs, gap);
            gap_window = std::max(gap_window, gap / (sk ? g.v[at].ps() : g.v[at].pu()));
            gap_init = std::max(gap_init, ri);
        }
    rate = std::pow(gap_init, 1.0 / depth);
    const int d_star = (int)std::ceil(std::log(1e-8) / std::log(rate));
    double gap_star = 0;
    bool reachable = d_star <= reach;
    if (reachable)
        for (long at : ats)
            for (bool sk : {true, false}) {
                double ri;
                pair_gap(at, d_star, sk, ri);
                gap_star = std::max(gap_star, ri);
            }
    {
        std::ostringstream csv;
        csv << chart_csv_header();
        for (const auto& v : g.v)
            csv << chart_csv_row(v);
        w.write("charts.csv", csv.str());
        auto sh = shadow(w.S, g, depth, 4L * depth);
        w.write("shadow.json", shadow_json(sh) + "\n");
    }
    r.detail["trials"] = w.cfg.sampling.contraction_trials;
    r.detail["worst_c0_factor"] = worst;
    r.detail["bound"] = bound;
    r.detail["inadmissible_images"] = inadmissible;
    r.detail["seed_depth"] = depth;
    r.detail["double_seed_gap"] = gap_abs;
    r.detail["double_seed_gap_over_window"] = gap_window;
    r.detail["double_seed_gap_over_seed_gap"] = gap_init;
    r.detail["window_ps"] = g.v[reach].ps();
    r.detail["per_return_rate"] = rate;
    r.detail["depth_for_1e-8"] = d_star;
    r.detail["gap_over_seed_gap_at_that_depth"] = gap_star;
    r.pass = worst <= bound && inadmissible == 0 && gap_abs <= 1e-8 && reachable && gap_star <= 1e-8;
    return r;
}

// ---- coarse graining

void build_alphabet(World& w)
{
    const long pad = w.pad();
    const auto& ec = w.cfg.encoder;
    w.alpha = std::make_unique<Alphabet>(w.nuh, w.S);
    auto add = [&](OrbitData o, long lo, long hi) {
        w.orbits.push_back(std::make_unique<OrbitData>(std::move(o)));
        w.encs.push_back(encode_orbit(*w.orbits.back(), lo, hi, *w.alpha, w.nuh, w.S, ec));
    };
    auto per = [&](const Torus2& p, const char* name) {
        Hit h = w.S.hit_of(p, 0);
        auto o = periodic_orbit(w.S, h, 1, name);
        o = periodic_orbit(w.S, h, (2 * pad + 100) / o.period + 1, name);
        compute_hit_params(w.nuh, w.S, o);
        long lo = pad, hi = o.size() - pad;
        add(std::move(o), lo, hi);
    };
    Torus2 q = fix_point_from_ratio(1, 0, 2);
    per(Torus2{}, "O1");
    per(q, "O2");
    const int cross = w.cfg.sampling.het_crossings;
    for (int kind : {+1, -1}) {
        Torus2 p = het_point(w.m, q, kind);
        auto h = kind > 0 ? het_orbit(w.S, w.S.hit_of(p, 0), *w.orbits[0], *w.orbits[1], cross, pad, "h12")
                          : het_orbit(w.S, w.S.hit_of(p, 0), *w.orbits[1], *w.orbits[0], cross, pad, "h21");
        compute_hit_params(w.nuh, w.S, h);
        long lo = h.exact_lo, hi = h.exact_hi;
        add(std::move(h), lo, hi);
    }
    auto rng = w.rng(6);
    const long extra = w.cfg.sampling.generic_extra;
    for (int k = 0; k < w.cfg.sampling.generic_orbits; ++k) {
        auto o = generic_orbit(w.S, w.S.first_hit(w.m.random_point(rng)), pad + extra, pad + extra,
                               "g" + std::to_string(k));
        compute_hit_params(w.nuh, w.S, o);
        long lo = pad, hi = o.size() - pad;
        w.generic.push_back((long)w.orbits.size());
        add(std::move(o), lo, hi);
    }
}

CriterionResult crit_round_trip(World& w)
{
    CriterionResult r{6, "shadowing round trip", false, {}};
    build_alphabet(w);
    const double eps = w.cfg.encoder.eps, beta = w.cfg.encoder.beta;
    const double tail_bound = std::pow(eps, 3 / beta - 1);
    const double tol = w.m.constant_roof() ? 1e-6 : 1e-4;
    auto st = w.alpha->build_edges(w.encs, eps);
    long recheck = 0, ladder_bad = 0, tails_bad = 0, horizon = 0;
    double worst_shadow = 0, worst_tail = 0;
    f128 min_log_a = 0;
    ojson encs = ojson::array();
    for (size_t k = 0; k < w.encs.size(); ++k) {
        const auto& e = w.encs[k];
        recheck += recheck_encoding(e, *w.alpha, eps);
        for (const auto& x : e.idx)
            ladder_bad += !(x.log_as() <= 0 && x.log_au() <= 0 && x.log_as() > -eps && x.log_au() > -eps);
        min_log_a = std::min(min_log_a, e.min_log_a);
        worst_tail = std::max({worst_tail, e.tail_s, e.tail_u});
        tails_bad += !(e.tail_s < tail_bound && e.tail_u < tail_bound);
        horizon += e.horizon_limited;
        ojson s;
        s["name"] = e.name;
        s["size"] = e.size();
        s["min_log_a"] = (double)e.min_log_a;
        s["tail_s"] = e.tail_s;
        s["tail_u"] = e.tail_u;
        encs.push_back(s);
        if (k < 4)
            w.write("encodings/" + e.name + ".json", encoding_json(e) + "\n");
    }
    for (long k : w.generic) {
        const auto& e = w.encs[k];
        auto g = encoding_gpo(w.S, *w.alpha, e);
        auto sh = shadow(w.S, g, 40);
        worst_shadow = std::max(worst_shadow, torus_dist(sh.point.u, w.orbits[k]->hits[e.idx[g.zero].hit].u));
    }
    w.write("alphabet.csv", w.alpha->charts_csv());
    w.write("alphabet.dot", w.alpha->edges_dot());
    w.write_json("encodings.json", encs);
    r.detail["orbits"] = (long)w.generic.size();
    r.detail["encodings"] = (long)w.encs.size();
    r.detail["vertices"] = w.alpha->size();
    r.detail["edges_tested"] = st.tested;
    r.detail["edges_accepted"] = st.accepted;
    r.detail["realized_failed"] = st.realized_failed;
    r.detail["recheck_failures"] = recheck;
    r.detail["ladder_failures"] = ladder_bad;
    r.detail["min_log_a"] = (double)min_log_a;
    r.detail["worst_tail"] = worst_tail;
    r.detail["tail_bound"] = tail_bound;
    r.detail["horizon_limited"] = horizon;
    r.detail["worst_shadow_err"] = worst_shadow;
    r.detail["shadow_tolerance"] = tol;
    r.pass = recheck == 0 && ladder_bad == 0 && tails_bad == 0 && horizon == 0 && st.realized_failed == 0 &&
             worst_shadow <= tol && !w.generic.empty();
    return r;
}

// ---- Markov layer

std::string rect_dot(const Partition& p)
{
    std::ostringstream os;
    os << "graph R {\n";
    for (long r = 0; r < p.size(); ++r) {
        os << "  R" << r << " [label=\"R" << r << " (" << p.classes[r].size() << ")\"];\n";
        for (long v : p.Z[r])
            os << "  R" << r << " -- Z" << v << ";\n";
    }
    os << "}\n";
    return os.str();
}

CriterionResult crit_markov(World& w)
{
    CriterionResult r{7, "Markov property", false, {}};
    MarkovInput in;
    in.S = &w.S;
    in.a = w.alpha.get();
    in.encs = w.encs;
    for (const auto& o : w.orbits)
        in.orbits.push_back(o.get());
    w.cover = std::make_unique<MarkovCover>(in, w.cfg.markov);
    w.part = std::make_unique<Partition>(refine(*w.cover, w.cfg.markov.N));
    for (long e = 0; e < 2; ++e)
        for (long i = 0; i < w.encs[e].size(); ++i)
            w.periodic_samples.push_back(w.cover->sample_of({e, i}));
    const auto& c = *w.cover;
    const auto& p = *w.part;
    auto rep = markov_check(c, p);
    long E_max = 0, I_max = 0;
    for (long v = 0; v < c.rect_count(); ++v) {
        E_max = std::max(E_max, c.E_count(v));
        I_max = std::max(I_max, (long)c.I(v).size());
    }
    w.write("partition.csv", partition_csv(c, p));
    w.write("partition.dot", rect_dot(p));
    w.write("ghat.dot", p.G.to_dot("Ghat"));
    ojson j;
    j["samples"] = (long)c.samples().size();
    j["fibre_charts"] = [&] {
        long n = 0;
        for (long v = 0; v < c.rect_count(); ++v)
            n += (long)c.rect(v).size();
        return n;
    }();
    j["classes"] = p.size();
    j["boundary_samples"] = p.boundary;
    j["max_I"] = I_max;
    j["max_E"] = E_max;
    j["dichotomy_violations"] = c.dichotomy_violations();
    j["pairs_s"] = rep.pairs_s;
    j["pairs_u"] = rep.pairs_u;
    j["points"] = rep.points;
    j["violations"] = rep.violations;
    j["flagged"] = rep.flagged;
    j["flagged_fraction"] = rep.flagged_fraction();
    j["worst_defect"] = rep.worst_defect;
    j["class_mismatch"] = rep.class_mismatch;
    j["brackets"] = rep.brackets;
    j["brackets_on_samples"] = rep.brackets_on_samples;
    j["brackets_in_window"] = rep.brackets_in_window;
    j["bracket_law_failures"] = rep.bracket_law_failures;
    j["hyperbolic_pairs"] = rep.hyperbolic_pairs;
    j["worst_rate"] = rep.hyperbolic_pairs ? rep.worst_rate : 0.0;
    j["holonomy_mismatch"] = rep.holonomy_mismatch;
    j["witnesses"] = rep.witnesses;
    w.write_json("reports/markov.json", j);
    r.detail = j;
    r.detail.erase("witnesses");
    bool base = rep.violations == 0 && rep.bracket_law_failures == 0 && rep.holonomy_mismatch == 0 &&
                j["dichotomy_violations"].get<long>() == 0 && (rep.hyperbolic_pairs == 0 || rep.worst_rate < 0);
    if (w.m.constant_roof())
        r.pass = base && rep.flagged == 0;
    else
        r.pass = base && rep.flagged_fraction() <= 1e-3;
    return r;
}

CriterionResult crit_lift(World& w)
{
    CriterionResult r{10, "irreducible lifting", false, {}};
    auto lift = lift_hyperbolic_set(*w.cover, *w.part, w.periodic_samples);
    std::set<long> o1, o2;
    for (long i = 0; i < w.encs[0].size(); ++i)
        o1.insert(w.part->cls[w.cover->sample_of({0, i})]);
    for (long i = 0; i < w.encs[1].size(); ++i)
        o2.insert(w.part->cls[w.cover->sample_of({1, i})]);
    r.detail["component_size"] = (long)lift.component.size();
    r.detail["O1_classes"] = (long)o1.size();
    r.detail["O2_classes"] = (long)o2.size();
    r.detail["samples"] = lift.samples;
    r.detail["covered"] = lift.covered;
    r.detail["transitive"] = lift.transitive;
    r.pass = lift.transitive && lift.covered == lift.samples && lift.samples > 0;
    return r;
}

// ---- second coding

CriterionResult crit_second(World& w, std::string& hard)
{
    CriterionResult r{8, "second coding soundness", false, {}};
    const auto& c = *w.cover;
    const auto& p = *w.part;
    const auto& s = w.cfg.sampling;
    auto rng = w.rng(8);
    auto cyl = cylinder_check(c, p, s.cylinder_depth, s.cylinder_words, rng);
    auto fit = diameter_fit(c, p, s.diam_lo, s.diam_hi, s.diam_words, rng);
    auto roof = roof_check(c, p);
    if (cyl.empty > 0 && hard.empty())
        hard = "CylinderEmpty: " + std::to_string(cyl.empty) + " sampled cylinders are empty";
    r.detail["cylinder_depth"] = s.cylinder_depth;
    r.detail["words"] = cyl.words;
    r.detail["realized"] = cyl.realized;
    r.detail["companion"] = cyl.companion;
    r.detail["empty"] = cyl.empty;
    r.detail["diam_words"] = fit.words;
    r.detail["depths"] = fit.depth;
    r.detail["mean_log_diam"] = fit.mean_log_diam;
    r.detail["theta"] = fit.theta;
    r.detail["r2"] = fit.r2;
    r.detail["worst_word_r2"] = fit.worst_word_r2;
    r.detail["pi_hat_err"] = fit.pi_hat_err;
    r.detail["roof_checked"] = roof.checked;
    r.detail["roof_min"] = roof.min;
    r.detail["roof_max"] = roof.max;
    r.detail["conjugacy_err"] = roof.conjugacy_err;
    r.detail["rho"] = w.S.rho();
    r.pass = cyl.empty == 0 && cyl.words > 0 && fit.words > 0 && fit.theta < 1 && fit.r2 > 0.99 && roof.checked > 0 &&
             roof.min > 0 && roof.max < w.S.rho();
    return r;
}

CriterionResult crit_finite(World& w, std::string& hard)
{
    CriterionResult r{9, "finite-to-one", false, {}};
    const auto& c = *w.cover;
    const auto& p = *w.part;
    const auto& s = w.cfg.sampling;
    auto af = affiliation(c, p);
    // samples with classified returns on both sides
    std::vector<long> pool;
    for (long x = 0; x < (long)p.cls.size(); ++x) {
        bool ok = p.cls[x] >= 0;
        long a = x, b = x;
        for (int k = 0; k < s.preimage_depth && ok; ++k) {
            a = c.sample(a).next;
            b = c.sample(b).prev;
            ok = a >= 0 && b >= 0 && p.cls[a] >= 0 && p.cls[b] >= 0;
        }
        if (ok)
            pool.push_back(x);
    }
    auto rng = w.rng(9);
    std::shuffle(pool.begin(), pool.end(), rng);
    if ((long)pool.size() > s.preimage_points)
        pool.resize(s.preimage_points);
    std::sort(pool.begin(), pool.end());
    long over = 0, max_count = 0;
    ojson pts = ojson::array();
    for (long x : pool) {
        auto pr = preimage_search(c, p, af, x, s.preimage_depth);
        over += pr.count > pr.bound;
        max_count = std::max(max_count, pr.count);
        ojson e;
        e["sample"] = x;
        e["count"] = pr.count;
        e["bound"] = pr.bound;
        e["R"] = pr.R;
        e["S"] = pr.S;
        e["counts_by_depth"] = pr.counts_by_depth;
        pts.push_back(e);
    }
    if (over > 0 && hard.empty())
        hard = "BoundViolated: " + std::to_string(over) + " preimage counts exceed N(R)N(S)";
    auto b = bowen_check(c, p, af, s.bowen_window);
    ojson j;
    j["affiliation_symmetric"] = af.symmetric;
    j["preimage_points"] = (long)pool.size();
    j["preimage_depth"] = s.preimage_depth;
    j["over_bound"] = over;
    j["max_count"] = max_count;
    j["points"] = pts;
    j["coincident"] = b.coincident;
    j["coincident_ok"] = b.coincident_ok;
    j["bowen_pairs"] = b.pairs;
    j["bowen_recovered"] = b.recovered;
    j["max_shift"] = b.max_shift;
    j["three_rho"] = 3 * w.S.rho();
    j["bowen_failures"] = b.failures;
    w.write_json("reports/finite.json", j);
    r.detail = j;
    r.detail.erase("points");
    r.detail.erase("bowen_failures");
    r.pass = af.symmetric && over == 0 && (long)pool.size() == s.preimage_points && b.coincident_ok == b.coincident &&
             b.pairs > 0 && b.recovered == b.pairs && b.max_shift < 3 * w.S.rho();
    return r;
}

ojson criterion_json(const CriterionResult& c)
{
    ojson j;
    j["id"] = c.id;
    j["name"] = c.name;
    j["pass"] = c.pass;
    j["detail"] = c.detail;
    return j;
}

} // namespace

RunResult run_pipeline(const PipelineConfig& cfg, Stage last, const std::string& dir)
{
    RunResult res;
    res.last = last;
    fs::create_directories(dir);
    World w(cfg, dir);
    auto clock = std::chrono::steady_clock::now();
    auto lap = [&](const char* what) {
        auto now = std::chrono::steady_clock::now();
        std::cerr << "  " << what << " " << std::chrono::duration<double>(now - clock).count() << " s\n";
        clock = now;
    };
    auto emit = [&](CriterionResult c) {
        std::cerr << "  criterion " << c.id << " (" << c.name << "): " << (c.pass ? "pass" : "FAIL") << "\n";
        res.criteria.push_back(std::move(c));
    };
    auto reach = [&](Stage s) { return (int)s <= (int)last && res.hard_failure.empty(); };

    // sections
    w.write("sections.csv", w.S.csv());
    {
        ojson j;
        try {
            auto cov = w.S.check_cover(cfg.sampling.cover_grid_fibre, cfg.sampling.cover_grid_height);
            j["cover_samples"] = (long)cov.samples;
            j["cover_max_time"] = cov.max_time;
        } catch (const CoverageFailure& e) {
            res.hard_failure = std::string("CoverageFailure: ") + e.what();
            j["cover_failure"] = e.what();
        }
        auto ord = w.S.check_partial_order();
        j["order_pairs"] = (long)ord.pairs;
        j["order_overlapping"] = (long)ord.overlapping;
        j["order_min_separation"] = ord.min_separation;
        j["order_ok"] = ord.ok;
        j["min_return"] = w.S.min_return_bound();
        j["max_return"] = w.S.max_return_bound();
        j["discs"] = (long)w.S.discs().size();
        if (!ord.ok && res.hard_failure.empty())
            res.hard_failure = "partial order check failed on the security section";
        w.write_json("reports/sections.json", j);
    }
    if (res.hard_failure.empty())
        emit(crit_cocycle(w));
    lap("sections");
    if (reach(Stage::Nuh)) {
        emit(crit_closed_form(w));
        emit(crit_diag(w));
        emit(crit_zindexed(w));
        lap("nuh");
    }
    if (reach(Stage::Gpo)) {
        emit(crit_graph_transform(w));
        lap("charts and gpo");
    }
    if (reach(Stage::Coarse)) {
        emit(crit_round_trip(w));
        lap("coarse");
    }
    if (reach(Stage::Markov)) {
        emit(crit_markov(w));
        emit(crit_lift(w));
        lap("markov");
    }
    if (reach(Stage::Second)) {
        std::string hard;
        emit(crit_second(w, hard));
        emit(crit_finite(w, hard));
        if (!hard.empty())
            res.hard_failure = hard;
        lap("second");
    }
    for (const auto& c : res.criteria)
        w.write_json("reports/criterion_" + std::to_string(c.id) + ".json", criterion_json(c));
    ojson sum;
    sum["model"] = roof_kind_name(cfg.model.roof);
    sum["seed"] = cfg.seed;
    sum["stage"] = stage_name(last);
    sum["hard_failure"] = res.hard_failure;
    ojson cs = ojson::array();
    for (const auto& c : res.criteria) {
        ojson e;
        e["id"] = c.id;
        e["name"] = c.name;
        e["pass"] = c.pass;
        cs.push_back(e);
    }
    sum["criteria"] = cs;
    sum["pass"] = res.ok();
    w.write_json("summary.json", sum);
    return res;
}

} // namespace hyp
