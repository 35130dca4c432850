#include <benchmark/benchmark.h>

#include <random>

#include "hypcode/coarse.hpp"

using namespace hyp;

namespace {

struct Fixture {
    ModelFlow m;
    Nuh nuh;
    Sections S;
    OrbitData o;
    explicit Fixture(RoofKind k)
        : m([k] {
              ModelConfig c;
              c.roof = k;
              return c;
          }()),
          nuh(m), S(m, default_sections(k), m.config().rho)
    {
        std::mt19937_64 rng(1);
        o = generic_orbit(S, S.first_hit(m.random_point(rng)), 200, 200, "bench");
    }
};

Fixture& fixture(RoofKind k)
{
    static Fixture c(RoofKind::Const), v(RoofKind::Cos);
    return k == RoofKind::Const ? c : v;
}

void hit_params(benchmark::State& st, RoofKind k, bool parallel)
{
    auto& f = fixture(k);
    std::vector<double> Q, q;
    for (auto _ : st) {
        compute_hit_params(f.nuh, f.S, f.o.hits, Q, q, parallel);
        benchmark::DoNotOptimize(q.data());
    }
    st.SetItemsProcessed(st.iterations() * f.o.size());
}

void z_indexed(benchmark::State& st)
{
    auto& f = fixture(RoofKind::Cos);
    std::vector<double> Q, q;
    compute_hit_params(f.nuh, f.S, f.o.hits, Q, q, true);
    for (auto _ : st) {
        auto z = z_indexed_p(f.o.steps, Q, f.nuh.eps(), f.nuh.Q_lower(), f.S.min_return_bound(), f.S.max_return_bound());
        benchmark::DoNotOptimize(z.ps.data());
    }
}

} // namespace

BENCHMARK_CAPTURE(hit_params, const_serial, RoofKind::Const, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(hit_params, const_omp, RoofKind::Const, true)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(hit_params, cos_serial, RoofKind::Cos, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(hit_params, cos_omp, RoofKind::Cos, true)->Unit(benchmark::kMillisecond);
BENCHMARK(z_indexed)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
