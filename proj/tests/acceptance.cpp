// Runs the full pipeline on the constant and cosine roofs and prints one line per criterion.
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include "hypcode/pipeline.hpp"

using namespace hyp;

int main(int argc, char** argv)
{
    std::string configs = argc > 1 ? argv[1] : HYPCODE_CONFIG_DIR;
    std::string out = argc > 2 ? argv[2] : "acceptance_out";
    auto t0 = std::chrono::steady_clock::now();
    std::map<int, std::vector<std::pair<std::string, const CriterionResult*>>> by_id;
    std::vector<RunResult> runs;
    std::vector<std::string> names{"const", "cos"};
    runs.reserve(names.size());
    std::string hard;
    for (const auto& n : names) {
        PipelineConfig cfg;
        try {
            cfg = load_config(configs + "/" + n + ".json");
        } catch (const ConfigError& e) {
            std::cerr << n << ": config error: " << e.what() << "\n";
            return 2;
        }
        std::cerr << "[" << n << "]\n";
        runs.push_back(run_pipeline(cfg, Stage::Second, out + "/" + n));
        if (!runs.back().hard_failure.empty())
            hard += n + ": " + runs.back().hard_failure + "; ";
    }
    for (size_t k = 0; k < runs.size(); ++k)
        for (const auto& c : runs[k].criteria)
            by_id[c.id].push_back({names[k], &c});
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool all = hard.empty();
    for (int id = 1; id <= 10; ++id) {
        auto it = by_id.find(id);
        bool ok = it != by_id.end() && !it->second.empty();
        std::string parts, name;
        if (ok)
            for (auto& [model, c] : it->second) {
                ok = ok && c->pass;
                name = c->name;
                bool na = c->detail.contains("applicable") && !c->detail["applicable"].get<bool>();
                parts += " " + model + "=" + (na ? "n/a" : c->pass ? "pass" : "fail");
            }
        all = all && ok;
        std::printf("criterion %2d %-30s %s [%s ]\n", id, name.c_str(), ok ? "PASS" : "FAIL", parts.c_str());
    }
    bool fast = secs < 300;
    std::printf("pipeline runtime %.1f s (target < 300 s): %s\n", secs, fast ? "PASS" : "FAIL");
    if (!hard.empty())
        std::printf("hard failures: %s\n", hard.c_str());
    return all && fast ? 0 : 1;
}
