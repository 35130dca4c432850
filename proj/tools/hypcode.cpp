#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hypcode/pipeline.hpp"

using namespace hyp;

namespace {

int print_result(const RunResult& r)
{
    for (const auto& c : r.criteria)
        std::cout << "criterion " << c.id << " " << c.name << ": " << (c.pass ? "PASS" : "FAIL") << "\n";
    if (!r.hard_failure.empty())
        std::cout << "hard failure: " << r.hard_failure << "\n";
    std::cout << (r.ok() ? "PASS" : "FAIL") << "\n";
    return r.ok() ? 0 : 1;
}

int report(const std::string& dir)
{
    std::ifstream in(std::filesystem::path(dir) / "summary.json");
    if (!in) {
        std::cerr << "no summary.json in " << dir << "\n";
        return 2;
    }
    ojson s;
    try {
        s = ojson::parse(in);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "bad summary: " << e.what() << "\n";
        return 2;
    }
    std::cout << "model " << s.value("model", "?") << ", stage " << s.value("stage", "?") << "\n";
    for (const auto& c : s["criteria"]) {
        int id = c["id"].get<int>();
        std::cout << "criterion " << id << " " << c["name"].get<std::string>() << ": "
                  << (c["pass"].get<bool>() ? "PASS" : "FAIL") << "\n";
        std::ifstream d(std::filesystem::path(dir) / "reports" / ("criterion_" + std::to_string(id) + ".json"));
        if (d) {
            auto j = ojson::parse(d);
            for (auto it = j["detail"].begin(); it != j["detail"].end(); ++it)
                if (!it.value().is_array() && !it.value().is_object())
                    std::cout << "    " << it.key() << " = " << it.value().dump() << "\n";
        }
    }
    auto hard = s.value("hard_failure", "");
    if (!hard.empty())
        std::cout << "hard failure: " << hard << "\n";
    bool ok = s.value("pass", false);
    std::cout << (ok ? "PASS" : "FAIL") << "\n";
    return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"hypcode: symbolic coding of a cat-map suspension flow"};
    app.require_subcommand(1);
    std::string config, stage, dir, out;

    auto* run = app.add_subcommand("run", "run every stage and write artifacts");
    run->add_option("config", config, "JSON config")->required();
    run->add_option("-o,--output", out, "output directory (overrides the config)");

    auto* check = app.add_subcommand("check", "run through one stage");
    check->add_option("config", config, "JSON config")->required();
    check->add_option("--stage", stage, "sections|nuh|charts|gpo|coarse|markov|second")->required();
    check->add_option("-o,--output", out, "output directory (overrides the config)");

    auto* rep = app.add_subcommand("report", "summarize a run directory");
    rep->add_option("dir", dir, "output directory of a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (*rep)
        return report(dir);
    try {
        PipelineConfig cfg = load_config(config);
        Stage last = *check ? parse_stage(stage) : Stage::Second;
        if (!out.empty())
            cfg.output = out;
        return print_result(run_pipeline(cfg, last, cfg.output));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}
