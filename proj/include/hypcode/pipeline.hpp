#pragma once
// Pipeline driver: configuration, stages, acceptance checks and artifacts.
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hypcode/markov.hpp"
#include "json.hpp"

namespace hyp {

using ojson = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Stage { Sections, Nuh, Charts, Gpo, Coarse, Markov, Second };
Stage parse_stage(const std::string& s);
std::string stage_name(Stage s);

struct SamplingConfig {
    int cover_grid_fibre = 24, cover_grid_height = 24;
    int cocycle_samples = 1000;
    int diag_samples = 200;
    int zp_orbits = 50, zp_indices = 100;
    int contraction_trials = 100;
    int seed_depth = 40;
    int generic_orbits = 30;
    int generic_extra = 150;  // encoded hits on each side of the start
    int het_crossings = 320;
    int fibre_depth = 40;
    int refine_N = 3;
    int cylinder_depth = 4, cylinder_words = 200;
    int diam_lo = 4, diam_hi = 12, diam_words = 20;
    int preimage_points = 20, preimage_depth = 4;
    int bowen_window = 100;
};

struct PipelineConfig {
    ModelConfig model;
    SectionConfig sections;
    SamplingConfig sampling;
    EncoderConfig encoder;
    MarkovConfig markov;
    uint64_t seed = 1;
    std::string output = "out";
    bool experimental = false; // allows the stretch roof
};

// throws ConfigError on malformed input or violated constraints
PipelineConfig parse_config(const ojson& j);
PipelineConfig load_config(const std::string& path);
void validate(const PipelineConfig& c);

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    ojson detail;
};

struct RunResult {
    Stage last = Stage::Second;
    std::vector<CriterionResult> criteria;
    std::string hard_failure; // first hard failure, empty if none
    bool ok() const;
};

// runs every stage up to `last`, writing artifacts to dir (created if missing)
RunResult run_pipeline(const PipelineConfig& c, Stage last, const std::string& dir);

// the criteria measured by a stage, in order
std::vector<int> criteria_of(Stage s);

} // namespace hyp
