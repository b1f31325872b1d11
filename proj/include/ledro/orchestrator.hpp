#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ledro/calibration.hpp"
#include "ledro/design_space.hpp"
#include "ledro/evaluator.hpp"
#include "ledro/llm.hpp"
#include "ledro/prompts.hpp"
#include "ledro/run_store.hpp"
#include "ledro/spice.hpp"
#include "ledro/turbo.hpp"

namespace ledro {

/// Complete description of one run, mirrored one-to-one by the JSON config
/// file. The same optimizer settings drive calibration, every refinement
/// round, and the baseline.
struct RunConfig {
    std::string benchmark_file;              // parameter-definition JSON
    std::string bounds_preset = "low";       // "low" | "high" | "custom"
    SpecBounds custom_bounds;                // read when the preset is "custom"
    FomWeights weights;
    int iterations = 10;                     // refinement rounds
    int inner_budget = 100;                  // optimizer evaluations per round
    CalibrationConfig calibration;
    std::uint64_t seed = 1;
    std::string evaluator_backend = "surrogate"; // "surrogate" | "spice"
    SpiceConfig spice;                       // read when the backend is "spice"
    LlmClientConfig llm;
    bool feedback = true;                    // report round outcomes to the LLM
    bool reflection = true;                  // insert the look-back step
    std::string baseline_mode = "none";      // "none" | "bo-1200" | "bo-2000" | "custom"
    int baseline_steps = 0;                  // read when the mode is "custom"
    int repeats = 5;                         // baseline repeats, best-of selection
    TurboConfig turbo;
    PromptConfig prompt;

    SpecBounds resolved_bounds() const;
    ObjectiveConfig objective() const;
    int resolved_baseline_steps() const;     // total including calibration; 0 when "none"
    void validate() const;
};

RunConfig load_run_config(const std::string& path);

/// Canonical serialization: every field emitted, keys sorted. The stored
/// config snapshot is compared byte-wise on resume.
std::string run_config_to_json(const RunConfig& cfg);
void save_run_config(const RunConfig& cfg, const std::string& path);

struct PhaseSummary {
    std::string phase;
    std::uint64_t evaluations = 0;
    double wall_s = 0.0; // excluded from determinism comparisons
};

struct RoundSummary {
    int round = 0;
    std::string feedback_class; // outcome class embedded in this round's request
    bool parse_fallback = false;
    SearchRegion region;        // region the optimizer searched
    FeedbackVerdict verdict;    // this round's own outcome
    std::string transcript_path;
};

struct BaselineBlock {
    int steps = 0;   // total evaluations per repeat, calibration included
    int repeats = 0;
    int best_repeat = 0; // 1-based; earliest wins ties
    std::vector<double> final_best_per_repeat;
    std::vector<std::vector<double>> trajectories; // best-so-far, length == steps
};

struct ComparisonMetrics {
    double ledro_best = 0.0;
    double baseline_best = 0.0;
    double fom_delta = 0.0;  // ledro - baseline
    double boost = 0.0;      // |delta| / |baseline best|
    std::optional<int> ledro_steps;    // steps to reach the baseline's best
    std::optional<int> baseline_steps;
    std::optional<double> speedup;     // baseline_steps / ledro_steps
    bool target_reached = false;
};

/// Result of a run, persisted as report.json. The headline trajectory covers
/// the refinement phases for a refinement run and the best repeat for a
/// baseline run.
struct RunReport {
    std::string mode; // "ledro" | "baseline"
    std::string benchmark_id;
    std::uint64_t seed = 0;
    std::string seed_scheme;
    SpecBounds bounds;
    FomWeights weights;
    double calibration_threshold_db = 0.0;
    std::vector<PhaseSummary> phases; // execution order
    std::uint64_t total_evaluations = 0;
    std::vector<double> trajectory;
    EvaluationRecord best;
    std::vector<RoundSummary> rounds;
    std::optional<BaselineBlock> baseline;
    std::optional<ComparisonMetrics> metrics;
};

std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& text);

/// Smallest 1-based step whose best-so-far value reaches `target`; empty when
/// the trajectory never does.
std::optional<int> steps_to_target(const std::vector<double>& trajectory, double target);

/// Metrics between a refinement run and a baseline run over the same
/// benchmark, bounds, and weights; anything else is a ComparisonError.
ComparisonMetrics compare_runs(const RunReport& ledro, const RunReport& baseline);

/// Observability hooks inside the round loop. Throwing from either aborts
/// the run exactly like an external kill: the directory stays resumable.
struct RunHooks {
    std::function<void(int round)> after_round_evals;      // records logged, checkpoint not yet written
    std::function<void(int round)> after_round_checkpoint;
};

/// Runs the full refinement loop in `run_dir`, creating it if needed. A
/// directory holding an interrupted run with a byte-identical config resumes
/// from its last completed phase; a completed one just re-renders the
/// report. When the config names a baseline mode, the baseline repeats run
/// afterwards against the same calibration points and the report carries the
/// comparison metrics.
RunReport run_ledro(const RunConfig& cfg, const std::string& run_dir, const RunHooks& hooks = {});

/// Calibration plus seeded baseline repeats, no LLM involved. The config
/// must name a baseline mode.
RunReport run_baseline(const RunConfig& cfg, const std::string& run_dir);

/// Rebuilds report.json for a run directory from its stored artifacts.
RunReport replay_report(const std::string& run_dir);

} // namespace ledro
