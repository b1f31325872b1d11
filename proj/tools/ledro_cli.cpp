#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include "ledro/errors.hpp"
#include "ledro/orchestrator.hpp"

namespace {

using namespace ledro;

struct Overrides {
    CLI::Option* seed = nullptr;
    CLI::Option* evaluator = nullptr;
    CLI::Option* llm_backend = nullptr;
    CLI::Option* script = nullptr;
    CLI::Option* endpoint = nullptr;
    CLI::Option* model = nullptr;
    CLI::Option* parallelism = nullptr;
    CLI::Option* baseline = nullptr;
    CLI::Option* steps = nullptr;
    CLI::Option* repeats = nullptr;
    CLI::Option* iterations = nullptr;
    CLI::Option* no_feedback = nullptr;
    CLI::Option* no_reflection = nullptr;

    std::uint64_t seed_v = 0;
    std::string evaluator_v, llm_backend_v, script_v, endpoint_v, model_v, baseline_v;
    unsigned parallelism_v = 0;
    int steps_v = 0, repeats_v = 0, iterations_v = 0;

    void attach(CLI::App* cmd, bool with_llm) {
        seed = cmd->add_option("--seed", seed_v, "Root seed for the whole run");
        evaluator = cmd->add_option("--evaluator", evaluator_v, "surrogate or spice");
        baseline = cmd->add_option("--baseline", baseline_v,
                                   "Baseline mode: none, bo-1200, bo-2000, custom");
        steps = cmd->add_option("--steps", steps_v,
                                "Baseline evaluations per repeat (custom mode, "
                                "calibration included)");
        repeats = cmd->add_option("--repeats", repeats_v, "Baseline repeats, best-of selection");
        parallelism = cmd->add_option("--parallelism", parallelism_v,
                                      "Concurrent evaluations per optimizer batch");
        if (!with_llm) return;
        iterations = cmd->add_option("--iterations", iterations_v, "Refinement rounds");
        llm_backend = cmd->add_option("--llm-backend", llm_backend_v, "scripted or http");
        script = cmd->add_option("--script", script_v, "Canned-response file (scripted backend)");
        endpoint = cmd->add_option("--endpoint", endpoint_v, "Chat-completion URL (http backend)");
        model = cmd->add_option("--model", model_v, "Model identifier (http backend)");
        no_feedback = cmd->add_flag("--no-feedback", "Do not report round outcomes to the LLM");
        no_reflection = cmd->add_flag("--no-reflection", "Skip the look-back step");
    }

    void apply(RunConfig& cfg) const {
        if (seed && seed->count()) cfg.seed = seed_v;
        if (evaluator && evaluator->count()) cfg.evaluator_backend = evaluator_v;
        if (baseline && baseline->count()) cfg.baseline_mode = baseline_v;
        if (steps && steps->count()) cfg.baseline_steps = steps_v;
        if (repeats && repeats->count()) cfg.repeats = repeats_v;
        if (parallelism && parallelism->count()) cfg.turbo.parallelism = parallelism_v;
        if (iterations && iterations->count()) cfg.iterations = iterations_v;
        if (llm_backend && llm_backend->count()) cfg.llm.backend = llm_backend_v;
        if (script && script->count()) cfg.llm.script_path = script_v;
        if (endpoint && endpoint->count()) cfg.llm.endpoint = endpoint_v;
        if (model && model->count()) cfg.llm.model = model_v;
        if (no_feedback && no_feedback->count()) cfg.feedback = false;
        if (no_reflection && no_reflection->count()) cfg.reflection = false;
    }
};

void print_report(const RunReport& rep, const std::string& dir) {
    std::printf("benchmark: %s (seed %llu)\n", rep.benchmark_id.c_str(),
                static_cast<unsigned long long>(rep.seed));
    std::printf("total evaluations: %llu\n",
                static_cast<unsigned long long>(rep.total_evaluations));
    std::printf("%-22s %8s %10s\n", "phase", "evals", "wall_s");
    for (const auto& p : rep.phases) {
        std::printf("%-22s %8llu %10.2f\n", p.phase.c_str(),
                    static_cast<unsigned long long>(p.evaluations), p.wall_s);
    }
    std::printf("best FoM: %.6f (step %llu, %s)\n", rep.best.fom.value,
                static_cast<unsigned long long>(rep.best.step), rep.best.phase.c_str());
    if (rep.metrics) {
        const auto& m = *rep.metrics;
        std::printf("baseline best FoM: %.6f, delta %+.6f, boost %.2f%%\n", m.baseline_best,
                    m.fom_delta, 100.0 * m.boost);
        if (m.speedup) {
            std::printf("reached the baseline's best in %d steps vs %d (speedup %.2fx)\n",
                        *m.ledro_steps, *m.baseline_steps, *m.speedup);
        } else {
            std::printf("the refined run did not reach the baseline's best\n");
        }
    }
    std::printf("report: %s/report.json\n", dir.c_str());
}

void print_metrics(const ComparisonMetrics& m) {
    std::printf("refined best FoM:  %.6f\n", m.ledro_best);
    std::printf("baseline best FoM: %.6f\n", m.baseline_best);
    std::printf("delta %+.6f, boost %.2f%%\n", m.fom_delta, 100.0 * m.boost);
    if (m.speedup) {
        std::printf("steps to baseline best: %d vs %d (speedup %.2fx)\n", *m.ledro_steps,
                    *m.baseline_steps, *m.speedup);
    } else {
        std::printf("the refined run did not reach the baseline's best\n");
    }
}

RunReport load_report(std::string path) {
    if (std::filesystem::is_directory(path)) path += "/report.json";
    return report_from_json(read_text_file(path));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Iterative LLM-guided analog sizing runner"};
    app.require_subcommand(1);

    std::string config_path, dir;
    Overrides run_over, base_over;

    auto* run = app.add_subcommand("run", "Full refinement loop (plus baseline when configured)");
    run->add_option("config", config_path, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--dir", dir, "Run directory (created; resumes if interrupted)")->required();
    run_over.attach(run, true);

    auto* base = app.add_subcommand("baseline", "Calibration plus optimizer repeats, no LLM");
    base->add_option("config", config_path, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);
    base->add_option("--dir", dir, "Run directory (created; resumes if interrupted)")->required();
    base_over.attach(base, false);

    std::string left, right;
    auto* compare = app.add_subcommand("compare", "Metrics between two finished runs");
    compare->add_option("refined", left, "Refined run directory or report.json")->required();
    compare->add_option("baseline", right, "Baseline run directory or report.json")->required();

    auto* replay = app.add_subcommand("replay", "Rebuild report.json from stored artifacts");
    replay->add_option("dir", dir, "Run directory")->required()->check(CLI::ExistingDirectory);

    auto* validate = app.add_subcommand("validate-config", "Parse and check a configuration");
    validate->add_option("config", config_path, "Run configuration JSON")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            auto cfg = load_run_config(config_path);
            run_over.apply(cfg);
            print_report(run_ledro(cfg, dir), dir);
        } else if (base->parsed()) {
            auto cfg = load_run_config(config_path);
            base_over.apply(cfg);
            print_report(run_baseline(cfg, dir), dir);
        } else if (compare->parsed()) {
            print_metrics(compare_runs(load_report(left), load_report(right)));
        } else if (replay->parsed()) {
            print_report(replay_report(dir), dir);
        } else if (validate->parsed()) {
            const auto cfg = load_run_config(config_path);
            cfg.validate();
            std::printf("ok: %s\n", config_path.c_str());
            std::printf("evaluations per repeat/run: %d calibration + %d x %d rounds\n",
                        cfg.calibration.budget, cfg.iterations, cfg.inner_budget);
            if (cfg.resolved_baseline_steps() > 0)
                std::printf("baseline: %d steps x %d repeats\n", cfg.resolved_baseline_steps(),
                            cfg.repeats);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
