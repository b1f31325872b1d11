#include "ledro/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <json.hpp>
#include <limits>
#include <map>
#include <memory>

#include "ledro/errors.hpp"
#include "ledro/rng.hpp"
#include "ledro/surrogate.hpp"

namespace ledro {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kSeedScheme =
    "calibration = derive(seed, \"calibration\"); "
    "round r = derive(seed, \"round\", r); "
    "repeat i = derive(seed, \"baseline-repeat\", i)";

std::string repeat_phase(int i) { return "baseline-repeat-" + std::to_string(i); }

bool is_repeat_phase(const std::string& phase) { return phase.rfind("baseline-repeat-", 0) == 0; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- JSON helpers ---

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) throw ConfigError(std::string(where) + ": unknown key '" + item.key() + "'");
    }
}

const char* direction_name(Direction d) {
    return d == Direction::Maximize ? "maximize" : "minimize";
}

Direction direction_from(const std::string& name) {
    if (name == "maximize") return Direction::Maximize;
    if (name == "minimize") return Direction::Minimize;
    throw ConfigError("unknown direction '" + name + "'");
}

json bound_to_json(const SpecBound& b) {
    return {{"value", b.value}, {"direction", direction_name(b.direction)}};
}

SpecBound bound_from_json(const json& j, SpecBound dflt) {
    check_keys(j, {"value", "direction"}, "bound");
    dflt.value = j.value("value", dflt.value);
    if (j.contains("direction")) dflt.direction = direction_from(j.at("direction").get<std::string>());
    return dflt;
}

json bounds_to_json(const SpecBounds& b) {
    return {{"gain", bound_to_json(b.gain)},
            {"ugbw", bound_to_json(b.ugbw)},
            {"phase_margin", bound_to_json(b.phase_margin)},
            {"supply_current", bound_to_json(b.supply_current)}};
}

SpecBounds bounds_from_json(const json& j, SpecBounds dflt) {
    check_keys(j, {"gain", "ugbw", "phase_margin", "supply_current"}, "bounds");
    if (j.contains("gain")) dflt.gain = bound_from_json(j.at("gain"), dflt.gain);
    if (j.contains("ugbw")) dflt.ugbw = bound_from_json(j.at("ugbw"), dflt.ugbw);
    if (j.contains("phase_margin"))
        dflt.phase_margin = bound_from_json(j.at("phase_margin"), dflt.phase_margin);
    if (j.contains("supply_current"))
        dflt.supply_current = bound_from_json(j.at("supply_current"), dflt.supply_current);
    return dflt;
}

json weights_to_json(const FomWeights& w) {
    return {{"gain", w.gain},
            {"ugbw", w.ugbw},
            {"phase_margin", w.phase_margin},
            {"supply_current", w.supply_current}};
}

FomWeights weights_from_json(const json& j, FomWeights dflt) {
    check_keys(j, {"gain", "ugbw", "phase_margin", "supply_current"}, "weights");
    dflt.gain = j.value("gain", dflt.gain);
    dflt.ugbw = j.value("ugbw", dflt.ugbw);
    dflt.phase_margin = j.value("phase_margin", dflt.phase_margin);
    dflt.supply_current = j.value("supply_current", dflt.supply_current);
    return dflt;
}

json region_to_json(const SearchRegion& region) {
    json arr = json::array();
    for (const auto& iv : region.intervals) arr.push_back({iv.lo, iv.hi});
    return arr;
}

SearchRegion region_from_json(const json& arr) {
    SearchRegion region;
    for (const auto& iv : arr) {
        if (!iv.is_array() || iv.size() != 2)
            throw ConfigError("report: region interval must be a [lo, hi] pair");
        region.intervals.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
    return region;
}

json record_to_json(const EvaluationRecord& rec) {
    json regions = json::array();
    for (const auto& t : rec.telemetry) {
        regions.push_back(
            {{"device", t.device}, {"region", std::string(device_region_name(t.region))}});
    }
    return {{"step", rec.step},
            {"phase", rec.phase},
            {"point", rec.point.values},
            {"specs",
             {{"gain_db", rec.specs.gain_db},
              {"ugbw_hz", rec.specs.ugbw_hz},
              {"phase_margin_deg", rec.specs.phase_margin_deg},
              {"supply_current_a", rec.specs.supply_current_a}}},
            {"fom", rec.fom.value},
            {"failed", rec.failed},
            {"device_regions", regions}};
}

EvaluationRecord record_from_json(const json& j) {
    EvaluationRecord rec;
    rec.step = j.at("step").get<std::uint64_t>();
    rec.phase = j.at("phase").get<std::string>();
    rec.point.values = j.at("point").get<std::vector<double>>();
    const auto& specs = j.at("specs");
    rec.specs.gain_db = specs.at("gain_db").get<double>();
    rec.specs.ugbw_hz = specs.at("ugbw_hz").get<double>();
    rec.specs.phase_margin_deg = specs.at("phase_margin_deg").get<double>();
    rec.specs.supply_current_a = specs.at("supply_current_a").get<double>();
    rec.fom.value = j.at("fom").get<double>();
    rec.failed = j.at("failed").get<bool>();
    for (const auto& t : j.at("device_regions")) {
        rec.telemetry.push_back({t.at("device").get<std::string>(),
                                 device_region_from_name(t.at("region").get<std::string>())});
    }
    return rec;
}

// --- shared run machinery ---

double prior_best(const std::vector<EvaluationRecord>& records) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& rec : records) best = std::max(best, rec.fom.value);
    return best;
}

std::vector<double> best_so_far(const std::vector<const EvaluationRecord*>& records) {
    std::vector<double> traj;
    traj.reserve(records.size());
    double best = -std::numeric_limits<double>::infinity();
    for (const auto* rec : records) {
        best = std::max(best, rec->fom.value);
        traj.push_back(best);
    }
    return traj;
}

const EvaluationRecord* best_record(const std::vector<const EvaluationRecord*>& records) {
    const EvaluationRecord* best = nullptr;
    for (const auto* rec : records) {
        if (!best || rec->fom.value > best->fom.value) best = rec;
    }
    return best;
}

ComparisonMetrics compute_metrics(const std::vector<double>& refined_traj,
                                  const std::vector<double>& baseline_traj) {
    ComparisonMetrics m;
    m.ledro_best = refined_traj.back();
    m.baseline_best = baseline_traj.back();
    m.fom_delta = m.ledro_best - m.baseline_best;
    // |baseline| can be 0 when the baseline meets every bound; a zero delta
    // is then a clean 0% boost and the clamp below never engages.
    m.boost = m.fom_delta == 0.0
                  ? 0.0
                  : std::abs(m.fom_delta) / std::max(std::abs(m.baseline_best), 1e-12);
    m.baseline_steps = steps_to_target(baseline_traj, m.baseline_best);
    m.ledro_steps = steps_to_target(refined_traj, m.baseline_best);
    m.target_reached = m.ledro_steps.has_value();
    if (m.ledro_steps && m.baseline_steps && *m.ledro_steps > 0) {
        m.speedup = static_cast<double>(*m.baseline_steps) / static_cast<double>(*m.ledro_steps);
    }
    return m;
}

struct RunContext {
    RunPaths paths;
    Benchmark bench;
    SearchRegion full;
    std::unique_ptr<Evaluator> evaluator;
    std::unique_ptr<RunLock> lock;
    RunCheckpoint cp;
    std::vector<EvaluationRecord> records;
    std::unique_ptr<EvalLogWriter> log;

    void checkpoint() { save_checkpoint(paths.checkpoint_file(), cp); }
    void record(const EvaluationRecord& rec) {
        log->append(rec);
        records.push_back(rec);
    }
};

RunContext open_run(const RunConfig& cfg, const std::string& run_dir) {
    cfg.validate();
    RunContext ctx;
    ctx.paths.root = run_dir;
    fs::create_directories(ctx.paths.transcript_dir());

    ctx.bench = load_benchmark(cfg.benchmark_file);
    const std::size_t dim = ctx.bench.parameters.size();
    if (cfg.turbo.resolved_n_init(dim, cfg.inner_budget) > cfg.inner_budget)
        throw ConfigError("inner budget is below the optimizer's initial sample count");
    if (cfg.turbo.resolved_n_init(dim, cfg.calibration.budget) > cfg.calibration.budget)
        throw ConfigError("calibration budget is below the optimizer's initial sample count");

    ctx.lock = std::make_unique<RunLock>(ctx.paths.lock_file());
    const std::string canon = run_config_to_json(cfg);
    if (fs::exists(ctx.paths.config_file())) {
        if (read_text_file(ctx.paths.config_file()) != canon) {
            throw ConfigError("run directory " + run_dir +
                              " was created with a different config; use a fresh directory");
        }
    } else {
        if (fs::exists(ctx.paths.eval_log_file()) || fs::exists(ctx.paths.checkpoint_file())) {
            throw ConfigError("run directory " + run_dir +
                              " has artifacts but no config snapshot; refusing to touch it");
        }
        write_text_file(ctx.paths.config_file(), canon);
    }

    const ObjectiveConfig objective = cfg.objective();
    if (cfg.evaluator_backend == "surrogate") {
        ctx.evaluator = make_surrogate_evaluator(ctx.bench, objective);
    } else {
        ctx.evaluator = std::make_unique<SpiceEvaluator>(ctx.bench, objective, cfg.spice);
    }
    ctx.full = SearchRegion::full(ctx.bench.parameters);

    load_checkpoint(ctx.paths.checkpoint_file(), ctx.cp);
    if (fs::exists(ctx.paths.eval_log_file())) {
        truncate_eval_log(ctx.paths.eval_log_file(), ctx.cp.evals_logged);
        if (ctx.cp.evals_logged > 0) ctx.records = read_eval_log(ctx.paths.eval_log_file());
    }
    if (ctx.records.size() != ctx.cp.evals_logged) {
        throw ConfigError("eval log holds " + std::to_string(ctx.records.size()) +
                          " records, checkpoint expects " + std::to_string(ctx.cp.evals_logged));
    }
    ctx.log = std::make_unique<EvalLogWriter>(ctx.paths.eval_log_file());
    return ctx;
}

CalibrationSet ensure_calibration(const RunConfig& cfg, RunContext& ctx) {
    if (ctx.cp.calibration_done) {
        std::vector<EvaluationRecord> calib;
        for (const auto& rec : ctx.records) {
            if (rec.phase == Phase::kCalibration) calib.push_back(rec);
        }
        return select_calibration(std::move(calib), ctx.cp.calibration_threshold_db,
                                  cfg.calibration.top_k);
    }
    CalibrationConfig ccfg = cfg.calibration;
    ccfg.turbo = cfg.turbo; // one optimizer config drives every phase
    const auto t0 = std::chrono::steady_clock::now();
    auto set = synthesize(*ctx.evaluator, ctx.full, ccfg, derive_seed(cfg.seed, "calibration"), 1,
                          [&](const EvaluationRecord& rec) { ctx.record(rec); });
    ctx.cp.calibration_done = true;
    ctx.cp.calibration_threshold_db = set.threshold_db;
    ctx.cp.evals_logged = ctx.records.size();
    ctx.cp.timing.push_back({Phase::kCalibration, seconds_since(t0)});
    ctx.checkpoint();
    return set;
}

std::vector<EvaluationRecord> calibration_records(const RunContext& ctx) {
    std::vector<EvaluationRecord> calib;
    for (const auto& rec : ctx.records) {
        if (rec.phase == Phase::kCalibration) calib.push_back(rec);
    }
    return calib;
}

void run_baseline_phases(const RunConfig& cfg, RunContext& ctx) {
    const int steps = cfg.resolved_baseline_steps();
    const auto calib = calibration_records(ctx);
    const int calib_count = static_cast<int>(calib.size());
    if (steps < calib_count) {
        throw ConfigError("baseline steps " + std::to_string(steps) + " is below the " +
                          std::to_string(calib_count) + " calibration evaluations already taken");
    }
    const int fresh = steps - calib_count;
    for (int i = ctx.cp.repeats_completed + 1; i <= cfg.repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        if (fresh > 0) {
            turbo_run(*ctx.evaluator, ctx.full, fresh, derive_seed(cfg.seed, "baseline-repeat", i),
                      cfg.turbo, calib, repeat_phase(i), ctx.records.size() + 1,
                      [&](const EvaluationRecord& rec) { ctx.record(rec); });
        }
        ctx.cp.repeats_completed = i;
        ctx.cp.evals_logged = ctx.records.size();
        ctx.cp.timing.push_back({repeat_phase(i), seconds_since(t0)});
        ctx.checkpoint();
    }
}

RunReport build_report(const RunConfig& cfg, const RunContext& ctx, const std::string& mode) {
    RunReport rep;
    rep.mode = mode;
    rep.benchmark_id = ctx.bench.id;
    rep.seed = cfg.seed;
    rep.seed_scheme = kSeedScheme;
    rep.bounds = cfg.resolved_bounds();
    rep.weights = cfg.weights;
    rep.calibration_threshold_db = ctx.cp.calibration_threshold_db;
    rep.total_evaluations = ctx.records.size();

    std::map<std::string, std::uint64_t> counts;
    for (const auto& rec : ctx.records) ++counts[rec.phase];
    for (const auto& t : ctx.cp.timing) rep.phases.push_back({t.phase, counts[t.phase], t.wall_s});

    std::vector<const EvaluationRecord*> refined;
    std::vector<const EvaluationRecord*> calib;
    std::map<int, std::vector<const EvaluationRecord*>> repeats;
    for (const auto& rec : ctx.records) {
        if (is_repeat_phase(rec.phase)) {
            const int idx = std::stoi(rec.phase.substr(std::string("baseline-repeat-").size()));
            repeats[idx].push_back(&rec);
        } else {
            refined.push_back(&rec);
            if (rec.phase == Phase::kCalibration) calib.push_back(&rec);
        }
    }

    for (const auto& h : ctx.cp.history) {
        RoundSummary rs;
        rs.round = h.outcome.round;
        rs.parse_fallback = h.parse_fallback;
        rs.region = h.outcome.region;
        rs.verdict = h.outcome.verdict;
        const std::size_t idx = static_cast<std::size_t>(rs.round) - 1;
        rs.feedback_class =
            (idx == 0 || !cfg.feedback)
                ? "none"
                : std::string(ctx.cp.history[idx - 1].outcome.verdict.class_name());
        rs.transcript_path = "transcripts/" +
                             fs::path(ctx.paths.transcript_file(rs.round)).filename().string();
        rep.rounds.push_back(std::move(rs));
    }

    if (ctx.cp.repeats_completed > 0) {
        BaselineBlock block;
        block.steps = cfg.resolved_baseline_steps();
        block.repeats = ctx.cp.repeats_completed;
        for (int i = 1; i <= ctx.cp.repeats_completed; ++i) {
            auto seq = calib;
            const auto& extra = repeats[i];
            seq.insert(seq.end(), extra.begin(), extra.end());
            block.trajectories.push_back(best_so_far(seq));
            block.final_best_per_repeat.push_back(block.trajectories.back().back());
        }
        block.best_repeat = 1;
        for (int i = 2; i <= block.repeats; ++i) {
            if (block.final_best_per_repeat[i - 1] >
                block.final_best_per_repeat[block.best_repeat - 1]) {
                block.best_repeat = i;
            }
        }
        rep.baseline = std::move(block);
    }

    if (mode == "baseline") {
        if (!rep.baseline) throw ConfigError("baseline run has no completed repeats to report");
        const int bi = rep.baseline->best_repeat;
        rep.trajectory = rep.baseline->trajectories[bi - 1];
        auto seq = calib;
        const auto& extra = repeats[bi];
        seq.insert(seq.end(), extra.begin(), extra.end());
        if (const auto* best = best_record(seq)) rep.best = *best;
    } else {
        rep.trajectory = best_so_far(refined);
        if (const auto* best = best_record(refined)) rep.best = *best;
        if (rep.baseline) {
            rep.metrics = compute_metrics(rep.trajectory,
                                          rep.baseline->trajectories[rep.baseline->best_repeat - 1]);
        }
    }
    return rep;
}

} // namespace

SpecBounds RunConfig::resolved_bounds() const {
    if (bounds_preset == "low") return SpecBounds::low_complexity();
    if (bounds_preset == "high") return SpecBounds::high_complexity();
    return custom_bounds;
}

ObjectiveConfig RunConfig::objective() const {
    ObjectiveConfig obj;
    obj.bounds = resolved_bounds();
    obj.weights = weights;
    obj.good_gain_threshold_db = calibration.gain_threshold_db;
    return obj;
}

int RunConfig::resolved_baseline_steps() const {
    if (baseline_mode == "none") return 0;
    if (baseline_mode == "bo-1200") return 1200;
    if (baseline_mode == "bo-2000") return 2000;
    return baseline_steps;
}

void RunConfig::validate() const {
    if (benchmark_file.empty()) throw ConfigError("benchmark file is required");
    if (bounds_preset != "low" && bounds_preset != "high" && bounds_preset != "custom")
        throw ConfigError("bounds preset must be low, high, or custom");
    resolved_bounds().validate();
    weights.validate(resolved_bounds());
    if (iterations < 1) throw ConfigError("iterations must be at least 1");
    if (inner_budget < 2) throw ConfigError("inner budget must be at least 2");
    calibration.validate();
    if (evaluator_backend != "surrogate" && evaluator_backend != "spice")
        throw ConfigError("evaluator backend must be surrogate or spice");
    if (evaluator_backend == "spice") spice.validate();
    // The LLM settings are checked by the refinement entry point; baseline
    // runs never touch them.
    if (baseline_mode != "none" && baseline_mode != "bo-1200" && baseline_mode != "bo-2000" &&
        baseline_mode != "custom")
        throw ConfigError("baseline mode must be none, bo-1200, bo-2000, or custom");
    if (baseline_mode != "none") {
        const int steps = resolved_baseline_steps();
        if (steps < calibration.budget)
            throw ConfigError("baseline steps must cover at least the calibration budget");
        if (steps != calibration.budget && steps < calibration.budget + 2)
            throw ConfigError("baseline steps must leave at least 2 fresh evaluations");
    }
    if (repeats < 1) throw ConfigError("repeats must be at least 1");
    turbo.validate();
    prompt.validate();
}

RunConfig load_run_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    try {
        check_keys(j,
                   {"benchmark", "bounds_preset", "custom_bounds", "weights", "iterations",
                    "inner_budget", "calibration", "seed", "evaluator", "spice", "llm", "feedback",
                    "reflection", "baseline", "turbo", "prompt"},
                   "config");
        RunConfig cfg;
        cfg.benchmark_file = j.value("benchmark", cfg.benchmark_file);
        cfg.bounds_preset = j.value("bounds_preset", cfg.bounds_preset);
        if (j.contains("custom_bounds"))
            cfg.custom_bounds = bounds_from_json(j.at("custom_bounds"), cfg.custom_bounds);
        if (j.contains("weights")) cfg.weights = weights_from_json(j.at("weights"), cfg.weights);
        cfg.iterations = j.value("iterations", cfg.iterations);
        cfg.inner_budget = j.value("inner_budget", cfg.inner_budget);
        if (j.contains("calibration")) {
            const auto& c = j.at("calibration");
            check_keys(c, {"budget", "gain_threshold_db", "top_k", "max_retries",
                           "threshold_step_db"},
                       "calibration");
            cfg.calibration.budget = c.value("budget", cfg.calibration.budget);
            cfg.calibration.gain_threshold_db =
                c.value("gain_threshold_db", cfg.calibration.gain_threshold_db);
            cfg.calibration.top_k = c.value("top_k", cfg.calibration.top_k);
            cfg.calibration.max_retries = c.value("max_retries", cfg.calibration.max_retries);
            cfg.calibration.threshold_step_db =
                c.value("threshold_step_db", cfg.calibration.threshold_step_db);
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.evaluator_backend = j.value("evaluator", cfg.evaluator_backend);
        if (j.contains("spice")) {
            const auto& s = j.at("spice");
            check_keys(s, {"command", "work_root", "timeout_s"}, "spice");
            cfg.spice.command = s.value("command", cfg.spice.command);
            cfg.spice.work_root = s.value("work_root", cfg.spice.work_root);
            cfg.spice.timeout_s = s.value("timeout_s", cfg.spice.timeout_s);
        }
        if (j.contains("llm")) {
            const auto& l = j.at("llm");
            check_keys(l,
                       {"backend", "endpoint", "model", "temperature", "greedy_decoding",
                        "max_tokens", "timeout_s", "max_attempts", "backoff_s", "script", "audit"},
                       "llm");
            cfg.llm.backend = l.value("backend", cfg.llm.backend);
            cfg.llm.endpoint = l.value("endpoint", cfg.llm.endpoint);
            cfg.llm.model = l.value("model", cfg.llm.model);
            cfg.llm.temperature = l.value("temperature", cfg.llm.temperature);
            cfg.llm.greedy_decoding = l.value("greedy_decoding", cfg.llm.greedy_decoding);
            cfg.llm.max_tokens = l.value("max_tokens", cfg.llm.max_tokens);
            cfg.llm.timeout_s = l.value("timeout_s", cfg.llm.timeout_s);
            cfg.llm.max_attempts = l.value("max_attempts", cfg.llm.max_attempts);
            cfg.llm.backoff_s = l.value("backoff_s", cfg.llm.backoff_s);
            cfg.llm.script_path = l.value("script", cfg.llm.script_path);
            cfg.llm.audit_path = l.value("audit", cfg.llm.audit_path);
        }
        cfg.feedback = j.value("feedback", cfg.feedback);
        cfg.reflection = j.value("reflection", cfg.reflection);
        if (j.contains("baseline")) {
            const auto& b = j.at("baseline");
            check_keys(b, {"mode", "steps", "repeats"}, "baseline");
            cfg.baseline_mode = b.value("mode", cfg.baseline_mode);
            cfg.baseline_steps = b.value("steps", cfg.baseline_steps);
            cfg.repeats = b.value("repeats", cfg.repeats);
        }
        if (j.contains("turbo")) {
            const auto& t = j.at("turbo");
            check_keys(t,
                       {"l_init", "l_min", "l_max", "tau_succ", "tau_fail", "batch", "n_init",
                        "parallelism", "gp"},
                       "turbo");
            cfg.turbo.l_init = t.value("l_init", cfg.turbo.l_init);
            cfg.turbo.l_min = t.value("l_min", cfg.turbo.l_min);
            cfg.turbo.l_max = t.value("l_max", cfg.turbo.l_max);
            cfg.turbo.tau_succ = t.value("tau_succ", cfg.turbo.tau_succ);
            cfg.turbo.tau_fail = t.value("tau_fail", cfg.turbo.tau_fail);
            cfg.turbo.batch = t.value("batch", cfg.turbo.batch);
            cfg.turbo.n_init = t.value("n_init", cfg.turbo.n_init);
            cfg.turbo.parallelism = t.value("parallelism", cfg.turbo.parallelism);
            if (t.contains("gp")) {
                const auto& g = t.at("gp");
                check_keys(g,
                           {"hyperfit_subsample", "conditioning_cap", "adam_steps_cold",
                            "adam_steps_warm", "adam_lr", "jitter_floor", "noise_floor"},
                           "gp");
                cfg.turbo.gp.hyperfit_subsample =
                    g.value("hyperfit_subsample", cfg.turbo.gp.hyperfit_subsample);
                cfg.turbo.gp.conditioning_cap =
                    g.value("conditioning_cap", cfg.turbo.gp.conditioning_cap);
                cfg.turbo.gp.adam_steps_cold =
                    g.value("adam_steps_cold", cfg.turbo.gp.adam_steps_cold);
                cfg.turbo.gp.adam_steps_warm =
                    g.value("adam_steps_warm", cfg.turbo.gp.adam_steps_warm);
                cfg.turbo.gp.adam_lr = g.value("adam_lr", cfg.turbo.gp.adam_lr);
                cfg.turbo.gp.jitter_floor = g.value("jitter_floor", cfg.turbo.gp.jitter_floor);
                cfg.turbo.gp.noise_floor = g.value("noise_floor", cfg.turbo.gp.noise_floor);
            }
        }
        if (j.contains("prompt")) {
            const auto& p = j.at("prompt");
            check_keys(p, {"max_prompt_chars"}, "prompt");
            cfg.prompt.max_prompt_chars = p.value("max_prompt_chars", cfg.prompt.max_prompt_chars);
        }
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

std::string run_config_to_json(const RunConfig& cfg) {
    json j;
    j["benchmark"] = cfg.benchmark_file;
    j["bounds_preset"] = cfg.bounds_preset;
    j["custom_bounds"] = bounds_to_json(cfg.custom_bounds);
    j["weights"] = weights_to_json(cfg.weights);
    j["iterations"] = cfg.iterations;
    j["inner_budget"] = cfg.inner_budget;
    j["calibration"] = {{"budget", cfg.calibration.budget},
                        {"gain_threshold_db", cfg.calibration.gain_threshold_db},
                        {"top_k", cfg.calibration.top_k},
                        {"max_retries", cfg.calibration.max_retries},
                        {"threshold_step_db", cfg.calibration.threshold_step_db}};
    j["seed"] = cfg.seed;
    j["evaluator"] = cfg.evaluator_backend;
    j["spice"] = {{"command", cfg.spice.command},
                  {"work_root", cfg.spice.work_root},
                  {"timeout_s", cfg.spice.timeout_s}};
    j["llm"] = {{"backend", cfg.llm.backend},
                {"endpoint", cfg.llm.endpoint},
                {"model", cfg.llm.model},
                {"temperature", cfg.llm.temperature},
                {"greedy_decoding", cfg.llm.greedy_decoding},
                {"max_tokens", cfg.llm.max_tokens},
                {"timeout_s", cfg.llm.timeout_s},
                {"max_attempts", cfg.llm.max_attempts},
                {"backoff_s", cfg.llm.backoff_s},
                {"script", cfg.llm.script_path},
                {"audit", cfg.llm.audit_path}};
    j["feedback"] = cfg.feedback;
    j["reflection"] = cfg.reflection;
    j["baseline"] = {{"mode", cfg.baseline_mode},
                     {"steps", cfg.baseline_steps},
                     {"repeats", cfg.repeats}};
    j["turbo"] = {{"l_init", cfg.turbo.l_init},
                  {"l_min", cfg.turbo.l_min},
                  {"l_max", cfg.turbo.l_max},
                  {"tau_succ", cfg.turbo.tau_succ},
                  {"tau_fail", cfg.turbo.tau_fail},
                  {"batch", cfg.turbo.batch},
                  {"n_init", cfg.turbo.n_init},
                  {"parallelism", cfg.turbo.parallelism},
                  {"gp",
                   {{"hyperfit_subsample", cfg.turbo.gp.hyperfit_subsample},
                    {"conditioning_cap", cfg.turbo.gp.conditioning_cap},
                    {"adam_steps_cold", cfg.turbo.gp.adam_steps_cold},
                    {"adam_steps_warm", cfg.turbo.gp.adam_steps_warm},
                    {"adam_lr", cfg.turbo.gp.adam_lr},
                    {"jitter_floor", cfg.turbo.gp.jitter_floor},
                    {"noise_floor", cfg.turbo.gp.noise_floor}}}};
    j["prompt"] = {{"max_prompt_chars", cfg.prompt.max_prompt_chars}};
    return j.dump(2) + "\n";
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
    write_text_file(path, run_config_to_json(cfg));
}

std::optional<int> steps_to_target(const std::vector<double>& trajectory, double target) {
    for (std::size_t i = 0; i < trajectory.size(); ++i) {
        if (trajectory[i] >= target) return static_cast<int>(i) + 1;
    }
    return std::nullopt;
}

ComparisonMetrics compare_runs(const RunReport& ledro, const RunReport& baseline) {
    if (ledro.benchmark_id != baseline.benchmark_id) {
        throw ComparisonError("benchmark mismatch: " + ledro.benchmark_id + " vs " +
                              baseline.benchmark_id);
    }
    if (bounds_to_json(ledro.bounds) != bounds_to_json(baseline.bounds))
        throw ComparisonError("bound mismatch between runs");
    if (weights_to_json(ledro.weights) != weights_to_json(baseline.weights))
        throw ComparisonError("weight mismatch between runs");
    if (ledro.trajectory.empty() || baseline.trajectory.empty())
        throw ComparisonError("cannot compare runs without trajectories");
    return compute_metrics(ledro.trajectory, baseline.trajectory);
}

std::string report_to_json(const RunReport& rep) {
    json j;
    j["mode"] = rep.mode;
    j["benchmark"] = rep.benchmark_id;
    j["seed"] = rep.seed;
    j["seed_scheme"] = rep.seed_scheme;
    j["bounds"] = bounds_to_json(rep.bounds);
    j["weights"] = weights_to_json(rep.weights);
    j["calibration_threshold_db"] = rep.calibration_threshold_db;
    json phases = json::array();
    for (const auto& p : rep.phases) {
        phases.push_back(
            {{"phase", p.phase}, {"evaluations", p.evaluations}, {"wall_s", p.wall_s}});
    }
    j["phases"] = std::move(phases);
    j["total_evaluations"] = rep.total_evaluations;
    j["trajectory"] = rep.trajectory;
    j["best"] = record_to_json(rep.best);
    json rounds = json::array();
    for (const auto& r : rep.rounds) {
        rounds.push_back({{"round", r.round},
                          {"feedback", r.feedback_class},
                          {"parse_fallback", r.parse_fallback},
                          {"region", region_to_json(r.region)},
                          {"positive", r.verdict.positive},
                          {"good_count", r.verdict.good_count},
                          {"best_fom_this_round", r.verdict.best_fom_this_round},
                          {"best_fom_before", r.verdict.best_fom_before},
                          {"transcript", r.transcript_path}});
    }
    j["rounds"] = std::move(rounds);
    if (rep.baseline) {
        j["baseline"] = {{"steps", rep.baseline->steps},
                         {"repeats", rep.baseline->repeats},
                         {"best_repeat", rep.baseline->best_repeat},
                         {"final_best_per_repeat", rep.baseline->final_best_per_repeat},
                         {"trajectories", rep.baseline->trajectories}};
    }
    if (rep.metrics) {
        const auto& m = *rep.metrics;
        json mj = {{"ledro_best", m.ledro_best},
                   {"baseline_best", m.baseline_best},
                   {"fom_delta", m.fom_delta},
                   {"boost", m.boost},
                   {"target_reached", m.target_reached}};
        mj["ledro_steps"] = m.ledro_steps ? json(*m.ledro_steps) : json(nullptr);
        mj["baseline_steps"] = m.baseline_steps ? json(*m.baseline_steps) : json(nullptr);
        mj["speedup"] = m.speedup ? json(*m.speedup) : json(nullptr);
        j["metrics"] = std::move(mj);
    }
    return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        RunReport rep;
        rep.mode = j.at("mode").get<std::string>();
        rep.benchmark_id = j.at("benchmark").get<std::string>();
        rep.seed = j.at("seed").get<std::uint64_t>();
        rep.seed_scheme = j.at("seed_scheme").get<std::string>();
        rep.bounds = bounds_from_json(j.at("bounds"), SpecBounds{});
        rep.weights = weights_from_json(j.at("weights"), FomWeights{});
        rep.calibration_threshold_db = j.at("calibration_threshold_db").get<double>();
        for (const auto& p : j.at("phases")) {
            rep.phases.push_back({p.at("phase").get<std::string>(),
                                  p.at("evaluations").get<std::uint64_t>(),
                                  p.at("wall_s").get<double>()});
        }
        rep.total_evaluations = j.at("total_evaluations").get<std::uint64_t>();
        rep.trajectory = j.at("trajectory").get<std::vector<double>>();
        rep.best = record_from_json(j.at("best"));
        for (const auto& r : j.at("rounds")) {
            RoundSummary rs;
            rs.round = r.at("round").get<int>();
            rs.feedback_class = r.at("feedback").get<std::string>();
            rs.parse_fallback = r.at("parse_fallback").get<bool>();
            rs.region = region_from_json(r.at("region"));
            rs.verdict.positive = r.at("positive").get<bool>();
            rs.verdict.good_count = r.at("good_count").get<int>();
            rs.verdict.best_fom_this_round = r.at("best_fom_this_round").get<double>();
            rs.verdict.best_fom_before = r.at("best_fom_before").get<double>();
            rs.transcript_path = r.at("transcript").get<std::string>();
            rep.rounds.push_back(std::move(rs));
        }
        if (j.contains("baseline")) {
            const auto& b = j.at("baseline");
            BaselineBlock block;
            block.steps = b.at("steps").get<int>();
            block.repeats = b.at("repeats").get<int>();
            block.best_repeat = b.at("best_repeat").get<int>();
            block.final_best_per_repeat = b.at("final_best_per_repeat").get<std::vector<double>>();
            block.trajectories = b.at("trajectories").get<std::vector<std::vector<double>>>();
            rep.baseline = std::move(block);
        }
        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            ComparisonMetrics cm;
            cm.ledro_best = m.at("ledro_best").get<double>();
            cm.baseline_best = m.at("baseline_best").get<double>();
            cm.fom_delta = m.at("fom_delta").get<double>();
            cm.boost = m.at("boost").get<double>();
            cm.target_reached = m.at("target_reached").get<bool>();
            if (!m.at("ledro_steps").is_null()) cm.ledro_steps = m.at("ledro_steps").get<int>();
            if (!m.at("baseline_steps").is_null())
                cm.baseline_steps = m.at("baseline_steps").get<int>();
            if (!m.at("speedup").is_null()) cm.speedup = m.at("speedup").get<double>();
            rep.metrics = cm;
        }
        return rep;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: ") + e.what());
    }
}

RunReport run_ledro(const RunConfig& cfg, const std::string& run_dir, const RunHooks& hooks) {
    cfg.llm.validate();
    RunContext ctx = open_run(cfg, run_dir);
    auto client = make_llm_client(cfg.llm);
    std::uint64_t base_calls = 0;
    if (ctx.cp.llm_calls_made > 0) {
        if (cfg.llm.backend == "scripted") {
            // Scripted responses are positional: consume the prefix already
            // used so the resumed run continues mid-script.
            for (std::uint64_t i = 0; i < ctx.cp.llm_calls_made; ++i) client->complete({});
        } else {
            base_calls = ctx.cp.llm_calls_made;
        }
    }

    const auto calibration = ensure_calibration(cfg, ctx);
    const auto& defs = ctx.bench.parameters;
    const double threshold = ctx.cp.calibration_threshold_db;
    const std::string system_prompt =
        build_system_prompt(ctx.bench.netlist, ctx.bench.netlist.topology,
                            ctx.evaluator->objective());

    auto good_of_round = [&](int round) {
        std::vector<EvaluationRecord> good;
        const std::string phase = Phase::ledro_round(round);
        for (const auto& rec : ctx.records) {
            if (rec.phase == phase && !rec.failed && is_good_point(rec.specs, threshold))
                good.push_back(rec);
        }
        return good;
    };

    for (int r = ctx.cp.rounds_completed + 1; r <= cfg.iterations; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const SearchRegion prev_region =
            ctx.cp.history.empty() ? ctx.full : ctx.cp.history.back().outcome.region;

        TranscriptFile tf;
        tf.round = r;
        tf.system_prompt = system_prompt;
        tf.feedback_class =
            (r == 1 || !cfg.feedback)
                ? "none"
                : std::string(ctx.cp.history.back().outcome.verdict.class_name());

        std::string reflection_text;
        if (r > 1 && cfg.feedback && cfg.reflection) {
            std::vector<RoundOutcome> outcomes;
            for (const auto& h : ctx.cp.history) outcomes.push_back(h.outcome);
            tf.reflection_prompt = build_reflection_prompt(outcomes, defs);
            reflection_text = client->complete({{"system", system_prompt},
                                                {"user", tf.reflection_prompt}});
            tf.reflection_response = reflection_text;
        }

        if (r == 1) {
            tf.request = build_first_round_prompt(calibration, defs, ctx.full, cfg.prompt);
        } else if (cfg.feedback) {
            tf.request = build_followup_prompt(ctx.cp.history.back().outcome.verdict,
                                               good_of_round(r - 1), reflection_text, defs,
                                               cfg.prompt);
        } else {
            tf.request = build_continuation_prompt(defs, ctx.full, cfg.prompt);
        }
        tf.response = client->complete({{"system", system_prompt}, {"user", tf.request}});

        SearchRegion region;
        bool fallback = false;
        try {
            region = parse_region(tf.response, defs, ctx.full, prev_region);
        } catch (const RegionParseFailure&) {
            tf.reminder_prompt = build_format_reminder(defs, ctx.full);
            tf.reminder_response =
                client->complete({{"system", system_prompt}, {"user", tf.reminder_prompt}});
            try {
                region = parse_region(tf.reminder_response, defs, ctx.full, prev_region);
            } catch (const RegionParseFailure&) {
                region = prev_region;
                fallback = true;
            }
        }
        tf.parse_fallback = fallback;
        tf.region_lines = render_region_lines(region, defs);

        const double before = prior_best(ctx.records);
        std::vector<EvaluationRecord> round_records;
        turbo_run(*ctx.evaluator, region, cfg.inner_budget, derive_seed(cfg.seed, "round", r),
                  cfg.turbo, ctx.records, Phase::ledro_round(r), ctx.records.size() + 1,
                  [&](const EvaluationRecord& rec) {
                      ctx.record(rec);
                      round_records.push_back(rec);
                  });
        if (hooks.after_round_evals) hooks.after_round_evals(r);

        FeedbackVerdict verdict = classify_feedback(round_records, before, threshold);
        // An unusable proposal counts against the exchange even if the rerun
        // of the previous region happened to improve.
        if (fallback) verdict.positive = false;

        write_transcript(ctx.paths.transcript_file(r), tf);
        ctx.cp.history.push_back({RoundOutcome{r, region, verdict}, fallback});
        ctx.cp.rounds_completed = r;
        ctx.cp.evals_logged = ctx.records.size();
        ctx.cp.llm_calls_made = base_calls + client->calls_made();
        ctx.cp.timing.push_back({Phase::ledro_round(r), seconds_since(t0)});
        ctx.checkpoint();
        if (hooks.after_round_checkpoint) hooks.after_round_checkpoint(r);
    }

    if (cfg.resolved_baseline_steps() > 0) run_baseline_phases(cfg, ctx);

    RunReport rep = build_report(cfg, ctx, "ledro");
    write_text_file(ctx.paths.report_file(), report_to_json(rep));
    return rep;
}

RunReport run_baseline(const RunConfig& cfg, const std::string& run_dir) {
    if (cfg.resolved_baseline_steps() <= 0)
        throw ConfigError("baseline run needs a baseline mode other than none");
    RunContext ctx = open_run(cfg, run_dir);
    ensure_calibration(cfg, ctx);
    run_baseline_phases(cfg, ctx);
    RunReport rep = build_report(cfg, ctx, "baseline");
    write_text_file(ctx.paths.report_file(), report_to_json(rep));
    return rep;
}

RunReport replay_report(const std::string& run_dir) {
    RunPaths paths{run_dir};
    const RunConfig cfg = load_run_config(paths.config_file());
    RunContext ctx;
    ctx.paths = paths;
    ctx.bench = load_benchmark(cfg.benchmark_file);
    ctx.full = SearchRegion::full(ctx.bench.parameters);
    if (!load_checkpoint(paths.checkpoint_file(), ctx.cp))
        throw ConfigError("no checkpoint in " + run_dir + "; nothing to replay");
    ctx.records = read_eval_log(paths.eval_log_file());
    if (ctx.records.size() < ctx.cp.evals_logged)
        throw ConfigError("eval log is shorter than the checkpoint expects");
    ctx.records.resize(ctx.cp.evals_logged);
    const std::string mode = ctx.cp.rounds_completed > 0 || cfg.baseline_mode == "none"
                                 ? "ledro"
                                 : "baseline";
    RunReport rep = build_report(cfg, ctx, mode);
    write_text_file(paths.report_file(), report_to_json(rep));
    return rep;
}

} // namespace ledro
