#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ledro/errors.hpp"
#include "ledro/orchestrator.hpp"

#include "test_util.hpp"

using namespace ledro;
using ledro::testutil::benchmark_path;
using ledro::testutil::read_file;
using ledro::testutil::write_file;

namespace {

std::filesystem::path temp_dir(const std::string& leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "ledro_orchestrator_tests" / leaf;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

const char* kRegionA =
    "nfin_diff: 8 to 32\n"
    "nfin_load: 4 to 24\n"
    "nfin_tail: 8 to 48\n"
    "l_diff: 7e-09 to 1.4e-08\n"
    "l_load: 7e-09 to 2.1e-08\n"
    "l_tail: 1.4e-08 to 2.1e-08\n"
    "vbias_tail: 0.3 to 0.5\n";

const char* kRegionB =
    "nfin_diff: 12 to 28\n"
    "nfin_load: 6 to 20\n"
    "nfin_tail: 12 to 40\n"
    "l_diff: 7e-09 to 1.4e-08\n"
    "l_load: 7e-09 to 1.4e-08\n"
    "l_tail: 1.4e-08 to 2.1e-08\n"
    "vbias_tail: 0.32 to 0.45\n";

const char* kReflectionText = "Mid-range fin counts held up; keep the tail bias moderate.";

std::string write_script(const std::filesystem::path& dir, const std::vector<std::string>& parts) {
    std::string text;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) text += "\n-----\n";
        text += parts[i];
    }
    const auto path = (dir / "script.txt").string();
    write_file(path, text);
    return path;
}

RunConfig small_config(const std::string& script, std::uint64_t seed = 42) {
    RunConfig cfg;
    cfg.benchmark_file = benchmark_path("ota5t/params.json");
    cfg.iterations = 2;
    cfg.inner_budget = 12;
    cfg.calibration.budget = 24;
    cfg.seed = seed;
    cfg.llm.backend = "scripted";
    cfg.llm.script_path = script;
    cfg.turbo.parallelism = 1;
    return cfg;
}

std::uint64_t phase_evals(const RunReport& rep, const std::string& phase) {
    for (const auto& p : rep.phases) {
        if (p.phase == phase) return p.evaluations;
    }
    return static_cast<std::uint64_t>(-1);
}

void check_reports_equal_modulo_walltime(const RunReport& a, const RunReport& b) {
    CHECK(a.mode == b.mode);
    CHECK(a.benchmark_id == b.benchmark_id);
    CHECK(a.calibration_threshold_db == b.calibration_threshold_db);
    CHECK(a.total_evaluations == b.total_evaluations);
    REQUIRE(a.trajectory.size() == b.trajectory.size());
    for (std::size_t i = 0; i < a.trajectory.size(); ++i) CHECK(a.trajectory[i] == b.trajectory[i]);
    CHECK(a.best.step == b.best.step);
    CHECK(a.best.fom.value == b.best.fom.value);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].feedback_class == b.rounds[i].feedback_class);
        CHECK(a.rounds[i].verdict.positive == b.rounds[i].verdict.positive);
        CHECK(a.rounds[i].verdict.good_count == b.rounds[i].verdict.good_count);
        REQUIRE(a.rounds[i].region.size() == b.rounds[i].region.size());
        for (std::size_t k = 0; k < a.rounds[i].region.size(); ++k) {
            CHECK(a.rounds[i].region[k].lo == b.rounds[i].region[k].lo);
            CHECK(a.rounds[i].region[k].hi == b.rounds[i].region[k].hi);
        }
    }
}

} // namespace

TEST_CASE("run_ledro: identical configs in fresh directories produce identical runs") {
    const auto root = temp_dir("determinism");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);

    const auto rep1 = run_ledro(cfg, (root / "run1").string());
    const auto rep2 = run_ledro(cfg, (root / "run2").string());

    CHECK(read_file((root / "run1" / "eval_log.txt").string()) ==
          read_file((root / "run2" / "eval_log.txt").string()));
    check_reports_equal_modulo_walltime(rep1, rep2);

    for (int r = 1; r <= 2; ++r) {
        RunPaths p1{(root / "run1").string()};
        RunPaths p2{(root / "run2").string()};
        CHECK(read_file(p1.transcript_file(r)) == read_file(p2.transcript_file(r)));
    }
}

TEST_CASE("run_ledro: per-phase evaluation counts follow the configured budgets") {
    const auto root = temp_dir("counts");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);
    const auto dir = (root / "run").string();
    const auto rep = run_ledro(cfg, dir);

    CHECK(rep.mode == "ledro");
    CHECK(rep.benchmark_id == "ota5t");
    CHECK(rep.total_evaluations == 24 + 12 + 12);
    CHECK(phase_evals(rep, "calibration") == 24);
    CHECK(phase_evals(rep, "ledro-round-1") == 12);
    CHECK(phase_evals(rep, "ledro-round-2") == 12);
    CHECK(rep.trajectory.size() == 48);
    for (std::size_t i = 1; i < rep.trajectory.size(); ++i)
        CHECK(rep.trajectory[i] >= rep.trajectory[i - 1]);
    CHECK(rep.best.fom.value == rep.trajectory.back());

    const auto records = read_eval_log(RunPaths{dir}.eval_log_file());
    REQUIRE(records.size() == 48);
    for (std::size_t i = 0; i < records.size(); ++i)
        CHECK(records[i].step == i + 1);
    for (std::size_t i = 0; i < 24; ++i) CHECK(records[i].phase == "calibration");
    for (std::size_t i = 24; i < 36; ++i) CHECK(records[i].phase == "ledro-round-1");
    for (std::size_t i = 36; i < 48; ++i) CHECK(records[i].phase == "ledro-round-2");

    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.rounds_completed == 2);
    CHECK(cp.evals_logged == 48);
    CHECK(cp.llm_calls_made == 3); // proposal + (reflection + follow-up)

    REQUIRE(rep.rounds.size() == 2);
    CHECK(rep.rounds[0].feedback_class == "none");
    CHECK(rep.rounds[1].feedback_class ==
          std::string(rep.rounds[0].verdict.class_name()));
    CHECK(std::filesystem::exists(dir + "/" + rep.rounds[0].transcript_path));
    CHECK(std::filesystem::exists(dir + "/" + rep.rounds[1].transcript_path));

    // Every searched region stays inside the full space.
    const auto bench = load_benchmark(cfg.benchmark_file);
    const auto full = SearchRegion::full(bench.parameters);
    for (const auto& round : rep.rounds) {
        for (std::size_t k = 0; k < full.size(); ++k) {
            CHECK(round.region[k].lo >= full[k].lo);
            CHECK(round.region[k].hi <= full[k].hi);
        }
    }
}

TEST_CASE("run_ledro: disabling feedback removes verdicts and reflection from later rounds") {
    const auto root = temp_dir("no_feedback");
    const auto script = write_script(root, {kRegionA, kRegionB});
    auto cfg = small_config(script);
    cfg.feedback = false;
    const auto dir = (root / "run").string();
    const auto rep = run_ledro(cfg, dir);

    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.llm_calls_made == 2); // one proposal per round, nothing else

    const auto tf = parse_transcript(read_file(RunPaths{dir}.transcript_file(2)));
    CHECK(tf.feedback_class == "none");
    CHECK(tf.reflection_prompt.empty());
    CHECK(tf.reflection_response.empty());
    CHECK(tf.request.find("positive") == std::string::npos);
    CHECK(tf.request.find("negative") == std::string::npos);
    CHECK(tf.request.find("worked well") == std::string::npos);
    CHECK(tf.request.find("FoM") == std::string::npos);
    CHECK(tf.request.find("Propose the next search range") != std::string::npos);
    CHECK(rep.rounds[1].feedback_class == "none");
}

TEST_CASE("run_ledro: disabling reflection keeps the verdict but drops the look-back call") {
    const auto root = temp_dir("no_reflection");
    const auto script = write_script(root, {kRegionA, kRegionB});
    auto cfg = small_config(script);
    cfg.reflection = false;
    const auto dir = (root / "run").string();
    const auto rep = run_ledro(cfg, dir);

    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.llm_calls_made == 2);

    const auto tf = parse_transcript(read_file(RunPaths{dir}.transcript_file(2)));
    CHECK(tf.reflection_prompt.empty());
    CHECK(tf.reflection_response.empty());
    CHECK((tf.feedback_class == "positive" || tf.feedback_class == "negative"));
    // The follow-up still reports the outcome of round one.
    CHECK(tf.request.find("Propose the next search range") == std::string::npos);
    CHECK(rep.rounds[1].feedback_class == tf.feedback_class);
}

TEST_CASE("run_ledro: an abort after a round checkpoint resumes into an identical run") {
    const auto root = temp_dir("resume_round_boundary");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);

    const auto clean = run_ledro(cfg, (root / "clean").string());

    const auto dir = (root / "interrupted").string();
    RunHooks kill;
    kill.after_round_checkpoint = [](int round) {
        if (round == 1) throw std::runtime_error("simulated kill");
    };
    CHECK_THROWS_AS(run_ledro(cfg, dir, kill), std::runtime_error);

    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.rounds_completed == 1);
    CHECK(cp.evals_logged == 36);

    const auto resumed = run_ledro(cfg, dir);
    CHECK(read_file((root / "clean" / "eval_log.txt").string()) ==
          read_file(RunPaths{dir}.eval_log_file()));
    check_reports_equal_modulo_walltime(clean, resumed);
    CHECK(read_file(RunPaths{(root / "clean").string()}.transcript_file(2)) ==
          read_file(RunPaths{dir}.transcript_file(2)));
}

TEST_CASE("run_ledro: an abort between evaluations and checkpoint drops the orphan records") {
    const auto root = temp_dir("resume_mid_round");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);

    const auto clean = run_ledro(cfg, (root / "clean").string());

    const auto dir = (root / "interrupted").string();
    RunHooks kill;
    kill.after_round_evals = [](int round) {
        if (round == 2) throw std::runtime_error("simulated kill");
    };
    CHECK_THROWS_AS(run_ledro(cfg, dir, kill), std::runtime_error);

    // Round two's records hit the log, but its checkpoint never landed.
    CHECK(read_eval_log(RunPaths{dir}.eval_log_file()).size() == 48);
    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.rounds_completed == 1);
    CHECK(cp.evals_logged == 36);
    CHECK_FALSE(std::filesystem::exists(RunPaths{dir}.transcript_file(2)));

    const auto resumed = run_ledro(cfg, dir);
    CHECK(read_file((root / "clean" / "eval_log.txt").string()) ==
          read_file(RunPaths{dir}.eval_log_file()));
    check_reports_equal_modulo_walltime(clean, resumed);
}

TEST_CASE("run_ledro: rerunning a finished directory just re-renders the report") {
    const auto root = temp_dir("rerun_finished");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);
    const auto dir = (root / "run").string();

    const auto first = run_ledro(cfg, dir);
    const auto log_before = read_file(RunPaths{dir}.eval_log_file());
    const auto again = run_ledro(cfg, dir);
    CHECK(read_file(RunPaths{dir}.eval_log_file()) == log_before);
    check_reports_equal_modulo_walltime(first, again);
}

TEST_CASE("run_ledro: a changed config is refused for an existing directory") {
    const auto root = temp_dir("config_drift");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);
    const auto dir = (root / "run").string();
    run_ledro(cfg, dir);

    auto drifted = cfg;
    drifted.seed = cfg.seed + 1;
    CHECK_THROWS_AS(run_ledro(drifted, dir), ConfigError);
}

TEST_CASE("run_ledro: a held lock blocks a second orchestrator") {
    const auto root = temp_dir("lock_blocks");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);
    const auto dir = (root / "run").string();
    std::filesystem::create_directories(dir);
    RunLock held(RunPaths{dir}.lock_file());
    CHECK_THROWS_AS(run_ledro(cfg, dir), RunLockError);
}

TEST_CASE("run_ledro: unusable responses fall back to the previous region and force a negative") {
    const auto root = temp_dir("parse_fallback");
    const auto script = write_script(
        root, {"I cannot help with that.", "Still no ranges from me, sorry."});
    auto cfg = small_config(script);
    cfg.iterations = 1;
    const auto dir = (root / "run").string();
    const auto rep = run_ledro(cfg, dir);

    REQUIRE(rep.rounds.size() == 1);
    CHECK(rep.rounds[0].parse_fallback);
    CHECK_FALSE(rep.rounds[0].verdict.positive);

    // Round one inherits the full space when the proposal is unusable.
    const auto bench = load_benchmark(cfg.benchmark_file);
    const auto full = SearchRegion::full(bench.parameters);
    for (std::size_t k = 0; k < full.size(); ++k) {
        CHECK(rep.rounds[0].region[k].lo == full[k].lo);
        CHECK(rep.rounds[0].region[k].hi == full[k].hi);
    }

    const auto tf = parse_transcript(read_file(RunPaths{dir}.transcript_file(1)));
    CHECK(tf.parse_fallback);
    CHECK_FALSE(tf.reminder_prompt.empty());
    CHECK_FALSE(tf.reminder_response.empty());
    RunCheckpoint cp;
    REQUIRE(load_checkpoint(RunPaths{dir}.checkpoint_file(), cp));
    CHECK(cp.llm_calls_made == 2);
}

TEST_CASE("run_ledro: a valid answer to the format reminder is used directly") {
    const auto root = temp_dir("reminder_recovers");
    const auto script =
        write_script(root, {"No ranges here.", "nfin_diff: 8 to 16"});
    auto cfg = small_config(script);
    cfg.iterations = 1;
    const auto rep = run_ledro(cfg, (root / "run").string());

    REQUIRE(rep.rounds.size() == 1);
    CHECK_FALSE(rep.rounds[0].parse_fallback);
    CHECK(rep.rounds[0].region[0].lo == 8.0);
    CHECK(rep.rounds[0].region[0].hi == 16.0);
    // Unmentioned parameters inherit the full space on round one.
    const auto bench = load_benchmark(cfg.benchmark_file);
    const auto full = SearchRegion::full(bench.parameters);
    CHECK(rep.rounds[0].region[1].lo == full[1].lo);
    CHECK(rep.rounds[0].region[1].hi == full[1].hi);
}

TEST_CASE("run_baseline: repeats share calibration and the best repeat leads the report") {
    const auto root = temp_dir("baseline");
    auto cfg = small_config("");
    cfg.llm = {};
    cfg.baseline_mode = "custom";
    cfg.baseline_steps = 34; // 24 calibration + 10 fresh
    cfg.repeats = 3;
    const auto dir = (root / "run").string();
    const auto rep = run_baseline(cfg, dir);

    CHECK(rep.mode == "baseline");
    CHECK(rep.total_evaluations == 24 + 3 * 10);
    CHECK(phase_evals(rep, "calibration") == 24);
    for (int i = 1; i <= 3; ++i)
        CHECK(phase_evals(rep, "baseline-repeat-" + std::to_string(i)) == 10);

    REQUIRE(rep.baseline.has_value());
    const auto& block = *rep.baseline;
    CHECK(block.steps == 34);
    CHECK(block.repeats == 3);
    REQUIRE(block.trajectories.size() == 3);
    REQUIRE(block.final_best_per_repeat.size() == 3);
    double best = block.final_best_per_repeat[0];
    int best_idx = 1;
    for (int i = 2; i <= 3; ++i) {
        if (block.final_best_per_repeat[i - 1] > best) {
            best = block.final_best_per_repeat[i - 1];
            best_idx = i;
        }
    }
    CHECK(block.best_repeat == best_idx);
    for (const auto& traj : block.trajectories) {
        CHECK(traj.size() == 34);
        for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] >= traj[i - 1]);
        // All repeats share the calibration prefix.
        for (std::size_t i = 0; i < 24; ++i) CHECK(traj[i] == block.trajectories[0][i]);
    }
    CHECK(rep.trajectory == block.trajectories[best_idx - 1]);
    CHECK(rep.best.fom.value == best);
    CHECK(rep.rounds.empty());
}

TEST_CASE("run_baseline: a budget equal to calibration reuses those points verbatim") {
    const auto root = temp_dir("baseline_degenerate");
    auto cfg = small_config("");
    cfg.llm = {};
    cfg.baseline_mode = "custom";
    cfg.baseline_steps = 24;
    cfg.repeats = 2;
    const auto rep = run_baseline(cfg, (root / "run").string());

    CHECK(rep.total_evaluations == 24);
    REQUIRE(rep.baseline.has_value());
    CHECK(rep.baseline->trajectories[0].size() == 24);
    CHECK(rep.baseline->trajectories[0] == rep.baseline->trajectories[1]);
    CHECK(rep.baseline->best_repeat == 1); // tie resolves to the earliest
    CHECK(phase_evals(rep, "baseline-repeat-1") == 0);
    CHECK(phase_evals(rep, "baseline-repeat-2") == 0);
}

TEST_CASE("run_baseline: refuses to run without a baseline mode") {
    const auto root = temp_dir("baseline_none");
    auto cfg = small_config("");
    cfg.llm = {};
    CHECK_THROWS_AS(run_baseline(cfg, (root / "run").string()), ConfigError);
}

TEST_CASE("run_ledro: an attached baseline yields embedded comparison metrics") {
    const auto root = temp_dir("combined");
    const auto script = write_script(root, {kRegionA});
    auto cfg = small_config(script);
    cfg.iterations = 1;
    cfg.baseline_mode = "custom";
    cfg.baseline_steps = 34;
    cfg.repeats = 2;
    const auto rep = run_ledro(cfg, (root / "run").string());

    CHECK(rep.mode == "ledro");
    CHECK(rep.total_evaluations == 24 + 12 + 2 * 10);
    CHECK(rep.trajectory.size() == 36); // calibration + one refinement round
    REQUIRE(rep.baseline.has_value());
    REQUIRE(rep.metrics.has_value());
    const auto& m = *rep.metrics;
    CHECK(m.ledro_best == rep.trajectory.back());
    const auto& base_traj = rep.baseline->trajectories[rep.baseline->best_repeat - 1];
    CHECK(m.baseline_best == base_traj.back());
    CHECK(m.fom_delta == m.ledro_best - m.baseline_best);
    if (m.fom_delta == 0.0) {
        CHECK(m.boost == 0.0);
    } else {
        CHECK(m.boost ==
              doctest::Approx(std::abs(m.fom_delta) / std::abs(m.baseline_best)));
    }
    CHECK(m.baseline_steps.has_value());
}

TEST_CASE("replay_report: rebuilding from stored artifacts reproduces the report byte for byte") {
    const auto root = temp_dir("replay");
    const auto script = write_script(root, {kRegionA, kReflectionText, kRegionB});
    const auto cfg = small_config(script);
    const auto dir = (root / "run").string();
    run_ledro(cfg, dir);

    const auto original = read_file(RunPaths{dir}.report_file());
    std::filesystem::remove(RunPaths{dir}.report_file());
    replay_report(dir);
    CHECK(read_file(RunPaths{dir}.report_file()) == original);

    // And the serialized form round-trips through the parser.
    const auto rep = report_from_json(original);
    CHECK(report_to_json(rep) == original);
}

TEST_CASE("replay_report: refuses a directory that never checkpointed") {
    const auto root = temp_dir("replay_empty");
    auto cfg = small_config("");
    cfg.llm = {};
    save_run_config(cfg, (root / "config.json").string());
    CHECK_THROWS_AS(replay_report(root.string()), ConfigError);
}

TEST_CASE("steps_to_target: first step whose running best reaches the target") {
    CHECK(steps_to_target({-3.0, -2.0, -1.0}, -2.0) == 2);
    CHECK(steps_to_target({-3.0, -2.0, -1.0}, -3.5) == 1);
    CHECK(steps_to_target({-3.0, -2.0, -1.0}, -0.5) == std::nullopt);
    CHECK(steps_to_target({}, 0.0) == std::nullopt);
}

TEST_CASE("compare_runs: worked examples for boost and speedup") {
    RunReport ledro;
    ledro.benchmark_id = "ota5t";
    ledro.trajectory = {-2.5, -1.5, -1.45};
    RunReport base = ledro;
    base.trajectory = {-3.0, -2.0, -1.57, -1.57};

    const auto m = compare_runs(ledro, base);
    CHECK(m.ledro_best == -1.45);
    CHECK(m.baseline_best == -1.57);
    CHECK(m.fom_delta == doctest::Approx(0.12));
    CHECK(m.boost == doctest::Approx(0.12 / 1.57));
    CHECK(m.ledro_steps == 2);    // -1.5 already clears -1.57
    CHECK(m.baseline_steps == 3);
    CHECK(m.speedup == doctest::Approx(1.5));
    CHECK(m.target_reached);

    RunReport same = ledro;
    const auto identical = compare_runs(same, ledro);
    CHECK(identical.fom_delta == 0.0);
    CHECK(identical.boost == 0.0);
    CHECK(identical.speedup == doctest::Approx(1.0));

    RunReport worse = ledro;
    worse.trajectory = {-3.0, -2.9};
    RunReport easy = ledro;
    easy.trajectory = {-1.0};
    const auto missed = compare_runs(worse, easy);
    CHECK_FALSE(missed.target_reached);
    CHECK_FALSE(missed.ledro_steps.has_value());
    CHECK_FALSE(missed.speedup.has_value());
    CHECK(missed.fom_delta == doctest::Approx(-1.9));
    CHECK(missed.boost == doctest::Approx(1.9));
}

TEST_CASE("compare_runs: mismatched benchmarks, bounds, or weights are rejected") {
    RunReport a;
    a.benchmark_id = "ota5t";
    a.trajectory = {-1.0};
    RunReport b = a;

    b.benchmark_id = "two_stage_miller";
    CHECK_THROWS_AS(compare_runs(a, b), ComparisonError);

    b = a;
    b.bounds.gain.value = 60.0;
    CHECK_THROWS_AS(compare_runs(a, b), ComparisonError);

    b = a;
    b.weights.ugbw = 2.0;
    CHECK_THROWS_AS(compare_runs(a, b), ComparisonError);

    b = a;
    b.trajectory.clear();
    CHECK_THROWS_AS(compare_runs(a, b), ComparisonError);
}

TEST_CASE("run config: canonical serialization round-trips through file and parser") {
    const auto root = temp_dir("config_roundtrip");
    auto cfg = small_config((root / "script.txt").string(), 99);
    cfg.bounds_preset = "custom";
    cfg.custom_bounds.gain.value = 55.0;
    cfg.custom_bounds.supply_current.value = 4e-6;
    cfg.weights.gain = 2.5;
    cfg.baseline_mode = "bo-1200";
    cfg.repeats = 4;
    cfg.turbo.batch = 8;
    cfg.turbo.gp.conditioning_cap = 256;
    cfg.prompt.max_prompt_chars = 9000;

    const auto path = (root / "config.json").string();
    save_run_config(cfg, path);
    const auto loaded = load_run_config(path);
    CHECK(run_config_to_json(loaded) == run_config_to_json(cfg));
    CHECK(loaded.resolved_baseline_steps() == 1200);
    CHECK(loaded.custom_bounds.gain.value == 55.0);
    CHECK(loaded.turbo.gp.conditioning_cap == 256);

    // Defaults apply for everything a sparse file omits.
    write_file(path, "{}\n");
    const auto sparse = load_run_config(path);
    CHECK(run_config_to_json(sparse) == run_config_to_json(RunConfig{}));
}

TEST_CASE("run config: unknown keys anywhere are rejected") {
    const auto root = temp_dir("config_unknown");
    const auto path = (root / "config.json").string();

    write_file(path, R"({"bogus": 1})");
    CHECK_THROWS_AS(load_run_config(path), ConfigError);

    write_file(path, R"({"llm": {"bogus": true}})");
    CHECK_THROWS_AS(load_run_config(path), ConfigError);

    write_file(path, R"({"turbo": {"gp": {"zap": 1}}})");
    CHECK_THROWS_AS(load_run_config(path), ConfigError);

    write_file(path, R"({"iterations": "ten"})");
    CHECK_THROWS_AS(load_run_config(path), ConfigError);

    write_file(path, "not json at all");
    CHECK_THROWS_AS(load_run_config(path), ConfigError);
}

TEST_CASE("run config: validation catches inconsistent settings") {
    auto ok = small_config("/tmp/unused.txt");

    auto cfg = ok;
    cfg.iterations = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.inner_budget = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.bounds_preset = "medium";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.evaluator_backend = "hspice";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.baseline_mode = "bo-9000";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.baseline_mode = "custom";
    cfg.baseline_steps = 25; // between reuse (24) and 24 + 2
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.baseline_mode = "custom";
    cfg.baseline_steps = 23;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    cfg = ok;
    cfg.repeats = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
