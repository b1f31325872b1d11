#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "ledro/evaluator.hpp"
#include "ledro/prompts.hpp"

namespace ledro {

/// File layout of one run directory.
struct RunPaths {
    std::string root;

    std::string config_file() const { return root + "/config.json"; }
    std::string eval_log_file() const { return root + "/eval_log.txt"; }
    std::string checkpoint_file() const { return root + "/checkpoint.json"; }
    std::string report_file() const { return root + "/report.json"; }
    std::string lock_file() const { return root + "/lock"; }
    std::string transcript_dir() const { return root + "/transcripts"; }
    std::string transcript_file(int round) const;
};

/// Whole-file text IO for run artifacts. Writes go through a temp file plus
/// rename, so readers never observe a partial file.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// One evaluation as one `|`-separated log line: step, phase, parameter
/// values, the four measured specs, FoM, failed flag, and the device/region
/// telemetry summary. Doubles use shortest round-trip notation, so a parsed
/// line reproduces every numeric field bit for bit. Wall time is excluded;
/// telemetry bias details are summarized down to device:region pairs.
std::string format_eval_record(const EvaluationRecord& rec);
EvaluationRecord parse_eval_record(const std::string& line);

/// Append-only log writer; one flushed line per record.
class EvalLogWriter {
public:
    explicit EvalLogWriter(const std::string& path);

    void append(const EvaluationRecord& rec);
    std::uint64_t records_written() const { return written_; }

private:
    std::ofstream out_;
    std::uint64_t written_ = 0;
};

std::vector<EvaluationRecord> read_eval_log(const std::string& path);

/// Rewrites the log with only its first `keep_records` lines. Used on resume
/// to drop records from a round that never reached its checkpoint.
void truncate_eval_log(const std::string& path, std::size_t keep_records);

/// Exclusive ownership of a run directory for the lifetime of the object.
/// Creation fails with RunLockError if the lock file already exists; the
/// file is removed on destruction.
class RunLock {
public:
    explicit RunLock(const std::string& path);
    ~RunLock();

    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::string path_;
};

/// Loop state at the last completed phase boundary. Everything resume needs
/// beyond the eval log itself lives here; records are never duplicated.
struct RoundCheckpoint {
    RoundOutcome outcome;        // region searched plus its verdict
    bool parse_fallback = false; // region came from the previous round
};

struct PhaseTime {
    std::string phase;
    double wall_s = 0.0;
};

struct RunCheckpoint {
    bool calibration_done = false;
    double calibration_threshold_db = 0.0; // threshold the filter actually used
    int rounds_completed = 0;
    int repeats_completed = 0;
    std::uint64_t evals_logged = 0;  // valid log length; later lines are orphans
    std::uint64_t llm_calls_made = 0;
    std::vector<RoundCheckpoint> history;
    std::vector<PhaseTime> timing;
};

void save_checkpoint(const std::string& path, const RunCheckpoint& cp);

/// Returns false when the file does not exist; throws on a malformed file.
bool load_checkpoint(const std::string& path, RunCheckpoint& out);

/// Everything said to and heard from the LLM while producing one round,
/// persisted as plain text. Sections are delimited by reserved `=== name ===`
/// marker lines; empty sections are omitted.
struct TranscriptFile {
    int round = 0;
    std::string feedback_class;  // verdict of the previous round, "none" first
    bool parse_fallback = false;
    std::string system_prompt;
    std::string reflection_prompt;
    std::string reflection_response;
    std::string request;
    std::string response;
    std::string reminder_prompt;
    std::string reminder_response;
    std::string region_lines;    // the region actually searched
};

void write_transcript(const std::string& path, const TranscriptFile& t);
TranscriptFile parse_transcript(const std::string& text);

} // namespace ledro
