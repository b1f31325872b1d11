#include "ledro/run_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <system_error>

#include "ledro/errors.hpp"

namespace ledro {
namespace {

using nlohmann::json;

std::string shortest(double v) {
    std::array<char, 32> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw Error("double formatting failed");
    return std::string(buf.data(), end);
}

double parse_double(std::string_view text, const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ConfigError(std::string("eval log: bad ") + what + ": '" + std::string(text) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

} // namespace

void write_text_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write " + tmp);
        out << content;
        out.flush();
        if (!out) throw ConfigError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("cannot replace " + path + ": " + ec.message());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

namespace {

json region_to_json(const SearchRegion& region) {
    json arr = json::array();
    for (const auto& iv : region.intervals) arr.push_back({iv.lo, iv.hi});
    return arr;
}

SearchRegion region_from_json(const json& arr) {
    SearchRegion region;
    for (const auto& iv : arr) {
        if (!iv.is_array() || iv.size() != 2)
            throw ConfigError("checkpoint: region interval must be a [lo, hi] pair");
        region.intervals.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
    return region;
}

} // namespace

std::string RunPaths::transcript_file(int round) const {
    char name[32];
    std::snprintf(name, sizeof(name), "round_%02d.txt", round);
    return transcript_dir() + "/" + name;
}

std::string format_eval_record(const EvaluationRecord& rec) {
    std::string out = std::to_string(rec.step) + "|" + rec.phase + "|";
    for (std::size_t i = 0; i < rec.point.values.size(); ++i) {
        if (i > 0) out += ",";
        out += shortest(rec.point.values[i]);
    }
    out += "|" + shortest(rec.specs.gain_db) + "|" + shortest(rec.specs.ugbw_hz) + "|" +
           shortest(rec.specs.phase_margin_deg) + "|" + shortest(rec.specs.supply_current_a) +
           "|" + shortest(rec.fom.value) + "|" + (rec.failed ? "1" : "0") + "|";
    for (std::size_t i = 0; i < rec.telemetry.size(); ++i) {
        if (i > 0) out += ";";
        out += rec.telemetry[i].device + ":" +
               std::string(device_region_name(rec.telemetry[i].region));
    }
    return out;
}

EvaluationRecord parse_eval_record(const std::string& line) {
    const auto fields = split(line, '|');
    if (fields.size() != 10)
        throw ConfigError("eval log: expected 10 fields, got " + std::to_string(fields.size()));

    EvaluationRecord rec;
    {
        std::uint64_t step = 0;
        auto [ptr, ec] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), step);
        if (ec != std::errc() || ptr != fields[0].data() + fields[0].size())
            throw ConfigError("eval log: bad step: '" + std::string(fields[0]) + "'");
        rec.step = step;
    }
    rec.phase = std::string(fields[1]);
    if (!fields[2].empty()) {
        for (const auto& v : split(fields[2], ',')) {
            rec.point.values.push_back(parse_double(v, "parameter value"));
        }
    }
    rec.specs.gain_db = parse_double(fields[3], "gain");
    rec.specs.ugbw_hz = parse_double(fields[4], "ugbw");
    rec.specs.phase_margin_deg = parse_double(fields[5], "phase margin");
    rec.specs.supply_current_a = parse_double(fields[6], "supply current");
    rec.fom.value = parse_double(fields[7], "fom");
    if (fields[8] == "1") {
        rec.failed = true;
    } else if (fields[8] != "0") {
        throw ConfigError("eval log: bad failed flag: '" + std::string(fields[8]) + "'");
    }
    if (!fields[9].empty()) {
        for (const auto& item : split(fields[9], ';')) {
            const std::size_t colon = item.rfind(':');
            if (colon == std::string_view::npos)
                throw ConfigError("eval log: bad telemetry item: '" + std::string(item) + "'");
            TransistorTelemetry t;
            t.device = std::string(item.substr(0, colon));
            t.region = device_region_from_name(item.substr(colon + 1));
            rec.telemetry.push_back(std::move(t));
        }
    }
    return rec;
}

EvalLogWriter::EvalLogWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::app) {
    if (!out_) throw ConfigError("cannot open eval log " + path);
}

void EvalLogWriter::append(const EvaluationRecord& rec) {
    out_ << format_eval_record(rec) << '\n';
    out_.flush();
    if (!out_) throw ConfigError("eval log write failed");
    ++written_;
}

std::vector<EvaluationRecord> read_eval_log(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read eval log " + path);
    std::vector<EvaluationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(parse_eval_record(line));
    }
    return records;
}

void truncate_eval_log(const std::string& path, std::size_t keep_records) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read eval log " + path);
    std::string kept;
    std::string line;
    std::size_t count = 0;
    while (count < keep_records && std::getline(in, line)) {
        if (line.empty()) continue;
        kept += line;
        kept += '\n';
        ++count;
    }
    if (count < keep_records)
        throw ConfigError("eval log holds " + std::to_string(count) + " records, checkpoint expects " +
                          std::to_string(keep_records));
    in.close();
    write_text_file(path, kept);
}

RunLock::RunLock(const std::string& path) : path_(path) {
    const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw RunLockError("run directory is locked by " + path +
                           "; remove the file if no other run is active");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    const ssize_t n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
    if (n < 0) throw RunLockError("cannot write lock file " + path);
}

RunLock::~RunLock() { ::unlink(path_.c_str()); }

void save_checkpoint(const std::string& path, const RunCheckpoint& cp) {
    json j;
    j["calibration_done"] = cp.calibration_done;
    j["calibration_threshold_db"] = cp.calibration_threshold_db;
    j["rounds_completed"] = cp.rounds_completed;
    j["repeats_completed"] = cp.repeats_completed;
    j["evals_logged"] = cp.evals_logged;
    j["llm_calls_made"] = cp.llm_calls_made;
    json history = json::array();
    for (const auto& h : cp.history) {
        history.push_back({{"round", h.outcome.round},
                           {"region", region_to_json(h.outcome.region)},
                           {"positive", h.outcome.verdict.positive},
                           {"good_count", h.outcome.verdict.good_count},
                           {"best_fom_this_round", h.outcome.verdict.best_fom_this_round},
                           {"best_fom_before", h.outcome.verdict.best_fom_before},
                           {"parse_fallback", h.parse_fallback}});
    }
    j["history"] = std::move(history);
    json timing = json::array();
    for (const auto& t : cp.timing) timing.push_back({{"phase", t.phase}, {"wall_s", t.wall_s}});
    j["timing"] = std::move(timing);
    write_text_file(path, j.dump(2) + "\n");
}

bool load_checkpoint(const std::string& path, RunCheckpoint& out) {
    if (!std::filesystem::exists(path)) return false;
    json j;
    try {
        j = json::parse(read_text_file(path));
        RunCheckpoint cp;
        cp.calibration_done = j.at("calibration_done").get<bool>();
        cp.calibration_threshold_db = j.at("calibration_threshold_db").get<double>();
        cp.rounds_completed = j.at("rounds_completed").get<int>();
        cp.repeats_completed = j.at("repeats_completed").get<int>();
        cp.evals_logged = j.at("evals_logged").get<std::uint64_t>();
        cp.llm_calls_made = j.at("llm_calls_made").get<std::uint64_t>();
        for (const auto& h : j.at("history")) {
            RoundCheckpoint rc;
            rc.outcome.round = h.at("round").get<int>();
            rc.outcome.region = region_from_json(h.at("region"));
            rc.outcome.verdict.positive = h.at("positive").get<bool>();
            rc.outcome.verdict.good_count = h.at("good_count").get<int>();
            rc.outcome.verdict.best_fom_this_round = h.at("best_fom_this_round").get<double>();
            rc.outcome.verdict.best_fom_before = h.at("best_fom_before").get<double>();
            rc.parse_fallback = h.at("parse_fallback").get<bool>();
            cp.history.push_back(std::move(rc));
        }
        for (const auto& t : j.at("timing")) {
            cp.timing.push_back({t.at("phase").get<std::string>(), t.at("wall_s").get<double>()});
        }
        out = std::move(cp);
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint " + path + ": " + e.what());
    }
    return true;
}

namespace {

constexpr const char* kSectionNames[] = {
    "system",           "reflection request", "reflection response", "request",
    "response",         "reminder request",   "reminder response",   "region",
};

std::string marker(const std::string& name) { return "=== " + name + " ==="; }

void append_section(std::string& out, const char* name, const std::string& content) {
    if (content.empty()) return;
    out += marker(name) + "\n" + content + "\n";
}

} // namespace

void write_transcript(const std::string& path, const TranscriptFile& t) {
    std::string out = "round: " + std::to_string(t.round) + "\n";
    out += "feedback_from_previous: " + t.feedback_class + "\n";
    out += std::string("parse_fallback: ") + (t.parse_fallback ? "1" : "0") + "\n";
    append_section(out, "system", t.system_prompt);
    append_section(out, "reflection request", t.reflection_prompt);
    append_section(out, "reflection response", t.reflection_response);
    append_section(out, "request", t.request);
    append_section(out, "response", t.response);
    append_section(out, "reminder request", t.reminder_prompt);
    append_section(out, "reminder response", t.reminder_response);
    append_section(out, "region", t.region_lines);
    write_text_file(path, out);
}

TranscriptFile parse_transcript(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find('\n', start);
        if (pos == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    // The writer terminates the file with a newline; the split artifact after
    // it is not content.
    if (!lines.empty() && lines.back().empty()) lines.pop_back();

    TranscriptFile t;
    std::string* current = nullptr;
    std::vector<std::string> section_bodies(std::size(kSectionNames));
    std::vector<bool> seen(std::size(kSectionNames), false);
    for (const auto& line : lines) {
        bool is_marker = false;
        for (std::size_t s = 0; s < std::size(kSectionNames); ++s) {
            if (line == marker(kSectionNames[s])) {
                current = &section_bodies[s];
                seen[s] = true;
                is_marker = true;
                break;
            }
        }
        if (is_marker) continue;
        if (current) {
            *current += line;
            *current += '\n';
        } else if (line.rfind("round: ", 0) == 0) {
            t.round = static_cast<int>(parse_double(std::string_view(line).substr(7), "round"));
        } else if (line.rfind("feedback_from_previous: ", 0) == 0) {
            t.feedback_class = line.substr(24);
        } else if (line.rfind("parse_fallback: ", 0) == 0) {
            t.parse_fallback = line.substr(16) == "1";
        } else if (!line.empty()) {
            throw ConfigError("transcript: unexpected header line: '" + line + "'");
        }
    }
    // The writer adds one newline after each section body; peel it back off.
    for (std::size_t s = 0; s < std::size(kSectionNames); ++s) {
        auto& body = section_bodies[s];
        if (seen[s] && !body.empty() && body.back() == '\n') body.pop_back();
    }
    t.system_prompt = std::move(section_bodies[0]);
    t.reflection_prompt = std::move(section_bodies[1]);
    t.reflection_response = std::move(section_bodies[2]);
    t.request = std::move(section_bodies[3]);
    t.response = std::move(section_bodies[4]);
    t.reminder_prompt = std::move(section_bodies[5]);
    t.reminder_response = std::move(section_bodies[6]);
    t.region_lines = std::move(section_bodies[7]);
    return t;
}

} // namespace ledro
