#include "ledro/spice.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <sys/wait.h>
#include <unistd.h>

#include "ledro/errors.hpp"
#include "ledro/fom.hpp"

namespace fs = std::filesystem;

namespace ledro {
namespace {

const char* const kSpecMeasures[] = {"gain_db", "ugbw_hz", "phase_margin_deg",
                                     "supply_current_a"};

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what,
                             const std::string& raw) {
    throw MeasureParseError("simulator output line " + std::to_string(line_no) +
                            ": " + what + "\n--- raw output ---\n" + raw);
}

double parse_number(const std::string& token, std::size_t line_no,
                    const std::string& raw) {
    try {
        std::size_t used = 0;
        const double v = std::stod(token, &used);
        if (used != token.size()) parse_fail(line_no, "trailing junk in number '" + token + "'", raw);
        return v;
    } catch (const MeasureParseError&) {
        throw;
    } catch (const std::exception&) {
        parse_fail(line_no, "expected a number, got '" + token + "'", raw);
    }
}

// key=value field of a DEVICE line.
std::string field(const std::string& token, const char* key,
                  std::size_t line_no, const std::string& raw) {
    const std::string prefix = std::string(key) + "=";
    if (token.rfind(prefix, 0) != 0)
        parse_fail(line_no, "expected '" + prefix + "...', got '" + token + "'", raw);
    return token.substr(prefix.size());
}

std::string substitute(std::string text, const std::string& key,
                       const std::string& value) {
    const std::string tag = "{" + key + "}";
    for (std::size_t pos = text.find(tag); pos != std::string::npos;
         pos = text.find(tag, pos + value.size())) {
        text.replace(pos, tag.size(), value);
    }
    return text;
}

// Runs a command under /bin/sh with a kill-on-timeout deadline. Returns the
// exit status, or -1 for timeout/abnormal termination.
int run_command(const std::string& command, double timeout_s) {
    const pid_t pid = fork();
    if (pid < 0) throw ConfigError("fork failed: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        setpgid(0, 0); // own process group so the whole pipeline can be killed
        execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
        _exit(127);
    }
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(timeout_s);
    for (;;) {
        int status = 0;
        const pid_t r = waitpid(pid, &status, WNOHANG);
        if (r == pid) {
            if (WIFEXITED(status)) return WEXITSTATUS(status);
            return -1;
        }
        if (r < 0) return -1;
        if (std::chrono::steady_clock::now() >= deadline) {
            kill(-pid, SIGKILL);
            waitpid(pid, &status, 0);
            return -1;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
}

} // namespace

void SpiceConfig::validate() const {
    if (command.empty()) throw ConfigError("simulator command is empty");
    if (command.find("{deck}") == std::string::npos)
        throw ConfigError("simulator command lacks the {deck} placeholder");
    if (command.find("{output}") == std::string::npos)
        throw ConfigError("simulator command lacks the {output} placeholder");
    if (work_root.empty()) throw ConfigError("simulator work_root is empty");
    if (!(timeout_s > 0.0)) throw ConfigError("simulator timeout must be positive");
}

SpiceMeasures parse_spice_measures(const std::string& raw) {
    std::map<std::string, double> measures;
    SpiceMeasures out;

    std::istringstream stream(raw);
    std::string line;
    std::size_t line_no = 0;
    bool saw_content = false;
    while (std::getline(stream, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string tok;
        if (!(fields >> tok)) continue; // blank
        if (tok[0] == '*' || tok[0] == '#') continue;
        saw_content = true;
        if (tok == "MEASURE") {
            std::string name, eq, value;
            if (!(fields >> name >> eq >> value) || eq != "=")
                parse_fail(line_no, "expected 'MEASURE <name> = <value>'", raw);
            std::string extra;
            if (fields >> extra)
                parse_fail(line_no, "trailing junk '" + extra + "'", raw);
            if (!measures.emplace(name, parse_number(value, line_no, raw)).second)
                parse_fail(line_no, "duplicate measure '" + name + "'", raw);
        } else if (tok == "DEVICE") {
            std::string name, region, vgs, vds, gm, ids;
            if (!(fields >> name >> region >> vgs >> vds >> gm >> ids))
                parse_fail(line_no,
                           "expected 'DEVICE <name> region=<r> vgs=<v> vds=<v> "
                           "gm=<v> ids=<v>'",
                           raw);
            TransistorTelemetry t;
            t.device = name;
            const std::string region_name = field(region, "region", line_no, raw);
            try {
                t.region = device_region_from_name(region_name);
            } catch (const std::exception&) {
                parse_fail(line_no, "unknown region '" + region_name + "'", raw);
            }
            t.v_gs = parse_number(field(vgs, "vgs", line_no, raw), line_no, raw);
            t.v_ds = parse_number(field(vds, "vds", line_no, raw), line_no, raw);
            t.g_m = parse_number(field(gm, "gm", line_no, raw), line_no, raw);
            t.i_ds = parse_number(field(ids, "ids", line_no, raw), line_no, raw);
            out.telemetry.push_back(std::move(t));
        } else {
            parse_fail(line_no, "unrecognized line '" + line + "'", raw);
        }
    }
    if (!saw_content) parse_fail(0, "output is empty", raw);

    for (const char* name : kSpecMeasures) {
        if (!measures.count(name)) throw NamedMeasureMissingError(name);
    }
    out.specs.gain_db = measures.at("gain_db");
    out.specs.ugbw_hz = measures.at("ugbw_hz");
    out.specs.phase_margin_deg = measures.at("phase_margin_deg");
    out.specs.supply_current_a = measures.at("supply_current_a");
    return out;
}

SpiceEvaluator::SpiceEvaluator(Benchmark benchmark, ObjectiveConfig objective,
                               SpiceConfig config)
    : benchmark_(std::move(benchmark)), objective_(std::move(objective)),
      config_(std::move(config)) {
    objective_.validate();
    config_.validate();
    benchmark_.netlist.validate(benchmark_.parameters);
    fs::create_directories(config_.work_root);
}

std::string SpiceEvaluator::build_deck(const DesignPoint& point) const {
    std::string deck = "* " + benchmark_.id + "\n";
    deck += render_netlist(benchmark_.netlist, point, benchmark_.parameters);
    if (deck.back() != '\n') deck += '\n';
    deck += ".measure gain_db\n"
            ".measure ugbw_hz\n"
            ".measure phase_margin_deg\n"
            ".measure supply_current_a\n"
            ".probe devices\n"
            ".end\n";
    return deck;
}

EvaluationRecord SpiceEvaluator::evaluate(const DesignPoint& point) {
    point.validate(benchmark_.parameters);

    const std::uint64_t n = next_eval_.fetch_add(1);
    const fs::path dir = fs::path(config_.work_root) / ("eval_" + std::to_string(n));
    fs::create_directories(dir);
    const fs::path deck_path = dir / "deck.sp";
    const fs::path out_path = dir / "out.txt";
    {
        std::ofstream deck(deck_path);
        deck << build_deck(point);
        if (!deck) throw ConfigError("cannot write deck " + deck_path.string());
    }

    std::string cmd = substitute(config_.command, "deck", deck_path.string());
    cmd = substitute(cmd, "output", out_path.string());

    EvaluationRecord rec;
    rec.point = point;

    const int status = run_command(cmd, config_.timeout_s);
    if (status != 0 || !fs::exists(out_path)) {
        rec.specs = SpecSet{0.0, 0.0, 0.0, 0.0};
        rec.failed = true;
        rec.fom = FomScore{objective_.failure_penalty_fom};
        return rec;
    }

    std::ifstream out(out_path);
    std::stringstream buf;
    buf << out.rdbuf();
    const SpiceMeasures parsed = parse_spice_measures(buf.str());
    rec.specs = parsed.specs;
    rec.telemetry = parsed.telemetry;
    rec.specs.validate();
    rec.fom = fom(rec.specs, objective_.bounds, objective_.weights);
    return rec;
}

} // namespace ledro
