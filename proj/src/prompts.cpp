#include "ledro/prompts.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <regex>

#include "ledro/errors.hpp"

namespace ledro {

namespace {

std::string shortest(double v) {
    std::array<char, 64> buf;
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), end);
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

std::string general(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

/// Range endpoints as the prompts print them: fin counts as bare integers,
/// everything else in shortest notation so a rendered region parses back to
/// the same doubles.
std::string range_value(const ParameterDef& def, double v) {
    if (def.kind == ParamKind::FinCount) return std::to_string(std::llround(v));
    return shortest(v);
}

struct SpecDisplay {
    SpecId id;
    const char* label;
    const char* unit;
};

constexpr std::array<SpecDisplay, 4> kSpecDisplay = {{
    {SpecId::Gain, "gain", "dB"},
    {SpecId::Ugbw, "unity-gain bandwidth", "Hz"},
    {SpecId::PhaseMargin, "phase margin", "degrees"},
    {SpecId::SupplyCurrent, "supply current", "A"},
}};

std::string measured_line(const SpecSet& specs) {
    std::string out = "measured: ";
    bool first = true;
    for (const auto& d : kSpecDisplay) {
        if (!first) out += ", ";
        first = false;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%s %.4g %s", d.label, spec_value(specs, d.id), d.unit);
        out += buf;
    }
    return out;
}

std::string design_block(int rank, const EvaluationRecord& rec, const ParameterList& defs) {
    std::string out = "Design " + std::to_string(rank) + " (FoM " + fixed4(rec.fom.value) + "):\n";
    out += "  parameters: ";
    for (std::size_t i = 0; i < defs.size(); ++i) {
        if (i > 0) out += ", ";
        out += defs[i].name + "=" + format_param_value(defs[i], rec.point.values[i]);
    }
    out += "\n  " + measured_line(rec.specs) + "\n";
    if (!rec.telemetry.empty()) {
        out += "  device regions: ";
        for (std::size_t i = 0; i < rec.telemetry.size(); ++i) {
            if (i > 0) out += ", ";
            out += rec.telemetry[i].device + "=" +
                   std::string(device_region_name(rec.telemetry[i].region));
        }
        out += "\n";
    }
    return out;
}

std::string parameter_name_list(const ParameterList& defs) {
    std::string out;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        if (i > 0) out += ", ";
        out += defs[i].name;
    }
    return out;
}

std::string format_contract(const ParameterList& defs) {
    return "Respond with one line per parameter and no other text, exactly in this form:\n"
           "<name>: <low> to <high>\n"
           "Numbers may use scientific notation. Cover every parameter: " +
           parameter_name_list(defs) + ".\n";
}

/// Joins intro + design blocks + tail, dropping blocks from the back (they
/// arrive best-FoM-first) until the ceiling is met. At least one block stays.
std::string assemble_with_blocks(const std::string& intro, const std::vector<std::string>& blocks,
                                 const std::string& tail, const PromptConfig& cfg) {
    std::size_t keep = blocks.size();
    auto total = [&](std::size_t n) {
        std::size_t len = intro.size() + tail.size();
        for (std::size_t i = 0; i < n; ++i) len += blocks[i].size() + 1;
        return len;
    };
    while (keep > 1 && total(keep) > cfg.max_prompt_chars) --keep;
    std::string out = intro;
    for (std::size_t i = 0; i < keep; ++i) {
        out += blocks[i];
        out += "\n";
    }
    out += tail;
    return out;
}

// --- response grammar ---

constexpr const char* kNumber = R"(([-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?))";
// Two-letter tokens first so alternation never stops at a one-letter prefix.
constexpr const char* kUnit =
    "(nm|um|\xC2\xB5m|mm|mV|nA|uA|\xC2\xB5"
    "A|mA|V|A)";

double unit_scale(std::string token) {
    for (auto& c : token)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (token == "nm" || token == "na") return 1e-9;
    if (token == "um" || token == "ua" || token == "\xC2\xB5m" || token == "\xC2\xB5"
                                                                  "a")
        return 1e-6;
    if (token == "mm" || token == "mv" || token == "ma") return 1e-3;
    if (token == "v" || token == "a") return 1.0;
    throw RegionParseFailure("unknown unit token: " + token);
}

std::string escape_for_regex(const std::string& name) {
    static const std::string specials = R"(\^$.|?*+()[]{})";
    std::string out;
    for (char c : name) {
        if (specials.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

double parse_number(std::string text) {
    // from_chars takes no leading '+' and may balk at a bare trailing dot.
    if (!text.empty() && text.front() == '+') text.erase(text.begin());
    if (!text.empty() && text.back() == '.') text.pop_back();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw RegionParseFailure("unparseable number: " + text);
    return v;
}

struct ParsedRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// Finds the first range for `name` in the response, or nullopt. Bracket
/// pairs, `to`, and en/em-dash separators are all accepted; a single unit
/// token scales both endpoints, two tokens scale each endpoint on its own.
std::optional<ParsedRange> find_range(const std::string& response, const std::string& name) {
    const std::string num_unit = std::string(kNumber) + R"(\s*(?:)" + kUnit + R"(\b)?)";
    // [\*_`]{0,3} lets a markdown-emphasized name ("**name**:") still match.
    const std::string pattern = "\\b" + escape_for_regex(name) + R"([\*_`]{0,3}\s*[:=]\s*(?:\[\s*)" +
                                num_unit + R"(\s*,\s*)" + num_unit + R"(\s*\]|)" + num_unit +
                                "\\s*(?:to|\xE2\x80\x93|\xE2\x80\x94)\\s*" + num_unit + ")";
    const std::regex re(pattern, std::regex::ECMAScript | std::regex::icase);
    std::smatch m;
    if (!std::regex_search(response, m, re)) return std::nullopt;

    // Groups: bracket form 1-4, dash form 5-8 (number, unit, number, unit).
    const std::size_t base = m[1].matched ? 1 : 5;
    ParsedRange range;
    range.lo = parse_number(m[base].str());
    range.hi = parse_number(m[base + 2].str());
    const bool lo_has_unit = m[base + 1].matched;
    const bool hi_has_unit = m[base + 3].matched;
    if (lo_has_unit && hi_has_unit) {
        range.lo *= unit_scale(m[base + 1].str());
        range.hi *= unit_scale(m[base + 3].str());
    } else if (lo_has_unit || hi_has_unit) {
        const double scale = unit_scale(m[lo_has_unit ? base + 1 : base + 3].str());
        range.lo *= scale;
        range.hi *= scale;
    }
    return range;
}

} // namespace

void PromptConfig::validate() const {
    if (max_prompt_chars < 512) throw ConfigError("prompt length ceiling must be at least 512");
}

FeedbackVerdict classify_feedback(const std::vector<EvaluationRecord>& records,
                                  double prior_best_fom, double gain_threshold_db) {
    FeedbackVerdict v;
    v.best_fom_before = prior_best_fom;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& rec : records) {
        if (!rec.failed && is_good_point(rec.specs, gain_threshold_db)) ++v.good_count;
        best = std::max(best, rec.fom.value);
    }
    v.best_fom_this_round = best;
    v.positive = v.good_count >= 6 && best > prior_best_fom;
    return v;
}

std::string build_system_prompt(const NetlistTemplate& netlist, const std::string& topology,
                                const ObjectiveConfig& objective) {
    if (topology.empty()) throw ConfigError("topology name must not be empty");
    std::string out = "You are an expert analog IC designer sizing a " + topology +
                      " amplifier.\n\n"
                      "Netlist (sizing placeholders in braces):\n" +
                      netlist.body;
    if (out.empty() || out.back() != '\n') out += '\n';
    out += "\nPerformance targets:\n";
    for (const auto& d : kSpecDisplay) {
        const SpecBound& bound = objective.bounds.at(d.id);
        const char* verb = bound.direction == Direction::Maximize ? "at least" : "at most";
        out += std::string("- ") + d.label + ": " + verb + " " + general(bound.value) + " " +
               d.unit + " (weight " + general(objective.weights.at(d.id)) + ")\n";
    }
    out +=
        "\nEach measured spec s is scored against its target b as (s - b) / (s + b).\n"
        "Specs that should be large are capped above at zero; specs that should be\n"
        "small are capped below at zero and carry a negative weight. The figure of\n"
        "merit (FoM) is the weighted sum of these scores, so it never exceeds 0 and\n"
        "equals 0 exactly when every target is met. Higher FoM is better.\n"
        "\n"
        "Your job is to propose reduced per-parameter search ranges so that an\n"
        "optimizer can concentrate its evaluation budget where the best designs\n"
        "are likely to be.\n";
    return out;
}

std::string build_first_round_prompt(const CalibrationSet& calibration, const ParameterList& defs,
                                     const SearchRegion& full, const PromptConfig& cfg) {
    cfg.validate();
    if (calibration.selected.empty())
        throw ConfigError("first-round prompt needs a non-empty calibration selection");
    const std::string intro =
        "An initial space-filling search over the full ranges produced these leading\n"
        "designs, listed from best figure of merit down.\n\n";
    std::vector<std::string> blocks;
    blocks.reserve(calibration.selected.size());
    for (std::size_t i = 0; i < calibration.selected.size(); ++i)
        blocks.push_back(design_block(static_cast<int>(i) + 1, calibration.selected_record(i), defs));
    std::string tail = "Full parameter ranges:\n" + render_region_lines(full, defs) +
                       "\nPropose a narrower range for every parameter, concentrated where you\n"
                       "expect designs that beat the ones above. Ranges must stay inside the\n"
                       "full ranges.\n\n" +
                       format_contract(defs);
    return assemble_with_blocks(intro, blocks, tail, cfg);
}

std::string build_followup_prompt(const FeedbackVerdict& verdict,
                                  const std::vector<EvaluationRecord>& new_good,
                                  const std::string& reflection, const ParameterList& defs,
                                  const PromptConfig& cfg) {
    cfg.validate();
    std::string reflection_section;
    if (!reflection.empty())
        reflection_section = "Your reflection on the strategy so far:\n" + reflection + "\n\n";

    if (!verdict.positive) {
        std::string out = "The last range fell short: " + std::to_string(verdict.good_count) +
                          " designs cleared the gain threshold (at least 6 are needed) and the\n"
                          "best figure of merit this round was " +
                          fixed4(verdict.best_fom_this_round) + " against " +
                          fixed4(verdict.best_fom_before) + " before.\n\n" + reflection_section +
                          "Propose a new and clearly different search region, away from the last\n"
                          "one.\n\n" +
                          format_contract(defs);
        return out;
    }

    std::string intro = "The last range worked well: " + std::to_string(verdict.good_count) +
                        " designs cleared the gain threshold and the best figure of merit\n"
                        "improved from " +
                        fixed4(verdict.best_fom_before) + " to " +
                        fixed4(verdict.best_fom_this_round) +
                        ". The new good designs, best first:\n\n";
    std::vector<EvaluationRecord> ordered = new_good;
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const EvaluationRecord& a, const EvaluationRecord& b) {
                         return a.fom.value > b.fom.value;
                     });
    std::vector<std::string> blocks;
    blocks.reserve(ordered.size());
    for (std::size_t i = 0; i < ordered.size(); ++i)
        blocks.push_back(design_block(static_cast<int>(i) + 1, ordered[i], defs));
    std::string tail = reflection_section +
                       "Building on this, propose the next reduced search range. Tighten around\n"
                       "the best designs, or shift the range if the trend points elsewhere.\n\n" +
                       format_contract(defs);
    return assemble_with_blocks(intro, blocks, tail, cfg);
}

std::string build_continuation_prompt(const ParameterList& defs, const SearchRegion& full,
                                      const PromptConfig& cfg) {
    cfg.validate();
    return "The last optimization round is complete.\n\n"
           "Propose the next search range: narrow further where you expect the\n"
           "strongest designs, or move to a different part of the space. Ranges\n"
           "must stay inside the full ranges:\n" +
           render_region_lines(full, defs) + "\n" + format_contract(defs);
}

std::string build_reflection_prompt(const std::vector<RoundOutcome>& history,
                                    const ParameterList& defs) {
    if (history.empty()) throw ConfigError("reflection needs at least one completed round");
    std::string out = "Here are the search ranges tried so far and how each round went.\n\n";
    for (const auto& h : history) {
        out += "Round " + std::to_string(h.round) + " (" + std::string(h.verdict.class_name()) +
               ": " + std::to_string(h.verdict.good_count) + " good designs, best FoM " +
               fixed4(h.verdict.best_fom_this_round) + "):\n";
        out += render_region_lines(h.region, defs);
        out += "\n";
    }
    out +=
        "Summarize which ranges helped, which did not, and the strategy you will\n"
        "follow next. Reply with a short paragraph and no ranges.\n";
    return out;
}

std::string build_format_reminder(const ParameterList& defs, const SearchRegion& full) {
    return "Your previous reply contained no parseable ranges. Respond again with one\n"
           "line per parameter and no other text, exactly in this form:\n"
           "<name>: <low> to <high>\n"
           "Numbers may use scientific notation. Full ranges for reference:\n" +
           render_region_lines(full, defs);
}

std::string render_region_lines(const SearchRegion& region, const ParameterList& defs) {
    if (region.size() != defs.size())
        throw RegionSchemaError("region arity does not match the parameter list");
    std::string out;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        out += defs[i].name + ": " + range_value(defs[i], region[i].lo) + " to " +
               range_value(defs[i], region[i].hi) + "\n";
    }
    return out;
}

SearchRegion parse_region(const std::string& response, const ParameterList& defs,
                          const SearchRegion& full, const SearchRegion& inherit) {
    if (inherit.size() != defs.size())
        throw RegionSchemaError("inherit region arity does not match the parameter list");
    SearchRegion assembled = inherit;
    std::size_t parsed = 0;
    for (std::size_t i = 0; i < defs.size(); ++i) {
        auto range = find_range(response, defs[i].name);
        if (!range) continue;
        assembled[i] = Interval{range->lo, range->hi};
        ++parsed;
    }
    if (parsed == 0)
        throw RegionParseFailure("no parameter ranges found in the response");
    return clamp_region(assembled, full, defs);
}

SearchRegion parse_region(const std::string& response, const ParameterList& defs,
                          const SearchRegion& full) {
    return parse_region(response, defs, full, full);
}

} // namespace ledro
