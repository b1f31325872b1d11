#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ledro/calibration.hpp"
#include "ledro/design_space.hpp"
#include "ledro/evaluator.hpp"

namespace ledro {

/// Length discipline for prompt assembly. When a prompt would exceed the
/// ceiling, design blocks are dropped lowest-FoM-first; the instructions and
/// at least one block always survive.
struct PromptConfig {
    std::size_t max_prompt_chars = 24000;

    void validate() const;
};

/// Outcome of one optimizer round, as reported back to the LLM.
struct FeedbackVerdict {
    bool positive = false;
    int good_count = 0;
    double best_fom_this_round = 0.0;
    double best_fom_before = 0.0;

    std::string_view class_name() const { return positive ? "positive" : "negative"; }
};

/// Positive iff the round produced at least six good designs and strictly
/// improved the best FoM seen before it. Record order is irrelevant; failed
/// records never count as good but their (penalty) FoM still participates in
/// the round maximum.
FeedbackVerdict classify_feedback(const std::vector<EvaluationRecord>& records,
                                  double prior_best_fom, double gain_threshold_db = 0.0);

/// One completed LLM round, persisted verbatim for audit and replay.
struct RoundTranscript {
    int round = 0;                 // 1-based
    std::string system_prompt;
    std::string user_prompt;
    std::string raw_response;
    SearchRegion region;           // region the optimizer actually searched
    std::string feedback_class;    // verdict of the previous round: "none" first
    std::string reflection;        // summary injected into the next follow-up
};

/// Role and task framing: netlist, topology, spec targets with units, and the
/// scoring rule. Byte-stable for fixed inputs.
std::string build_system_prompt(const NetlistTemplate& netlist, const std::string& topology,
                                const ObjectiveConfig& objective);

/// Seeds the first round with the calibration elite: one block per selected
/// design (descending FoM) with parameters, measured specs, FoM, and
/// per-device operating regions, followed by range-reduction instructions and
/// the response format contract.
std::string build_first_round_prompt(const CalibrationSet& calibration,
                                     const ParameterList& defs, const SearchRegion& full,
                                     const PromptConfig& cfg = {});

/// Reports the last round back. A positive verdict acknowledges the region
/// and lists the new good designs; a negative one states the poor outcome and
/// asks for a clearly different region with no design blocks. Any reflection
/// text is appended. The problem description is never repeated here.
std::string build_followup_prompt(const FeedbackVerdict& verdict,
                                  const std::vector<EvaluationRecord>& new_good,
                                  const std::string& reflection, const ParameterList& defs,
                                  const PromptConfig& cfg = {});

/// Neutral next-round request used when outcome feedback is disabled: asks
/// for another range proposal without reporting how the last round went.
std::string build_continuation_prompt(const ParameterList& defs, const SearchRegion& full,
                                      const PromptConfig& cfg = {});

/// Region bounds plus verdict of one finished round, input to the reflection
/// step.
struct RoundOutcome {
    int round = 0;
    SearchRegion region;
    FeedbackVerdict verdict;
};

/// Asks the LLM to look back: every prior round's region and outcome in
/// chronological order, then a request for a strategy summary.
std::string build_reflection_prompt(const std::vector<RoundOutcome>& history,
                                    const ParameterList& defs);

/// Sent once after an unparseable response: restates the format contract.
std::string build_format_reminder(const ParameterList& defs, const SearchRegion& full);

/// One `name: <low> to <high>` line per parameter, fin counts as bare
/// integers, everything else in shortest round-trip notation. This is the
/// exact format the prompts request, so parse_region inverts it.
std::string render_region_lines(const SearchRegion& region, const ParameterList& defs);

/// Extracts per-parameter ranges from an LLM response. Accepts `name: low to
/// high`, `name: [low, high]`, and en-dash ranges, with optional length,
/// voltage, or current unit suffixes, anywhere inside surrounding prose.
/// Unknown names are ignored; parameters without a parsed range keep their
/// interval from `inherit` (callers pass the previous round's region, or the
/// full space on round one). The assembled region is clamped to the full
/// space. Zero parseable ranges raise RegionParseFailure.
SearchRegion parse_region(const std::string& response, const ParameterList& defs,
                          const SearchRegion& full, const SearchRegion& inherit);

SearchRegion parse_region(const std::string& response, const ParameterList& defs,
                          const SearchRegion& full);

} // namespace ledro
