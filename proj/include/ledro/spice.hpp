#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "ledro/design_space.hpp"
#include "ledro/evaluator.hpp"

namespace ledro {

/// External-simulator hookup. The command template runs under `/bin/sh -c`
/// with `{deck}` and `{output}` substituted; the simulator choice lives
/// entirely in configuration.
struct SpiceConfig {
    std::string command;
    std::string work_root; // each evaluation gets a private subdirectory
    double timeout_s = 60.0;

    void validate() const;
};

/// Parsed simulator output: named scalar measures plus device telemetry.
struct SpiceMeasures {
    SpecSet specs;
    std::vector<TransistorTelemetry> telemetry;
};

/// Parses the adapter's output format. Lines are `MEASURE <name> = <value>`
/// or `DEVICE <name> region=<r> vgs=<v> vds=<v> gm=<v> ids=<v>`; blank lines
/// and lines starting with `*` or `#` are ignored. The four spec measures
/// (gain_db, ugbw_hz, phase_margin_deg, supply_current_a) must each appear
/// exactly once. Unknown or non-numeric content raises a parse error citing
/// the line number; an absent spec measure raises a named-measure error.
SpiceMeasures parse_spice_measures(const std::string& raw);

/// Evaluates points by rendering the benchmark netlist into a deck, running
/// the configured command, and parsing the output file. Process failures
/// (nonzero exit, timeout, missing output) yield a failed record with the
/// penalty FoM; malformed output raises a parse error.
class SpiceEvaluator final : public Evaluator {
public:
    SpiceEvaluator(Benchmark benchmark, ObjectiveConfig objective,
                   SpiceConfig config);

    EvaluationRecord evaluate(const DesignPoint& point) override;

    const ObjectiveConfig& objective() const override { return objective_; }
    const ParameterList& parameters() const override {
        return benchmark_.parameters;
    }

    /// Deck text for a point: the rendered netlist plus the measure
    /// directives the output parser expects. Exposed for golden-file tests.
    std::string build_deck(const DesignPoint& point) const;

private:
    Benchmark benchmark_;
    ObjectiveConfig objective_;
    SpiceConfig config_;
    std::atomic<std::uint64_t> next_eval_{0};
};

} // namespace ledro
