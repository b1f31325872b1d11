#pragma once

#include <memory>

#include "ledro/design_space.hpp"
#include "ledro/evaluator.hpp"

namespace ledro {

/// Technology constants for the built-in FinFET behavioral model. Drain
/// current follows a smoothed square law with per-fin strength scaling,
/// channel-length modulation growing as l_ref/L, and a soft
/// triode-to-saturation transition, so every small-signal quantity is a
/// smooth function of the design point.
struct SurrogateTech {
    double vdd = 0.8;
    double vcm = 0.45;          // input common mode
    double vth_n = 0.32;
    double vth_p = 0.32;
    double k_n = 150e-6;        // A/V^2 per fin at l_ref
    double k_p = 75e-6;
    double l_ref = 14e-9;
    double lambda0 = 0.25;      // 1/V at l_ref, scales as l_ref/L
    double n_vt = 0.0389;       // subthreshold slope voltage, n*kT/q
    double node_leak_s = 20e-9; // leakage conductance at high-impedance nodes
    double c_fin = 0.2e-15;     // parasitic capacitance per fin
};

/// Load and compensation elements seen by the amplifier under test.
struct SurrogateLoads {
    double c_load = 500e-15;
    double r_load = 0.0;  // 0 means no resistive load
    double c_comp = 300e-15; // Miller capacitor, two-stage only
};

/// Deterministic analytical evaluator for the built-in amplifier topologies.
/// Supported models: "two_stage_miller" (10 parameters) and "ota5t" (7).
class SurrogateEvaluator final : public Evaluator {
public:
    SurrogateEvaluator(Benchmark benchmark, ObjectiveConfig objective,
                       SurrogateTech tech = {}, SurrogateLoads loads = {});

    EvaluationRecord evaluate(const DesignPoint& point) override;

    const ObjectiveConfig& objective() const override { return objective_; }
    const ParameterList& parameters() const override {
        return benchmark_.parameters;
    }
    const Benchmark& benchmark() const { return benchmark_; }
    const SurrogateTech& tech() const { return tech_; }
    const SurrogateLoads& loads() const { return loads_; }

private:
    EvaluationRecord evaluate_two_stage(const DesignPoint& point) const;
    EvaluationRecord evaluate_ota5t(const DesignPoint& point) const;

    Benchmark benchmark_;
    ObjectiveConfig objective_;
    SurrogateTech tech_;
    SurrogateLoads loads_;
    bool two_stage_ = false;
};

/// Builds the surrogate with per-topology default loads: the two-stage gets
/// the Miller capacitor and a 1 Mohm resistive load, the single-stage OTA a
/// purely capacitive load.
std::unique_ptr<SurrogateEvaluator> make_surrogate_evaluator(
    const Benchmark& benchmark, const ObjectiveConfig& objective);

} // namespace ledro
