#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ledro/design_space.hpp"
#include "ledro/fom.hpp"

namespace ledro {

enum class DeviceRegion { Cutoff, Subthreshold, Saturation, Linear };

std::string_view device_region_name(DeviceRegion region);
DeviceRegion device_region_from_name(std::string_view name);

/// Bias-point readout for one transistor.
struct TransistorTelemetry {
    std::string device;
    DeviceRegion region = DeviceRegion::Cutoff;
    double v_gs = 0.0;
    double v_ds = 0.0;
    double g_m = 0.0;
    double i_ds = 0.0;
};

/// Which part of a run produced an evaluation.
struct Phase {
    static constexpr const char* kCalibration = "calibration";
    static constexpr const char* kBaseline = "baseline";
    static std::string ledro_round(int round); // "ledro-round-3"
};

/// One evaluated design: the point, what it measured, and where it came from.
struct EvaluationRecord {
    DesignPoint point;
    SpecSet specs;
    std::vector<TransistorTelemetry> telemetry;
    FomScore fom;
    bool failed = false;
    std::string phase;
    std::uint64_t step = 0;     // assigned by the run log, unique and monotone
    double wall_time_s = 0.0;   // excluded from determinism comparisons
};

/// Objective configuration shared by every evaluation of a run.
struct ObjectiveConfig {
    SpecBounds bounds;
    FomWeights weights;
    double good_gain_threshold_db = 0.0;
    double failure_penalty_fom = -4.0; // below any achievable valid score

    void validate() const {
        bounds.validate();
        weights.validate(bounds);
    }
};

/// Maps design points to measured specs plus per-device telemetry.
class Evaluator {
public:
    virtual ~Evaluator() = default;

    /// Deterministic for the surrogate backend. Failed simulations come back
    /// as failed records carrying the penalty FoM instead of throwing.
    virtual EvaluationRecord evaluate(const DesignPoint& point) = 0;

    virtual const ObjectiveConfig& objective() const = 0;
    virtual const ParameterList& parameters() const = 0;
};

/// Evaluates a batch with up to `parallelism` concurrent workers. Records are
/// returned in input order and per-point failures never abort the batch.
std::vector<EvaluationRecord> evaluate_batch(Evaluator& evaluator,
                                             const std::vector<DesignPoint>& points,
                                             unsigned parallelism);

} // namespace ledro
