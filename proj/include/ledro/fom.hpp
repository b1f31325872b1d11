#pragma once

#include <array>
#include <string_view>

namespace ledro {

/// The four measured specifications of an Op-Amp design.
struct SpecSet {
    double gain_db = 0.0;
    double ugbw_hz = 0.0;
    double phase_margin_deg = 0.0;
    double supply_current_a = 0.0;

    /// Throws InvalidSpecError unless all four values are finite,
    /// supply_current_a >= 0, and phase_margin_deg lies in [-180, 360].
    void validate() const;
};

enum class SpecId { Gain, Ugbw, PhaseMargin, SupplyCurrent };

constexpr std::array<SpecId, 4> kAllSpecs = {SpecId::Gain, SpecId::Ugbw, SpecId::PhaseMargin,
                                             SpecId::SupplyCurrent};

std::string_view spec_name(SpecId id);

enum class Direction { Maximize, Minimize };

/// One boundary value, in the same unit as its spec.
struct SpecBound {
    double value = 0.0;
    Direction direction = Direction::Maximize;
};

/// Boundary values for all four specs. Every bound must be strictly
/// positive: the normalizer divides by s + s_bound.
struct SpecBounds {
    SpecBound gain{50.0, Direction::Maximize};
    SpecBound ugbw{5.0e6, Direction::Maximize};
    SpecBound phase_margin{70.0, Direction::Maximize};
    SpecBound supply_current{5.0e-6, Direction::Minimize};

    const SpecBound& at(SpecId id) const;
    void validate() const;

    /// The two benchmark presets: gain / supply current / UGBW / phase margin
    /// of 50 dB / 5 uA / 5 MHz / 70 deg (low) and 70 dB / 10 uA / 20 MHz /
    /// 70 deg (high).
    static SpecBounds low_complexity();
    static SpecBounds high_complexity();
};

/// Per-spec weights. Maximize-direction weights must be positive and
/// minimize-direction weights negative so every capped contribution is <= 0.
struct FomWeights {
    double gain = 3.0;
    double ugbw = 1.0;
    double phase_margin = 1.0;
    double supply_current = -1.0;

    double at(SpecId id) const;
    void validate(const SpecBounds& bounds) const;
};

/// Scalar objective value; always <= 0, with 0 meaning every spec met its
/// bound.
struct FomScore {
    double value = 0.0;
};

/// Capped normalization of one spec against its boundary value.
///
/// Raw value is (s - s_bound) / (s + s_bound). Maximize-direction specs are
/// capped from above at 0; minimize-direction specs are capped from below at
/// 0 and rely on their negative weight, so either way the weighted
/// contribution never exceeds 0.
double normalize(double s, double s_bound, Direction direction);

double spec_value(const SpecSet& specs, SpecId id);

/// Weighted sum of the capped normalized specs. Spec values are floored at
/// zero first: the raw ratio changes sign below s = -s_bound, so a
/// non-positive measurement counts as a total miss (phi = -1) instead of
/// leaking through the cap.
FomScore fom(const SpecSet& specs, const SpecBounds& bounds, const FomWeights& weights);

/// A design is "good" when its gain strictly exceeds the threshold.
bool is_good_point(const SpecSet& specs, double gain_threshold_db);

} // namespace ledro
