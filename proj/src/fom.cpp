#include "ledro/fom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ledro/errors.hpp"

namespace ledro {

void SpecSet::validate() const {
    for (SpecId id : kAllSpecs) {
        if (!std::isfinite(spec_value(*this, id))) {
            throw InvalidSpecError(std::string("non-finite spec: ") + std::string(spec_name(id)));
        }
    }
    if (supply_current_a < 0.0) throw InvalidSpecError("supply current must be >= 0");
    if (phase_margin_deg < -180.0 || phase_margin_deg > 360.0) {
        throw InvalidSpecError("phase margin outside [-180, 360] deg");
    }
}

std::string_view spec_name(SpecId id) {
    switch (id) {
    case SpecId::Gain: return "gain";
    case SpecId::Ugbw: return "ugbw";
    case SpecId::PhaseMargin: return "phase_margin";
    case SpecId::SupplyCurrent: return "supply_current";
    }
    return "?";
}

const SpecBound& SpecBounds::at(SpecId id) const {
    switch (id) {
    case SpecId::Gain: return gain;
    case SpecId::Ugbw: return ugbw;
    case SpecId::PhaseMargin: return phase_margin;
    case SpecId::SupplyCurrent: return supply_current;
    }
    return gain;
}

void SpecBounds::validate() const {
    for (SpecId id : kAllSpecs) {
        if (!(at(id).value > 0.0)) {
            throw ConfigError(std::string("spec bound must be > 0: ") + std::string(spec_name(id)));
        }
    }
}

SpecBounds SpecBounds::low_complexity() {
    SpecBounds b;
    b.gain = {50.0, Direction::Maximize};
    b.ugbw = {5.0e6, Direction::Maximize};
    b.phase_margin = {70.0, Direction::Maximize};
    b.supply_current = {5.0e-6, Direction::Minimize};
    return b;
}

SpecBounds SpecBounds::high_complexity() {
    SpecBounds b;
    b.gain = {70.0, Direction::Maximize};
    b.ugbw = {20.0e6, Direction::Maximize};
    b.phase_margin = {70.0, Direction::Maximize};
    b.supply_current = {10.0e-6, Direction::Minimize};
    return b;
}

double FomWeights::at(SpecId id) const {
    switch (id) {
    case SpecId::Gain: return gain;
    case SpecId::Ugbw: return ugbw;
    case SpecId::PhaseMargin: return phase_margin;
    case SpecId::SupplyCurrent: return supply_current;
    }
    return 0.0;
}

void FomWeights::validate(const SpecBounds& bounds) const {
    for (SpecId id : kAllSpecs) {
        const double w = at(id);
        const Direction dir = bounds.at(id).direction;
        if (dir == Direction::Maximize && !(w > 0.0)) {
            throw ConfigError(std::string("maximize-direction weight must be > 0: ") +
                              std::string(spec_name(id)));
        }
        if (dir == Direction::Minimize && !(w < 0.0)) {
            throw ConfigError(std::string("minimize-direction weight must be < 0: ") +
                              std::string(spec_name(id)));
        }
    }
}

double normalize(double s, double s_bound, Direction direction) {
    if (!std::isfinite(s)) throw InvalidSpecError("non-finite spec value");
    if (!(s_bound > 0.0)) throw ConfigError("spec bound must be > 0");
    const double denom = s + s_bound;
    if (denom == 0.0) throw DegenerateNormalizerError("s + s_bound = 0");
    const double phi = (s - s_bound) / denom;
    return direction == Direction::Maximize ? std::min(0.0, phi) : std::max(0.0, phi);
}

double spec_value(const SpecSet& specs, SpecId id) {
    switch (id) {
    case SpecId::Gain: return specs.gain_db;
    case SpecId::Ugbw: return specs.ugbw_hz;
    case SpecId::PhaseMargin: return specs.phase_margin_deg;
    case SpecId::SupplyCurrent: return specs.supply_current_a;
    }
    return 0.0;
}

FomScore fom(const SpecSet& specs, const SpecBounds& bounds, const FomWeights& weights) {
    double value = 0.0;
    for (SpecId id : kAllSpecs) {
        const SpecBound& bound = bounds.at(id);
        double s = spec_value(specs, id);
        if (!std::isfinite(s)) {
            throw InvalidSpecError(std::string(spec_name(id)) + ": non-finite spec value");
        }
        // Floor at zero before normalizing. (s - b)/(s + b) changes sign
        // below s = -b, which would hand a deeply failed spec a free pass;
        // treating any non-positive measurement as a total miss keeps every
        // capped term in [-1, 0] and the score zero exactly when all specs
        // are met.
        s = std::max(s, 0.0);
        double phi = 0.0;
        try {
            phi = normalize(s, bound.value, bound.direction);
        } catch (const InvalidSpecError& e) {
            throw InvalidSpecError(std::string(spec_name(id)) + ": " + e.what());
        } catch (const DegenerateNormalizerError& e) {
            throw DegenerateNormalizerError(std::string(spec_name(id)) + ": " + e.what());
        }
        value += weights.at(id) * phi;
    }
    return FomScore{value};
}

bool is_good_point(const SpecSet& specs, double gain_threshold_db) {
    return specs.gain_db > gain_threshold_db;
}

} // namespace ledro
