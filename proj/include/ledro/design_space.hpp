#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ledro {

enum class ParamKind {
    FinCount,   // integer device width quantum
    GateLength, // value from a finite ordered set
    Bias        // continuous voltage or current
};

std::string_view param_kind_name(ParamKind kind);
ParamKind param_kind_from_name(std::string_view name);

/// One sizing variable: a fin count, a gate length drawn from the node's
/// allowed set, or a continuous bias value.
struct ParameterDef {
    std::string name;
    ParamKind kind = ParamKind::Bias;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<double> allowed_values; // gate-length kind only, sorted

    void validate() const;
};

using ParameterList = std::vector<ParameterDef>;

/// Axis-aligned box over the parameter list. Both the full technology-allowed
/// space and every refined sub-space are instances.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

struct SearchRegion {
    std::vector<Interval> intervals;

    std::size_t size() const { return intervals.size(); }
    const Interval& operator[](std::size_t i) const { return intervals[i]; }
    Interval& operator[](std::size_t i) { return intervals[i]; }

    bool contains(const std::vector<double>& values, double tol = 1e-12) const;

    /// The full space spanned by the parameter bounds.
    static SearchRegion full(const ParameterList& defs);
};

/// One assignment of all circuit parameters, ordered like the parameter list.
struct DesignPoint {
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    /// Throws unless every value respects its ParameterDef (bounds, integer
    /// fin counts, allowed gate lengths).
    void validate(const ParameterList& defs) const;
};

/// Makes an LLM-proposed region usable: intersects per-parameter intervals
/// with the full space, rounds fin-count intervals outward to integers, and
/// replaces empty intersections with the nearest half of the full range so a
/// directional proposal outside the space still steers the search. Gate-length
/// intervals are widened minimally until they contain an allowed value.
SearchRegion clamp_region(const SearchRegion& proposed, const SearchRegion& full,
                          const ParameterList& defs);

/// Maps a point inside `region` onto the unit cube. Zero-width intervals map
/// to 0.5.
std::vector<double> to_unit(const DesignPoint& point, const SearchRegion& region);

/// Inverse of to_unit with snapping: fin counts round to the nearest integer
/// and gate lengths to the nearest allowed value (preferring values inside
/// the region).
DesignPoint from_unit(const std::vector<double>& unit, const SearchRegion& region,
                      const ParameterList& defs);

/// Circuit connectivity as text with one `{name}` placeholder per parameter.
struct NetlistTemplate {
    std::string topology;
    std::string body;

    /// Placeholder names appearing in the body, in order of first appearance.
    std::vector<std::string> placeholders() const;

    /// Throws TemplateError unless the placeholder set equals the parameter
    /// name set exactly.
    void validate(const ParameterList& defs) const;
};

/// Substitutes every placeholder with the point's value. Fin counts render
/// as bare integers, everything else in scientific notation with six
/// significant digits, so rendered netlists are byte-stable.
std::string render_netlist(const NetlistTemplate& tmpl, const DesignPoint& point,
                           const ParameterList& defs);

std::string format_param_value(const ParameterDef& def, double value);

/// A loaded benchmark: topology name, parameter list, netlist template, and
/// optional technology constants used by the built-in surrogate.
struct Benchmark {
    std::string id;
    ParameterList parameters;
    NetlistTemplate netlist;
    std::string surrogate_model; // "two_stage_miller", "ota5t", or "" for external
};

/// Reads a parameter-definition file (JSON: topology, parameters, netlist
/// template path) and the referenced template.
Benchmark load_benchmark(const std::string& params_file);

} // namespace ledro
