#include "ledro/design_space.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ledro/errors.hpp"

namespace ledro {

std::string_view param_kind_name(ParamKind kind) {
    switch (kind) {
    case ParamKind::FinCount: return "fin_count";
    case ParamKind::GateLength: return "gate_length";
    case ParamKind::Bias: return "bias";
    }
    return "?";
}

ParamKind param_kind_from_name(std::string_view name) {
    if (name == "fin_count") return ParamKind::FinCount;
    if (name == "gate_length") return ParamKind::GateLength;
    if (name == "bias") return ParamKind::Bias;
    throw ConfigError("unknown parameter kind: " + std::string(name));
}

void ParameterDef::validate() const {
    if (name.empty()) throw ConfigError("parameter with empty name");
    if (!(lower < upper)) throw ConfigError("parameter " + name + ": lower must be < upper");
    if (kind == ParamKind::FinCount) {
        if (lower < 1.0) throw ConfigError("parameter " + name + ": fin counts start at 1");
        if (lower != std::floor(lower) || upper != std::floor(upper)) {
            throw ConfigError("parameter " + name + ": fin-count bounds must be integers");
        }
    }
    if (kind == ParamKind::GateLength) {
        if (allowed_values.size() < 2) {
            throw ConfigError("parameter " + name + ": gate lengths need >= 2 allowed values");
        }
        if (!std::is_sorted(allowed_values.begin(), allowed_values.end())) {
            throw ConfigError("parameter " + name + ": allowed values must be sorted");
        }
        if (std::adjacent_find(allowed_values.begin(), allowed_values.end()) !=
            allowed_values.end()) {
            throw ConfigError("parameter " + name + ": duplicate allowed value");
        }
        if (allowed_values.front() < lower || allowed_values.back() > upper) {
            throw ConfigError("parameter " + name + ": allowed values outside bounds");
        }
    } else if (!allowed_values.empty()) {
        throw ConfigError("parameter " + name + ": allowed values only apply to gate lengths");
    }
}

bool SearchRegion::contains(const std::vector<double>& values, double tol) const {
    if (values.size() != intervals.size()) return false;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < intervals[i].lo - tol || values[i] > intervals[i].hi + tol) return false;
    }
    return true;
}

SearchRegion SearchRegion::full(const ParameterList& defs) {
    SearchRegion region;
    region.intervals.reserve(defs.size());
    for (const auto& def : defs) region.intervals.push_back({def.lower, def.upper});
    return region;
}

void DesignPoint::validate(const ParameterList& defs) const {
    if (values.size() != defs.size()) {
        throw RegionSchemaError("design point arity mismatch");
    }
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& def = defs[i];
        const double v = values[i];
        if (!std::isfinite(v) || v < def.lower || v > def.upper) {
            throw OutOfRegionError("value for " + def.name + " outside parameter bounds");
        }
        if (def.kind == ParamKind::FinCount && v != std::floor(v)) {
            throw OutOfRegionError("fin count " + def.name + " must be an integer");
        }
        if (def.kind == ParamKind::GateLength) {
            bool ok = false;
            for (double a : def.allowed_values) {
                if (v == a) {
                    ok = true;
                    break;
                }
            }
            if (!ok) throw OutOfRegionError("gate length " + def.name + " not an allowed value");
        }
    }
}

namespace {

Interval intersect(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}

/// Nearest half of the full range: upper half when the proposal lies above
/// the space, lower half when below. Fin axes keep integer endpoints.
Interval nearest_half(const Interval& proposed, const Interval& full, bool integer_axis) {
    double mid = 0.5 * (full.lo + full.hi);
    if (proposed.lo > full.hi) {
        if (integer_axis) mid = std::floor(mid);
        return {mid, full.hi};
    }
    if (integer_axis) mid = std::ceil(mid);
    return {full.lo, mid};
}

} // namespace

SearchRegion clamp_region(const SearchRegion& proposed, const SearchRegion& full,
                          const ParameterList& defs) {
    if (proposed.size() != defs.size() || full.size() != defs.size()) {
        throw RegionSchemaError("region arity does not match parameter list");
    }
    SearchRegion out;
    out.intervals.reserve(defs.size());
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& def = defs[i];
        Interval p = proposed[i];
        if (!std::isfinite(p.lo) || !std::isfinite(p.hi)) {
            throw RegionSchemaError("non-finite interval for " + def.name);
        }
        if (p.lo > p.hi) std::swap(p.lo, p.hi);
        if (def.kind == ParamKind::FinCount) {
            p.lo = std::floor(p.lo);
            p.hi = std::ceil(p.hi);
        }
        Interval clipped = intersect(p, full[i]);
        if (clipped.lo > clipped.hi) {
            clipped = nearest_half(p, full[i], def.kind == ParamKind::FinCount);
        }
        if (def.kind == ParamKind::GateLength) {
            // Widen until at least one allowed value is selectable.
            bool has_value = std::any_of(def.allowed_values.begin(), def.allowed_values.end(),
                                         [&](double a) { return a >= clipped.lo && a <= clipped.hi; });
            if (!has_value) {
                double best = def.allowed_values.front();
                double best_dist = std::numeric_limits<double>::infinity();
                for (double a : def.allowed_values) {
                    double d = a < clipped.lo ? clipped.lo - a : a - clipped.hi;
                    if (d < best_dist) {
                        best_dist = d;
                        best = a;
                    }
                }
                clipped.lo = std::min(clipped.lo, best);
                clipped.hi = std::max(clipped.hi, best);
                clipped = intersect(clipped, full[i]);
            }
        }
        out.intervals.push_back(clipped);
    }
    return out;
}

std::vector<double> to_unit(const DesignPoint& point, const SearchRegion& region) {
    if (point.size() != region.size()) throw RegionSchemaError("point/region arity mismatch");
    std::vector<double> unit(point.size());
    for (std::size_t i = 0; i < point.size(); ++i) {
        const auto& iv = region[i];
        const double v = point[i];
        if (v < iv.lo - 1e-12 || v > iv.hi + 1e-12) {
            throw OutOfRegionError("coordinate " + std::to_string(i) + " outside region");
        }
        const double width = iv.hi - iv.lo;
        unit[i] = width <= 0.0 ? 0.5 : std::clamp((v - iv.lo) / width, 0.0, 1.0);
    }
    return unit;
}

DesignPoint from_unit(const std::vector<double>& unit, const SearchRegion& region,
                      const ParameterList& defs) {
    if (unit.size() != region.size() || unit.size() != defs.size()) {
        throw RegionSchemaError("unit vector arity mismatch");
    }
    DesignPoint point;
    point.values.resize(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
        const double u = unit[i];
        if (!(u >= 0.0 && u <= 1.0)) {
            throw OutOfRegionError("unit coordinate " + std::to_string(i) + " outside [0,1]");
        }
        const auto& iv = region[i];
        const auto& def = defs[i];
        double v = iv.lo + u * (iv.hi - iv.lo);
        switch (def.kind) {
        case ParamKind::FinCount:
            v = std::round(v);
            v = std::clamp(v, std::ceil(iv.lo), std::floor(iv.hi));
            v = std::clamp(v, def.lower, def.upper);
            break;
        case ParamKind::GateLength: {
            double best = def.allowed_values.front();
            double best_dist = std::numeric_limits<double>::infinity();
            bool found_inside = false;
            for (double a : def.allowed_values) {
                const bool inside = a >= iv.lo - 1e-15 && a <= iv.hi + 1e-15;
                const double d = std::abs(a - v);
                // Values inside the region always beat values outside it.
                if ((inside && !found_inside) || (inside == found_inside && d < best_dist)) {
                    best = a;
                    best_dist = d;
                    found_inside = found_inside || inside;
                }
            }
            v = best;
            break;
        }
        case ParamKind::Bias:
            v = std::clamp(v, def.lower, def.upper);
            break;
        }
        point.values[i] = v;
    }
    return point;
}

std::vector<std::string> NetlistTemplate::placeholders() const {
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < body.size(); ++i) {
        if (body[i] != '{') continue;
        auto close = body.find('}', i + 1);
        if (close == std::string::npos) break;
        std::string name = body.substr(i + 1, close - i - 1);
        if (!name.empty() && seen.insert(name).second) names.push_back(name);
        i = close;
    }
    return names;
}

void NetlistTemplate::validate(const ParameterList& defs) const {
    std::set<std::string> in_template;
    for (const auto& n : placeholders()) in_template.insert(n);
    std::set<std::string> in_defs;
    for (const auto& d : defs) in_defs.insert(d.name);

    std::ostringstream missing, orphan;
    for (const auto& n : in_defs) {
        if (!in_template.count(n)) missing << ' ' << n;
    }
    for (const auto& n : in_template) {
        if (!in_defs.count(n)) orphan << ' ' << n;
    }
    if (!missing.str().empty() || !orphan.str().empty()) {
        throw TemplateError("template/parameter mismatch:" +
                            (missing.str().empty() ? "" : " missing placeholders:" + missing.str()) +
                            (orphan.str().empty() ? "" : " unknown placeholders:" + orphan.str()));
    }
}

std::string format_param_value(const ParameterDef& def, double value) {
    if (def.kind == ParamKind::FinCount) {
        return std::to_string(static_cast<long long>(std::llround(value)));
    }
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.5e", value);
    return buf;
}

std::string render_netlist(const NetlistTemplate& tmpl, const DesignPoint& point,
                           const ParameterList& defs) {
    if (point.size() != defs.size()) throw TemplateError("point/parameter arity mismatch");
    std::string out;
    out.reserve(tmpl.body.size() + 64);
    std::ostringstream unresolved;
    for (std::size_t i = 0; i < tmpl.body.size(); ++i) {
        if (tmpl.body[i] != '{') {
            out.push_back(tmpl.body[i]);
            continue;
        }
        auto close = tmpl.body.find('}', i + 1);
        if (close == std::string::npos) {
            out.append(tmpl.body, i, std::string::npos);
            break;
        }
        std::string name = tmpl.body.substr(i + 1, close - i - 1);
        bool matched = false;
        for (std::size_t j = 0; j < defs.size(); ++j) {
            if (defs[j].name == name) {
                out += format_param_value(defs[j], point[j]);
                matched = true;
                break;
            }
        }
        if (!matched) unresolved << ' ' << name;
        i = close;
    }
    if (!unresolved.str().empty()) {
        throw TemplateError("unresolved placeholders:" + unresolved.str());
    }
    return out;
}

Benchmark load_benchmark(const std::string& params_file) {
    std::ifstream in(params_file);
    if (!in) throw ConfigError("cannot open parameter file: " + params_file);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("parameter file " + params_file + ": " + e.what());
    }

    Benchmark bench;
    bench.id = doc.at("topology").get<std::string>();
    if (bench.id.empty()) throw ConfigError("topology name must not be empty");
    bench.surrogate_model = doc.value("surrogate_model", std::string());

    for (const auto& p : doc.at("parameters")) {
        ParameterDef def;
        def.name = p.at("name").get<std::string>();
        def.kind = param_kind_from_name(p.at("kind").get<std::string>());
        def.lower = p.at("lower").get<double>();
        def.upper = p.at("upper").get<double>();
        if (p.contains("allowed")) def.allowed_values = p["allowed"].get<std::vector<double>>();
        def.validate();
        bench.parameters.push_back(std::move(def));
    }
    if (bench.parameters.empty()) throw ConfigError("parameter file lists no parameters");

    const auto template_rel = doc.at("netlist_template").get<std::string>();
    const auto template_path = std::filesystem::path(params_file).parent_path() / template_rel;
    std::ifstream tf(template_path);
    if (!tf) throw ConfigError("cannot open netlist template: " + template_path.string());
    std::ostringstream body;
    body << tf.rdbuf();
    bench.netlist.topology = bench.id;
    bench.netlist.body = body.str();
    bench.netlist.validate(bench.parameters);
    return bench;
}

} // namespace ledro
