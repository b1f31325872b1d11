#include "ledro/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ledro/errors.hpp"

namespace ledro {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// One FinFET lumped as a source-referenced device. All voltages are
// magnitudes; PMOS callers pass vsg/vsd.
struct Device {
    double k = 0.0;      // A/V^2 per fin at l_ref
    double vth = 0.0;
    double nfin = 1.0;
    double l = 14e-9;
    double l_ref = 14e-9;
    double lambda0 = 0.25;
    double n_vt = 0.0389;

    double lambda() const { return lambda0 * (l_ref / l); }

    // Smooth overdrive: exponential below threshold, linear above.
    double drive(double vgs) const {
        const double x = (vgs - vth) / (2.0 * n_vt);
        // log1p(exp(x)) without overflow for large x.
        const double soft = x > 30.0 ? x : std::log1p(std::exp(x));
        return 2.0 * n_vt * soft;
    }

    double id(double vgs, double vds) const {
        if (vds <= 0.0) return 0.0;
        const double g = drive(vgs);
        const double sat = std::tanh(2.0 * vds / g);
        const double beta = 0.5 * k * nfin * (l_ref / l);
        return beta * g * g * (1.0 + lambda() * vds) * sat;
    }

    double gm(double vgs, double vds) const {
        const double h = 1e-6;
        return (id(vgs + h, vds) - id(vgs - h, vds)) / (2.0 * h);
    }

    double gds(double vgs, double vds) const {
        const double h = 1e-6;
        return (id(vgs, vds + h) - id(vgs, vds - h)) / (2.0 * h);
    }
};

DeviceRegion classify(double vov, double vds) {
    if (vov < -0.15) return DeviceRegion::Cutoff;
    if (vov < 0.0) return DeviceRegion::Subthreshold;
    if (vds >= vov) return DeviceRegion::Saturation;
    return DeviceRegion::Linear;
}

TransistorTelemetry telemetry_n(const std::string& name, const Device& d,
                                double vgs, double vds) {
    TransistorTelemetry t;
    t.device = name;
    t.region = classify(vgs - d.vth, vds);
    t.v_gs = vgs;
    t.v_ds = vds;
    t.g_m = d.gm(vgs, vds);
    t.i_ds = d.id(vgs, vds);
    return t;
}

TransistorTelemetry telemetry_p(const std::string& name, const Device& d,
                                double vsg, double vsd) {
    TransistorTelemetry t;
    t.device = name;
    t.region = classify(vsg - d.vth, vsd);
    t.v_gs = -vsg;
    t.v_ds = -vsd;
    t.g_m = d.gm(vsg, vsd);
    t.i_ds = -d.id(vsg, vsd);
    return t;
}

// vsg of a diode-connected PMOS carrying `target` amps.
double solve_diode(const Device& d, double target, double vdd) {
    double lo = 0.0, hi = vdd;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (d.id(mid, mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double value_of(const DesignPoint& point, const ParameterList& defs,
                const std::string& name) {
    for (std::size_t i = 0; i < defs.size(); ++i) {
        if (defs[i].name == name) return point.values[i];
    }
    throw ConfigError("surrogate model needs parameter '" + name +
                      "' which the benchmark does not define");
}

// Operating point of the input stage shared by both topologies: tail source,
// differential pair, diode-connected mirror load.
struct Stage1 {
    double v_s = 0.0;   // tail node
    double vd1 = 0.0;   // single-ended output node
    double vsg_load = 0.0;
    double i_tail = 0.0;
    double i_half = 0.0;
};

Stage1 solve_stage1(const Device& tail, const Device& pair, const Device& load,
                    double vbias, double vcm, double vdd) {
    Stage1 s;
    double lo = 0.0, hi = vcm;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double i_tail = tail.id(vbias, mid);
        const double vsg = solve_diode(load, 0.5 * i_tail, vdd);
        const double vd1 = vdd - vsg;
        const double i_pair = pair.id(vcm - mid, std::max(vd1 - mid, 0.0));
        // Pair wants more current than the tail provides: tail node rises.
        (2.0 * i_pair > i_tail ? lo : hi) = mid;
    }
    s.v_s = 0.5 * (lo + hi);
    s.i_tail = tail.id(vbias, s.v_s);
    s.i_half = 0.5 * s.i_tail;
    s.vsg_load = solve_diode(load, s.i_half, vdd);
    s.vd1 = vdd - s.vsg_load;
    return s;
}

// Unity-gain frequency of gain * sqrt(1+(f/z)^2) /
// (sqrt(1+(f/p1)^2) * sqrt(1+(f/p2)^2)); 0 when the response never crosses 1.
double unity_crossing(double gain, double p1, double p2, double z) {
    if (gain <= 1.0) return 0.0;
    const auto mag = [&](double f) {
        return gain * std::sqrt(1.0 + (f / z) * (f / z)) /
               (std::sqrt(1.0 + (f / p1) * (f / p1)) *
                std::sqrt(1.0 + (f / p2) * (f / p2)));
    };
    double lo = 0.0, hi = 14.0; // log10(f)
    if (mag(std::pow(10.0, lo)) < 1.0) return 0.0;
    if (mag(std::pow(10.0, hi)) >= 1.0) return std::pow(10.0, hi);
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mag(std::pow(10.0, mid)) >= 1.0 ? lo : hi) = mid;
    }
    return std::pow(10.0, 0.5 * (lo + hi));
}

double deg(double rad) { return rad * (180.0 / kPi); }

} // namespace

SurrogateEvaluator::SurrogateEvaluator(Benchmark benchmark,
                                       ObjectiveConfig objective,
                                       SurrogateTech tech, SurrogateLoads loads)
    : benchmark_(std::move(benchmark)), objective_(std::move(objective)),
      tech_(tech), loads_(loads) {
    objective_.validate();
    if (benchmark_.surrogate_model == "two_stage_miller") {
        two_stage_ = true;
    } else if (benchmark_.surrogate_model == "ota5t") {
        two_stage_ = false;
    } else {
        throw ConfigError("benchmark '" + benchmark_.id +
                          "' names no built-in surrogate model (got '" +
                          benchmark_.surrogate_model + "')");
    }
    // Fail fast if the parameter list is missing a required name.
    DesignPoint probe;
    for (const auto& def : benchmark_.parameters)
        probe.values.push_back(def.lower);
    value_of(probe, benchmark_.parameters, "nfin_diff");
    value_of(probe, benchmark_.parameters, "vbias_tail");
}

EvaluationRecord SurrogateEvaluator::evaluate(const DesignPoint& point) {
    point.validate(benchmark_.parameters);
    EvaluationRecord rec =
        two_stage_ ? evaluate_two_stage(point) : evaluate_ota5t(point);
    rec.point = point;
    rec.specs.validate();
    rec.fom = fom(rec.specs, objective_.bounds, objective_.weights);
    return rec;
}

EvaluationRecord SurrogateEvaluator::evaluate_two_stage(
    const DesignPoint& point) const {
    const auto& defs = benchmark_.parameters;
    const double nfin_diff = value_of(point, defs, "nfin_diff");
    const double nfin_load = value_of(point, defs, "nfin_load");
    const double nfin_tail = value_of(point, defs, "nfin_tail");
    const double nfin_cs = value_of(point, defs, "nfin_cs");
    const double nfin_out = value_of(point, defs, "nfin_out_src");
    const double l_diff = value_of(point, defs, "l_diff");
    const double l_load = value_of(point, defs, "l_load");
    const double l_tail = value_of(point, defs, "l_tail");
    const double l_cs = value_of(point, defs, "l_cs");
    const double vbias = value_of(point, defs, "vbias_tail");

    const auto& t = tech_;
    const Device pair{t.k_n, t.vth_n, nfin_diff, l_diff, t.l_ref, t.lambda0, t.n_vt};
    const Device load{t.k_p, t.vth_p, nfin_load, l_load, t.l_ref, t.lambda0, t.n_vt};
    const Device tail{t.k_n, t.vth_n, nfin_tail, l_tail, t.l_ref, t.lambda0, t.n_vt};
    const Device cs{t.k_p, t.vth_p, nfin_cs, l_cs, t.l_ref, t.lambda0, t.n_vt};
    // The output current source copies the tail bias, so it matches the tail
    // device geometry.
    const Device out{t.k_n, t.vth_n, nfin_out, l_tail, t.l_ref, t.lambda0, t.n_vt};

    const Stage1 s1 = solve_stage1(tail, pair, load, vbias, t.vcm, t.vdd);

    // Second stage: PMOS common source against an NMOS sink; the output node
    // settles where the two branch currents agree.
    const double vsg_cs = t.vdd - s1.vd1;
    double lo = 0.0, hi = t.vdd;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double up = cs.id(vsg_cs, t.vdd - mid);
        const double down = out.id(vbias, mid);
        (up > down ? lo : hi) = mid;
    }
    const double v_out = 0.5 * (lo + hi);
    const double i_branch2 = out.id(vbias, v_out);

    const double vgs1 = t.vcm - s1.v_s;
    const double vds1 = std::max(s1.vd1 - s1.v_s, 0.0);
    const double gm1 = pair.gm(vgs1, vds1);
    const double gds1 = pair.gds(vgs1, vds1);
    const double gds_load = load.gds(s1.vsg_load, s1.vsg_load);
    const double g1 = gds1 + gds_load + t.node_leak_s;
    const double a1 = gm1 / g1;

    const double vsd6 = t.vdd - v_out;
    const double gm6 = cs.gm(vsg_cs, vsd6);
    const double gds6 = cs.gds(vsg_cs, vsd6);
    const double gds7 = out.gds(vbias, v_out);
    const double g2 = gds6 + gds7 + t.node_leak_s +
                      (loads_.r_load > 0.0 ? 1.0 / loads_.r_load : 0.0);
    const double a2 = gm6 / g2;

    const double gain = a1 * a2;

    // Miller-compensated pole split plus the feedforward right-half-plane
    // zero through the compensation capacitor.
    const double c1 =
        t.c_fin * (nfin_diff + 2.0 * nfin_load + nfin_cs) + 1e-18;
    const double cc = loads_.c_comp;
    const double cl = loads_.c_load + t.c_fin * (nfin_cs + nfin_out);
    const double p1 = g1 / (2.0 * kPi * (c1 + cc * (1.0 + a2)));
    const double p2 = gm6 * cc / (2.0 * kPi * (c1 * cl + cc * (c1 + cl)));
    const double z = gm6 / (2.0 * kPi * cc);

    const double fu = unity_crossing(gain, p1, p2, z);
    double pm = 180.0;
    if (fu > 0.0) {
        pm = 180.0 - deg(std::atan(fu / p1)) - deg(std::atan(fu / p2)) -
             deg(std::atan(fu / z));
    }

    EvaluationRecord rec;
    rec.specs.gain_db = 20.0 * std::log10(gain);
    rec.specs.ugbw_hz = fu;
    rec.specs.phase_margin_deg = pm;
    rec.specs.supply_current_a = s1.i_tail + i_branch2;
    rec.telemetry = {
        telemetry_n("m1_diff", pair, vgs1, vds1),
        telemetry_p("m3_load", load, s1.vsg_load, s1.vsg_load),
        telemetry_n("m5_tail", tail, vbias, s1.v_s),
        telemetry_p("m6_cs", cs, vsg_cs, vsd6),
        telemetry_n("m7_src", out, vbias, v_out),
    };
    return rec;
}

EvaluationRecord SurrogateEvaluator::evaluate_ota5t(
    const DesignPoint& point) const {
    const auto& defs = benchmark_.parameters;
    const double nfin_diff = value_of(point, defs, "nfin_diff");
    const double nfin_load = value_of(point, defs, "nfin_load");
    const double nfin_tail = value_of(point, defs, "nfin_tail");
    const double l_diff = value_of(point, defs, "l_diff");
    const double l_load = value_of(point, defs, "l_load");
    const double l_tail = value_of(point, defs, "l_tail");
    const double vbias = value_of(point, defs, "vbias_tail");

    const auto& t = tech_;
    const Device pair{t.k_n, t.vth_n, nfin_diff, l_diff, t.l_ref, t.lambda0, t.n_vt};
    const Device load{t.k_p, t.vth_p, nfin_load, l_load, t.l_ref, t.lambda0, t.n_vt};
    const Device tail{t.k_n, t.vth_n, nfin_tail, l_tail, t.l_ref, t.lambda0, t.n_vt};

    const Stage1 s1 = solve_stage1(tail, pair, load, vbias, t.vcm, t.vdd);

    const double vgs1 = t.vcm - s1.v_s;
    const double vds1 = std::max(s1.vd1 - s1.v_s, 0.0);
    const double gm1 = pair.gm(vgs1, vds1);
    const double gds1 = pair.gds(vgs1, vds1);
    const double gds_load = load.gds(s1.vsg_load, s1.vsg_load);
    const double g_out = gds1 + gds_load + t.node_leak_s +
                         (loads_.r_load > 0.0 ? 1.0 / loads_.r_load : 0.0);
    const double gain = gm1 / g_out;

    const double c_out =
        loads_.c_load + t.c_fin * (nfin_diff + nfin_load);
    const double p1 = g_out / (2.0 * kPi * c_out);
    // Mirror pole-zero doublet at the diode node; the zero sits an octave up
    // and gives phase back.
    const double c_m = t.c_fin * (nfin_diff + 2.0 * nfin_load) + 1e-18;
    const double gm_load = load.gm(s1.vsg_load, s1.vsg_load);
    const double p2 = gm_load / (2.0 * kPi * c_m);
    const double z = 2.0 * p2;

    const double fu = unity_crossing(gain, p1, p2, z);
    double pm = 180.0;
    if (fu > 0.0) {
        pm = 180.0 - deg(std::atan(fu / p1)) - deg(std::atan(fu / p2)) +
             deg(std::atan(fu / z));
    }

    EvaluationRecord rec;
    rec.specs.gain_db = 20.0 * std::log10(gain);
    rec.specs.ugbw_hz = fu;
    rec.specs.phase_margin_deg = pm;
    rec.specs.supply_current_a = s1.i_tail;
    rec.telemetry = {
        telemetry_n("m1_diff", pair, vgs1, vds1),
        telemetry_p("m3_load", load, s1.vsg_load, s1.vsg_load),
        telemetry_n("m5_tail", tail, vbias, s1.v_s),
    };
    return rec;
}

std::unique_ptr<SurrogateEvaluator> make_surrogate_evaluator(
    const Benchmark& benchmark, const ObjectiveConfig& objective) {
    SurrogateLoads loads;
    if (benchmark.surrogate_model == "two_stage_miller") {
        loads.c_load = 500e-15;
        loads.r_load = 1e6;
        loads.c_comp = 300e-15;
    } else {
        loads.c_load = 500e-15;
        loads.r_load = 0.0;
        loads.c_comp = 0.0;
    }
    return std::make_unique<SurrogateEvaluator>(benchmark, objective,
                                                SurrogateTech{}, loads);
}

} // namespace ledro
