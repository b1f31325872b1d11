#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ledro/design_space.hpp"
#include "ledro/evaluator.hpp"
#include "ledro/gp.hpp"
#include "ledro/rng.hpp"

namespace ledro {

/// Trust-region optimizer constants. A zero tau_fail or n_init resolves from
/// the problem dimension at run time.
struct TurboConfig {
    double l_init = 0.8;
    double l_min = 0.0078125; // 0.5^7
    double l_max = 1.6;
    int tau_succ = 3;
    int tau_fail = 0;        // 0 -> max(5, dimension)
    int batch = 10;
    int n_init = 0;          // 0 -> min(2 * dimension, budget), at least 2
    unsigned parallelism = 4;
    GpConfig gp;

    void validate() const;
    int resolved_tau_fail(std::size_t dim) const;
    int resolved_n_init(std::size_t dim, int budget) const;
    static int candidate_pool(std::size_t dim);
};

/// One recorded observation: the evaluated point's unit coordinates inside
/// the active region (after integer/gate snapping) and its objective value.
struct Observation {
    std::vector<double> unit;
    double value = 0.0;
};

/// Mutable optimizer state for a single trust region. Observations hold the
/// points since the last restart; earlier ones are archived.
struct TrustRegionState {
    SearchRegion region;
    TurboConfig cfg;
    std::vector<Observation> observations;
    std::vector<Observation> archived;
    double length = 0.8;
    int successes = 0;
    int failures = 0;
    int tau_fail = 5;
    bool needs_restart = false;
    int restarts = 0;
    std::size_t incumbent = 0; // index of the best observation

    double incumbent_value() const;
    const Observation& best() const;

    /// Appends one observation, keeping the incumbent pointed at the max
    /// (first max on ties).
    void add(Observation obs);
};

/// Space-filling initial points in the unit cube (scrambled low-discrepancy
/// sequence). Deterministic per seed; all points distinct.
std::vector<std::vector<double>> init_points(std::size_t dim, int n, std::uint64_t seed);

/// Success/failure bookkeeping after one evaluated batch: improvement over
/// the incumbent bumps the success counter, otherwise the failure counter;
/// hitting a tolerance doubles or halves the side length; shrinking past
/// l_min flags a restart and resets the length. The new observations are
/// appended.
void tr_update(TrustRegionState& state, const std::vector<Observation>& fresh);

/// Thompson-sampled batch from a candidate pool inside the trust-region box:
/// the box is centered on the incumbent with per-dimension widths scaled by
/// the model's normalized length scales, clipped to the unit cube. Each draw
/// contributes its argmax; duplicates fall back to the draw's next-best.
std::vector<std::vector<double>> tr_propose(const TrustRegionState& state,
                                            const GaussianProcess& gp, int batch, Rng& rng);

struct TurboResult {
    std::vector<EvaluationRecord> records; // the new evaluations, in order
    TrustRegionState state;
};

/// Runs the optimizer inside `region` until exactly `budget` new evaluations
/// are recorded. Warm-start records lying inside the region become
/// observations without consuming budget. Records are stamped with `phase`
/// and sequential steps from `first_step`; `on_record` fires once per record
/// in evaluation order.
TurboResult turbo_run(Evaluator& evaluator, const SearchRegion& region, int budget,
                      std::uint64_t seed, const TurboConfig& cfg = {},
                      const std::vector<EvaluationRecord>& warm = {},
                      const std::string& phase = Phase::kBaseline,
                      std::uint64_t first_step = 1,
                      const std::function<void(const EvaluationRecord&)>& on_record = {});

} // namespace ledro
