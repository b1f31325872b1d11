#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ledro/evaluator.hpp"
#include "ledro/turbo.hpp"

namespace ledro {

/// Reference-design synthesis over the full space: run the optimizer, filter
/// designs whose gain clears the threshold, keep the top k by FoM.
struct CalibrationConfig {
    int budget = 200;
    double gain_threshold_db = 0.0;
    int top_k = 5;
    // Zero-good-points retry ladder: one rerun with doubled budget, then one
    // threshold drop, then the error surfaces.
    int max_retries = 2;
    double threshold_step_db = 10.0;
    TurboConfig turbo;

    void validate() const;
};

struct CalibrationSet {
    std::vector<EvaluationRecord> all;    // every calibration evaluation, step order
    std::vector<std::size_t> good;        // indices into `all`, step order
    std::vector<std::size_t> selected;    // indices into `all`, FoM descending
    double threshold_db = 0.0;            // threshold the filter actually used
    int budget_used = 0;

    const EvaluationRecord& selected_record(std::size_t i) const { return all[selected[i]]; }
};

/// Filters and ranks an evaluation history: good = gain strictly above the
/// threshold; selected = top min(k, |good|) by FoM, ties broken by earlier
/// step order.
CalibrationSet select_calibration(std::vector<EvaluationRecord> records,
                                  double gain_threshold_db, int top_k);

/// Runs the optimizer over `full_region` and builds the calibration set.
/// Zero good points triggers the retry ladder (double the budget by
/// continuing the run, then lower the threshold); if that fails too, throws
/// GoodPointsNotFoundError. Records are stamped sequentially from
/// `first_step`; `on_record` fires per evaluation in order.
CalibrationSet synthesize(Evaluator& evaluator, const SearchRegion& full_region,
                          const CalibrationConfig& cfg, std::uint64_t seed,
                          std::uint64_t first_step = 1,
                          const std::function<void(const EvaluationRecord&)>& on_record = {});

} // namespace ledro
