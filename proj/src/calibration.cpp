#include "ledro/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "ledro/errors.hpp"

namespace ledro {

void CalibrationConfig::validate() const {
    if (budget < 2) throw ConfigError("calibration budget must be at least 2");
    if (top_k < 1) throw ConfigError("calibration top_k must be positive");
    if (max_retries < 0) throw ConfigError("calibration max_retries must be non-negative");
    if (!(threshold_step_db > 0.0)) {
        throw ConfigError("calibration threshold_step_db must be positive");
    }
    if (!std::isfinite(gain_threshold_db)) {
        throw ConfigError("calibration gain threshold must be finite");
    }
    turbo.validate();
}

CalibrationSet select_calibration(std::vector<EvaluationRecord> records,
                                  double gain_threshold_db, int top_k) {
    if (top_k < 1) throw ConfigError("calibration top_k must be positive");
    CalibrationSet set;
    set.all = std::move(records);
    set.threshold_db = gain_threshold_db;
    set.budget_used = static_cast<int>(set.all.size());

    for (std::size_t i = 0; i < set.all.size(); ++i) {
        if (!set.all[i].failed && is_good_point(set.all[i].specs, gain_threshold_db)) {
            set.good.push_back(i);
        }
    }

    set.selected = set.good;
    // FoM descending; equal scores keep the earlier evaluation.
    std::stable_sort(set.selected.begin(), set.selected.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (set.all[a].fom.value != set.all[b].fom.value) {
                             return set.all[a].fom.value > set.all[b].fom.value;
                         }
                         return set.all[a].step < set.all[b].step;
                     });
    if (set.selected.size() > static_cast<std::size_t>(top_k)) {
        set.selected.resize(static_cast<std::size_t>(top_k));
    }
    return set;
}

CalibrationSet synthesize(Evaluator& evaluator, const SearchRegion& full_region,
                          const CalibrationConfig& cfg, std::uint64_t seed,
                          std::uint64_t first_step,
                          const std::function<void(const EvaluationRecord&)>& on_record) {
    cfg.validate();

    std::vector<EvaluationRecord> records;
    double threshold = cfg.gain_threshold_db;
    int budget = cfg.budget;
    std::uint64_t round = 0;

    auto run_more = [&](int extra) {
        auto res = turbo_run(evaluator, full_region, extra,
                             derive_seed(seed, "calibration", round++), cfg.turbo, records,
                             Phase::kCalibration, first_step + records.size(), on_record);
        records.insert(records.end(), std::make_move_iterator(res.records.begin()),
                       std::make_move_iterator(res.records.end()));
    };

    run_more(budget);
    auto set = select_calibration(records, threshold, cfg.top_k);

    for (int retry = 0; set.good.empty() && retry < cfg.max_retries; ++retry) {
        if (retry == 0) {
            // First remedy: keep optimizing until the budget has doubled.
            run_more(budget);
        } else {
            // Second remedy: accept lower-gain designs.
            threshold -= cfg.threshold_step_db;
        }
        set = select_calibration(records, threshold, cfg.top_k);
    }

    if (set.good.empty()) {
        throw GoodPointsNotFoundError(
            "calibration found no design with gain above the threshold; "
            "extend the calibration budget or lower the gain threshold");
    }
    return set;
}

} // namespace ledro
