#include "ledro/evaluator.hpp"

#include <atomic>
#include <thread>

#include "ledro/errors.hpp"

namespace ledro {

std::string_view device_region_name(DeviceRegion region) {
    switch (region) {
    case DeviceRegion::Cutoff: return "cutoff";
    case DeviceRegion::Subthreshold: return "subthreshold";
    case DeviceRegion::Saturation: return "saturation";
    case DeviceRegion::Linear: return "linear";
    }
    return "cutoff";
}

DeviceRegion device_region_from_name(std::string_view name) {
    if (name == "cutoff") return DeviceRegion::Cutoff;
    if (name == "subthreshold") return DeviceRegion::Subthreshold;
    if (name == "saturation") return DeviceRegion::Saturation;
    if (name == "linear") return DeviceRegion::Linear;
    throw InvalidSpecError("unknown device region name: " + std::string(name));
}

std::string Phase::ledro_round(int round) {
    if (round < 1) throw ConfigError("round index must be >= 1");
    return "ledro-round-" + std::to_string(round);
}

std::vector<EvaluationRecord> evaluate_batch(Evaluator& evaluator,
                                             const std::vector<DesignPoint>& points,
                                             unsigned parallelism) {
    std::vector<EvaluationRecord> records(points.size());
    if (points.empty()) return records;

    const auto run_one = [&](std::size_t i) {
        try {
            records[i] = evaluator.evaluate(points[i]);
        } catch (const std::exception&) {
            EvaluationRecord rec;
            rec.point = points[i];
            rec.specs = SpecSet{0.0, 0.0, 0.0, 0.0};
            rec.failed = true;
            rec.fom = FomScore{evaluator.objective().failure_penalty_fom};
            records[i] = rec;
        }
    };

    const unsigned workers =
        std::min<std::size_t>(std::max(1u, parallelism), points.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < points.size(); ++i) run_one(i);
        return records;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= points.size()) return;
                run_one(i);
            }
        });
    }
    for (auto& t : pool) t.join();
    return records;
}

} // namespace ledro
