#include "ledro/turbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ledro/errors.hpp"

namespace ledro {

void TurboConfig::validate() const {
    if (!(l_min > 0.0) || !(l_init >= l_min) || !(l_max >= l_init)) {
        throw ConfigError("trust-region lengths must satisfy 0 < l_min <= l_init <= l_max");
    }
    if (tau_succ < 1) throw ConfigError("tau_succ must be positive");
    if (tau_fail < 0) throw ConfigError("tau_fail must be non-negative");
    if (batch < 1) throw ConfigError("batch size must be positive");
    if (n_init < 0) throw ConfigError("n_init must be non-negative");
    if (parallelism < 1) throw ConfigError("parallelism must be positive");
}

int TurboConfig::resolved_tau_fail(std::size_t dim) const {
    if (tau_fail > 0) return tau_fail;
    return std::max(5, static_cast<int>(dim));
}

int TurboConfig::resolved_n_init(std::size_t dim, int budget) const {
    if (n_init > 0) return n_init;
    const int n = std::min(static_cast<int>(2 * dim), budget);
    return std::max(n, 2);
}

int TurboConfig::candidate_pool(std::size_t dim) {
    return std::min(static_cast<int>(100 * dim), 5000);
}

double TrustRegionState::incumbent_value() const { return best().value; }

const Observation& TrustRegionState::best() const {
    if (observations.empty()) throw ConfigError("trust region has no observations");
    return observations[incumbent];
}

void TrustRegionState::add(Observation obs) {
    observations.push_back(std::move(obs));
    if (observations.size() == 1
        || observations.back().value > observations[incumbent].value) {
        incumbent = observations.size() - 1;
    }
}

std::vector<std::vector<double>> init_points(std::size_t dim, int n, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("init_points: dimension must be positive");
    if (n < 0) throw ConfigError("init_points: count must be non-negative");
    return ScrambledHalton(dim, seed).take(static_cast<std::size_t>(n));
}

void tr_update(TrustRegionState& state, const std::vector<Observation>& fresh) {
    if (fresh.empty()) return;
    double best_new = -std::numeric_limits<double>::infinity();
    for (const auto& o : fresh) best_new = std::max(best_new, o.value);

    const bool improved =
        state.observations.empty() || best_new > state.incumbent_value();
    for (const auto& o : fresh) state.add(o);

    if (improved) {
        state.successes += 1;
        state.failures = 0;
    } else {
        state.failures += 1;
        state.successes = 0;
    }
    if (state.successes >= state.cfg.tau_succ) {
        state.length = std::min(2.0 * state.length, state.cfg.l_max);
        state.successes = 0;
    } else if (state.failures >= state.tau_fail) {
        state.length *= 0.5;
        state.failures = 0;
        if (state.length < state.cfg.l_min) {
            state.needs_restart = true;
            state.length = state.cfg.l_init;
        }
    }
}

std::vector<std::vector<double>> tr_propose(const TrustRegionState& state,
                                            const GaussianProcess& gp, int batch, Rng& rng) {
    if (batch < 1) throw ConfigError("propose: batch must be positive");
    if (!gp.conditioned()) throw ConfigError("propose: model not conditioned");
    const std::size_t d = state.region.size();
    const auto& center = state.best().unit;

    // Box widths: trust-region length scaled per dimension by the model's
    // length scales normalized to geometric mean 1, clipped to the cube.
    const Eigen::VectorXd ls = gp.hyper().length_scales();
    double log_sum = 0.0;
    for (Eigen::Index i = 0; i < ls.size(); ++i) log_sum += std::log(ls[i]);
    const double gmean = std::exp(log_sum / static_cast<double>(ls.size()));
    std::vector<double> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double half = 0.5 * state.length * (ls[static_cast<Eigen::Index>(i)] / gmean);
        lo[i] = std::max(0.0, center[i] - half);
        hi[i] = std::min(1.0, center[i] + half);
    }

    const int pool = TurboConfig::candidate_pool(d);
    ScrambledHalton seq(d, rng.next_u64());
    const double pert_prob = std::min(20.0 / static_cast<double>(d), 1.0);
    Eigen::MatrixXd q(pool, static_cast<Eigen::Index>(d));
    for (int c = 0; c < pool; ++c) {
        const auto u = seq.next();
        if (pert_prob >= 1.0) {
            for (std::size_t i = 0; i < d; ++i) {
                q(c, static_cast<Eigen::Index>(i)) = lo[i] + u[i] * (hi[i] - lo[i]);
            }
            continue;
        }
        // High dimension: perturb a random subset of coordinates, keep the
        // incumbent's value elsewhere, at least one perturbed.
        bool any = false;
        for (std::size_t i = 0; i < d; ++i) {
            const bool perturb = rng.uniform() < pert_prob;
            any = any || perturb;
            q(c, static_cast<Eigen::Index>(i)) =
                perturb ? lo[i] + u[i] * (hi[i] - lo[i]) : center[i];
        }
        if (!any) {
            const auto i = static_cast<std::size_t>(rng.uniform_index(d));
            q(c, static_cast<Eigen::Index>(i)) = lo[i] + u[i] * (hi[i] - lo[i]);
        }
    }

    // One joint posterior draw per candidate slot; each draw contributes its
    // argmax, skipping rows already chosen so a batch has distinct pool rows.
    const Eigen::MatrixXd samples = gp.sample_joint_multi(q, batch, rng);
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(batch));
    std::vector<char> taken(static_cast<std::size_t>(pool), 0);
    for (int k = 0; k < batch; ++k) {
        int pick = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < pool; ++c) {
            if (!taken[static_cast<std::size_t>(c)] && samples(c, k) > best) {
                best = samples(c, k);
                pick = c;
            }
        }
        if (pick < 0) pick = 0; // batch larger than pool: reuse is harmless
        taken[static_cast<std::size_t>(pick)] = 1;
        std::vector<double> x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = q(pick, static_cast<Eigen::Index>(i));
        out.push_back(std::move(x));
    }
    return out;
}

TurboResult turbo_run(Evaluator& evaluator, const SearchRegion& region, int budget,
                      std::uint64_t seed, const TurboConfig& cfg,
                      const std::vector<EvaluationRecord>& warm, const std::string& phase,
                      std::uint64_t first_step,
                      const std::function<void(const EvaluationRecord&)>& on_record) {
    cfg.validate();
    const auto& defs = evaluator.parameters();
    if (region.size() != defs.size()) {
        throw RegionSchemaError("trust-region run: region arity != parameter count");
    }
    if (budget < 0) throw ConfigError("budget must be non-negative");

    TurboResult result;
    TrustRegionState& state = result.state;
    state.region = region;
    state.cfg = cfg;
    state.length = cfg.l_init;
    state.tau_fail = cfg.resolved_tau_fail(defs.size());

    for (const auto& rec : warm) {
        if (region.contains(rec.point.values)) {
            state.add({to_unit(rec.point, region), rec.fom.value});
        }
    }

    int remaining = budget;
    std::uint64_t step = first_step;

    auto eval_units = [&](const std::vector<std::vector<double>>& units) {
        std::vector<DesignPoint> pts;
        pts.reserve(units.size());
        for (const auto& u : units) pts.push_back(from_unit(u, region, defs));
        auto recs = evaluate_batch(evaluator, pts, cfg.parallelism);
        std::vector<Observation> fresh;
        fresh.reserve(recs.size());
        for (auto& rec : recs) {
            rec.phase = phase;
            rec.step = step++;
            if (on_record) on_record(rec);
            fresh.push_back({to_unit(rec.point, state.region), rec.fom.value});
            result.records.push_back(std::move(rec));
        }
        remaining -= static_cast<int>(units.size());
        return fresh;
    };

    std::uint64_t init_round = 0;
    auto fresh_init = [&](int target) {
        const int n = std::min(target, remaining);
        if (n <= 0) return;
        const auto units =
            init_points(defs.size(), n, derive_seed(seed, "turbo-init", init_round++));
        for (auto& obs : eval_units(units)) state.add(std::move(obs));
    };

    const int n_init = cfg.resolved_n_init(defs.size(), budget);
    if (state.observations.size() < 2) {
        if (n_init > budget) throw ConfigError("n_init exceeds the evaluation budget");
        fresh_init(n_init);
    }

    GaussianProcess gp(cfg.gp);
    Rng propose_rng(derive_seed(seed, "turbo-propose"));
    std::uint64_t fit_idx = 0;

    while (remaining > 0) {
        if (state.needs_restart) {
            state.archived.insert(state.archived.end(),
                                  std::make_move_iterator(state.observations.begin()),
                                  std::make_move_iterator(state.observations.end()));
            state.observations.clear();
            state.incumbent = 0;
            state.successes = 0;
            state.failures = 0;
            state.needs_restart = false;
            state.restarts += 1;
            gp = GaussianProcess(cfg.gp); // fresh data, fresh hyper continuation
            fresh_init(n_init);
            continue;
        }
        if (state.observations.size() < 2) {
            fresh_init(2);
            continue;
        }

        const auto n = static_cast<Eigen::Index>(state.observations.size());
        const auto d = static_cast<Eigen::Index>(defs.size());
        Eigen::MatrixXd x(n, d);
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto& obs = state.observations[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < d; ++j) {
                x(i, j) = obs.unit[static_cast<std::size_t>(j)];
            }
            y[i] = obs.value;
        }
        gp.fit(x, y, derive_seed(seed, "turbo-fit", fit_idx++));

        const int k = std::min(cfg.batch, remaining);
        const auto cands = tr_propose(state, gp, k, propose_rng);
        tr_update(state, eval_units(cands));
    }
    return result;
}

} // namespace ledro
