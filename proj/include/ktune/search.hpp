#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ktune/config.hpp"
#include "ktune/errors.hpp"
#include "ktune/rng.hpp"
#include "ktune/space.hpp"

namespace ktune {

/// Prices one configuration. Smaller is better; an empty optional marks a
/// failed evaluation (compile error, runtime error, missing measurement).
using Evaluator = std::function<std::optional<double>(const Configuration&)>;

enum class StrategyKind { full, random, annealing, pso };

inline const char* to_string(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::full: return "full";
        case StrategyKind::random: return "random";
        case StrategyKind::annealing: return "annealing";
        case StrategyKind::pso: return "pso";
    }
    return "?";
}

inline StrategyKind strategy_kind_from(const std::string& name) {
    if (name == "full") return StrategyKind::full;
    if (name == "random") return StrategyKind::random;
    if (name == "annealing") return StrategyKind::annealing;
    if (name == "pso") return StrategyKind::pso;
    throw Error("unknown strategy \"" + name
                + "\" (expected full, random, annealing or pso)");
}

/// Which strategy to run and with which hyperparameters. Fields that a
/// strategy does not use are ignored by it.
struct StrategySpec {
    StrategyKind kind = StrategyKind::full;
    double fraction = 1.0;      // budget = floor(valid_count * fraction)
    double temperature = 4.0;   // annealing: initial temperature
    double alpha = 0.4;         // pso: per-dimension random-jump probability
    double beta = 0.0;          // pso: pull toward the particle's best
    double gamma = 0.4;         // pso: pull toward the global best
    size_t swarm = 3;           // pso: particle count
};

/// One unique evaluation, in evaluation order. `step` is 1-based.
struct TraceEntry {
    size_t step = 0;
    Configuration config;
    std::optional<double> time_ms;
    std::optional<double> best_so_far;
};

/// What a strategy did and found. `trace` holds one entry per unique
/// evaluation; revisits of already-priced configurations are served from the
/// cache and appear only in `total_steps`.
struct SearchOutcome {
    std::optional<Configuration> best_config;
    std::optional<double> best_time_ms;
    std::vector<TraceEntry> trace;
    size_t budget = 0;
    size_t unique_evaluations = 0;
    size_t failed_evaluations = 0;
    size_t total_steps = 0;
};

// =============================================================================
// Budget arithmetic
// =============================================================================

/// floor(valid_count * fraction), with a floor of 1. Pure arithmetic: no
/// enumeration happens here, so astronomically large counts are fine. The
/// tiny epsilon keeps exact products (e.g. count/2^k) from landing a hair
/// below the integer they mean.
inline size_t budget(unsigned long long valid_count, double fraction) {
    if (!(fraction > 0.0)) {
        throw Error("fraction must be > 0, got " + std::to_string(fraction));
    }
    long double product =
        static_cast<long double>(valid_count) * static_cast<long double>(fraction);
    long double floored = std::floor(product + 1e-9L);
    if (floored < 1.0L) {
        return 1;
    }
    constexpr long double kMax =
        static_cast<long double>(std::numeric_limits<size_t>::max());
    if (floored >= kMax) {
        return std::numeric_limits<size_t>::max();
    }
    return static_cast<size_t>(floored);
}

// =============================================================================
// Simulated annealing
// =============================================================================

/// Metropolis acceptance for minimization: 1 when the candidate is strictly
/// better, otherwise exp(-(t_prime - t) / temperature). A failed candidate
/// (+inf) is never accepted over anything, including a failed current point,
/// while any finite candidate always replaces a failed current point.
inline double sa_acceptance(double t, double t_prime, double temperature) {
    if (!(temperature > 0.0)) {
        throw NonPositiveTemperature(temperature);
    }
    if (t_prime < t) {
        return 1.0;
    }
    if (std::isinf(t_prime)) {
        return 0.0;
    }
    return std::exp(-(t_prime - t) / temperature);
}

// =============================================================================
// PSO move
// =============================================================================

namespace detail {

inline void validate_probabilities(double alpha, double beta, double gamma) {
    auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!in_unit(alpha) || !in_unit(beta) || !in_unit(gamma)) {
        throw InvalidProbabilities(
            "each of alpha, beta, gamma must lie in [0, 1]");
    }
    if (alpha + beta + gamma > 1.0 + 1e-12) {
        throw InvalidProbabilities("alpha + beta + gamma must not exceed 1");
    }
}

}  // namespace detail

/// One discrete PSO position update. Per dimension d the new value is: a
/// uniformly random list value with probability alpha, the particle-best
/// value with probability beta, the global-best value with probability gamma,
/// and the current value otherwise. The move is re-drawn until the result
/// satisfies the space's constraints (at most 100 attempts); if no attempt
/// lands on a valid configuration the particle stays where it is.
inline Configuration pso_move(const Configuration& x, const Configuration& p,
                              const Configuration& g, double alpha,
                              double beta, double gamma,
                              const SearchSpace& space, Rng& rng) {
    detail::validate_probabilities(alpha, beta, gamma);
    const std::vector<Parameter>& params = space.parameters();
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<Value> values(params.size());
        for (size_t d = 0; d < params.size(); ++d) {
            const Parameter& param = params[d];
            double u = uniform01(rng);
            if (u < alpha) {
                values[d] = param.values[uniform_index(rng,
                                                       param.values.size())];
            } else if (u < alpha + beta) {
                values[d] = p.at(param.name);
            } else if (u < alpha + beta + gamma) {
                values[d] = g.at(param.name);
            } else {
                values[d] = x.at(param.name);
            }
        }
        Configuration candidate(space.names(), std::move(values));
        if (space.satisfies(candidate)) {
            return candidate;
        }
    }
    return x;
}

// =============================================================================
// Strategy drivers
// =============================================================================

namespace detail {

/// Wraps the user evaluator with the canonical-key cache and fills the
/// outcome's trace and counters. Revisits cost no budget.
class CachedEvaluator {
  public:
    CachedEvaluator(const Evaluator& fn, SearchOutcome& out):
        fn_(fn),
        out_(out) {}

    std::optional<double> evaluate(const Configuration& config) {
        std::string key = config.canonical();
        auto it = cache_.find(key);
        if (it != cache_.end()) {
            return it->second;
        }
        std::optional<double> time_ms = fn_(config);
        cache_.emplace(std::move(key), time_ms);
        ++out_.unique_evaluations;
        if (time_ms) {
            // Strict comparison: ties keep the earlier evaluation.
            if (!out_.best_time_ms || *time_ms < *out_.best_time_ms) {
                out_.best_time_ms = *time_ms;
                out_.best_config = config;
            }
        } else {
            ++out_.failed_evaluations;
        }
        out_.trace.push_back(TraceEntry{out_.unique_evaluations, config,
                                        time_ms, out_.best_time_ms});
        return time_ms;
    }

    size_t unique() const {
        return out_.unique_evaluations;
    }

  private:
    const Evaluator& fn_;
    SearchOutcome& out_;
    std::unordered_map<std::string, std::optional<double>> cache_;
};

inline unsigned long long require_nonempty(const SearchSpace& space) {
    unsigned long long count = space.valid_count();
    if (count == 0) {
        throw EmptySpace();
    }
    return count;
}

inline size_t checked_budget(unsigned long long count, double fraction) {
    size_t b = budget(count, fraction);
    if (b > count) {
        throw BudgetExceedsSpace(b, count);
    }
    return b;
}

}  // namespace detail

/// Exhaustive sweep in enumeration order.
inline SearchOutcome run_full(const SearchSpace& space,
                              const Evaluator& evaluate) {
    const std::vector<Configuration>& all = space.enumerate_valid();
    if (all.empty()) {
        throw EmptySpace();
    }
    SearchOutcome out;
    out.budget = all.size();
    detail::CachedEvaluator cache(evaluate, out);
    for (const Configuration& config: all) {
        ++out.total_steps;
        cache.evaluate(config);
    }
    return out;
}

/// Uniform sampling without replacement, budget = floor(count * fraction).
inline SearchOutcome run_random(const SearchSpace& space,
                                const Evaluator& evaluate, double fraction,
                                uint64_t seed) {
    unsigned long long count = detail::require_nonempty(space);
    SearchOutcome out;
    out.budget = detail::checked_budget(count, fraction);
    Rng rng(seed);
    std::vector<Configuration> samples = space.sample_unique(out.budget, rng);
    detail::CachedEvaluator cache(evaluate, out);
    for (const Configuration& config: samples) {
        ++out.total_steps;
        cache.evaluate(config);
    }
    return out;
}

/// Simulated annealing over the neighbor graph. The temperature decays
/// linearly from its initial value to a floor of 5% as the budget is spent;
/// failed evaluations count as +inf (never accepted, always escaped).
inline SearchOutcome run_annealing(const SearchSpace& space,
                                   const Evaluator& evaluate,
                                   double temperature, double fraction,
                                   uint64_t seed) {
    if (!(temperature > 0.0)) {
        throw NonPositiveTemperature(temperature);
    }
    unsigned long long count = detail::require_nonempty(space);
    SearchOutcome out;
    out.budget = detail::checked_budget(count, fraction);
    const size_t step_cap = 50 * out.budget;

    Rng rng(seed);
    detail::CachedEvaluator cache(evaluate, out);

    auto as_time = [](const std::optional<double>& t) {
        return t ? *t : std::numeric_limits<double>::infinity();
    };

    Configuration current = space.random_valid(rng);
    ++out.total_steps;
    double current_time = as_time(cache.evaluate(current));

    while (cache.unique() < out.budget && out.total_steps < step_cap) {
        ++out.total_steps;
        Configuration neighbor = space.random_neighbor(current, rng);
        double neighbor_time = as_time(cache.evaluate(neighbor));
        // Linear cooling on spent budget, floored so late steps keep a
        // nonzero escape probability.
        double progress = static_cast<double>(cache.unique())
                          / static_cast<double>(out.budget);
        double cooled = temperature * std::max(1.0 - progress, 0.05);
        double p = sa_acceptance(current_time, neighbor_time, cooled);
        if (uniform01(rng) < p) {
            current = std::move(neighbor);
            current_time = neighbor_time;
        }
    }
    return out;
}

/// Discrete particle swarm. Particles take turns round-robin: evaluate,
/// update the particle/global bests on success, then move. Failed
/// evaluations leave the bests untouched.
inline SearchOutcome run_pso(const SearchSpace& space,
                             const Evaluator& evaluate, size_t swarm,
                             double alpha, double beta, double gamma,
                             double fraction, uint64_t seed) {
    if (swarm == 0) {
        throw Error("swarm size must be >= 1");
    }
    detail::validate_probabilities(alpha, beta, gamma);
    unsigned long long count = detail::require_nonempty(space);
    SearchOutcome out;
    out.budget = detail::checked_budget(count, fraction);
    const size_t step_cap = 50 * out.budget;

    Rng rng(seed);
    detail::CachedEvaluator cache(evaluate, out);

    std::vector<Configuration> positions;
    positions.reserve(swarm);
    for (size_t i = 0; i < swarm; ++i) {
        positions.push_back(space.random_valid(rng));
    }
    struct Best {
        Configuration config;
        double time_ms;
    };
    std::vector<std::optional<Best>> particle_best(swarm);
    std::optional<Best> global_best;

    size_t turn = 0;
    while (cache.unique() < out.budget && out.total_steps < step_cap) {
        ++out.total_steps;
        size_t i = turn++ % swarm;
        std::optional<double> time_ms = cache.evaluate(positions[i]);
        if (time_ms) {
            if (!particle_best[i] || *time_ms < particle_best[i]->time_ms) {
                particle_best[i] = Best{positions[i], *time_ms};
            }
            if (!global_best || *time_ms < global_best->time_ms) {
                global_best = Best{positions[i], *time_ms};
            }
        }
        const Configuration& toward_p =
            particle_best[i] ? particle_best[i]->config : positions[i];
        const Configuration& toward_g =
            global_best ? global_best->config : positions[i];
        positions[i] = pso_move(positions[i], toward_p, toward_g, alpha, beta,
                                gamma, space, rng);
    }
    return out;
}

/// Dispatch on a StrategySpec.
inline SearchOutcome run_search(const SearchSpace& space,
                                const Evaluator& evaluate,
                                const StrategySpec& strategy, uint64_t seed) {
    switch (strategy.kind) {
        case StrategyKind::full:
            return run_full(space, evaluate);
        case StrategyKind::random:
            return run_random(space, evaluate, strategy.fraction, seed);
        case StrategyKind::annealing:
            return run_annealing(space, evaluate, strategy.temperature,
                                 strategy.fraction, seed);
        case StrategyKind::pso:
            return run_pso(space, evaluate, strategy.swarm, strategy.alpha,
                           strategy.beta, strategy.gamma, strategy.fraction,
                           seed);
    }
    throw Error("corrupt strategy kind");
}

}  // namespace ktune
