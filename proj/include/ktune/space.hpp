#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ktune/config.hpp"
#include "ktune/constraint.hpp"
#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

/// One tunable parameter: a name and the finite list of values it can take.
/// Values are non-negative integers; an optional label list of the same
/// length gives each value a human-readable alias (e.g. 0 -> "no").
struct Parameter {
    std::string name;
    std::vector<Value> values;
    std::vector<std::string> labels;

    const std::string* label_of(Value value) const {
        if (labels.empty()) {
            return nullptr;
        }
        for (size_t i = 0; i < values.size(); ++i) {
            if (values[i] == value) {
                return &labels[i];
            }
        }
        return nullptr;
    }
};

/// A constraint that cannot be written in the expression grammar (e.g. device
/// limits that need thread-size resolution). Carries a label for diagnostics.
struct Predicate {
    std::string label;
    std::function<bool(const Configuration&)> fn;
};

/// The cartesian product of all parameter value lists, filtered by
/// constraints. Also owns sampling: uniform, unique-without-replacement and
/// single-step neighbors. Enumeration and validity counting are cached;
/// the cache is shared between copies until either side mutates.
class SearchSpace {
  public:
    /// Explicit enumeration is refused above this raw (unfiltered) size.
    static constexpr unsigned long long kEnumerationLimit = 10'000'000ull;

    SearchSpace() = default;

    SearchSpace(const SearchSpace& other) {
        std::lock_guard<std::mutex> lock(other.cache_mutex_);
        params_ = other.params_;
        names_ = other.names_;
        constraints_ = other.constraints_;
        predicates_ = other.predicates_;
        enumeration_ = other.enumeration_;
        valid_count_ = other.valid_count_;
    }

    SearchSpace& operator=(const SearchSpace& other) {
        if (this != &other) {
            SearchSpace copy(other);
            std::lock_guard<std::mutex> lock(cache_mutex_);
            params_ = std::move(copy.params_);
            names_ = std::move(copy.names_);
            constraints_ = std::move(copy.constraints_);
            predicates_ = std::move(copy.predicates_);
            enumeration_ = std::move(copy.enumeration_);
            valid_count_ = std::move(copy.valid_count_);
        }
        return *this;
    }

    // -------------------------------------------------------------------
    // Construction
    // -------------------------------------------------------------------

    /// Adds a parameter. Names must match [A-Za-z_][A-Za-z0-9_]* and be
    /// unique; values must be distinct and non-negative; labels, when given,
    /// must pair up with values.
    SearchSpace& add_parameter(std::string name, std::vector<Value> values,
                               std::vector<std::string> labels = {}) {
        if (!valid_name(name)) {
            throw Error("parameter name \"" + name
                        + "\" must match [A-Za-z_][A-Za-z0-9_]*");
        }
        for (const Parameter& param: params_) {
            if (param.name == name) {
                throw DuplicateParameter(name);
            }
        }
        if (values.empty()) {
            throw EmptyValueList(name);
        }
        for (size_t i = 0; i < values.size(); ++i) {
            if (values[i] < 0) {
                throw Error("parameter \"" + name
                            + "\" has a negative value "
                            + std::to_string(values[i]));
            }
            for (size_t j = i + 1; j < values.size(); ++j) {
                if (values[i] == values[j]) {
                    throw Error("parameter \"" + name
                                + "\" lists value "
                                + std::to_string(values[i]) + " twice");
                }
            }
        }
        if (!labels.empty() && labels.size() != values.size()) {
            throw Error("parameter \"" + name + "\" has " +
                        std::to_string(labels.size()) + " labels for " +
                        std::to_string(values.size()) + " values");
        }
        params_.push_back(Parameter{std::move(name), std::move(values),
                                    std::move(labels)});
        rebuild_names();
        invalidate();
        return *this;
    }

    /// Parses and attaches a constraint expression.
    SearchSpace& add_constraint(std::string text) {
        constraints_.push_back(ConstraintExpr::parse(std::move(text), names_));
        invalidate();
        return *this;
    }

    /// Attaches a native predicate (used for device limits).
    SearchSpace& add_predicate(std::string label,
                               std::function<bool(const Configuration&)> fn) {
        predicates_.push_back(Predicate{std::move(label), std::move(fn)});
        invalidate();
        return *this;
    }

    SearchSpace& add_predicate(Predicate predicate) {
        predicates_.push_back(std::move(predicate));
        invalidate();
        return *this;
    }

    // -------------------------------------------------------------------
    // Introspection
    // -------------------------------------------------------------------

    const std::vector<Parameter>& parameters() const {
        return params_;
    }

    const std::vector<ConstraintExpr>& constraints() const {
        return constraints_;
    }

    const std::vector<Predicate>& predicates() const {
        return predicates_;
    }

    size_t parameter_index(std::string_view name) const {
        for (size_t i = 0; i < params_.size(); ++i) {
            if (params_[i].name == name) {
                return i;
            }
        }
        throw UnknownParameter(std::string(name));
    }

    const Parameter& parameter(std::string_view name) const {
        return params_[parameter_index(name)];
    }

    bool has_parameter(std::string_view name) const {
        for (const Parameter& param: params_) {
            if (param.name == name) {
                return true;
            }
        }
        return false;
    }

    /// Shared name list; configurations produced by this space point at it.
    const std::shared_ptr<const Configuration::Names>& names() const {
        return names_;
    }

    /// Product of the value-list sizes, before any filtering. Saturates at
    /// ULLONG_MAX; 0 for a space without parameters.
    unsigned long long raw_size() const {
        if (params_.empty()) {
            return 0;
        }
        unsigned long long product = 1;
        for (const Parameter& param: params_) {
            unsigned long long n = param.values.size();
            if (product > std::numeric_limits<unsigned long long>::max() / n) {
                return std::numeric_limits<unsigned long long>::max();
            }
            product *= n;
        }
        return product;
    }

    // -------------------------------------------------------------------
    // Validity
    // -------------------------------------------------------------------

    /// True when every constraint and predicate holds. Assumes `config`
    /// assigns in-list values to exactly this space's parameters.
    bool satisfies(const Configuration& config) const {
        for (const ConstraintExpr& expr: constraints_) {
            if (!expr.evaluate(config)) {
                return false;
            }
        }
        for (const Predicate& pred: predicates_) {
            if (!pred.fn(config)) {
                return false;
            }
        }
        return true;
    }

    /// Full membership test: the configuration assigns one in-list value to
    /// each parameter of this space (no more, no less) and satisfies every
    /// constraint and predicate.
    bool is_valid(const Configuration& config) const {
        if (config.size() != params_.size()) {
            return false;
        }
        for (const Parameter& param: params_) {
            size_t at = config.find(param.name);
            if (at == Configuration::npos) {
                return false;
            }
            Value value = config.value_at(at);
            if (std::find(param.values.begin(), param.values.end(), value)
                == param.values.end()) {
                return false;
            }
        }
        return satisfies(config);
    }

    /// Builds a configuration from one value per parameter, in declaration
    /// order. Values must be in-list; validity beyond that is not checked.
    Configuration make_configuration(std::vector<Value> values) const {
        if (values.size() != params_.size()) {
            throw InvalidConfiguration(
                "expected " + std::to_string(params_.size()) + " values, got "
                + std::to_string(values.size()));
        }
        for (size_t i = 0; i < values.size(); ++i) {
            const Parameter& param = params_[i];
            if (std::find(param.values.begin(), param.values.end(), values[i])
                == param.values.end()) {
                throw InvalidConfiguration(
                    "value " + std::to_string(values[i])
                    + " is not in the list of parameter \"" + param.name
                    + "\"");
            }
        }
        return Configuration(names_, std::move(values));
    }

    // -------------------------------------------------------------------
    // Enumeration and counting
    // -------------------------------------------------------------------

    /// All valid configurations in odometer order (first parameter slowest,
    /// last fastest). The result is built once and cached. Throws
    /// ExplicitEnumerationTooLarge when the raw size exceeds the limit.
    const std::vector<Configuration>& enumerate_valid() const {
        require_parameters();
        std::lock_guard<std::mutex> lock(cache_mutex_);
        if (!enumeration_) {
            unsigned long long raw = raw_size();
            if (raw > kEnumerationLimit) {
                throw ExplicitEnumerationTooLarge(raw, kEnumerationLimit);
            }
            auto result = std::make_shared<std::vector<Configuration>>();
            for_each_raw([&](const Configuration& config) {
                if (satisfies(config)) {
                    result->push_back(config);
                }
            });
            enumeration_ = std::move(result);
            valid_count_ = enumeration_->size();
        }
        return *enumeration_;
    }

    /// Number of valid configurations. Streams over the raw space without
    /// materializing it, so it also works above the enumeration limit.
    unsigned long long valid_count() const {
        require_parameters();
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            if (valid_count_) {
                return *valid_count_;
            }
        }
        unsigned long long count = 0;
        for_each_raw([&](const Configuration& config) {
            if (satisfies(config)) {
                ++count;
            }
        });
        std::lock_guard<std::mutex> lock(cache_mutex_);
        valid_count_ = count;
        return count;
    }

    /// Number of configurations that satisfy the expression constraints,
    /// ignoring predicates (used for space breakdowns in reporting).
    unsigned long long constraint_only_count() const {
        require_parameters();
        unsigned long long count = 0;
        for_each_raw([&](const Configuration& config) {
            for (const ConstraintExpr& expr: constraints_) {
                if (!expr.evaluate(config)) {
                    return;
                }
            }
            ++count;
        });
        return count;
    }

    // -------------------------------------------------------------------
    // Sampling
    // -------------------------------------------------------------------

    /// Uniform draw over the valid configurations. Enumerates when the space
    /// is small enough, otherwise rejection-samples the raw product.
    Configuration random_valid(Rng& rng) const {
        require_parameters();
        if (raw_size() <= kEnumerationLimit) {
            const std::vector<Configuration>& all = enumerate_valid();
            if (all.empty()) {
                throw EmptySpace();
            }
            return all[uniform_index(rng, all.size())];
        }
        for (size_t attempt = 0; attempt < kRejectionCap; ++attempt) {
            Configuration config = random_raw(rng);
            if (satisfies(config)) {
                return config;
            }
        }
        throw EmptySpace(
            "no valid configuration found after "
            + std::to_string(kRejectionCap)
            + " uniform draws; the space is empty or vanishingly sparse");
    }

    /// A valid configuration that differs from `config` in exactly one
    /// parameter, whose value moved to an adjacent position in that
    /// parameter's list. Falls back to a uniform re-draw when no such step
    /// is valid; returns `config` itself only when it is the sole valid
    /// configuration.
    Configuration random_neighbor(const Configuration& config, Rng& rng) const {
        require_parameters();
        if (!is_valid(config)) {
            throw InvalidConfiguration(
                "random_neighbor called with a configuration outside the "
                "space");
        }
        std::vector<Configuration> candidates;
        for (size_t i = 0; i < params_.size(); ++i) {
            const Parameter& param = params_[i];
            size_t at = config.find(param.name);
            Value current = config.value_at(at);
            size_t pos = value_position(param, current);
            for (int delta: {-1, +1}) {
                if (delta < 0 && pos == 0) {
                    continue;
                }
                if (delta > 0 && pos + 1 >= param.values.size()) {
                    continue;
                }
                Configuration candidate = config;
                candidate.set_value_at(at, param.values[pos + delta]);
                if (satisfies(candidate)) {
                    candidates.push_back(std::move(candidate));
                }
            }
        }
        if (!candidates.empty()) {
            return candidates[uniform_index(rng, candidates.size())];
        }
        if (valid_count() <= 1) {
            return config;
        }
        while (true) {
            Configuration draw = random_valid(rng);
            if (!(draw == config)) {
                return draw;
            }
        }
    }

    /// `n` distinct valid configurations, uniformly without replacement.
    /// Bit-identical for the same seed on the same build. Throws
    /// BudgetExceedsSpace when n exceeds the number of valid configurations.
    std::vector<Configuration> sample_unique(size_t n, Rng& rng) const {
        require_parameters();
        if (n == 0) {
            return {};
        }
        if (raw_size() <= kEnumerationLimit) {
            const std::vector<Configuration>& all = enumerate_valid();
            if (n > all.size()) {
                throw BudgetExceedsSpace(n, all.size());
            }
            // Partial Fisher-Yates over the index range.
            std::vector<uint32_t> indices(all.size());
            for (size_t i = 0; i < indices.size(); ++i) {
                indices[i] = static_cast<uint32_t>(i);
            }
            std::vector<Configuration> out;
            out.reserve(n);
            for (size_t i = 0; i < n; ++i) {
                size_t j = i + static_cast<size_t>(
                                   uniform_index(rng, indices.size() - i));
                std::swap(indices[i], indices[j]);
                out.push_back(all[indices[i]]);
            }
            return out;
        }
        // Above the enumeration limit: rejection with a seen-set. The count
        // check still guards fraction > 1.
        unsigned long long available = valid_count();
        if (n > available) {
            throw BudgetExceedsSpace(n, available);
        }
        std::vector<Configuration> out;
        out.reserve(n);
        std::unordered_set<std::string> seen;
        size_t misses = 0;
        while (out.size() < n) {
            Configuration config = random_valid(rng);
            if (seen.insert(config.canonical()).second) {
                out.push_back(std::move(config));
                misses = 0;
            } else if (++misses > kRejectionCap) {
                throw Error(
                    "sample_unique stalled: could not find a fresh valid "
                    "configuration after "
                    + std::to_string(kRejectionCap) + " draws");
            }
        }
        return out;
    }

  private:
    static constexpr size_t kRejectionCap = 1'000'000;

    static bool valid_name(const std::string& name) {
        if (name.empty()) {
            return false;
        }
        auto head = static_cast<unsigned char>(name[0]);
        if (!std::isalpha(head) && name[0] != '_') {
            return false;
        }
        for (char c: name) {
            auto u = static_cast<unsigned char>(c);
            if (!std::isalnum(u) && c != '_') {
                return false;
            }
        }
        return true;
    }

    void rebuild_names() {
        auto names = std::make_shared<Configuration::Names>();
        names->reserve(params_.size());
        for (const Parameter& param: params_) {
            names->push_back(param.name);
        }
        names_ = std::move(names);
    }

    void invalidate() {
        std::lock_guard<std::mutex> lock(cache_mutex_);
        enumeration_.reset();
        valid_count_.reset();
    }

    void require_parameters() const {
        if (params_.empty()) {
            throw Error("the space has no parameters");
        }
    }

    static size_t value_position(const Parameter& param, Value value) {
        for (size_t i = 0; i < param.values.size(); ++i) {
            if (param.values[i] == value) {
                return i;
            }
        }
        throw InvalidConfiguration("value " + std::to_string(value)
                                   + " is not in the list of parameter \""
                                   + param.name + "\"");
    }

    /// Visits every raw configuration in odometer order (last parameter
    /// fastest). The callback receives a scratch configuration that must be
    /// copied if retained.
    template <typename Fn>
    void for_each_raw(Fn&& fn) const {
        std::vector<size_t> odometer(params_.size(), 0);
        std::vector<Value> values(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            values[i] = params_[i].values[0];
        }
        Configuration config(names_, std::move(values));
        while (true) {
            fn(config);
            size_t slot = params_.size();
            while (slot > 0) {
                --slot;
                if (++odometer[slot] < params_[slot].values.size()) {
                    config.set_value_at(slot,
                                        params_[slot].values[odometer[slot]]);
                    break;
                }
                odometer[slot] = 0;
                config.set_value_at(slot, params_[slot].values[0]);
                if (slot == 0) {
                    return;
                }
            }
        }
    }

    Configuration random_raw(Rng& rng) const {
        std::vector<Value> values(params_.size());
        for (size_t i = 0; i < params_.size(); ++i) {
            values[i] = params_[i].values[uniform_index(
                rng, params_[i].values.size())];
        }
        return Configuration(names_, std::move(values));
    }

    std::vector<Parameter> params_;
    std::shared_ptr<const Configuration::Names> names_;
    std::vector<ConstraintExpr> constraints_;
    std::vector<Predicate> predicates_;

    mutable std::mutex cache_mutex_;
    mutable std::shared_ptr<const std::vector<Configuration>> enumeration_;
    mutable std::optional<unsigned long long> valid_count_;
};

/// Free-function facade over the member API.
inline ConstraintExpr parse_constraint(const SearchSpace& space,
                                       std::string text) {
    return ConstraintExpr::parse(std::move(text), space.names());
}

inline Value evaluate_constraint(const ConstraintExpr& expr,
                                 const Configuration& config) {
    return expr.evaluate_value(config);
}

}  // namespace ktune
