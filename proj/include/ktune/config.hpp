#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ktune/errors.hpp"

namespace ktune {

/// Parameter values are non-negative integers; evaluation of constraint
/// expressions uses this signed type throughout.
using Value = long long;

/// One point of a parameter space: an assignment of a value to every
/// parameter. Parameter names are shared between all configurations produced
/// from the same space, so a configuration itself stores only the values.
class Configuration {
  public:
    using Names = std::vector<std::string>;

    Configuration() = default;

    Configuration(std::shared_ptr<const Names> names, std::vector<Value> values):
        names_(std::move(names)),
        values_(std::move(values)) {
        if (!names_ || names_->size() != values_.size()) {
            throw InvalidConfiguration(
                "name/value count mismatch while constructing configuration");
        }
    }

    /// Convenience constructor for ad-hoc configurations (tests, fixtures).
    explicit Configuration(
            std::initializer_list<std::pair<std::string, Value>> entries) {
        auto names = std::make_shared<Names>();
        for (const auto& [name, value]: entries) {
            names->push_back(name);
            values_.push_back(value);
        }
        names_ = std::move(names);
    }

    size_t size() const {
        return values_.size();
    }

    bool empty() const {
        return values_.empty();
    }

    const Names& names() const {
        static const Names no_names;
        return names_ ? *names_ : no_names;
    }

    const std::shared_ptr<const Names>& names_ptr() const {
        return names_;
    }

    const std::vector<Value>& values() const {
        return values_;
    }

    const std::string& name_at(size_t i) const {
        return names().at(i);
    }

    Value value_at(size_t i) const {
        return values_.at(i);
    }

    void set_value_at(size_t i, Value value) {
        values_.at(i) = value;
    }

    bool has(std::string_view name) const {
        return find(name) != npos;
    }

    size_t find(std::string_view name) const {
        if (!names_) {
            return npos;
        }
        for (size_t i = 0; i < names_->size(); ++i) {
            if ((*names_)[i] == name) {
                return i;
            }
        }
        return npos;
    }

    /// Value of a parameter by name. Throws UnknownParameter if absent.
    Value at(std::string_view name) const {
        size_t i = find(name);
        if (i == npos) {
            throw UnknownParameter(std::string(name));
        }
        return values_[i];
    }

    /// Canonical textual encoding: parameter names in ascending order, each
    /// rendered as `name=value`, joined by `;`. Within one space this string
    /// is unique per configuration; it keys evaluation caches and replay
    /// files.
    std::string canonical() const {
        std::vector<size_t> order(values_.size());
        std::iota(order.begin(), order.end(), size_t{0});
        const Names& ns = names();
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return ns[a] < ns[b];
        });
        std::string out;
        for (size_t i = 0; i < order.size(); ++i) {
            if (i > 0) {
                out += ';';
            }
            out += ns[order[i]];
            out += '=';
            out += std::to_string(values_[order[i]]);
        }
        return out;
    }

    friend bool operator==(const Configuration& a, const Configuration& b) {
        if (a.names_ == b.names_) {
            return a.values_ == b.values_;
        }
        return a.names() == b.names() && a.values_ == b.values_;
    }

    friend bool operator!=(const Configuration& a, const Configuration& b) {
        return !(a == b);
    }

    static constexpr size_t npos = static_cast<size_t>(-1);

  private:
    std::shared_ptr<const Names> names_;
    std::vector<Value> values_;
};

}  // namespace ktune
