#pragma once

#include <cctype>
#include <cstddef>
#include <string>
#include <vector>

#include "ktune/arguments.hpp"
#include "ktune/config.hpp"
#include "ktune/constraint.hpp"
#include "ktune/device.hpp"
#include "ktune/errors.hpp"
#include "ktune/space.hpp"

namespace ktune {

enum class SizeTarget { global, local };
enum class SizeOp { multiply, divide };

inline const char* to_string(SizeTarget target) {
    return target == SizeTarget::global ? "global" : "local";
}

inline const char* to_string(SizeOp op) {
    return op == SizeOp::multiply ? "multiply" : "divide";
}

/// Scales the global or local thread sizes by per-dimension factors. Each
/// factor is either a parameter name (resolved against the configuration) or
/// a non-negative integer literal; "1" leaves that dimension alone.
struct ThreadSizeModifier {
    SizeTarget target = SizeTarget::global;
    SizeOp op = SizeOp::multiply;
    std::vector<std::string> factors;
};

/// Everything the tuner needs to know about the kernel under test: base
/// thread sizes, how parameters reshape them, the argument list, and an
/// optional local-memory usage expression over the parameters (bytes).
struct KernelSpec {
    std::string name;
    std::string source_ref;
    std::vector<size_t> base_global;
    std::vector<size_t> base_local;
    std::vector<ThreadSizeModifier> modifiers;
    std::vector<ArgumentSpec> arguments;
    std::string local_mem_expr;  // empty = no local memory use
};

struct ResolvedSizes {
    std::vector<size_t> global;
    std::vector<size_t> local;
};

namespace detail {

inline bool is_integer_literal(const std::string& text) {
    if (text.empty()) {
        return false;
    }
    for (char c: text) {
        if (!std::isdigit(static_cast<unsigned char>(c))) {
            return false;
        }
    }
    return true;
}

inline unsigned long long modifier_factor(const std::string& text,
                                          const Configuration& config) {
    if (is_integer_literal(text)) {
        return std::stoull(text);
    }
    Value value = config.at(text);
    return static_cast<unsigned long long>(value);
}

}  // namespace detail

/// Applies the kernel's modifiers, in order, to its base sizes. Divisions
/// must be exact (InexactDivision) and never by zero (ZeroDivisor).
inline ResolvedSizes resolve_thread_sizes(const KernelSpec& kernel,
                                          const Configuration& config) {
    ResolvedSizes sizes{kernel.base_global, kernel.base_local};
    for (const ThreadSizeModifier& modifier: kernel.modifiers) {
        std::vector<size_t>& target = modifier.target == SizeTarget::global
                                          ? sizes.global
                                          : sizes.local;
        if (modifier.factors.size() != target.size()) {
            throw Error("thread-size modifier lists "
                        + std::to_string(modifier.factors.size())
                        + " factors for " + std::to_string(target.size())
                        + " " + to_string(modifier.target) + " dimensions");
        }
        for (size_t d = 0; d < target.size(); ++d) {
            unsigned long long factor =
                detail::modifier_factor(modifier.factors[d], config);
            if (modifier.op == SizeOp::multiply) {
                target[d] = target[d] * factor;
            } else {
                if (factor == 0) {
                    throw ZeroDivisor(d);
                }
                if (target[d] % factor != 0) {
                    throw InexactDivision(d, target[d], factor);
                }
                target[d] = target[d] / factor;
            }
        }
    }
    return sizes;
}

/// One labeled predicate enforcing every launchability limit of `device`
/// for `kernel`: thread sizes must resolve (exact divisions, no zero or
/// vanished dimensions), the work-group must fit the total and per-dimension
/// caps, and the kernel's local-memory expression must fit the budget.
inline Predicate device_constraints(const KernelSpec& kernel,
                                    const DeviceModel& device,
                                    const SearchSpace& space) {
    ConstraintExpr local_mem;
    bool has_local_mem = !kernel.local_mem_expr.empty();
    if (has_local_mem) {
        local_mem = ConstraintExpr::parse(kernel.local_mem_expr, space.names());
    }
    auto fn = [kernel, device, local_mem,
               has_local_mem](const Configuration& config) -> bool {
        ResolvedSizes sizes;
        try {
            sizes = resolve_thread_sizes(kernel, config);
        } catch (const InexactDivision&) {
            return false;
        } catch (const ZeroDivisor&) {
            return false;
        }
        size_t total = 1;
        for (size_t d = 0; d < sizes.local.size(); ++d) {
            if (sizes.local[d] == 0
                || sizes.local[d] > device.max_work_group_dim[d]) {
                return false;
            }
            total *= sizes.local[d];
        }
        if (total > device.max_work_group_total) {
            return false;
        }
        for (size_t dim: sizes.global) {
            if (dim == 0) {
                return false;
            }
        }
        if (has_local_mem) {
            Value bytes = local_mem.evaluate_value(config);
            if (bytes < 0
                || static_cast<unsigned long long>(bytes)
                       > device.local_mem_bytes) {
                return false;
            }
        }
        return true;
    };
    return Predicate{"device-limits:" + device.name, std::move(fn)};
}

}  // namespace ktune
