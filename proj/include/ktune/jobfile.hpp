#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ktune/backend.hpp"
#include "ktune/external.hpp"
#include "ktune/landscapes.hpp"
#include "ktune/tuner.hpp"

namespace ktune {

/// A job file, loaded: the tuning job itself, the backend it asked for, and
/// where results should go unless the command line overrides it.
struct LoadedJob {
    TuningJob job;
    std::unique_ptr<Backend> backend;
    std::string output = "results.csv";
};

namespace jobdetail {

using Json = nlohmann::ordered_json;  // keeps "parameters" in file order

[[noreturn]] inline void fail(const std::string& what) {
    throw JobFileError(what);
}

inline void expect_object(const Json& node, const std::string& what) {
    if (!node.is_object()) {
        fail(what + " must be a JSON object");
    }
}

inline void expect_keys(const Json& node, const std::string& what,
                        std::initializer_list<const char*> allowed) {
    for (const auto& [key, value]: node.items()) {
        bool known = false;
        for (const char* name: allowed) {
            known = known || key == name;
        }
        if (!known) {
            fail("unknown key \"" + key + "\" in " + what);
        }
    }
}

inline const Json* find(const Json& node, const char* key) {
    auto it = node.find(key);
    return it == node.end() ? nullptr : &*it;
}

inline std::string require_string(const Json& node, const char* key,
                                  const std::string& what) {
    const Json* value = find(node, key);
    if (!value || !value->is_string()) {
        fail(what + "." + key + " must be a string");
    }
    return value->get<std::string>();
}

inline std::string optional_string(const Json& node, const char* key,
                                   const std::string& what,
                                   std::string fallback) {
    const Json* value = find(node, key);
    if (!value) {
        return fallback;
    }
    if (!value->is_string()) {
        fail(what + "." + key + " must be a string");
    }
    return value->get<std::string>();
}

inline double optional_number(const Json& node, const char* key,
                              const std::string& what, double fallback) {
    const Json* value = find(node, key);
    if (!value) {
        return fallback;
    }
    if (!value->is_number()) {
        fail(what + "." + key + " must be a number");
    }
    return value->get<double>();
}

inline uint64_t optional_unsigned(const Json& node, const char* key,
                                  const std::string& what, uint64_t fallback) {
    const Json* value = find(node, key);
    if (!value) {
        return fallback;
    }
    if (!value->is_number_unsigned()) {
        fail(what + "." + key + " must be a non-negative integer");
    }
    return value->get<uint64_t>();
}

inline std::vector<size_t> size_list(const Json& node, const std::string& what) {
    if (!node.is_array() || node.empty()) {
        fail(what + " must be a non-empty array of positive integers");
    }
    std::vector<size_t> sizes;
    for (const Json& entry: node) {
        if (!entry.is_number_unsigned() || entry.get<uint64_t>() == 0) {
            fail(what + " must contain positive integers only");
        }
        sizes.push_back(entry.get<size_t>());
    }
    return sizes;
}

/// Budget fractions are written either as a plain number or as the ratio
/// notation "1/32" familiar from the search literature.
inline double parse_fraction(const Json& value) {
    if (value.is_number()) {
        double fraction = value.get<double>();
        if (!(fraction > 0.0)) {
            fail("strategy.fraction must be positive");
        }
        return fraction;
    }
    if (value.is_string()) {
        const std::string text = value.get<std::string>();
        auto slash = text.find('/');
        auto parse_int = [&](const std::string& part) -> unsigned long long {
            unsigned long long out = 0;
            auto res = std::from_chars(part.data(), part.data() + part.size(),
                                       out);
            if (res.ec != std::errc{} || res.ptr != part.data() + part.size()
                || out == 0) {
                fail("strategy.fraction \"" + text
                     + "\" is not a ratio of positive integers");
            }
            return out;
        };
        if (slash == std::string::npos) {
            return static_cast<double>(parse_int(text));
        }
        unsigned long long numerator = parse_int(text.substr(0, slash));
        unsigned long long denominator = parse_int(text.substr(slash + 1));
        return static_cast<double>(numerator)
               / static_cast<double>(denominator);
    }
    fail("strategy.fraction must be a number or an \"a/b\" string");
}

inline StrategySpec parse_strategy(const Json& node) {
    expect_object(node, "strategy");
    expect_keys(node, "strategy",
                {"kind", "fraction", "temperature", "alpha", "beta", "gamma",
                 "swarm"});
    StrategySpec strategy;
    try {
        strategy.kind = strategy_kind_from(require_string(node, "kind",
                                                          "strategy"));
    } catch (const JobFileError&) {
        throw;
    } catch (const Error& err) {
        fail(err.what());
    }
    if (const Json* fraction = find(node, "fraction")) {
        strategy.fraction = parse_fraction(*fraction);
    }
    strategy.temperature =
        optional_number(node, "temperature", "strategy", strategy.temperature);
    strategy.alpha = optional_number(node, "alpha", "strategy", strategy.alpha);
    strategy.beta = optional_number(node, "beta", "strategy", strategy.beta);
    strategy.gamma = optional_number(node, "gamma", "strategy", strategy.gamma);
    strategy.swarm = static_cast<size_t>(
        optional_unsigned(node, "swarm", "strategy", strategy.swarm));
    if (strategy.swarm == 0) {
        fail("strategy.swarm must be at least 1");
    }
    return strategy;
}

inline DeviceModel parse_device(const Json& node) {
    if (node.is_string()) {
        try {
            return device_preset(node.get<std::string>());
        } catch (const Error& err) {
            fail(err.what());
        }
    }
    expect_object(node, "device");
    expect_keys(node, "device",
                {"name", "max_work_group_total", "max_work_group_dim",
                 "local_mem_bytes", "peak_gflops", "peak_gbs"});
    DeviceModel device;
    device.name = require_string(node, "name", "device");
    device.max_work_group_total = static_cast<size_t>(optional_unsigned(
        node, "max_work_group_total", "device", device.max_work_group_total));
    if (const Json* dims = find(node, "max_work_group_dim")) {
        std::vector<size_t> sizes = size_list(*dims, "device.max_work_group_dim");
        if (sizes.size() != 3) {
            fail("device.max_work_group_dim must hold exactly 3 entries");
        }
        device.max_work_group_dim = {sizes[0], sizes[1], sizes[2]};
    }
    device.local_mem_bytes = static_cast<size_t>(optional_unsigned(
        node, "local_mem_bytes", "device", device.local_mem_bytes));
    device.peak_gflops =
        optional_number(node, "peak_gflops", "device", device.peak_gflops);
    device.peak_gbs = optional_number(node, "peak_gbs", "device",
                                      device.peak_gbs);
    return device;
}

inline ArgumentSpec parse_argument(const Json& node, size_t index) {
    const std::string what = "kernel.arguments[" + std::to_string(index) + "]";
    expect_object(node, what);
    expect_keys(node, what, {"role", "type", "value", "length", "fill"});
    ArgumentSpec arg;
    try {
        arg.role = arg_role_from(require_string(node, "role", what));
        arg.type = element_type_from(require_string(node, "type", what));
    } catch (const JobFileError&) {
        throw;
    } catch (const Error& err) {
        fail(err.what());
    }
    if (arg.role == ArgRole::scalar) {
        const Json* value = find(node, "value");
        if (!value || !value->is_number()) {
            fail(what + " is a scalar and needs a numeric \"value\"");
        }
        if (find(node, "length") || find(node, "fill")) {
            fail(what + " is a scalar and cannot take \"length\" or \"fill\"");
        }
        arg.value = value->get<double>();
        return arg;
    }
    const Json* length = find(node, "length");
    if (!length || !length->is_number_unsigned()) {
        fail(what + " is a buffer and needs a non-negative \"length\"");
    }
    if (find(node, "value")) {
        fail(what + " is a buffer and cannot take \"value\"");
    }
    arg.length = length->get<size_t>();
    arg.fill = optional_string(node, "fill", what, "none");
    return arg;
}

inline KernelSpec parse_kernel(const Json& node) {
    expect_object(node, "kernel");
    expect_keys(node, "kernel",
                {"name", "source_ref", "global", "local", "modifiers",
                 "local_mem", "arguments"});
    KernelSpec kernel;
    kernel.name = require_string(node, "name", "kernel");
    kernel.source_ref =
        optional_string(node, "source_ref", "kernel", kernel.name + ".cl");
    const Json* global = find(node, "global");
    const Json* local = find(node, "local");
    if (!global || !local) {
        fail("kernel needs base \"global\" and \"local\" size arrays");
    }
    kernel.base_global = size_list(*global, "kernel.global");
    kernel.base_local = size_list(*local, "kernel.local");
    if (kernel.base_global.size() != kernel.base_local.size()) {
        fail("kernel.global and kernel.local must have the same rank");
    }
    if (const Json* modifiers = find(node, "modifiers")) {
        if (!modifiers->is_array()) {
            fail("kernel.modifiers must be an array");
        }
        size_t index = 0;
        for (const Json& entry: *modifiers) {
            const std::string what =
                "kernel.modifiers[" + std::to_string(index++) + "]";
            expect_object(entry, what);
            expect_keys(entry, what, {"target", "op", "factors"});
            ThreadSizeModifier modifier;
            std::string target = require_string(entry, "target", what);
            if (target == "global") {
                modifier.target = SizeTarget::global;
            } else if (target == "local") {
                modifier.target = SizeTarget::local;
            } else {
                fail(what + ".target must be \"global\" or \"local\"");
            }
            std::string op = require_string(entry, "op", what);
            if (op == "multiply") {
                modifier.op = SizeOp::multiply;
            } else if (op == "divide") {
                modifier.op = SizeOp::divide;
            } else {
                fail(what + ".op must be \"multiply\" or \"divide\"");
            }
            const Json* factors = find(entry, "factors");
            if (!factors || !factors->is_array() || factors->empty()) {
                fail(what + ".factors must be a non-empty array of strings");
            }
            for (const Json& factor: *factors) {
                if (!factor.is_string()) {
                    fail(what + ".factors must contain strings only");
                }
                modifier.factors.push_back(factor.get<std::string>());
            }
            kernel.modifiers.push_back(std::move(modifier));
        }
    }
    kernel.local_mem_expr = optional_string(node, "local_mem", "kernel", "");
    if (const Json* arguments = find(node, "arguments")) {
        if (!arguments->is_array()) {
            fail("kernel.arguments must be an array");
        }
        size_t index = 0;
        for (const Json& entry: *arguments) {
            kernel.arguments.push_back(parse_argument(entry, index++));
        }
    }
    return kernel;
}

/// Parses {"parameters": {...}, "constraints": [...]}. Template jobs may
/// only add constraints; custom jobs must declare parameters.
inline void parse_space(const Json& node, SearchSpace& space,
                        bool is_template) {
    expect_object(node, "space");
    expect_keys(node, "space", {"parameters", "constraints"});
    if (const Json* parameters = find(node, "parameters")) {
        if (is_template) {
            fail("space.parameters cannot be combined with a template "
                 "(templates define their own parameters)");
        }
        expect_object(*parameters, "space.parameters");
        for (const auto& [name, values]: parameters->items()) {
            if (!values.is_array() || values.empty()) {
                fail("space.parameters." + name
                     + " must be a non-empty array of non-negative integers");
            }
            std::vector<Value> list;
            for (const Json& value: values) {
                if (!value.is_number_unsigned()) {
                    fail("space.parameters." + name
                         + " must contain non-negative integers only");
                }
                list.push_back(value.get<Value>());
            }
            try {
                space.add_parameter(name, std::move(list));
            } catch (const Error& err) {
                fail(err.what());
            }
        }
    }
    if (const Json* constraints = find(node, "constraints")) {
        if (!constraints->is_array()) {
            fail("space.constraints must be an array of expressions");
        }
        for (const Json& expr: *constraints) {
            if (!expr.is_string()) {
                fail("space.constraints must contain strings only");
            }
            try {
                space.add_constraint(expr.get<std::string>());
            } catch (const Error& err) {
                fail(err.what());
            }
        }
    }
}

inline ConvProblem parse_conv_problem(const Json* node) {
    ConvProblem problem;
    if (node) {
        expect_object(*node, "problem");
        expect_keys(*node, "problem", {"x", "y", "filter", "weight", "seed"});
        problem.x = static_cast<size_t>(
            optional_unsigned(*node, "x", "problem", problem.x));
        problem.y = static_cast<size_t>(
            optional_unsigned(*node, "y", "problem", problem.y));
        problem.filter = static_cast<int>(optional_unsigned(
            *node, "filter", "problem",
            static_cast<uint64_t>(problem.filter)));
        problem.weight = static_cast<float>(
            optional_number(*node, "weight", "problem", problem.weight));
        problem.seed = optional_unsigned(*node, "seed", "problem",
                                         problem.seed);
    }
    try {
        problem.validate();
    } catch (const Error& err) {
        fail(err.what());
    }
    return problem;
}

inline GemmProblem parse_gemm_problem(const Json* node) {
    GemmProblem problem;
    if (node) {
        expect_object(*node, "problem");
        expect_keys(*node, "problem", {"m", "n", "k", "alpha", "beta", "seed"});
        problem.m = static_cast<size_t>(
            optional_unsigned(*node, "m", "problem", problem.m));
        problem.n = static_cast<size_t>(
            optional_unsigned(*node, "n", "problem", problem.n));
        problem.k = static_cast<size_t>(
            optional_unsigned(*node, "k", "problem", problem.k));
        problem.alpha = static_cast<float>(
            optional_number(*node, "alpha", "problem", problem.alpha));
        problem.beta = static_cast<float>(
            optional_number(*node, "beta", "problem", problem.beta));
        problem.seed = optional_unsigned(*node, "seed", "problem",
                                         problem.seed);
    }
    try {
        problem.validate();
    } catch (const Error& err) {
        fail(err.what());
    }
    return problem;
}

inline std::unique_ptr<Backend> parse_backend(
        const Json* node, SyntheticModel default_model,
        const std::filesystem::path& base_dir) {
    if (!node) {
        return std::make_unique<SyntheticBackend>(
            SyntheticSpec{default_model});
    }
    expect_object(*node, "backend");
    std::string kind = require_string(*node, "kind", "backend");
    if (kind == "synthetic") {
        expect_keys(*node, "backend",
                    {"kind", "model", "base_time_ms", "noise", "noise_seed",
                     "failure_rate"});
        SyntheticSpec spec;
        spec.model = default_model;
        if (const Json* model = find(*node, "model")) {
            if (!model->is_string()) {
                fail("backend.model must be a string");
            }
            try {
                spec.model = synthetic_model_from(model->get<std::string>());
            } catch (const Error& err) {
                fail(err.what());
            }
        }
        spec.base_time_ms = optional_number(*node, "base_time_ms", "backend",
                                            spec.base_time_ms);
        spec.noise = optional_number(*node, "noise", "backend", spec.noise);
        spec.noise_seed = optional_unsigned(*node, "noise_seed", "backend",
                                            spec.noise_seed);
        spec.failure_rate = optional_number(*node, "failure_rate", "backend",
                                            spec.failure_rate);
        if (spec.noise < 0.0 || spec.failure_rate < 0.0
            || spec.failure_rate > 1.0) {
            fail("backend noise must be >= 0 and failure_rate within [0, 1]");
        }
        return std::make_unique<SyntheticBackend>(spec);
    }
    if (kind == "replay") {
        expect_keys(*node, "backend", {"kind", "path"});
        std::filesystem::path path = require_string(*node, "path", "backend");
        if (path.is_relative()) {
            path = base_dir / path;  // replay tables live next to their job
        }
        try {
            return std::make_unique<ReplayBackend>(
                ReplayBackend::load(path.string()));
        } catch (const Error& err) {
            fail(err.what());
        }
    }
    if (kind == "external") {
        expect_keys(*node, "backend", {"kind", "argv", "timeout_ms",
                                       "workers"});
        const Json* argv = find(*node, "argv");
        if (!argv || !argv->is_array() || argv->empty()) {
            fail("backend.argv must be a non-empty array of strings");
        }
        std::vector<std::string> command;
        for (const Json& part: *argv) {
            if (!part.is_string()) {
                fail("backend.argv must contain strings only");
            }
            command.push_back(part.get<std::string>());
        }
        int timeout_ms = static_cast<int>(optional_unsigned(
            *node, "timeout_ms", "backend", 60000));
        int workers = static_cast<int>(optional_unsigned(
            *node, "workers", "backend", 1));
        if (timeout_ms <= 0 || workers <= 0) {
            fail("backend timeout_ms and workers must be positive");
        }
        try {
            return std::make_unique<ExternalBackend>(std::move(command),
                                                     timeout_ms, workers);
        } catch (const Error& err) {
            fail(err.what());
        }
    }
    throw BackendUnavailable(kind);
}

inline LoadedJob parse_job(const Json& root,
                           const std::filesystem::path& base_dir) {
    expect_object(root, "the job file");
    expect_keys(root, "the job file",
                {"template", "problem", "kernel", "space", "device", "backend",
                 "strategy", "seed", "repetitions", "verify", "output"});

    const Json* template_node = find(root, "template");
    const Json* kernel_node = find(root, "kernel");
    if (template_node && kernel_node) {
        fail("\"template\" and \"kernel\" are mutually exclusive");
    }
    if (!template_node && !kernel_node) {
        fail("the job needs either a \"template\" or a \"kernel\"");
    }
    if (!template_node && find(root, "problem")) {
        fail("\"problem\" only makes sense with a template");
    }

    LoadedJob loaded;
    SyntheticModel default_model = SyntheticModel::hash_random;
    std::function<std::vector<Buffer>()> reference;

    if (template_node) {
        if (!template_node->is_string()) {
            fail("template must be a string");
        }
        const std::string name = template_node->get<std::string>();
        if (name == "conv") {
            ConvProblem problem = parse_conv_problem(find(root, "problem"));
            loaded.job.kernel = conv_kernel(problem);
            loaded.job.space = conv_space();
            default_model = SyntheticModel::conv_like;
            reference = [problem] {
                return std::vector<Buffer>{Buffer(conv_reference(problem))};
            };
        } else if (name == "gemm") {
            GemmProblem problem = parse_gemm_problem(find(root, "problem"));
            loaded.job.kernel = gemm_kernel(problem);
            loaded.job.space = gemm_space();
            default_model = SyntheticModel::gemm_like;
            reference = [problem] {
                return std::vector<Buffer>{Buffer(gemm_reference(problem))};
            };
        } else {
            fail("unknown template \"" + name
                 + "\" (available: conv, gemm)");
        }
    } else {
        loaded.job.kernel = parse_kernel(*kernel_node);
    }

    if (const Json* space = find(root, "space")) {
        parse_space(*space, loaded.job.space, template_node != nullptr);
    }
    if (loaded.job.space.parameters().empty()) {
        fail("the job defines no parameters (add space.parameters)");
    }

    if (const Json* device = find(root, "device")) {
        loaded.job.device = parse_device(*device);
    } else {
        loaded.job.device = device_preset("K40m");
    }

    if (const Json* strategy = find(root, "strategy")) {
        loaded.job.strategy = parse_strategy(*strategy);
    }

    loaded.job.seed = optional_unsigned(root, "seed", "the job file",
                                        loaded.job.seed);
    uint64_t repetitions = optional_unsigned(
        root, "repetitions", "the job file",
        static_cast<uint64_t>(loaded.job.repetitions));
    if (repetitions == 0) {
        fail("repetitions must be at least 1");
    }
    loaded.job.repetitions = static_cast<int>(repetitions);

    if (const Json* verify = find(root, "verify")) {
        if (!verify->is_boolean()) {
            fail("verify must be a boolean");
        }
        loaded.job.verify = verify->get<bool>();
    }
    if (loaded.job.verify) {
        if (!reference) {
            fail("verify: true requires a built-in template (custom kernels "
                 "have no reference oracle)");
        }
        loaded.job.reference = std::move(reference);
    }

    loaded.output = optional_string(root, "output", "the job file",
                                    loaded.output);
    loaded.backend = parse_backend(find(root, "backend"), default_model,
                                   base_dir);
    return loaded;
}

}  // namespace jobdetail

/// Parses a job from JSON text. `base_dir` anchors relative paths named by
/// the job (e.g. a replay table).
inline LoadedJob parse_job(const std::string& text,
                           const std::filesystem::path& base_dir = ".") {
    jobdetail::Json root;
    try {
        root = jobdetail::Json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw JobFileError(std::string("invalid JSON: ") + err.what());
    }
    return jobdetail::parse_job(root, base_dir);
}

/// Loads and parses a job file from disk.
inline LoadedJob load_job(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw JobFileError("cannot open \"" + path + "\"");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_job(text.str(),
                     std::filesystem::path(path).parent_path());
}

}  // namespace ktune
