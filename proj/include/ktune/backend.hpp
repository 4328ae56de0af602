#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ktune/arguments.hpp"
#include "ktune/config.hpp"
#include "ktune/errors.hpp"
#include "ktune/format.hpp"
#include "ktune/landscapes.hpp"
#include "ktune/rng.hpp"

namespace ktune {

enum class Status { success, compile_error, runtime_error, missing };

inline const char* to_string(Status status) {
    switch (status) {
        case Status::success: return "ok";
        case Status::compile_error: return "compile_error";
        case Status::runtime_error: return "runtime_error";
        case Status::missing: return "missing";
    }
    return "?";
}

inline Status status_from(const std::string& name) {
    if (name == "ok") return Status::success;
    if (name == "compile_error") return Status::compile_error;
    if (name == "runtime_error") return Status::runtime_error;
    if (name == "missing") return Status::missing;
    throw Error("unknown status \"" + name + "\"");
}

/// One kernel launch to price: the configuration, the resolved thread sizes
/// and the argument list. `repetitions` asks the backend to take the best of
/// N timed runs; `want_outputs` asks it to return full output buffers (not
/// just digests) so results can be verified.
struct EvaluationRequest {
    std::string kernel_name;
    std::string source_ref;
    Configuration config;
    std::vector<size_t> global;
    std::vector<size_t> local;
    std::vector<ArgumentSpec> arguments;
    std::string device_name;
    int repetitions = 1;
    bool want_outputs = false;
};

struct EvaluationResult {
    Status status = Status::missing;
    double time_ms = 0.0;
    std::vector<std::string> output_digests;  // one per output argument
    std::vector<Buffer> outputs;              // filled when want_outputs
    std::string message;

    bool ok() const {
        return status == Status::success;
    }
};

/// Prices configurations. Implementations must be deterministic for a fixed
/// request; `concurrency_safe` advertises whether evaluate may be called
/// from several threads at once.
class Backend {
  public:
    virtual ~Backend() = default;
    virtual EvaluationResult evaluate(const EvaluationRequest& request) = 0;
    virtual bool concurrency_safe() const {
        return false;
    }
    virtual std::string name() const = 0;
};

// =============================================================================
// Synthetic backend
// =============================================================================

enum class SyntheticModel { conv_like, gemm_like, hash_random };

inline const char* to_string(SyntheticModel model) {
    switch (model) {
        case SyntheticModel::conv_like: return "conv-like";
        case SyntheticModel::gemm_like: return "gemm-like";
        case SyntheticModel::hash_random: return "hash-random";
    }
    return "?";
}

inline SyntheticModel synthetic_model_from(const std::string& name) {
    if (name == "conv-like") return SyntheticModel::conv_like;
    if (name == "gemm-like") return SyntheticModel::gemm_like;
    if (name == "hash-random") return SyntheticModel::hash_random;
    throw Error("unknown synthetic model \"" + name
                + "\" (expected conv-like, gemm-like or hash-random)");
}

/// Tuning knobs of the synthetic cost models. `base_time_ms` of 0 picks the
/// model's default. `failure_rate` injects deterministic compile failures on
/// that fraction of configurations (selected by hash, stable per seed).
struct SyntheticSpec {
    SyntheticModel model = SyntheticModel::hash_random;
    double base_time_ms = 0.0;
    uint64_t noise_seed = 1;
    double noise = 0.02;
    double failure_rate = 0.0;

    double effective_base() const {
        if (base_time_ms > 0.0) {
            return base_time_ms;
        }
        switch (model) {
            case SyntheticModel::conv_like: return 2.0;
            case SyntheticModel::gemm_like: return 3.0;
            case SyntheticModel::hash_random: return 5.0;
        }
        return 1.0;
    }
};

namespace detail {

inline Value required(const Configuration& config, const char* name,
                      const char* model) {
    if (!config.has(name)) {
        throw UnknownParameterSet(std::string("the ") + model
                                  + " model needs parameter \"" + name
                                  + "\"");
    }
    return config.at(name);
}

/// Multiplicative cost surface for convolution-shaped parameter sets. The
/// shape rewards large-but-not-maximal work-groups, heavy coarsening backed
/// by local memory, and moderate vector widths; it punishes coarsening
/// without a cache and adds a narrow sweet spot so only a thin band of
/// configurations approaches the optimum.
inline double conv_like_factor(const Configuration& config) {
    const char* model = "conv-like";
    Value xwg = required(config, "XWG", model);
    Value ywg = required(config, "YWG", model);
    Value xwpt = required(config, "XWPT", model);
    Value ywpt = required(config, "YWPT", model);
    Value local = required(config, "LOCAL", model);
    Value vw = required(config, "VW", model);
    Value pad = required(config, "PAD", model);
    Value unr = required(config, "UNR", model);

    double factor = 1.0;
    Value wg = xwg * ywg;
    if (wg <= 64) factor *= 1.35;
    else if (wg <= 128) factor *= 1.12;
    else if (wg <= 256) factor *= 1.00;
    else if (wg <= 512) factor *= 0.96;
    else if (wg <= 1024) factor *= 1.04;
    else factor *= 1.30;

    Value wpt = xwpt * ywpt;
    if (wpt <= 1) factor *= 1.60;
    else if (wpt <= 2) factor *= 1.35;
    else if (wpt <= 4) factor *= 1.15;
    else if (wpt <= 8) factor *= 1.00;
    else if (wpt <= 16) factor *= 0.92;
    else if (wpt <= 32) factor *= 0.90;
    else factor *= 1.05;

    if (wpt >= 32 && local == 0) {
        factor *= 4.0;  // heavy coarsening with no cache thrashes off-chip
    }

    if (local == 0) factor *= 1.25;
    else if (local == 2) factor *= 0.94;

    if (vw == 1) factor *= 1.15;
    else if (vw == 4) factor *= 0.96;
    else if (vw == 8) factor *= 1.02;

    if (pad == 1 && local >= 1) {
        factor *= 0.97;
    }
    if (unr == 1) {
        factor *= 0.92;
    }
    // Narrow synergy: vectorized, padded local-memory tiles with heavy
    // coarsening get an extra kick, so the near-optimal band stays thin.
    if (local == 2 && pad == 1 && vw >= 2 && wpt >= 16 && wg >= 256) {
        factor *= 0.85;
    }
    return factor;
}

/// Multiplicative cost surface for matrix-multiplication-shaped parameter
/// sets: big register tiles win until they spill, local-memory caching of
/// both inputs is the main lever, and reshaping/striding/vectors trim the
/// rest.
inline double gemm_like_factor(const Configuration& config) {
    const char* model = "gemm-like";
    Value mwg = required(config, "MWG", model);
    Value nwg = required(config, "NWG", model);
    Value kwg = required(config, "KWG", model);
    Value mdimc = required(config, "MDIMC", model);
    Value ndimc = required(config, "NDIMC", model);
    Value sa = required(config, "SA", model);
    Value sb = required(config, "SB", model);
    Value mdima = required(config, "MDIMA", model);
    Value ndimb = required(config, "NDIMB", model);
    Value strm = required(config, "STRM", model);
    Value strn = required(config, "STRN", model);
    Value vwm = required(config, "VWM", model);
    Value vwn = required(config, "VWN", model);
    Value kwi = required(config, "KWI", model);

    double factor = 1.0;
    Value wg = mdimc * ndimc;
    if (wg <= 64) factor *= 1.30;
    else if (wg <= 128) factor *= 1.08;
    else if (wg <= 256) factor *= 1.00;
    else if (wg <= 512) factor *= 0.97;
    else factor *= 1.02;

    Value reg = (mwg / mdimc) * (nwg / ndimc);
    if (reg <= 1) factor *= 1.70;
    else if (reg <= 2) factor *= 1.45;
    else if (reg <= 4) factor *= 1.25;
    else if (reg <= 8) factor *= 1.10;
    else if (reg <= 16) factor *= 1.00;
    else if (reg <= 32) factor *= 0.93;
    else if (reg <= 64) factor *= 0.90;
    else if (reg <= 128) factor *= 1.00;
    else factor *= 1.25;   // register spill

    if (kwg <= 16) factor *= 1.05;
    else if (kwg >= 128) factor *= 1.02;
    else if (kwg >= 64) factor *= 0.98;

    Value cached = sa + sb;
    if (cached == 2) factor *= 0.88;
    else if (cached == 1) factor *= 0.97;
    else factor *= 1.15;
    if (cached == 0 && reg >= 64) {
        factor *= 1.40;  // big tiles starve without local memory
    }

    if (kwi == 8) factor *= 0.95;

    auto vector_factor = [](Value vw) {
        if (vw == 1) return 1.08;
        if (vw == 4) return 0.95;
        return 1.0;
    };
    factor *= vector_factor(vwm);
    factor *= vector_factor(vwn);

    if (strm == 1) factor *= 0.985;
    if (strn == 1) factor *= 0.985;
    if (mdima == mdimc) factor *= 0.98;
    if (ndimb == ndimc) factor *= 0.98;
    return factor;
}

/// Positional scalar extraction: returns the values of the first `n` scalar
/// arguments if the argument list starts with exactly that many scalars.
inline std::optional<std::vector<double>> leading_scalars(
        const std::vector<ArgumentSpec>& args, size_t n) {
    if (args.size() < n) {
        return std::nullopt;
    }
    std::vector<double> values;
    for (size_t i = 0; i < n; ++i) {
        if (args[i].role != ArgRole::scalar) {
            return std::nullopt;
        }
        values.push_back(args[i].value);
    }
    return values;
}

}  // namespace detail

/// Deterministic stand-in for a real device: prices configurations from a
/// documented cost model plus configuration-keyed noise, and can synthesize
/// bit-exact kernel outputs for the two case-study kernels so verification
/// paths run end to end without hardware.
class SyntheticBackend: public Backend {
  public:
    explicit SyntheticBackend(SyntheticSpec spec = {}): spec_(spec) {}

    std::string name() const override {
        return std::string("synthetic:") + to_string(spec_.model);
    }

    bool concurrency_safe() const override {
        return true;
    }

    EvaluationResult evaluate(const EvaluationRequest& request) override {
        const std::string canonical = request.config.canonical();
        EvaluationResult result;
        if (spec_.failure_rate > 0.0
            && hash_unit(spec_.noise_seed ^ 0xfa11ed00ull, canonical)
                   < spec_.failure_rate) {
            result.status = Status::compile_error;
            result.message = "synthetic compile failure for " + canonical;
            return result;
        }
        result.status = Status::success;
        result.time_ms = model_time(request, canonical);
        if (!fill_outputs(request, result)) {
            return result;  // downgraded to runtime_error with a message
        }
        return result;
    }

    const SyntheticSpec& spec() const {
        return spec_;
    }

  private:
    double model_time(const EvaluationRequest& request,
                      const std::string& canonical) const {
        double base = spec_.effective_base() * problem_scale(request);
        double time = base;
        switch (spec_.model) {
            case SyntheticModel::conv_like:
                time = base * detail::conv_like_factor(request.config);
                break;
            case SyntheticModel::gemm_like:
                time = base * detail::gemm_like_factor(request.config);
                break;
            case SyntheticModel::hash_random:
                time = base * (0.2 + 2.0 * hash_unit(spec_.noise_seed,
                                                     canonical));
                break;
        }
        // Configuration-keyed jitter: deterministic, independent of
        // evaluation order, uniform in [0, noise).
        time *= 1.0 + spec_.noise * hash_unit(spec_.noise_seed, canonical);
        return time;
    }

    /// Cost scales with problem volume when the request carries the
    /// case-study scalar prefix; otherwise the base time stands alone.
    double problem_scale(const EvaluationRequest& request) const {
        if (spec_.model == SyntheticModel::conv_like) {
            auto scalars = detail::leading_scalars(request.arguments, 4);
            if (scalars) {
                double x = (*scalars)[0];
                double y = (*scalars)[1];
                double f = (*scalars)[2];
                if (x > 0 && y > 0 && f > 0) {
                    return x * y * f * f / (8192.0 * 4096.0 * 49.0);
                }
            }
        } else if (spec_.model == SyntheticModel::gemm_like) {
            auto scalars = detail::leading_scalars(request.arguments, 5);
            if (scalars) {
                double m = (*scalars)[0];
                double n = (*scalars)[1];
                double k = (*scalars)[2];
                if (m > 0 && n > 0 && k > 0) {
                    return m * n * k / (2048.0 * 2048.0 * 2048.0);
                }
            }
        }
        return 1.0;
    }

    /// Synthesizes kernel outputs via the CPU oracles when the caller wants
    /// them. Returns false after recording a runtime error if the argument
    /// list does not have the documented case-study layout.
    bool fill_outputs(const EvaluationRequest& request,
                      EvaluationResult& result) const {
        if (!request.want_outputs) {
            return true;
        }
        bool has_output = false;
        for (const ArgumentSpec& arg: request.arguments) {
            has_output = has_output || arg.role == ArgRole::output;
        }
        if (!has_output) {
            return true;
        }
        try {
            if (spec_.model == SyntheticModel::conv_like) {
                compute_conv_outputs(request, result);
            } else if (spec_.model == SyntheticModel::gemm_like) {
                compute_gemm_outputs(request, result);
            } else {
                result.status = Status::runtime_error;
                result.message =
                    "the hash-random model cannot synthesize kernel outputs";
                return false;
            }
        } catch (const Error& err) {
            result = EvaluationResult{};
            result.status = Status::runtime_error;
            result.message = err.what();
            return false;
        }
        return true;
    }

    static void expect_layout(bool ok, const std::string& what) {
        if (!ok) {
            throw Error("synthetic output synthesis: " + what);
        }
    }

    void compute_conv_outputs(const EvaluationRequest& request,
                              EvaluationResult& result) const {
        const auto& args = request.arguments;
        auto scalars = detail::leading_scalars(args, 4);
        expect_layout(scalars.has_value() && args.size() == 7,
                      "expected scalars X, Y, FILTER, W then image, filter "
                      "and output buffers");
        auto x = static_cast<size_t>((*scalars)[0]);
        auto y = static_cast<size_t>((*scalars)[1]);
        int f = static_cast<int>((*scalars)[2]);
        auto w = static_cast<float>((*scalars)[3]);
        expect_layout(args[4].role == ArgRole::input
                          && args[4].type == ElementType::f32
                          && args[5].role == ArgRole::input
                          && args[5].type == ElementType::f32
                          && args[6].role == ArgRole::output
                          && args[6].type == ElementType::f32,
                      "expected f32 image/filter inputs and an f32 output");
        BufferF32 image =
            std::get<BufferF32>(materialize_argument(args[4]));
        BufferF32 taps = std::get<BufferF32>(materialize_argument(args[5]));
        BufferF32 out = conv_apply(image, taps, x, y, f, w);
        expect_layout(out.size() == args[6].length,
                      "output length disagrees with X * Y");
        Buffer buffer(std::move(out));
        result.output_digests.push_back(digest_hex(buffer_digest(buffer)));
        result.outputs.push_back(std::move(buffer));
    }

    void compute_gemm_outputs(const EvaluationRequest& request,
                              EvaluationResult& result) const {
        const auto& args = request.arguments;
        auto scalars = detail::leading_scalars(args, 5);
        expect_layout(scalars.has_value() && args.size() == 8,
                      "expected scalars M, N, K, ALPHA, BETA then A, B and C "
                      "buffers");
        auto m = static_cast<size_t>((*scalars)[0]);
        auto n = static_cast<size_t>((*scalars)[1]);
        auto k = static_cast<size_t>((*scalars)[2]);
        auto alpha = static_cast<float>((*scalars)[3]);
        auto beta = static_cast<float>((*scalars)[4]);
        expect_layout(args[5].role == ArgRole::input
                          && args[6].role == ArgRole::input
                          && args[7].role == ArgRole::output
                          && args[5].type == ElementType::f32
                          && args[6].type == ElementType::f32
                          && args[7].type == ElementType::f32,
                      "expected f32 A/B inputs and an f32 C output");
        BufferF32 a = std::get<BufferF32>(materialize_argument(args[5]));
        BufferF32 b = std::get<BufferF32>(materialize_argument(args[6]));
        BufferF32 c = std::get<BufferF32>(materialize_argument(args[7]));
        BufferF32 out = gemm_apply(a, b, c, m, n, k, alpha, beta);
        expect_layout(out.size() == args[7].length,
                      "output length disagrees with M * N");
        Buffer buffer(std::move(out));
        result.output_digests.push_back(digest_hex(buffer_digest(buffer)));
        result.outputs.push_back(std::move(buffer));
    }

    SyntheticSpec spec_;
};

// =============================================================================
// Replay backend
// =============================================================================

/// Serves prices from a recorded `config,time_ms` CSV keyed by canonical
/// configuration encodings. Configurations without a row come back with
/// status `missing` (a failed evaluation, not an error).
class ReplayBackend: public Backend {
  public:
    explicit ReplayBackend(std::map<std::string, double> table):
        table_(std::move(table)) {}

    static ReplayBackend load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw Error("cannot open replay file \"" + path + "\"");
        }
        return parse(in);
    }

    static ReplayBackend parse(std::istream& in) {
        std::map<std::string, double> table;
        std::string line;
        size_t line_no = 0;
        bool saw_header = false;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (!saw_header) {
                if (line != "config,time_ms") {
                    throw MalformedReplayFile(
                        line_no, "expected header \"config,time_ms\"");
                }
                saw_header = true;
                continue;
            }
            if (line.empty()) {
                continue;
            }
            auto comma = line.find(',');
            if (comma == std::string::npos || comma == 0) {
                throw MalformedReplayFile(line_no,
                                          "expected \"config,time_ms\"");
            }
            std::string key = line.substr(0, comma);
            std::string text = line.substr(comma + 1);
            double time_ms = 0.0;
            try {
                size_t used = 0;
                time_ms = std::stod(text, &used);
                if (used != text.size()) {
                    throw std::invalid_argument("");
                }
            } catch (const std::exception&) {
                throw MalformedReplayFile(line_no, "unparsable time \"" + text
                                                       + "\"");
            }
            if (!(time_ms > 0.0)) {
                throw NonPositiveTime(time_ms);
            }
            if (!table.emplace(std::move(key), time_ms).second) {
                throw MalformedReplayFile(line_no,
                                          "duplicate configuration key");
            }
        }
        if (!saw_header) {
            throw MalformedReplayFile(1, "empty file (missing header)");
        }
        return ReplayBackend(std::move(table));
    }

    /// Writes a table in the exact format `load` reads (keys sorted).
    static void save(const std::string& path,
                     const std::map<std::string, double>& table) {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw Error("cannot write replay file \"" + path + "\"");
        }
        out << "config,time_ms\n";
        for (const auto& [key, time_ms]: table) {
            out << key << ',' << format_double(time_ms) << '\n';
        }
    }

    std::string name() const override {
        return "replay";
    }

    bool concurrency_safe() const override {
        return true;
    }

    EvaluationResult evaluate(const EvaluationRequest& request) override {
        EvaluationResult result;
        auto it = table_.find(request.config.canonical());
        if (it == table_.end()) {
            result.status = Status::missing;
            result.message = "no recorded time for "
                             + request.config.canonical();
            return result;
        }
        result.status = Status::success;
        result.time_ms = it->second;
        return result;
    }

    const std::map<std::string, double>& table() const {
        return table_;
    }

  private:
    std::map<std::string, double> table_;
};

}  // namespace ktune
