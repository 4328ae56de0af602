#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ktune/arguments.hpp"
#include "ktune/config.hpp"
#include "ktune/errors.hpp"
#include "ktune/kernel.hpp"
#include "ktune/space.hpp"

namespace ktune {

// =============================================================================
// 2D convolution case study
// =============================================================================

/// Problem instance: B[x,y] = w * sum_{i,j} F[i,j] * A[x+i, y+j] over an
/// fx x fy filter, where A is the input image padded by a halo of
/// (filter-1)/2 on each side. Input and filter contents are derived
/// deterministically from `seed`.
struct ConvProblem {
    size_t x = 8192;
    size_t y = 4096;
    int filter = 7;  // odd, >= 1
    float weight = 1.0f;
    uint64_t seed = 2026;

    int halo() const {
        return (filter - 1) / 2;
    }
    size_t padded_x() const {
        return x + static_cast<size_t>(filter) - 1;
    }
    size_t padded_y() const {
        return y + static_cast<size_t>(filter) - 1;
    }
    uint64_t filter_seed() const {
        return seed ^ 0x9e3779b97f4a7c15ull;
    }

    void validate() const {
        if (x == 0 || y == 0) {
            throw Error("convolution image dimensions must be positive");
        }
        if (filter < 1 || filter % 2 == 0) {
            throw Error("convolution filter size must be odd and positive");
        }
    }
};

/// The tunable parameters of the convolution kernel:
///   XWG, YWG    2D work-group dimensions
///   XWPT, YWPT  work per thread (thread coarsening) per dimension
///   LOCAL       caching scheme (0 = off-chip only, 1 = local memory,
///               2 = local memory with extra halo loaders)
///   VW          vector width for loads
///   PAD         extra padding column in the local tile (needs LOCAL >= 1)
///   UNR         inner-loop unrolling
inline SearchSpace conv_space() {
    SearchSpace space;
    space.add_parameter("XWG", {8, 16, 32, 64});
    space.add_parameter("YWG", {8, 16, 32, 64});
    space.add_parameter("XWPT", {1, 2, 4, 8});
    space.add_parameter("YWPT", {1, 2, 4, 8});
    space.add_parameter("LOCAL", {0, 1, 2});
    space.add_parameter("VW", {1, 2, 4, 8});
    space.add_parameter("PAD", {0, 1});
    space.add_parameter("UNR", {0, 1}, {"no", "yes"});
    space.add_constraint("VW <= XWPT && XWPT % VW == 0");
    space.add_constraint("PAD == 0 || LOCAL >= 1");
    return space;
}

/// Kernel description for a given problem instance. Arguments, in order:
/// scalars X, Y, FILTER (i32) and W (f32), then the padded input image, the
/// filter taps, and the output image.
inline KernelSpec conv_kernel(const ConvProblem& problem) {
    problem.validate();
    KernelSpec kernel;
    kernel.name = "conv";
    kernel.source_ref = "conv.cl";
    kernel.base_global = {problem.x, problem.y};
    kernel.base_local = {1, 1};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide,
                           {"XWPT", "YWPT"}},
        ThreadSizeModifier{SizeTarget::local, SizeOp::multiply,
                           {"XWG", "YWG"}},
    };
    std::string halo2 = std::to_string(2 * problem.halo());
    kernel.local_mem_expr = "(LOCAL >= 1) * 4 * (XWG * XWPT + " + halo2
                            + " + PAD) * (YWG * YWPT + " + halo2 + ")";
    kernel.arguments = {
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.x), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.y), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.filter), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::f32, 0,
                     static_cast<double>(problem.weight), ""},
        ArgumentSpec{ArgRole::input, ElementType::f32,
                     problem.padded_x() * problem.padded_y(), 0.0,
                     "uniform:" + std::to_string(problem.seed)},
        ArgumentSpec{ArgRole::input, ElementType::f32,
                     static_cast<size_t>(problem.filter)
                         * static_cast<size_t>(problem.filter),
                     0.0, "uniform:" + std::to_string(problem.filter_seed())},
        ArgumentSpec{ArgRole::output, ElementType::f32, problem.x * problem.y,
                     0.0, "none"},
    };
    return kernel;
}

/// Applies an fxf filter to a padded image (width x + f - 1). Shared by the
/// CPU reference and by backends that synthesize kernel outputs.
inline BufferF32 conv_apply(const BufferF32& image, const BufferF32& taps,
                            size_t x, size_t y, int f, float weight) {
    const size_t width = x + static_cast<size_t>(f) - 1;
    if (image.size() != width * (y + static_cast<size_t>(f) - 1)
        || taps.size() != static_cast<size_t>(f) * static_cast<size_t>(f)) {
        throw ShapeMismatch("convolution input sizes do not match the "
                            "problem dimensions");
    }
    BufferF32 out(x * y, 0.0f);
    for (size_t row = 0; row < y; ++row) {
        for (size_t col = 0; col < x; ++col) {
            float acc = 0.0f;
            for (int j = 0; j < f; ++j) {
                const float* line = image.data() + (row + j) * width + col;
                const float* tap = taps.data() + static_cast<size_t>(j) * f;
                for (int i = 0; i < f; ++i) {
                    acc += tap[i] * line[i];
                }
            }
            out[row * x + col] = weight * acc;
        }
    }
    return out;
}

/// CPU oracle for the convolution output.
inline BufferF32 conv_reference(const ConvProblem& problem) {
    problem.validate();
    KernelSpec kernel = conv_kernel(problem);
    BufferF32 image = std::get<BufferF32>(materialize_argument(
        kernel.arguments[4]));
    BufferF32 taps = std::get<BufferF32>(materialize_argument(
        kernel.arguments[5]));
    return conv_apply(image, taps, problem.x, problem.y, problem.filter,
                      problem.weight);
}

struct ConvMetrics {
    double gflops = 0.0;
    double gbs = 0.0;
};

/// Throughput of a run: (1 + 2*Xf*Yf) flops per output element, and one
/// 4-byte read plus one 4-byte write of the image per element.
inline ConvMetrics conv_metrics(const ConvProblem& problem, double time_ms) {
    if (!(time_ms > 0.0)) {
        throw NonPositiveTime(time_ms);
    }
    double elements = static_cast<double>(problem.x)
                      * static_cast<double>(problem.y);
    double f = static_cast<double>(problem.filter);
    double seconds = time_ms / 1e3;
    ConvMetrics metrics;
    metrics.gflops = (1.0 + 2.0 * f * f) * elements / seconds / 1e9;
    metrics.gbs = 2.0 * elements * 4.0 / seconds / 1e9;
    return metrics;
}

// =============================================================================
// Matrix-multiplication case study
// =============================================================================

/// Problem instance: C = alpha * A^T * B + beta * C with A stored K x M
/// row-major (so A^T(m,k) = A[k*M + m]), B stored K x N row-major and C
/// stored M x N row-major. Matrix contents derive from `seed`.
struct GemmProblem {
    size_t m = 2048;
    size_t n = 2048;
    size_t k = 2048;
    float alpha = 1.0f;
    float beta = 0.0f;
    uint64_t seed = 2026;

    uint64_t a_seed() const {
        return seed;
    }
    uint64_t b_seed() const {
        return seed ^ 0x9e3779b97f4a7c15ull;
    }
    uint64_t c_seed() const {
        return seed ^ 0xc2b2ae3d27d4eb4full;
    }

    void validate() const {
        if (m == 0 || n == 0 || k == 0) {
            throw Error("matrix dimensions must be positive");
        }
    }
};

/// The tunable parameters of the matrix-multiplication kernel:
///   MWG, NWG, KWG   work-group tile sizes in the three matrix dimensions
///   MDIMC, NDIMC    2D work-group (thread block) dimensions
///   SA, SB          manual local-memory caching of the A / B tiles
///   MDIMA, NDIMB    local-memory re-shaping dimensions
///   STRM, STRN      strided off-chip access for A/C and B
///   VWM, VWN        vector widths for A/C and B
///   KWI             unroll factor of the K-loop
inline SearchSpace gemm_space() {
    SearchSpace space;
    space.add_parameter("MWG", {16, 32, 64, 128});
    space.add_parameter("NWG", {16, 32, 64, 128});
    space.add_parameter("KWG", {16, 32, 64, 128});
    space.add_parameter("MDIMC", {8, 16, 32});
    space.add_parameter("NDIMC", {8, 16, 32});
    space.add_parameter("SA", {0, 1}, {"no", "yes"});
    space.add_parameter("SB", {0, 1}, {"no", "yes"});
    space.add_parameter("MDIMA", {8, 16, 32});
    space.add_parameter("NDIMB", {8, 16, 32});
    space.add_parameter("STRM", {0, 1}, {"no", "yes"});
    space.add_parameter("STRN", {0, 1}, {"no", "yes"});
    space.add_parameter("VWM", {1, 2, 4, 8});
    space.add_parameter("VWN", {1, 2, 4, 8});
    space.add_parameter("KWI", {2, 8});
    // Work-group tiles decompose exactly over the thread block.
    space.add_constraint("MWG % MDIMC == 0");
    space.add_constraint("NWG % NDIMC == 0");
    // Local-memory re-shaping: MDIMC*NDIMC = MDIMA*KDIMA = KDIMB*NDIMB with
    // the derived KDIMA/KDIMB dividing the KWG tile evenly.
    space.add_constraint("(MDIMC * NDIMC) % MDIMA == 0");
    space.add_constraint("(MDIMC * NDIMC) % NDIMB == 0");
    space.add_constraint("KWG % ((MDIMC * NDIMC) / MDIMA) == 0");
    space.add_constraint("KWG % ((MDIMC * NDIMC) / NDIMB) == 0");
    // The K-loop unrolls evenly.
    space.add_constraint("KWG % KWI == 0");
    // Vector widths divide the per-thread register tile.
    space.add_constraint("(MWG / MDIMC) % VWM == 0");
    space.add_constraint("(NWG / NDIMC) % VWN == 0");
    return space;
}

/// Kernel description. Arguments, in order: scalars M, N, K (i32), ALPHA,
/// BETA (f32), then matrices A, B (inputs) and C (in/out).
inline KernelSpec gemm_kernel(const GemmProblem& problem) {
    problem.validate();
    KernelSpec kernel;
    kernel.name = "gemm";
    kernel.source_ref = "gemm.cl";
    kernel.base_global = {problem.m, problem.n};
    kernel.base_local = {1, 1};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::multiply,
                           {"MDIMC", "NDIMC"}},
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide,
                           {"MWG", "NWG"}},
        ThreadSizeModifier{SizeTarget::local, SizeOp::multiply,
                           {"MDIMC", "NDIMC"}},
    };
    kernel.local_mem_expr =
        "SA * 4 * KWG * MWG + SB * 4 * KWG * NWG";
    kernel.arguments = {
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.m), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.n), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::i32, 0,
                     static_cast<double>(problem.k), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::f32, 0,
                     static_cast<double>(problem.alpha), ""},
        ArgumentSpec{ArgRole::scalar, ElementType::f32, 0,
                     static_cast<double>(problem.beta), ""},
        ArgumentSpec{ArgRole::input, ElementType::f32, problem.k * problem.m,
                     0.0, "uniform:" + std::to_string(problem.a_seed())},
        ArgumentSpec{ArgRole::input, ElementType::f32, problem.k * problem.n,
                     0.0, "uniform:" + std::to_string(problem.b_seed())},
        ArgumentSpec{ArgRole::output, ElementType::f32, problem.m * problem.n,
                     0.0, "uniform:" + std::to_string(problem.c_seed())},
    };
    return kernel;
}

/// Computes alpha * A^T * B + beta * C on raw buffers (A is K x M row-major,
/// B is K x N, C is M x N). Shared by the CPU reference and by backends.
inline BufferF32 gemm_apply(const BufferF32& a, const BufferF32& b,
                            const BufferF32& c, size_t m, size_t n, size_t k,
                            float alpha, float beta) {
    if (a.size() != k * m || b.size() != k * n || c.size() != m * n) {
        throw ShapeMismatch(
            "matrix sizes do not match the problem dimensions");
    }
    BufferF32 out(m * n, 0.0f);
    for (size_t row = 0; row < m; ++row) {
        for (size_t col = 0; col < n; ++col) {
            float acc = 0.0f;
            for (size_t kk = 0; kk < k; ++kk) {
                // A^T(row, kk) = A[kk*M + row]
                acc += a[kk * m + row] * b[kk * n + col];
            }
            out[row * n + col] = alpha * acc + beta * c[row * n + col];
        }
    }
    return out;
}

/// CPU oracle for the updated C matrix.
inline BufferF32 gemm_reference(const GemmProblem& problem) {
    problem.validate();
    KernelSpec kernel = gemm_kernel(problem);
    BufferF32 a = std::get<BufferF32>(materialize_argument(kernel.arguments[5]));
    BufferF32 b = std::get<BufferF32>(materialize_argument(kernel.arguments[6]));
    BufferF32 c = std::get<BufferF32>(materialize_argument(kernel.arguments[7]));
    return gemm_apply(a, b, c, problem.m, problem.n, problem.k, problem.alpha,
                      problem.beta);
}

/// Throughput: 2*M*N*K flops per multiplication.
inline double gemm_gflops(const GemmProblem& problem, double time_ms) {
    if (!(time_ms > 0.0)) {
        throw NonPositiveTime(time_ms);
    }
    double seconds = time_ms / 1e3;
    return 2.0 * static_cast<double>(problem.m)
           * static_cast<double>(problem.n) * static_cast<double>(problem.k)
           / seconds / 1e9;
}

// =============================================================================
// Best-known configurations
// =============================================================================

namespace detail {

using NamedValues = std::vector<std::pair<const char*, Value>>;

inline Configuration assemble(const SearchSpace& space,
                              const NamedValues& entries) {
    std::vector<Value> values(space.parameters().size());
    for (const auto& [name, value]: entries) {
        values[space.parameter_index(name)] = value;
    }
    return space.make_configuration(std::move(values));
}

}  // namespace detail

/// The known-best tuned configuration for the convolution kernel on a given
/// device and filter size, expressed in `space`'s parameter order.
inline Configuration conv_best_known(const SearchSpace& space,
                                     const std::string& device, int filter) {
    using NV = detail::NamedValues;
    auto row = [&](Value xwg, Value ywg, Value xwpt, Value ywpt, Value local,
                   Value vw, Value pad, Value unr) {
        return detail::assemble(space, NV{{"XWG", xwg},
                                          {"YWG", ywg},
                                          {"XWPT", xwpt},
                                          {"YWPT", ywpt},
                                          {"LOCAL", local},
                                          {"VW", vw},
                                          {"PAD", pad},
                                          {"UNR", unr}});
    };
    if (device == "K40m") {
        if (filter == 3) return row(32, 8, 1, 8, 0, 1, 0, 1);
        if (filter == 7) return row(32, 16, 2, 4, 2, 2, 1, 1);
        if (filter == 11) return row(32, 8, 2, 8, 2, 2, 1, 1);
        throw Error("no known-best convolution entry for filter size "
                    + std::to_string(filter) + " on " + device);
    }
    if (device == "GTX480") {
        if (filter == 3) return row(64, 8, 1, 4, 0, 1, 0, 1);
        if (filter == 7) return row(32, 8, 2, 8, 2, 2, 0, 1);
        if (filter == 11) return row(32, 8, 2, 4, 1, 2, 0, 1);
        throw Error("no known-best convolution entry for filter size "
                    + std::to_string(filter) + " on " + device);
    }
    throw UnknownDevice(device);
}

inline std::vector<std::string> conv_best_known_devices() {
    return {"K40m", "GTX480"};
}

/// The known-best tuned configuration for matrix-multiplication on a given
/// device, expressed in `space`'s parameter order.
inline Configuration gemm_best_known(const SearchSpace& space,
                                     const std::string& device) {
    using NV = detail::NamedValues;
    auto row = [&](Value mwg, Value nwg, Value kwg, Value mdimc, Value ndimc,
                   Value sa, Value sb, Value mdima, Value ndimb, Value strm,
                   Value strn, Value vwm, Value vwn, Value kwi) {
        return detail::assemble(space, NV{{"MWG", mwg},
                                          {"NWG", nwg},
                                          {"KWG", kwg},
                                          {"MDIMC", mdimc},
                                          {"NDIMC", ndimc},
                                          {"SA", sa},
                                          {"SB", sb},
                                          {"MDIMA", mdima},
                                          {"NDIMB", ndimb},
                                          {"STRM", strm},
                                          {"STRN", strn},
                                          {"VWM", vwm},
                                          {"VWN", vwn},
                                          {"KWI", kwi}});
    };
    if (device == "K40m") {
        return row(128, 128, 16, 16, 16, 1, 1, 32, 16, 1, 0, 2, 1, 8);
    }
    if (device == "GTX480") {
        return row(64, 64, 32, 8, 16, 1, 1, 32, 32, 1, 0, 2, 2, 8);
    }
    if (device == "HD7970") {
        return row(128, 128, 32, 16, 16, 1, 1, 32, 32, 0, 1, 4, 4, 2);
    }
    if (device == "Iris5100") {
        return row(64, 64, 16, 8, 8, 1, 1, 8, 16, 1, 1, 4, 4, 8);
    }
    throw UnknownDevice(device);
}

inline std::vector<std::string> gemm_best_known_devices() {
    return {"K40m", "GTX480", "HD7970", "Iris5100"};
}

}  // namespace ktune
