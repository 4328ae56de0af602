// Acceptance gate for the tuning framework. Each numbered criterion prints
// exactly one pass/fail line; the binary exits nonzero if any fails.
//
// The two CLI-driven criteria locate the `ktune` binary and the stub runner
// through KTUNE_BIN / KTUNE_STUB when set (the test harness does this), and
// otherwise fall back to the usual build-tree locations relative to this
// binary.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ktune/backend.hpp"
#include "ktune/external.hpp"
#include "ktune/jobfile.hpp"
#include "ktune/landscapes.hpp"
#include "ktune/report.hpp"
#include "ktune/search.hpp"
#include "ktune/space.hpp"
#include "ktune/stats.hpp"
#include "ktune/tuner.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool ok = false;
    std::string detail;
};

Outcome pass(std::string detail = "") {
    return {true, std::move(detail)};
}

Outcome fail(std::string detail) {
    return {false, std::move(detail)};
}

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start)
        .count();
}

std::string format_ms(double ms) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f ms", ms);
    return buffer;
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

/// A three-parameter space of 1200 configurations for the strategy checks.
ktune::SearchSpace strategy_space() {
    ktune::SearchSpace space;
    space.add_parameter("A", {1, 2, 4, 8, 16, 32, 64, 128, 256, 512});
    space.add_parameter("B", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    space.add_parameter("C", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
    return space;
}

/// Prices configurations with the hash-random synthetic model.
ktune::Evaluator synthetic_evaluator(ktune::SyntheticBackend& backend) {
    return [&backend](const ktune::Configuration& config)
               -> std::optional<double> {
        ktune::EvaluationRequest request;
        request.kernel_name = "bench";
        request.source_ref = "bench.cl";
        request.config = config;
        request.global = {64};
        request.local = {8};
        ktune::EvaluationResult result = backend.evaluate(request);
        if (result.status != ktune::Status::success) {
            return std::nullopt;
        }
        return result.time_ms;
    };
}

bool monotone_best(const std::vector<ktune::TraceEntry>& trace) {
    std::optional<double> previous;
    for (const ktune::TraceEntry& entry: trace) {
        if (entry.best_so_far) {
            if (previous && *entry.best_so_far > *previous) {
                return false;
            }
            previous = entry.best_so_far;
        }
    }
    return true;
}

/// Injects a fault: configurations with VW=8 report absurdly fast times and
/// corrupted output data, so only verification can reject them.
class CorruptingBackend: public ktune::Backend {
  public:
    explicit CorruptingBackend(ktune::SyntheticSpec spec): inner_(spec) {}

    std::string name() const override {
        return "corrupting:" + inner_.name();
    }

    ktune::EvaluationResult evaluate(
            const ktune::EvaluationRequest& request) override {
        ktune::EvaluationResult result = inner_.evaluate(request);
        if (result.status == ktune::Status::success
            && request.config.at("VW") == 8) {
            result.time_ms /= 1000.0;
            if (!result.outputs.empty()) {
                auto& buffer = std::get<ktune::BufferF32>(result.outputs[0]);
                buffer[0] += 1.0f;
                result.output_digests.clear();
                for (const ktune::Buffer& output: result.outputs) {
                    result.output_digests.push_back(
                        ktune::digest_hex(ktune::buffer_digest(output)));
                }
            }
        }
        return result;
    }

  private:
    ktune::SyntheticBackend inner_;
};

// ---------------------------------------------------------------------------
// CLI plumbing for the determinism criterion
// ---------------------------------------------------------------------------

std::filesystem::path self_dir;  // set from argv[0] in main

std::string tool_path(const char* env_name,
                      const std::filesystem::path& fallback) {
    if (const char* env = std::getenv(env_name)) {
        return env;
    }
    return fallback.string();
}

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        path = std::filesystem::temp_directory_path()
               / ("ktune-acceptance-" + std::to_string(std::rand()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ignored;
        std::filesystem::remove_all(path, ignored);
    }

    std::string write(const std::string& name, const std::string& text) const {
        auto file = path / name;
        std::ofstream out(file, std::ios::binary);
        out << text;
        return file.string();
    }
};

int run_command(const std::string& command) {
    int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

// 1. floor(3424/32) = 107 and floor(241600/2048) = 117, faster than 1 ms.
Outcome criterion_budget() {
    auto start = Clock::now();
    size_t small = ktune::budget(3424, 1.0 / 32.0);
    size_t large = ktune::budget(241600, 1.0 / 2048.0);
    double elapsed = ms_since(start);
    if (small != 107 || large != 117) {
        return fail("got " + std::to_string(small) + " and "
                    + std::to_string(large));
    }
    if (elapsed >= 1.0) {
        return fail("took " + format_ms(elapsed));
    }
    return pass("107 and 117, " + format_ms(elapsed));
}

// 2. enumerate_valid agrees with an independent odometer + filter on 50
//    randomized spaces (raw <= 10^4, up to 3 constraints) within 10 s.
Outcome criterion_enumeration_oracle() {
    auto start = Clock::now();
    std::mt19937 rng(20260814u);
    auto draw = [&rng](int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(rng);
    };

    for (int round = 0; round < 50; ++round) {
        ktune::SearchSpace space;
        int nparams = draw(1, 4);
        std::vector<std::vector<ktune::Value>> lists(nparams);
        for (int p = 0; p < nparams; ++p) {
            std::set<ktune::Value> values;
            int count = draw(1, 8);
            while (static_cast<int>(values.size()) < count) {
                values.insert(draw(0, 31));
            }
            lists[p].assign(values.begin(), values.end());
            space.add_parameter("P" + std::to_string(p), lists[p]);
        }
        auto name = [&] { return "P" + std::to_string(draw(0, nparams - 1)); };
        int nconstraints = draw(0, 3);
        for (int c = 0; c < nconstraints; ++c) {
            std::string expr;
            switch (draw(0, 4)) {
                case 0: expr = name() + " <= " + name(); break;
                case 1:
                    expr = name() + " % " + std::to_string(draw(1, 4))
                           + " == 0";
                    break;
                case 2:
                    expr = name() + " + " + name() + " >= "
                           + std::to_string(draw(0, 40));
                    break;
                case 3: expr = name() + " != " + name(); break;
                default: expr = name() + " * 2 >= " + name(); break;
            }
            space.add_constraint(expr);
        }

        // Independent enumeration: a mixed-radix odometer over the raw
        // product, filtered one configuration at a time.
        std::vector<std::string> expected;
        std::vector<size_t> at(nparams, 0);
        while (true) {
            std::vector<ktune::Value> values(nparams);
            for (int p = 0; p < nparams; ++p) {
                values[p] = lists[p][at[p]];
            }
            ktune::Configuration config =
                space.make_configuration(std::move(values));
            if (space.satisfies(config)) {
                expected.push_back(config.canonical());
            }
            int p = nparams - 1;
            while (p >= 0 && ++at[p] == lists[p].size()) {
                at[p--] = 0;
            }
            if (p < 0) {
                break;
            }
        }

        std::vector<std::string> actual;
        for (const ktune::Configuration& config: space.enumerate_valid()) {
            actual.push_back(config.canonical());
        }
        std::sort(expected.begin(), expected.end());
        std::sort(actual.begin(), actual.end());
        if (actual != expected) {
            return fail("space " + std::to_string(round) + ": enumerated "
                        + std::to_string(actual.size()) + ", brute force "
                        + std::to_string(expected.size()));
        }
    }
    double elapsed = ms_since(start);
    if (elapsed >= 10000.0) {
        return fail("took " + format_ms(elapsed));
    }
    return pass("50 spaces agree, " + format_ms(elapsed));
}

// 3. Exact raw sizes; constrained counts reported against the published
//    3,424 / 241,600 without asserting a match (the constraint sets are
//    reconstructions, not transcriptions).
Outcome criterion_case_study_sizes() {
    ktune::SearchSpace conv = ktune::conv_space();
    ktune::SearchSpace gemm = ktune::gemm_space();
    if (conv.raw_size() != 12288) {
        return fail("conv raw " + std::to_string(conv.raw_size()));
    }
    if (gemm.raw_size() != 2654208) {
        return fail("gemm raw " + std::to_string(gemm.raw_size()));
    }
    unsigned long long conv_valid = conv.valid_count();
    unsigned long long gemm_valid = gemm.valid_count();
    if (conv_valid == 0 || gemm_valid == 0) {
        return fail("a constrained count collapsed to zero");
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "raw exact; constrained conv %llu (published 3424, %.2fx) "
                  "gemm %llu (published 241600, %.2fx)",
                  conv_valid, static_cast<double>(conv_valid) / 3424.0,
                  gemm_valid, static_cast<double>(gemm_valid) / 241600.0);
    return pass(detail);
}

// 4. Every published best configuration satisfies the reconstructed space.
Outcome criterion_best_known_rows() {
    ktune::SearchSpace conv = ktune::conv_space();
    ktune::SearchSpace gemm = ktune::gemm_space();
    int rows = 0;
    for (const std::string& device: ktune::conv_best_known_devices()) {
        for (int filter: {3, 7, 11}) {
            ktune::Configuration config =
                ktune::conv_best_known(conv, device, filter);
            if (!conv.is_valid(config)) {
                return fail("conv " + device + " f" + std::to_string(filter)
                            + " rejected: " + config.canonical());
            }
            ++rows;
        }
    }
    for (const std::string& device: ktune::gemm_best_known_devices()) {
        ktune::Configuration config = ktune::gemm_best_known(gemm, device);
        if (!gemm.is_valid(config)) {
            return fail("gemm " + device + " rejected: "
                        + config.canonical());
        }
        ++rows;
    }
    return pass(std::to_string(rows) + " published rows accepted");
}

// 5. Metropolis arithmetic, exact and empirical.
Outcome criterion_sa_acceptance() {
    double p = ktune::sa_acceptance(8.0, 10.0, 2.0);
    if (std::abs(p - std::exp(-1.0)) > 1e-12) {
        return fail("sa_acceptance(8,10,2) = " + std::to_string(p));
    }
    ktune::Rng rng(42);
    const double target = ktune::sa_acceptance(1.0, 2.0, 4.0);  // exp(-1/4)
    int accepted = 0;
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        if (ktune::uniform01(rng) < target) {
            ++accepted;
        }
    }
    double frequency = static_cast<double>(accepted) / trials;
    if (std::abs(frequency - std::exp(-0.25)) > 0.02) {
        return fail("empirical acceptance " + std::to_string(frequency));
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail),
                  "exact e^-1; empirical %.4f vs e^-0.25 = %.4f", frequency,
                  std::exp(-0.25));
    return pass(detail);
}

// 6. PSO per-dimension move frequencies with alpha=0.4, beta=0, gamma=0.4.
Outcome criterion_pso_moves() {
    ktune::SearchSpace space;
    space.add_parameter("V", {0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    ktune::Configuration x{{"V", 2}};
    ktune::Configuration p{{"V", 5}};
    ktune::Configuration g{{"V", 7}};

    ktune::Rng rng(7);
    const int moves = 10000;
    std::map<ktune::Value, int> counts;
    for (int i = 0; i < moves; ++i) {
        ktune::Configuration next =
            ktune::pso_move(x, p, g, 0.4, 0.0, 0.4, space, rng);
        ++counts[next.at("V")];
    }
    // Values other than the current (2) and global-best (7) can only come
    // from the uniform draw, each with probability alpha/10.
    double neutral = 0.0;
    for (ktune::Value v: {0, 1, 3, 4, 5, 6, 8, 9}) {
        neutral += static_cast<double>(counts[v]) / moves;
    }
    double alpha_hat = neutral * 10.0 / 8.0;
    double global_hat =
        static_cast<double>(counts[7]) / moves - alpha_hat / 10.0;
    double stay_hat = static_cast<double>(counts[2]) / moves - alpha_hat / 10.0;
    if (std::abs(alpha_hat - 0.4) > 0.02 || std::abs(global_hat - 0.4) > 0.02
        || std::abs(stay_hat - 0.2) > 0.02) {
        char detail[120];
        std::snprintf(detail, sizeof(detail),
                      "random %.3f global %.3f stay %.3f", alpha_hat,
                      global_hat, stay_hat);
        return fail(detail);
    }

    for (int i = 0; i < 100; ++i) {
        ktune::Configuration frozen =
            ktune::pso_move(x, p, g, 0.0, 0.0, 0.0, space, rng);
        if (frozen.canonical() != x.canonical()) {
            return fail("zero-probability move changed the position");
        }
    }
    char detail[120];
    std::snprintf(detail, sizeof(detail),
                  "random %.3f global %.3f stay %.3f; zero-move fixed",
                  alpha_hat, global_hat, stay_hat);
    return pass(detail);
}

// 7. Full search equals an independent brute-force minimum; the sampling
//    strategies never beat it and their traces are monotone.
Outcome criterion_strategy_correctness() {
    ktune::SearchSpace space = strategy_space();
    ktune::SyntheticBackend backend(
        ktune::SyntheticSpec{ktune::SyntheticModel::hash_random});
    ktune::Evaluator evaluate = synthetic_evaluator(backend);

    double min_time = std::numeric_limits<double>::infinity();
    std::string argmin;
    for (const ktune::Configuration& config: space.enumerate_valid()) {
        double time = *evaluate(config);
        if (time < min_time) {
            min_time = time;
            argmin = config.canonical();
        }
    }

    ktune::StrategySpec full;
    ktune::SearchOutcome exact = ktune::run_search(space, evaluate, full, 1);
    if (!exact.best_time_ms || *exact.best_time_ms != min_time
        || exact.best_config->canonical() != argmin) {
        return fail("full search missed the brute-force minimum");
    }
    if (!monotone_best(exact.trace)) {
        return fail("full-search trace is not monotone");
    }

    for (ktune::StrategyKind kind:
         {ktune::StrategyKind::random, ktune::StrategyKind::annealing,
          ktune::StrategyKind::pso}) {
        ktune::StrategySpec strategy;
        strategy.kind = kind;
        strategy.fraction = 1.0 / 8.0;
        for (uint64_t seed = 1; seed <= 5; ++seed) {
            ktune::SearchOutcome outcome =
                ktune::run_search(space, evaluate, strategy, seed);
            if (!outcome.best_time_ms) {
                return fail(std::string(ktune::to_string(kind))
                            + " found nothing");
            }
            if (*outcome.best_time_ms < min_time) {
                return fail(std::string(ktune::to_string(kind))
                            + " reported a time below the true minimum");
            }
            if (!monotone_best(outcome.trace)) {
                return fail(std::string(ktune::to_string(kind))
                            + " trace is not monotone");
            }
        }
    }
    return pass("brute-force minimum matched; 15 sampled runs bounded");
}

// 8. Unique evaluations never exceed the budget; random search uses exactly
//    its budget of distinct configurations.
Outcome criterion_unique_budget() {
    ktune::SearchSpace space = strategy_space();
    ktune::SyntheticBackend backend(
        ktune::SyntheticSpec{ktune::SyntheticModel::hash_random});
    ktune::Evaluator evaluate = synthetic_evaluator(backend);

    for (ktune::StrategyKind kind:
         {ktune::StrategyKind::full, ktune::StrategyKind::random,
          ktune::StrategyKind::annealing, ktune::StrategyKind::pso}) {
        ktune::StrategySpec strategy;
        strategy.kind = kind;
        strategy.fraction = kind == ktune::StrategyKind::full ? 1.0
                                                              : 1.0 / 8.0;
        for (uint64_t seed = 1; seed <= 20; ++seed) {
            ktune::SearchOutcome outcome =
                ktune::run_search(space, evaluate, strategy, seed);
            std::set<std::string> distinct;
            for (const ktune::TraceEntry& entry: outcome.trace) {
                distinct.insert(entry.config.canonical());
            }
            if (distinct.size() != outcome.unique_evaluations) {
                return fail("trace disagrees with the unique counter");
            }
            if (outcome.unique_evaluations > outcome.budget) {
                return fail(std::string(ktune::to_string(kind)) + " seed "
                            + std::to_string(seed) + " spent "
                            + std::to_string(outcome.unique_evaluations)
                            + " of " + std::to_string(outcome.budget));
            }
            if (kind == ktune::StrategyKind::random
                && outcome.unique_evaluations != outcome.budget) {
                return fail("random search left budget unused");
            }
        }
    }
    return pass("80 runs within budget; random spends exactly 150 of 150");
}

// 9. The copy kernel's size arithmetic, including the non-divisor failure.
Outcome criterion_thread_sizes() {
    ktune::KernelSpec kernel;
    kernel.name = "copy";
    kernel.base_global = {2048};
    kernel.base_local = {64};
    kernel.modifiers = {ktune::ThreadSizeModifier{
        ktune::SizeTarget::global, ktune::SizeOp::divide, {"WPT"}}};

    const std::vector<std::pair<ktune::Value, size_t>> expected = {
        {1, 2048}, {2, 1024}, {4, 512}};
    for (const auto& [wpt, global]: expected) {
        ktune::ResolvedSizes sizes = ktune::resolve_thread_sizes(
            kernel, ktune::Configuration{{"WPT", wpt}});
        if (sizes.global != std::vector<size_t>{global}
            || sizes.local != std::vector<size_t>{64}) {
            return fail("WPT=" + std::to_string(wpt) + " resolved wrong");
        }
    }
    try {
        ktune::resolve_thread_sizes(kernel,
                                    ktune::Configuration{{"WPT", 3}});
        return fail("WPT=3 should not divide 2048 exactly");
    } catch (const ktune::InexactDivision&) {
    }
    return pass("global {2048,1024,512}, local 64, non-divisor rejected");
}

// 10. CPU oracles vs independent loop nests, plus two exact algebraic cases.
Outcome criterion_reference_oracles() {
    // GEMM: an independent triple loop with double accumulation.
    ktune::GemmProblem gp;
    gp.m = gp.n = gp.k = 8;
    ktune::KernelSpec gk = ktune::gemm_kernel(gp);
    auto a = std::get<ktune::BufferF32>(
        ktune::materialize_argument(gk.arguments[5]));
    auto b = std::get<ktune::BufferF32>(
        ktune::materialize_argument(gk.arguments[6]));
    auto c = std::get<ktune::BufferF32>(
        ktune::materialize_argument(gk.arguments[7]));
    ktune::BufferF32 reference = ktune::gemm_reference(gp);
    for (size_t row = 0; row < gp.m; ++row) {
        for (size_t col = 0; col < gp.n; ++col) {
            double acc = 0.0;
            for (size_t kk = 0; kk < gp.k; ++kk) {
                acc += static_cast<double>(a[kk * gp.m + row])
                       * static_cast<double>(b[kk * gp.n + col]);
            }
            double want = gp.alpha * acc + gp.beta * c[row * gp.n + col];
            double got = reference[row * gp.n + col];
            double rel = std::abs(got - want)
                         / std::max(std::abs(want), 1e-30);
            if (rel > 1e-5) {
                return fail("gemm mismatch at (" + std::to_string(row) + ","
                            + std::to_string(col) + ")");
            }
        }
    }

    // Convolution: an independent quadruple loop for each filter size.
    for (int filter: {3, 7, 11}) {
        ktune::ConvProblem cp;
        cp.x = cp.y = 64;
        cp.filter = filter;
        ktune::KernelSpec ck = ktune::conv_kernel(cp);
        auto image = std::get<ktune::BufferF32>(
            ktune::materialize_argument(ck.arguments[4]));
        auto taps = std::get<ktune::BufferF32>(
            ktune::materialize_argument(ck.arguments[5]));
        ktune::BufferF32 out = ktune::conv_reference(cp);
        const size_t width = cp.padded_x();
        for (size_t row = 0; row < cp.y; ++row) {
            for (size_t col = 0; col < cp.x; ++col) {
                double acc = 0.0;
                for (int fy = 0; fy < filter; ++fy) {
                    for (int fx = 0; fx < filter; ++fx) {
                        acc += static_cast<double>(
                                   taps[fy * filter + fx])
                               * static_cast<double>(
                                   image[(row + fy) * width + col + fx]);
                    }
                }
                double want = cp.weight * acc;
                double got = out[row * cp.x + col];
                double rel = std::abs(got - want)
                             / std::max(std::abs(want), 1e-30);
                if (rel > 1e-5) {
                    return fail("conv f" + std::to_string(filter)
                                + " mismatch at (" + std::to_string(row)
                                + "," + std::to_string(col) + ")");
                }
            }
        }
    }

    // Identity filter: a centered delta tap must reproduce the image crop
    // bit for bit.
    {
        ktune::ConvProblem cp;
        cp.x = cp.y = 64;
        cp.filter = 3;
        ktune::KernelSpec ck = ktune::conv_kernel(cp);
        auto image = std::get<ktune::BufferF32>(
            ktune::materialize_argument(ck.arguments[4]));
        ktune::BufferF32 delta(9, 0.0f);
        delta[4] = 1.0f;
        ktune::BufferF32 out =
            ktune::conv_apply(image, delta, cp.x, cp.y, 3, 1.0f);
        const size_t width = cp.padded_x();
        for (size_t row = 0; row < cp.y; ++row) {
            for (size_t col = 0; col < cp.x; ++col) {
                if (out[row * cp.x + col]
                    != image[(row + 1) * width + col + 1]) {
                    return fail("identity filter is not exact");
                }
            }
        }
    }

    // alpha = 0, beta = 1 must return C unchanged, exactly.
    {
        ktune::GemmProblem cp;
        cp.m = cp.n = cp.k = 8;
        cp.alpha = 0.0f;
        cp.beta = 1.0f;
        ktune::KernelSpec ck = ktune::gemm_kernel(cp);
        auto c0 = std::get<ktune::BufferF32>(
            ktune::materialize_argument(ck.arguments[7]));
        if (ktune::gemm_reference(cp) != c0) {
            return fail("alpha=0 case is not exact");
        }
    }
    return pass("triple/quadruple loops agree; identity and alpha=0 exact");
}

// 11. Verification rejects corrupted rows and never flags a clean backend.
Outcome criterion_verification_gate() {
    ktune::ConvProblem desk;
    desk.x = 16;
    desk.y = 8;
    desk.filter = 3;
    desk.weight = 0.5f;
    desk.seed = 11;

    ktune::TuningJob job;
    job.kernel = ktune::conv_kernel(desk);
    job.space.add_parameter("XWG", {8});
    job.space.add_parameter("YWG", {8});
    job.space.add_parameter("XWPT", {2, 8});
    job.space.add_parameter("YWPT", {2});
    job.space.add_parameter("LOCAL", {1});
    job.space.add_parameter("VW", {2, 8});
    job.space.add_parameter("PAD", {0});
    job.space.add_parameter("UNR", {0});
    job.space.add_constraint("VW <= XWPT && XWPT % VW == 0");
    job.device = ktune::device_preset("K40m");
    job.verify = true;
    job.reference = [desk] {
        return std::vector<ktune::Buffer>{
            ktune::Buffer(ktune::conv_reference(desk))};
    };

    ktune::SyntheticSpec spec{ktune::SyntheticModel::conv_like};
    CorruptingBackend corrupting(spec);
    ktune::TuningOutcome tainted = ktune::run_tuning(job, corrupting);
    size_t failed = 0;
    for (const ktune::TuningRow& row: tainted.rows) {
        bool corrupt = row.config.at("VW") == 8;
        bool flagged = row.verification == ktune::Verification::fail;
        if (corrupt != flagged) {
            return fail("row " + row.config.canonical()
                        + (flagged ? " wrongly flagged" : " escaped"));
        }
        failed += flagged;
    }
    if (failed == 0 || !tainted.best_config
        || tainted.best_config->at("VW") == 8) {
        return fail("the corrupted configurations were not excluded");
    }

    ktune::SyntheticBackend clean(spec);
    ktune::TuningOutcome honest = ktune::run_tuning(job, clean);
    for (const ktune::TuningRow& row: honest.rows) {
        if (row.verification != ktune::Verification::pass) {
            return fail("clean backend failed verification for "
                        + row.config.canonical());
        }
    }
    return pass(std::to_string(failed)
                + " corrupted rows flagged and excluded; clean run spotless");
}

// 12. CLI determinism: identical bytes from repeated tune and stats runs.
Outcome criterion_cli_determinism() {
    std::string bin = tool_path(
        "KTUNE_BIN", self_dir.parent_path() / "tools" / "ktune");
    if (!std::filesystem::exists(bin)) {
        return fail("ktune binary not found at " + bin);
    }
    TempDir dir;
    std::string tune_job = dir.write("copy.json", R"({
      "kernel": {
        "name": "copy", "global": [2048], "local": [64],
        "modifiers": [{"target": "global", "op": "divide",
                       "factors": ["WPT"]}]
      },
      "space": {"parameters": {"WPT": [1, 2, 4]}}
    })");
    std::string stats_job = dir.write("conv.json", R"({
      "template": "conv",
      "problem": {"x": 256, "y": 128},
      "strategy": {"kind": "random", "fraction": "1/32"}
    })");

    auto quoted = [](const std::string& text) {
        return "\"" + text + "\"";
    };
    for (int round = 0; round < 2; ++round) {
        std::string suffix = std::to_string(round);
        std::string sink = " >/dev/null 2>&1";
        if (run_command(quoted(bin) + " tune " + quoted(tune_job)
                        + " --seed 3 --out "
                        + quoted((dir.path / ("t" + suffix + ".csv")).string())
                        + sink)
            != 0) {
            return fail("tune invocation failed");
        }
        if (run_command(quoted(bin) + " stats " + quoted(stats_job)
                        + " --runs 3 --base-seed 5 --out "
                        + quoted((dir.path / ("s" + suffix + ".csv")).string())
                        + sink)
            != 0) {
            return fail("stats invocation failed");
        }
    }
    if (slurp(dir.path / "t0.csv") != slurp(dir.path / "t1.csv")) {
        return fail("tune results differ between runs");
    }
    for (const char* suffix: {".csv", "_runs.csv", "_space.csv"}) {
        if (slurp(dir.path / ("s0" + std::string(suffix)))
            != slurp(dir.path / ("s1" + std::string(suffix)))) {
            return fail("stats" + std::string(suffix)
                        + " reports differ between runs");
        }
    }
    return pass("tune and stats reports byte-identical across reruns");
}

// 13. The external protocol's four outcome paths and its exact wire schema.
Outcome criterion_external_protocol() {
    std::string stub =
        tool_path("KTUNE_STUB", self_dir / "ktune_stub_runner");
    if (!std::filesystem::exists(stub)) {
        return fail("stub runner not found at " + stub);
    }

    ktune::EvaluationRequest request;
    request.kernel_name = "bench";
    request.source_ref = "bench.cl";
    request.config = ktune::Configuration{{"P", 2}, {"Q", 3}};
    request.global = {64};
    request.local = {8};
    request.arguments = {
        ktune::ArgumentSpec{ktune::ArgRole::scalar, ktune::ElementType::f32,
                            0, 1.5, ""},
        ktune::ArgumentSpec{ktune::ArgRole::input, ktune::ElementType::f32,
                            4, 0.0, "ramp"},
    };
    request.repetitions = 2;

    auto evaluate = [&](const std::string& mode) {
        ktune::ExternalBackend backend({stub, mode}, 250);
        return backend.evaluate(request);
    };
    ktune::EvaluationResult ok = evaluate("ok");
    if (ok.status != ktune::Status::success || !(ok.time_ms > 0.0)) {
        return fail("ok mode: " + ok.message);
    }
    if (evaluate("compile_error").status != ktune::Status::compile_error) {
        return fail("compile_error mode not classified");
    }
    if (evaluate("runtime_error").status != ktune::Status::runtime_error) {
        return fail("runtime_error mode not classified");
    }
    ktune::EvaluationResult late = evaluate("timeout");
    if (late.status != ktune::Status::runtime_error
        || late.message.find("timeout") == std::string::npos) {
        return fail("timeout mode not classified");
    }

    // Wire schema, exactly: key set, spellings, and value layout.
    nlohmann::json expected = {
        {"kernel", "bench"},
        {"source_ref", "bench.cl"},
        {"config", {{"P", 2}, {"Q", 3}}},
        {"global", {64}},
        {"local", {8}},
        {"args",
         {{{"role", "scalar"}, {"type", "f32"}, {"value", 1.5},
           {"fill", "none"}},
          {{"role", "input"}, {"type", "f32"}, {"length", 4},
           {"fill", "ramp"}}}},
        {"repetitions", 2},
        {"want_outputs", false},
    };
    if (ktune::external_request_json(request) != expected) {
        return fail("request JSON deviates from the wire schema");
    }
    ktune::EvaluationResult parsed = ktune::parse_external_response(
        R"({"status":"ok","time_ms":1.5})", "");
    if (parsed.status != ktune::Status::success || parsed.time_ms != 1.5) {
        return fail("minimal ok response not parsed");
    }
    try {
        ktune::parse_external_response(
            R"({"status":"ok","time_ms":1.5,"vendor":"x"})", "");
        return fail("an unknown response key was tolerated");
    } catch (const ktune::ProtocolViolation&) {
    }
    return pass("ok/compile_error/runtime_error/timeout classified; "
                "schema exact");
}

}  // namespace

int main(int, char** argv) {
    self_dir = std::filesystem::weakly_canonical(
                   std::filesystem::absolute(argv[0]))
                   .parent_path();

    struct Criterion {
        const char* title;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {"budget arithmetic", criterion_budget},
        {"space enumeration oracle", criterion_enumeration_oracle},
        {"case-study space sizes", criterion_case_study_sizes},
        {"published best rows accepted", criterion_best_known_rows},
        {"simulated-annealing acceptance", criterion_sa_acceptance},
        {"pso move distribution", criterion_pso_moves},
        {"strategy correctness", criterion_strategy_correctness},
        {"unique-evaluation budget", criterion_unique_budget},
        {"thread-size resolution", criterion_thread_sizes},
        {"reference oracles", criterion_reference_oracles},
        {"verification gate", criterion_verification_gate},
        {"cli determinism", criterion_cli_determinism},
        {"external protocol", criterion_external_protocol},
    };

    auto start = Clock::now();
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome outcome;
        try {
            outcome = criteria[i].run();
        } catch (const std::exception& err) {
            outcome = fail(std::string("exception: ") + err.what());
        }
        failures += outcome.ok ? 0 : 1;
        std::printf("criterion %2zu %-34s %s%s%s\n", i + 1,
                    criteria[i].title, outcome.ok ? "pass" : "FAIL",
                    outcome.detail.empty() ? "" : "  ",
                    outcome.detail.c_str());
    }
    std::printf("acceptance: %d/%zu criteria passed in %s\n",
                static_cast<int>(criteria.size()) - failures, criteria.size(),
                format_ms(ms_since(start)).c_str());
    return failures == 0 ? 0 : 1;
}
