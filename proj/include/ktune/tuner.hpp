#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ktune/backend.hpp"
#include "ktune/device.hpp"
#include "ktune/errors.hpp"
#include "ktune/format.hpp"
#include "ktune/kernel.hpp"
#include "ktune/search.hpp"
#include "ktune/space.hpp"

namespace ktune {

// =============================================================================
// Output verification
// =============================================================================

/// Elementwise comparison outcome for one candidate buffer set against the
/// reference. `pass` applies |c - r| <= abs_tol + rel_tol * |r| to every f32
/// element and exact equality to every i32 element; the worst offender's
/// location and errors are reported either way.
struct VerificationReport {
    bool pass = true;
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    size_t buffer_index = 0;
    size_t element_index = 0;
    size_t elements_compared = 0;
};

inline VerificationReport verify_outputs(const std::vector<Buffer>& candidate,
                                         const std::vector<Buffer>& reference,
                                         double rel_tol = 1e-4,
                                         double abs_tol = 1e-6) {
    if (candidate.size() != reference.size()) {
        throw ShapeMismatch("candidate has " + std::to_string(candidate.size())
                            + " output buffers, reference has "
                            + std::to_string(reference.size()));
    }
    VerificationReport report;
    // buffer_index/element_index pin to the first failing element; while
    // everything still passes they track the largest absolute error instead.
    auto record = [&](size_t buffer, size_t element, double abs_err,
                      double rel_err, bool ok) {
        if (!(abs_err <= report.max_abs_error)) {
            report.max_abs_error = abs_err;
            if (report.pass) {
                report.buffer_index = buffer;
                report.element_index = element;
            }
        }
        if (!(rel_err <= report.max_rel_error)) {
            report.max_rel_error = rel_err;
        }
        if (!ok && report.pass) {
            report.pass = false;
            report.buffer_index = buffer;
            report.element_index = element;
        }
        ++report.elements_compared;
    };

    for (size_t b = 0; b < candidate.size(); ++b) {
        if (candidate[b].index() != reference[b].index()) {
            throw ShapeMismatch("output buffer " + std::to_string(b)
                                + " differs in element type");
        }
        if (buffer_length(candidate[b]) != buffer_length(reference[b])) {
            throw ShapeMismatch(
                "output buffer " + std::to_string(b) + " has length "
                + std::to_string(buffer_length(candidate[b]))
                + ", reference has "
                + std::to_string(buffer_length(reference[b])));
        }
        if (std::holds_alternative<BufferF32>(candidate[b])) {
            const auto& c = std::get<BufferF32>(candidate[b]);
            const auto& r = std::get<BufferF32>(reference[b]);
            for (size_t i = 0; i < c.size(); ++i) {
                double abs_err = std::abs(static_cast<double>(c[i])
                                          - static_cast<double>(r[i]));
                double magnitude = std::abs(static_cast<double>(r[i]));
                double rel_err = magnitude > 0.0 ? abs_err / magnitude : 0.0;
                // NaNs fail this comparison, as they must.
                bool ok = abs_err <= abs_tol + rel_tol * magnitude;
                record(b, i, abs_err, rel_err, ok);
            }
        } else {
            const auto& c = std::get<BufferI32>(candidate[b]);
            const auto& r = std::get<BufferI32>(reference[b]);
            for (size_t i = 0; i < c.size(); ++i) {
                double abs_err = std::abs(static_cast<double>(c[i])
                                          - static_cast<double>(r[i]));
                record(b, i, abs_err, abs_err, c[i] == r[i]);
            }
        }
    }
    return report;
}

// =============================================================================
// Tuning orchestration
// =============================================================================

enum class Verification { skipped, pass, fail };

inline const char* to_string(Verification verification) {
    switch (verification) {
        case Verification::skipped: return "";
        case Verification::pass: return "pass";
        case Verification::fail: return "fail";
    }
    return "?";
}

/// One evaluated configuration: what ran, how it was shaped, what it
/// measured, and whether its outputs matched the reference.
struct TuningRow {
    size_t step = 0;
    Configuration config;
    Status status = Status::missing;
    std::optional<double> time_ms;
    ResolvedSizes sizes;
    Verification verification = Verification::skipped;
    std::optional<double> best_so_far;
    std::string message;
};

/// Everything a tuning job needs: the kernel under test, the user-declared
/// space, the device whose limits gate launchability, the strategy, and the
/// verification policy. `reference` lazily produces the trusted output
/// buffers; it runs at most once per job.
struct TuningJob {
    KernelSpec kernel;
    SearchSpace space;
    DeviceModel device;
    StrategySpec strategy;
    uint64_t seed = 1;
    int repetitions = 1;
    bool verify = false;
    double rel_tol = 1e-4;
    double abs_tol = 1e-6;
    std::function<std::vector<Buffer>()> reference;
};

/// Immutable record of one tuning run. `rows` mirrors the search trace one
/// to one; `best_index` points at the earliest row achieving the best time
/// among successful (and, when verifying, verified) evaluations.
struct TuningOutcome {
    std::vector<TuningRow> rows;
    std::optional<size_t> best_index;
    std::optional<Configuration> best_config;
    std::optional<double> best_time_ms;
    size_t budget = 0;
    size_t unique_evaluations = 0;
    size_t failed_evaluations = 0;
    size_t total_steps = 0;
    unsigned long long space_size = 0;
    std::string kernel_name;
    std::string device_name;
    std::string backend_name;
    StrategySpec strategy;
    uint64_t seed = 0;
    std::chrono::system_clock::time_point started_at;
    std::chrono::system_clock::time_point finished_at;

    const TuningRow* best_row() const {
        return best_index ? &rows[*best_index] : nullptr;
    }
};

/// The job's user space with the device-limit predicate composed in: the
/// search space actually explored by a tuning run.
inline SearchSpace compose_space(const KernelSpec& kernel,
                                 const DeviceModel& device,
                                 const SearchSpace& user_space) {
    SearchSpace effective = user_space;
    effective.add_predicate(device_constraints(kernel, device, user_space));
    return effective;
}

/// Runs `job.strategy` over `effective` (a space prepared by compose_space;
/// passing it explicitly lets repeated runs share its enumeration caches),
/// pricing configurations through `backend` and verifying successful ones
/// against the job's reference when requested. Verification failures are
/// excluded from best (they surface to the strategy as failed evaluations).
inline TuningOutcome run_tuning(const TuningJob& job, Backend& backend,
                                const SearchSpace& effective) {
    if (job.verify && !job.reference) {
        throw Error("verification requested but the job has no reference");
    }
    if (effective.valid_count() == 0) {
        if (job.space.valid_count() == 0) {
            throw EmptySpace();
        }
        throw EmptySpaceAfterConstraints();
    }

    TuningOutcome outcome;
    outcome.started_at = std::chrono::system_clock::now();
    outcome.kernel_name = job.kernel.name;
    outcome.device_name = job.device.name;
    outcome.backend_name = backend.name();
    outcome.strategy = job.strategy;
    outcome.seed = job.seed;
    outcome.space_size = effective.valid_count();

    // The trusted outputs and their digests, produced on first use.
    std::vector<Buffer> reference;
    std::vector<std::string> reference_digests;
    bool reference_ready = false;
    auto ensure_reference = [&]() {
        if (!reference_ready) {
            reference = job.reference();
            reference_digests.reserve(reference.size());
            for (const Buffer& buffer: reference) {
                reference_digests.push_back(digest_hex(buffer_digest(buffer)));
            }
            reference_ready = true;
        }
    };

    Evaluator evaluator = [&](const Configuration& config)
        -> std::optional<double> {
        TuningRow row;
        row.config = config;
        row.sizes = resolve_thread_sizes(job.kernel, config);

        EvaluationRequest request;
        request.kernel_name = job.kernel.name;
        request.source_ref = job.kernel.source_ref;
        request.config = config;
        request.global = row.sizes.global;
        request.local = row.sizes.local;
        request.arguments = job.kernel.arguments;
        request.device_name = job.device.name;
        request.repetitions = job.repetitions;
        request.want_outputs = job.verify;

        EvaluationResult result = backend.evaluate(request);
        row.status = result.status;
        row.message = result.message;
        if (!result.ok()) {
            outcome.rows.push_back(std::move(row));
            return std::nullopt;
        }
        row.time_ms = result.time_ms;

        if (job.verify) {
            ensure_reference();
            if (!result.outputs.empty()) {
                VerificationReport report = verify_outputs(
                    result.outputs, reference, job.rel_tol, job.abs_tol);
                row.verification =
                    report.pass ? Verification::pass : Verification::fail;
                if (!report.pass) {
                    row.message = "verification failed: max abs error "
                                  + format_double(report.max_abs_error)
                                  + " at buffer "
                                  + std::to_string(report.buffer_index)
                                  + " element "
                                  + std::to_string(report.element_index);
                }
            } else if (!result.output_digests.empty()) {
                row.verification =
                    result.output_digests == reference_digests
                        ? Verification::pass
                        : Verification::fail;
                if (row.verification == Verification::fail) {
                    row.message = "verification failed: output digest "
                                  "mismatch";
                }
            } else {
                row.verification = Verification::fail;
                row.message = "verification failed: the backend returned no "
                              "outputs to compare";
            }
            if (row.verification == Verification::fail) {
                outcome.rows.push_back(std::move(row));
                return std::nullopt;
            }
        }
        double time_ms = *row.time_ms;
        outcome.rows.push_back(std::move(row));
        return time_ms;
    };

    SearchOutcome search = run_search(effective, evaluator, job.strategy,
                                      job.seed);

    // rows and trace are appended in lockstep (one entry per unique
    // evaluation); copy the search's running-best view onto the rows.
    for (size_t i = 0; i < outcome.rows.size(); ++i) {
        outcome.rows[i].step = search.trace[i].step;
        outcome.rows[i].best_so_far = search.trace[i].best_so_far;
    }
    outcome.best_config = search.best_config;
    outcome.best_time_ms = search.best_time_ms;
    outcome.budget = search.budget;
    outcome.unique_evaluations = search.unique_evaluations;
    outcome.failed_evaluations = search.failed_evaluations;
    outcome.total_steps = search.total_steps;
    if (outcome.best_config) {
        for (size_t i = 0; i < outcome.rows.size(); ++i) {
            const TuningRow& row = outcome.rows[i];
            if (row.status == Status::success
                && row.verification != Verification::fail
                && row.config == *outcome.best_config) {
                outcome.best_index = i;
                break;
            }
        }
    }
    outcome.finished_at = std::chrono::system_clock::now();
    return outcome;
}

inline TuningOutcome run_tuning(const TuningJob& job, Backend& backend) {
    return run_tuning(job, backend,
                      compose_space(job.kernel, job.device, job.space));
}

}  // namespace ktune
