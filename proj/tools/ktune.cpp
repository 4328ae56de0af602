// ktune: file-driven auto-tuning front end.
//
//   ktune tune <job.json> [--out results.csv] [--seed N]
//   ktune stats <job.json> --runs K [--base-seed N] [--out stats.csv]
//                          [--parallel W]
//   ktune enumerate <job.json> [--list]
//
// Exit codes: 0 success, 2 empty search space, 1 anything else.
// KTUNE_LOG=error|warn|info|debug controls stderr verbosity (default warn).

#include <CLI11.hpp>

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ktune/jobfile.hpp"
#include "ktune/report.hpp"
#include "ktune/stats.hpp"
#include "ktune/tuner.hpp"

namespace {

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_threshold() {
    static const LogLevel threshold = [] {
        const char* env = std::getenv("KTUNE_LOG");
        if (!env) {
            return LogLevel::warn;
        }
        const std::string value = env;
        if (value == "error") return LogLevel::error;
        if (value == "warn") return LogLevel::warn;
        if (value == "info") return LogLevel::info;
        if (value == "debug") return LogLevel::debug;
        std::fprintf(stderr,
                     "ktune: warn: unknown KTUNE_LOG value \"%s\" "
                     "(expected error|warn|info|debug)\n",
                     env);
        return LogLevel::warn;
    }();
    return threshold;
}

void log(LogLevel level, const std::string& message) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (level <= log_threshold()) {
        std::fprintf(stderr, "ktune: %s: %s\n",
                     names[static_cast<int>(level)], message.c_str());
    }
}

/// stats.csv -> stats_runs.csv / stats_space.csv and so on.
std::string derive_path(const std::string& path, const std::string& suffix) {
    std::filesystem::path p(path);
    std::filesystem::path name = p.stem();
    name += suffix;
    name += p.extension();
    return (p.parent_path() / name).string();
}

void print_summary_line(const ktune::TuningOutcome& outcome) {
    if (outcome.best_index) {
        const ktune::TuningRow* best = outcome.best_row();
        std::cout << "best: " << best->config.canonical() << "\n";
        std::cout << "best time_ms: " << ktune::format_double(*best->time_ms)
                  << " (step " << best->step << ", global "
                  << ktune::detail::join_sizes(best->sizes.global)
                  << ", local "
                  << ktune::detail::join_sizes(best->sizes.local) << ")\n";
    } else {
        std::cout << "best: none (no configuration succeeded)\n";
    }
}

int cmd_tune(const std::string& job_path, const std::string& out_flag,
             std::optional<uint64_t> seed_flag) {
    ktune::LoadedJob loaded = ktune::load_job(job_path);
    if (seed_flag) {
        loaded.job.seed = *seed_flag;
    }
    if (!out_flag.empty()) {
        loaded.output = out_flag;
    }
    log(LogLevel::info, "tuning kernel \"" + loaded.job.kernel.name
                            + "\" on " + loaded.job.device.name + " via "
                            + loaded.backend->name());

    ktune::TuningOutcome outcome =
        ktune::run_tuning(loaded.job, *loaded.backend);
    ktune::save_report(loaded.output, [&](std::ostream& out) {
        ktune::write_results_csv(out, outcome);
    });

    std::cout << "kernel: " << outcome.kernel_name << " on "
              << outcome.device_name << " via " << outcome.backend_name
              << "\n";
    std::cout << "space: " << outcome.space_size
              << " valid configurations\n";
    std::cout << "budget: " << outcome.budget << " unique evaluations ("
              << outcome.unique_evaluations << " used, "
              << outcome.failed_evaluations << " failed)\n";
    print_summary_line(outcome);
    std::cout << "wrote " << loaded.output << "\n";
    return 0;
}

/// How large a space still gets the fully enumerated "rightmost violin".
constexpr unsigned long long kViolinEnumerationLimit = 100000;

int cmd_stats(const std::string& job_path, size_t runs, uint64_t base_seed,
              const std::string& out_path, size_t parallel) {
    ktune::LoadedJob loaded = ktune::load_job(job_path);
    ktune::SearchSpace effective = ktune::compose_space(
        loaded.job.kernel, loaded.job.device, loaded.job.space);
    if (effective.valid_count() == 0) {
        if (loaded.job.space.valid_count() == 0) {
            throw ktune::EmptySpace();
        }
        throw ktune::EmptySpaceAfterConstraints();
    }

    size_t workers = 1;
    if (parallel > 1) {
        if (loaded.backend->concurrency_safe()) {
            workers = std::min(parallel, runs);
        } else {
            log(LogLevel::warn, "backend \"" + loaded.backend->name()
                                    + "\" is not concurrency-safe; running "
                                      "serially");
        }
    }

    std::vector<ktune::RunSummary> summaries(runs);
    std::vector<std::exception_ptr> failures(runs);
    auto run_one = [&](size_t index) {
        try {
            ktune::TuningJob job = loaded.job;
            job.seed = base_seed + index;
            ktune::TuningOutcome outcome =
                ktune::run_tuning(job, *loaded.backend, effective);
            if (!outcome.best_time_ms) {
                throw ktune::Error(
                    "run " + std::to_string(index) + " (seed "
                    + std::to_string(job.seed)
                    + ") found no successful configuration");
            }
            summaries[index] =
                ktune::RunSummary{index, job.seed, *outcome.best_time_ms,
                                  outcome.best_config->canonical()};
            log(LogLevel::debug,
                "run " + std::to_string(index) + ": best "
                    + ktune::format_double(*outcome.best_time_ms) + " ms");
        } catch (...) {
            failures[index] = std::current_exception();
        }
    };

    if (workers <= 1) {
        for (size_t i = 0; i < runs; ++i) {
            run_one(i);
        }
    } else {
        log(LogLevel::info, "running " + std::to_string(runs) + " searches on "
                                + std::to_string(workers) + " threads");
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < runs;
                     i = next.fetch_add(1)) {
                    run_one(i);
                }
            });
        }
        for (std::thread& thread: pool) {
            thread.join();
        }
    }
    for (size_t i = 0; i < runs; ++i) {
        if (failures[i]) {
            std::rethrow_exception(failures[i]);
        }
    }

    std::vector<double> bests;
    bests.reserve(runs);
    for (const ktune::RunSummary& summary: summaries) {
        bests.push_back(summary.best_time_ms);
    }
    ktune::ExperimentStats stats = ktune::make_experiment_stats(bests);

    const std::string runs_path = derive_path(out_path, "_runs");
    ktune::save_report(out_path, [&](std::ostream& out) {
        ktune::write_stats_csv(out, stats);
    });
    ktune::save_report(runs_path, [&](std::ostream& out) {
        ktune::write_runs_csv(out, summaries);
    });

    std::cout << "runs: " << runs << " (seeds " << base_seed << ".."
              << base_seed + runs - 1 << ")\n";
    std::cout << "best-of-run: mean=" << ktune::format_double(stats.summary.mean)
              << " std=" << ktune::format_double(stats.summary.stddev)
              << " min=" << ktune::format_double(stats.summary.min)
              << " max=" << ktune::format_double(stats.summary.max) << "\n";
    std::cout << "wrote " << out_path << "\n";
    std::cout << "wrote " << runs_path << "\n";

    // The distribution over the whole space puts the search results in
    // context, when pricing every configuration once is affordable.
    if (effective.valid_count() <= kViolinEnumerationLimit) {
        ktune::TuningJob job = loaded.job;
        job.strategy = ktune::StrategySpec{};  // full sweep
        job.seed = base_seed;
        ktune::TuningOutcome outcome =
            ktune::run_tuning(job, *loaded.backend, effective);
        std::vector<double> times;
        times.reserve(outcome.rows.size());
        for (const ktune::TuningRow& row: outcome.rows) {
            if (row.status == ktune::Status::success
                && row.verification != ktune::Verification::fail
                && row.time_ms) {
                times.push_back(*row.time_ms);
            }
        }
        if (times.empty()) {
            log(LogLevel::warn, "no successful evaluations in the full "
                                "sweep; skipping the space distribution");
            std::cout << "space distribution: skipped (no successful "
                         "evaluations)\n";
        } else {
            const std::string space_path = derive_path(out_path, "_space");
            ktune::ExperimentStats space_stats =
                ktune::make_experiment_stats(times);
            ktune::save_report(space_path, [&](std::ostream& out) {
                ktune::write_stats_csv(out, space_stats);
            });
            std::cout << "wrote " << space_path << "\n";
        }
    } else {
        std::cout << "space distribution: skipped ("
                  << effective.valid_count() << " configurations exceed "
                  << kViolinEnumerationLimit << ")\n";
    }
    return 0;
}

int cmd_enumerate(const std::string& job_path, bool list) {
    ktune::LoadedJob loaded = ktune::load_job(job_path);
    ktune::SearchSpace effective = ktune::compose_space(
        loaded.job.kernel, loaded.job.device, loaded.job.space);

    unsigned long long raw = loaded.job.space.raw_size();
    if (list && raw > ktune::SearchSpace::kEnumerationLimit) {
        // Refuse before spending minutes streaming the counts.
        throw ktune::ExplicitEnumerationTooLarge(
            raw, ktune::SearchSpace::kEnumerationLimit);
    }
    unsigned long long constrained = loaded.job.space.valid_count();
    unsigned long long valid = effective.valid_count();

    std::cout << "raw: " << raw << "\n";
    std::cout << "constrained: " << constrained << "\n";
    std::cout << "device-rejected: " << constrained - valid << "\n";
    std::cout << "valid: " << valid << "\n";
    if (list) {
        for (const ktune::Configuration& config:
             effective.enumerate_valid()) {
            std::cout << config.canonical() << "\n";
        }
    }
    return valid == 0 ? 2 : 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const ktune::EmptySpaceAfterConstraints& err) {
        log(LogLevel::error, err.what());
        return 2;
    } catch (const ktune::EmptySpace& err) {
        log(LogLevel::error, err.what());
        return 2;
    } catch (const std::exception& err) {
        log(LogLevel::error, err.what());
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ktune: auto-tuner for parameterized compute kernels"};
    app.require_subcommand(1);

    std::string tune_job;
    std::string tune_out;
    uint64_t tune_seed = 0;
    CLI::App* tune = app.add_subcommand(
        "tune", "run one tuning search and write a results CSV");
    tune->add_option("job", tune_job, "job file (JSON)")->required();
    tune->add_option("--out", tune_out,
                     "results CSV path (default: the job's output field)");
    CLI::Option* tune_seed_opt =
        tune->add_option("--seed", tune_seed, "override the job's seed");

    std::string stats_job;
    std::string stats_out = "stats.csv";
    size_t stats_runs = 0;
    uint64_t stats_base_seed = 1;
    size_t stats_parallel = 1;
    CLI::App* stats = app.add_subcommand(
        "stats", "repeat the search and write best-of-run statistics");
    stats->add_option("job", stats_job, "job file (JSON)")->required();
    stats->add_option("--runs", stats_runs, "number of independent searches")
        ->required()
        ->check(CLI::PositiveNumber);
    stats->add_option("--base-seed", stats_base_seed,
                      "seed of the first run (run i uses base-seed + i)");
    stats->add_option("--out", stats_out, "statistics CSV path");
    stats->add_option("--parallel", stats_parallel,
                      "worker threads (used only when the backend is "
                      "concurrency-safe)")
        ->check(CLI::PositiveNumber);

    std::string enumerate_job;
    bool enumerate_list = false;
    CLI::App* enumerate = app.add_subcommand(
        "enumerate", "report space sizes without tuning");
    enumerate->add_option("job", enumerate_job, "job file (JSON)")->required();
    enumerate->add_flag("--list", enumerate_list,
                        "print every valid configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    if (*tune) {
        std::optional<uint64_t> seed;
        if (tune_seed_opt->count() > 0) {
            seed = tune_seed;
        }
        return guarded([&] { return cmd_tune(tune_job, tune_out, seed); });
    }
    if (*stats) {
        return guarded([&] {
            return cmd_stats(stats_job, stats_runs, stats_base_seed,
                             stats_out, stats_parallel);
        });
    }
    return guarded([&] { return cmd_enumerate(enumerate_job, enumerate_list); });
}
