#pragma once

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ktune/backend.hpp"
#include "ktune/errors.hpp"

namespace ktune {

/// Serializes an evaluation request as the one-document wire format:
///   {"kernel": str, "source_ref": str, "config": {name: int, ...},
///    "global": [int], "local": [int],
///    "args": [{"role": str, "type": str, "length"|"value": ..., "fill": str}],
///    "repetitions": int, "want_outputs": bool}
inline nlohmann::json external_request_json(const EvaluationRequest& request) {
    nlohmann::json config = nlohmann::json::object();
    for (size_t i = 0; i < request.config.size(); ++i) {
        config[request.config.name_at(i)] = request.config.value_at(i);
    }
    nlohmann::json args = nlohmann::json::array();
    for (const ArgumentSpec& arg: request.arguments) {
        nlohmann::json entry{{"role", to_string(arg.role)},
                             {"type", to_string(arg.type)},
                             {"fill", arg.fill.empty() ? "none" : arg.fill}};
        if (arg.role == ArgRole::scalar) {
            entry["value"] = arg.value;
        } else {
            entry["length"] = arg.length;
        }
        args.push_back(std::move(entry));
    }
    return nlohmann::json{{"kernel", request.kernel_name},
                          {"source_ref", request.source_ref},
                          {"config", std::move(config)},
                          {"global", request.global},
                          {"local", request.local},
                          {"args", std::move(args)},
                          {"repetitions", request.repetitions},
                          {"want_outputs", request.want_outputs}};
}

/// Parses and validates the runner's one-document reply:
///   {"status": "ok"|"compile_error"|"runtime_error", "time_ms": number?,
///    "outputs_digest": [str]?, "outputs": [[number]]?, "message": str?}
/// Anything else -- unparsable text, unknown keys, a bad status, a missing or
/// non-positive time on "ok" -- is a ProtocolViolation; `stderr_text` is
/// attached to the diagnostic.
inline EvaluationResult parse_external_response(
        const std::string& text, const std::string& stderr_text) {
    auto violation = [&](const std::string& what) -> ProtocolViolation {
        std::string msg = what;
        if (!stderr_text.empty()) {
            msg += "; runner stderr: " + stderr_text;
        }
        return ProtocolViolation(msg);
    };

    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw violation("runner reply is not a JSON object: \""
                        + (text.size() > 200 ? text.substr(0, 200) + "..."
                                             : text)
                        + "\"");
    }
    for (const auto& [key, value]: doc.items()) {
        (void)value;
        if (key != "status" && key != "time_ms" && key != "outputs_digest"
            && key != "outputs" && key != "message") {
            throw violation("unknown key \"" + key + "\" in runner reply");
        }
    }
    if (!doc.contains("status") || !doc["status"].is_string()) {
        throw violation("runner reply lacks a string \"status\"");
    }
    const std::string status = doc["status"].get<std::string>();

    EvaluationResult result;
    if (status == "ok") {
        result.status = Status::success;
    } else if (status == "compile_error") {
        result.status = Status::compile_error;
    } else if (status == "runtime_error") {
        result.status = Status::runtime_error;
    } else {
        throw violation("unknown status \"" + status + "\" in runner reply");
    }

    if (doc.contains("message")) {
        if (!doc["message"].is_string()) {
            throw violation("\"message\" must be a string");
        }
        result.message = doc["message"].get<std::string>();
    }

    if (result.status == Status::success) {
        if (!doc.contains("time_ms") || !doc["time_ms"].is_number()) {
            throw violation("status \"ok\" requires a numeric \"time_ms\"");
        }
        result.time_ms = doc["time_ms"].get<double>();
        if (!(result.time_ms > 0.0) || !std::isfinite(result.time_ms)) {
            throw violation("\"time_ms\" must be positive and finite, got "
                            + doc["time_ms"].dump());
        }
    } else if (doc.contains("time_ms")) {
        throw violation("\"time_ms\" is only valid with status \"ok\"");
    }

    if (doc.contains("outputs_digest")) {
        if (!doc["outputs_digest"].is_array()) {
            throw violation("\"outputs_digest\" must be an array of strings");
        }
        for (const auto& digest: doc["outputs_digest"]) {
            if (!digest.is_string()) {
                throw violation(
                    "\"outputs_digest\" must be an array of strings");
            }
            result.output_digests.push_back(digest.get<std::string>());
        }
    }
    if (doc.contains("outputs")) {
        if (!doc["outputs"].is_array()) {
            throw violation("\"outputs\" must be an array of number arrays");
        }
        for (const auto& buffer: doc["outputs"]) {
            if (!buffer.is_array()) {
                throw violation(
                    "\"outputs\" must be an array of number arrays");
            }
            BufferF32 values;
            values.reserve(buffer.size());
            for (const auto& number: buffer) {
                if (!number.is_number()) {
                    throw violation("\"outputs\" entries must be numbers");
                }
                values.push_back(number.get<float>());
            }
            result.outputs.emplace_back(std::move(values));
        }
    }
    return result;
}

namespace detail {

struct ProcessOutcome {
    std::string out;
    std::string err;
    int exit_code = -1;
    bool timed_out = false;
};

inline void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    if (flags >= 0) {
        fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    }
}

/// Writing to a runner that exited early must surface as EPIPE, not kill
/// the tuner; ignore SIGPIPE process-wide once, the first time a runner is
/// spawned.
inline void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

/// Spawns `argv`, feeds `input` on stdin, and captures stdout/stderr until
/// both close or `timeout_ms` elapses (then the child is killed). Throws
/// SpawnFailure when the process cannot start at all.
inline ProcessOutcome run_process(const std::vector<std::string>& argv,
                                  const std::string& input, int timeout_ms) {
    using Clock = std::chrono::steady_clock;
    if (argv.empty()) {
        throw SpawnFailure("empty command line");
    }
    ignore_sigpipe();

    int in_pipe[2];   // parent -> child stdin
    int out_pipe[2];  // child stdout -> parent
    int err_pipe[2];  // child stderr -> parent
    int exec_pipe[2]; // exec-failure errno channel (CLOEXEC)
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0
        || pipe2(exec_pipe, O_CLOEXEC) != 0) {
        throw SpawnFailure(std::string("pipe: ") + std::strerror(errno));
    }

    // Built before fork: no allocation may happen in the child.
    std::vector<char*> cargv;
    cargv.reserve(argv.size() + 1);
    for (const std::string& arg: argv) {
        cargv.push_back(const_cast<char*>(arg.c_str()));
    }
    cargv.push_back(nullptr);

    pid_t pid = fork();
    if (pid < 0) {
        throw SpawnFailure(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        // Child: wire the pipes to stdio and exec.
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        dup2(err_pipe[1], STDERR_FILENO);
        for (int fd: {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1],
                      err_pipe[0], err_pipe[1], exec_pipe[0]}) {
            close(fd);
        }
        execvp(cargv[0], cargv.data());
        int code = errno;
        ssize_t ignored = write(exec_pipe[1], &code, sizeof(code));
        (void)ignored;
        _exit(127);
    }

    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    close(exec_pipe[1]);

    // The exec channel resolves immediately: EOF on success, an errno on
    // failure. This read cannot deadlock -- it does not depend on stdin.
    int exec_errno = 0;
    ssize_t got = read(exec_pipe[0], &exec_errno, sizeof(exec_errno));
    close(exec_pipe[0]);
    if (got > 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(err_pipe[0]);
        waitpid(pid, nullptr, 0);
        throw SpawnFailure("cannot execute \"" + argv[0] + "\": "
                           + std::strerror(exec_errno));
    }

    set_nonblocking(in_pipe[1]);
    set_nonblocking(out_pipe[0]);
    set_nonblocking(err_pipe[0]);

    ProcessOutcome outcome;
    const Clock::time_point deadline =
        Clock::now() + std::chrono::milliseconds(timeout_ms);
    size_t written = 0;
    int stdin_fd = in_pipe[1];
    int stdout_fd = out_pipe[0];
    int stderr_fd = err_pipe[0];
    bool killed = false;

    auto drain = [](int& fd, std::string& sink) {
        char chunk[65536];
        for (;;) {
            ssize_t n = read(fd, chunk, sizeof(chunk));
            if (n > 0) {
                sink.append(chunk, static_cast<size_t>(n));
            } else if (n == 0) {
                close(fd);
                fd = -1;
                return;
            } else {
                return;  // EAGAIN: try again on the next poll round
            }
        }
    };

    while (stdout_fd >= 0 || stderr_fd >= 0 || stdin_fd >= 0) {
        auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                             deadline - Clock::now())
                             .count();
        if (remaining <= 0 && !killed) {
            kill(pid, SIGKILL);
            killed = true;
            outcome.timed_out = true;
        }
        struct pollfd fds[3];
        nfds_t count = 0;
        if (stdin_fd >= 0) {
            fds[count++] = {stdin_fd, POLLOUT, 0};
        }
        if (stdout_fd >= 0) {
            fds[count++] = {stdout_fd, POLLIN, 0};
        }
        if (stderr_fd >= 0) {
            fds[count++] = {stderr_fd, POLLIN, 0};
        }
        int timeout = killed ? 1000 : static_cast<int>(
                          remaining < 0 ? 0 : (remaining > 1000 ? 1000
                                                                : remaining));
        int ready = poll(fds, count, timeout);
        if (ready < 0 && errno != EINTR) {
            break;
        }
        for (nfds_t i = 0; i < count; ++i) {
            if (fds[i].revents == 0) {
                continue;
            }
            if (fds[i].fd == stdin_fd) {
                if (fds[i].revents & (POLLERR | POLLHUP)) {
                    close(stdin_fd);
                    stdin_fd = -1;
                    continue;
                }
                ssize_t n = write(stdin_fd, input.data() + written,
                                  input.size() - written);
                if (n > 0) {
                    written += static_cast<size_t>(n);
                }
                if ((n < 0 && errno != EAGAIN && errno != EINTR)
                    || written == input.size()) {
                    close(stdin_fd);
                    stdin_fd = -1;
                }
            } else if (fds[i].fd == stdout_fd) {
                drain(stdout_fd, outcome.out);
            } else if (fds[i].fd == stderr_fd) {
                drain(stderr_fd, outcome.err);
            }
        }
    }

    int status = 0;
    // After the pipes close the child is exiting (or already SIGKILLed);
    // reap it, enforcing the deadline for children that linger with their
    // standard streams closed.
    for (;;) {
        pid_t reaped = waitpid(pid, &status, WNOHANG);
        if (reaped == pid || reaped < 0) {
            break;
        }
        if (Clock::now() >= deadline && !killed) {
            kill(pid, SIGKILL);
            killed = true;
            outcome.timed_out = true;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    if (WIFEXITED(status)) {
        outcome.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        outcome.exit_code = -WTERMSIG(status);
    }
    return outcome;
}

}  // namespace detail

/// Bridges evaluation to an external runner process: one subprocess per
/// evaluation, one JSON document on its stdin, one JSON document back on its
/// stdout. Timeouts kill the runner and surface as runtime errors; protocol
/// breakage (no JSON, schema violations) throws ProtocolViolation.
class ExternalBackend: public Backend {
  public:
    explicit ExternalBackend(std::vector<std::string> argv,
                             int timeout_ms = 60000, int workers = 1):
        argv_(std::move(argv)),
        timeout_ms_(timeout_ms),
        workers_(workers) {
        if (argv_.empty()) {
            throw SpawnFailure("empty command line");
        }
        if (timeout_ms_ <= 0) {
            throw Error("external-command timeout must be positive");
        }
    }

    std::string name() const override {
        return "external:" + argv_[0];
    }

    /// One evaluation owns one subprocess, so parallel calls are technically
    /// independent; they stay serialized unless a worker count > 1 opts in
    /// (overlapping timing runs perturb each other's measurements).
    bool concurrency_safe() const override {
        return workers_ > 1;
    }

    EvaluationResult evaluate(const EvaluationRequest& request) override {
        std::string input = external_request_json(request).dump();
        input.push_back('\n');
        detail::ProcessOutcome outcome =
            detail::run_process(argv_, input, timeout_ms_);
        if (outcome.timed_out) {
            // A runner that replied in full and then lingered still counts;
            // anything else is a timeout.
            if (!outcome.out.empty()) {
                try {
                    return parse_external_response(outcome.out, outcome.err);
                } catch (const ProtocolViolation&) {
                }
            }
            EvaluationResult result;
            result.status = Status::runtime_error;
            result.message = "timeout after " + std::to_string(timeout_ms_)
                             + " ms";
            if (!outcome.err.empty()) {
                result.message += "; runner stderr: " + outcome.err;
            }
            return result;
        }
        if (outcome.out.empty()) {
            std::string msg = "runner produced no reply (exit code "
                              + std::to_string(outcome.exit_code) + ")";
            if (!outcome.err.empty()) {
                msg += "; runner stderr: " + outcome.err;
            }
            throw ProtocolViolation(msg);
        }
        return parse_external_response(outcome.out, outcome.err);
    }

    int timeout_ms() const {
        return timeout_ms_;
    }
    int workers() const {
        return workers_;
    }
    const std::vector<std::string>& argv() const {
        return argv_;
    }

  private:
    std::vector<std::string> argv_;
    int timeout_ms_;
    int workers_;
};

}  // namespace ktune
