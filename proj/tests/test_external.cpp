#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdlib>
#include <string>
#include <vector>

#include "ktune/external.hpp"
#include "ktune/landscapes.hpp"

using namespace ktune;

namespace {

std::string stub_path() {
    const char* env = std::getenv("KTUNE_STUB");
    return env ? env : "tests/ktune_stub_runner";
}

EvaluationRequest sample_request() {
    static SearchSpace space = conv_space();
    ConvProblem problem;
    problem.x = 32;
    problem.y = 16;
    problem.filter = 3;
    KernelSpec kernel = conv_kernel(problem);

    EvaluationRequest request;
    request.kernel_name = kernel.name;
    request.source_ref = kernel.source_ref;
    request.config =
        space.make_configuration({8, 8, 2, 2, 1, 2, 0, 0});
    request.global = {16, 8};
    request.local = {8, 8};
    request.arguments = kernel.arguments;
    request.device_name = "K40m";
    request.repetitions = 3;
    return request;
}

ExternalBackend stub(const std::string& mode, int timeout_ms = 10000) {
    return ExternalBackend({stub_path(), mode}, timeout_ms);
}

}  // namespace

TEST_CASE("request serialization follows the wire schema") {
    nlohmann::json doc = external_request_json(sample_request());
    CHECK(doc.size() == 8);
    CHECK(doc["kernel"] == "conv");
    CHECK(doc["config"]["XWG"] == 8);
    CHECK(doc["config"]["VW"] == 2);
    CHECK(doc["global"] == nlohmann::json({16, 8}));
    CHECK(doc["local"] == nlohmann::json({8, 8}));
    CHECK(doc["repetitions"] == 3);
    CHECK(doc["want_outputs"] == false);

    REQUIRE(doc["args"].is_array());
    REQUIRE(doc["args"].size() == 7);
    CHECK(doc["args"][0]["role"] == "scalar");
    CHECK(doc["args"][0]["value"] == 32.0);
    CHECK_FALSE(doc["args"][0].contains("length"));
    CHECK(doc["args"][4]["role"] == "input");
    CHECK(doc["args"][4]["length"] == 34 * 18);
    CHECK_FALSE(doc["args"][4].contains("value"));
    CHECK(doc["args"][6]["role"] == "output");
    CHECK(doc["args"][6]["fill"] == "none");
}

TEST_CASE("response parsing accepts the documented shapes") {
    EvaluationResult ok = parse_external_response(
        R"({"status":"ok","time_ms":1.5})", "");
    CHECK(ok.status == Status::success);
    CHECK(ok.time_ms == 1.5);

    EvaluationResult compile = parse_external_response(
        R"({"status":"compile_error","message":"nope"})", "");
    CHECK(compile.status == Status::compile_error);
    CHECK(compile.message == "nope");

    EvaluationResult full = parse_external_response(
        R"({"status":"ok","time_ms":2.0,)"
        R"("outputs_digest":["abcd"],"outputs":[[1.0,2.5]]})",
        "");
    CHECK(full.output_digests == std::vector<std::string>{"abcd"});
    REQUIRE(full.outputs.size() == 1);
    CHECK(std::get<BufferF32>(full.outputs[0]) == BufferF32{1.0f, 2.5f});
}

TEST_CASE("response parsing rejects schema violations") {
    auto rejects = [](const std::string& text) {
        CHECK_THROWS_AS(parse_external_response(text, ""), ProtocolViolation);
    };
    rejects("not json");
    rejects("[1,2,3]");
    rejects(R"({"time_ms":1.0})");
    rejects(R"({"status":5})");
    rejects(R"({"status":"great"})");
    rejects(R"({"status":"ok"})");
    rejects(R"({"status":"ok","time_ms":"fast"})");
    rejects(R"({"status":"ok","time_ms":0})");
    rejects(R"({"status":"ok","time_ms":-1.0})");
    rejects(R"({"status":"runtime_error","time_ms":1.0})");
    rejects(R"({"status":"ok","time_ms":1.0,"vendor":"x"})");
    rejects(R"({"status":"ok","time_ms":1.0,"outputs_digest":"abcd"})");
    rejects(R"({"status":"ok","time_ms":1.0,"outputs":[1.0]})");
    rejects(R"({"status":"ok","time_ms":1.0,"message":7})");

    try {
        parse_external_response("nope", "diagnostic from the runner");
        FAIL("expected ProtocolViolation");
    } catch (const ProtocolViolation& err) {
        CHECK(std::string(err.what()).find("diagnostic from the runner")
              != std::string::npos);
    }
}

TEST_CASE("stub runner round-trips the protocol") {
    ExternalBackend backend = stub("ok");
    CHECK(backend.name() == "external:" + stub_path());
    CHECK_FALSE(backend.concurrency_safe());

    EvaluationResult first = backend.evaluate(sample_request());
    REQUIRE(first.ok());
    CHECK(first.time_ms > 1.0);
    CHECK(first.time_ms < 2.0);

    // The stub derives its reply from the configuration: same request, same
    // time; different configuration, different time.
    EvaluationResult second = backend.evaluate(sample_request());
    CHECK(second.time_ms == first.time_ms);

    EvaluationRequest other = sample_request();
    SearchSpace space = conv_space();
    other.config = space.make_configuration({16, 8, 2, 2, 1, 2, 0, 0});
    CHECK(backend.evaluate(other).time_ms != first.time_ms);
}

TEST_CASE("stub runner fixed reply maps to success") {
    EvaluationResult result = stub("ok-fixed").evaluate(sample_request());
    REQUIRE(result.ok());
    CHECK(result.time_ms == 1.5);
}

TEST_CASE("failure statuses map to failed evaluations") {
    EvaluationResult compile =
        stub("compile_error").evaluate(sample_request());
    CHECK(compile.status == Status::compile_error);
    CHECK(compile.message == "unsupported configuration");

    EvaluationResult runtime =
        stub("runtime_error").evaluate(sample_request());
    CHECK(runtime.status == Status::runtime_error);
    CHECK(runtime.message == "device lost");
}

TEST_CASE("digests and output buffers come back through the pipe") {
    EvaluationResult digest = stub("ok-digest").evaluate(sample_request());
    REQUIRE(digest.ok());
    CHECK(digest.output_digests
          == std::vector<std::string>{"00ff00ff00ff00ff"});
    CHECK(digest.outputs.empty());

    EvaluationResult outputs = stub("ok-outputs").evaluate(sample_request());
    REQUIRE(outputs.ok());
    REQUIRE(outputs.outputs.size() == 1);
    CHECK(std::get<BufferF32>(outputs.outputs[0])
          == BufferF32{1.0f, 2.5f, -3.25f});
}

TEST_CASE("a sleeping runner is killed and reported as a timeout") {
    ExternalBackend backend = stub("timeout", 300);
    auto start = std::chrono::steady_clock::now();
    EvaluationResult result = backend.evaluate(sample_request());
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                       std::chrono::steady_clock::now() - start)
                       .count();
    CHECK(result.status == Status::runtime_error);
    CHECK(result.message.find("timeout") != std::string::npos);
    CHECK(elapsed < 5000);  // killed shortly after the 300 ms deadline
}

TEST_CASE("protocol breakage throws with the runner's stderr attached") {
    try {
        stub("garbage").evaluate(sample_request());
        FAIL("expected ProtocolViolation");
    } catch (const ProtocolViolation& err) {
        std::string what = err.what();
        CHECK(what.find("not a JSON object") != std::string::npos);
        CHECK(what.find("stub runner stderr note") != std::string::npos);
    }

    try {
        stub("exit2").evaluate(sample_request());
        FAIL("expected ProtocolViolation");
    } catch (const ProtocolViolation& err) {
        CHECK(std::string(err.what()).find("exit code 2")
              != std::string::npos);
    }

    CHECK_THROWS_AS(stub("ok-bad-time").evaluate(sample_request()),
                    ProtocolViolation);
    CHECK_THROWS_AS(stub("ok-no-time").evaluate(sample_request()),
                    ProtocolViolation);
    CHECK_THROWS_AS(stub("bad-status").evaluate(sample_request()),
                    ProtocolViolation);
    CHECK_THROWS_AS(stub("extra-key").evaluate(sample_request()),
                    ProtocolViolation);
}

TEST_CASE("unspawnable commands throw SpawnFailure") {
    ExternalBackend backend({"/nonexistent/kernel-runner"}, 1000);
    CHECK_THROWS_AS(backend.evaluate(sample_request()), SpawnFailure);
    CHECK_THROWS_AS(ExternalBackend({}), SpawnFailure);
    CHECK_THROWS_AS(ExternalBackend({"true"}, 0), Error);
}

TEST_CASE("worker counts above one opt into concurrent evaluation") {
    ExternalBackend backend({stub_path(), "ok"}, 10000, 4);
    CHECK(backend.concurrency_safe());
    CHECK(backend.workers() == 4);
}
