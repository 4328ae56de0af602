#include <catch2/catch_amalgamated.hpp>

#include "ktune/device.hpp"
#include "ktune/kernel.hpp"
#include "ktune/space.hpp"

using namespace ktune;

namespace {

SearchSpace tile_space() {
    SearchSpace space;
    space.add_parameter("X", {8, 16, 32});
    space.add_parameter("Y", {1, 2, 4, 8});
    return space;
}

KernelSpec tile_kernel() {
    KernelSpec kernel;
    kernel.name = "tile";
    kernel.base_global = {64, 64};
    kernel.base_local = {1, 1};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::multiply, {"X", "1"}},
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide, {"1", "Y"}},
        ThreadSizeModifier{SizeTarget::local, SizeOp::multiply, {"X", "Y"}},
    };
    kernel.local_mem_expr = "4 * X * Y";
    return kernel;
}

}  // namespace

TEST_CASE("thread sizes resolved from parameters and literals") {
    SearchSpace space = tile_space();
    KernelSpec kernel = tile_kernel();

    ResolvedSizes sizes =
        resolve_thread_sizes(kernel, space.make_configuration({8, 4}));
    CHECK(sizes.global == std::vector<size_t>{512, 16});
    CHECK(sizes.local == std::vector<size_t>{8, 4});

    sizes = resolve_thread_sizes(kernel, space.make_configuration({32, 1}));
    CHECK(sizes.global == std::vector<size_t>{2048, 64});
    CHECK(sizes.local == std::vector<size_t>{32, 1});
}

TEST_CASE("identity factor leaves a dimension untouched") {
    SearchSpace space = tile_space();
    KernelSpec kernel;
    kernel.base_global = {100, 7};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::multiply, {"1", "1"}},
    };
    ResolvedSizes sizes =
        resolve_thread_sizes(kernel, space.make_configuration({8, 1}));
    CHECK(sizes.global == std::vector<size_t>{100, 7});
    CHECK(sizes.local.empty());
}

TEST_CASE("integer-literal factors scale without parameters") {
    SearchSpace space = tile_space();
    KernelSpec kernel;
    kernel.base_global = {24};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::multiply, {"3"}},
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide, {"8"}},
    };
    ResolvedSizes sizes =
        resolve_thread_sizes(kernel, space.make_configuration({8, 1}));
    CHECK(sizes.global == std::vector<size_t>{9});
}

TEST_CASE("modifier factor count must match the dimension count") {
    SearchSpace space = tile_space();
    KernelSpec kernel;
    kernel.base_global = {64, 64};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::multiply, {"X"}},
    };
    CHECK_THROWS_AS(
        resolve_thread_sizes(kernel, space.make_configuration({8, 1})),
        Error);
}

TEST_CASE("inexact division is rejected with the offending dimension") {
    SearchSpace space = tile_space();
    KernelSpec kernel;
    kernel.base_global = {8, 64};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide, {"X", "1"}},
    };
    // 8 / 16 does not divide evenly.
    try {
        resolve_thread_sizes(kernel, space.make_configuration({16, 1}));
        FAIL("expected InexactDivision");
    } catch (const InexactDivision& err) {
        CHECK(err.dim == 0);
        CHECK(err.numerator == 8);
        CHECK(err.divisor == 16);
    }
}

TEST_CASE("zero divisors are rejected") {
    SearchSpace space;
    space.add_parameter("Z", {0, 1});
    KernelSpec kernel;
    kernel.base_global = {64};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide, {"Z"}},
    };
    try {
        resolve_thread_sizes(kernel, space.make_configuration({0}));
        FAIL("expected ZeroDivisor");
    } catch (const ZeroDivisor& err) {
        CHECK(err.dim == 0);
    }
    ResolvedSizes sizes =
        resolve_thread_sizes(kernel, space.make_configuration({1}));
    CHECK(sizes.global == std::vector<size_t>{64});
}

TEST_CASE("device presets expose the published capability table") {
    DeviceModel k40m = device_preset("K40m");
    CHECK(k40m.max_work_group_total == 1024);
    CHECK(k40m.max_work_group_dim[0] == 1024);
    CHECK(k40m.max_work_group_dim[2] == 64);
    CHECK(k40m.local_mem_bytes == 49152);
    CHECK(k40m.peak_gflops == Catch::Approx(4291.0));
    CHECK(k40m.peak_gbs == Catch::Approx(288.0));

    DeviceModel tahiti = device_preset("HD7970");
    CHECK(tahiti.max_work_group_total == 256);
    CHECK(tahiti.local_mem_bytes == 32768);

    DeviceModel iris = device_preset("Iris5100");
    CHECK(iris.max_work_group_total == 512);
    CHECK(iris.local_mem_bytes == 65536);

    CHECK(device_preset_names().size() == 4);
    CHECK_THROWS_AS(device_preset("GTX9000"), UnknownDevice);
}

TEST_CASE("device constraints accept and reject by work-group limits") {
    SearchSpace space = tile_space();
    KernelSpec kernel = tile_kernel();
    DeviceModel device;
    device.name = "toy";
    device.max_work_group_total = 64;
    device.max_work_group_dim = {32, 4, 64};
    device.local_mem_bytes = 256;

    Predicate limits = device_constraints(kernel, device, space);
    CHECK(limits.label == "device-limits:toy");

    auto ok = [&](Value x, Value y) {
        return limits.fn(space.make_configuration({x, y}));
    };
    CHECK(ok(8, 4));        // local {8,4}: total 32, mem 128
    CHECK(ok(32, 2));       // local {32,2}: total 64, mem 256 -- both at cap
    CHECK_FALSE(ok(32, 4)); // total 128 exceeds 64
    CHECK_FALSE(ok(8, 8));  // dimension 1 exceeds its cap of 4
    CHECK_FALSE(ok(16, 8)); // both violations at once
}

TEST_CASE("device constraints enforce the local-memory budget") {
    SearchSpace space = tile_space();
    KernelSpec kernel = tile_kernel();
    DeviceModel device;
    device.name = "toy";
    device.max_work_group_total = 1024;
    device.max_work_group_dim = {1024, 1024, 64};
    device.local_mem_bytes = 200;

    Predicate limits = device_constraints(kernel, device, space);
    CHECK(limits.fn(space.make_configuration({8, 4})));        // 128 bytes
    CHECK_FALSE(limits.fn(space.make_configuration({32, 2}))); // 256 bytes
}

TEST_CASE("kernels without a local-memory expression skip that check") {
    SearchSpace space = tile_space();
    KernelSpec kernel = tile_kernel();
    kernel.local_mem_expr.clear();
    DeviceModel device;
    device.name = "toy";
    device.max_work_group_total = 1024;
    device.max_work_group_dim = {1024, 1024, 64};
    device.local_mem_bytes = 0;

    Predicate limits = device_constraints(kernel, device, space);
    CHECK(limits.fn(space.make_configuration({32, 2})));
}

TEST_CASE("unresolvable thread sizes fail the predicate instead of throwing") {
    SearchSpace space;
    space.add_parameter("D", {0, 3, 8});
    KernelSpec kernel;
    kernel.name = "divider";
    kernel.base_global = {64};
    kernel.base_local = {8};
    kernel.modifiers = {
        ThreadSizeModifier{SizeTarget::global, SizeOp::divide, {"D"}},
    };
    DeviceModel device;
    device.name = "toy";
    device.max_work_group_total = 1024;
    device.max_work_group_dim = {1024, 1024, 64};
    device.local_mem_bytes = 0;

    Predicate limits = device_constraints(kernel, device, space);
    CHECK_FALSE(limits.fn(space.make_configuration({0})));  // zero divisor
    CHECK_FALSE(limits.fn(space.make_configuration({3})));  // 64 % 3 != 0
    CHECK(limits.fn(space.make_configuration({8})));
}

TEST_CASE("composed space counts only launchable configurations") {
    SearchSpace space = tile_space();
    KernelSpec kernel = tile_kernel();
    DeviceModel device;
    device.name = "toy";
    device.max_work_group_total = 64;
    device.max_work_group_dim = {32, 4, 64};
    device.local_mem_bytes = 512;

    space.add_predicate(device_constraints(kernel, device, space));
    // By hand over X in {8,16,32}, Y in {1,2,4,8} with X*Y <= 64, Y <= 4:
    //   X=8:  Y in {1,2,4}          -> 3
    //   X=16: Y in {1,2,4}          -> 3
    //   X=32: Y in {1,2}            -> 2
    CHECK(space.valid_count() == 8);
    CHECK(space.constraint_only_count() == 12);
}
