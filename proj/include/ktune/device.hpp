#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ktune/errors.hpp"

namespace ktune {

/// The device-side limits a configuration must respect before it can launch,
/// plus informational peak numbers for roofline context in reports.
struct DeviceModel {
    std::string name = "generic";
    size_t max_work_group_total = 1024;
    std::array<size_t, 3> max_work_group_dim = {1024, 1024, 64};
    size_t local_mem_bytes = 49152;
    double peak_gflops = 0.0;  // 0 = unknown
    double peak_gbs = 0.0;     // 0 = unknown
};

/// Built-in device models. Work-group and local-memory limits follow the
/// vendor architecture of each part (NVIDIA Kepler/Fermi: 1024 threads,
/// 48 KiB; AMD GCN: 256 threads, 32 KiB; Intel Gen7.5: 512 threads, 64 KiB);
/// the peak numbers are the published theoretical maxima for these boards.
inline DeviceModel device_preset(const std::string& name) {
    if (name == "K40m") {
        return DeviceModel{"K40m", 1024, {1024, 1024, 64}, 49152, 4291.0,
                           288.0};
    }
    if (name == "GTX480") {
        return DeviceModel{"GTX480", 1024, {1024, 1024, 64}, 49152, 1345.0,
                           177.0};
    }
    if (name == "HD7970") {
        return DeviceModel{"HD7970", 256, {256, 256, 256}, 32768, 4368.0,
                           288.0};
    }
    if (name == "Iris5100") {
        return DeviceModel{"Iris5100", 512, {512, 512, 512}, 65536, 832.0,
                           26.0};
    }
    throw UnknownDevice(name);
}

inline std::vector<std::string> device_preset_names() {
    return {"K40m", "GTX480", "HD7970", "Iris5100"};
}

}  // namespace ktune
