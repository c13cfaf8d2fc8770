#include "dnnlab/platform.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dnnlab/config_file.hpp"
#include "dnnlab/graph.hpp"

namespace dnnlab {

bool operator==(const DType& a, const DType& b) {
    return a.name == b.name && a.width == b.width;
}

const std::vector<DType>& builtin_dtypes() {
    static const std::vector<DType> dtypes = {
        {"float32", 4}, {"bfloat16", 2}, {"float16", 2}, {"float64", 8}, {"int8", 1},
    };
    return dtypes;
}

const DType& dtype_by_name(const std::string& name) {
    for (const DType& d : builtin_dtypes())
        if (d.name == name) return d;
    throw std::invalid_argument("unknown dtype: " + name);
}

bool is_known_dtype(const std::string& name) {
    for (const DType& d : builtin_dtypes())
        if (d.name == name) return true;
    return false;
}

bool PlatformSpec::valid() const {
    if (peak_flops <= 0 || mem_bandwidth <= 0 || mem_per_core <= 0) return false;
    if (cores_per_board < 1) return false;
    if (host_throughput && *host_throughput <= 0) return false;
    if (interconnect_bandwidth && *interconnect_bandwidth <= 0) return false;
    for (const std::string& d : supported_dtypes)
        if (!is_known_dtype(d)) return false;
    return !supported_dtypes.empty();
}

const std::map<std::string, PlatformSpec>& builtin_platforms() {
    static const std::map<std::string, PlatformSpec> platforms = [] {
        std::map<std::string, PlatformSpec> m;
        // Skylake VM treated as one core-equivalent with all memory visible.
        m["cpu"] = PlatformSpec{"cpu", 2e12, 16.6e9, 120e9, 1,
                                std::nullopt, std::nullopt, {"float32"}};
        m["gpu-v100"] = PlatformSpec{"gpu-v100", 125e12, 900e9, 16e9, 1,
                                     std::nullopt, std::nullopt, {"float16", "float32"}};
        m["tpu-v2"] = PlatformSpec{"tpu-v2", 180e12, 2400e9, 8e9, 8,
                                   std::nullopt, std::nullopt, {"bfloat16", "float32"}};
        // v3 bandwidth is inferred from generational speedups, not disclosed.
        m["tpu-v3"] = PlatformSpec{"tpu-v3", 420e12, 3600e9, 16e9, 8,
                                   std::nullopt, std::nullopt, {"bfloat16", "float32"}};
        return m;
    }();
    return platforms;
}

const PlatformSpec& platform_by_name(const std::string& name) {
    const auto& m = builtin_platforms();
    auto it = m.find(name);
    if (it == m.end()) throw std::invalid_argument("unknown platform: " + name);
    return it->second;
}

const DType& default_dtype(const PlatformSpec& platform) {
    if (platform.supported_dtypes.empty())
        throw std::invalid_argument("platform " + platform.name + " supports no dtypes");
    return dtype_by_name(platform.supported_dtypes.front());
}

std::map<std::string, PlatformSpec> load_platforms(const std::string& path) {
    const nlohmann::json j = load_config_file(path);
    std::map<std::string, PlatformSpec> out;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const nlohmann::json& v = it.value();
        PlatformSpec p;
        p.name = it.key();
        p.peak_flops = v.at("peak_flops").get<double>();
        p.mem_bandwidth = v.at("mem_bandwidth").get<double>();
        p.mem_per_core = v.at("mem_per_core").get<double>();
        p.cores_per_board = v.value("cores_per_board", std::int64_t{1});
        if (v.contains("host_throughput"))
            p.host_throughput = v.at("host_throughput").get<double>();
        if (v.contains("interconnect_bandwidth"))
            p.interconnect_bandwidth = v.at("interconnect_bandwidth").get<double>();
        p.supported_dtypes =
            v.value("supported_dtypes", std::vector<std::string>{"float32"});
        if (!p.valid())
            throw std::invalid_argument("platform file entry " + p.name + " is invalid");
        out[p.name] = p;
    }
    return out;
}

FitVerdict fits(const OpGraph& graph, const PlatformSpec& platform, std::int64_t batch,
                const DType& dtype) {
    return footprint(graph, platform, batch, dtype) > platform.mem_per_core
               ? FitVerdict::oom
               : FitVerdict::fits;
}

std::int64_t max_batch(const OpGraph& graph, const PlatformSpec& platform,
                       const DType& dtype) {
    const double weight_bytes = 3.0 * static_cast<double>(graph.total_params) * 4.0;
    if (weight_bytes > platform.mem_per_core)
        throw std::runtime_error("model weights alone exceed per-core memory on " +
                                 platform.name);
    std::int64_t smallest = 1;
    while (smallest < platform.cores_per_board) smallest *= 2;
    if (fits(graph, platform, smallest, dtype) == FitVerdict::oom)
        throw std::runtime_error("no feasible batch: even batch " +
                                 std::to_string(smallest) + " is out of memory on " +
                                 platform.name);
    std::int64_t best = smallest;
    while (best < kMaxBatchLimit &&
           fits(graph, platform, best * 2, dtype) == FitVerdict::fits) {
        best *= 2;
    }
    return best;
}

}  // namespace dnnlab
