#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dnnlab {

// Numeric storage format. width is the per-element size of compute tensors;
// master weight copies and optimizer state always live in 32-bit regardless.
struct DType {
    std::string name;
    std::int64_t width = 4;  // bytes, one of {1,2,4,8}

    bool valid() const { return width == 1 || width == 2 || width == 4 || width == 8; }
};

bool operator==(const DType& a, const DType& b);

// Known dtypes: float32, bfloat16, float16, float64, int8.
const std::vector<DType>& builtin_dtypes();
const DType& dtype_by_name(const std::string& name);
bool is_known_dtype(const std::string& name);

// One hardware platform. Rates are board-level; memory capacity is per core.
// Batches split evenly across cores (data parallelism), each core holding a
// full weight replica, so mem_per_core bounds the supported model size.
struct PlatformSpec {
    std::string name;
    double peak_flops = 0.0;          // FLOP/s, whole board
    double mem_bandwidth = 0.0;       // bytes/s, whole board
    double mem_per_core = 0.0;        // bytes
    std::int64_t cores_per_board = 1;
    std::optional<double> host_throughput;   // examples/s the host can feed
    std::optional<double> interconnect_bandwidth;  // bytes/s for weight sync;
                                                   // defaults to mem_bandwidth
    std::vector<std::string> supported_dtypes;     // first entry is the default

    double effective_interconnect_bandwidth() const {
        return interconnect_bandwidth.value_or(mem_bandwidth);
    }
    // Arithmetic intensity at which the bandwidth ramp meets the compute
    // ceiling (FLOPs/byte).
    double ridge_point() const { return peak_flops / mem_bandwidth; }

    bool valid() const;
};

// The four reference platforms, keyed by name: "cpu", "gpu-v100", "tpu-v2",
// "tpu-v3". tpu-v3 bandwidth (3.6 TB/s) is an empirical estimate, not a
// vendor figure; override via a platform file if better data exists.
const std::map<std::string, PlatformSpec>& builtin_platforms();
const PlatformSpec& platform_by_name(const std::string& name);

const DType& default_dtype(const PlatformSpec& platform);

// Load platform overrides/additions from a JSON or TOML file. Keys are
// platform names, values carry the PlatformSpec fields. Built-ins stay
// available unless a file entry shadows the same name.
std::map<std::string, PlatformSpec> load_platforms(const std::string& path);

struct OpGraph;  // graph.hpp

enum class FitVerdict { fits, oom };

// oom iff the per-core footprint exceeds mem_per_core.
FitVerdict fits(const OpGraph& graph, const PlatformSpec& platform,
                std::int64_t batch, const DType& dtype);

// Largest power-of-two batch (>= cores_per_board) whose footprint fits,
// capped at kMaxBatchLimit. Throws if the weights alone exceed per-core
// memory.
inline constexpr std::int64_t kMaxBatchLimit = std::int64_t{1} << 24;
std::int64_t max_batch(const OpGraph& graph, const PlatformSpec& platform,
                       const DType& dtype);

}  // namespace dnnlab
