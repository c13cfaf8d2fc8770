#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dnnlab/graph.hpp"
#include "dnnlab/platform.hpp"

namespace dnnlab {

enum class Boundedness { compute_bound, memory_bound };

std::string to_string(Boundedness b);

// Highest achievable FLOP/s at arithmetic intensity ai:
// min(peak_flops, ai * mem_bandwidth).
double attainable_flops(double ai, const PlatformSpec& platform);

// memory_bound iff ai < peak/bandwidth; the ridge point itself counts as
// compute_bound.
Boundedness classify(double ai, const PlatformSpec& platform);

struct OpTime {
    std::string name;
    double seconds = 0.0;
    Boundedness bound = Boundedness::memory_bound;
};

struct PerfEstimate {
    std::vector<OpTime> per_op;
    double device_step_time = 0.0;   // seconds
    double host_step_time = 0.0;     // seconds; 0 when no host model
    double effective_step_time = 0.0;  // max(device, host)
    double examples_per_sec = 0.0;
    double flops_utilization = 0.0;    // total flops / (effective * peak)
    double infeed_wait_fraction = 0.0;
};

// Roofline step-time estimate. Each op takes max(flops/peak, bytes/bw);
// weight-sync traffic moves at the platform's interconnect-effective rate
// instead of the memory ramp. Per-op times sum (no overlap). The graph must
// have been lowered at `batch`; throws on out-of-memory.
PerfEstimate estimate(const OpGraph& graph, const PlatformSpec& platform,
                      std::int64_t batch, const DType& dtype);

struct ScalingReport {
    std::int64_t n_cores = 0;
    double utilization_1 = 0.0;
    double utilization_n = 0.0;
    double non_parallel_fraction = 0.0;  // Amdahl serial share, in [0,1]
};

// Invert Amdahl's law from single-core vs n-core utilization. With
// r = utilization_n / utilization_1 the observed speedup is S = n*r and the
// implied serial fraction is f = (1/r - 1)/(n - 1), clamped to [0,1].
// Throws on r > 1 (superlinear input).
ScalingReport amdahl_fraction(double utilization_1, double utilization_n,
                              std::int64_t n);

struct InfeedReport {
    double wait_fraction = 0.0;    // device idle share waiting on the host
    double resolve_speedup = 1.0;  // gain if the host bottleneck vanished
};

// wait = max(0, host - device)/max(host, device);
// speedup = max(host, device)/device. Throws when device is zero.
InfeedReport infeed_analysis(double device_step_time, double host_step_time);

struct OpSpeedup {
    std::string name;
    OpKind kind = OpKind::matmul;
    double ai_a = 0.0;
    double ai_b = 0.0;
    double speedup = 0.0;  // attainable_b(ai_b) / attainable_a(ai_a)
};

struct SpeedupEstimate {
    std::vector<OpSpeedup> per_op;
    double end_to_end = 0.0;  // examples/sec on b over examples/sec on a
};

// Generational per-op speedup of platform b over platform a when b runs a
// larger batch (batch_b/batch_a). Batch-scaling ops see their intensity grow
// by that ratio on b; fixed-intensity ops keep it. The graph must have been
// lowered at batch_a and must fit on both platforms at their batches.
SpeedupEstimate gen_speedup(const OpGraph& graph, const PlatformSpec& platform_a,
                            const PlatformSpec& platform_b, std::int64_t batch_a,
                            std::int64_t batch_b, const DType& dtype);

}  // namespace dnnlab
