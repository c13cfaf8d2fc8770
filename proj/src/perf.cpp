#include "dnnlab/perf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dnnlab {

std::string to_string(Boundedness b) {
    return b == Boundedness::compute_bound ? "compute" : "memory";
}

double attainable_flops(double ai, const PlatformSpec& platform) {
    if (ai < 0) throw std::invalid_argument("arithmetic intensity must be >= 0");
    return std::min(platform.peak_flops, ai * platform.mem_bandwidth);
}

Boundedness classify(double ai, const PlatformSpec& platform) {
    return ai < platform.ridge_point() ? Boundedness::memory_bound
                                       : Boundedness::compute_bound;
}

namespace {

double op_seconds(const OpNode& op, const PlatformSpec& platform) {
    if (op.kind == OpKind::weight_sync)
        return static_cast<double>(op.bytes()) / platform.effective_interconnect_bandwidth();
    const double compute = static_cast<double>(op.flops) / platform.peak_flops;
    const double memory = static_cast<double>(op.bytes()) / platform.mem_bandwidth;
    return std::max(compute, memory);
}

}  // namespace

PerfEstimate estimate(const OpGraph& graph, const PlatformSpec& platform,
                      std::int64_t batch, const DType& dtype) {
    if (fits(graph, platform, batch, dtype) == FitVerdict::oom)
        throw std::runtime_error("configuration is out of memory on " + platform.name);

    PerfEstimate e;
    e.per_op.reserve(graph.ops.size());
    double total_flops = 0.0;
    for (const OpNode& op : graph.ops) {
        const OpCost cost = op_cost(op, dtype);
        OpTime t;
        t.name = op.name;
        t.seconds = op_seconds(op, platform);
        t.bound = classify(cost.arithmetic_intensity, platform);
        e.device_step_time += t.seconds;
        total_flops += static_cast<double>(op.flops);
        e.per_op.push_back(std::move(t));
    }
    e.host_step_time = platform.host_throughput
                           ? static_cast<double>(batch) / *platform.host_throughput
                           : 0.0;
    e.effective_step_time = std::max(e.device_step_time, e.host_step_time);
    if (e.effective_step_time > 0) {
        e.examples_per_sec = static_cast<double>(batch) / e.effective_step_time;
        e.flops_utilization = total_flops / (e.effective_step_time * platform.peak_flops);
        e.infeed_wait_fraction =
            std::max(0.0, e.host_step_time - e.device_step_time) / e.effective_step_time;
    }
    return e;
}

ScalingReport amdahl_fraction(double utilization_1, double utilization_n,
                              std::int64_t n) {
    if (n < 2) throw std::invalid_argument("need n >= 2 cores");
    if (!(utilization_n > 0) || !(utilization_1 > 0) || utilization_1 > 1)
        throw std::invalid_argument("need 0 < utilization_n and 0 < utilization_1 <= 1");
    const double r = utilization_n / utilization_1;
    if (r > 1.0) throw std::invalid_argument("superlinear input");

    ScalingReport rep;
    rep.n_cores = n;
    rep.utilization_1 = utilization_1;
    rep.utilization_n = utilization_n;
    // Observed speedup S = n*r; Amdahl gives S = 1/(f + (1-f)/n), hence
    // f = (n/S - 1)/(n - 1) = (1/r - 1)/(n - 1).
    const double f = (1.0 / r - 1.0) / (static_cast<double>(n) - 1.0);
    rep.non_parallel_fraction = std::clamp(f, 0.0, 1.0);
    return rep;
}

InfeedReport infeed_analysis(double device_step_time, double host_step_time) {
    if (device_step_time < 0 || host_step_time < 0)
        throw std::invalid_argument("step times must be >= 0");
    if (device_step_time == 0)
        throw std::invalid_argument("device step time must be positive");
    InfeedReport r;
    const double slower = std::max(host_step_time, device_step_time);
    r.wait_fraction = std::max(0.0, host_step_time - device_step_time) / slower;
    r.resolve_speedup = slower / device_step_time;
    return r;
}

SpeedupEstimate gen_speedup(const OpGraph& graph, const PlatformSpec& platform_a,
                            const PlatformSpec& platform_b, std::int64_t batch_a,
                            std::int64_t batch_b, const DType& dtype) {
    if (fits(graph, platform_a, batch_a, dtype) == FitVerdict::oom)
        throw std::runtime_error("graph is out of memory on " + platform_a.name);
    if (fits(graph, platform_b, batch_b, dtype) == FitVerdict::oom)
        throw std::runtime_error("graph is out of memory on " + platform_b.name);

    const double batch_ratio =
        static_cast<double>(batch_b) / static_cast<double>(batch_a);

    SpeedupEstimate s;
    s.per_op.reserve(graph.ops.size());
    double time_a = 0.0;
    double time_b = 0.0;
    for (const OpNode& op : graph.ops) {
        const OpCost cost = op_cost(op, dtype);
        OpSpeedup ps;
        ps.name = op.name;
        ps.kind = op.kind;
        ps.ai_a = cost.arithmetic_intensity;
        ps.ai_b = op.batch_scaling == BatchScaling::intensity_scales_with_batch
                      ? ps.ai_a * batch_ratio
                      : ps.ai_a;

        // Work per step scales with batch for everything except the
        // parameter-proportional sync op.
        const double flops_a = static_cast<double>(op.flops);
        const double flops_b =
            op.kind == OpKind::weight_sync ? flops_a : flops_a * batch_ratio;

        double op_time_a;
        double op_time_b;
        if (op.kind == OpKind::weight_sync) {
            op_time_a = static_cast<double>(op.bytes()) /
                        platform_a.effective_interconnect_bandwidth();
            op_time_b = static_cast<double>(op.bytes()) /
                        platform_b.effective_interconnect_bandwidth();
            ps.speedup = op_time_a / op_time_b;
        } else {
            op_time_a = flops_a / attainable_flops(ps.ai_a, platform_a);
            op_time_b = flops_b / attainable_flops(ps.ai_b, platform_b);
            ps.speedup = attainable_flops(ps.ai_b, platform_b) /
                         attainable_flops(ps.ai_a, platform_a);
        }
        time_a += op_time_a;
        time_b += op_time_b;
        s.per_op.push_back(std::move(ps));
    }
    const double eps_a = static_cast<double>(batch_a) / time_a;
    const double eps_b = static_cast<double>(batch_b) / time_b;
    s.end_to_end = eps_b / eps_a;
    return s;
}

}  // namespace dnnlab
