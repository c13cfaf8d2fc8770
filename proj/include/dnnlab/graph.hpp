#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dnnlab/platform.hpp"
#include "dnnlab/workload.hpp"

namespace dnnlab {

enum class OpKind {
    matmul,
    conv,
    batchnorm,
    pool,
    activation,
    embedding_lookup,
    recurrent_cell_gates,
    weight_sync,
    loop_fusion_like,
};

std::string to_string(OpKind k);

// Whether an op's arithmetic intensity grows with batch size. MatMul-like
// ops amortize fixed weight traffic over more rows as batch grows; ops whose
// traffic is activation-dominated (conv, pool, ...) keep AI roughly flat, as
// does weight synchronization (traffic proportional to parameter count only).
enum class BatchScaling { intensity_scales_with_batch, intensity_fixed };

// One lowered training operation. flops and bytes cover the full training
// step (forward plus backward passes); params is the op's trainable
// parameter count.
struct OpNode {
    std::string name;
    OpKind kind = OpKind::matmul;
    std::int64_t flops = 0;
    std::int64_t bytes_read = 0;
    std::int64_t bytes_written = 0;
    std::int64_t params = 0;
    BatchScaling batch_scaling = BatchScaling::intensity_fixed;

    std::int64_t bytes() const { return bytes_read + bytes_written; }
};

// Forward-topological op sequence plus the aggregates the memory model needs.
// activation_elems_per_example counts forward activation elements (input
// included) per training example; multiply by dtype width for bytes.
struct OpGraph {
    std::vector<OpNode> ops;
    std::int64_t total_params = 0;
    std::int64_t activation_elems_per_example = 0;
};

struct OpCost {
    double arithmetic_intensity = 0.0;  // FLOPs per byte moved
    std::int64_t flops = 0;
    std::int64_t bytes = 0;
};

// Lower a model spec into its training op graph under the cold-traffic cost
// model: every op reads its inputs and weights from main memory and writes
// its outputs back, once per pass. Parametric ops run three passes (forward,
// input-gradient, weight-gradient), non-parametric ops two, embedding lookups
// two (gather + scatter-add), weight sync one.
OpGraph lower(const ModelSpec& spec);

// Intensity = flops / (bytes_read + bytes_written). Byte fields already
// carry the dtype width used at lowering; pass the same dtype here. Throws
// if the node reports flops with zero bytes.
OpCost op_cost(const OpNode& node, const DType& dtype);

// Per-core training memory footprint in bytes:
//   3 * total_params * 4   (weights, gradients, optimizer state, 32-bit)
// + activation_elems_per_example * (batch / cores) * dtype width.
// Throws "batch unsplittable" when batch < cores.
double footprint(const OpGraph& graph, const PlatformSpec& platform,
                 std::int64_t batch, const DType& dtype);

// Op-list export: [{"name":..., "kind":..., "flops":..., "bytes":...,
// "params":...}, ...].
nlohmann::json graph_to_json(const OpGraph& graph);

}  // namespace dnnlab
