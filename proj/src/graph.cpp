#include "dnnlab/graph.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dnnlab {

std::string to_string(OpKind k) {
    switch (k) {
        case OpKind::matmul: return "matmul";
        case OpKind::conv: return "conv";
        case OpKind::batchnorm: return "batchnorm";
        case OpKind::pool: return "pool";
        case OpKind::activation: return "activation";
        case OpKind::embedding_lookup: return "embedding_lookup";
        case OpKind::recurrent_cell_gates: return "recurrent_cell_gates";
        case OpKind::weight_sync: return "weight_sync";
        case OpKind::loop_fusion_like: return "loop_fusion_like";
    }
    throw std::logic_error("bad op kind");
}

namespace {

using i64 = std::int64_t;

// Pass counts under the cold-traffic model. Parametric ops run forward,
// input-gradient, and weight-gradient passes; each pass streams one op-sized
// set of reads and writes, so flops and bytes share the multiplier.
constexpr i64 kParametricPasses = 3;
constexpr i64 kNonParametricPasses = 2;  // forward + input-gradient

constexpr i64 kBatchNormFwdFlopsPerElem = 4;  // stats + normalize + scale/shift

struct Lowering {
    explicit Lowering(i64 dtype_width) : width(dtype_width) {}

    std::vector<OpNode> ops;
    i64 width;  // dtype bytes

    // Generic parametric node: per pass reads `in_elems` activations plus the
    // weights, writes `out_elems`.
    void parametric(std::string name, OpKind kind, i64 fwd_flops, i64 in_elems,
                    i64 out_elems, i64 params, BatchScaling scaling) {
        OpNode n;
        n.name = std::move(name);
        n.kind = kind;
        n.flops = kParametricPasses * fwd_flops;
        n.bytes_read = kParametricPasses * (in_elems + params) * width;
        n.bytes_written = kParametricPasses * out_elems * width;
        n.params = params;
        n.batch_scaling = scaling;
        ops.push_back(std::move(n));
        activation_elems_add(out_elems);
    }

    void nonparametric(std::string name, OpKind kind, i64 fwd_flops, i64 in_elems,
                       i64 out_elems) {
        OpNode n;
        n.name = std::move(name);
        n.kind = kind;
        n.flops = kNonParametricPasses * fwd_flops;
        n.bytes_read = kNonParametricPasses * in_elems * width;
        n.bytes_written = kNonParametricPasses * out_elems * width;
        n.params = 0;
        n.batch_scaling = BatchScaling::intensity_fixed;
        ops.push_back(std::move(n));
        activation_elems_add(out_elems);
    }

    // Whole-batch element counts; converted to per-example on finish.
    void activation_elems_add(i64 out_elems_batch) { batch_out_elems += out_elems_batch; }

    // Append the sync node and package the graph.
    OpGraph finish(i64 batch);

    i64 batch_out_elems = 0;
};

i64 dense_fwd_flops(i64 batch, i64 in, i64 out) { return 2 * batch * in * out; }
i64 dense_params(i64 in, i64 out) { return in * out + out; }

void add_dense(Lowering& lw, std::string name, i64 batch, i64 in, i64 out,
               BatchScaling scaling) {
    lw.parametric(std::move(name), OpKind::matmul, dense_fwd_flops(batch, in, out),
                  batch * in, batch * out, dense_params(in, out), scaling);
}

OpGraph Lowering::finish(i64 batch) {
    i64 total_params = 0;
    for (const OpNode& n : ops) total_params += n.params;

    // Cross-replica gradient accumulation: one add per two values streamed
    // in. Runs once per step; traffic is parameter-proportional and does not
    // scale with batch.
    OpNode sync;
    sync.name = "weight_sync";
    sync.kind = OpKind::weight_sync;
    sync.flops = total_params;
    sync.bytes_read = 2 * total_params * width;
    sync.bytes_written = 0;
    sync.params = 0;  // carries no trainable parameters of its own
    sync.batch_scaling = BatchScaling::intensity_fixed;
    ops.push_back(std::move(sync));

    OpGraph g;
    g.ops = std::move(ops);
    g.total_params = total_params;
    g.activation_elems_per_example = batch_out_elems / batch;
    return g;
}

// SAME-padded spatial shrink.
i64 conv_out_side(i64 in, i64 stride) { return (in + stride - 1) / stride; }

void add_conv(Lowering& lw, std::string name, i64 batch, i64 in_side, i64 out_side,
              i64 c_in, i64 c_out, i64 kernel) {
    const i64 fwd = 2 * batch * out_side * out_side * c_in * c_out * kernel * kernel;
    const i64 params = kernel * kernel * c_in * c_out + c_out;
    lw.parametric(std::move(name), OpKind::conv, fwd, batch * in_side * in_side * c_in,
                  batch * out_side * out_side * c_out, params,
                  BatchScaling::intensity_fixed);
}

void add_batchnorm(Lowering& lw, std::string name, i64 batch, i64 side, i64 channels) {
    const i64 elems = batch * side * side * channels;
    lw.parametric(std::move(name), OpKind::batchnorm, kBatchNormFwdFlopsPerElem * elems,
                  elems, elems, 2 * channels, BatchScaling::intensity_fixed);
}

OpGraph lower_fc(const FcSpec& s, i64 width) {
    Lowering lw(width);
    const i64 B = s.batch_size;
    i64 in = s.input_units;
    lw.activation_elems_add(B * s.input_units);  // the input batch itself
    for (i64 l = 0; l < s.layers; ++l) {
        add_dense(lw, "dense_" + std::to_string(l), B, in, s.nodes_per_layer,
                  BatchScaling::intensity_scales_with_batch);
        in = s.nodes_per_layer;
    }
    add_dense(lw, "dense_out", B, in, s.output_units,
              BatchScaling::intensity_scales_with_batch);
    return lw.finish(B);
}

OpGraph lower_cnn(const CnnSpec& s, i64 width) {
    Lowering lw(width);
    const i64 B = s.batch_size;
    const bool bottleneck = s.block_kind == BlockKind::bottleneck;
    const i64 expansion = bottleneck ? 4 : 1;

    lw.activation_elems_add(B * s.image_side * s.image_side * 3);

    // Stem: 7x7 stride-2 conv to min_filters, then 3x3 stride-2 max pool.
    i64 side = conv_out_side(s.image_side, 2);
    add_conv(lw, "stem_conv", B, s.image_side, side, 3, s.min_filters, 7);
    add_batchnorm(lw, "stem_bn", B, side, s.min_filters);
    {
        const i64 pooled = conv_out_side(side, 2);
        lw.nonparametric("stem_pool", OpKind::pool,
                         /*fwd_flops=*/B * pooled * pooled * s.min_filters * 9,
                         B * side * side * s.min_filters,
                         B * pooled * pooled * s.min_filters);
        side = pooled;
    }

    i64 channels = s.min_filters;
    for (int g = 0; g < 4; ++g) {
        const i64 filters = s.filters(g);
        for (i64 b = 0; b < s.blocks_per_group[static_cast<std::size_t>(g)]; ++b) {
            const std::string tag = "g" + std::to_string(g) + "_b" + std::to_string(b) + "_";
            const i64 stride = (b == 0 && g > 0) ? 2 : 1;
            if (bottleneck) {
                add_conv(lw, tag + "conv1", B, side, side, channels, filters, 1);
                add_batchnorm(lw, tag + "bn1", B, side, filters);
                const i64 out_side = conv_out_side(side, stride);
                add_conv(lw, tag + "conv2", B, side, out_side, filters, filters, 3);
                add_batchnorm(lw, tag + "bn2", B, out_side, filters);
                add_conv(lw, tag + "conv3", B, out_side, out_side, filters,
                         filters * expansion, 1);
                add_batchnorm(lw, tag + "bn3", B, out_side, filters * expansion);
                side = out_side;
                channels = filters * expansion;
            } else {
                const i64 out_side = conv_out_side(side, stride);
                add_conv(lw, tag + "conv1", B, side, out_side, channels, filters, 3);
                add_batchnorm(lw, tag + "bn1", B, out_side, filters);
                add_conv(lw, tag + "conv2", B, out_side, out_side, filters, filters, 3);
                add_batchnorm(lw, tag + "bn2", B, out_side, filters);
                side = out_side;
                channels = filters;
            }
        }
    }

    // Global average pool then the classifier head.
    lw.nonparametric("avg_pool", OpKind::pool, B * side * side * channels,
                     B * side * side * channels, B * channels);
    add_dense(lw, "classifier", B, channels, s.output_classes,
              BatchScaling::intensity_scales_with_batch);
    return lw.finish(B);
}

i64 gate_count(CellKind kind) {
    switch (kind) {
        case CellKind::basic: return 1;
        case CellKind::gru: return 3;
        case CellKind::lstm: return 4;
    }
    throw std::logic_error("bad cell tag");
}

OpGraph lower_rnn(const RnnSpec& s, i64 width) {
    Lowering lw(width);
    const i64 B = s.batch_size;
    const i64 E = s.embedding_size;
    const i64 H = E;  // hidden width matches the embedding
    const i64 L = s.max_seq_length;
    const i64 V = s.vocab_size;

    lw.activation_elems_add(B * L);  // token ids

    // Embedding gather; backward is a scatter-add into the table gradient.
    // Index traffic is negligible and left out so byte totals stay linear in
    // the dtype width.
    {
        OpNode n;
        n.name = "embedding";
        n.kind = OpKind::embedding_lookup;
        n.flops = B * L * E;  // scatter-add accumulation
        n.bytes_read = ((V * E) + (B * L * E)) * width;     // table, then grad stream
        n.bytes_written = ((B * L * E) + (V * E)) * width;  // activations, table grads
        n.params = V * E;
        n.batch_scaling = BatchScaling::intensity_fixed;
        lw.ops.push_back(std::move(n));
        lw.activation_elems_add(B * L * E);
    }

    // One node per layer; costs cover the full unroll over L timesteps. Gate
    // matrices are (E+H) x H; weights restream every timestep.
    const i64 gates = gate_count(s.cell_kind);
    const i64 gate_params_per_layer = gates * ((E + H) * H + H);
    for (i64 l = 0; l < s.layers; ++l) {
        const i64 fwd = L * gates * 2 * B * (E + H) * H;
        const i64 in_elems = L * (B * E + B * H);  // x_t plus h_{t-1}
        const i64 out_elems = L * B * H;
        lw.parametric(to_string(s.cell_kind) + "_cells_l" + std::to_string(l),
                      OpKind::recurrent_cell_gates, fwd, in_elems, out_elems,
                      gate_params_per_layer, BatchScaling::intensity_scales_with_batch);
        // The per-pass weight traffic restreams once per timestep, not once
        // per node; patch the read side accordingly.
        OpNode& n = lw.ops.back();
        n.bytes_read = kParametricPasses * (in_elems + L * gate_params_per_layer) * width;
    }

    // Output projection over all B*L positions as one fused matmul.
    add_dense(lw, "projection", B * L, H, V, BatchScaling::intensity_scales_with_batch);
    return lw.finish(B);
}

}  // namespace

OpGraph lower(const ModelSpec& spec) {
    const std::vector<std::string> violations = validate_spec(spec);
    if (!violations.empty())
        throw std::invalid_argument("invalid spec: " + violations.front());
    const i64 width = dtype_by_name(spec.dtype).width;
    switch (spec.family()) {
        case Family::fc: return lower_fc(spec.fc(), width);
        case Family::cnn: return lower_cnn(spec.cnn(), width);
        case Family::rnn: return lower_rnn(spec.rnn(), width);
    }
    throw std::invalid_argument("unknown model family");
}

OpCost op_cost(const OpNode& node, const DType& dtype) {
    (void)dtype;  // widths are baked in at lowering; kept for call-site clarity
    const i64 bytes = node.bytes();
    if (node.flops > 0 && bytes == 0)
        throw std::invalid_argument("op " + node.name + ": nonzero flops with zero bytes");
    OpCost c;
    c.flops = node.flops;
    c.bytes = bytes;
    c.arithmetic_intensity =
        bytes == 0 ? 0.0 : static_cast<double>(node.flops) / static_cast<double>(bytes);
    return c;
}

double footprint(const OpGraph& graph, const PlatformSpec& platform, std::int64_t batch,
                 const DType& dtype) {
    if (platform.cores_per_board < 1)
        throw std::invalid_argument("platform must have at least one core");
    if (batch < platform.cores_per_board)
        throw std::invalid_argument("batch unsplittable: batch " + std::to_string(batch) +
                                    " < cores " + std::to_string(platform.cores_per_board));
    // Master weights, gradients, and the optimizer accumulator stay 32-bit.
    const double weight_bytes = 3.0 * static_cast<double>(graph.total_params) * 4.0;
    const double per_core_examples =
        static_cast<double>(batch) / static_cast<double>(platform.cores_per_board);
    const double activation_bytes =
        static_cast<double>(graph.activation_elems_per_example) * per_core_examples *
        static_cast<double>(dtype.width);
    return weight_bytes + activation_bytes;
}

nlohmann::json graph_to_json(const OpGraph& graph) {
    nlohmann::json ops = nlohmann::json::array();
    for (const OpNode& n : graph.ops) {
        ops.push_back({{"name", n.name},
                       {"kind", to_string(n.kind)},
                       {"flops", n.flops},
                       {"bytes", n.bytes()},
                       {"params", n.params}});
    }
    return {{"ops", ops},
            {"total_params", graph.total_params},
            {"activation_elems_per_example", graph.activation_elems_per_example}};
}

}  // namespace dnnlab
