#pragma once

// Brute-force parameter-count oracle. Enumerates every layer's shape
// explicitly and sums weight/bias/bn counts, independent of the lowering
// path it is used to check. Keep this file free of dnnlab/graph.hpp.

#include <cstdint>
#include <vector>

#include "dnnlab/workload.hpp"

namespace dnnlab::testing {

using i64 = std::int64_t;

struct DenseShape {
    i64 in = 0;
    i64 out = 0;
};
struct ConvShape {
    i64 kernel = 0;
    i64 in_ch = 0;
    i64 out_ch = 0;
};

inline i64 dense_param_count(const DenseShape& d) { return d.in * d.out + d.out; }
inline i64 conv_param_count(const ConvShape& c) {
    return c.kernel * c.kernel * c.in_ch * c.out_ch + c.out_ch;
}
inline i64 bn_param_count(i64 channels) { return 2 * channels; }

inline i64 oracle_params(const FcSpec& s) {
    std::vector<DenseShape> layers;
    i64 in = s.input_units;
    for (i64 l = 0; l < s.layers; ++l) {
        layers.push_back({in, s.nodes_per_layer});
        in = s.nodes_per_layer;
    }
    layers.push_back({in, s.output_units});

    i64 total = 0;
    for (const DenseShape& d : layers) total += dense_param_count(d);
    return total;
}

inline i64 oracle_params(const CnnSpec& s) {
    std::vector<ConvShape> convs;
    std::vector<i64> bns;

    convs.push_back({7, 3, s.min_filters});  // stem
    bns.push_back(s.min_filters);

    i64 channels = s.min_filters;
    for (int g = 0; g < 4; ++g) {
        const i64 width = s.min_filters << g;
        for (i64 b = 0; b < s.blocks_per_group[static_cast<std::size_t>(g)]; ++b) {
            if (s.block_kind == BlockKind::bottleneck) {
                convs.push_back({1, channels, width});
                bns.push_back(width);
                convs.push_back({3, width, width});
                bns.push_back(width);
                convs.push_back({1, width, 4 * width});
                bns.push_back(4 * width);
                channels = 4 * width;
            } else {
                convs.push_back({3, channels, width});
                bns.push_back(width);
                convs.push_back({3, width, width});
                bns.push_back(width);
                channels = width;
            }
        }
    }

    i64 total = 0;
    for (const ConvShape& c : convs) total += conv_param_count(c);
    for (i64 c : bns) total += bn_param_count(c);
    total += dense_param_count({channels, s.output_classes});
    return total;
}

inline i64 oracle_params(const RnnSpec& s) {
    const i64 embed = s.embedding_size;
    const i64 hidden = embed;
    i64 gates = 1;
    if (s.cell_kind == CellKind::gru) gates = 3;
    if (s.cell_kind == CellKind::lstm) gates = 4;

    i64 total = s.vocab_size * embed;  // table, no bias
    for (i64 l = 0; l < s.layers; ++l)
        total += gates * ((embed + hidden) * hidden + hidden);
    total += dense_param_count({hidden, s.vocab_size});
    return total;
}

inline i64 oracle_params(const ModelSpec& spec) {
    switch (spec.family()) {
        case Family::fc: return oracle_params(spec.fc());
        case Family::cnn: return oracle_params(spec.cnn());
        case Family::rnn: return oracle_params(spec.rnn());
    }
    return -1;
}

}  // namespace dnnlab::testing
