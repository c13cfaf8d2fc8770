#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dnnlab {

enum class Family { fc, cnn, rnn };
enum class BlockKind { residual, bottleneck };
enum class CellKind { basic, lstm, gru };

std::string to_string(Family f);
std::string to_string(BlockKind k);
std::string to_string(CellKind k);
Family family_from_string(const std::string& s);
BlockKind block_kind_from_string(const std::string& s);
CellKind cell_kind_from_string(const std::string& s);

// Multi-layer perceptron: input -> layers x nodes -> output. Node count is
// uniform across layers.
struct FcSpec {
    std::int64_t layers = 1;
    std::int64_t nodes_per_layer = 1;
    std::int64_t input_units = 1;
    std::int64_t output_units = 1;
    std::int64_t batch_size = 1;
};

// Residual-style image classifier: a stem followed by four groups of blocks,
// then a dense classifier head. Filters double per group starting from
// min_filters; every group has the same block count. The per-group array
// exists so a malformed (non-uniform) spec is representable and reportable;
// generated specs are always uniform.
struct CnnSpec {
    BlockKind block_kind = BlockKind::residual;
    std::array<std::int64_t, 4> blocks_per_group{1, 1, 1, 1};
    std::int64_t min_filters = 1;
    std::int64_t image_side = 1;  // square input, 3 channels
    std::int64_t output_classes = 1;
    std::int64_t batch_size = 1;

    void set_blocks(std::int64_t n) { blocks_per_group = {n, n, n, n}; }
    bool uniform_blocks() const;
    // Filter count of group g in [0,4).
    std::int64_t filters(int group) const { return min_filters << group; }
};

// Token-sequence model: embedding, stacked recurrent layers unrolled over
// max_seq_length, output projection. Hidden width equals embedding_size.
struct RnnSpec {
    CellKind cell_kind = CellKind::basic;
    std::int64_t layers = 1;
    std::int64_t embedding_size = 1;
    std::int64_t max_seq_length = 1;
    std::int64_t vocab_size = 1;
    std::int64_t batch_size = 1;
};

struct ModelSpec {
    std::variant<FcSpec, CnnSpec, RnnSpec> payload;
    std::string dtype = "bfloat16";

    Family family() const { return static_cast<Family>(payload.index()); }
    std::int64_t batch_size() const;

    const FcSpec& fc() const { return std::get<FcSpec>(payload); }
    const CnnSpec& cnn() const { return std::get<CnnSpec>(payload); }
    const RnnSpec& rnn() const { return std::get<RnnSpec>(payload); }
};

// Short stable identifier derived from the canonical JSON form; used to tie
// result rows and roofline points back to their spec.
std::string spec_hash(const ModelSpec& spec);

// JSON round trip. Layout: {"family": "fc", "dtype": "...", <fields>}.
nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Sweep grids
// ---------------------------------------------------------------------------

enum class StepRule { add, mul };

struct DimRange {
    std::string name;
    std::int64_t min = 1;
    std::int64_t max = 1;
    std::int64_t step = 1;
    StepRule rule = StepRule::add;

    // {min, min∘step, ...} truncated at max (never exceeds it).
    std::vector<std::int64_t> values() const;
};

struct SweepGrid {
    std::vector<DimRange> dims;

    const DimRange* find(const std::string& name) const;
    DimRange* find(const std::string& name);
    std::int64_t size() const;  // product of per-dimension value counts
};

// JSON object keyed by dimension name:
// {"layer": {"min":4,"max":128,"step":2,"rule":"mul"}, ...}
nlohmann::json grid_to_json(const SweepGrid& grid);
SweepGrid grid_from_json(const nlohmann::json& j);

// Canonical dimension names per family, in expansion order (last varies
// fastest): fc {layer,node,input,output,batch}, cnn
// {block,filter,image,output,batch}, rnn {layer,embed,length,vocab,batch}.
const std::vector<std::string>& canonical_dims(Family family);

// The built-in sweep grids, one per family.
const std::map<Family, SweepGrid>& builtin_grids();

struct ExpandOptions {
    BlockKind block_kind = BlockKind::residual;
    CellKind cell_kind = CellKind::basic;
    std::string dtype = "bfloat16";
};

// Cartesian expansion into concrete specs, row-major over the family's
// canonical dimension order. Pure and deterministic. Throws on an empty
// dimension or an unknown dimension name.
std::vector<ModelSpec> expand_grid(const SweepGrid& grid, Family family,
                                   const ExpandOptions& opts = {});

// Every violated invariant as human-readable text; empty iff valid.
std::vector<std::string> validate_spec(const ModelSpec& spec);

}  // namespace dnnlab
