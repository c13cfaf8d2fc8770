#include "dnnlab/workload.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dnnlab {

using nlohmann::json;

std::string to_string(Family f) {
    switch (f) {
        case Family::fc: return "fc";
        case Family::cnn: return "cnn";
        case Family::rnn: return "rnn";
    }
    throw std::logic_error("bad family tag");
}

std::string to_string(BlockKind k) {
    return k == BlockKind::residual ? "residual" : "bottleneck";
}

std::string to_string(CellKind k) {
    switch (k) {
        case CellKind::basic: return "basic";
        case CellKind::lstm: return "lstm";
        case CellKind::gru: return "gru";
    }
    throw std::logic_error("bad cell tag");
}

Family family_from_string(const std::string& s) {
    if (s == "fc") return Family::fc;
    if (s == "cnn") return Family::cnn;
    if (s == "rnn") return Family::rnn;
    throw std::invalid_argument("unknown family: " + s);
}

BlockKind block_kind_from_string(const std::string& s) {
    if (s == "residual") return BlockKind::residual;
    if (s == "bottleneck") return BlockKind::bottleneck;
    throw std::invalid_argument("unknown block kind: " + s);
}

CellKind cell_kind_from_string(const std::string& s) {
    if (s == "basic") return CellKind::basic;
    if (s == "lstm") return CellKind::lstm;
    if (s == "gru") return CellKind::gru;
    throw std::invalid_argument("unknown cell kind: " + s);
}

bool CnnSpec::uniform_blocks() const {
    return blocks_per_group[0] == blocks_per_group[1] &&
           blocks_per_group[1] == blocks_per_group[2] &&
           blocks_per_group[2] == blocks_per_group[3];
}

std::int64_t ModelSpec::batch_size() const {
    return std::visit([](const auto& s) { return s.batch_size; }, payload);
}

// ---------------------------------------------------------------------------
// JSON serde
// ---------------------------------------------------------------------------

json spec_to_json(const ModelSpec& spec) {
    json j;
    j["family"] = to_string(spec.family());
    j["dtype"] = spec.dtype;
    switch (spec.family()) {
        case Family::fc: {
            const FcSpec& s = spec.fc();
            j["layers"] = s.layers;
            j["nodes_per_layer"] = s.nodes_per_layer;
            j["input_units"] = s.input_units;
            j["output_units"] = s.output_units;
            j["batch_size"] = s.batch_size;
            break;
        }
        case Family::cnn: {
            const CnnSpec& s = spec.cnn();
            j["block_kind"] = to_string(s.block_kind);
            if (s.uniform_blocks()) {
                j["blocks_per_group"] = s.blocks_per_group[0];
            } else {
                j["blocks_per_group"] = s.blocks_per_group;
            }
            j["min_filters"] = s.min_filters;
            j["image_side"] = s.image_side;
            j["output_classes"] = s.output_classes;
            j["batch_size"] = s.batch_size;
            break;
        }
        case Family::rnn: {
            const RnnSpec& s = spec.rnn();
            j["cell_kind"] = to_string(s.cell_kind);
            j["layers"] = s.layers;
            j["embedding_size"] = s.embedding_size;
            j["max_seq_length"] = s.max_seq_length;
            j["vocab_size"] = s.vocab_size;
            j["batch_size"] = s.batch_size;
            break;
        }
    }
    return j;
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec spec;
    Family family = family_from_string(j.at("family").get<std::string>());
    spec.dtype = j.value("dtype", std::string("bfloat16"));
    switch (family) {
        case Family::fc: {
            FcSpec s;
            s.layers = j.at("layers").get<std::int64_t>();
            s.nodes_per_layer = j.at("nodes_per_layer").get<std::int64_t>();
            s.input_units = j.at("input_units").get<std::int64_t>();
            s.output_units = j.at("output_units").get<std::int64_t>();
            s.batch_size = j.at("batch_size").get<std::int64_t>();
            spec.payload = s;
            break;
        }
        case Family::cnn: {
            CnnSpec s;
            s.block_kind = block_kind_from_string(j.at("block_kind").get<std::string>());
            const json& blocks = j.at("blocks_per_group");
            if (blocks.is_array()) {
                if (blocks.size() != 4)
                    throw std::invalid_argument("blocks_per_group must have 4 groups");
                for (int g = 0; g < 4; ++g) s.blocks_per_group[g] = blocks[g].get<std::int64_t>();
            } else {
                s.set_blocks(blocks.get<std::int64_t>());
            }
            s.min_filters = j.at("min_filters").get<std::int64_t>();
            s.image_side = j.at("image_side").get<std::int64_t>();
            s.output_classes = j.at("output_classes").get<std::int64_t>();
            s.batch_size = j.at("batch_size").get<std::int64_t>();
            spec.payload = s;
            break;
        }
        case Family::rnn: {
            RnnSpec s;
            s.cell_kind = cell_kind_from_string(j.at("cell_kind").get<std::string>());
            s.layers = j.at("layers").get<std::int64_t>();
            s.embedding_size = j.at("embedding_size").get<std::int64_t>();
            s.max_seq_length = j.at("max_seq_length").get<std::int64_t>();
            s.vocab_size = j.at("vocab_size").get<std::int64_t>();
            s.batch_size = j.at("batch_size").get<std::int64_t>();
            spec.payload = s;
            break;
        }
    }
    return spec;
}

std::string spec_hash(const ModelSpec& spec) {
    // FNV-1a over the canonical serialized form.
    const std::string text = spec_to_json(spec).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// Sweep grids
// ---------------------------------------------------------------------------

std::vector<std::int64_t> DimRange::values() const {
    if (min > max) throw std::invalid_argument("dimension " + name + ": min > max");
    if (rule == StepRule::add && step <= 0)
        throw std::invalid_argument("dimension " + name + ": additive step must be positive");
    if (rule == StepRule::mul && step <= 1)
        throw std::invalid_argument("dimension " + name + ": multiplicative step must exceed 1");
    if (rule == StepRule::mul && min <= 0)
        throw std::invalid_argument("dimension " + name + ": multiplicative range needs min >= 1");
    std::vector<std::int64_t> out;
    for (std::int64_t v = min; v <= max;) {
        out.push_back(v);
        if (rule == StepRule::add) {
            v += step;
        } else {
            if (v > max / step) break;  // overflow guard
            v *= step;
        }
    }
    return out;
}

const DimRange* SweepGrid::find(const std::string& name) const {
    for (const DimRange& d : dims)
        if (d.name == name) return &d;
    return nullptr;
}

DimRange* SweepGrid::find(const std::string& name) {
    for (DimRange& d : dims)
        if (d.name == name) return &d;
    return nullptr;
}

std::int64_t SweepGrid::size() const {
    std::int64_t n = 1;
    for (const DimRange& d : dims) n *= static_cast<std::int64_t>(d.values().size());
    return n;
}

json grid_to_json(const SweepGrid& grid) {
    json j = json::object();
    for (const DimRange& d : grid.dims) {
        j[d.name] = {{"min", d.min},
                     {"max", d.max},
                     {"step", d.step},
                     {"rule", d.rule == StepRule::add ? "add" : "mul"}};
    }
    return j;
}

SweepGrid grid_from_json(const json& j) {
    SweepGrid grid;
    for (auto it = j.begin(); it != j.end(); ++it) {
        DimRange d;
        d.name = it.key();
        d.min = it.value().at("min").get<std::int64_t>();
        d.max = it.value().at("max").get<std::int64_t>();
        d.step = it.value().at("step").get<std::int64_t>();
        const std::string rule = it.value().at("rule").get<std::string>();
        if (rule == "add") {
            d.rule = StepRule::add;
        } else if (rule == "mul") {
            d.rule = StepRule::mul;
        } else {
            throw std::invalid_argument("dimension " + d.name + ": unknown rule " + rule);
        }
        grid.dims.push_back(d);
    }
    return grid;
}

const std::vector<std::string>& canonical_dims(Family family) {
    static const std::vector<std::string> fc{"layer", "node", "input", "output", "batch"};
    static const std::vector<std::string> cnn{"block", "filter", "image", "output", "batch"};
    static const std::vector<std::string> rnn{"layer", "embed", "length", "vocab", "batch"};
    switch (family) {
        case Family::fc: return fc;
        case Family::cnn: return cnn;
        case Family::rnn: return rnn;
    }
    throw std::logic_error("bad family tag");
}

namespace {

DimRange dim(std::string name, std::int64_t min, std::int64_t max, std::int64_t step,
             StepRule rule) {
    return DimRange{std::move(name), min, max, step, rule};
}

}  // namespace

const std::map<Family, SweepGrid>& builtin_grids() {
    static const std::map<Family, SweepGrid> grids = [] {
        std::map<Family, SweepGrid> g;
        g[Family::fc].dims = {
            dim("layer", 4, 128, 2, StepRule::mul),
            dim("node", 32, 8192, 2, StepRule::mul),
            dim("input", 2000, 8000, 2000, StepRule::add),
            dim("output", 200, 1000, 200, StepRule::add),
            dim("batch", 64, 16384, 2, StepRule::mul),
        };
        g[Family::cnn].dims = {
            dim("block", 1, 8, 1, StepRule::add),
            dim("filter", 16, 64, 2, StepRule::mul),
            dim("image", 200, 300, 50, StepRule::add),
            dim("output", 500, 1500, 500, StepRule::add),
            dim("batch", 64, 1024, 2, StepRule::mul),
        };
        g[Family::rnn].dims = {
            dim("layer", 1, 13, 4, StepRule::add),
            dim("embed", 100, 900, 400, StepRule::add),
            dim("length", 10, 90, 40, StepRule::add),
            dim("vocab", 2, 1024, 4, StepRule::mul),
            dim("batch", 16, 1024, 4, StepRule::mul),
        };
        return g;
    }();
    return grids;
}

namespace {

ModelSpec make_spec(Family family, const std::vector<std::int64_t>& v,
                    const ExpandOptions& opts) {
    // v follows canonical dimension order.
    ModelSpec spec;
    spec.dtype = opts.dtype;
    switch (family) {
        case Family::fc:
            spec.payload = FcSpec{v[0], v[1], v[2], v[3], v[4]};
            break;
        case Family::cnn: {
            CnnSpec s;
            s.block_kind = opts.block_kind;
            s.set_blocks(v[0]);
            s.min_filters = v[1];
            s.image_side = v[2];
            s.output_classes = v[3];
            s.batch_size = v[4];
            spec.payload = s;
            break;
        }
        case Family::rnn: {
            RnnSpec s;
            s.cell_kind = opts.cell_kind;
            s.layers = v[0];
            s.embedding_size = v[1];
            s.max_seq_length = v[2];
            s.vocab_size = v[3];
            s.batch_size = v[4];
            spec.payload = s;
            break;
        }
    }
    return spec;
}

}  // namespace

std::vector<ModelSpec> expand_grid(const SweepGrid& grid, Family family,
                                   const ExpandOptions& opts) {
    const std::vector<std::string>& order = canonical_dims(family);
    for (const DimRange& d : grid.dims) {
        if (std::find(order.begin(), order.end(), d.name) == order.end())
            throw std::invalid_argument("dimension " + d.name + " not part of family " +
                                        to_string(family));
    }
    std::vector<std::vector<std::int64_t>> axes;
    axes.reserve(order.size());
    for (const std::string& name : order) {
        const DimRange* d = grid.find(name);
        if (!d) throw std::invalid_argument("grid is missing dimension " + name);
        std::vector<std::int64_t> vals = d->values();
        if (vals.empty()) throw std::invalid_argument("dimension " + name + " is empty");
        axes.push_back(std::move(vals));
    }

    std::int64_t total = 1;
    for (const auto& a : axes) total *= static_cast<std::int64_t>(a.size());

    std::vector<ModelSpec> out;
    out.reserve(static_cast<std::size_t>(total));
    std::vector<std::size_t> idx(axes.size(), 0);
    std::vector<std::int64_t> point(axes.size());
    for (std::int64_t n = 0; n < total; ++n) {
        for (std::size_t k = 0; k < axes.size(); ++k) point[k] = axes[k][idx[k]];
        out.push_back(make_spec(family, point, opts));
        // Row-major increment: last dimension varies fastest.
        for (std::size_t k = axes.size(); k-- > 0;) {
            if (++idx[k] < axes[k].size()) break;
            idx[k] = 0;
        }
    }
    return out;
}

namespace {

void require_positive(std::vector<std::string>& out, std::int64_t value, const char* field) {
    if (value < 1) {
        std::ostringstream os;
        os << field << " must be >= 1 (got " << value << ")";
        out.push_back(os.str());
    }
}

}  // namespace

std::vector<std::string> validate_spec(const ModelSpec& spec) {
    std::vector<std::string> violations;
    switch (spec.family()) {
        case Family::fc: {
            const FcSpec& s = spec.fc();
            require_positive(violations, s.layers, "layers");
            require_positive(violations, s.nodes_per_layer, "nodes_per_layer");
            require_positive(violations, s.input_units, "input_units");
            require_positive(violations, s.output_units, "output_units");
            require_positive(violations, s.batch_size, "batch_size");
            break;
        }
        case Family::cnn: {
            const CnnSpec& s = spec.cnn();
            if (!s.uniform_blocks()) violations.push_back("uniform blocks across the 4 groups");
            require_positive(violations,
                             *std::min_element(s.blocks_per_group.begin(), s.blocks_per_group.end()),
                             "blocks_per_group");
            require_positive(violations, s.min_filters, "min_filters");
            require_positive(violations, s.image_side, "image_side");
            require_positive(violations, s.output_classes, "output_classes");
            require_positive(violations, s.batch_size, "batch_size");
            break;
        }
        case Family::rnn: {
            const RnnSpec& s = spec.rnn();
            require_positive(violations, s.layers, "layers");
            require_positive(violations, s.embedding_size, "embedding_size");
            require_positive(violations, s.max_seq_length, "max_seq_length");
            require_positive(violations, s.vocab_size, "vocab_size");
            require_positive(violations, s.batch_size, "batch_size");
            break;
        }
    }
    return violations;
}

}  // namespace dnnlab
