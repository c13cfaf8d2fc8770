#include "dnnlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dnnlab/config_file.hpp"
#include "dnnlab/graph.hpp"

namespace dnnlab {

using nlohmann::json;

namespace {

// Hyperparameter columns shared across families; blank when inapplicable.
const std::vector<std::string> kHyperparamColumns = {
    "variant", "layer", "node", "input", "output", "block",
    "filter",  "image", "embed", "length", "vocab",
};

const std::vector<std::string> kMetricColumns = {
    "examples_per_sec",
    "flops_utilization",
    "device_step_time_s",
    "infeed_wait_fraction",
};

std::vector<std::string> schema_columns() {
    std::vector<std::string> cols = {"family"};
    cols.insert(cols.end(), kHyperparamColumns.begin(), kHyperparamColumns.end());
    cols.insert(cols.end(), {"platform", "dtype", "batch"});
    cols.insert(cols.end(), kMetricColumns.begin(), kMetricColumns.end());
    cols.insert(cols.end(), {"status", "source"});
    return cols;
}

std::string format_metric(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string variant_of(const ModelSpec& spec) {
    switch (spec.family()) {
        case Family::fc: return "";
        case Family::cnn: return to_string(spec.cnn().block_kind);
        case Family::rnn: return to_string(spec.rnn().cell_kind);
    }
    return "";
}

// The non-batch dimension value as text, or blank if the dimension does not
// belong to the spec's family.
std::string dim_text(const ModelSpec& spec, const std::string& dim) {
    const std::vector<std::string>& dims = canonical_dims(spec.family());
    if (std::find(dims.begin(), dims.end(), dim) == dims.end()) return "";
    return std::to_string(dim_value(spec, dim));
}

bool blank_line(const std::string& line) {
    return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    out.push_back(cell);
    return out;
}

std::string row_key(const ResultRow& row) {
    return spec_hash(row.spec) + "|" + row.platform + "|" + row.source;
}

double parse_metric_cell(const std::string& cell, const std::string& column, int line_no) {
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used == cell.size()) return v;
    } catch (const std::exception&) {
    }
    throw std::runtime_error("row " + std::to_string(line_no) + ": non-numeric " + column +
                             " value '" + cell + "'");
}

std::int64_t parse_int_cell(const std::string& cell, const std::string& column, int line_no) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(cell, &used);
        if (used == cell.size()) return v;
    } catch (const std::exception&) {
    }
    throw std::runtime_error("row " + std::to_string(line_no) + ": bad " + column +
                             " value '" + cell + "'");
}

}  // namespace

const char* const kResultCsvHeader =
    "family,variant,layer,node,input,output,block,filter,image,embed,length,vocab,"
    "platform,dtype,batch,examples_per_sec,flops_utilization,device_step_time_s,"
    "infeed_wait_fraction,status,source";

std::string result_csv(const ResultTable& table) {
    std::ostringstream out;
    out << kResultCsvHeader << "\n";
    for (const ResultRow& row : table.rows) {
        out << to_string(row.spec.family()) << ',' << variant_of(row.spec);
        for (std::size_t i = 1; i < kHyperparamColumns.size(); ++i)
            out << ',' << dim_text(row.spec, kHyperparamColumns[i]);
        out << ',' << row.platform << ',' << row.spec.dtype << ','
            << row.spec.batch_size();
        out << ',' << format_metric(row.examples_per_sec) << ','
            << format_metric(row.flops_utilization) << ','
            << format_metric(row.device_step_time_s) << ','
            << format_metric(row.infeed_wait_fraction);
        out << ',' << row.status << ',' << row.source << "\n";
    }
    return out.str();
}

void write_result_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << result_csv(table);
}

namespace {

ModelSpec spec_from_cells(const std::map<std::string, std::string>& cells, int line_no) {
    const Family family = family_from_string(cells.at("family"));
    const auto dim_cell = [&](const std::string& dim) {
        return parse_int_cell(cells.at(dim), dim, line_no);
    };
    ModelSpec spec;
    spec.dtype = cells.at("dtype");
    if (!is_known_dtype(spec.dtype))
        throw std::runtime_error("row " + std::to_string(line_no) + ": unknown dtype '" +
                                 spec.dtype + "'");
    const std::int64_t batch = parse_int_cell(cells.at("batch"), "batch", line_no);
    switch (family) {
        case Family::fc:
            spec.payload = FcSpec{dim_cell("layer"), dim_cell("node"), dim_cell("input"),
                                  dim_cell("output"), batch};
            break;
        case Family::cnn: {
            CnnSpec s;
            s.block_kind = block_kind_from_string(cells.at("variant"));
            s.set_blocks(dim_cell("block"));
            s.min_filters = dim_cell("filter");
            s.image_side = dim_cell("image");
            s.output_classes = dim_cell("output");
            s.batch_size = batch;
            spec.payload = s;
            break;
        }
        case Family::rnn: {
            RnnSpec s;
            s.cell_kind = cell_kind_from_string(cells.at("variant"));
            s.layers = dim_cell("layer");
            s.embedding_size = dim_cell("embed");
            s.max_seq_length = dim_cell("length");
            s.vocab_size = dim_cell("vocab");
            s.batch_size = batch;
            spec.payload = s;
            break;
        }
    }
    return spec;
}

ResultTable parse_result_csv(const std::string& path, std::ostream* warnings) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");

    const std::vector<std::string> header = split_csv_line(line);
    const std::vector<std::string> expected = schema_columns();
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < header.size(); ++i) index[header[i]] = i;

    std::vector<std::string> missing;
    for (const std::string& col : expected)
        if (!index.count(col)) missing.push_back(col);
    if (!missing.empty()) {
        std::string msg = path + ": header is missing schema columns:";
        for (const std::string& col : missing) msg += " " + col;
        throw std::runtime_error(msg);
    }
    for (const std::string& col : header) {
        if (std::find(expected.begin(), expected.end(), col) == expected.end() && warnings)
            *warnings << "warning: ignoring unknown column '" << col << "'\n";
    }

    ResultTable table;
    std::set<std::string> keys;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_line(line)) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() < header.size())
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": expected " + std::to_string(header.size()) +
                                     " columns, got " + std::to_string(cells.size()));
        std::map<std::string, std::string> named;
        for (const std::string& col : expected) named[col] = cells[index[col]];

        ResultRow row;
        row.spec = spec_from_cells(named, line_no);
        row.platform = named["platform"];
        row.examples_per_sec =
            parse_metric_cell(named["examples_per_sec"], "examples_per_sec", line_no);
        row.flops_utilization =
            parse_metric_cell(named["flops_utilization"], "flops_utilization", line_no);
        row.device_step_time_s =
            parse_metric_cell(named["device_step_time_s"], "device_step_time_s", line_no);
        row.infeed_wait_fraction =
            parse_metric_cell(named["infeed_wait_fraction"], "infeed_wait_fraction", line_no);
        row.status = named["status"];
        if (row.status != "ok" && row.status != "oom")
            throw std::runtime_error("row " + std::to_string(line_no) + ": bad status '" +
                                     row.status + "'");
        row.source = named["source"].empty() ? "measured" : named["source"];
        if (row.source != "estimated" && row.source != "measured")
            throw std::runtime_error("row " + std::to_string(line_no) + ": bad source '" +
                                     row.source + "'");
        if (!keys.insert(row_key(row)).second)
            throw std::runtime_error("row " + std::to_string(line_no) +
                                     ": duplicate (spec, platform, dtype, source) entry");
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace

ResultTable ingest_measurements(const std::string& path, std::ostream* warnings) {
    return parse_result_csv(path, warnings);
}

ResultTable read_result_csv(const std::string& path) {
    return parse_result_csv(path, nullptr);
}

void merge_rows(ResultTable& into, const ResultTable& added) {
    std::set<std::string> keys;
    for (const ResultRow& row : into.rows) keys.insert(row_key(row));
    for (const ResultRow& row : added.rows) {
        if (!keys.insert(row_key(row)).second)
            throw std::runtime_error("merge would duplicate a (spec, platform, dtype, source) entry");
        into.rows.push_back(row);
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

const PlatformSpec& SweepConfig::resolve_platform(const std::string& name) const {
    auto it = extra_platforms.find(name);
    if (it != extra_platforms.end()) return it->second;
    return platform_by_name(name);
}

namespace {

const std::set<std::string> kKnownReports = {"roofline", "heatmap", "regression", "speedup"};

void apply_grid_overrides(SweepGrid& grid, const json& overrides, Family family) {
    for (auto it = overrides.begin(); it != overrides.end(); ++it) {
        const std::vector<std::string>& dims = canonical_dims(family);
        if (std::find(dims.begin(), dims.end(), it.key()) == dims.end())
            throw std::runtime_error("grid override names unknown dimension '" + it.key() +
                                     "' for family");
        DimRange* d = grid.find(it.key());
        const json& o = it.value();
        d->min = o.value("min", d->min);
        d->max = o.value("max", d->max);
        d->step = o.value("step", d->step);
        if (o.contains("rule")) {
            const std::string rule = o.at("rule").get<std::string>();
            if (rule == "add") {
                d->rule = StepRule::add;
            } else if (rule == "mul") {
                d->rule = StepRule::mul;
            } else {
                throw std::runtime_error("grid override for '" + it.key() +
                                         "' has unknown rule '" + rule + "'");
            }
        }
        d->values();  // validates the range
    }
}

}  // namespace

SweepConfig load_config(const std::string& path) {
    const json j = load_config_file(path);
    SweepConfig cfg;

    if (!j.contains("family")) throw std::runtime_error("config: missing 'family'");
    cfg.family = family_from_string(j.at("family").get<std::string>());

    if (j.contains("variant")) {
        const std::string v = j.at("variant").get<std::string>();
        if (cfg.family == Family::cnn) {
            cfg.block_kind = block_kind_from_string(v);
        } else if (cfg.family == Family::rnn) {
            cfg.cell_kind = cell_kind_from_string(v);
        } else {
            throw std::runtime_error("config: 'variant' does not apply to fc");
        }
    }

    if (j.contains("platform_file"))
        cfg.extra_platforms = load_platforms(j.at("platform_file").get<std::string>());

    if (!j.contains("platforms") || !j.at("platforms").is_array() ||
        j.at("platforms").empty())
        throw std::runtime_error("config: 'platforms' must be a non-empty list");
    for (const json& p : j.at("platforms")) {
        const std::string name = p.get<std::string>();
        cfg.resolve_platform(name);  // throws on unknown
        cfg.platforms.push_back(name);
    }

    for (const json& d : j.value("dtypes", json::array())) {
        const std::string name = d.get<std::string>();
        if (!is_known_dtype(name)) throw std::runtime_error("config: unknown dtype " + name);
        cfg.dtypes.push_back(name);
    }

    cfg.grid = builtin_grids().at(cfg.family);
    if (j.contains("grid")) apply_grid_overrides(cfg.grid, j.at("grid"), cfg.family);

    for (const json& r : j.value("reports", json::array())) {
        const std::string name = r.get<std::string>();
        if (!kKnownReports.count(name))
            throw std::runtime_error("config: unknown report request '" + name + "'");
        cfg.reports.push_back(name);
    }

    const std::vector<std::string>& dims = canonical_dims(cfg.family);
    if (j.contains("heatmap")) {
        const json& h = j.at("heatmap");
        HeatmapRequest req;
        req.x = h.at("x").get<std::string>();
        req.y = h.at("y").get<std::string>();
        req.metric = h.value("metric", req.metric);
        if (std::find(dims.begin(), dims.end(), req.x) == dims.end() ||
            std::find(dims.begin(), dims.end(), req.y) == dims.end())
            throw std::runtime_error("config: heatmap axes must be family dimensions");
        req.platform = h.value("platform", std::string{});
        req.dtype = h.value("dtype", std::string{});
        const json pins = h.value("pins", json::object());
        for (const auto& [key, value] : pins.items()) {
            if (std::find(dims.begin(), dims.end(), key) == dims.end())
                throw std::runtime_error("config: heatmap pin names unknown dimension '" +
                                         key + "'");
            req.pins[key] = value.get<std::int64_t>();
        }
        cfg.heatmap_request = req;
    }
    if (j.contains("regression")) {
        RegressionRequest req;
        req.target = j.at("regression").value("target", req.target);
        req.platform = j.at("regression").value("platform", std::string{});
        req.dtype = j.at("regression").value("dtype", std::string{});
        cfg.regression_request = req;
    }
    if (j.contains("speedup")) {
        const json& s = j.at("speedup");
        SpeedupRequest req;
        req.platform_a = s.at("platform_a").get<std::string>();
        req.platform_b = s.at("platform_b").get<std::string>();
        req.color_feature = s.value("color", std::string{});
        cfg.resolve_platform(req.platform_a);
        cfg.resolve_platform(req.platform_b);
        cfg.speedup_request = req;
    }

    cfg.out_dir = j.value("out", cfg.out_dir);
    return cfg;
}

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

RunRecord run_sweep(const SweepConfig& config) {
    if (config.platforms.empty())
        throw std::invalid_argument("empty platform list");

    ExpandOptions opts;
    opts.block_kind = config.block_kind;
    opts.cell_kind = config.cell_kind;
    const std::vector<ModelSpec> specs = expand_grid(config.grid, config.family, opts);

    RunRecord record;
    for (const std::string& platform_name : config.platforms) {
        const PlatformSpec& platform = config.resolve_platform(platform_name);
        std::vector<std::string> dtypes = config.dtypes;
        if (dtypes.empty()) dtypes.push_back(default_dtype(platform).name);
        for (const std::string& dtype_name : dtypes) {
            const DType& dtype = dtype_by_name(dtype_name);
            for (ModelSpec spec : specs) {
                spec.dtype = dtype_name;
                const std::vector<std::string> violations = validate_spec(spec);
                if (!violations.empty())
                    throw std::invalid_argument("generated spec is invalid: " +
                                                violations.front());
                const OpGraph graph = lower(spec);
                const std::string id = spec_hash(spec);
                record.specs_by_id.emplace(id, spec);

                ResultRow row;
                row.spec = spec;
                row.platform = platform_name;
                row.source = "estimated";

                bool feasible = spec.batch_size() >= platform.cores_per_board;
                if (feasible)
                    feasible = fits(graph, platform, spec.batch_size(), dtype) ==
                               FitVerdict::fits;
                if (!feasible) {
                    // Unsplittable batches are recorded as oom too: the
                    // configuration cannot run as specified.
                    row.status = "oom";
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    row.examples_per_sec = nan;
                    row.flops_utilization = nan;
                    row.device_step_time_s = nan;
                    row.infeed_wait_fraction = nan;
                    record.table.rows.push_back(std::move(row));
                    continue;
                }

                const PerfEstimate est = estimate(graph, platform, spec.batch_size(), dtype);
                row.examples_per_sec = est.examples_per_sec;
                row.flops_utilization = est.flops_utilization;
                row.device_step_time_s = est.device_step_time;
                row.infeed_wait_fraction = est.infeed_wait_fraction;
                record.table.rows.push_back(std::move(row));

                for (const OpNode& op : graph.ops) {
                    const OpCost cost = op_cost(op, dtype);
                    RooflinePoint pt;
                    pt.spec_id = id;
                    pt.platform = platform_name;
                    pt.op = op.name;
                    pt.kind = op.kind;
                    pt.ai = cost.arithmetic_intensity;
                    pt.flops_per_sec = attainable_flops(pt.ai, platform);
                    pt.bound = classify(pt.ai, platform);
                    pt.params = op.params;
                    record.roofline.push_back(std::move(pt));
                }
            }
        }
    }
    return record;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

std::string roofline_csv(const std::vector<RooflinePoint>& points) {
    std::ostringstream out;
    out << "spec,platform,op,kind,ai,flops,bound\n";
    for (const RooflinePoint& p : points) {
        out << p.spec_id << ',' << p.platform << ',' << p.op << ',' << to_string(p.kind)
            << ',' << format_metric(p.ai) << ',' << format_metric(p.flops_per_sec) << ','
            << to_string(p.bound) << "\n";
    }
    return out.str();
}

std::string heatmap_csv(const HeatmapGrid& grid) {
    std::ostringstream out;
    out << grid.y_feature << "\\" << grid.x_feature;
    for (std::int64_t x : grid.x_values) out << ',' << x;
    out << "\n";
    for (Eigen::Index r = 0; r < grid.cells.rows(); ++r) {
        out << grid.y_values[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < grid.cells.cols(); ++c)
            out << ',' << format_metric(grid.cells(r, c));
        out << "\n";
    }
    return out.str();
}

std::string regression_csv(const RegressionReport& report) {
    std::ostringstream out;
    out << "feature,weight,raw_min,raw_max,log2\n";
    for (std::size_t i = 0; i < report.features.size(); ++i) {
        out << report.features[i] << ','
            << format_metric(report.weights(static_cast<Eigen::Index>(i)));
        if (i < report.normalization.size()) {
            const Normalization& n = report.normalization[i];
            out << ',' << format_metric(n.min) << ',' << format_metric(n.max) << ','
                << (n.log2_scale ? "true" : "false");
        } else {
            out << ",,,";
        }
        out << "\n";
    }
    out << "intercept," << format_metric(report.intercept) << ",,,\n";
    return out.str();
}

nlohmann::json regression_to_json(const RegressionReport& report) {
    json features = json::array();
    for (std::size_t i = 0; i < report.features.size(); ++i) {
        json f = {{"name", report.features[i]},
                  {"weight", report.weights(static_cast<Eigen::Index>(i))}};
        if (i < report.normalization.size()) {
            const Normalization& n = report.normalization[i];
            f["raw_min"] = n.min;
            f["raw_max"] = n.max;
            f["log2"] = n.log2_scale;
        }
        features.push_back(std::move(f));
    }
    return {{"features", features}, {"intercept", report.intercept}};
}

nlohmann::json heatmap_to_json(const HeatmapGrid& grid) {
    json cells = json::array();
    for (Eigen::Index r = 0; r < grid.cells.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < grid.cells.cols(); ++c) {
            if (std::isnan(grid.cells(r, c)))
                row.push_back(nullptr);  // missing / out-of-memory cell
            else
                row.push_back(grid.cells(r, c));
        }
        cells.push_back(std::move(row));
    }
    return {{"x_feature", grid.x_feature}, {"y_feature", grid.y_feature},
            {"metric", grid.metric},       {"x_values", grid.x_values},
            {"y_values", grid.y_values},   {"cells", cells}};
}

std::string speedup_csv(const std::vector<SpeedupRow>& rows,
                        const std::string& color_feature) {
    std::ostringstream out;
    out << "spec,params,speedup,batch_a,batch_b";
    if (!color_feature.empty()) out << ',' << color_feature;
    out << "\n";
    for (const SpeedupRow& row : rows) {
        out << spec_hash(row.spec) << ',' << lower(row.spec).total_params << ','
            << format_metric(row.speedup) << ',' << row.batch_a << ',' << row.batch_b;
        if (!color_feature.empty()) out << ',' << dim_value(row.spec, color_feature);
        out << "\n";
    }
    return out.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// Restrict a table to one (platform, dtype); blanks fall back to the first
// configured platform and its default dtype.
ResultTable filter_rows(const ResultTable& table, const SweepConfig& config,
                        std::string platform, std::string dtype) {
    if (platform.empty()) platform = config.platforms.front();
    if (dtype.empty()) {
        dtype = config.dtypes.empty()
                    ? default_dtype(config.resolve_platform(platform)).name
                    : config.dtypes.front();
    }
    ResultTable out;
    for (const ResultRow& row : table.rows)
        if (row.platform == platform && row.spec.dtype == dtype) out.rows.push_back(row);
    if (out.rows.empty())
        throw std::invalid_argument("no rows for platform " + platform + " dtype " + dtype);
    return out;
}

}  // namespace

std::vector<std::string> emit_reports(const RunRecord& record, const SweepConfig& config) {
    if (record.table.rows.empty()) throw std::invalid_argument("empty run record");
    std::filesystem::create_directories(config.out_dir);
    std::vector<std::string> written;

    for (const std::string& request : config.reports) {
        if (!kKnownReports.count(request))
            throw std::invalid_argument("unknown report request: " + request);
        const std::string path = config.out_dir + "/" + request + ".csv";
        if (request == "roofline") {
            write_text(path, roofline_csv(record.roofline));
        } else if (request == "heatmap") {
            if (!config.heatmap_request)
                throw std::invalid_argument("heatmap report requested without a [heatmap] section");
            const HeatmapRequest& req = *config.heatmap_request;
            const ResultTable scoped =
                filter_rows(record.table, config, req.platform, req.dtype);
            write_text(path, heatmap_csv(heatmap(scoped, req.x, req.y, req.pins, req.metric)));
        } else if (request == "regression") {
            const RegressionRequest req =
                config.regression_request.value_or(RegressionRequest{});
            const ResultTable scoped =
                filter_rows(record.table, config, req.platform, req.dtype);
            write_text(path, regression_csv(hyperparameter_regression(scoped, req.target)));
        } else {  // speedup
            if (!config.speedup_request)
                throw std::invalid_argument("speedup report requested without a [speedup] section");
            const auto rows = speedup_table(record.table, config.speedup_request->platform_a,
                                            config.speedup_request->platform_b);
            write_text(path, speedup_csv(rows, config.speedup_request->color_feature));
        }
        written.push_back(path);
    }
    return written;
}

}  // namespace dnnlab
