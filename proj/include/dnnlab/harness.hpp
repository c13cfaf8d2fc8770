#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dnnlab/analysis.hpp"
#include "dnnlab/perf.hpp"
#include "dnnlab/platform.hpp"
#include "dnnlab/workload.hpp"

namespace dnnlab {

struct HeatmapRequest {
    std::string x;
    std::string y;
    std::string metric = "flops_utilization";
    std::map<std::string, std::int64_t> pins;
    std::string platform;  // empty -> first configured platform
    std::string dtype;     // empty -> that platform's default
};

struct RegressionRequest {
    std::string target = "flops_utilization";
    std::string platform;  // empty -> first configured platform
    std::string dtype;
};

struct SpeedupRequest {
    std::string platform_a;
    std::string platform_b;
    std::string color_feature;  // extra column on the scatter, optional
};

struct SweepConfig {
    Family family = Family::fc;
    BlockKind block_kind = BlockKind::residual;
    CellKind cell_kind = CellKind::basic;
    SweepGrid grid;                       // defaults to the family's built-in
    std::vector<std::string> platforms;   // must be known names
    std::vector<std::string> dtypes;      // empty -> per-platform default
    std::vector<std::string> reports;     // of {roofline,heatmap,regression,speedup}
    std::optional<HeatmapRequest> heatmap_request;
    std::optional<RegressionRequest> regression_request;
    std::optional<SpeedupRequest> speedup_request;
    std::string out_dir = "out";
    std::map<std::string, PlatformSpec> extra_platforms;  // file-provided

    const PlatformSpec& resolve_platform(const std::string& name) const;
};

// Parse a TOML or JSON config file (sniffed by content). Validates that
// referenced platforms, dtypes, dimensions, and report names exist; throws
// with a descriptive message before any work otherwise.
SweepConfig load_config(const std::string& path);

// Per-op roofline point of one estimated configuration.
struct RooflinePoint {
    std::string spec_id;
    std::string platform;
    std::string op;
    OpKind kind = OpKind::matmul;
    double ai = 0.0;
    double flops_per_sec = 0.0;  // attainable at that intensity
    Boundedness bound = Boundedness::memory_bound;
    std::int64_t params = 0;
};

struct RunRecord {
    ResultTable table;
    std::vector<RooflinePoint> roofline;
    std::map<std::string, ModelSpec> specs_by_id;  // spec hash -> spec
};

// Expand -> validate -> fit-check -> estimate -> aggregate. Out-of-memory
// configurations are kept as status "oom" rows. Output order is
// deterministic: specs in grid order, platforms and dtypes in config order.
RunRecord run_sweep(const SweepConfig& config);

// ---------------------------------------------------------------------------
// Result CSV (one flat schema for all families)
// ---------------------------------------------------------------------------

// Bit-exact header for result tables.
extern const char* const kResultCsvHeader;

std::string result_csv(const ResultTable& table);
void write_result_csv(const ResultTable& table, const std::string& path);

// Parse a result CSV. The header must carry every schema column (extra
// columns are ignored with a warning on `warnings`); non-numeric metrics,
// bad status/source values, and duplicate (spec, platform, dtype, source)
// keys are errors. A blank source cell defaults to "measured".
ResultTable ingest_measurements(const std::string& path,
                                std::ostream* warnings = nullptr);

// Same parser without a warning stream; for reloading our own output.
ResultTable read_result_csv(const std::string& path);

// Append rows to `into`, erroring on duplicate (spec, platform, dtype,
// source) keys. Measured rows never replace estimated rows; the sources
// coexist.
void merge_rows(ResultTable& into, const ResultTable& added);

// ---------------------------------------------------------------------------
// Report emission (plot-ready CSV)
// ---------------------------------------------------------------------------

// Emit the requested report files under config.out_dir and return their
// paths. Supported requests: "roofline" (per-op scatter), "heatmap",
// "regression" (weight table), "speedup" (params vs speedup scatter).
std::vector<std::string> emit_reports(const RunRecord& record,
                                      const SweepConfig& config);

std::string roofline_csv(const std::vector<RooflinePoint>& points);
std::string heatmap_csv(const HeatmapGrid& grid);
std::string regression_csv(const RegressionReport& report);
std::string speedup_csv(const std::vector<SpeedupRow>& rows,
                        const std::string& color_feature);

nlohmann::json regression_to_json(const RegressionReport& report);
nlohmann::json heatmap_to_json(const HeatmapGrid& grid);

}  // namespace dnnlab
