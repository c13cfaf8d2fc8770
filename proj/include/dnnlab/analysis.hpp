#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dnnlab/workload.hpp"

namespace dnnlab {

// One benchmark outcome, estimated or measured. Metrics are NaN when the
// configuration did not run (status "oom").
struct ResultRow {
    ModelSpec spec;
    std::string platform;
    double examples_per_sec = 0.0;
    double flops_utilization = 0.0;
    double device_step_time_s = 0.0;
    double infeed_wait_fraction = 0.0;
    std::string status = "ok";        // "ok" | "oom"
    std::string source = "estimated";  // "estimated" | "measured"
};

struct ResultTable {
    std::vector<ResultRow> rows;
};

// Named metric accessor over a row; throws on an unknown metric name.
double metric_value(const ResultRow& row, const std::string& metric);

// Hyperparameter value of a spec by canonical dimension name ("layer",
// "node", "batch", ...). Throws when the dimension does not apply to the
// spec's family.
std::int64_t dim_value(const ModelSpec& spec, const std::string& dim);

// ---------------------------------------------------------------------------
// Hyperparameter-sensitivity regression
// ---------------------------------------------------------------------------

// A feature column for regression: dimension name plus whether the sweep was
// multiplicative (those are log2-transformed before min-max scaling so a x2
// sweep becomes evenly spaced).
struct FeatureColumn {
    std::string name;
    bool log2_scale = false;
};

// Recorded per-feature preprocessing so reported weights are reproducible.
struct Normalization {
    std::string feature;
    double min = 0.0;  // of the (possibly log2-transformed) raw values
    double max = 0.0;
    bool log2_scale = false;
};

struct RegressionReport {
    std::vector<std::string> features;
    Eigen::VectorXd weights;  // one per feature
    double intercept = 0.0;
    std::vector<Normalization> normalization;
};

// Feature matrix over the table's rows: log2 where flagged, then min-max to
// [0,1] per column. Throws if any feature is constant across rows.
Eigen::MatrixXd normalize_features(const ResultTable& table,
                                   const std::vector<FeatureColumn>& features,
                                   std::vector<Normalization>* normalization = nullptr);

// Ordinary least squares via the normal equations, with intercept. Requires
// rows >= features + 1 and full column rank; throws otherwise.
RegressionReport fit_lr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        std::vector<std::string> feature_names = {},
                        std::vector<Normalization> normalization = {});

// normalize_features + fit_lr against a named metric, over rows with status
// "ok". Feature log2 flags follow the family's built-in sweep rules when the
// caller passes none.
RegressionReport hyperparameter_regression(const ResultTable& table,
                                           const std::string& metric,
                                           std::vector<FeatureColumn> features = {});

// Log2 flags per canonical dimension from the family's built-in grid rules.
std::vector<FeatureColumn> default_features(Family family);

// ---------------------------------------------------------------------------
// Cross-platform comparison
// ---------------------------------------------------------------------------

struct SpeedupRow {
    ModelSpec spec;  // the platform_a side
    std::int64_t batch_a = 0;
    std::int64_t batch_b = 0;
    double speedup = 0.0;  // examples/sec on a over examples/sec on b
};

// Pair rows of the two platforms at equal (spec-sans-batch, dtype, batch);
// when a key has exactly one unpaired row per side (the max-batch policy,
// where each platform ran its own largest batch), pair those too. Throws
// when nothing matches.
std::vector<SpeedupRow> speedup_table(const ResultTable& table,
                                      const std::string& platform_a,
                                      const std::string& platform_b);

// Linear interpolation between closest ranks; p in [0,100]; throws on empty
// input.
double percentile(std::vector<double> values, double p);

// ---------------------------------------------------------------------------
// Heatmap pivots
// ---------------------------------------------------------------------------

struct HeatmapGrid {
    std::string x_feature;
    std::string y_feature;
    std::string metric;
    std::vector<std::int64_t> x_values;  // ascending
    std::vector<std::int64_t> y_values;  // ascending
    Eigen::MatrixXd cells;  // y_values.size() rows x x_values.size() cols;
                            // NaN marks missing / out-of-memory cells
};

// Pivot a metric over two hyperparameter axes. `fixed` must pin every
// non-axis dimension of the family; duplicate cells are an error. Rows with
// status "oom" produce NaN cells.
HeatmapGrid heatmap(const ResultTable& table, const std::string& x_feature,
                    const std::string& y_feature,
                    const std::map<std::string, std::int64_t>& fixed,
                    const std::string& metric);

}  // namespace dnnlab
