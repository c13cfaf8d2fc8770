#include "dnnlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace dnnlab {

double metric_value(const ResultRow& row, const std::string& metric) {
    if (metric == "examples_per_sec") return row.examples_per_sec;
    if (metric == "flops_utilization") return row.flops_utilization;
    if (metric == "device_step_time_s") return row.device_step_time_s;
    if (metric == "infeed_wait_fraction") return row.infeed_wait_fraction;
    throw std::invalid_argument("unknown metric: " + metric);
}

std::int64_t dim_value(const ModelSpec& spec, const std::string& dim) {
    switch (spec.family()) {
        case Family::fc: {
            const FcSpec& s = spec.fc();
            if (dim == "layer") return s.layers;
            if (dim == "node") return s.nodes_per_layer;
            if (dim == "input") return s.input_units;
            if (dim == "output") return s.output_units;
            if (dim == "batch") return s.batch_size;
            break;
        }
        case Family::cnn: {
            const CnnSpec& s = spec.cnn();
            if (dim == "block") return s.blocks_per_group[0];
            if (dim == "filter") return s.min_filters;
            if (dim == "image") return s.image_side;
            if (dim == "output") return s.output_classes;
            if (dim == "batch") return s.batch_size;
            break;
        }
        case Family::rnn: {
            const RnnSpec& s = spec.rnn();
            if (dim == "layer") return s.layers;
            if (dim == "embed") return s.embedding_size;
            if (dim == "length") return s.max_seq_length;
            if (dim == "vocab") return s.vocab_size;
            if (dim == "batch") return s.batch_size;
            break;
        }
    }
    throw std::invalid_argument("dimension " + dim + " does not apply to family " +
                                to_string(spec.family()));
}

// ---------------------------------------------------------------------------
// Regression
// ---------------------------------------------------------------------------

Eigen::MatrixXd normalize_features(const ResultTable& table,
                                   const std::vector<FeatureColumn>& features,
                                   std::vector<Normalization>* normalization) {
    const Eigen::Index rows = static_cast<Eigen::Index>(table.rows.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(features.size());
    if (rows == 0) throw std::invalid_argument("empty table");

    Eigen::MatrixXd X(rows, cols);
    if (normalization) normalization->clear();
    for (Eigen::Index c = 0; c < cols; ++c) {
        const FeatureColumn& f = features[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < rows; ++r) {
            double v = static_cast<double>(
                dim_value(table.rows[static_cast<std::size_t>(r)].spec, f.name));
            if (f.log2_scale) {
                if (v <= 0)
                    throw std::invalid_argument("feature " + f.name +
                                                ": log2 scaling needs positive values");
                v = std::log2(v);
            }
            X(r, c) = v;
        }
        const double lo = X.col(c).minCoeff();
        const double hi = X.col(c).maxCoeff();
        if (lo == hi)
            throw std::invalid_argument("constant feature: " + f.name);
        X.col(c) = (X.col(c).array() - lo) / (hi - lo);
        if (normalization)
            normalization->push_back(Normalization{f.name, lo, hi, f.log2_scale});
    }
    return X;
}

RegressionReport fit_lr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        std::vector<std::string> feature_names,
                        std::vector<Normalization> normalization) {
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (y.size() != n) throw std::invalid_argument("X and y row counts differ");
    if (n < k + 1)
        throw std::invalid_argument("need at least features + 1 rows for the fit");

    Eigen::MatrixXd A(n, k + 1);
    A.leftCols(k) = X;
    A.col(k).setOnes();

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < k + 1) throw std::invalid_argument("rank-deficient feature matrix");

    // Normal equations; the rank gate above keeps A'A well posed.
    const Eigen::MatrixXd gram = A.transpose() * A;
    const Eigen::VectorXd rhs = A.transpose() * y;
    const Eigen::VectorXd coef = gram.ldlt().solve(rhs);

    RegressionReport rep;
    rep.weights = coef.head(k);
    rep.intercept = coef(k);
    if (feature_names.empty()) {
        for (Eigen::Index i = 0; i < k; ++i)
            feature_names.push_back("x" + std::to_string(i));
    }
    if (static_cast<Eigen::Index>(feature_names.size()) != k)
        throw std::invalid_argument("feature name count does not match X");
    rep.features = std::move(feature_names);
    rep.normalization = std::move(normalization);
    return rep;
}

std::vector<FeatureColumn> default_features(Family family) {
    const SweepGrid& grid = builtin_grids().at(family);
    std::vector<FeatureColumn> features;
    for (const std::string& name : canonical_dims(family)) {
        const DimRange* d = grid.find(name);
        features.push_back(FeatureColumn{name, d && d->rule == StepRule::mul});
    }
    return features;
}

RegressionReport hyperparameter_regression(const ResultTable& table,
                                           const std::string& metric,
                                           std::vector<FeatureColumn> features) {
    ResultTable usable;
    for (const ResultRow& row : table.rows) {
        if (row.status != "ok") continue;
        if (std::isnan(metric_value(row, metric))) continue;
        usable.rows.push_back(row);
    }
    if (usable.rows.empty())
        throw std::invalid_argument("no usable rows for regression on " + metric);
    const Family family = usable.rows.front().spec.family();
    for (const ResultRow& row : usable.rows)
        if (row.spec.family() != family)
            throw std::invalid_argument("regression table mixes model families");
    if (features.empty()) features = default_features(family);

    std::vector<Normalization> norm;
    const Eigen::MatrixXd X = normalize_features(usable, features, &norm);
    Eigen::VectorXd y(static_cast<Eigen::Index>(usable.rows.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y(i) = metric_value(usable.rows[static_cast<std::size_t>(i)], metric);

    std::vector<std::string> names;
    for (const FeatureColumn& f : features) names.push_back(f.name);
    return fit_lr(X, y, std::move(names), std::move(norm));
}

// ---------------------------------------------------------------------------
// Speedups and percentiles
// ---------------------------------------------------------------------------

namespace {

// Grouping key: everything identifying a model except its batch size.
std::string sans_batch_key(const ResultRow& row) {
    ModelSpec spec = row.spec;
    std::visit([](auto& s) { s.batch_size = 1; }, spec.payload);
    return spec_hash(spec) + "|" + row.source;
}

}  // namespace

std::vector<SpeedupRow> speedup_table(const ResultTable& table,
                                      const std::string& platform_a,
                                      const std::string& platform_b) {
    struct Side {
        std::vector<const ResultRow*> a;
        std::vector<const ResultRow*> b;
    };
    std::map<std::string, Side> groups;
    for (const ResultRow& row : table.rows) {
        if (row.status != "ok" || std::isnan(row.examples_per_sec)) continue;
        if (row.platform == platform_a)
            groups[sans_batch_key(row)].a.push_back(&row);
        else if (row.platform == platform_b)
            groups[sans_batch_key(row)].b.push_back(&row);
    }

    const auto by_batch = [](const ResultRow* x, const ResultRow* y) {
        return x->spec.batch_size() < y->spec.batch_size();
    };

    std::vector<SpeedupRow> out;
    for (auto& [key, side] : groups) {
        std::sort(side.a.begin(), side.a.end(), by_batch);
        std::sort(side.b.begin(), side.b.end(), by_batch);
        std::vector<const ResultRow*> rest_a;
        std::vector<const ResultRow*> rest_b = side.b;
        for (const ResultRow* ra : side.a) {
            auto it = std::find_if(rest_b.begin(), rest_b.end(), [&](const ResultRow* rb) {
                return rb->spec.batch_size() == ra->spec.batch_size();
            });
            if (it == rest_b.end()) {
                rest_a.push_back(ra);
                continue;
            }
            out.push_back(SpeedupRow{ra->spec, ra->spec.batch_size(),
                                     (*it)->spec.batch_size(),
                                     ra->examples_per_sec / (*it)->examples_per_sec});
            rest_b.erase(it);
        }
        // Max-batch policy: each platform ran its own largest feasible batch,
        // leaving one unpaired row per side.
        if (rest_a.size() == 1 && rest_b.size() == 1) {
            out.push_back(SpeedupRow{rest_a[0]->spec, rest_a[0]->spec.batch_size(),
                                     rest_b[0]->spec.batch_size(),
                                     rest_a[0]->examples_per_sec /
                                         rest_b[0]->examples_per_sec});
        }
    }
    if (out.empty())
        throw std::invalid_argument("no matching rows between " + platform_a + " and " +
                                    platform_b);
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of empty input");
    if (p < 0 || p > 100) throw std::invalid_argument("percentile p must be in [0,100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

// ---------------------------------------------------------------------------
// Heatmaps
// ---------------------------------------------------------------------------

HeatmapGrid heatmap(const ResultTable& table, const std::string& x_feature,
                    const std::string& y_feature,
                    const std::map<std::string, std::int64_t>& fixed,
                    const std::string& metric) {
    if (table.rows.empty()) throw std::invalid_argument("empty table");
    const Family family = table.rows.front().spec.family();
    for (const ResultRow& row : table.rows)
        if (row.spec.family() != family)
            throw std::invalid_argument("heatmap table mixes model families");

    const std::vector<std::string>& dims = canonical_dims(family);
    if (std::find(dims.begin(), dims.end(), x_feature) == dims.end())
        throw std::invalid_argument("unknown x feature: " + x_feature);
    if (std::find(dims.begin(), dims.end(), y_feature) == dims.end())
        throw std::invalid_argument("unknown y feature: " + y_feature);
    if (x_feature == y_feature)
        throw std::invalid_argument("x and y features must differ");
    for (const std::string& d : dims) {
        if (d == x_feature || d == y_feature) continue;
        if (!fixed.count(d))
            throw std::invalid_argument("unpinned feature: " + d);
    }

    std::vector<const ResultRow*> selected;
    std::set<std::int64_t> xs;
    std::set<std::int64_t> ys;
    for (const ResultRow& row : table.rows) {
        bool match = true;
        for (const auto& [d, v] : fixed) {
            if (dim_value(row.spec, d) != v) {
                match = false;
                break;
            }
        }
        if (!match) continue;
        selected.push_back(&row);
        xs.insert(dim_value(row.spec, x_feature));
        ys.insert(dim_value(row.spec, y_feature));
    }
    if (selected.empty())
        throw std::invalid_argument("no rows match the heatmap pins");

    HeatmapGrid grid;
    grid.x_feature = x_feature;
    grid.y_feature = y_feature;
    grid.metric = metric;
    grid.x_values.assign(xs.begin(), xs.end());
    grid.y_values.assign(ys.begin(), ys.end());
    const Eigen::Index nx = static_cast<Eigen::Index>(grid.x_values.size());
    const Eigen::Index ny = static_cast<Eigen::Index>(grid.y_values.size());
    grid.cells = Eigen::MatrixXd::Constant(ny, nx, std::numeric_limits<double>::quiet_NaN());

    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen(ny, nx);
    seen.setConstant(false);
    for (const ResultRow* row : selected) {
        const auto xi = std::lower_bound(grid.x_values.begin(), grid.x_values.end(),
                                         dim_value(row->spec, x_feature)) -
                        grid.x_values.begin();
        const auto yi = std::lower_bound(grid.y_values.begin(), grid.y_values.end(),
                                         dim_value(row->spec, y_feature)) -
                        grid.y_values.begin();
        if (seen(yi, xi))
            throw std::invalid_argument("ambiguous duplicate cell at " + x_feature + "=" +
                                        std::to_string(grid.x_values[static_cast<std::size_t>(xi)]) +
                                        ", " + y_feature + "=" +
                                        std::to_string(grid.y_values[static_cast<std::size_t>(yi)]));
        seen(yi, xi) = true;
        if (row->status == "ok") grid.cells(yi, xi) = metric_value(*row, metric);
    }
    return grid;
}

}  // namespace dnnlab
