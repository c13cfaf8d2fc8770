#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dnnlab/analysis.hpp"
#include "dnnlab/graph.hpp"
#include "dnnlab/perf.hpp"

using namespace dnnlab;

namespace {

ResultRow fc_row(std::int64_t layer, std::int64_t node, std::int64_t input,
                 std::int64_t output, std::int64_t batch, double eps = 1.0,
                 const std::string& platform = "tpu-v2") {
    ResultRow row;
    row.spec = ModelSpec{FcSpec{layer, node, input, output, batch}, "bfloat16"};
    row.platform = platform;
    row.examples_per_sec = eps;
    row.flops_utilization = 0.5;
    row.device_step_time_s = 1.0;
    row.infeed_wait_fraction = 0.0;
    return row;
}

}  // namespace

TEST_CASE("normalize_features: multiplicative sweeps are log2 scaled") {
    ResultTable t;
    for (std::int64_t layer : {4, 8, 16, 32, 64, 128})
        t.rows.push_back(fc_row(layer, 32, 2000, 200, 64));

    std::vector<Normalization> norm;
    const Eigen::MatrixXd X =
        normalize_features(t, {FeatureColumn{"layer", true}}, &norm);
    CHECK(X(0, 0) == 0.0);                          // 4  -> log2 = 2
    CHECK(X(5, 0) == 1.0);                          // 128 -> log2 = 7
    CHECK(X(3, 0) == doctest::Approx(0.6));         // 32: (5-2)/(7-2)
    CHECK(norm[0].min == 2.0);
    CHECK(norm[0].max == 7.0);
    CHECK(norm[0].log2_scale);
}

TEST_CASE("normalize_features: additive sweeps scale linearly") {
    ResultTable t;
    for (std::int64_t output : {200, 400, 600, 800, 1000})
        t.rows.push_back(fc_row(4, 32, 2000, output, 64));
    const Eigen::MatrixXd X =
        normalize_features(t, {FeatureColumn{"output", false}}, nullptr);
    CHECK(X(0, 0) == 0.0);
    CHECK(X(4, 0) == 1.0);
    CHECK(X(2, 0) == doctest::Approx(0.5));  // 600
    CHECK(X.minCoeff() == 0.0);
    CHECK(X.maxCoeff() == 1.0);
}

TEST_CASE("normalize_features rejects constant features") {
    ResultTable t;
    t.rows.push_back(fc_row(4, 32, 2000, 200, 64));
    t.rows.push_back(fc_row(4, 64, 2000, 200, 64));
    CHECK_THROWS(normalize_features(t, {FeatureColumn{"layer", true}}, nullptr));
}

TEST_CASE("fit_lr recovers an exact interpolation") {
    Eigen::MatrixXd X(4, 2);
    X << 0, 0, 0, 1, 1, 0, 1, 1;
    Eigen::VectorXd y(4);
    for (int i = 0; i < 4; ++i) y(i) = 2.0 * X(i, 0) - 1.0 * X(i, 1) + 1.0;
    const RegressionReport rep = fit_lr(X, y, {"a", "b"});
    CHECK(rep.weights(0) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(rep.weights(1) == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(rep.intercept == doctest::Approx(1.0).epsilon(1e-10));

    // Residual is orthogonal to the design columns.
    Eigen::MatrixXd A(4, 3);
    A.leftCols(2) = X;
    A.col(2).setOnes();
    Eigen::VectorXd coef(3);
    coef << rep.weights(0), rep.weights(1), rep.intercept;
    const Eigen::VectorXd residual = y - A * coef;
    CHECK((A.transpose() * residual).norm() <= 1e-8 * std::max(1.0, y.norm()));
}

TEST_CASE("fit_lr on a constant target returns zero weights") {
    Eigen::MatrixXd X(4, 2);
    X << 0, 0, 0, 1, 1, 0, 1, 1;
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 3.25);
    const RegressionReport rep = fit_lr(X, y);
    CHECK(rep.weights.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(rep.intercept == doctest::Approx(3.25));
}

TEST_CASE("fit_lr rejects rank-deficient and undersized problems") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 2, 2, 4, 3, 6, 4, 8;  // second column is twice the first
    CHECK_THROWS(fit_lr(X, Eigen::VectorXd::Ones(4)));
    Eigen::MatrixXd tall(2, 2);
    tall << 1, 0, 0, 1;
    CHECK_THROWS(fit_lr(tall, Eigen::VectorXd::Ones(2)));
}

TEST_CASE("fit_lr weight signs survive positive rescaling of the target") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd X(40, 3);
    for (Eigen::Index i = 0; i < X.size(); ++i) X(i / 3, i % 3) = u(rng);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i)
        y(i) = 1.5 * X(i, 0) - 0.7 * X(i, 1) + 0.1 * X(i, 2) + 0.01 * u(rng);
    const RegressionReport base = fit_lr(X, y);
    const RegressionReport scaled = fit_lr(X, (123.0 * y).eval());
    for (int k = 0; k < 3; ++k) {
        CHECK(std::signbit(base.weights(k)) == std::signbit(scaled.weights(k)));
        CHECK(scaled.weights(k) == doctest::Approx(123.0 * base.weights(k)));
    }
}

TEST_CASE("synthetic recovery over the fc grid") {
    // y = 3*x_node - 0.5*x_layer + small noise; recovered signs and the
    // magnitude ordering must match.
    ResultTable t;
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> noise(-1e-3, 1e-3);
    for (std::int64_t layer : {4, 8, 16, 32, 64, 128})
        for (std::int64_t node : {32, 64, 128, 256, 512})
            t.rows.push_back(fc_row(layer, node, 2000, 200, 64));

    const std::vector<FeatureColumn> features = {{"layer", true}, {"node", true}};
    const Eigen::MatrixXd X = normalize_features(t, features, nullptr);
    Eigen::VectorXd y(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        y(i) = 3.0 * X(i, 1) - 0.5 * X(i, 0) + noise(rng);
    const RegressionReport rep = fit_lr(X, y, {"layer", "node"});
    CHECK(rep.weights(1) > 0);
    CHECK(rep.weights(0) < 0);
    CHECK(std::abs(rep.weights(1)) > std::abs(rep.weights(0)));
}

TEST_CASE("percentile interpolates between closest ranks") {
    CHECK(percentile({5.0}, 90.0) == 5.0);
    std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(percentile(v, 90.0) == doctest::Approx(9.1));
    CHECK(percentile(v, 100.0) == 10.0);
    CHECK(percentile(v, 0.0) == 1.0);
    CHECK_THROWS(percentile({}, 50.0));
    CHECK_THROWS(percentile({1.0}, 101.0));

    // Monotone in p and bounded by the extremes.
    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::vector<double> sample;
    for (int i = 0; i < 37; ++i) sample.push_back(u(rng));
    double prev = -1e18;
    for (double p = 0; p <= 100; p += 2.5) {
        const double q = percentile(sample, p);
        CHECK(q >= prev);
        CHECK(q >= *std::min_element(sample.begin(), sample.end()));
        CHECK(q <= *std::max_element(sample.begin(), sample.end()));
        prev = q;
    }
}

TEST_CASE("speedup_table matches specs across platforms") {
    ResultTable t;
    t.rows.push_back(fc_row(4, 32, 2000, 200, 64, 10.0, "tpu-v2"));
    t.rows.push_back(fc_row(4, 32, 2000, 200, 64, 5.0, "gpu-v100"));
    t.rows.push_back(fc_row(4, 64, 2000, 200, 64, 7.0, "tpu-v2"));
    t.rows.push_back(fc_row(4, 64, 2000, 200, 64, 7.0, "gpu-v100"));

    const auto rows = speedup_table(t, "tpu-v2", "gpu-v100");
    REQUIRE(rows.size() == 2);
    for (const SpeedupRow& row : rows) {
        const double want = dim_value(row.spec, "node") == 32 ? 2.0 : 1.0;
        CHECK(row.speedup == doctest::Approx(want));
    }

    const auto inverse = speedup_table(t, "gpu-v100", "tpu-v2");
    REQUIRE(inverse.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        CHECK(inverse[i].speedup == doctest::Approx(1.0 / rows[i].speedup));

    CHECK_THROWS(speedup_table(t, "tpu-v2", "cpu"));
}

TEST_CASE("speedup_table pairs max-batch rows when batches differ") {
    ResultTable t;
    t.rows.push_back(fc_row(4, 32, 2000, 200, 1024, 20.0, "tpu-v2"));
    t.rows.push_back(fc_row(4, 32, 2000, 200, 512, 8.0, "gpu-v100"));
    const auto rows = speedup_table(t, "tpu-v2", "gpu-v100");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].batch_a == 1024);
    CHECK(rows[0].batch_b == 512);
    CHECK(rows[0].speedup == doctest::Approx(2.5));
}

TEST_CASE("heatmap pivots a pinned slice") {
    ResultTable t;
    for (std::int64_t node : {32, 64})
        for (std::int64_t batch : {64, 128})
            t.rows.push_back(fc_row(4, node, 2000, 200, batch, double(node + batch)));

    const HeatmapGrid grid =
        heatmap(t, "batch", "node", {{"layer", 4}, {"input", 2000}, {"output", 200}},
                "examples_per_sec");
    CHECK(grid.x_values == std::vector<std::int64_t>{64, 128});
    CHECK(grid.y_values == std::vector<std::int64_t>{32, 64});
    CHECK(grid.cells.rows() == 2);
    CHECK(grid.cells.cols() == 2);
    CHECK(grid.cells(0, 0) == 96.0);    // node 32, batch 64
    CHECK(grid.cells(1, 1) == 192.0);   // node 64, batch 128

    // An out-of-memory row leaves a marked hole.
    ResultTable with_oom = t;
    with_oom.rows[3].status = "oom";
    with_oom.rows[3].examples_per_sec = std::numeric_limits<double>::quiet_NaN();
    const HeatmapGrid holey =
        heatmap(with_oom, "batch", "node",
                {{"layer", 4}, {"input", 2000}, {"output", 200}}, "examples_per_sec");
    CHECK(std::isnan(holey.cells(1, 1)));
    CHECK(holey.cells(0, 0) == 96.0);
}

TEST_CASE("heatmap rejects unpinned features and duplicate cells") {
    ResultTable t;
    t.rows.push_back(fc_row(4, 32, 2000, 200, 64));
    t.rows.push_back(fc_row(8, 32, 2000, 200, 64));
    CHECK_THROWS_AS(heatmap(t, "batch", "node", {{"layer", 4}}, "examples_per_sec"),
                    std::invalid_argument);

    // Two rows landing in the same cell (differing only by layer, which is
    // pinned away by selecting both) must be rejected.
    ResultTable dup;
    dup.rows.push_back(fc_row(4, 32, 2000, 200, 64, 1.0));
    dup.rows.push_back(fc_row(4, 32, 2000, 200, 64, 2.0));
    CHECK_THROWS(heatmap(dup, "batch", "node",
                         {{"layer", 4}, {"input", 2000}, {"output", 200}},
                         "examples_per_sec"));
}

TEST_CASE("fc grid heatmap at the published pins is 9x9") {
    SweepGrid grid = builtin_grids().at(Family::fc);
    ResultTable t;
    for (const ModelSpec& spec : expand_grid(grid, Family::fc)) {
        ResultRow row;
        row.spec = spec;
        row.platform = "tpu-v2";
        row.examples_per_sec = static_cast<double>(spec.batch_size());
        row.flops_utilization = 0.1;
        t.rows.push_back(std::move(row));
    }
    const HeatmapGrid hm =
        heatmap(t, "batch", "node", {{"layer", 32}, {"input", 2000}, {"output", 1000}},
                "flops_utilization");
    CHECK(hm.x_values.size() == 9);
    CHECK(hm.y_values.size() == 9);
}
