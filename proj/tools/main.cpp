#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dnnlab/analysis.hpp"
#include "dnnlab/graph.hpp"
#include "dnnlab/harness.hpp"

namespace fs = std::filesystem;
using namespace dnnlab;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> platforms;
    std::vector<std::string> dtypes;
    std::string out_dir;
    std::string family;
    std::string variant;
};

void register_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "TOML or JSON sweep config");
    cmd->add_option("--platform", args.platforms, "platform name (repeatable)");
    cmd->add_option("--dtype", args.dtypes, "dtype name (repeatable)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--family", args.family, "model family: fc|cnn|rnn");
    cmd->add_option("--variant", args.variant,
                    "block/cell kind: residual|bottleneck|basic|lstm|gru");
}

// Config file first, command-line flags override.
SweepConfig resolve_config(const CommonArgs& args) {
    SweepConfig cfg;
    if (!args.config_path.empty()) {
        cfg = load_config(args.config_path);
    } else {
        cfg.family = args.family.empty() ? Family::fc : family_from_string(args.family);
        cfg.grid = builtin_grids().at(cfg.family);
        cfg.platforms = {"tpu-v2"};
    }
    if (!args.family.empty() && !args.config_path.empty())
        throw std::runtime_error("--family cannot override a config file family "
                                 "(the grid would not match)");
    if (!args.variant.empty()) {
        if (cfg.family == Family::cnn)
            cfg.block_kind = block_kind_from_string(args.variant);
        else if (cfg.family == Family::rnn)
            cfg.cell_kind = cell_kind_from_string(args.variant);
        else
            throw std::runtime_error("--variant does not apply to fc");
    }
    if (!args.platforms.empty()) {
        for (const std::string& p : args.platforms) cfg.resolve_platform(p);
        cfg.platforms = args.platforms;
    }
    if (!args.dtypes.empty()) {
        for (const std::string& d : args.dtypes)
            if (!is_known_dtype(d)) throw std::runtime_error("unknown dtype: " + d);
        cfg.dtypes = args.dtypes;
    }
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

std::string results_path(const SweepConfig& cfg) { return cfg.out_dir + "/results.csv"; }

int cmd_generate(const CommonArgs& args) {
    const SweepConfig cfg = resolve_config(args);
    ExpandOptions opts;
    opts.block_kind = cfg.block_kind;
    opts.cell_kind = cfg.cell_kind;
    if (!cfg.dtypes.empty()) opts.dtype = cfg.dtypes.front();
    for (const ModelSpec& spec : expand_grid(cfg.grid, cfg.family, opts))
        std::cout << spec_to_json(spec).dump() << "\n";
    return 0;
}

int cmd_estimate(const CommonArgs& args) {
    const SweepConfig cfg = resolve_config(args);
    const RunRecord record = run_sweep(cfg);
    fs::create_directories(cfg.out_dir);
    write_result_csv(record.table, results_path(cfg));
    {
        std::ofstream out(cfg.out_dir + "/roofline.csv", std::ios::binary);
        out << roofline_csv(record.roofline);
    }
    std::size_t oom = 0;
    for (const ResultRow& row : record.table.rows)
        if (row.status == "oom") ++oom;
    std::cout << "estimated " << record.table.rows.size() << " configurations ("
              << oom << " oom) -> " << results_path(cfg) << "\n";
    return 0;
}

int cmd_ingest(const std::string& file, const CommonArgs& args) {
    const SweepConfig cfg = resolve_config(args);
    const ResultTable incoming = ingest_measurements(file, &std::cerr);
    ResultTable merged;
    const std::string path = results_path(cfg);
    if (fs::exists(path)) merged = read_result_csv(path);
    merge_rows(merged, incoming);
    fs::create_directories(cfg.out_dir);
    write_result_csv(merged, path);
    std::cout << "ingested " << incoming.rows.size() << " rows; " << merged.rows.size()
              << " total -> " << path << "\n";
    return 0;
}

int cmd_analyze(const CommonArgs& args) {
    const SweepConfig cfg = resolve_config(args);
    const ResultTable table = read_result_csv(results_path(cfg));
    fs::create_directories(cfg.out_dir);

    std::vector<double> throughputs;
    for (const ResultRow& row : table.rows)
        if (row.status == "ok") throughputs.push_back(row.examples_per_sec);
    if (!throughputs.empty()) {
        std::printf("examples/sec over %zu rows: p50 %.4g, p90 %.4g\n",
                    throughputs.size(), percentile(throughputs, 50.0),
                    percentile(throughputs, 90.0));
    }

    if (cfg.regression_request) {
        ResultTable scoped;
        for (const ResultRow& row : table.rows) {
            if (!cfg.regression_request->platform.empty() &&
                row.platform != cfg.regression_request->platform)
                continue;
            if (!cfg.regression_request->dtype.empty() &&
                row.spec.dtype != cfg.regression_request->dtype)
                continue;
            scoped.rows.push_back(row);
        }
        if (scoped.rows.empty())
            throw std::runtime_error("no rows match the regression platform/dtype filter");
        const RegressionReport rep =
            hyperparameter_regression(scoped, cfg.regression_request->target);
        std::ofstream out(cfg.out_dir + "/regression.csv", std::ios::binary);
        out << regression_csv(rep);
        std::printf("regression on %s:\n", cfg.regression_request->target.c_str());
        for (std::size_t i = 0; i < rep.features.size(); ++i)
            std::printf("  %-8s %+.5f\n", rep.features[i].c_str(),
                        rep.weights(static_cast<Eigen::Index>(i)));
    }

    if (cfg.speedup_request) {
        const auto rows = speedup_table(table, cfg.speedup_request->platform_a,
                                        cfg.speedup_request->platform_b);
        std::ofstream out(cfg.out_dir + "/speedup.csv", std::ios::binary);
        out << speedup_csv(rows, cfg.speedup_request->color_feature);
        std::vector<double> s;
        std::size_t faster = 0;
        for (const SpeedupRow& row : rows) {
            s.push_back(row.speedup);
            if (row.speedup > 1.0) ++faster;
        }
        std::printf("%s over %s: %zu pairs, p50 %.3f, p90 %.3f, faster on %.1f%%\n",
                    cfg.speedup_request->platform_a.c_str(),
                    cfg.speedup_request->platform_b.c_str(), rows.size(),
                    percentile(s, 50.0), percentile(s, 90.0),
                    100.0 * static_cast<double>(faster) / static_cast<double>(s.size()));
    }
    return 0;
}

int cmd_report(const CommonArgs& args) {
    const SweepConfig cfg = resolve_config(args);
    const RunRecord record = run_sweep(cfg);
    for (const std::string& path : emit_reports(record, cfg))
        std::cout << "wrote " << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analytical benchmarking lab for parameterized DNN training workloads"};
    app.require_subcommand(1);

    CommonArgs gen_args, est_args, ing_args, ana_args, rep_args;
    std::string ingest_file;

    CLI::App* generate = app.add_subcommand("generate", "print expanded model specs");
    register_common(generate, gen_args);
    CLI::App* estimate = app.add_subcommand("estimate", "run the sweep estimator");
    register_common(estimate, est_args);
    CLI::App* ingest = app.add_subcommand("ingest", "merge a measured result CSV");
    ingest->add_option("file", ingest_file, "measured CSV path")->required();
    register_common(ingest, ing_args);
    CLI::App* analyze = app.add_subcommand("analyze", "regressions/speedups/percentiles");
    register_common(analyze, ana_args);
    CLI::App* report = app.add_subcommand("report", "emit figure-ready CSV data");
    register_common(report, rep_args);

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(gen_args);
        if (estimate->parsed()) return cmd_estimate(est_args);
        if (ingest->parsed()) return cmd_ingest(ingest_file, ing_args);
        if (analyze->parsed()) return cmd_analyze(ana_args);
        if (report->parsed()) return cmd_report(rep_args);
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
