#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dnnlab/config_file.hpp"
#include "dnnlab/harness.hpp"

using namespace dnnlab;

namespace {

// Small fc sweep: 2 layers x 2 nodes x 1 x 1 x 2 batches = 8 specs.
SweepConfig small_config() {
    SweepConfig cfg;
    cfg.family = Family::fc;
    cfg.grid = builtin_grids().at(Family::fc);
    cfg.grid.find("layer")->max = 8;
    cfg.grid.find("node")->max = 64;
    cfg.grid.find("input")->max = 2000;
    cfg.grid.find("output")->max = 200;
    cfg.grid.find("batch")->max = 128;
    cfg.platforms = {"tpu-v2"};
    cfg.out_dir = "harness_out";
    return cfg;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

}  // namespace

TEST_CASE("run_sweep row count is grid x platforms x dtypes") {
    SweepConfig cfg = small_config();
    cfg.platforms = {"tpu-v2", "gpu-v100"};
    cfg.dtypes = {"bfloat16", "float32"};
    const RunRecord record = run_sweep(cfg);
    CHECK(record.table.rows.size() == 8 * 2 * 2);

    SweepConfig empty = cfg;
    empty.platforms.clear();
    CHECK_THROWS(run_sweep(empty));
}

TEST_CASE("run_sweep is deterministic") {
    const SweepConfig cfg = small_config();
    const std::string a = result_csv(run_sweep(cfg).table);
    const std::string b = result_csv(run_sweep(cfg).table);
    CHECK(a == b);
    CHECK(a.rfind(kResultCsvHeader, 0) == 0);
}

TEST_CASE("run_sweep keeps out-of-memory rows") {
    SweepConfig cfg = small_config();
    cfg.grid.find("layer")->min = 128;
    cfg.grid.find("layer")->max = 128;
    cfg.grid.find("node")->min = 8192;
    cfg.grid.find("node")->max = 8192;
    const RunRecord record = run_sweep(cfg);
    REQUIRE(record.table.rows.size() == 2);  // two batches
    for (const ResultRow& row : record.table.rows) {
        CHECK(row.status == "oom");
        CHECK(std::isnan(row.examples_per_sec));
    }
}

TEST_CASE("csv write -> ingest -> write is a fixed point") {
    const SweepConfig cfg = small_config();
    RunRecord record = run_sweep(cfg);
    // Mix in an oom row so blank metrics take the trip too.
    {
        SweepConfig big = cfg;
        big.grid.find("node")->min = 8192;
        big.grid.find("node")->max = 8192;
        big.grid.find("layer")->min = 128;
        big.grid.find("layer")->max = 128;
        merge_rows(record.table, run_sweep(big).table);
    }
    const std::string path = "roundtrip.csv";
    write_result_csv(record.table, path);
    const ResultTable back = read_result_csv(path);
    REQUIRE(back.rows.size() == record.table.rows.size());
    const std::string again = result_csv(back);
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    CHECK(again == buf.str());
    for (std::size_t i = 0; i < back.rows.size(); ++i) {
        CHECK(spec_hash(back.rows[i].spec) == spec_hash(record.table.rows[i].spec));
        CHECK(back.rows[i].source == record.table.rows[i].source);
    }
    std::remove(path.c_str());
}

TEST_CASE("ingest validates the header and cell contents") {
    const std::string good_header = kResultCsvHeader;

    SUBCASE("missing columns are listed") {
        write_file("bad_header.csv", "family,platform\nfc,tpu-v2\n");
        try {
            ingest_measurements("bad_header.csv");
            FAIL("expected header error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find("missing schema columns") != std::string::npos);
            CHECK(msg.find("batch") != std::string::npos);
            CHECK(msg.find("status") != std::string::npos);
        }
        std::remove("bad_header.csv");
    }

    SUBCASE("extra unknown columns warn and are ignored") {
        write_file("extra.csv",
                   good_header + std::string(",comment\n") +
                       "fc,,4,32,2000,200,,,,,,,tpu-v2,bfloat16,64,100,0.5,0.01,0,ok,"
                       "measured,hello\n");
        std::ostringstream warnings;
        const ResultTable t = ingest_measurements("extra.csv", &warnings);
        CHECK(t.rows.size() == 1);
        CHECK(warnings.str().find("comment") != std::string::npos);
        CHECK(t.rows[0].source == "measured");
        CHECK(t.rows[0].examples_per_sec == 100.0);
        std::remove("extra.csv");
    }

    SUBCASE("non-numeric metrics are rejected with a row number") {
        write_file("bad_metric.csv",
                   good_header + std::string("\n") +
                       "fc,,4,32,2000,200,,,,,,,tpu-v2,bfloat16,64,fast,0.5,0.01,0,ok,"
                       "measured\n");
        try {
            ingest_measurements("bad_metric.csv");
            FAIL("expected metric error");
        } catch (const std::exception& e) {
            const std::string msg = e.what();
            CHECK(msg.find("row 2") != std::string::npos);
            CHECK(msg.find("examples_per_sec") != std::string::npos);
        }
        std::remove("bad_metric.csv");
    }

    SUBCASE("duplicate keys are rejected") {
        const std::string row =
            "fc,,4,32,2000,200,,,,,,,tpu-v2,bfloat16,64,100,0.5,0.01,0,ok,measured\n";
        write_file("dup.csv", good_header + std::string("\n") + row + row);
        CHECK_THROWS(ingest_measurements("dup.csv"));
        std::remove("dup.csv");
    }

    SUBCASE("three well-formed rows ingest as three rows") {
        write_file(
            "ok.csv",
            good_header + std::string("\n") +
                "fc,,4,32,2000,200,,,,,,,tpu-v2,bfloat16,64,100,0.5,0.01,0,ok,measured\n" +
                "fc,,4,32,2000,200,,,,,,,tpu-v2,bfloat16,128,180,0.6,0.011,0,ok,measured\n" +
                "rnn,lstm,9,,,,,,,500,50,32,gpu-v100,float16,256,50,0.2,0.1,0,ok,measured\n");
        const ResultTable t = ingest_measurements("ok.csv");
        CHECK(t.rows.size() == 3);
        CHECK(t.rows[2].spec.family() == Family::rnn);
        CHECK(t.rows[2].spec.rnn().cell_kind == CellKind::lstm);
        std::remove("ok.csv");
    }
}

TEST_CASE("measured rows merge without clobbering estimates") {
    const SweepConfig cfg = small_config();
    RunRecord record = run_sweep(cfg);
    const std::size_t estimated = record.table.rows.size();

    ResultTable measured;
    ResultRow m = record.table.rows.front();
    m.source = "measured";
    m.examples_per_sec = 42.0;
    measured.rows.push_back(m);

    merge_rows(record.table, measured);
    CHECK(record.table.rows.size() == estimated + 1);
    CHECK(record.table.rows.front().source == "estimated");

    // Same key twice stays an error.
    CHECK_THROWS(merge_rows(record.table, measured));
}

TEST_CASE("toml subset parser") {
    const nlohmann::json j = parse_toml(
        "# top comment\n"
        "name = \"lab\"   # trailing comment\n"
        "count = 42\n"
        "ratio = 1.5e-3\n"
        "flag = true\n"
        "tags = [\"a\", \"b\"]\n"
        "mixed = [1, 2, 3]\n"
        "escaped = \"a\\\"b\\n\"\n"
        "\n"
        "[outer.inner]\n"
        "x = 7\n");
    CHECK(j.at("name") == "lab");
    CHECK(j.at("count") == 42);
    CHECK(j.at("count").is_number_integer());
    CHECK(j.at("ratio").get<double>() == doctest::Approx(1.5e-3));
    CHECK(j.at("flag") == true);
    CHECK(j.at("tags") == nlohmann::json({"a", "b"}));
    CHECK(j.at("mixed") == nlohmann::json({1, 2, 3}));
    CHECK(j.at("escaped") == "a\"b\n");
    CHECK(j.at("outer").at("inner").at("x") == 7);

    try {
        parse_toml("key = \n");
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    CHECK_THROWS(parse_toml("a = [1,\n2]\n"));  // multi-line arrays unsupported
    CHECK_THROWS(parse_toml("just words\n"));
}

TEST_CASE("config files load from toml and json alike") {
    write_file("cfg.toml",
               "family = \"fc\"\n"
               "platforms = [\"tpu-v2\", \"gpu-v100\"]\n"
               "dtypes = [\"bfloat16\"]\n"
               "reports = [\"roofline\", \"regression\"]\n"
               "out = \"cfg_out\"\n"
               "\n"
               "[grid.layer]\n"
               "max = 8\n"
               "\n"
               "[heatmap]\n"
               "x = \"batch\"\n"
               "y = \"node\"\n"
               "metric = \"flops_utilization\"\n"
               "\n"
               "[heatmap.pins]\n"
               "layer = 4\n"
               "input = 2000\n"
               "output = 200\n"
               "\n"
               "[speedup]\n"
               "platform_a = \"tpu-v2\"\n"
               "platform_b = \"gpu-v100\"\n"
               "color = \"batch\"\n");
    const SweepConfig cfg = load_config("cfg.toml");
    CHECK(cfg.family == Family::fc);
    CHECK(cfg.platforms == std::vector<std::string>{"tpu-v2", "gpu-v100"});
    CHECK(cfg.grid.find("layer")->max == 8);
    CHECK(cfg.grid.find("node")->max == 8192);  // untouched dims keep defaults
    CHECK(cfg.reports == std::vector<std::string>{"roofline", "regression"});
    REQUIRE(cfg.heatmap_request.has_value());
    CHECK(cfg.heatmap_request->pins.at("layer") == 4);
    REQUIRE(cfg.speedup_request.has_value());
    CHECK(cfg.speedup_request->color_feature == "batch");
    CHECK(cfg.out_dir == "cfg_out");

    write_file("cfg.json", R"({
        "family": "fc",
        "platforms": ["tpu-v2", "gpu-v100"],
        "dtypes": ["bfloat16"],
        "reports": ["roofline", "regression"],
        "out": "cfg_out",
        "grid": {"layer": {"max": 8}},
        "heatmap": {"x": "batch", "y": "node", "metric": "flops_utilization",
                    "pins": {"layer": 4, "input": 2000, "output": 200}},
        "speedup": {"platform_a": "tpu-v2", "platform_b": "gpu-v100", "color": "batch"}
    })");
    const SweepConfig jcfg = load_config("cfg.json");
    CHECK(jcfg.family == cfg.family);
    CHECK(jcfg.platforms == cfg.platforms);
    CHECK(jcfg.grid.find("layer")->max == 8);
    CHECK(jcfg.heatmap_request->pins == cfg.heatmap_request->pins);

    std::remove("cfg.toml");
    std::remove("cfg.json");
}

TEST_CASE("cnn and rnn sweeps run end to end") {
    SweepConfig cnn;
    cnn.family = Family::cnn;
    cnn.block_kind = BlockKind::bottleneck;
    cnn.grid = builtin_grids().at(Family::cnn);
    cnn.grid.find("block")->max = 2;
    cnn.grid.find("image")->max = 200;
    cnn.grid.find("output")->max = 500;
    cnn.grid.find("batch")->max = 128;
    cnn.platforms = {"tpu-v2"};
    const RunRecord cnn_record = run_sweep(cnn);
    CHECK(cnn_record.table.rows.size() == 2 * 3 * 1 * 1 * 2);
    for (const ResultRow& row : cnn_record.table.rows) {
        CHECK(row.spec.cnn().block_kind == BlockKind::bottleneck);
        if (row.status == "ok") {
            CHECK(row.examples_per_sec > 0);
            CHECK(row.flops_utilization <= 1.0);
        }
    }

    SweepConfig rnn;
    rnn.family = Family::rnn;
    rnn.cell_kind = CellKind::gru;
    rnn.grid = builtin_grids().at(Family::rnn);
    rnn.grid.find("layer")->max = 5;
    rnn.grid.find("embed")->max = 500;
    rnn.grid.find("length")->max = 50;
    rnn.grid.find("vocab")->min = 32;
    rnn.grid.find("vocab")->max = 32;
    rnn.platforms = {"gpu-v100"};
    const RunRecord rnn_record = run_sweep(rnn);
    CHECK(rnn_record.table.rows.size() == 2 * 2 * 2 * 1 * 4);
    for (const ResultRow& row : rnn_record.table.rows) {
        CHECK(row.spec.rnn().cell_kind == CellKind::gru);
        CHECK(row.spec.dtype == "float16");  // gpu default
    }
}

TEST_CASE("host throughput feeds the infeed model through the sweep") {
    write_file("host_platform.toml",
               "[fed-accel]\n"
               "peak_flops = 1e14\n"
               "mem_bandwidth = 2e12\n"
               "mem_per_core = 8e9\n"
               "cores_per_board = 1\n"
               "host_throughput = 1000\n"
               "supported_dtypes = [\"bfloat16\"]\n");
    SweepConfig cfg = small_config();
    cfg.extra_platforms = load_platforms("host_platform.toml");
    cfg.platforms = {"fed-accel"};
    const RunRecord record = run_sweep(cfg);
    bool any_waiting = false;
    for (const ResultRow& row : record.table.rows) {
        if (row.status != "ok") continue;
        CHECK(row.infeed_wait_fraction >= 0.0);
        CHECK(row.infeed_wait_fraction <= 1.0);
        if (row.infeed_wait_fraction > 0.0) {
            any_waiting = true;
            // A host-starved config caps at the host rate.
            CHECK(row.examples_per_sec == doctest::Approx(1000.0));
        }
    }
    CHECK(any_waiting);
    std::remove("host_platform.toml");
}

TEST_CASE("config can pull extra platforms from a file") {
    write_file("extra_platforms.toml",
               "[lab-accel]\n"
               "peak_flops = 9e13\n"
               "mem_bandwidth = 1.8e12\n"
               "mem_per_core = 32e9\n"
               "cores_per_board = 2\n"
               "supported_dtypes = [\"bfloat16\"]\n");
    write_file("cfg_extra.toml",
               "family = \"fc\"\n"
               "platform_file = \"extra_platforms.toml\"\n"
               "platforms = [\"lab-accel\", \"cpu\"]\n");
    const SweepConfig cfg = load_config("cfg_extra.toml");
    CHECK(cfg.resolve_platform("lab-accel").peak_flops == 9e13);
    CHECK(cfg.resolve_platform("cpu").peak_flops == 2e12);  // built-ins still visible
    std::remove("extra_platforms.toml");
    std::remove("cfg_extra.toml");
}

TEST_CASE("regression and heatmap export to json") {
    SweepConfig cfg = small_config();
    cfg.grid.find("input")->max = 4000;
    cfg.grid.find("output")->max = 400;
    const RunRecord record = run_sweep(cfg);

    const RegressionReport rep =
        hyperparameter_regression(record.table, "flops_utilization");
    const nlohmann::json rj = regression_to_json(rep);
    CHECK(rj.at("features").size() == 5);
    CHECK(rj.at("features")[0].at("name") == "layer");
    CHECK(rj.contains("intercept"));

    const HeatmapGrid grid =
        heatmap(record.table, "batch", "node",
                {{"layer", 4}, {"input", 2000}, {"output", 200}}, "examples_per_sec");
    const nlohmann::json hj = heatmap_to_json(grid);
    CHECK(hj.at("x_values") == nlohmann::json({64, 128}));
    CHECK(hj.at("cells").size() == 2);
}

TEST_CASE("config validation fails fast") {
    write_file("bad1.toml", "family = \"fc\"\n");
    CHECK_THROWS(load_config("bad1.toml"));  // no platforms

    write_file("bad2.toml",
               "family = \"fc\"\nplatforms = [\"warp-drive\"]\n");
    CHECK_THROWS(load_config("bad2.toml"));

    write_file("bad3.toml",
               "family = \"fc\"\nplatforms = [\"cpu\"]\nreports = [\"pie-chart\"]\n");
    CHECK_THROWS(load_config("bad3.toml"));

    write_file("bad4.toml",
               "family = \"fc\"\nplatforms = [\"cpu\"]\ndtypes = [\"float8\"]\n");
    CHECK_THROWS(load_config("bad4.toml"));

    write_file("bad5.toml",
               "family = \"fc\"\nplatforms = [\"cpu\"]\n[grid.vocab]\nmax = 10\n");
    CHECK_THROWS(load_config("bad5.toml"));

    for (const char* f : {"bad1.toml", "bad2.toml", "bad3.toml", "bad4.toml", "bad5.toml"})
        std::remove(f);
}

TEST_CASE("emit_reports writes the requested files") {
    SweepConfig cfg = small_config();
    cfg.platforms = {"tpu-v2", "gpu-v100"};
    cfg.dtypes = {"bfloat16"};  // shared dtype so speedup rows match
    cfg.grid.find("input")->max = 4000;  // keep every feature non-constant
    cfg.grid.find("output")->max = 400;
    cfg.reports = {"roofline", "heatmap", "regression", "speedup"};
    HeatmapRequest hm;
    hm.x = "batch";
    hm.y = "node";
    hm.metric = "examples_per_sec";
    hm.pins = {{"layer", 4}, {"input", 2000}, {"output", 200}};
    cfg.heatmap_request = hm;
    SpeedupRequest sp;
    sp.platform_a = "tpu-v2";
    sp.platform_b = "gpu-v100";
    sp.color_feature = "batch";
    cfg.speedup_request = sp;

    const RunRecord record = run_sweep(cfg);
    const auto files = emit_reports(record, cfg);
    REQUIRE(files.size() == 4);
    for (const std::string& f : files) CHECK(std::filesystem::exists(f));

    // Heatmap grid: 2 nodes x 2 batches plus header row.
    std::ifstream hm_in(cfg.out_dir + "/heatmap.csv");
    std::string line;
    int lines = 0;
    while (std::getline(hm_in, line)) ++lines;
    CHECK(lines == 3);

    std::filesystem::remove_all(cfg.out_dir);
}

TEST_CASE("roofline scatter carries one row per op") {
    RunRecord record;
    ResultRow row;
    row.spec = ModelSpec{FcSpec{4, 32, 2000, 200, 64}, "bfloat16"};
    row.platform = "tpu-v2";
    record.table.rows.push_back(row);
    RooflinePoint p1{"abc", "tpu-v2", "dense_0", OpKind::matmul, 10.0, 24e12,
                     Boundedness::memory_bound, 100};
    RooflinePoint p2{"abc", "tpu-v2", "weight_sync", OpKind::weight_sync, 0.125, 0.3e12,
                     Boundedness::memory_bound, 0};
    record.roofline = {p1, p2};

    const std::string csv = roofline_csv(record.roofline);
    int lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    CHECK(lines == 3);  // header + 2 ops
    CHECK(csv.find("weight_sync") != std::string::npos);
}

TEST_CASE("unknown report request is rejected") {
    SweepConfig cfg = small_config();
    const RunRecord record = run_sweep(cfg);
    cfg.reports = {"hologram"};
    CHECK_THROWS(emit_reports(record, cfg));
}
