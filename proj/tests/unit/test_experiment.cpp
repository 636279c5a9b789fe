#include "common.hpp"
#include "experiment.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace eshop;
namespace fs = std::filesystem;

namespace {

std::string
slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig
tinyConfig(const fs::path& dir)
{
    ExperimentConfig c = parseConfig(R"({
        "master_seed": 21,
        "scenario": {"num_ues": 4, "duration_s": 12},
        "model": {"kernel_size": 3, "dilations": [1, 2], "hidden_channels": 4, "dense_sizes": [4]},
        "dataset": {"window_len": 8},
        "train": {"epochs": 2, "batch_size": 32},
        "signaling": {"evaluate_split": "all"}
    })");
    c.outputDir = dir;
    return c;
}

} // namespace

TEST_CASE("config parsing and hashing")
{
    const ExperimentConfig d;
    const ExperimentConfig p = parseConfig("{}");
    CHECK(p.hash() == d.hash());
    CHECK(p.hash().size() == 16);

    ExperimentConfig moved = p;
    moved.outputDir = "elsewhere";
    CHECK(moved.hash() == p.hash());

    const ExperimentConfig s = parseConfig(R"({"master_seed": 9})");
    CHECK(s.hash() != p.hash());
    CHECK(s.scenario.seed == 9);

    const ExperimentConfig back = parseConfig(configToJsonText(s));
    CHECK(back.hash() == s.hash());

    CHECK_THROWS_AS(parseConfig(R"({"scenario": {"num_uez": 3}})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"bogus": 1})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig("{not json"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"scenario": {"num_ues": 0}})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"hcp": {"ttt_ms": 30}})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"schema_version": 99})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"train": {"lr_decay": 1.5}})"), eshop::Error);
    CHECK_THROWS_AS(parseConfig(R"({"signaling": {"trigger_calibration": "test"}})"), eshop::Error);
    CHECK(parseConfig(R"({"signaling": {"trigger_calibration": "val"}})").hash() != p.hash());
    try {
        parseConfig(R"({"channel": {"los_mode": "maybe"}})");
        FAIL("expected a config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }

    ExperimentConfig o = p;
    overrideSeed(o, 77);
    CHECK(o.masterSeed == 77);
    CHECK(o.scenario.seed == 77);
}

TEST_CASE("small pipeline end to end, then report")
{
    const fs::path dir = fs::temp_directory_path() / "eshop_unit_pipeline";
    fs::remove_all(dir);
    Experiment exp(tinyConfig(dir));
    const auto sim = exp.simulate();
    CHECK(sim.ues == 4);
    CHECK(sim.reports == 4 * 301);
    CHECK(sim.counts.a3 >= sim.counts.commands);

    // stages refuse artifacts from another configuration
    {
        ExperimentConfig other = tinyConfig(dir);
        other.masterSeed = 22;
        Experiment wrong(other);
        try {
            wrong.buildDataset();
            FAIL("expected a data error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Data);
        }
    }

    const Dataset ds = exp.buildDataset();
    CHECK(ds.meta.keptCount > 0);
    const auto tr = exp.train();
    CHECK(tr.result.history.size() == 2);
    const auto ev = exp.eval();
    CHECK(ev.splits.count("test") == 1);
    const auto oracle = exp.eshop(true);
    CHECK(oracle.aggregate.preparedWithinTttRate == 1.0);
    CHECK(oracle.aggregate.meanAdvanceMs == oracle.aggregate.meanLegacyDPrepMs);
    CHECK(exp.eshop(false).triggerThresholdMs == 40);
    for (const char* f : {"config.json", "trajectories.csv", "reports.csv", "events.csv",
                          "dataset.csv", "dataset_meta.json", "model.bin", "history.csv",
                          "metrics.json", "predictions.csv", "comparison.csv", "cdf.csv",
                          "cdf_40ms.csv", "eshop_summary.json", "oracle_comparison.csv"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    const std::string head = slurp(dir / "events.csv").substr(0, 60);
    CHECK(head.find("config_hash=" + exp.config().hash()) != std::string::npos);

    const fs::path rep = dir / "report";
    writeReport({dir, dir}, rep);
    std::istringstream lines(slurp(rep / "report.csv"));
    std::string line;
    bool sawT0 = false;
    while (std::getline(lines, line)) {
        if (line.rfind("t0_events,", 0) == 0) {
            sawT0 = true;
            std::istringstream cells(line);
            std::string metric, mean, sd, n;
            std::getline(cells, metric, ',');
            std::getline(cells, mean, ',');
            std::getline(cells, sd, ',');
            std::getline(cells, n, ',');
            CHECK(std::stod(mean) == static_cast<double>(sim.counts.t0));
            CHECK(std::stod(sd) == 0.0);
            CHECK(n == "2");
        }
    }
    CHECK(sawT0);

    try {
        writeReport({dir, dir / "missing"}, rep);
        FAIL("expected a data error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
    }
    fs::remove_all(dir);
}

TEST_CASE("trigger threshold picked on validation UEs")
{
    const fs::path dir = fs::temp_directory_path() / "eshop_unit_calibration";
    fs::remove_all(dir);
    ExperimentConfig cfg = tinyConfig(dir);
    cfg.scenario.numUes = 6;
    cfg.triggerCalibration = "val";
    cfg.eshopSplit = "test";
    Experiment exp(cfg);
    exp.simulate();
    exp.buildDataset();
    exp.train();
    const auto out = exp.eshop(false);
    CHECK(out.triggerThresholdMs >= 40);
    CHECK(out.triggerThresholdMs <= 400);
    CHECK(out.triggerThresholdMs % 40 == 0);
    // the label countdown never needs calibrating
    CHECK(exp.eshop(true).triggerThresholdMs == 40);
    fs::remove_all(dir);
}
