#include "common.hpp"
#include "events.hpp"
#include "experiment.hpp"
#include "harness.hpp"
#include "oracles.hpp"
#include "simulation.hpp"

#include <doctest.h>

#include <random>

using namespace eshop;

namespace {

MeasurementReport
flatReport(std::int64_t t, double c0, double c1, double c2)
{
    MeasurementReport r;
    r.tMs = t;
    const double v[3] = {c0, c1, c2};
    for (int c = 0; c < 3; ++c) {
        for (int b = 0; b < 12; ++b) {
            r.cells[c][b] = {b, v[c] - 10.0 - b};
        }
        r.cells[c][0].l3RsrpDbm = v[c];
    }
    return r;
}

HcpConfig
a3Hcp(double hys = 0.0)
{
    HcpConfig h;
    h.hysteresisDb = hys;
    h.offsetDb = 3.0;
    h.tttMs = 40;
    return h;
}

} // namespace

TEST_CASE("A3 entry inequality")
{
    const HcpConfig h = a3Hcp(0.0);
    CHECK(a3Entry(-80.0, -84.0, h));
    CHECK_FALSE(a3Entry(-81.0, -84.0, h));
    CHECK(a3Hcp(1.0).hom() == 4.0);
}

TEST_CASE("A5 entry inequality")
{
    HcpConfig h;
    h.eventType = EventType::A5;
    h.hysteresisDb = 0.0;
    h.a5Threshold1Dbm = -100.0;
    h.a5Threshold2Dbm = -90.0;
    CHECK(a5Entry(-110.0, -80.0, h));
    CHECK_FALSE(a5Entry(-95.0, -80.0, h));
    CHECK_FALSE(a5Entry(-95.0, -40.0, h));
    h.hysteresisDb = 1.0;
    CHECK_FALSE(a5Entry(-99.5, -80.0, h));
    CHECK_FALSE(a5Entry(-110.0, -90.5, h));
    CHECK(a5Entry(-101.5, -88.5, h));

    HcpConfig unset;
    unset.eventType = EventType::A5;
    CHECK_THROWS_AS(unset.validate(), eshop::Error);
    CHECK_THROWS_AS(a5Entry(-110.0, -80.0, unset), eshop::Error);
}

TEST_CASE("TTT completes or aborts")
{
    EventEngine e(a3Hcp(), 0);
    CHECK(e.step(flatReport(960, -80, -90, -95)).empty());
    auto ev = e.step(flatReport(1000, -84, -80, -95));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == HoEvent{EventKind::T0, 1000, 0, 1});
    ev = e.step(flatReport(1040, -84, -79, -95));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == HoEvent{EventKind::A3, 1040, 0, 1});

    EventEngine a(a3Hcp(), 0);
    a.step(flatReport(1000, -84, -80, -95));
    ev = a.step(flatReport(1040, -84, -82, -95));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == HoEvent{EventKind::Abort, 1040, 0, 1});
    CHECK_FALSE(a.ttt().armed);
}

TEST_CASE("no T0 while a command is pending; new serving cell after the command")
{
    EventEngine e(a3Hcp(), 0);
    e.step(flatReport(1000, -84, -80, -95));
    e.step(flatReport(1040, -84, -80, -95));
    CHECK(e.commandPending());
    CHECK(e.step(flatReport(1080, -95, -70, -60)).empty());

    HoEventRecord rec;
    rec.servingCell = 0;
    rec.targetCell = 1;
    rec.t0Ms = 1000;
    rec.a3Ms = 1040;
    rec.commandMs = 1065;
    e.applyHandover(rec);
    CHECK(e.servingCell() == 1);
    CHECK_FALSE(e.commandPending());
    // cell 0 at -84 is not 3 dB above the new serving cell at -82
    CHECK(e.step(flatReport(1120, -84, -82, -95)).empty());
    auto ev = e.step(flatReport(1160, -78, -82, -95));
    REQUIRE(ev.size() == 1);
    CHECK(ev[0] == HoEvent{EventKind::T0, 1160, 1, 0});
}

TEST_CASE("reports must advance in time")
{
    EventEngine e(a3Hcp(), 0);
    e.step(flatReport(40, -80, -90, -95));
    CHECK_THROWS_AS(e.step(flatReport(40, -80, -90, -95)), eshop::Error);
}

TEST_CASE("engine matches the look-ahead scanner on random traces")
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> tttPick(0, 3);
    std::uniform_int_distribution<int> dPrep(15, 35);
    std::size_t aborts = 0;
    std::size_t a3s = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto tr = harness::randomTrace(rng, 500);
        HcpConfig h = a3Hcp(trial % 2 ? 1.0 : 0.0);
        h.tttMs = std::array{0, 40, 80, 160}[tttPick(rng)];
        oracle::Rule rule;
        rule.hom = h.hom();
        rule.tttMs = h.tttMs;
        if (trial % 5 == 4) {
            h.eventType = EventType::A5;
            h.a5Threshold1Dbm = -84.0;
            h.a5Threshold2Dbm = -88.0;
            rule.a5 = true;
            rule.hys = h.hysteresisDb;
            rule.th1 = -84.0;
            rule.th2 = -88.0;
        }
        std::vector<int> delays(8);
        for (auto& d : delays) {
            d = dPrep(rng);
        }
        const int serving = trial % 3;
        const auto got = harness::runEngine(tr.reports, h, serving, delays);
        const auto want = oracle::scanEvents(tr.best, serving, rule, delays);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(harness::toOracle(got[i]) == want[i]);
            aborts += got[i].kind == EventKind::Abort;
            a3s += got[i].kind == EventKind::A3;
        }
    }
    CHECK(aborts > 100);
    CHECK(a3s > 100);
}

TEST_CASE("episodes pair up events")
{
    const std::vector<HoEvent> ev{{EventKind::T0, 1000, 0, 1},   {EventKind::Abort, 1040, 0, 1},
                                  {EventKind::T0, 1080, 0, 1},   {EventKind::A3, 1120, 0, 1},
                                  {EventKind::Cmd, 1145, 0, 1},  {EventKind::T0, 2000, 1, 2}};
    const auto eps = episodesFromEvents(4, ev);
    REQUIRE(eps.size() == 3);
    CHECK(eps[0].aborted);
    CHECK(*eps[1].a3Ms == 1120);
    CHECK(*eps[1].commandMs == 1145);
    CHECK_FALSE(eps[2].a3Ms);
    CHECK_THROWS_AS(episodesFromEvents(0, {{EventKind::A3, 10, 0, 1}}), eshop::Error);
}

TEST_CASE("a circular run crosses every border each revolution")
{
    ExperimentConfig cfg;
    cfg.scenario.numUes = 5;
    cfg.scenario.durationS = 60.0;
    for (int ue = 0; ue < 5; ++ue) {
        const auto traj = spawnTrajectory(subSeed(cfg.scenario.seed, static_cast<std::uint64_t>(ue),
                                                  "trajectory"),
                                          cfg.scenario, cfg.layout, ue);
        const UeRun run = simulateUe(traj, cfg.layout, cfg.channel, cfg.hcp, cfg.signaling,
                                     cfg.masterSeed);
        std::size_t cmds = 0;
        for (const auto& e : run.events) {
            cmds += e.kind == EventKind::Cmd;
            if (e.kind == EventKind::Cmd) {
                const auto a3 = std::find_if(run.events.rbegin(), run.events.rend(), [&](const HoEvent& x) {
                    return x.kind == EventKind::A3 && x.tMs <= e.tMs;
                });
                REQUIRE(a3 != run.events.rend());
                CHECK(e.tMs - a3->tMs >= 15);
                CHECK(e.tMs - a3->tMs <= 35);
            }
        }
        const double revolutions = 60.0 / traj.periodS();
        CHECK(static_cast<double>(cmds) >= 3.0 * std::floor(revolutions));
    }
}
