#include "common.hpp"
#include "controller.hpp"
#include "metrics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace eshop;

namespace {

HoEventRecord
episode(std::int64_t t0, std::int64_t a3)
{
    HoEventRecord e;
    e.t0Ms = t0;
    e.a3Ms = a3;
    e.targetCell = 1;
    return e;
}

ModelFile
tinyModelFile(int windowLen)
{
    ModelFile f;
    f.config.kernelSize = 3;
    f.config.dilations = {1, 2};
    f.config.hiddenChannels = 4;
    f.config.denseSizes = {4};
    f.windowLen = windowLen;
    tcn::TcnModel<float> m(f.config);
    m.initialize(6);
    f.params.assign(m.params().begin(), m.params().end());
    for (int i = 0; i < kNumFeatures; ++i) {
        f.normMean[i] = i % kBlockWidth == 0 ? -85.0 : 0.0;
        f.normStd[i] = i % kBlockWidth == 0 ? 6.0 : 1.0;
    }
    return f;
}

std::array<double, kNumFeatures>
randomRow(std::mt19937_64& rng)
{
    std::normal_distribution<double> g(-85.0, 6.0);
    std::uniform_int_distribution<int> beam(0, 11);
    std::array<double, kNumFeatures> r{};
    for (int c = 0; c < kNumCells; ++c) {
        r[c * kBlockWidth] = g(rng);
        r[c * kBlockWidth + 1 + beam(rng)] = 1.0;
    }
    return r;
}

} // namespace

TEST_CASE("regression metrics")
{
    const std::vector<double> y{0.5, 1.0, 2.5, 4.0};
    const auto perfect = computeMetrics(y, y);
    CHECK(perfect.r2 == 1.0);
    CHECK(perfect.evs == 1.0);
    CHECK(perfect.mapePct == 0.0);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmseS == 0.0);

    const std::vector<double> mean(4, 2.0);
    CHECK(computeMetrics(y, mean).r2 == doctest::Approx(0.0));

    const auto m = computeMetrics(std::vector<double>{2, 4}, std::vector<double>{1, 5});
    CHECK(m.mapePct == doctest::Approx(37.5));
    CHECK(m.mae == doctest::Approx(1.0));

    const auto flat = computeMetrics(std::vector<double>{1, 1}, std::vector<double>{1, 2});
    CHECK(std::isnan(flat.r2));
    CHECK(flat.undefinedReason.has_value());

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 5.0);
    std::normal_distribution<double> e(0.3, 0.8);
    std::vector<double> yy(50);
    std::vector<double> pp(50);
    for (int i = 0; i < 50; ++i) {
        yy[i] = u(rng);
        pp[i] = yy[i] + e(rng);
    }
    const auto got = computeMetrics(yy, pp);
    const auto want = oracle::naiveMetrics(yy, pp);
    CHECK(got.r2 == doctest::Approx(want.r2).epsilon(1e-12));
    CHECK(got.evs == doctest::Approx(want.evs).epsilon(1e-12));
    CHECK(got.mapePct == doctest::Approx(want.mape).epsilon(1e-12));
    CHECK(got.mae == doctest::Approx(want.mae).epsilon(1e-12));
    CHECK(got.rmseS == doctest::Approx(want.rmse).epsilon(1e-12));
    CHECK(got.r2 <= got.evs);
}

TEST_CASE("trigger rule")
{
    SignalingConfig cfg;
    CountdownState s;
    CHECK(decidePreparation(s, 0.30, 0, cfg, 20) == PrepAction::None);
    CHECK(decidePreparation(s, 0.08, 40, cfg, 20) == PrepAction::None);
    CHECK(decidePreparation(s, 0.03, 80, cfg, 20) == PrepAction::None);

    CountdownState t;
    CHECK(decidePreparation(t, 0.039, 0, cfg, 20) == PrepAction::None);
    CHECK(decidePreparation(t, 0.020, 40, cfg, 20) == PrepAction::StartPrep);
    CHECK(t.prepDoneMs == 60);
    // at most one preparation outstanding
    CHECK(decidePreparation(t, 0.0, 80, cfg, 20) == PrepAction::None);
    CHECK(t.prepStartMs == 40);
}

TEST_CASE("legacy and early preparation timelines")
{
    SignalingConfig cfg;
    const HoEventRecord e = episode(1960, 2000);
    CHECK(simulateLegacy(e, 25).commandMs == 2025);

    const std::vector<CountdownPoint> trace{{1920, 0.03}, {1960, 0.0}, {2000, 0.0}};
    const HoTimeline t = simulateEshop(e, trace, 35, cfg);
    CHECK(*t.prepStartMs == 1960);
    CHECK(*t.prepDoneMs == 1995);
    CHECK(t.commandMs == 2000);
    CHECK(simulateLegacy(e, 25).commandMs - t.commandMs == 25);
    CHECK_FALSE(t.fellback);

    // oracle-fed countdown: done inside the TTT for every delay
    for (int d = 15; d <= 35; ++d) {
        const std::vector<CountdownPoint> tr{{1920, 0.04}, {1960, 0.0}};
        const HoTimeline x = simulateEshop(e, tr, d, cfg);
        CHECK(*x.prepDoneMs <= 2000);
        CHECK(x.commandMs == 2000);
        CHECK(simulateLegacy(e, d).commandMs - x.commandMs == d);
    }

    // prepared far too early
    const std::vector<CountdownPoint> early{{1000, 0.0}, {1040, 0.0}};
    const HoTimeline w = simulateEshop(e, early, 20, cfg);
    CHECK(w.wasted);
    CHECK(w.fellback);
    CHECK(w.commandMs == 2020);

    // never triggered
    const std::vector<CountdownPoint> late{{1960, 0.5}, {2000, 0.4}};
    const HoTimeline f = simulateEshop(e, late, 20, cfg);
    CHECK(f.fellback);
    CHECK_FALSE(f.wasted);
    CHECK(f.commandMs == 2020);

    HoEventRecord ab = e;
    ab.a3Ms.reset();
    ab.aborted = true;
    CHECK_THROWS_AS(simulateLegacy(ab, 20), eshop::Error);
}

TEST_CASE("label-fed countdown")
{
    std::vector<std::int64_t> t;
    for (int i = 0; i <= 60; ++i) {
        t.push_back(40 * i);
    }
    HoEventRecord ab;
    ab.t0Ms = 400;
    ab.aborted = true;
    HoEventRecord ok = episode(1000, 1040);
    ok.commandMs = 1065;
    std::vector<HoEventRecord> eps{ab, ok};
    const auto seg = segmentIds(t, eps);
    const auto c = oracleCountdown(t, seg, eps);
    CHECK(c[0] == doctest::Approx(1.0));
    CHECK(c[10] == doctest::Approx(0.6)); // aborted T0 at 400 is skipped
    CHECK(c[24] == doctest::Approx(0.04));
    CHECK(c[25] == 0.0);
    CHECK(c[26] == 0.0); // A3 report
    CHECK(std::isinf(c[27]));
}

TEST_CASE("streaming inference equals batch replay")
{
    const ModelFile f = tinyModelFile(8);
    const CountdownModel model(f);
    std::mt19937_64 rng(12);
    std::vector<std::array<double, kNumFeatures>> rows;
    std::vector<int> seg;
    for (int i = 0; i < 60; ++i) {
        rows.push_back(randomRow(rng));
        seg.push_back(i < 23 ? 0 : (i < 41 ? 1 : 2));
    }
    const auto batch = inferCountdown(model, rows, seg);
    REQUIRE(batch.size() == rows.size());
    CountdownStream stream(model);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(stream.push(rows[i], seg[i]) == batch[i]);
    }
    CHECK_THROWS_AS(stream.push(rows[0], 1), eshop::Error);

    // future rows do not change past predictions
    const auto head = inferCountdown(model, std::span(rows).first(30), std::span(seg).first(30));
    for (std::size_t i = 0; i < head.size(); ++i) {
        CHECK(head[i] == batch[i]);
    }
}

TEST_CASE("RSRP degradation bookkeeping")
{
    ServingTrace flat;
    for (int i = 0; i <= 100; ++i) {
        flat.tMs.push_back(40 * i);
        flat.rsrpDbm.push_back(-80.0);
    }
    HoComparison c;
    c.a3Ms = 2000;
    c.dPrepMs = 30;
    c.legacyCmdMs = 2030;
    c.eshopCmdMs = 2000;
    attachRsrp(c, flat);
    CHECK(c.deltaRsrpPrepDb == 0.0);
    CHECK(c.deltaRsrp40Db == 0.0);
    CHECK(c.rsrpEshopCmdDbm - c.rsrpLegacyCmdDbm == 0.0);

    ServingTrace ramp;
    for (int i = 0; i <= 100; ++i) {
        ramp.tMs.push_back(40 * i);
        ramp.rsrpDbm.push_back(-70.0 - 0.1 * i);
    }
    CHECK(ramp.at(2020) == doctest::Approx(-70.0 - 5.05));
    attachRsrp(c, ramp);
    CHECK(c.deltaRsrp40Db == doctest::Approx(0.1));
    CHECK(c.rsrpEshopCmdDbm - c.rsrpLegacyCmdDbm == doctest::Approx(0.075));
    CHECK_THROWS_AS(ramp.at(5000), eshop::Error);

    const auto cdf = empiricalCdf({0.3, -0.2, 1.5, 0.3});
    for (std::size_t i = 1; i < cdf.size(); ++i) {
        CHECK(cdf[i].value >= cdf[i - 1].value);
        CHECK(cdf[i].cumulativeProb > cdf[i - 1].cumulativeProb);
    }
    CHECK(cdf.back().cumulativeProb == 1.0);
}
