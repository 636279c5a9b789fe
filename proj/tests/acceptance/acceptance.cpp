// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of
// failed criteria.

#include "experiment.hpp"
#include "harness.hpp"
#include "metrics.hpp"
#include "oracles.hpp"
#include "tcn.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace eshop;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict
{
    bool pass = false;
    std::string detail;
};

std::string
fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double
secondsSince(Clock::time_point t)
{
    return std::chrono::duration<double>(Clock::now() - t).count();
}

int failures = 0;

void
report(int id, const char* name, const std::function<Verdict()>& body, double budgetS = 0.0)
{
    const auto start = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double s = secondsSince(start);
    if (budgetS > 0.0 && s > budgetS) {
        v.pass = false;
        v.detail += fmt(" (over the %.0f s budget)", budgetS);
    }
    failures += !v.pass;
    std::printf("criterion %2d %s  %-28s %s  [%.2f s]\n", id, v.pass ? "PASS" : "FAIL", name,
                v.detail.c_str(), s);
    std::fflush(stdout);
}

using MatD = tcn::Mat<double>;
using RowD = tcn::RowVec<double>;

Verdict
convolutionOracle()
{
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> dim(1, 12);
    std::uniform_int_distribution<int> len(1, 120);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int steps = len(rng), cin = dim(rng), cout = dim(rng), k = dim(rng), d = dim(rng);
        MatD x(steps, cin);
        oracle::Seq xs(steps, std::vector<double>(cin));
        for (int t = 0; t < steps; ++t) {
            for (int c = 0; c < cin; ++c) {
                xs[t][c] = x(t, c) = g(rng);
            }
        }
        MatD w(k * cin, cout);
        std::vector<std::vector<std::vector<double>>> f(
            k, std::vector<std::vector<double>>(cin, std::vector<double>(cout)));
        for (int p = 0; p < k; ++p) {
            for (int c = 0; c < cin; ++c) {
                for (int o = 0; o < cout; ++o) {
                    f[p][c][o] = w(p * cin + c, o) = g(rng);
                }
            }
        }
        RowD b(cout);
        std::vector<double> bs(cout);
        for (int o = 0; o < cout; ++o) {
            bs[o] = b(o) = g(rng);
        }
        const MatD y = tcn::dilatedCausalConv<double>(x, w, b, d);
        const auto ref = oracle::naiveConv(xs, f, bs, d);
        for (int t = 0; t < steps; ++t) {
            for (int o = 0; o < cout; ++o) {
                worst = std::max(worst, std::abs(y(t, o) - ref[t][o]));
            }
        }
    }
    return {worst < 1e-12, fmt("100 shapes, max abs error %.3g", worst)};
}

Verdict
gradientCheck()
{
    tcn::TcnConfig cfg;
    cfg.inputChannels = 4;
    cfg.kernelSize = 3;
    cfg.dilations = {1, 2};
    cfg.hiddenChannels = 4;
    cfg.denseSizes = {4};
    tcn::TcnModel<double> m(cfg);
    m.initialize(41);
    std::mt19937_64 rng(42);
    std::normal_distribution<double> x(0.0, 1.0);
    std::uniform_real_distribution<double> y(0.1, 4.0);
    const int w = 16;
    const int batch = 6;
    MatD windows(batch, w * cfg.inputChannels);
    for (Eigen::Index i = 0; i < windows.size(); ++i) {
        windows.data()[i] = x(rng);
    }
    std::vector<double> labels(batch);
    for (auto& l : labels) {
        l = y(rng);
    }
    std::vector<double> preds(batch);
    tcn::AlignedVec<double> grad;
    m.lossAndGradient(windows, w, labels, preds, &grad);
    const auto fd = oracle::finiteDifference(
        [&](const std::vector<double>& theta) {
            tcn::TcnModel<double> t(cfg);
            t.params().assign(theta.begin(), theta.end());
            std::vector<double> pr(batch);
            return t.lossAndGradient(windows, w, labels, pr, nullptr);
        },
        std::vector<double>(m.params().begin(), m.params().end()), 1e-6);
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double scale = std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-6});
        worst = std::max(worst, std::abs(grad[i] - fd[i]) / scale);
    }
    return {worst < 1e-4, fmt("%.0f parameters, max relative error %.3g",
                              static_cast<double>(grad.size()), worst)};
}

Verdict
eventEquivalence()
{
    std::mt19937_64 rng(3003);
    std::uniform_int_distribution<int> tttPick(0, 3);
    std::uniform_int_distribution<int> dPrep(15, 35);
    std::size_t events = 0, aborts = 0, mismatched = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto tr = harness::randomTrace(rng, 400);
        HcpConfig h;
        h.offsetDb = 3.0;
        h.hysteresisDb = trial % 2 ? 1.0 : 0.0;
        h.tttMs = std::array{0, 40, 80, 160}[tttPick(rng)];
        oracle::Rule rule;
        rule.hom = h.hom();
        rule.tttMs = h.tttMs;
        if (trial % 5 == 4) {
            h.eventType = EventType::A5;
            h.a5Threshold1Dbm = rule.th1 = -84.0;
            h.a5Threshold2Dbm = rule.th2 = -88.0;
            rule.a5 = true;
            rule.hys = h.hysteresisDb;
        }
        std::vector<int> delays(8);
        for (auto& d : delays) {
            d = dPrep(rng);
        }
        const int serving = trial % 3;
        const auto got = harness::runEngine(tr.reports, h, serving, delays);
        const auto want = oracle::scanEvents(tr.best, serving, rule, delays);
        bool same = got.size() == want.size();
        for (std::size_t i = 0; same && i < got.size(); ++i) {
            same = harness::toOracle(got[i]) == want[i];
        }
        mismatched += !same;
        events += got.size();
        for (const auto& e : got) {
            aborts += e.kind == EventKind::Abort;
        }
    }
    return {mismatched == 0 && aborts > 0,
            fmt("1000 traces, %.0f events, %.0f aborts, %.0f mismatched traces",
                static_cast<double>(events), static_cast<double>(aborts),
                static_cast<double>(mismatched))};
}

Verdict
labelOracle()
{
    std::mt19937_64 rng(4004);
    std::size_t samples = 0, kept = 0, wrong = 0;
    while (samples < 10000) {
        const auto lc = harness::randomLabelCase(rng, 500);
        const auto got = labelTef(lc.times, lc.episodes, 2.0);
        for (std::size_t i = 0; i < lc.times.size(); ++i) {
            const auto want = oracle::labelAt(lc.times[i], lc.oracleEpisodes, 2.0);
            wrong += toString(got[i].reason) != want.reason || got[i].tefS != want.tef;
            kept += got[i].tefS.has_value();
        }
        samples += lc.times.size();
    }
    return {wrong == 0, fmt("%.0f samples (%.0f labeled), %.0f differ", static_cast<double>(samples),
                            static_cast<double>(kept), static_cast<double>(wrong))};
}

Verdict
receptiveField()
{
    const tcn::TcnConfig cfg;
    tcn::TcnModel<double> m(cfg);
    m.initialize(5);
    for (auto& p : m.params()) {
        p = std::abs(p); // keeps every relu path open
    }
    const int len = 1400;
    std::vector<double> base(static_cast<std::size_t>(len * cfg.inputChannels), 0.0);
    const double ref = m.predict(base, len);
    // largest lag whose impulse still moves the last output
    int measured = 0;
    for (int lag = 0; lag < len; ++lag) {
        std::vector<double> w = base;
        for (int c = 0; c < cfg.inputChannels; ++c) {
            w[static_cast<std::size_t>((len - 1 - lag) * cfg.inputChannels + c)] = 1.0;
        }
        if (m.predict(w, len) != ref) {
            measured = lag + 1;
        }
    }
    long sum = 0;
    for (int d : cfg.dilations) {
        sum += d;
    }
    const long closed = 1 + (cfg.kernelSize - 1) * sum;
    return {measured == closed && closed == 1271,
            fmt("impulse probe %.0f, closed form %.0f", measured, static_cast<double>(closed))};
}

Verdict
metricIdentities()
{
    std::mt19937_64 rng(9009);
    std::uniform_real_distribution<double> y(0.04, 8.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    bool ok = true;
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng() % 200;
        std::vector<double> a(n), p(n);
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = y(rng);
            mean += a[i] / static_cast<double>(n);
        }
        const double bias = noise(rng);
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = a[i] + bias + noise(rng) * 0.5;
        }
        const auto r = computeMetrics(a, p);
        violations += r.r2 > r.evs + 1e-12;
        if (trial < 100) {
            const auto perfect = computeMetrics(a, a);
            ok = ok && perfect.r2 == 1.0 && perfect.evs == 1.0 && perfect.mapePct == 0.0;
            const std::vector<double> flat(n, mean);
            ok = ok && std::abs(computeMetrics(a, flat).r2) < 1e-12;
        }
    }
    return {ok && violations == 0, std::string("perfect and mean predictors ") +
                                       (ok ? "ok" : "wrong") +
                                       fmt(", R2 > EVS in %.0f of 1000 vectors", violations)};
}

std::string
slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void
runPipeline(Experiment& e)
{
    e.simulate();
    e.buildDataset();
    e.train();
    e.eval();
    e.eshop(true);
    e.eshop(false);
}

Verdict
determinism(const fs::path& configs, const fs::path& work)
{
    std::vector<fs::path> dirs{work / "det_a", work / "det_b"};
    for (const auto& d : dirs) {
        fs::remove_all(d);
        ExperimentConfig cfg = loadConfig(configs / "determinism.json");
        cfg.outputDir = d;
        Experiment e(cfg);
        e.setParallel(1);
        runPipeline(e);
    }
    std::vector<std::string> names;
    for (const auto& f : fs::directory_iterator(dirs[0])) {
        names.push_back(f.path().filename().string());
    }
    std::size_t others = 0;
    for (const auto& f : fs::directory_iterator(dirs[1])) {
        (void)f;
        ++others;
    }
    std::size_t differ = 0;
    for (const auto& n : names) {
        differ += !fs::exists(dirs[1] / n) || slurp(dirs[0] / n) != slurp(dirs[1] / n);
    }
    return {differ == 0 && others == names.size() && !names.empty(),
            fmt("%.0f artifacts compared, %.0f differ", static_cast<double>(names.size()),
                static_cast<double>(differ))};
}

struct LearningRun
{
    bool ok = false;
    std::string error;
    std::size_t ues = 0;
    std::size_t samples = 0;
    bool fastFading = false;
    int epochs = 0;
    int maxEpochs = 0;
    double trainS = 0.0;
    MetricsReport test;
};

LearningRun
learn(const fs::path& config, const fs::path& dir, std::vector<EshopOutcome>* eshop)
{
    LearningRun r;
    try {
        ExperimentConfig cfg = loadConfig(config);
        cfg.outputDir = dir;
        fs::remove_all(dir);
        r.fastFading = cfg.channel.fastFading;
        r.maxEpochs = cfg.train.epochs;
        Experiment e(cfg);
        r.ues = e.simulate().ues;
        r.samples = e.buildDataset().meta.keptCount;
        const auto t = Clock::now();
        const auto tr = e.train();
        r.trainS = secondsSince(t);
        r.epochs = static_cast<int>(tr.result.history.size());
        r.test = e.eval().splits.at("test");
        if (eshop) {
            eshop->push_back(e.eshop(true));
            eshop->push_back(e.eshop(false));
        }
        r.ok = true;
    } catch (const std::exception& ex) {
        r.error = ex.what();
    }
    return r;
}

Verdict
learningVerdict(const LearningRun& r, double minR2, std::optional<double> maxMape)
{
    if (!r.ok) {
        return {false, "pipeline failed: " + r.error};
    }
    const bool setup = r.ues >= 150 && r.samples >= 30000 && r.fastFading && r.maxEpochs <= 300 &&
                       r.epochs <= 300 && r.trainS <= 1800.0;
    const bool quality = r.test.r2 >= minR2 && (!maxMape || r.test.mapePct <= *maxMape);
    std::string d = fmt("test R2 %.4f MAPE %.2f%%, ", r.test.r2, r.test.mapePct);
    d += fmt("%.0f UEs %.0f samples, %.0f epochs in %.0f s", static_cast<double>(r.ues),
             static_cast<double>(r.samples), r.epochs, r.trainS);
    return {setup && quality, d};
}

bool
monotoneCdf(const fs::path& file, std::size_t& rows)
{
    std::ifstream in(file);
    std::string line;
    double prevV = -INFINITY, prevP = 0.0;
    rows = 0;
    bool ok = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'd') {
            continue;
        }
        const auto comma = line.find(',');
        const double v = std::stod(line.substr(0, comma));
        const double p = std::stod(line.substr(comma + 1));
        ok = ok && v >= prevV && p >= prevP && p > 0.0 && p <= 1.0;
        prevV = v;
        prevP = p;
        ++rows;
    }
    return ok && rows > 0 && prevP == 1.0;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"Acceptance criteria"};
    fs::path configs = "configs";
    fs::path work = "acceptance_run";
    app.add_option("--configs", configs, "Directory holding the acceptance configs");
    app.add_option("--work", work, "Scratch directory for run artifacts");
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    report(1, "convolution oracle", convolutionOracle, 10.0);
    report(2, "gradient check", gradientCheck, 30.0);
    report(3, "event engine equivalence", eventEquivalence, 30.0);
    report(4, "label oracle", labelOracle, 10.0);
    report(5, "receptive field", receptiveField);

    std::vector<EshopOutcome> eshop;
    report(6, "learning reproduction", [&] {
        const auto los = learn(configs / "acceptance_los.json", work / "los", &eshop);
        const auto nlos = learn(configs / "acceptance_nlos.json", work / "nlos", nullptr);
        const Verdict a = learningVerdict(los, 0.80, 15.0);
        const Verdict b = learningVerdict(nlos, 0.75, std::nullopt);
        return Verdict{a.pass && b.pass, "LoS " + a.detail + "; NLoS " + b.detail};
    });

    report(7, "eshop timing with oracle", [&] {
        if (eshop.size() != 2) {
            return Verdict{false, "no LoS run"};
        }
        const auto& a = eshop[0].aggregate;
        bool drawsOk = !eshop[0].comparisons.empty();
        for (const auto& c : eshop[0].comparisons) {
            drawsOk = drawsOk && c.dPrepMs >= 15 && c.dPrepMs <= 35;
        }
        const double gap = std::abs(a.meanAdvanceMs - a.meanLegacyDPrepMs);
        return Verdict{drawsOk && a.preparedWithinTttRate == 1.0 && gap <= 1.0,
                       fmt("%.0f episodes, within TTT %.3f, mean advance %.3f ms vs d_prep %.3f ms",
                           static_cast<double>(a.episodes), a.preparedWithinTttRate,
                           a.meanAdvanceMs, a.meanLegacyDPrepMs)};
    });

    report(8, "degradation benefit", [&] {
        if (eshop.size() != 2) {
            return Verdict{false, "no LoS run"};
        }
        const auto& a = eshop[1].aggregate;
        std::size_t rows = 0;
        const bool cdf = monotoneCdf(work / "los" / "cdf_40ms.csv", rows);
        return Verdict{cdf && a.medianRsrpBenefitDb > 0.0,
                       fmt("model countdown median benefit %.4f dB (fallback %.3f), cdf rows %.0f ",
                           a.medianRsrpBenefitDb, a.fallbackRate, static_cast<double>(rows)) +
                           (cdf ? "monotone to 1.0" : "not a valid cdf")};
    });

    report(9, "metric identities", metricIdentities);
    report(10, "determinism", [&] { return determinism(configs, work); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures;
}
