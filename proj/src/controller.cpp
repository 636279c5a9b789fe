#include "controller.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace eshop {

CountdownModel::CountdownModel(const ModelFile& file)
    : model_(instantiate(file)), windowLen_(file.windowLen), mean_(file.normMean), std_(file.normStd)
{
    if (file.config.inputChannels != kNumFeatures) {
        throwData("countdown model expects " + std::to_string(file.config.inputChannels) +
                  " input features, reports provide " + std::to_string(kNumFeatures));
    }
}

double
CountdownModel::predictWindow(std::span<const float> window) const
{
    return static_cast<double>(model_.predict(window, windowLen_));
}

std::array<float, kNumFeatures>
CountdownModel::standardize(const std::array<double, kNumFeatures>& raw) const
{
    std::array<float, kNumFeatures> out{};
    for (int f = 0; f < kNumFeatures; ++f) {
        out[f] = static_cast<float>((raw[f] - mean_[f]) / std_[f]);
    }
    return out;
}

CountdownStream::CountdownStream(const CountdownModel& model)
    : model_(model), window_(static_cast<std::size_t>(model.windowLen()) * kNumFeatures)
{
}

double
CountdownStream::push(const std::array<double, kNumFeatures>& raw, int segment)
{
    if (segment_ && segment < *segment_) {
        throwData("countdown stream: segment ids must not decrease");
    }
    if (segment_ != segment) {
        rows_.clear();
        segment_ = segment;
    }
    rows_.push_back(model_.standardize(raw));
    const auto w = static_cast<std::size_t>(model_.windowLen());
    while (rows_.size() > w) {
        rows_.pop_front();
    }
    const std::size_t pad = w - rows_.size();
    std::fill(window_.begin(), window_.begin() + static_cast<std::ptrdiff_t>(pad * kNumFeatures),
              0.0f);
    for (std::size_t k = 0; k < rows_.size(); ++k) {
        std::copy(rows_[k].begin(), rows_[k].end(),
                  window_.begin() + static_cast<std::ptrdiff_t>((pad + k) * kNumFeatures));
    }
    return model_.predictWindow(window_);
}

std::vector<double>
inferCountdown(const CountdownModel& model, std::span<const std::array<double, kNumFeatures>> rows,
               std::span<const int> segments)
{
    if (rows.size() != segments.size()) {
        throwData("infer_countdown: rows and segments differ in length");
    }
    std::vector<std::array<float, kNumFeatures>> std(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std[i] = model.standardize(rows[i]);
    }
    const auto w = static_cast<std::ptrdiff_t>(model.windowLen());
    std::vector<float> window(static_cast<std::size_t>(w) * kNumFeatures);
    std::vector<double> out(rows.size());
    std::ptrdiff_t segStart = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && segments[i] != segments[i - 1]) {
            segStart = static_cast<std::ptrdiff_t>(i);
        }
        for (std::ptrdiff_t k = 0; k < w; ++k) {
            const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(i) - (w - 1 - k);
            auto dst = window.begin() + k * kNumFeatures;
            if (p < segStart) {
                std::fill(dst, dst + kNumFeatures, 0.0f);
            } else {
                std::copy(std[p].begin(), std[p].end(), dst);
            }
        }
        out[i] = model.predictWindow(window);
    }
    return out;
}

std::vector<double>
oracleCountdown(std::span<const std::int64_t> reportTimes, std::span<const int> segments,
                std::span<const HoEventRecord> episodes)
{
    if (reportTimes.size() != segments.size()) {
        throwData("oracle countdown: times and segments differ in length");
    }
    // completed episodes with the segment their A3 report falls in
    std::vector<std::pair<std::int64_t, std::pair<std::int64_t, int>>> done;
    for (const auto& e : episodes) {
        if (e.aborted || !e.a3Ms) {
            continue;
        }
        const auto it = std::lower_bound(reportTimes.begin(), reportTimes.end(), *e.a3Ms);
        if (it == reportTimes.end() || *it != *e.a3Ms) {
            throwData("oracle countdown: A3 at " + std::to_string(*e.a3Ms) +
                      " ms is not a report instant");
        }
        done.push_back({*e.a3Ms, {e.t0Ms, segments[it - reportTimes.begin()]}});
    }
    std::sort(done.begin(), done.end());

    std::vector<double> out(reportTimes.size(), std::numeric_limits<double>::infinity());
    std::size_t k = 0;
    for (std::size_t i = 0; i < reportTimes.size(); ++i) {
        const std::int64_t t = reportTimes[i];
        while (k < done.size() && done[k].first < t) {
            ++k;
        }
        if (k < done.size() && done[k].second.second == segments[i]) {
            const std::int64_t t0 = done[k].second.first;
            out[i] = static_cast<double>(std::max<std::int64_t>(0, t0 - t)) / 1000.0;
        }
    }
    return out;
}

PrepAction
decidePreparation(CountdownState& state, double predTefS, std::int64_t tMs,
                  const SignalingConfig& cfg, int dPrepMs, int target)
{
    state.recent.push_back(predTefS);
    while (state.recent.size() > CountdownState::kHistory) {
        state.recent.pop_front();
    }
    if (state.prepared) {
        return PrepAction::None;
    }
    const auto need = static_cast<std::size_t>(cfg.consecutiveRequired);
    if (state.recent.size() < need) {
        return PrepAction::None;
    }
    const double threshold = cfg.triggerThresholdMs / 1000.0;
    const bool fire = std::all_of(state.recent.end() - static_cast<std::ptrdiff_t>(need),
                                  state.recent.end(), [&](double p) { return p <= threshold; });
    if (!fire) {
        return PrepAction::None;
    }
    state.prepared = true;
    state.prepStartMs = tMs;
    state.prepDoneMs = tMs + dPrepMs;
    state.preparedTarget = target;
    return PrepAction::StartPrep;
}

HoTimeline
simulateLegacy(const HoEventRecord& episode, int dPrepMs)
{
    if (episode.aborted || !episode.a3Ms) {
        throwData("simulate_legacy: episode has no A3 report");
    }
    HoTimeline t;
    t.prepStartMs = *episode.a3Ms;
    t.prepDoneMs = *episode.a3Ms + dPrepMs;
    t.commandMs = *episode.a3Ms + dPrepMs;
    return t;
}

HoTimeline
simulateEshop(const HoEventRecord& episode, std::span<const CountdownPoint> trace, int dPrepMs,
              const SignalingConfig& cfg)
{
    if (episode.aborted || !episode.a3Ms) {
        throwData("simulate_eshop: episode has no A3 report");
    }
    const std::int64_t a3 = *episode.a3Ms;
    CountdownState st;
    std::optional<std::int64_t> last;
    for (const auto& p : trace) {
        if (last && p.tMs <= *last) {
            throwData("simulate_eshop: countdown trace out of order");
        }
        last = p.tMs;
        if (p.tMs > a3) {
            break;
        }
        if (decidePreparation(st, p.predTefS, p.tMs, cfg, dPrepMs, episode.targetCell) ==
            PrepAction::StartPrep) {
            break;
        }
    }

    HoTimeline t;
    if (!st.prepared) {
        t.commandMs = a3 + dPrepMs;
        t.fellback = true;
        return t;
    }
    t.prepStartMs = st.prepStartMs;
    t.prepDoneMs = st.prepDoneMs;
    if (a3 > st.prepDoneMs + cfg.guardMs) {
        t.wasted = true;
        t.fellback = true;
        t.commandMs = a3 + dPrepMs;
        return t;
    }
    t.commandMs = std::max(a3, st.prepDoneMs);
    return t;
}

double
ServingTrace::at(std::int64_t t) const
{
    if (tMs.empty() || t < tMs.front() || t > tMs.back()) {
        throwData("serving RSRP trace does not cover t=" + std::to_string(t) + " ms");
    }
    const auto it = std::lower_bound(tMs.begin(), tMs.end(), t);
    const auto i = static_cast<std::size_t>(it - tMs.begin());
    if (*it == t) {
        return rsrpDbm[i];
    }
    const double t0 = static_cast<double>(tMs[i - 1]);
    const double t1 = static_cast<double>(tMs[i]);
    if (t1 - t0 > 40.0) {
        throwData("serving RSRP trace has a gap around t=" + std::to_string(t) + " ms");
    }
    const double w = (static_cast<double>(t) - t0) / (t1 - t0);
    return (1.0 - w) * rsrpDbm[i - 1] + w * rsrpDbm[i];
}

void
attachRsrp(HoComparison& c, const ServingTrace& source)
{
    const double atA3 = source.at(c.a3Ms);
    c.rsrpLegacyCmdDbm = source.at(c.legacyCmdMs);
    c.rsrpEshopCmdDbm = source.at(c.eshopCmdMs);
    c.deltaRsrpPrepDb = atA3 - source.at(c.a3Ms + c.dPrepMs);
    c.deltaRsrp40Db = atA3 - source.at(c.a3Ms + 40);
}

std::vector<CdfRow>
empiricalCdf(std::vector<double> values)
{
    std::sort(values.begin(), values.end());
    std::vector<CdfRow> out;
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        out.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    return out;
}

namespace {

double
median(std::vector<double> v)
{
    if (v.empty()) {
        return std::nan("");
    }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

} // namespace

DegradationStats
degradationStats(std::span<const HoComparison> comparisons)
{
    DegradationStats s;
    std::vector<double> prep;
    std::vector<double> forty;
    std::size_t wasted = 0;
    std::size_t fellback = 0;
    std::size_t withinTtt = 0;
    double advance = 0.0;
    double dprep = 0.0;
    for (const auto& c : comparisons) {
        prep.push_back(c.deltaRsrpPrepDb);
        forty.push_back(c.deltaRsrp40Db);
        s.benefitDb.push_back(c.rsrpEshopCmdDbm - c.rsrpLegacyCmdDbm);
        wasted += c.wasted;
        fellback += c.fellback;
        withinTtt += c.prepDoneMs && !c.wasted && *c.prepDoneMs <= c.a3Ms;
        advance += static_cast<double>(c.advanceMs);
        dprep += c.dPrepMs;
    }
    s.cdfPrep = empiricalCdf(prep);
    s.cdf40 = empiricalCdf(forty);
    auto& a = s.aggregate;
    a.episodes = comparisons.size();
    if (a.episodes > 0) {
        const double n = static_cast<double>(a.episodes);
        a.meanAdvanceMs = advance / n;
        a.meanLegacyDPrepMs = dprep / n;
        a.wastedRate = static_cast<double>(wasted) / n;
        a.fallbackRate = static_cast<double>(fellback) / n;
        a.preparedWithinTttRate = static_cast<double>(withinTtt) / n;
        a.medianRsrpBenefitDb = median(s.benefitDb);
        a.meanRsrpBenefitDb =
            std::accumulate(s.benefitDb.begin(), s.benefitDb.end(), 0.0) / n;
    }
    return s;
}

} // namespace eshop
