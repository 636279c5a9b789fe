#pragma once

#include "dataset.hpp"
#include "events.hpp"
#include "model_file.hpp"
#include "simulation.hpp"
#include "tcn.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace eshop {

/** A trained countdown regressor plus the input standardization it was trained with. */
class CountdownModel
{
  public:
    explicit CountdownModel(const ModelFile& file);

    int windowLen() const { return windowLen_; }
    double predictWindow(std::span<const float> window) const;
    std::array<float, kNumFeatures> standardize(const std::array<double, kNumFeatures>& raw) const;

  private:
    tcn::TcnModel<float> model_;
    int windowLen_;
    std::array<double, kNumFeatures> mean_;
    std::array<double, kNumFeatures> std_;
};

/** Online TEF inference: one prediction per report from the causal window of the current segment. */
class CountdownStream
{
  public:
    explicit CountdownStream(const CountdownModel& model);

    double push(const std::array<double, kNumFeatures>& raw, int segment);

  private:
    const CountdownModel& model_;
    std::deque<std::array<float, kNumFeatures>> rows_;
    std::optional<int> segment_;
    std::vector<float> window_;
};

/** Offline replay of a recorded trace: rows are raw features in report order. */
std::vector<double> inferCountdown(const CountdownModel& model,
                                   std::span<const std::array<double, kNumFeatures>> rows,
                                   std::span<const int> segments);

/**
 * Label-fed countdown: seconds until the T0 of the next completed TTT in the same
 * segment, clamped at 0 once that T0 has passed; +inf when none is ahead.
 */
std::vector<double> oracleCountdown(std::span<const std::int64_t> reportTimes,
                                    std::span<const int> segments,
                                    std::span<const HoEventRecord> episodes);

struct CountdownState
{
    static constexpr std::size_t kHistory = 4;
    std::deque<double> recent;
    bool prepared = false;
    std::int64_t prepStartMs = 0;
    std::int64_t prepDoneMs = 0;
    int preparedTarget = -1;
};

enum class PrepAction { None, StartPrep };

PrepAction decidePreparation(CountdownState& state, double predTefS, std::int64_t tMs,
                             const SignalingConfig& cfg, int dPrepMs, int target = -1);

struct HoTimeline
{
    std::optional<std::int64_t> prepStartMs;
    std::optional<std::int64_t> prepDoneMs;
    std::int64_t commandMs = 0;
    bool wasted = false;
    bool fellback = false;
};

HoTimeline simulateLegacy(const HoEventRecord& episode, int dPrepMs);

struct CountdownPoint
{
    std::int64_t tMs;
    double predTefS;
};

/**
 * Runs the trigger rule over the segment's predictions up to the A3 report and
 * derives the early-preparation command time, or falls back to legacy.
 */
HoTimeline simulateEshop(const HoEventRecord& episode, std::span<const CountdownPoint> trace,
                         int dPrepMs, const SignalingConfig& cfg);

struct HoComparison
{
    int episodeId = 0;
    int ueId = 0;
    std::int64_t t0Ms = 0;
    std::int64_t a3Ms = 0;
    int dPrepMs = 0;
    std::int64_t legacyCmdMs = 0;
    std::int64_t eshopCmdMs = 0;
    std::int64_t advanceMs = 0;
    std::optional<std::int64_t> prepDoneMs;
    double rsrpLegacyCmdDbm = 0.0;
    double rsrpEshopCmdDbm = 0.0;
    double deltaRsrpPrepDb = 0.0; // rsrp(a3) - rsrp(a3 + d_prep)
    double deltaRsrp40Db = 0.0;   // rsrp(a3) - rsrp(a3 + 40 ms)
    bool wasted = false;
    bool fellback = false;
};

struct ServingTrace
{
    std::vector<std::int64_t> tMs;
    std::vector<double> rsrpDbm;

    /** Linear interpolation between reports; throws outside the covered span. */
    double at(std::int64_t t) const;
};

struct CdfRow
{
    double value;
    double cumulativeProb;
};

std::vector<CdfRow> empiricalCdf(std::vector<double> values);

struct EshopAggregate
{
    std::size_t episodes = 0;
    double meanAdvanceMs = 0.0;
    double meanLegacyDPrepMs = 0.0;
    double wastedRate = 0.0;
    double fallbackRate = 0.0;
    double preparedWithinTttRate = 0.0;
    double medianRsrpBenefitDb = 0.0;
    double meanRsrpBenefitDb = 0.0;
};

struct DegradationStats
{
    std::vector<CdfRow> cdfPrep;
    std::vector<CdfRow> cdf40;
    std::vector<double> benefitDb; // rsrp at eshop cmd - rsrp at legacy cmd
    EshopAggregate aggregate;
};

DegradationStats degradationStats(std::span<const HoComparison> comparisons);

/** Fills the RSRP columns of a comparison from the source cell's trace. */
void attachRsrp(HoComparison& c, const ServingTrace& source);

} // namespace eshop
