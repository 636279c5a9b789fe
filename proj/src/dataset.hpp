#pragma once

#include "channel.hpp"
#include "events.hpp"
#include "samples.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eshop {

inline constexpr int kBlockWidth = 1 + kBeamsPerCell;         // rsrp + one-hot
inline constexpr int kNumFeatures = kNumCells * kBlockWidth;  // 39

struct ReducedReport
{
    std::int64_t tMs = 0;
    std::array<int, kNumCells> bestBeam{};
    std::array<double, kNumCells> bestRsrpDbm{};
};

/** Per cell argmax over the 12 L3 values, ties to the lowest beam id. */
ReducedReport reduceReport(const MeasurementReport& report);

/** Raw (unstandardized) encoding: per cell [rsrp_dbm, onehot(12)]. */
std::array<double, kNumFeatures> encodeFeatures(const ReducedReport& r);

enum class Exclusion : std::uint8_t {
    None = 0,
    AbortedNext,   // next T0 belongs to an aborted TTT
    PostEntry,     // no T0 ahead in this pre-command segment
    BeyondHorizon, // label > horizon
    NonPositive,   // label <= 0
    Unresolved,    // next T0 neither aborted nor completed before the run ended
    RunStart,      // first segment of a run, fewer than W - 1 earlier reports
};

inline constexpr int kNumExclusions = 7;

std::string_view toString(Exclusion e);
Exclusion exclusionFromString(std::string_view s);

struct TefLabel
{
    std::optional<double> tefS;
    Exclusion reason = Exclusion::None;
    int segment = 0;
};

/** Countdown to the next T0 for every report instant of one UE. */
std::vector<TefLabel> labelTef(std::span<const std::int64_t> reportTimes,
                               std::span<const HoEventRecord> episodes, double horizonS);

/** Segment index of a report: number of HO commands strictly before it. */
std::vector<int> segmentIds(std::span<const std::int64_t> reportTimes,
                            std::span<const HoEventRecord> episodes);

struct LabeledSample
{
    int ueId = 0;
    std::int64_t tMs = 0;
    double labelTefS = 0.0;
    std::vector<double> window; // W x kNumFeatures, oldest first
};

/**
 * One window per labeled row. Rows from an earlier segment (or before the run) are
 * zero-padded. `rows` is row-major N x kNumFeatures.
 */
std::vector<LabeledSample> windowize(std::span<const double> rows, std::span<const int> ueIds,
                                     std::span<const std::int64_t> times,
                                     std::span<const int> segments,
                                     std::span<const TefLabel> labels, int windowLen);

struct SplitRatios
{
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

struct SplitAssignment
{
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

/** Partition at UE granularity, deterministic under seed. */
SplitAssignment splitUes(std::vector<int> ueIds, const SplitRatios& ratios, std::uint64_t seed);

struct DatasetConfig
{
    double horizonS = 8.0;
    int windowLen = 64;
    SplitRatios ratios;

    void validate() const;
};

struct DatasetRow
{
    int ueId = 0;
    std::int64_t tMs = 0;
    int segment = 0;
    std::optional<double> labelTefS;
    Exclusion reason = Exclusion::None;
    std::array<double, kNumFeatures> raw{};
};

struct DatasetMeta
{
    int schemaVersion = 1;
    std::string configHash;
    std::uint64_t masterSeed = 0;
    double horizonS = 8.0;
    int windowLen = 64;
    std::array<double, kNumFeatures> mean{};
    std::array<double, kNumFeatures> stddev{};
    std::size_t rawCount = 0;
    std::size_t keptCount = 0;
    std::array<std::size_t, kNumExclusions> excluded{};
    SplitAssignment split;
    std::size_t rowCount = 0;
    std::string contentHash;
};

struct Dataset
{
    std::vector<DatasetRow> rows; // sorted by (ue_id, t_ms)
    DatasetMeta meta;
};

struct UeLog
{
    int ueId = 0;
    std::vector<MeasurementReport> reports;
    std::vector<HoEvent> events;
};

Dataset buildDataset(const std::vector<UeLog>& logs, const DatasetConfig& cfg, std::uint64_t seed,
                     const std::string& configHash);

/** Train-split statistics for the RSRP columns; one-hot columns keep mean 0, std 1. */
void computeNormalization(Dataset& ds);

void writeDataset(const Dataset& ds, const std::filesystem::path& csvPath,
                  const std::filesystem::path& metaPath);

Dataset readDataset(const std::filesystem::path& csvPath, const std::filesystem::path& metaPath,
                    const std::optional<std::string>& expectedConfigHash = std::nullopt);

enum class SplitName { Train, Val, Test };

/**
 * Standardized feature matrix with per-row segment starts, from which causal
 * windows are materialized lazily.
 */
class WindowSource
{
  public:
    WindowSource(const Dataset& ds);

    int windowLen() const { return windowLen_; }
    std::size_t rowCount() const { return segStart_.size(); }
    const double* row(std::size_t i) const { return &features_[i * kNumFeatures]; }

    /** Fills out[W * kNumFeatures] with the window ending at row i. */
    template <typename T>
    void fill(std::size_t i, T* out) const
    {
        const auto w = static_cast<std::ptrdiff_t>(windowLen_);
        const auto lo = static_cast<std::ptrdiff_t>(segStart_[i]);
        for (std::ptrdiff_t k = 0; k < w; ++k) {
            const std::ptrdiff_t p = static_cast<std::ptrdiff_t>(i) - (w - 1 - k);
            T* dst = out + k * kNumFeatures;
            if (p < lo) {
                std::fill(dst, dst + kNumFeatures, T(0));
                continue;
            }
            const double* src = row(static_cast<std::size_t>(p));
            for (int f = 0; f < kNumFeatures; ++f) {
                dst[f] = static_cast<T>(src[f]);
            }
        }
    }

  private:
    int windowLen_;
    std::vector<double> features_;
    std::vector<std::size_t> segStart_;
};

/** Labeled rows of one split, as indices into the dataset. */
struct SampleSet
{
    std::vector<std::size_t> rows;
    std::vector<double> labels;
    std::vector<int> ueIds;
    std::vector<std::int64_t> times;
};

SampleSet selectSamples(const Dataset& ds, SplitName which);

std::vector<double> standardize(const DatasetMeta& meta, const std::array<double, kNumFeatures>& raw);

/** Windows of one split, materialized from a WindowSource on demand. */
class WindowSamples : public SampleProvider
{
  public:
    WindowSamples(const WindowSource& source, SampleSet set)
        : source_(source), set_(std::move(set))
    {
    }

    std::size_t size() const override { return set_.rows.size(); }
    int windowLen() const override { return source_.windowLen(); }
    int channels() const override { return kNumFeatures; }
    double label(std::size_t i) const override { return set_.labels[i]; }
    void fill(std::size_t i, double* out) const override { source_.fill(set_.rows[i], out); }

    const SampleSet& set() const { return set_; }

  private:
    const WindowSource& source_;
    SampleSet set_;
};

} // namespace eshop
