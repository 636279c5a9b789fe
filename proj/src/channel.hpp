#pragma once

#include "scenario.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace eshop {

inline constexpr int kNumCells = 3;
inline constexpr int kBeamsPerCell = 12;

enum class LosMode { LoS, NLoS };

struct BeamDescriptor
{
    double azimuthDeg = 0.0;   // absolute boresight
    double elevationDeg = 0.0; // tilt, negative = downward
    double azBeamwidthDeg = 40.0;
    double elBeamwidthDeg = 14.0;
    double peakGainDbi = 14.0;
    double frontToBackDb = 30.0;
};

/**
 * Static SSB grid: per cell 3 azimuth offsets x 4 elevation tilts.
 * beam_id = elevation_index * 3 + azimuth_index.
 */
struct BeamGrid
{
    std::array<double, 3> azOffsetsDeg{-40.0, 0.0, 40.0};
    std::array<double, 4> elTiltsDeg{-21.0, -7.0, 7.0, 21.0};
    double azBeamwidthDeg = 40.0;
    double elBeamwidthDeg = 14.0;
    double peakGainDbi = 14.0;
    double frontToBackDb = 30.0;

    BeamDescriptor beam(const SiteLayout& layout, int cell, int beamId) const;
};

struct ChannelParams
{
    double fcGhz = 28.0;
    double bandwidthMhz = 100.0;
    double txPowerPerSsbDbm = 30.0;
    LosMode losMode = LosMode::LoS;
    double shadowSigmaLosDb = 4.0;
    double shadowSigmaNlosDb = 7.8;
    double decorrelationDistanceM = 10.0;
    double fastFadingSigmaDb = 2.0;
    bool fastFading = true;
    bool shadowing = true;
    bool shadowCoSited = true; // one shadowing process shared by the three co-sited cells
    double l3Coefficient = 0.5;
    BeamGrid grid;

    double shadowSigmaDb() const
    {
        return losMode == LosMode::LoS ? shadowSigmaLosDb : shadowSigmaNlosDb;
    }
    void validate() const;
};

double beamGain(const BeamDescriptor& beam, double azDeg, double elDeg);

double pathLoss(double d3d, LosMode mode, double fcGhz = 28.0, double ueHeight = 1.5);

double shadowStep(double prev, double deltaD, const ChannelParams& params, std::mt19937_64& rng);

/** tx + beam gain - pathloss - shadow + fading, all in dB. */
double rsrpL1(const ChannelParams& params, const BeamDescriptor& beam, const Bearing& bearing,
              double shadowDb, double fadingDb, double ueHeight = 1.5);

/** First-order L3 filter, one state per (cell, beam). */
class L3FilterState
{
  public:
    explicit L3FilterState(double coefficient = 0.5);

    double update(int cell, int beam, double rawDbm);
    bool initialized(int cell, int beam) const;
    double value(int cell, int beam) const;
    double coefficient() const { return a_; }

  private:
    double a_;
    std::array<double, kNumCells * kBeamsPerCell> f_{};
    std::array<bool, kNumCells * kBeamsPerCell> init_{};
};

struct BeamRsrp
{
    int beamId;
    double l3RsrpDbm;
};

struct MeasurementReport
{
    std::int64_t tMs = 0;
    std::array<std::array<BeamRsrp, kBeamsPerCell>, kNumCells> cells{};

    double bestRsrp(int cell) const;
};

MeasurementReport makeReport(std::int64_t tMs, const L3FilterState& filters);

/** Per-UE channel: correlated shadowing (shared or per cell), i.i.d. fast fading per beam. */
class UeChannel
{
  public:
    UeChannel(const ChannelParams& params, const SiteLayout& layout, std::uint64_t shadowSeed,
              std::uint64_t fadingSeed);

    /** Advances shadowing by deltaD metres and takes one L1 sample per beam at uePos. */
    void tick(const Vec3& uePos, double deltaD);

    /** Averages the L1 samples since the last call (linear power) and feeds the L3 filters. */
    void closeMeasurementPeriod();

    double shadow(int cell) const { return shadow_[cell]; }
    const L3FilterState& filters() const { return filters_; }

  private:
    ChannelParams params_;
    SiteLayout layout_;
    std::array<BeamDescriptor, kNumCells * kBeamsPerCell> beams_;
    std::mt19937_64 shadowRng_;
    std::mt19937_64 fadingRng_;
    std::array<double, kNumCells> shadow_{};
    bool started_ = false;
    std::array<double, kNumCells * kBeamsPerCell> l1SumMw_{};
    int l1Samples_ = 0;
    L3FilterState filters_;
};

} // namespace eshop
