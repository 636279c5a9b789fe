#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace eshop {

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/** Single site with three co-located sectors. */
struct SiteLayout
{
    Vec3 bsPosition{0.0, 0.0, 10.0};
    double bsHeight = 10.0;
    double ueHeight = 1.5;
    std::array<double, 3> sectorBoresightsDeg{90.0, 210.0, 330.0};
    std::array<int, 3> cellIds{0, 1, 2};

    void validate() const;
};

struct ScenarioConfig
{
    double radiusMinM = 40.0;
    double radiusMaxM = 60.0;
    std::vector<double> speedsMps{25.0, 31.0};
    double durationS = 60.0;
    int numUes = 5;
    std::uint64_t seed = 1;

    void validate() const;
};

struct UeTrajectory
{
    double centerX = 0.0;
    double centerY = 0.0;
    double radius = 50.0;
    double speed = 25.0;
    double startAngle = 0.0; // rad
    int direction = 1;       // +1 counter-clockwise, -1 clockwise
    double durationS = 0.0;
    int ueId = 0;
    std::uint64_t seed = 0;
    double ueHeight = 1.5;

    std::int64_t durationMs() const;
    double periodS() const;
};

struct Bearing
{
    double azimuthDeg;   // [0, 360), 0 = east, counter-clockwise
    double elevationDeg; // negative when UE below BS
    double distance3d;
};

/** 10 ms tick aligned with the SSB period; one report every 4 ticks. */
class SimClock
{
  public:
    static constexpr int kTickMs = 10;
    static constexpr int kReportPeriodTicks = 4;
    static constexpr int kReportPeriodMs = kTickMs * kReportPeriodTicks;

    std::int64_t currentTick() const { return tick_; }
    std::int64_t nowMs() const { return tick_ * kTickMs; }
    bool isReportTick() const { return tick_ % kReportPeriodTicks == 0; }
    void advance() { ++tick_; }

  private:
    std::int64_t tick_ = 0;
};

UeTrajectory spawnTrajectory(std::uint64_t seed, const ScenarioConfig& scenario,
                             const SiteLayout& layout = {}, int ueId = 0);

Vec3 positionAt(const UeTrajectory& traj, std::int64_t tMs);

Bearing bearingFromBs(const SiteLayout& layout, const Vec3& uePos);

} // namespace eshop
