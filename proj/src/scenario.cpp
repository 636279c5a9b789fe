#include "scenario.hpp"

#include "common.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace eshop {

namespace {

double
wrap360(double deg)
{
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) {
        r += 360.0;
    }
    return r >= 360.0 ? 0.0 : r;
}

} // namespace

void
SiteLayout::validate() const
{
    if (!(bsHeight > ueHeight && ueHeight > 0.0)) {
        throwConfig("site layout requires bs_height > ue_height > 0");
    }
    for (int i = 0; i < 3; ++i) {
        double sep = wrap360(sectorBoresightsDeg[(i + 1) % 3] - sectorBoresightsDeg[i]);
        if (std::abs(sep - 120.0) > 1e-9) {
            throwConfig("sector boresights must be separated by 120 degrees");
        }
    }
}

void
ScenarioConfig::validate() const
{
    if (!(durationS > 0.0)) {
        throwConfig("scenario duration_s must be positive");
    }
    if (speedsMps.empty()) {
        throwConfig("scenario speeds_mps must not be empty");
    }
    for (double v : speedsMps) {
        if (!(v > 0.0)) {
            throwConfig("scenario speeds must be positive");
        }
    }
    if (!(radiusMinM > 0.0 && radiusMaxM >= radiusMinM)) {
        throwConfig("scenario radius bounds must satisfy 0 < min <= max");
    }
    if (numUes < 1) {
        throwConfig("scenario num_ues must be >= 1");
    }
}

std::int64_t
UeTrajectory::durationMs() const
{
    return static_cast<std::int64_t>(std::llround(durationS * 1000.0));
}

double
UeTrajectory::periodS() const
{
    return 2.0 * std::numbers::pi * radius / speed;
}

UeTrajectory
spawnTrajectory(std::uint64_t seed, const ScenarioConfig& scenario, const SiteLayout& layout,
                int ueId)
{
    scenario.validate();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> radius(scenario.radiusMinM, scenario.radiusMaxM);
    std::uniform_int_distribution<std::size_t> speedIdx(0, scenario.speedsMps.size() - 1);
    std::bernoulli_distribution ccw(0.5);

    UeTrajectory t;
    t.centerX = layout.bsPosition.x;
    t.centerY = layout.bsPosition.y;
    t.startAngle = angle(rng);
    t.radius = scenario.radiusMinM == scenario.radiusMaxM ? scenario.radiusMinM : radius(rng);
    t.speed = scenario.speedsMps[speedIdx(rng)];
    t.direction = ccw(rng) ? 1 : -1;
    t.durationS = scenario.durationS;
    t.ueId = ueId;
    t.seed = seed;
    t.ueHeight = layout.ueHeight;
    return t;
}

Vec3
positionAt(const UeTrajectory& traj, std::int64_t tMs)
{
    if (tMs < 0 || tMs > traj.durationMs()) {
        std::ostringstream os;
        os << "position_at: t=" << tMs << " ms outside [0, " << traj.durationMs() << "]";
        throwData(os.str());
    }
    const double t = static_cast<double>(tMs) / 1000.0;
    const double theta = traj.startAngle + traj.direction * (traj.speed / traj.radius) * t;
    return {traj.centerX + traj.radius * std::cos(theta),
            traj.centerY + traj.radius * std::sin(theta), traj.ueHeight};
}

Bearing
bearingFromBs(const SiteLayout& layout, const Vec3& uePos)
{
    const double dx = uePos.x - layout.bsPosition.x;
    const double dy = uePos.y - layout.bsPosition.y;
    const double dz = uePos.z - layout.bsHeight;
    const double d2d = std::hypot(dx, dy);
    const double d3d = std::hypot(d2d, dz);
    if (d3d == 0.0) {
        throwData("bearing_from_bs: UE coincides with BS");
    }
    constexpr double kDeg = 180.0 / std::numbers::pi;
    return {wrap360(std::atan2(dy, dx) * kDeg), std::atan2(dz, d2d) * kDeg, d3d};
}

} // namespace eshop
