#pragma once

#include "channel.hpp"
#include "events.hpp"
#include "scenario.hpp"

#include <cstdint>
#include <vector>

namespace eshop {

struct SignalingConfig
{
    int dPrepMinMs = 15;
    int dPrepMaxMs = 35;
    int tttMs = 40;
    int guardMs = 200;
    int triggerThresholdMs = 40;
    int consecutiveRequired = 2;

    void validate() const;
};

struct UeRun
{
    UeTrajectory trajectory;
    std::vector<MeasurementReport> reports;
    std::vector<HoEvent> events;
};

/**
 * Runs one UE through the 10 ms tick loop: channel update every tick, a report and
 * an event-engine step every 40 ms, and the legacy HO command a3 + d_prep later.
 */
UeRun simulateUe(const UeTrajectory& traj, const SiteLayout& layout, const ChannelParams& channel,
                 const HcpConfig& hcp, const SignalingConfig& signaling,
                 std::uint64_t masterSeed);

} // namespace eshop
