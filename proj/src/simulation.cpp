#include "simulation.hpp"

#include "common.hpp"

#include <optional>
#include <random>

namespace eshop {

void
SignalingConfig::validate() const
{
    if (!(dPrepMinMs > 0 && dPrepMinMs <= dPrepMaxMs && dPrepMaxMs <= tttMs)) {
        throwConfig("signaling: d_prep range must lie in (0, ttt_ms]");
    }
    if (!(guardMs > tttMs)) {
        throwConfig("signaling: guard_ms must exceed ttt_ms");
    }
    if (triggerThresholdMs < 0 || consecutiveRequired < 1) {
        throwConfig("signaling: invalid trigger rule");
    }
}

UeRun
simulateUe(const UeTrajectory& traj, const SiteLayout& layout, const ChannelParams& channel,
           const HcpConfig& hcp, const SignalingConfig& signaling, std::uint64_t masterSeed)
{
    const auto ue = static_cast<std::uint64_t>(traj.ueId);
    UeChannel ch(channel, layout, subSeed(masterSeed, ue, "shadow"),
                 subSeed(masterSeed, ue, "fading"));
    std::mt19937_64 sigRng(subSeed(masterSeed, ue, "signaling"));
    std::uniform_int_distribution<int> dPrep(signaling.dPrepMinMs, signaling.dPrepMaxMs);

    UeRun run;
    run.trajectory = traj;
    const std::int64_t endMs = traj.durationMs();
    const double stepM = traj.speed * SimClock::kTickMs / 1000.0;

    SimClock clock;
    std::optional<EventEngine> engine;
    std::optional<HoEventRecord> pendingCmd;
    for (; clock.nowMs() <= endMs; clock.advance()) {
        const std::int64_t now = clock.nowMs();
        ch.tick(positionAt(traj, now), clock.currentTick() == 0 ? 0.0 : stepM);
        if (!clock.isReportTick()) {
            continue;
        }
        ch.closeMeasurementPeriod();
        MeasurementReport report = makeReport(now, ch.filters());
        if (!engine) {
            engine.emplace(hcp, strongestCell(report));
        }
        if (pendingCmd && *pendingCmd->commandMs <= now) {
            engine->applyHandover(*pendingCmd);
            pendingCmd.reset();
        }
        for (const HoEvent& e : engine->step(report)) {
            run.events.push_back(e);
            if (e.kind == EventKind::A3) {
                HoEventRecord rec;
                rec.ueId = traj.ueId;
                rec.servingCell = e.serving;
                rec.targetCell = e.target;
                rec.a3Ms = e.tMs;
                rec.commandMs = e.tMs + dPrep(sigRng);
                if (*rec.commandMs <= endMs) {
                    run.events.push_back({EventKind::Cmd, *rec.commandMs, e.serving, e.target});
                    pendingCmd = rec;
                }
            }
        }
        run.reports.push_back(std::move(report));
    }
    return run;
}

} // namespace eshop
