#pragma once

#include "channel.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace eshop {

enum class EventType { A3, A5 };

/** Handover control parameters. HOM = offset + hysteresis. */
struct HcpConfig
{
    EventType eventType = EventType::A3;
    int tttMs = 40;
    double hysteresisDb = 1.0;
    double offsetDb = 3.0;
    int reportIntervalMs = 0;
    int reportAmount = 1;
    std::optional<double> a5Threshold1Dbm;
    std::optional<double> a5Threshold2Dbm;

    double hom() const { return offsetDb + hysteresisDb; }
    void validate() const;
};

bool a3Entry(double neighborDbm, double servingDbm, const HcpConfig& hcp);
bool a5Entry(double servingDbm, double neighborDbm, const HcpConfig& hcp);

enum class EventKind { T0, A3, Abort, Cmd };

std::string_view toString(EventKind k);
EventKind eventKindFromString(std::string_view s);

struct HoEvent
{
    EventKind kind;
    std::int64_t tMs;
    int serving;
    int target;

    bool operator==(const HoEvent&) const = default;
};

/** One T0 episode: a3Ms is set unless the TTT was aborted (or the run ended first). */
struct HoEventRecord
{
    int ueId = 0;
    int servingCell = 0;
    int targetCell = 0;
    std::int64_t t0Ms = 0;
    std::optional<std::int64_t> a3Ms;
    bool aborted = false;
    std::optional<std::int64_t> commandMs;
};

/** Pairs T0 with the A3/ABORT/CMD that resolves it. */
std::vector<HoEventRecord> episodesFromEvents(int ueId, const std::vector<HoEvent>& events);

struct TttState
{
    bool armed = false;
    std::int64_t armedSinceMs = 0;
    int candidateTarget = -1;
};

/**
 * A3/A5 measurement-event state machine for one UE. Entry is evaluated at every
 * report against the strongest neighbour; a single armed candidate is tracked.
 */
class EventEngine
{
  public:
    EventEngine(const HcpConfig& hcp, int servingCell);

    std::vector<HoEvent> step(const MeasurementReport& report);

    /** Switches the serving cell at the command instant and closes the episode. */
    void applyHandover(const HoEventRecord& record);

    int servingCell() const { return serving_; }
    bool commandPending() const { return pending_; }
    const TttState& ttt() const { return ttt_; }

  private:
    bool entry(double neighbor, double serving) const;

    HcpConfig hcp_;
    int serving_;
    TttState ttt_;
    bool pending_ = false;
    std::optional<std::int64_t> lastReportMs_;
};

/** Strongest neighbour of `serving` by best-beam L3 RSRP; ties go to the lowest cell index. */
int strongestNeighbor(const MeasurementReport& report, int serving);

int strongestCell(const MeasurementReport& report);

} // namespace eshop
