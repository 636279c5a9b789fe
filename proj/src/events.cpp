#include "events.hpp"

#include "common.hpp"

#include <sstream>

namespace eshop {

void
HcpConfig::validate() const
{
    if (tttMs < 0 || tttMs % 40 != 0) {
        throwConfig("ttt_ms must be a non-negative multiple of the 40 ms report period");
    }
    if (eventType == EventType::A5 && (!a5Threshold1Dbm || !a5Threshold2Dbm)) {
        throwConfig("A5 event requires a5_threshold1_dbm and a5_threshold2_dbm");
    }
}

bool
a3Entry(double neighborDbm, double servingDbm, const HcpConfig& hcp)
{
    return neighborDbm > servingDbm + hcp.offsetDb + hcp.hysteresisDb;
}

bool
a5Entry(double servingDbm, double neighborDbm, const HcpConfig& hcp)
{
    if (!hcp.a5Threshold1Dbm || !hcp.a5Threshold2Dbm) {
        throwConfig("A5 thresholds are not configured");
    }
    return servingDbm + hcp.hysteresisDb < *hcp.a5Threshold1Dbm &&
           neighborDbm - hcp.hysteresisDb > *hcp.a5Threshold2Dbm;
}

std::string_view
toString(EventKind k)
{
    switch (k) {
    case EventKind::T0:
        return "T0";
    case EventKind::A3:
        return "A3";
    case EventKind::Abort:
        return "ABORT";
    case EventKind::Cmd:
        return "CMD";
    }
    return "?";
}

EventKind
eventKindFromString(std::string_view s)
{
    if (s == "T0") {
        return EventKind::T0;
    }
    if (s == "A3") {
        return EventKind::A3;
    }
    if (s == "ABORT") {
        return EventKind::Abort;
    }
    if (s == "CMD") {
        return EventKind::Cmd;
    }
    throwData("unknown event kind '" + std::string(s) + "'");
}

std::vector<HoEventRecord>
episodesFromEvents(int ueId, const std::vector<HoEvent>& events)
{
    std::vector<HoEventRecord> out;
    HoEventRecord* open = nullptr;
    for (const auto& e : events) {
        switch (e.kind) {
        case EventKind::T0:
            if (open && !open->a3Ms && !open->aborted) {
                throwData("event log: T0 while previous episode unresolved");
            }
            out.push_back({ueId, e.serving, e.target, e.tMs, std::nullopt, false, std::nullopt});
            open = &out.back();
            break;
        case EventKind::A3:
            if (!open || open->aborted || open->a3Ms) {
                throwData("event log: A3 without an open T0");
            }
            open->a3Ms = e.tMs;
            break;
        case EventKind::Abort:
            if (!open || open->aborted || open->a3Ms) {
                throwData("event log: ABORT without an open T0");
            }
            open->aborted = true;
            break;
        case EventKind::Cmd:
            if (!open || !open->a3Ms || open->commandMs) {
                throwData("event log: CMD without a preceding A3");
            }
            open->commandMs = e.tMs;
            break;
        }
    }
    return out;
}

int
strongestCell(const MeasurementReport& report)
{
    int best = 0;
    for (int c = 1; c < kNumCells; ++c) {
        if (report.bestRsrp(c) > report.bestRsrp(best)) {
            best = c;
        }
    }
    return best;
}

int
strongestNeighbor(const MeasurementReport& report, int serving)
{
    int best = -1;
    for (int c = 0; c < kNumCells; ++c) {
        if (c == serving) {
            continue;
        }
        if (best < 0 || report.bestRsrp(c) > report.bestRsrp(best)) {
            best = c;
        }
    }
    return best;
}

EventEngine::EventEngine(const HcpConfig& hcp, int servingCell) : hcp_(hcp), serving_(servingCell)
{
    hcp_.validate();
}

bool
EventEngine::entry(double neighbor, double serving) const
{
    return hcp_.eventType == EventType::A3 ? a3Entry(neighbor, serving, hcp_)
                                           : a5Entry(serving, neighbor, hcp_);
}

std::vector<HoEvent>
EventEngine::step(const MeasurementReport& report)
{
    if (lastReportMs_ && report.tMs <= *lastReportMs_) {
        std::ostringstream os;
        os << "event engine: report at " << report.tMs << " ms not after " << *lastReportMs_;
        throwData(os.str());
    }
    lastReportMs_ = report.tMs;

    std::vector<HoEvent> events;
    if (pending_) {
        return events;
    }
    const std::int64_t t = report.tMs;
    const double servingDbm = report.bestRsrp(serving_);
    const int neighbor = strongestNeighbor(report, serving_);
    const bool holds = entry(report.bestRsrp(neighbor), servingDbm);

    if (ttt_.armed) {
        if (neighbor != ttt_.candidateTarget || !holds) {
            events.push_back({EventKind::Abort, t, serving_, ttt_.candidateTarget});
            ttt_ = {};
        } else if (t - ttt_.armedSinceMs >= hcp_.tttMs) {
            events.push_back({EventKind::A3, t, serving_, ttt_.candidateTarget});
            ttt_ = {};
            pending_ = true;
            return events;
        } else {
            return events;
        }
    }

    if (holds) {
        ttt_ = {true, t, neighbor};
        events.push_back({EventKind::T0, t, serving_, neighbor});
        if (hcp_.tttMs == 0) {
            events.push_back({EventKind::A3, t, serving_, neighbor});
            ttt_ = {};
            pending_ = true;
        }
    }
    return events;
}

void
EventEngine::applyHandover(const HoEventRecord& record)
{
    if (!record.a3Ms || !record.commandMs) {
        throwData("apply_handover: record lacks A3 or command time");
    }
    if (*record.commandMs < *record.a3Ms) {
        throwData("apply_handover: command precedes A3");
    }
    serving_ = record.targetCell;
    ttt_ = {};
    pending_ = false;
}

} // namespace eshop
