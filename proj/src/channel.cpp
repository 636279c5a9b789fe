#include "channel.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>

namespace eshop {

namespace {

// (-180, 180]
double
wrap180(double deg)
{
    double r = std::fmod(deg, 360.0);
    if (r <= -180.0) {
        r += 360.0;
    } else if (r > 180.0) {
        r -= 360.0;
    }
    return r;
}

int
slot(int cell, int beam)
{
    return cell * kBeamsPerCell + beam;
}

} // namespace

BeamDescriptor
BeamGrid::beam(const SiteLayout& layout, int cell, int beamId) const
{
    const int az = beamId % 3;
    const int el = beamId / 3;
    BeamDescriptor b;
    b.azimuthDeg = layout.sectorBoresightsDeg[cell] + azOffsetsDeg[az];
    b.elevationDeg = elTiltsDeg[el];
    b.azBeamwidthDeg = azBeamwidthDeg;
    b.elBeamwidthDeg = elBeamwidthDeg;
    b.peakGainDbi = peakGainDbi;
    b.frontToBackDb = frontToBackDb;
    return b;
}

void
ChannelParams::validate() const
{
    if (fcGhz != 28.0) {
        throwConfig("carrier frequency is fixed at 28 GHz");
    }
    if (!(shadowSigmaLosDb > 0.0 && shadowSigmaNlosDb > 0.0)) {
        throwConfig("shadowing sigma must be positive");
    }
    if (!(decorrelationDistanceM > 0.0)) {
        throwConfig("decorrelation distance must be positive");
    }
    if (!(fastFadingSigmaDb >= 0.0)) {
        throwConfig("fast fading sigma must be non-negative");
    }
    if (!(l3Coefficient > 0.0 && l3Coefficient <= 1.0)) {
        throwConfig("L3 filter coefficient must lie in (0, 1]");
    }
    if (!(grid.azBeamwidthDeg > 0.0 && grid.elBeamwidthDeg > 0.0)) {
        throwConfig("beamwidths must be positive");
    }
}

double
beamGain(const BeamDescriptor& beam, double azDeg, double elDeg)
{
    const double daz = wrap180(azDeg - beam.azimuthDeg) / beam.azBeamwidthDeg;
    const double del = wrap180(elDeg - beam.elevationDeg) / beam.elBeamwidthDeg;
    return beam.peakGainDbi - std::min(12.0 * (daz * daz + del * del), beam.frontToBackDb);
}

double
pathLoss(double d3d, LosMode mode, double fcGhz, double ueHeight)
{
    if (!(d3d >= 1.0)) {
        throwData("path_loss: distance below 1 m");
    }
    const double los = 32.4 + 21.0 * std::log10(d3d) + 20.0 * std::log10(fcGhz);
    if (mode == LosMode::LoS) {
        return los;
    }
    const double nlos =
        22.4 + 35.3 * std::log10(d3d) + 21.3 * std::log10(fcGhz) - 0.3 * (ueHeight - 1.5);
    return std::max(los, nlos);
}

double
shadowStep(double prev, double deltaD, const ChannelParams& params, std::mt19937_64& rng)
{
    const double rho = std::exp(-deltaD / params.decorrelationDistanceM);
    std::normal_distribution<double> n(0.0, params.shadowSigmaDb());
    return rho * prev + std::sqrt(1.0 - rho * rho) * n(rng);
}

double
rsrpL1(const ChannelParams& params, const BeamDescriptor& beam, const Bearing& bearing,
       double shadowDb, double fadingDb, double ueHeight)
{
    return params.txPowerPerSsbDbm + beamGain(beam, bearing.azimuthDeg, bearing.elevationDeg) -
           pathLoss(bearing.distance3d, params.losMode, params.fcGhz, ueHeight) - shadowDb +
           fadingDb;
}

L3FilterState::L3FilterState(double coefficient) : a_(coefficient) {}

double
L3FilterState::update(int cell, int beam, double rawDbm)
{
    const int i = slot(cell, beam);
    if (!init_[i]) {
        f_[i] = rawDbm;
        init_[i] = true;
    } else {
        f_[i] = (1.0 - a_) * f_[i] + a_ * rawDbm;
    }
    return f_[i];
}

bool
L3FilterState::initialized(int cell, int beam) const
{
    return init_[slot(cell, beam)];
}

double
L3FilterState::value(int cell, int beam) const
{
    return f_[slot(cell, beam)];
}

double
MeasurementReport::bestRsrp(int cell) const
{
    double best = cells[cell][0].l3RsrpDbm;
    for (const auto& b : cells[cell]) {
        best = std::max(best, b.l3RsrpDbm);
    }
    return best;
}

MeasurementReport
makeReport(std::int64_t tMs, const L3FilterState& filters)
{
    if (tMs % 40 != 0) {
        throwData("make_report: timestamp not on the 40 ms grid");
    }
    MeasurementReport r;
    r.tMs = tMs;
    for (int c = 0; c < kNumCells; ++c) {
        for (int b = 0; b < kBeamsPerCell; ++b) {
            if (!filters.initialized(c, b)) {
                throwData("make_report: missing filter state");
            }
            r.cells[c][b] = {b, filters.value(c, b)};
        }
    }
    return r;
}

UeChannel::UeChannel(const ChannelParams& params, const SiteLayout& layout,
                     std::uint64_t shadowSeed, std::uint64_t fadingSeed)
    : params_(params),
      layout_(layout),
      shadowRng_(shadowSeed),
      fadingRng_(fadingSeed),
      filters_(params.l3Coefficient)
{
    for (int c = 0; c < kNumCells; ++c) {
        for (int b = 0; b < kBeamsPerCell; ++b) {
            beams_[slot(c, b)] = params_.grid.beam(layout_, c, b);
        }
    }
}

void
UeChannel::tick(const Vec3& uePos, double deltaD)
{
    for (int c = 0; c < kNumCells; ++c) {
        if (!params_.shadowing) {
            shadow_[c] = 0.0;
        } else if (c > 0 && params_.shadowCoSited) {
            shadow_[c] = shadow_[0];
        } else if (!started_) {
            std::normal_distribution<double> n(0.0, params_.shadowSigmaDb());
            shadow_[c] = n(shadowRng_);
        } else {
            shadow_[c] = shadowStep(shadow_[c], deltaD, params_, shadowRng_);
        }
    }
    started_ = true;

    const Bearing bearing = bearingFromBs(layout_, uePos);
    std::normal_distribution<double> fading(0.0, params_.fastFadingSigmaDb);
    for (int c = 0; c < kNumCells; ++c) {
        for (int b = 0; b < kBeamsPerCell; ++b) {
            const double ff =
                params_.fastFading && params_.fastFadingSigmaDb > 0.0 ? fading(fadingRng_) : 0.0;
            const double l1 =
                rsrpL1(params_, beams_[slot(c, b)], bearing, shadow_[c], ff, layout_.ueHeight);
            l1SumMw_[slot(c, b)] += std::pow(10.0, l1 / 10.0);
        }
    }
    ++l1Samples_;
}

void
UeChannel::closeMeasurementPeriod()
{
    if (l1Samples_ == 0) {
        throw Error(ErrorKind::Internal, "measurement period closed without L1 samples");
    }
    for (int c = 0; c < kNumCells; ++c) {
        for (int b = 0; b < kBeamsPerCell; ++b) {
            double& sum = l1SumMw_[slot(c, b)];
            filters_.update(c, b, 10.0 * std::log10(sum / l1Samples_));
            sum = 0.0;
        }
    }
    l1Samples_ = 0;
}

} // namespace eshop
