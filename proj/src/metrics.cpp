#include "metrics.hpp"

#include "common.hpp"

#include <cmath>
#include <limits>

namespace eshop {

MetricsReport
computeMetrics(std::span<const double> y, std::span<const double> yhat)
{
    const std::size_t n = y.size();
    if (n == 0) {
        throwData("metrics: empty split");
    }
    if (yhat.size() != n) {
        throwData("metrics: length mismatch");
    }
    const double nn = static_cast<double>(n);
    double meanY = 0.0;
    double meanE = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        meanY += y[i];
        meanE += y[i] - yhat[i];
    }
    meanY /= nn;
    meanE /= nn;

    double sst = 0.0;
    double sse = 0.0;
    double varE = 0.0;
    double absSum = 0.0;
    double pctSum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - yhat[i];
        sst += (y[i] - meanY) * (y[i] - meanY);
        sse += e * e;
        varE += (e - meanE) * (e - meanE);
        absSum += std::abs(e);
        pctSum += std::abs(e) / y[i];
    }

    MetricsReport m;
    m.n = n;
    m.mae = absSum / nn;
    m.mapePct = 100.0 * pctSum / nn;
    m.rmseS = std::sqrt(sse / nn);
    if (sst == 0.0) {
        m.r2 = std::numeric_limits<double>::quiet_NaN();
        m.evs = std::numeric_limits<double>::quiet_NaN();
        m.undefinedReason = "constant targets: total sum of squares is zero";
    } else {
        m.r2 = 1.0 - sse / sst;
        m.evs = 1.0 - varE / sst;
    }
    return m;
}

} // namespace eshop
