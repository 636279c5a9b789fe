#pragma once

#include <optional>
#include <span>
#include <string>

namespace eshop {

/** Regression quality of a countdown predictor. */
struct MetricsReport
{
    double r2 = 0.0;
    double evs = 0.0;
    double mapePct = 0.0;
    double mae = 0.0;
    double rmseS = 0.0;
    std::size_t n = 0;
    // set when the targets are constant and R2 / EVS are not defined
    std::optional<std::string> undefinedReason;
};

/** y: actual (strictly positive for MAPE), yhat: predicted. */
MetricsReport computeMetrics(std::span<const double> y, std::span<const double> yhat);

} // namespace eshop
