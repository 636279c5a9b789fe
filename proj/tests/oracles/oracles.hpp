#pragma once

// Independent reference implementations used only by tests. They are written
// as direct loops over the definitions and share no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

// ------------------------------------------------------------- convolution

using Seq = std::vector<std::vector<double>>; // [t][c]

/** y[t][o] = b[o] + sum_p sum_c f[p][c][o] * x[t - d p][c], zero history. */
inline Seq
naiveConv(const Seq& x, const std::vector<std::vector<std::vector<double>>>& f,
          const std::vector<double>& bias, int d)
{
    const int steps = static_cast<int>(x.size());
    const int k = static_cast<int>(f.size());
    const int cin = static_cast<int>(f[0].size());
    const int cout = static_cast<int>(bias.size());
    Seq y(steps, std::vector<double>(cout, 0.0));
    for (int t = 0; t < steps; ++t) {
        for (int o = 0; o < cout; ++o) {
            double acc = bias[o];
            for (int p = 0; p < k; ++p) {
                const int src = t - d * p;
                if (src < 0) {
                    continue;
                }
                for (int c = 0; c < cin; ++c) {
                    acc += f[p][c][o] * x[src][c];
                }
            }
            y[t][o] = acc;
        }
    }
    return y;
}

// ------------------------------------------------------------- events

struct Trace
{
    std::vector<std::int64_t> t;
    std::vector<std::array<double, 3>> best; // best-beam L3 RSRP per cell
};

struct Rule
{
    bool a5 = false;
    double hom = 4.0;   // offset + hysteresis (A3)
    double hys = 0.0;   // A5 hysteresis
    double th1 = -100.0;
    double th2 = -90.0;
    int tttMs = 40;
};

struct Ev
{
    std::string kind;
    std::int64_t t;
    int serving;
    int target;
    bool operator==(const Ev&) const = default;
};

inline bool
entryHolds(const Rule& r, double serving, double neighbor)
{
    if (r.a5) {
        return serving + r.hys < r.th1 && neighbor - r.hys > r.th2;
    }
    return neighbor > serving + r.hom;
}

inline int
bestNeighbor(const std::array<double, 3>& v, int serving)
{
    int nb = -1;
    for (int c = 0; c < 3; ++c) {
        if (c != serving && (nb < 0 || v[c] > v[nb])) {
            nb = c;
        }
    }
    return nb;
}

/**
 * Look-ahead scanner: from every idle report where entry holds, walk forward over
 * the TTT span and decide A3 or abort. After A3, the command lands at the first
 * report at or after a3 + delays[k]; until then nothing is evaluated.
 */
inline std::vector<Ev>
scanEvents(const Trace& tr, int serving, const Rule& rule, const std::vector<int>& delays)
{
    std::vector<Ev> out;
    const std::size_t n = tr.t.size();
    std::size_t k = 0;
    std::optional<std::int64_t> cmdAt;
    int cmdTarget = -1;
    std::size_t i = 0;
    while (i < n) {
        if (cmdAt) {
            if (tr.t[i] < *cmdAt) {
                ++i;
                continue;
            }
            serving = cmdTarget;
            cmdAt.reset();
        }
        const int nb = bestNeighbor(tr.best[i], serving);
        if (!entryHolds(rule, tr.best[i][serving], tr.best[i][nb])) {
            ++i;
            continue;
        }
        out.push_back({"T0", tr.t[i], serving, nb});
        auto fire = [&](std::int64_t ta) {
            out.push_back({"A3", ta, serving, nb});
            const std::int64_t cmd = ta + delays[k % delays.size()];
            ++k;
            out.push_back({"CMD", cmd, serving, nb});
            cmdAt = cmd;
            cmdTarget = nb;
        };
        if (rule.tttMs == 0) {
            fire(tr.t[i]);
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        bool resolved = false;
        for (; j < n; ++j) {
            const int nbj = bestNeighbor(tr.best[j], serving);
            if (nbj != nb || !entryHolds(rule, tr.best[j][serving], tr.best[j][nb])) {
                out.push_back({"ABORT", tr.t[j], serving, nb});
                resolved = true;
                break; // j is evaluated again as an idle report
            }
            if (tr.t[j] - tr.t[i] >= rule.tttMs) {
                fire(tr.t[j]);
                ++j;
                resolved = true;
                break;
            }
        }
        if (!resolved) {
            break;
        }
        i = j;
    }
    return out;
}

// ------------------------------------------------------------- labels

struct Episode
{
    std::int64_t t0;
    bool aborted;
    bool completed; // A3 seen
    std::optional<std::int64_t> cmd;
};

struct Label
{
    std::optional<double> tef;
    std::string reason; // same names as the dataset exclusion codes
};

/** Per-sample linear scan over all episodes and commands. */
inline Label
labelAt(std::int64_t t, const std::vector<Episode>& eps, double horizon)
{
    // first command at or after t closes this sample's segment
    std::optional<std::int64_t> close;
    for (const auto& e : eps) {
        if (e.cmd && *e.cmd >= t && (!close || *e.cmd < *close)) {
            close = *e.cmd;
        }
    }
    const Episode* next = nullptr;
    for (const auto& e : eps) {
        if (e.t0 > t && (!next || e.t0 < next->t0)) {
            next = &e;
        }
    }
    if (!next || (close && next->t0 > *close)) {
        return {std::nullopt, "post_entry"};
    }
    if (next->aborted) {
        return {std::nullopt, "aborted_next"};
    }
    if (!next->completed) {
        return {std::nullopt, "unresolved"};
    }
    const double v = static_cast<double>(next->t0 - t) / 1000.0;
    if (v <= 0.0) {
        return {std::nullopt, "non_positive"};
    }
    if (v > horizon) {
        return {std::nullopt, "beyond_horizon"};
    }
    return {v, "none"};
}

// ------------------------------------------------------------- gradients

/** Central differences of f around theta, one coordinate at a time. */
inline std::vector<double>
finiteDifference(const std::function<double(const std::vector<double>&)>& f,
                 std::vector<double> theta, double h)
{
    std::vector<double> g(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double keep = theta[i];
        theta[i] = keep + h;
        const double up = f(theta);
        theta[i] = keep - h;
        const double down = f(theta);
        theta[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double
relativeError(double a, double b)
{
    const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / scale;
}

// ------------------------------------------------------------- metrics

struct Metrics
{
    double r2, evs, mape, mae, rmse;
};

inline Metrics
naiveMetrics(const std::vector<double>& y, const std::vector<double>& p)
{
    const double n = static_cast<double>(y.size());
    double my = 0, me = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        my += y[i] / n;
        me += (y[i] - p[i]) / n;
    }
    double sst = 0, sse = 0, ve = 0, ape = 0, ae = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - p[i];
        sst += (y[i] - my) * (y[i] - my);
        sse += e * e;
        ve += (e - me) * (e - me);
        ape += std::abs(e) / y[i];
        ae += std::abs(e);
    }
    return {1 - sse / sst, 1 - ve / sst, 100 * ape / n, ae / n, std::sqrt(sse / n)};
}

} // namespace oracle
