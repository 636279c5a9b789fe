#include "dataset.hpp"

#include "common.hpp"
#include "csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace eshop {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumExclusions> kExclusionNames{
    "none",         "aborted_next", "post_entry", "beyond_horizon",
    "non_positive", "unresolved",   "run_start"};

bool
isRsrpColumn(int f)
{
    return f % kBlockWidth == 0;
}

std::string
datasetHeader()
{
    std::string h = "ue_id,t_ms,segment,label_tef_s,exclusion";
    for (int f = 0; f < kNumFeatures; ++f) {
        h += ",f" + std::to_string(f);
    }
    return h;
}

std::string
formatRow(const DatasetRow& r)
{
    std::string s = std::to_string(r.ueId) + "," + std::to_string(r.tMs) + "," +
                     std::to_string(r.segment) + ",";
    if (r.labelTefS) {
        s += formatDouble(*r.labelTefS);
    }
    s += ",";
    s += toString(r.reason);
    for (int f = 0; f < kNumFeatures; ++f) {
        s += ",";
        s += isRsrpColumn(f) ? formatDouble(r.raw[f]) : (r.raw[f] != 0.0 ? "1" : "0");
    }
    return s;
}

const std::vector<int>&
splitList(const SplitAssignment& s, SplitName n)
{
    switch (n) {
    case SplitName::Train:
        return s.train;
    case SplitName::Val:
        return s.val;
    case SplitName::Test:
        return s.test;
    }
    return s.test;
}

} // namespace

std::string_view
toString(Exclusion e)
{
    return kExclusionNames[static_cast<int>(e)];
}

Exclusion
exclusionFromString(std::string_view s)
{
    for (int i = 0; i < kNumExclusions; ++i) {
        if (kExclusionNames[i] == s) {
            return static_cast<Exclusion>(i);
        }
    }
    throwData("unknown exclusion code '" + std::string(s) + "'");
}

ReducedReport
reduceReport(const MeasurementReport& report)
{
    ReducedReport r;
    r.tMs = report.tMs;
    for (int c = 0; c < kNumCells; ++c) {
        int best = 0;
        for (int b = 1; b < kBeamsPerCell; ++b) {
            if (report.cells[c][b].l3RsrpDbm > report.cells[c][best].l3RsrpDbm) {
                best = b;
            }
        }
        r.bestBeam[c] = report.cells[c][best].beamId;
        r.bestRsrpDbm[c] = report.cells[c][best].l3RsrpDbm;
    }
    return r;
}

std::array<double, kNumFeatures>
encodeFeatures(const ReducedReport& r)
{
    std::array<double, kNumFeatures> f{};
    for (int c = 0; c < kNumCells; ++c) {
        f[c * kBlockWidth] = r.bestRsrpDbm[c];
        f[c * kBlockWidth + 1 + r.bestBeam[c]] = 1.0;
    }
    return f;
}

std::vector<int>
segmentIds(std::span<const std::int64_t> reportTimes, std::span<const HoEventRecord> episodes)
{
    std::vector<std::int64_t> cmds;
    for (const auto& e : episodes) {
        if (e.commandMs) {
            cmds.push_back(*e.commandMs);
        }
    }
    std::sort(cmds.begin(), cmds.end());
    std::vector<int> seg(reportTimes.size());
    std::size_t c = 0;
    for (std::size_t i = 0; i < reportTimes.size(); ++i) {
        while (c < cmds.size() && cmds[c] < reportTimes[i]) {
            ++c;
        }
        seg[i] = static_cast<int>(c);
    }
    return seg;
}

std::vector<TefLabel>
labelTef(std::span<const std::int64_t> reportTimes, std::span<const HoEventRecord> episodes,
         double horizonS)
{
    for (std::size_t i = 1; i < episodes.size(); ++i) {
        if (episodes[i].t0Ms < episodes[i - 1].t0Ms) {
            throwData("label_tef: episodes not sorted by t0");
        }
    }
    std::vector<std::int64_t> cmds;
    for (const auto& e : episodes) {
        if (e.commandMs) {
            cmds.push_back(*e.commandMs);
        }
    }
    std::sort(cmds.begin(), cmds.end());

    std::vector<TefLabel> out(reportTimes.size());
    std::size_t ep = 0;
    std::size_t cmd = 0;
    for (std::size_t i = 0; i < reportTimes.size(); ++i) {
        const std::int64_t t = reportTimes[i];
        while (ep < episodes.size() && episodes[ep].t0Ms <= t) {
            ++ep;
        }
        while (cmd < cmds.size() && cmds[cmd] < t) {
            ++cmd;
        }
        TefLabel& l = out[i];
        l.segment = static_cast<int>(cmd);
        const bool inSegment =
            ep < episodes.size() && (cmd == cmds.size() || episodes[ep].t0Ms <= cmds[cmd]);
        if (!inSegment) {
            l.reason = Exclusion::PostEntry;
            continue;
        }
        const HoEventRecord& next = episodes[ep];
        if (next.aborted) {
            l.reason = Exclusion::AbortedNext;
            continue;
        }
        if (!next.a3Ms) {
            l.reason = Exclusion::Unresolved;
            continue;
        }
        const double label = static_cast<double>(next.t0Ms - t) / 1000.0;
        if (label <= 0.0) {
            l.reason = Exclusion::NonPositive;
        } else if (label > horizonS) {
            l.reason = Exclusion::BeyondHorizon;
        } else {
            l.tefS = label;
        }
    }
    return out;
}

std::vector<LabeledSample>
windowize(std::span<const double> rows, std::span<const int> ueIds,
          std::span<const std::int64_t> times, std::span<const int> segments,
          std::span<const TefLabel> labels, int windowLen)
{
    if (windowLen < 1) {
        throwConfig("windowize: window length must be >= 1");
    }
    const std::size_t n = ueIds.size();
    if (rows.size() != n * kNumFeatures || times.size() != n || segments.size() != n ||
        labels.size() != n) {
        throwData("windowize: inconsistent input lengths");
    }
    std::vector<LabeledSample> out;
    std::size_t segStart = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0 && (ueIds[i] != ueIds[i - 1] || segments[i] != segments[i - 1])) {
            segStart = i;
        }
        if (!labels[i].tefS) {
            continue;
        }
        LabeledSample s;
        s.ueId = ueIds[i];
        s.tMs = times[i];
        s.labelTefS = *labels[i].tefS;
        s.window.assign(static_cast<std::size_t>(windowLen) * kNumFeatures, 0.0);
        for (int k = 0; k < windowLen; ++k) {
            const auto p = static_cast<std::ptrdiff_t>(i) - (windowLen - 1 - k);
            if (p < static_cast<std::ptrdiff_t>(segStart)) {
                continue;
            }
            std::copy_n(rows.begin() + p * kNumFeatures, kNumFeatures,
                        s.window.begin() + static_cast<std::ptrdiff_t>(k) * kNumFeatures);
        }
        out.push_back(std::move(s));
    }
    return out;
}

SplitAssignment
splitUes(std::vector<int> ueIds, const SplitRatios& ratios, std::uint64_t seed)
{
    const double sum = ratios.train + ratios.val + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9 || ratios.train < 0 || ratios.val < 0 || ratios.test < 0) {
        throwConfig("split ratios must be non-negative and sum to 1");
    }
    const int wanted = (ratios.train > 0) + (ratios.val > 0) + (ratios.test > 0);
    std::sort(ueIds.begin(), ueIds.end());
    ueIds.erase(std::unique(ueIds.begin(), ueIds.end()), ueIds.end());
    const int n = static_cast<int>(ueIds.size());
    if (n < wanted) {
        throwData("split: fewer UEs than non-empty splits");
    }
    std::mt19937_64 rng(seed);
    std::shuffle(ueIds.begin(), ueIds.end(), rng);

    int nVal = static_cast<int>(std::lround(ratios.val * n));
    int nTest = static_cast<int>(std::lround(ratios.test * n));
    if (ratios.val > 0) {
        nVal = std::max(nVal, 1);
    }
    if (ratios.test > 0) {
        nTest = std::max(nTest, 1);
    }
    int nTrain = n - nVal - nTest;
    if (ratios.train > 0 && nTrain < 1) {
        // shrink the larger holdout until train has one UE
        while (nTrain < 1) {
            (nVal >= nTest && nVal > 1 ? nVal : nTest)--;
            nTrain = n - nVal - nTest;
        }
    }
    SplitAssignment s;
    s.train.assign(ueIds.begin(), ueIds.begin() + nTrain);
    s.val.assign(ueIds.begin() + nTrain, ueIds.begin() + nTrain + nVal);
    s.test.assign(ueIds.begin() + nTrain + nVal, ueIds.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void
DatasetConfig::validate() const
{
    if (!(horizonS > 0.0)) {
        throwConfig("dataset horizon_s must be positive");
    }
    if (windowLen < 1) {
        throwConfig("dataset window_len must be >= 1");
    }
}

void
computeNormalization(Dataset& ds)
{
    const std::set<int> train(ds.meta.split.train.begin(), ds.meta.split.train.end());
    std::array<double, kNumFeatures> sum{};
    std::array<double, kNumFeatures> sq{};
    std::size_t n = 0;
    for (const auto& r : ds.rows) {
        if (!train.contains(r.ueId)) {
            continue;
        }
        ++n;
        for (int f = 0; f < kNumFeatures; f += kBlockWidth) {
            sum[f] += r.raw[f];
        }
    }
    if (n == 0) {
        throwData("normalization: empty train split");
    }
    for (int f = 0; f < kNumFeatures; ++f) {
        ds.meta.mean[f] = isRsrpColumn(f) ? sum[f] / static_cast<double>(n) : 0.0;
    }
    for (const auto& r : ds.rows) {
        if (!train.contains(r.ueId)) {
            continue;
        }
        for (int f = 0; f < kNumFeatures; f += kBlockWidth) {
            const double d = r.raw[f] - ds.meta.mean[f];
            sq[f] += d * d;
        }
    }
    for (int f = 0; f < kNumFeatures; ++f) {
        if (!isRsrpColumn(f)) {
            ds.meta.stddev[f] = 1.0;
            continue;
        }
        const double sd = std::sqrt(sq[f] / static_cast<double>(n));
        ds.meta.stddev[f] = sd > 0.0 ? sd : 1.0;
    }
}

std::vector<double>
standardize(const DatasetMeta& meta, const std::array<double, kNumFeatures>& raw)
{
    std::vector<double> out(kNumFeatures);
    for (int f = 0; f < kNumFeatures; ++f) {
        out[f] = (raw[f] - meta.mean[f]) / meta.stddev[f];
    }
    return out;
}

Dataset
buildDataset(const std::vector<UeLog>& logs, const DatasetConfig& cfg, std::uint64_t seed,
             const std::string& configHash)
{
    cfg.validate();
    Dataset ds;
    ds.meta.configHash = configHash;
    ds.meta.masterSeed = seed;
    ds.meta.horizonS = cfg.horizonS;
    ds.meta.windowLen = cfg.windowLen;

    std::vector<const UeLog*> order;
    for (const auto& l : logs) {
        order.push_back(&l);
    }
    std::sort(order.begin(), order.end(),
              [](const UeLog* a, const UeLog* b) { return a->ueId < b->ueId; });

    std::vector<int> ues;
    for (const UeLog* log : order) {
        ues.push_back(log->ueId);
        std::vector<std::int64_t> times;
        for (const auto& r : log->reports) {
            times.push_back(r.tMs);
        }
        const auto episodes = episodesFromEvents(log->ueId, log->events);
        const auto labels = labelTef(times, episodes, cfg.horizonS);
        for (std::size_t i = 0; i < log->reports.size(); ++i) {
            DatasetRow row;
            row.ueId = log->ueId;
            row.tMs = times[i];
            row.segment = labels[i].segment;
            row.labelTefS = labels[i].tefS;
            row.reason = labels[i].reason;
            // no history exists before the run, so these windows would look like a fresh handover
            if (row.labelTefS && row.segment == 0 && i + 1 < static_cast<std::size_t>(cfg.windowLen)) {
                row.labelTefS.reset();
                row.reason = Exclusion::RunStart;
            }
            row.raw = encodeFeatures(reduceReport(log->reports[i]));
            ++ds.meta.rawCount;
            if (row.labelTefS) {
                ++ds.meta.keptCount;
            } else {
                ++ds.meta.excluded[static_cast<int>(row.reason)];
            }
            ds.rows.push_back(row);
        }
    }
    ds.meta.rowCount = ds.rows.size();
    ds.meta.split = splitUes(ues, cfg.ratios, subSeed(seed, 0, "split"));
    computeNormalization(ds);
    return ds;
}

namespace {

json
metaToJson(const DatasetMeta& m)
{
    json excluded = json::object();
    for (int i = 1; i < kNumExclusions; ++i) {
        excluded[std::string(kExclusionNames[i])] = m.excluded[i];
    }
    return json{{"schema_version", m.schemaVersion},
                {"config_hash", m.configHash},
                {"master_seed", m.masterSeed},
                {"horizon_s", m.horizonS},
                {"window_len", m.windowLen},
                {"norm_mean", m.mean},
                {"norm_std", m.stddev},
                {"raw_count", m.rawCount},
                {"kept_count", m.keptCount},
                {"excluded", excluded},
                {"split", {{"train", m.split.train}, {"val", m.split.val}, {"test", m.split.test}}},
                {"row_count", m.rowCount},
                {"content_hash", m.contentHash},
                {"label_note", "MAPE-safe: every kept label is > 0 and <= horizon_s"}};
}

DatasetMeta
metaFromJson(const json& j)
{
    DatasetMeta m;
    try {
        m.schemaVersion = j.at("schema_version").get<int>();
        if (m.schemaVersion != kSchemaVersion) {
            throwData("dataset meta: schema_version " + std::to_string(m.schemaVersion) +
                      " unsupported");
        }
        m.configHash = j.at("config_hash").get<std::string>();
        m.masterSeed = j.at("master_seed").get<std::uint64_t>();
        m.horizonS = j.at("horizon_s").get<double>();
        m.windowLen = j.at("window_len").get<int>();
        m.mean = j.at("norm_mean").get<std::array<double, kNumFeatures>>();
        m.stddev = j.at("norm_std").get<std::array<double, kNumFeatures>>();
        m.rawCount = j.at("raw_count").get<std::size_t>();
        m.keptCount = j.at("kept_count").get<std::size_t>();
        for (int i = 1; i < kNumExclusions; ++i) {
            m.excluded[i] = j.at("excluded").at(std::string(kExclusionNames[i])).get<std::size_t>();
        }
        m.split.train = j.at("split").at("train").get<std::vector<int>>();
        m.split.val = j.at("split").at("val").get<std::vector<int>>();
        m.split.test = j.at("split").at("test").get<std::vector<int>>();
        m.rowCount = j.at("row_count").get<std::size_t>();
        m.contentHash = j.at("content_hash").get<std::string>();
    } catch (const json::exception& e) {
        throwData(std::string("dataset meta: ") + e.what());
    }
    return m;
}

} // namespace

void
writeDataset(const Dataset& ds, const std::filesystem::path& csvPath,
             const std::filesystem::path& metaPath)
{
    DatasetMeta meta = ds.meta;
    meta.rowCount = ds.rows.size();
    std::uint64_t h = fnv1a64("");
    {
        auto out = openForWrite(csvPath);
        out << ArtifactTag{kSchemaVersion, meta.configHash, meta.masterSeed}.line() << "\n";
        out << datasetHeader() << "\n";
        for (const auto& r : ds.rows) {
            const std::string line = formatRow(r);
            h = fnv1a64(line, h);
            h = fnv1a64("\n", h);
            out << line << "\n";
        }
        if (!out) {
            throwData("write failed for '" + csvPath.string() + "'");
        }
    }
    meta.contentHash = hex64(h);
    auto out = openForWrite(metaPath);
    out << metaToJson(meta).dump(2) << "\n";
}

Dataset
readDataset(const std::filesystem::path& csvPath, const std::filesystem::path& metaPath,
            const std::optional<std::string>& expectedConfigHash)
{
    Dataset ds;
    {
        std::ifstream in(metaPath);
        if (!in) {
            throwData("cannot open dataset meta '" + metaPath.string() + "'");
        }
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throwData("dataset meta parse error: " + std::string(e.what()));
        }
        ds.meta = metaFromJson(j);
    }
    if (expectedConfigHash && *expectedConfigHash != ds.meta.configHash) {
        throwData("dataset config hash " + ds.meta.configHash + " does not match expected " +
                  *expectedConfigHash);
    }

    CsvReader reader(csvPath);
    if (!reader.tag() || reader.tag()->schemaVersion != ds.meta.schemaVersion ||
        reader.tag()->configHash != ds.meta.configHash) {
        throwData("dataset CSV provenance does not match its meta sidecar");
    }
    if (reader.header().size() != static_cast<std::size_t>(5 + kNumFeatures)) {
        throwData("dataset CSV: unexpected column count");
    }
    std::uint64_t h = fnv1a64("");
    std::vector<std::string_view> f;
    while (reader.next(f)) {
        h = fnv1a64(reader.currentLine(), h);
        h = fnv1a64("\n", h);
        DatasetRow r;
        r.ueId = static_cast<int>(parseInt(f[0], "ue_id"));
        r.tMs = parseInt(f[1], "t_ms");
        r.segment = static_cast<int>(parseInt(f[2], "segment"));
        if (!f[3].empty()) {
            r.labelTefS = parseDouble(f[3], "label_tef_s");
        }
        r.reason = exclusionFromString(f[4]);
        for (int k = 0; k < kNumFeatures; ++k) {
            r.raw[k] = parseDouble(f[5 + k], "feature");
        }
        ds.rows.push_back(r);
    }
    if (ds.rows.size() != ds.meta.rowCount) {
        std::ostringstream os;
        os << "dataset CSV truncated: " << ds.rows.size() << " rows, meta declares "
           << ds.meta.rowCount;
        throwData(os.str());
    }
    if (hex64(h) != ds.meta.contentHash) {
        throwData("dataset CSV content hash mismatch");
    }
    return ds;
}

WindowSource::WindowSource(const Dataset& ds) : windowLen_(ds.meta.windowLen)
{
    features_.resize(ds.rows.size() * kNumFeatures);
    segStart_.resize(ds.rows.size());
    std::size_t start = 0;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& r = ds.rows[i];
        if (i > 0 && (r.ueId != ds.rows[i - 1].ueId || r.segment != ds.rows[i - 1].segment)) {
            start = i;
        }
        segStart_[i] = start;
        for (int f = 0; f < kNumFeatures; ++f) {
            features_[i * kNumFeatures + f] = (r.raw[f] - ds.meta.mean[f]) / ds.meta.stddev[f];
        }
    }
}

SampleSet
selectSamples(const Dataset& ds, SplitName which)
{
    const auto& ids = splitList(ds.meta.split, which);
    const std::set<int> members(ids.begin(), ids.end());
    SampleSet s;
    for (std::size_t i = 0; i < ds.rows.size(); ++i) {
        const auto& r = ds.rows[i];
        if (r.labelTefS && members.contains(r.ueId)) {
            s.rows.push_back(i);
            s.labels.push_back(*r.labelTefS);
            s.ueIds.push_back(r.ueId);
            s.times.push_back(r.tMs);
        }
    }
    return s;
}

} // namespace eshop
