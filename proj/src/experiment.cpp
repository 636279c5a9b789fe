#include "experiment.hpp"

#include "common.hpp"
#include "csv.hpp"
#include "model_file.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

namespace eshop {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/** Reads one config block, tracking which keys were consumed. */
class Block
{
  public:
    Block(const json& parent, std::string name) : name_(std::move(name))
    {
        if (!parent.contains(name_)) {
            return;
        }
        j_ = &parent.at(name_);
        if (!j_->is_object()) {
            throwConfig("config block '" + name_ + "' must be an object");
        }
    }

    template <typename T>
    void get(const char* key, T& dst)
    {
        seen_.insert(key);
        if (!j_ || !j_->contains(key)) {
            return;
        }
        try {
            dst = j_->at(key).get<T>();
        } catch (const json::exception& e) {
            throwConfig(name_ + "." + key + ": " + e.what());
        }
    }

    template <typename T>
    void getOptional(const char* key, std::optional<T>& dst)
    {
        seen_.insert(key);
        if (!j_ || !j_->contains(key) || j_->at(key).is_null()) {
            return;
        }
        T v{};
        get(key, v);
        dst = v;
    }

    Block sub(const char* key)
    {
        seen_.insert(key);
        static const json empty = json::object();
        return Block(j_ ? *j_ : empty, key, name_);
    }

    void finish() const
    {
        if (!j_) {
            return;
        }
        for (const auto& [k, v] : j_->items()) {
            if (!seen_.contains(k)) {
                throwConfig("unknown config key '" + name_ + "." + k + "'");
            }
        }
    }

  private:
    Block(const json& parent, const char* key, const std::string& prefix)
        : Block(parent, std::string(key))
    {
        name_ = prefix + "." + key;
    }

    const json* j_ = nullptr;
    std::string name_;
    std::set<std::string> seen_;
};

json
toJson(const ExperimentConfig& c, bool withOutput)
{
    const auto& g = c.channel.grid;
    json j{
        {"master_seed", c.masterSeed},
        {"scenario",
         {{"radius_min_m", c.scenario.radiusMinM},
          {"radius_max_m", c.scenario.radiusMaxM},
          {"speeds_mps", c.scenario.speedsMps},
          {"duration_s", c.scenario.durationS},
          {"num_ues", c.scenario.numUes},
          {"seed", c.scenario.seed},
          {"bs_height_m", c.layout.bsHeight},
          {"ue_height_m", c.layout.ueHeight},
          {"sector_boresights_deg", c.layout.sectorBoresightsDeg}}},
        {"channel",
         {{"fc_ghz", c.channel.fcGhz},
          {"bandwidth_mhz", c.channel.bandwidthMhz},
          {"tx_power_dbm", c.channel.txPowerPerSsbDbm},
          {"los_mode", c.channel.losMode == LosMode::LoS ? "los" : "nlos"},
          {"shadow_sigma_los_db", c.channel.shadowSigmaLosDb},
          {"shadow_sigma_nlos_db", c.channel.shadowSigmaNlosDb},
          {"decorrelation_m", c.channel.decorrelationDistanceM},
          {"fast_fading", c.channel.fastFading},
          {"fast_fading_sigma_db", c.channel.fastFadingSigmaDb},
          {"shadowing", c.channel.shadowing},
          {"shadow_co_sited", c.channel.shadowCoSited},
          {"l3_coefficient", c.channel.l3Coefficient},
          {"beam_grid",
           {{"az_offsets_deg", g.azOffsetsDeg},
            {"el_tilts_deg", g.elTiltsDeg},
            {"az_beamwidth_deg", g.azBeamwidthDeg},
            {"el_beamwidth_deg", g.elBeamwidthDeg},
            {"peak_gain_dbi", g.peakGainDbi},
            {"front_to_back_db", g.frontToBackDb}}}}},
        {"hcp",
         {{"event", c.hcp.eventType == EventType::A3 ? "A3" : "A5"},
          {"ttt_ms", c.hcp.tttMs},
          {"hysteresis_db", c.hcp.hysteresisDb},
          {"offset_db", c.hcp.offsetDb},
          {"a5_threshold1_dbm", c.hcp.a5Threshold1Dbm ? json(*c.hcp.a5Threshold1Dbm) : json()},
          {"a5_threshold2_dbm", c.hcp.a5Threshold2Dbm ? json(*c.hcp.a5Threshold2Dbm) : json()}}},
        {"dataset",
         {{"horizon_s", c.dataset.horizonS},
          {"window_len", c.dataset.windowLen},
          {"split",
           {{"train", c.dataset.ratios.train},
            {"val", c.dataset.ratios.val},
            {"test", c.dataset.ratios.test}}}}},
        {"model",
         {{"kernel_size", c.model.kernelSize},
          {"dilations", c.model.dilations},
          {"hidden_channels", c.model.hiddenChannels},
          {"dense_sizes", c.model.denseSizes}}},
        {"train",
         {{"learning_rate", c.train.learningRate},
          {"batch_size", c.train.batchSize},
          {"epochs", c.train.epochs},
          {"patience", c.train.patience},
          {"lr_decay", c.train.lrDecay}}},
        {"signaling",
         {{"d_prep_min_ms", c.signaling.dPrepMinMs},
          {"d_prep_max_ms", c.signaling.dPrepMaxMs},
          {"guard_ms", c.signaling.guardMs},
          {"trigger_threshold_ms", c.signaling.triggerThresholdMs},
          {"consecutive_required", c.signaling.consecutiveRequired},
          {"evaluate_split", c.eshopSplit},
          {"trigger_calibration", c.triggerCalibration}}},
    };
    if (withOutput) {
        j["output_dir"] = c.outputDir.string();
    }
    return j;
}

json
readJson(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throwData("cannot open '" + p.string() + "'");
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throwData("'" + p.string() + "': " + e.what());
    }
}

void
writeJson(const fs::path& p, const json& j)
{
    auto out = openForWrite(p);
    out << j.dump(2) << "\n";
    if (!out) {
        throwData("write failed for '" + p.string() + "'");
    }
}

json
metricsToJson(const MetricsReport& m)
{
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(); };
    json j{{"n", m.n},       {"r2", num(m.r2)},     {"evs", num(m.evs)},
           {"mape_pct", num(m.mapePct)}, {"mae_s", num(m.mae)}, {"rmse_s", num(m.rmseS)}};
    if (m.undefinedReason) {
        j["undefined_reason"] = *m.undefinedReason;
    }
    return j;
}

std::string
seconds(double s)
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << s << " s";
    return os.str();
}

double
since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EventCounts
countEvents(const std::vector<HoEvent>& events)
{
    EventCounts c;
    for (const auto& e : events) {
        switch (e.kind) {
        case EventKind::T0: ++c.t0; break;
        case EventKind::A3: ++c.a3; break;
        case EventKind::Abort: ++c.aborts; break;
        case EventKind::Cmd: ++c.commands; break;
        }
    }
    return c;
}

std::vector<int>
evaluationUes(const ExperimentConfig& cfg, const std::vector<int>& all, const std::string& split)
{
    if (split == "all") {
        return all;
    }
    const auto s = splitUes(all, cfg.dataset.ratios, subSeed(cfg.masterSeed, 0, "split"));
    std::vector<int> ues = split == "train" ? s.train : split == "val" ? s.val : s.test;
    std::sort(ues.begin(), ues.end());
    return ues;
}

} // namespace

// ---------------------------------------------------------------- config

void
ExperimentConfig::validate() const
{
    scenario.validate();
    layout.validate();
    channel.validate();
    hcp.validate();
    dataset.validate();
    model.validate();
    train.validate();
    signaling.validate();
    if (signaling.tttMs != hcp.tttMs) {
        throwConfig("signaling TTT must equal hcp.ttt_ms");
    }
    if (model.inputChannels != kNumFeatures) {
        throwConfig("model input channels must equal the 39 report features");
    }
    static const std::set<std::string> splits{"train", "val", "test", "all"};
    if (!splits.contains(eshopSplit)) {
        throwConfig("signaling.evaluate_split must be one of train, val, test, all");
    }
    if (triggerCalibration != "none" && triggerCalibration != "val") {
        throwConfig("signaling.trigger_calibration must be none or val");
    }
}

std::string
ExperimentConfig::canonicalJson() const
{
    return toJson(*this, false).dump();
}

std::string
ExperimentConfig::hash() const
{
    return hex64(fnv1a64(canonicalJson()));
}

ExperimentConfig
parseConfig(std::string_view text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throwConfig(std::string("config parse error: ") + e.what());
    }
    if (!root.is_object()) {
        throwConfig("config must be a JSON object");
    }
    ExperimentConfig c;
    // schema_version and config_hash appear in the copy written to a run directory
    static const std::set<std::string> top{"master_seed", "output_dir",     "scenario",
                                           "channel",     "hcp",            "dataset",
                                           "model",       "train",          "signaling",
                                           "schema_version", "config_hash"};
    for (const auto& [k, v] : root.items()) {
        if (!top.contains(k)) {
            throwConfig("unknown config key '" + k + "'");
        }
    }
    try {
        if (root.contains("master_seed")) {
            c.masterSeed = root.at("master_seed").get<std::uint64_t>();
        }
        if (root.contains("output_dir")) {
            c.outputDir = root.at("output_dir").get<std::string>();
        }
        if (root.contains("schema_version") && root.at("schema_version").get<int>() != kSchemaVersion) {
            throwConfig("config schema_version " + root.at("schema_version").dump() +
                        " is not supported (expected " + std::to_string(kSchemaVersion) + ")");
        }
    } catch (const json::exception& e) {
        throwConfig(e.what());
    }
    c.scenario.seed = c.masterSeed;

    Block s(root, "scenario");
    s.get("radius_min_m", c.scenario.radiusMinM);
    s.get("radius_max_m", c.scenario.radiusMaxM);
    s.get("speeds_mps", c.scenario.speedsMps);
    s.get("duration_s", c.scenario.durationS);
    s.get("num_ues", c.scenario.numUes);
    s.get("seed", c.scenario.seed);
    s.get("bs_height_m", c.layout.bsHeight);
    s.get("ue_height_m", c.layout.ueHeight);
    s.get("sector_boresights_deg", c.layout.sectorBoresightsDeg);
    c.layout.bsPosition.z = c.layout.bsHeight;
    s.finish();

    Block ch(root, "channel");
    std::string los = "los";
    ch.get("fc_ghz", c.channel.fcGhz);
    ch.get("bandwidth_mhz", c.channel.bandwidthMhz);
    ch.get("tx_power_dbm", c.channel.txPowerPerSsbDbm);
    ch.get("los_mode", los);
    ch.get("shadow_sigma_los_db", c.channel.shadowSigmaLosDb);
    ch.get("shadow_sigma_nlos_db", c.channel.shadowSigmaNlosDb);
    ch.get("decorrelation_m", c.channel.decorrelationDistanceM);
    ch.get("fast_fading", c.channel.fastFading);
    ch.get("fast_fading_sigma_db", c.channel.fastFadingSigmaDb);
    ch.get("shadowing", c.channel.shadowing);
    ch.get("shadow_co_sited", c.channel.shadowCoSited);
    ch.get("l3_coefficient", c.channel.l3Coefficient);
    {
        Block g = ch.sub("beam_grid");
        g.get("az_offsets_deg", c.channel.grid.azOffsetsDeg);
        g.get("el_tilts_deg", c.channel.grid.elTiltsDeg);
        g.get("az_beamwidth_deg", c.channel.grid.azBeamwidthDeg);
        g.get("el_beamwidth_deg", c.channel.grid.elBeamwidthDeg);
        g.get("peak_gain_dbi", c.channel.grid.peakGainDbi);
        g.get("front_to_back_db", c.channel.grid.frontToBackDb);
        g.finish();
    }
    ch.finish();
    if (los == "los") {
        c.channel.losMode = LosMode::LoS;
    } else if (los == "nlos") {
        c.channel.losMode = LosMode::NLoS;
    } else {
        throwConfig("channel.los_mode must be 'los' or 'nlos'");
    }

    Block h(root, "hcp");
    std::string ev = "A3";
    h.get("event", ev);
    h.get("ttt_ms", c.hcp.tttMs);
    h.get("hysteresis_db", c.hcp.hysteresisDb);
    h.get("offset_db", c.hcp.offsetDb);
    h.getOptional("a5_threshold1_dbm", c.hcp.a5Threshold1Dbm);
    h.getOptional("a5_threshold2_dbm", c.hcp.a5Threshold2Dbm);
    h.finish();
    if (ev == "A3") {
        c.hcp.eventType = EventType::A3;
    } else if (ev == "A5") {
        c.hcp.eventType = EventType::A5;
    } else {
        throwConfig("hcp.event must be 'A3' or 'A5'");
    }

    Block d(root, "dataset");
    d.get("horizon_s", c.dataset.horizonS);
    d.get("window_len", c.dataset.windowLen);
    {
        Block r = d.sub("split");
        r.get("train", c.dataset.ratios.train);
        r.get("val", c.dataset.ratios.val);
        r.get("test", c.dataset.ratios.test);
        r.finish();
    }
    d.finish();

    Block m(root, "model");
    m.get("kernel_size", c.model.kernelSize);
    m.get("dilations", c.model.dilations);
    m.get("hidden_channels", c.model.hiddenChannels);
    m.get("dense_sizes", c.model.denseSizes);
    m.finish();

    Block t(root, "train");
    t.get("learning_rate", c.train.learningRate);
    t.get("batch_size", c.train.batchSize);
    t.get("epochs", c.train.epochs);
    t.get("patience", c.train.patience);
    t.get("lr_decay", c.train.lrDecay);
    t.finish();

    Block sg(root, "signaling");
    sg.get("d_prep_min_ms", c.signaling.dPrepMinMs);
    sg.get("d_prep_max_ms", c.signaling.dPrepMaxMs);
    sg.get("guard_ms", c.signaling.guardMs);
    sg.get("trigger_threshold_ms", c.signaling.triggerThresholdMs);
    sg.get("consecutive_required", c.signaling.consecutiveRequired);
    sg.get("evaluate_split", c.eshopSplit);
    sg.get("trigger_calibration", c.triggerCalibration);
    sg.finish();
    c.signaling.tttMs = c.hcp.tttMs;

    c.validate();
    return c;
}

ExperimentConfig
loadConfig(const fs::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throwConfig("cannot open config '" + p.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parseConfig(ss.str());
}

std::string
configToJsonText(const ExperimentConfig& cfg)
{
    return toJson(cfg, true).dump(2);
}

void
overrideSeed(ExperimentConfig& cfg, std::uint64_t seed)
{
    cfg.masterSeed = seed;
    cfg.scenario.seed = seed;
}

// ---------------------------------------------------------------- pipeline

Experiment::Experiment(ExperimentConfig cfg) : cfg_(std::move(cfg)) {}

fs::path
Experiment::path(std::string_view name) const
{
    return cfg_.outputDir / std::string(name);
}

void
Experiment::say(const std::string& msg) const
{
    if (log_) {
        log_(msg);
    }
}

void
Experiment::writeConfig() const
{
    json j = toJson(cfg_, false);
    j["schema_version"] = kSchemaVersion;
    j["config_hash"] = cfg_.hash();
    writeJson(path("config.json"), j);
}

void
Experiment::requireHash(const fs::path& p, const std::optional<std::string>& h) const
{
    const std::string want = cfg_.hash();
    if (!h) {
        throwData("'" + p.string() + "' carries no config hash");
    }
    if (*h != want) {
        throwData("'" + p.string() + "' was produced under config hash " + *h +
                  ", current config hash is " + want);
    }
}

SimulateResult
Experiment::simulate()
{
    cfg_.validate();
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(cfg_.outputDir, ec);
    if (ec) {
        throwData("cannot create output dir '" + cfg_.outputDir.string() + "': " + ec.message());
    }

    const int n = cfg_.scenario.numUes;
    std::vector<UeRun> runs(static_cast<std::size_t>(n));
    auto one = [&](int ue) {
        const auto traj = spawnTrajectory(subSeed(cfg_.scenario.seed, static_cast<std::uint64_t>(ue),
                                                  "trajectory"),
                                          cfg_.scenario, cfg_.layout, ue);
        runs[static_cast<std::size_t>(ue)] =
            simulateUe(traj, cfg_.layout, cfg_.channel, cfg_.hcp, cfg_.signaling, cfg_.masterSeed);
    };
    if (threads_ <= 1) {
        for (int ue = 0; ue < n; ++ue) {
            one(ue);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads_));
        std::vector<std::thread> pool;
        for (int w = 0; w < threads_; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int ue = next++; ue < n; ue = next++) {
                        one(ue);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    const double simS = since(start);

    const ArtifactTag tag{kSchemaVersion, cfg_.hash(), cfg_.masterSeed};
    writeConfig();

    SimulateResult res;
    res.ues = runs.size();
    {
        auto out = openForWrite(path("trajectories.csv"));
        out << tag.line() << "\nue_id,t_ms,x_m,y_m,distance_3d_m,pathloss_db\n";
        for (const auto& r : runs) {
            for (const auto& rep : r.reports) {
                const Vec3 p = positionAt(r.trajectory, rep.tMs);
                const Bearing b = bearingFromBs(cfg_.layout, p);
                out << r.trajectory.ueId << ',' << rep.tMs << ',' << formatDouble(p.x) << ','
                    << formatDouble(p.y) << ',' << formatDouble(b.distance3d) << ','
                    << formatDouble(pathLoss(b.distance3d, cfg_.channel.losMode, cfg_.channel.fcGhz,
                                             cfg_.layout.ueHeight))
                    << '\n';
            }
        }
        if (!out) {
            throwData("write failed for trajectories.csv");
        }
    }
    {
        auto out = openForWrite(path("reports.csv"));
        out << tag.line() << "\nt_ms,ue_id,cell_id,beam_id,l3_rsrp_dbm\n";
        for (const auto& r : runs) {
            for (const auto& rep : r.reports) {
                ++res.reports;
                for (int c = 0; c < kNumCells; ++c) {
                    for (const auto& b : rep.cells[c]) {
                        out << rep.tMs << ',' << r.trajectory.ueId << ',' << c << ',' << b.beamId
                            << ',' << formatDouble(b.l3RsrpDbm) << '\n';
                    }
                }
            }
        }
        if (!out) {
            throwData("write failed for reports.csv");
        }
    }
    {
        auto out = openForWrite(path("events.csv"));
        out << tag.line() << "\nue_id,kind,t_ms,serving,target\n";
        for (const auto& r : runs) {
            const auto c = countEvents(r.events);
            res.counts.t0 += c.t0;
            res.counts.a3 += c.a3;
            res.counts.aborts += c.aborts;
            res.counts.commands += c.commands;
            for (const auto& e : r.events) {
                out << r.trajectory.ueId << ',' << toString(e.kind) << ',' << e.tMs << ','
                    << e.serving << ',' << e.target << '\n';
            }
        }
        if (!out) {
            throwData("write failed for events.csv");
        }
    }
    writeJson(path("simulation_summary.json"),
              json{{"schema_version", kSchemaVersion},
                   {"config_hash", cfg_.hash()},
                   {"master_seed", cfg_.masterSeed},
                   {"ues", res.ues},
                   {"reports", res.reports},
                   {"t0", res.counts.t0},
                   {"a3", res.counts.a3},
                   {"aborts", res.counts.aborts},
                   {"commands", res.counts.commands}});

    std::ostringstream os;
    os << "simulate: " << res.ues << " UEs, " << res.reports << " reports, T0 " << res.counts.t0
       << ", A3 " << res.counts.a3 << ", ABORT " << res.counts.aborts << ", CMD "
       << res.counts.commands << " (" << seconds(simS) << " simulation, " << seconds(since(start))
       << " total)";
    say(os.str());
    return res;
}

std::vector<UeLog>
Experiment::readLogs() const
{
    std::map<int, UeLog> logs;
    {
        CsvReader r(path("reports.csv"));
        requireHash(r.path(), r.tag() ? std::optional(r.tag()->configHash) : std::nullopt);
        const std::size_t cT = r.column("t_ms"), cU = r.column("ue_id"), cC = r.column("cell_id"),
                          cB = r.column("beam_id"), cR = r.column("l3_rsrp_dbm");
        std::vector<std::string_view> f;
        UeLog* cur = nullptr;
        int filled = 0;
        auto closeReport = [&] {
            if (cur && filled != kNumCells * kBeamsPerCell) {
                throwData("reports.csv: report at t=" + std::to_string(cur->reports.back().tMs) +
                          " ms of UE " + std::to_string(cur->ueId) + " is incomplete");
            }
        };
        while (r.next(f)) {
            const auto t = parseInt(f[cT], "t_ms");
            const int ue = static_cast<int>(parseInt(f[cU], "ue_id"));
            const auto cell = parseInt(f[cC], "cell_id");
            const auto beam = parseInt(f[cB], "beam_id");
            if (cell < 0 || cell >= kNumCells || beam < 0 || beam >= kBeamsPerCell) {
                throwData("reports.csv line " + std::to_string(r.lineNumber()) +
                          ": cell or beam id out of range");
            }
            if (!cur || cur->ueId != ue || cur->reports.back().tMs != t) {
                closeReport();
                cur = &logs[ue];
                cur->ueId = ue;
                if (!cur->reports.empty() && cur->reports.back().tMs >= t) {
                    throwData("reports.csv line " + std::to_string(r.lineNumber()) +
                              ": reports out of order");
                }
                cur->reports.emplace_back();
                cur->reports.back().tMs = t;
                filled = 0;
            }
            auto& slot = cur->reports.back().cells[cell][beam];
            slot.beamId = static_cast<int>(beam);
            slot.l3RsrpDbm = parseDouble(f[cR], "l3_rsrp_dbm");
            ++filled;
        }
        closeReport();
    }
    {
        CsvReader r(path("events.csv"));
        requireHash(r.path(), r.tag() ? std::optional(r.tag()->configHash) : std::nullopt);
        const std::size_t cU = r.column("ue_id"), cK = r.column("kind"), cT = r.column("t_ms"),
                          cS = r.column("serving"), cG = r.column("target");
        std::vector<std::string_view> f;
        while (r.next(f)) {
            const int ue = static_cast<int>(parseInt(f[cU], "ue_id"));
            auto it = logs.find(ue);
            if (it == logs.end()) {
                throwData("events.csv: UE " + std::to_string(ue) + " has no reports");
            }
            it->second.events.push_back({eventKindFromString(f[cK]), parseInt(f[cT], "t_ms"),
                                         static_cast<int>(parseInt(f[cS], "serving")),
                                         static_cast<int>(parseInt(f[cG], "target"))});
        }
    }
    std::vector<UeLog> out;
    for (auto& [ue, log] : logs) {
        out.push_back(std::move(log));
    }
    if (out.empty()) {
        throwData("reports.csv holds no reports");
    }
    return out;
}

Dataset
Experiment::buildDataset()
{
    cfg_.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto logs = readLogs();
    Dataset ds = ::eshop::buildDataset(logs, cfg_.dataset, cfg_.masterSeed, cfg_.hash());
    writeDataset(ds, path("dataset.csv"), path("dataset_meta.json"));

    const auto& m = ds.meta;
    std::ostringstream os;
    os << "exclusion reconciliation\n";
    os << "  " << std::left << std::setw(16) << "reason" << std::right << std::setw(10) << "rows"
       << "\n";
    os << "  " << std::left << std::setw(16) << "kept" << std::right << std::setw(10)
       << m.keptCount << "\n";
    std::size_t sum = m.keptCount;
    for (int i = 1; i < kNumExclusions; ++i) {
        os << "  " << std::left << std::setw(16) << toString(static_cast<Exclusion>(i))
           << std::right << std::setw(10) << m.excluded[i] << "\n";
        sum += m.excluded[i];
    }
    os << "  " << std::left << std::setw(16) << "total" << std::right << std::setw(10) << sum
       << "  (raw reports " << m.rawCount << (sum == m.rawCount ? ", reconciled)" : ", MISMATCH)")
       << "\n";
    for (auto [name, which] : {std::pair{"train", SplitName::Train},
                               std::pair{"val", SplitName::Val},
                               std::pair{"test", SplitName::Test}}) {
        const auto s = selectSamples(ds, which);
        const auto& ues = which == SplitName::Train ? m.split.train
                          : which == SplitName::Val ? m.split.val
                                                    : m.split.test;
        os << "  split " << std::left << std::setw(6) << name << std::right << std::setw(5)
           << ues.size() << " UEs " << std::setw(8) << s.rows.size() << " samples\n";
    }
    os << "build-dataset: " << seconds(since(start));
    say(os.str());
    if (sum != m.rawCount) {
        throw Error(ErrorKind::Internal, "exclusion counts do not reconcile with raw reports");
    }
    return ds;
}

TrainOutcome
Experiment::train()
{
    cfg_.validate();
    const auto start = std::chrono::steady_clock::now();
    const Dataset ds = readDataset(path("dataset.csv"), path("dataset_meta.json"), cfg_.hash());
    const WindowSource source(ds);
    const WindowSamples trainSet(source, selectSamples(ds, SplitName::Train));
    const WindowSamples valSet(source, selectSamples(ds, SplitName::Val));

    tcn::TcnConfig mc = cfg_.model;
    mc.seed = subSeed(cfg_.masterSeed, 0, "init");
    tcn::TcnModel<float> model(mc);
    model.initialize(mc.seed);
    tcn::TrainConfig tc = cfg_.train;
    tc.seed = subSeed(cfg_.masterSeed, 0, "train");

    TrainOutcome out;
    out.trainSamples = trainSet.size();
    out.valSamples = valSet.size();
    out.paramCount = model.paramCount();
    {
        std::ostringstream os;
        os << "train: " << out.trainSamples << " train / " << out.valSamples << " val samples, "
           << out.paramCount << " parameters, receptive field " << mc.receptiveField();
        say(os.str());
    }
    auto last = std::chrono::steady_clock::now();
    out.result = tcn::train(model, trainSet, valSet.size() ? &valSet : nullptr, tc,
                            [&](const tcn::EpochStats& st) {
                                std::ostringstream os;
                                os << "  epoch " << std::setw(3) << st.epoch << std::fixed
                                   << std::setprecision(5) << "  train_rmse " << st.trainRmse
                                   << "  val_rmse " << st.valRmse << "  (" << seconds(since(last))
                                   << ")";
                                last = std::chrono::steady_clock::now();
                                say(os.str());
                            });

    ModelFile mf;
    mf.config = mc;
    mf.windowLen = ds.meta.windowLen;
    mf.normMean = ds.meta.mean;
    mf.normStd = ds.meta.stddev;
    mf.configHash = cfg_.hash();
    mf.masterSeed = cfg_.masterSeed;
    mf.params.assign(model.params().begin(), model.params().end());
    writeModel(path("model.bin"), mf);
    {
        auto h = openForWrite(path("history.csv"));
        h << ArtifactTag{kSchemaVersion, cfg_.hash(), cfg_.masterSeed}.line()
          << "\nepoch,train_rmse,val_rmse\n";
        for (const auto& st : out.result.history) {
            h << st.epoch << ',' << formatDouble(st.trainRmse) << ','
              << (std::isnan(st.valRmse) ? std::string() : formatDouble(st.valRmse)) << '\n';
        }
    }
    std::ostringstream os;
    os << "train: best epoch " << out.result.bestEpoch << " of " << out.result.history.size()
       << (out.result.earlyStopped ? " (early stop)" : "") << ", best val_rmse "
       << out.result.bestValRmse << ", " << seconds(since(start));
    say(os.str());
    return out;
}

EvalOutcome
Experiment::eval()
{
    cfg_.validate();
    const auto start = std::chrono::steady_clock::now();
    const ModelFile mf = readModel(path("model.bin"));
    if (mf.configHash != cfg_.hash()) {
        throwData("model.bin was trained under config hash " + mf.configHash +
                  ", current config hash is " + cfg_.hash());
    }
    const Dataset ds = readDataset(path("dataset.csv"), path("dataset_meta.json"), cfg_.hash());
    if (mf.windowLen != ds.meta.windowLen || mf.normMean != ds.meta.mean ||
        mf.normStd != ds.meta.stddev) {
        throwData("model and dataset disagree on window length or normalization");
    }
    const auto model = instantiate(mf);
    const WindowSource source(ds);

    EvalOutcome out;
    json splits = json::object();
    auto pred = openForWrite(path("predictions.csv"));
    pred << ArtifactTag{kSchemaVersion, cfg_.hash(), cfg_.masterSeed}.line()
         << "\nsplit,ue_id,t_ms,actual_tef_s,predicted_tef_s\n";
    for (auto [name, which] : {std::pair{"train", SplitName::Train},
                               std::pair{"val", SplitName::Val},
                               std::pair{"test", SplitName::Test}}) {
        const WindowSamples set(source, selectSamples(ds, which));
        if (set.size() == 0) {
            continue;
        }
        const auto yhat = tcn::predictAll(model, set);
        const auto& s = set.set();
        const auto m = computeMetrics(s.labels, yhat);
        out.splits[name] = m;
        splits[name] = metricsToJson(m);
        for (std::size_t i = 0; i < yhat.size(); ++i) {
            pred << name << ',' << s.ueIds[i] << ',' << s.times[i] << ','
                 << formatDouble(s.labels[i]) << ',' << formatDouble(yhat[i]) << '\n';
        }
        std::ostringstream os;
        os << "eval " << std::left << std::setw(5) << name << std::right << " n=" << m.n
           << std::fixed << std::setprecision(4) << "  R2 " << m.r2 << "  EVS " << m.evs
           << "  MAPE " << std::setprecision(2) << m.mapePct << "%  MAE " << std::setprecision(4)
           << m.mae << " s  RMSE " << m.rmseS << " s";
        say(os.str());
    }
    if (!pred) {
        throwData("write failed for predictions.csv");
    }
    writeJson(path("metrics.json"), json{{"schema_version", kSchemaVersion},
                                         {"config_hash", cfg_.hash()},
                                         {"master_seed", cfg_.masterSeed},
                                         {"los_mode", cfg_.channel.losMode == LosMode::LoS
                                                          ? "los"
                                                          : "nlos"},
                                         {"splits", splits}});
    say("eval: " + seconds(since(start)));
    return out;
}

namespace {

struct Replay
{
    int ueId = 0;
    std::vector<std::int64_t> times;
    std::vector<int> segments;
    std::vector<HoEventRecord> episodes;
    std::vector<double> preds;
    std::array<ServingTrace, kNumCells> traces;
};

/** Countdown for every report of one UE; the label countdown when model is null. */
Replay
replayUe(const UeLog& log, const CountdownModel* model)
{
    Replay r;
    r.ueId = log.ueId;
    const std::size_t n = log.reports.size();
    r.times.resize(n);
    std::vector<std::array<double, kNumFeatures>> rows(n);
    for (std::size_t i = 0; i < n; ++i) {
        r.times[i] = log.reports[i].tMs;
        const auto red = reduceReport(log.reports[i]);
        rows[i] = encodeFeatures(red);
        for (int c = 0; c < kNumCells; ++c) {
            r.traces[c].tMs.push_back(r.times[i]);
            r.traces[c].rsrpDbm.push_back(red.bestRsrpDbm[c]);
        }
    }
    r.episodes = episodesFromEvents(log.ueId, log.events);
    r.segments = segmentIds(r.times, r.episodes);
    r.preds = model ? inferCountdown(*model, rows, r.segments)
                    : oracleCountdown(r.times, r.segments, r.episodes);
    return r;
}

std::vector<HoComparison>
compareEpisodes(const Replay& r, const SignalingConfig& sig, int windowLen, std::size_t& skipped)
{
    std::vector<HoComparison> out;
    const auto& times = r.times;
    for (const auto& ep : r.episodes) {
        if (ep.aborted || !ep.a3Ms) {
            continue;
        }
        const std::int64_t a3 = *ep.a3Ms;
        if (!ep.commandMs || a3 + 40 > times.back()) {
            ++skipped;
            continue;
        }
        const auto at = std::lower_bound(times.begin(), times.end(), a3);
        const int seg = r.segments[static_cast<std::size_t>(at - times.begin())];
        // same rule as the dataset: no countdown is trained without run history
        const auto t0At = std::lower_bound(times.begin(), times.end(), ep.t0Ms) - times.begin();
        if (seg == 0 && t0At + 1 < windowLen) {
            ++skipped;
            continue;
        }
        std::vector<CountdownPoint> trace;
        for (std::size_t i = 0; i < times.size() && times[i] <= a3; ++i) {
            if (r.segments[i] == seg) {
                trace.push_back({times[i], r.preds[i]});
            }
        }
        const int dPrep = static_cast<int>(*ep.commandMs - a3);
        const HoTimeline legacy = simulateLegacy(ep, dPrep);
        const HoTimeline early = simulateEshop(ep, trace, dPrep, sig);

        HoComparison c;
        c.ueId = r.ueId;
        c.t0Ms = ep.t0Ms;
        c.a3Ms = a3;
        c.dPrepMs = dPrep;
        c.legacyCmdMs = legacy.commandMs;
        c.eshopCmdMs = early.commandMs;
        c.advanceMs = legacy.commandMs - early.commandMs;
        c.prepDoneMs = early.prepDoneMs;
        c.wasted = early.wasted;
        c.fellback = early.fellback;
        attachRsrp(c, r.traces[ep.servingCell]);
        out.push_back(c);
    }
    return out;
}

} // namespace

EshopOutcome
Experiment::eshop(bool oracle)
{
    cfg_.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto logs = readLogs();
    std::optional<CountdownModel> model;
    if (!oracle) {
        const ModelFile mf = readModel(path("model.bin"));
        if (mf.configHash != cfg_.hash()) {
            throwData("model.bin was trained under config hash " + mf.configHash +
                      ", current config hash is " + cfg_.hash());
        }
        model.emplace(mf);
    }

    std::vector<int> all;
    for (const auto& l : logs) {
        all.push_back(l.ueId);
    }
    auto replayAll = [&](const std::vector<int>& ues) {
        const std::set<int> chosen(ues.begin(), ues.end());
        std::vector<Replay> r;
        for (const auto& log : logs) {
            if (chosen.contains(log.ueId)) {
                r.push_back(replayUe(log, model ? &*model : nullptr));
            }
        }
        return r;
    };

    SignalingConfig sig = cfg_.signaling;
    std::optional<std::size_t> calibrationAdvanced;
    if (!oracle && cfg_.triggerCalibration == "val") {
        const auto val = replayAll(evaluationUes(cfg_, all, "val"));
        std::size_t best = 0;
        for (int th = sig.tttMs; th <= 10 * sig.tttMs; th += sig.tttMs) {
            SignalingConfig s = cfg_.signaling;
            s.triggerThresholdMs = th;
            std::size_t advanced = 0;
            for (const auto& r : val) {
                std::size_t ignored = 0;
                for (const auto& c : compareEpisodes(r, s, cfg_.dataset.windowLen, ignored)) {
                    advanced += c.advanceMs > 0;
                }
            }
            if (advanced > best) {
                best = advanced;
                sig.triggerThresholdMs = th;
            }
        }
        calibrationAdvanced = best;
    }

    const auto ues = evaluationUes(cfg_, all, cfg_.eshopSplit);
    EshopOutcome out;
    out.triggerThresholdMs = sig.triggerThresholdMs;
    for (const auto& r : replayAll(ues)) {
        for (auto& c : compareEpisodes(r, sig, cfg_.dataset.windowLen, out.skippedEpisodes)) {
            c.episodeId = static_cast<int>(out.comparisons.size());
            out.comparisons.push_back(c);
        }
    }
    out.stats = degradationStats(out.comparisons);
    out.aggregate = out.stats.aggregate;

    const std::string prefix = oracle ? "oracle_" : "";
    const ArtifactTag tag{kSchemaVersion, cfg_.hash(), cfg_.masterSeed};
    {
        auto f = openForWrite(path(prefix + "comparison.csv"));
        f << tag.line()
          << "\nepisode_id,ue_id,t0_ms,a3_ms,d_prep_ms,legacy_cmd_ms,eshop_cmd_ms,advance_ms,"
             "rsrp_legacy_cmd_dbm,rsrp_eshop_cmd_dbm,delta_rsrp_prep_db,delta_rsrp_40ms_db,"
             "wasted,fellback\n";
        for (const auto& c : out.comparisons) {
            f << c.episodeId << ',' << c.ueId << ',' << c.t0Ms << ',' << c.a3Ms << ','
              << c.dPrepMs << ',' << c.legacyCmdMs << ',' << c.eshopCmdMs << ',' << c.advanceMs
              << ',' << formatDouble(c.rsrpLegacyCmdDbm) << ','
              << formatDouble(c.rsrpEshopCmdDbm) << ',' << formatDouble(c.deltaRsrpPrepDb) << ','
              << formatDouble(c.deltaRsrp40Db) << ',' << int(c.wasted) << ',' << int(c.fellback)
              << '\n';
        }
    }
    for (auto [name, cdf] : {std::pair{"cdf.csv", &out.stats.cdfPrep},
                             std::pair{"cdf_40ms.csv", &out.stats.cdf40}}) {
        auto f = openForWrite(path(prefix + name));
        f << tag.line() << "\ndelta_rsrp_db,cumulative_prob\n";
        for (const auto& r : *cdf) {
            f << formatDouble(r.value) << ',' << formatDouble(r.cumulativeProb) << '\n';
        }
    }
    const auto& a = out.aggregate;
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(); };
    writeJson(path(prefix + "eshop_summary.json"),
              json{{"schema_version", kSchemaVersion},
                   {"config_hash", cfg_.hash()},
                   {"master_seed", cfg_.masterSeed},
                   {"countdown", oracle ? "oracle" : "model"},
                   {"evaluate_split", cfg_.eshopSplit},
                   {"trigger_threshold_ms", out.triggerThresholdMs},
                   {"ues", ues.size()},
                   {"episodes", a.episodes},
                   {"skipped_episodes", out.skippedEpisodes},
                   {"mean_advance_ms", num(a.meanAdvanceMs)},
                   {"mean_legacy_d_prep_ms", num(a.meanLegacyDPrepMs)},
                   {"wasted_rate", num(a.wastedRate)},
                   {"fallback_rate", num(a.fallbackRate)},
                   {"prepared_within_ttt_rate", num(a.preparedWithinTttRate)},
                   {"median_rsrp_benefit_db", num(a.medianRsrpBenefitDb)},
                   {"mean_rsrp_benefit_db", num(a.meanRsrpBenefitDb)}});

    std::ostringstream os;
    os << "eshop (" << (oracle ? "oracle" : "model") << " countdown, " << ues.size() << " UEs): "
       << a.episodes << " episodes, " << out.skippedEpisodes << " skipped" << std::fixed
       << std::setprecision(3);
    if (calibrationAdvanced) {
        os << "\n  trigger threshold " << out.triggerThresholdMs << " ms, calibrated on validation UEs ("
           << *calibrationAdvanced << " episodes advanced)";
    }
    os << "\n  mean advance " << a.meanAdvanceMs
       << " ms (legacy d_prep " << a.meanLegacyDPrepMs << " ms)\n  prepared within TTT "
       << a.preparedWithinTttRate << ", wasted " << a.wastedRate << ", fallback "
       << a.fallbackRate << "\n  RSRP benefit median " << a.medianRsrpBenefitDb << " dB, mean "
       << a.meanRsrpBenefitDb << " dB\neshop: " << seconds(since(start));
    say(os.str());
    return out;
}

// ---------------------------------------------------------------- report

namespace {

struct RunRecord
{
    std::string dir;
    std::string losMode;
    std::map<std::string, double> values;
};

void
putIfNumber(std::map<std::string, double>& dst, const std::string& key, const json& j,
            const char* field)
{
    if (j.contains(field) && j.at(field).is_number()) {
        dst[key] = j.at(field).get<double>();
    }
}

void
checkSchema(const json& j, const fs::path& p)
{
    if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) {
        throwData("'" + p.string() + "' has schema_version " +
                  (j.contains("schema_version") ? j.at("schema_version").dump() : "none") +
                  ", expected " + std::to_string(kSchemaVersion));
    }
}

} // namespace

void
writeReport(const std::vector<fs::path>& runDirs, const fs::path& outDir, const LogSink& log)
{
    if (runDirs.empty()) {
        throwConfig("report needs at least one run directory");
    }
    static const std::vector<std::string> order{
        "test_r2",        "test_evs",          "test_mape_pct",   "test_mae_s",
        "test_rmse_s",    "val_r2",            "val_mape_pct",    "t0_events",
        "a3_events",      "abort_events",      "cmd_events",      "eshop_episodes",
        "eshop_mean_advance_ms", "eshop_mean_legacy_d_prep_ms", "eshop_wasted_rate",
        "eshop_fallback_rate",   "eshop_prepared_within_ttt_rate",
        "eshop_median_rsrp_benefit_db", "eshop_mean_rsrp_benefit_db"};

    std::vector<RunRecord> runs;
    std::vector<std::string> provenance;
    for (const auto& dir : runDirs) {
        if (!fs::is_directory(dir)) {
            throwData("run directory '" + dir.string() + "' does not exist");
        }
        RunRecord r;
        r.dir = dir.string();
        const json cfg = readJson(dir / "config.json");
        checkSchema(cfg, dir / "config.json");
        r.losMode = cfg.at("channel").at("los_mode").get<std::string>();
        provenance.push_back("# run " + r.dir + " config_hash=" +
                             cfg.at("config_hash").get<std::string>() +
                             " master_seed=" + cfg.at("master_seed").dump());

        const json sim = readJson(dir / "simulation_summary.json");
        checkSchema(sim, dir / "simulation_summary.json");
        putIfNumber(r.values, "t0_events", sim, "t0");
        putIfNumber(r.values, "a3_events", sim, "a3");
        putIfNumber(r.values, "abort_events", sim, "aborts");
        putIfNumber(r.values, "cmd_events", sim, "commands");

        if (fs::exists(dir / "metrics.json")) {
            const json m = readJson(dir / "metrics.json");
            checkSchema(m, dir / "metrics.json");
            for (const char* split : {"test", "val"}) {
                if (!m.at("splits").contains(split)) {
                    continue;
                }
                const json& s = m.at("splits").at(split);
                const std::string p = std::string(split) + "_";
                putIfNumber(r.values, p + "r2", s, "r2");
                putIfNumber(r.values, p + "evs", s, "evs");
                putIfNumber(r.values, p + "mape_pct", s, "mape_pct");
                putIfNumber(r.values, p + "mae_s", s, "mae_s");
                putIfNumber(r.values, p + "rmse_s", s, "rmse_s");
            }
        }
        if (fs::exists(dir / "eshop_summary.json")) {
            const json e = readJson(dir / "eshop_summary.json");
            checkSchema(e, dir / "eshop_summary.json");
            for (const char* k :
                 {"episodes", "mean_advance_ms", "mean_legacy_d_prep_ms", "wasted_rate",
                  "fallback_rate", "prepared_within_ttt_rate", "median_rsrp_benefit_db",
                  "mean_rsrp_benefit_db"}) {
                putIfNumber(r.values, std::string("eshop_") + k, e, k);
            }
        }
        runs.push_back(std::move(r));
    }

    std::error_code ec;
    fs::create_directories(outDir, ec);
    if (ec) {
        throwData("cannot create output dir '" + outDir.string() + "': " + ec.message());
    }
    auto out = openForWrite(outDir / "report.csv");
    out << "# eshop schema_version=" << kSchemaVersion << " runs=" << runs.size() << "\n";
    for (const auto& p : provenance) {
        out << p << "\n";
    }
    out << "metric,los_mean,los_std,los_runs,nlos_mean,nlos_std,nlos_runs\n";
    for (const auto& metric : order) {
        out << metric;
        for (const char* mode : {"los", "nlos"}) {
            std::vector<double> v;
            for (const auto& r : runs) {
                const auto it = r.values.find(metric);
                if (r.losMode == mode && it != r.values.end()) {
                    v.push_back(it->second);
                }
            }
            if (v.empty()) {
                out << ",,,0";
                continue;
            }
            double mean = 0.0;
            for (double x : v) {
                mean += x;
            }
            mean /= static_cast<double>(v.size());
            double var = 0.0;
            for (double x : v) {
                var += (x - mean) * (x - mean);
            }
            const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
            out << ',' << formatDouble(mean) << ',' << formatDouble(sd) << ',' << v.size();
        }
        out << '\n';
    }
    if (!out) {
        throwData("write failed for report.csv");
    }
    if (log) {
        log("report: merged " + std::to_string(runs.size()) + " runs into " +
            (outDir / "report.csv").string());
    }
}

} // namespace eshop
