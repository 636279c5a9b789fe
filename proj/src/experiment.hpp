#pragma once

#include "channel.hpp"
#include "controller.hpp"
#include "dataset.hpp"
#include "events.hpp"
#include "metrics.hpp"
#include "scenario.hpp"
#include "simulation.hpp"
#include "tcn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eshop {

struct ExperimentConfig
{
    std::uint64_t masterSeed = 1;
    std::filesystem::path outputDir = "out";
    ScenarioConfig scenario;
    SiteLayout layout;
    ChannelParams channel;
    HcpConfig hcp;
    DatasetConfig dataset;
    tcn::TcnConfig model;
    tcn::TrainConfig train;
    SignalingConfig signaling;
    std::string eshopSplit = "test"; // test | val | train | all
    // val: the model-fed trigger threshold is picked on validation UEs
    std::string triggerCalibration = "none";

    void validate() const;
    /** Canonical JSON text of every block except output_dir. */
    std::string canonicalJson() const;
    std::string hash() const;
};

/** Missing keys keep their defaults; unknown keys are a config error. */
ExperimentConfig parseConfig(std::string_view jsonText);
ExperimentConfig loadConfig(const std::filesystem::path& p);
std::string configToJsonText(const ExperimentConfig& cfg);

/** Applies a master seed override; the scenario seed follows it. */
void overrideSeed(ExperimentConfig& cfg, std::uint64_t seed);

struct EventCounts
{
    std::size_t t0 = 0;
    std::size_t a3 = 0;
    std::size_t aborts = 0;
    std::size_t commands = 0;
};

struct SimulateResult
{
    std::size_t ues = 0;
    std::size_t reports = 0;
    EventCounts counts;
};

struct TrainOutcome
{
    tcn::TrainResult result;
    std::size_t trainSamples = 0;
    std::size_t valSamples = 0;
    std::size_t paramCount = 0;
};

struct EvalOutcome
{
    std::map<std::string, MetricsReport> splits; // train / val / test
};

struct EshopOutcome
{
    EshopAggregate aggregate;
    std::size_t skippedEpisodes = 0;
    int triggerThresholdMs = 0; // the one actually used
    DegradationStats stats;
    std::vector<HoComparison> comparisons;
};

using LogSink = std::function<void(const std::string&)>;

/**
 * Pipeline stages over one run directory. Each stage reads the artifacts of the
 * previous one and checks that they carry this configuration's hash.
 */
class Experiment
{
  public:
    explicit Experiment(ExperimentConfig cfg);

    const ExperimentConfig& config() const { return cfg_; }
    ExperimentConfig& mutableConfig() { return cfg_; }
    void setParallel(int threads) { threads_ = threads < 1 ? 1 : threads; }
    void setLog(LogSink sink) { log_ = std::move(sink); }

    SimulateResult simulate();
    Dataset buildDataset();
    TrainOutcome train();
    EvalOutcome eval();
    /** oracle = true feeds the label countdown instead of the model. */
    EshopOutcome eshop(bool oracle);

    std::vector<UeLog> readLogs() const;
    std::filesystem::path path(std::string_view name) const;

  private:
    void say(const std::string& msg) const;
    void writeConfig() const;
    void requireHash(const std::filesystem::path& p, const std::optional<std::string>& h) const;

    ExperimentConfig cfg_;
    int threads_ = 1;
    LogSink log_;
};

/** Merges run directories into one table with mean and std per metric, LoS and NLoS side by side. */
void writeReport(const std::vector<std::filesystem::path>& runDirs,
                 const std::filesystem::path& outDir, const LogSink& log = {});

} // namespace eshop
