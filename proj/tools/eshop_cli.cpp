// Command-line front end. Links only the C interface of libeshop.

#include <eshop/eshop.h>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct Common
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    int parallel = 1;
    std::string los;
};

void
printLine(const char* line, void*)
{
    std::printf("%s\n", line);
    std::fflush(stdout);
}

int
fail(eshop_status st)
{
    std::fprintf(stderr, "error: %s\n", eshop_last_error());
    return static_cast<int>(st);
}

void
addCommon(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "Experiment config JSON (default: <out>/config.json)");
    sub->add_option("--seed", c.seed, "Master seed override");
    sub->add_option("--out", c.out, "Run directory")->capture_default_str();
    sub->add_option("--parallel", c.parallel, "Worker threads for UE simulation")
        ->check(CLI::PositiveNumber);
    sub->add_option("--los", c.los, "Propagation mode override")
        ->check(CLI::IsMember({"los", "nlos"}));
}

int
runStage(const Common& c, eshop_status (*stage)(eshop_experiment*))
{
    eshop_experiment* exp = nullptr;
    eshop_status st =
        eshop_experiment_create(c.config.empty() ? nullptr : c.config.c_str(), c.out.c_str(), &exp);
    if (st != ESHOP_OK) {
        return fail(st);
    }
    if (c.seed) {
        st = eshop_experiment_set_seed(exp, *c.seed);
    }
    if (st == ESHOP_OK && !c.los.empty()) {
        st = eshop_experiment_set_los(exp, c.los == "los");
    }
    if (st == ESHOP_OK) {
        st = eshop_experiment_set_parallel(exp, c.parallel);
    }
    if (st == ESHOP_OK) {
        st = eshop_experiment_set_log(exp, printLine, nullptr);
    }
    if (st == ESHOP_OK) {
        char hash[17];
        if (eshop_experiment_config_hash(exp, hash, sizeof hash) == ESHOP_OK) {
            std::printf("config hash %s\n", hash);
        }
        st = stage(exp);
    }
    const int code = st == ESHOP_OK ? 0 : fail(st);
    eshop_experiment_destroy(exp);
    return code;
}

} // namespace

int
main(int argc, char** argv)
{
    CLI::App app{"Early-scheduled handover preparation: simulation, countdown model, evaluation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(eshop_version()));

    Common c;
    bool oracle = false;
    std::vector<std::string> runs;

    auto* simulate = app.add_subcommand("simulate", "Simulate UE runs, write report and event logs");
    auto* dataset = app.add_subcommand("build-dataset", "Label reports and write the dataset");
    auto* train = app.add_subcommand("train", "Train the countdown network");
    auto* eval = app.add_subcommand("eval", "Score the trained model on every split");
    auto* eshop = app.add_subcommand("eshop", "Compare early and legacy HO preparation");
    auto* report = app.add_subcommand("report", "Merge run directories into one summary table");
    for (auto* s : {simulate, dataset, train, eval, eshop}) {
        addCommon(s, c);
    }
    eshop->add_flag("--oracle", oracle, "Drive the trigger with the label countdown");
    report->add_option("runs", runs, "Run directories")->required();
    report->add_option("--out", c.out, "Directory for report.csv")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ESHOP_ERR_CONFIG);
    }

    if (*simulate) {
        return runStage(c, eshop_simulate);
    }
    if (*dataset) {
        return runStage(c, eshop_build_dataset);
    }
    if (*train) {
        return runStage(c, eshop_train);
    }
    if (*eval) {
        return runStage(c, eshop_eval);
    }
    if (*eshop) {
        return runStage(c, oracle ? +[](eshop_experiment* e) { return eshop_run_eshop(e, 1); }
                                  : +[](eshop_experiment* e) { return eshop_run_eshop(e, 0); });
    }
    std::vector<const char*> dirs;
    for (const auto& r : runs) {
        dirs.push_back(r.c_str());
    }
    const eshop_status st = eshop_report(dirs.data(), dirs.size(), c.out.c_str(), printLine, nullptr);
    return st == ESHOP_OK ? 0 : fail(st);
}
