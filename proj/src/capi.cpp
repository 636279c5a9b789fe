#include "eshop/eshop.h"

#include "common.hpp"
#include "controller.hpp"
#include "experiment.hpp"
#include "model_file.hpp"

#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

struct eshop_experiment
{
    eshop::Experiment exp;
};

struct eshop_model
{
    eshop::ModelFile file;
    eshop::CountdownModel model;
};

namespace {

thread_local std::string lastError;

template <typename F>
eshop_status
guarded(F&& f)
{
    try {
        f();
        lastError.clear();
        return ESHOP_OK;
    } catch (const eshop::Error& e) {
        lastError = e.what();
        return static_cast<eshop_status>(static_cast<int>(e.kind()));
    } catch (const std::bad_alloc&) {
        lastError = "out of memory";
        return ESHOP_ERR_INTERNAL;
    } catch (const std::exception& e) {
        lastError = e.what();
        return ESHOP_ERR_INTERNAL;
    } catch (...) {
        lastError = "unknown failure";
        return ESHOP_ERR_INTERNAL;
    }
}

void
require(const void* p, const char* what)
{
    if (!p) {
        eshop::throwConfig(std::string(what) + " must not be NULL");
    }
}

} // namespace

extern "C" {

const char*
eshop_version(void)
{
    return "0.1.0";
}

const char*
eshop_last_error(void)
{
    return lastError.c_str();
}

eshop_status
eshop_experiment_create(const char* config_path, const char* out_dir, eshop_experiment** out)
{
    return guarded([&] {
        require(out, "out");
        *out = nullptr;
        eshop::ExperimentConfig cfg;
        if (config_path) {
            cfg = eshop::loadConfig(config_path);
        } else if (out_dir && std::filesystem::exists(std::filesystem::path(out_dir) / "config.json")) {
            cfg = eshop::loadConfig(std::filesystem::path(out_dir) / "config.json");
        }
        if (out_dir) {
            cfg.outputDir = out_dir;
        }
        *out = new eshop_experiment{eshop::Experiment(std::move(cfg))};
    });
}

void
eshop_experiment_destroy(eshop_experiment* exp)
{
    delete exp;
}

eshop_status
eshop_experiment_set_seed(eshop_experiment* exp, uint64_t seed)
{
    return guarded([&] {
        require(exp, "experiment");
        eshop::overrideSeed(exp->exp.mutableConfig(), seed);
    });
}

eshop_status
eshop_experiment_set_los(eshop_experiment* exp, int los)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.mutableConfig().channel.losMode = los ? eshop::LosMode::LoS : eshop::LosMode::NLoS;
    });
}

eshop_status
eshop_experiment_set_parallel(eshop_experiment* exp, int threads)
{
    return guarded([&] {
        require(exp, "experiment");
        if (threads < 1) {
            eshop::throwConfig("parallel thread count must be >= 1");
        }
        exp->exp.setParallel(threads);
    });
}

eshop_status
eshop_experiment_set_log(eshop_experiment* exp, eshop_log_fn fn, void* user)
{
    return guarded([&] {
        require(exp, "experiment");
        if (fn) {
            exp->exp.setLog([fn, user](const std::string& s) { fn(s.c_str(), user); });
        } else {
            exp->exp.setLog({});
        }
    });
}

eshop_status
eshop_experiment_config_hash(const eshop_experiment* exp, char* buf, size_t len)
{
    return guarded([&] {
        require(exp, "experiment");
        require(buf, "buf");
        const std::string h = exp->exp.config().hash();
        if (len < h.size() + 1) {
            eshop::throwConfig("hash buffer too small");
        }
        std::memcpy(buf, h.c_str(), h.size() + 1);
    });
}

eshop_status
eshop_experiment_config_json(const eshop_experiment* exp, char** out)
{
    return guarded([&] {
        require(exp, "experiment");
        require(out, "out");
        const std::string s = eshop::configToJsonText(exp->exp.config());
        char* p = new char[s.size() + 1];
        std::memcpy(p, s.c_str(), s.size() + 1);
        *out = p;
    });
}

void
eshop_string_free(char* s)
{
    delete[] s;
}

eshop_status
eshop_simulate(eshop_experiment* exp)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.simulate();
    });
}

eshop_status
eshop_build_dataset(eshop_experiment* exp)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.buildDataset();
    });
}

eshop_status
eshop_train(eshop_experiment* exp)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.train();
    });
}

eshop_status
eshop_eval(eshop_experiment* exp)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.eval();
    });
}

eshop_status
eshop_run_eshop(eshop_experiment* exp, int oracle)
{
    return guarded([&] {
        require(exp, "experiment");
        exp->exp.eshop(oracle != 0);
    });
}

eshop_status
eshop_report(const char* const* run_dirs, size_t n_runs, const char* out_dir, eshop_log_fn fn,
             void* user)
{
    return guarded([&] {
        require(out_dir, "out_dir");
        if (n_runs > 0) {
            require(run_dirs, "run_dirs");
        }
        std::vector<std::filesystem::path> dirs;
        for (size_t i = 0; i < n_runs; ++i) {
            require(run_dirs[i], "run directory");
            dirs.emplace_back(run_dirs[i]);
        }
        eshop::LogSink sink;
        if (fn) {
            sink = [fn, user](const std::string& s) { fn(s.c_str(), user); };
        }
        eshop::writeReport(dirs, out_dir, sink);
    });
}

eshop_status
eshop_model_load(const char* path, eshop_model** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        auto file = eshop::readModel(path);
        eshop::CountdownModel model(file);
        *out = new eshop_model{std::move(file), std::move(model)};
    });
}

void
eshop_model_destroy(eshop_model* model)
{
    delete model;
}

eshop_status
eshop_model_param_count(const eshop_model* model, size_t* out)
{
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->file.params.size();
    });
}

eshop_status
eshop_model_receptive_field(const eshop_model* model, long* out)
{
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->file.config.receptiveField();
    });
}

eshop_status
eshop_model_window_len(const eshop_model* model, int* out)
{
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = model->model.windowLen();
    });
}

eshop_status
eshop_model_num_features(const eshop_model* model, int* out)
{
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = eshop::kNumFeatures;
    });
}

eshop_status
eshop_model_predict(const eshop_model* model, const double* raw_window, size_t n_values,
                    double* out_tef_s)
{
    return guarded([&] {
        require(model, "model");
        require(raw_window, "raw_window");
        require(out_tef_s, "out_tef_s");
        const auto w = static_cast<size_t>(model->model.windowLen());
        if (n_values != w * eshop::kNumFeatures) {
            eshop::throwData("predict: expected " + std::to_string(w * eshop::kNumFeatures) +
                             " values, got " + std::to_string(n_values));
        }
        std::vector<float> window(n_values);
        std::array<double, eshop::kNumFeatures> raw{};
        for (size_t t = 0; t < w; ++t) {
            if (std::isnan(raw_window[t * eshop::kNumFeatures])) {
                continue; // padding stays zero
            }
            std::copy(raw_window + t * eshop::kNumFeatures,
                      raw_window + (t + 1) * eshop::kNumFeatures, raw.begin());
            const auto s = model->model.standardize(raw);
            std::copy(s.begin(), s.end(), window.begin() + static_cast<std::ptrdiff_t>(t * eshop::kNumFeatures));
        }
        *out_tef_s = model->model.predictWindow(window);
    });
}

} // extern "C"
