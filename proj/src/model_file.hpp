#pragma once

#include "dataset.hpp"
#include "tcn.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace eshop {

/**
 * On disk: one JSON header line (config, schema_version, param_count, input
 * normalization), then param_count little-endian float32 values in layout order.
 */
struct ModelFile
{
    tcn::TcnConfig config;
    int windowLen = 64;
    std::array<double, kNumFeatures> normMean{};
    std::array<double, kNumFeatures> normStd{};
    std::string configHash;
    std::uint64_t masterSeed = 0;
    std::vector<float> params;
};

void writeModel(const std::filesystem::path& p, const ModelFile& m);
ModelFile readModel(const std::filesystem::path& p);

/** Builds a float model from file contents, checking the parameter count. */
tcn::TcnModel<float> instantiate(const ModelFile& m);

} // namespace eshop
