#include "model_file.hpp"

#include "common.hpp"
#include "csv.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace eshop {

using nlohmann::json;

namespace {

json
configToJson(const tcn::TcnConfig& c)
{
    return json{{"input_channels", c.inputChannels}, {"kernel_size", c.kernelSize},
                {"dilations", c.dilations},         {"hidden_channels", c.hiddenChannels},
                {"dense_sizes", c.denseSizes},       {"output_dim", c.outputDim},
                {"seed", c.seed}};
}

tcn::TcnConfig
configFromJson(const json& j)
{
    tcn::TcnConfig c;
    c.inputChannels = j.at("input_channels").get<int>();
    c.kernelSize = j.at("kernel_size").get<int>();
    c.dilations = j.at("dilations").get<std::vector<int>>();
    c.hiddenChannels = j.at("hidden_channels").get<int>();
    c.denseSizes = j.at("dense_sizes").get<std::vector<int>>();
    c.outputDim = j.at("output_dim").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

} // namespace

void
writeModel(const std::filesystem::path& p, const ModelFile& m)
{
    const json header{{"format", "eshop-tcn"},
                      {"schema_version", kSchemaVersion},
                      {"config", configToJson(m.config)},
                      {"param_count", m.params.size()},
                      {"window_len", m.windowLen},
                      {"norm_mean", m.normMean},
                      {"norm_std", m.normStd},
                      {"config_hash", m.configHash},
                      {"master_seed", m.masterSeed},
                      {"dtype", "float32-le"}};
    auto out = openForWrite(p);
    out << header.dump() << "\n";
    std::vector<unsigned char> bytes(m.params.size() * 4);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(m.params[i]);
        for (int b = 0; b < 4; ++b) {
            bytes[i * 4 + b] = static_cast<unsigned char>((u >> (8 * b)) & 0xffu);
        }
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throwData("write failed for model '" + p.string() + "'");
    }
}

ModelFile
readModel(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throwData("cannot open model '" + p.string() + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throwData("model file '" + p.string() + "' is empty");
    }
    ModelFile m;
    std::size_t count = 0;
    try {
        const json h = json::parse(line);
        if (h.at("format") != "eshop-tcn") {
            throwData("not an eshop model file");
        }
        if (h.at("schema_version").get<int>() != kSchemaVersion) {
            throwData("model schema_version unsupported");
        }
        m.config = configFromJson(h.at("config"));
        count = h.at("param_count").get<std::size_t>();
        m.windowLen = h.at("window_len").get<int>();
        m.normMean = h.at("norm_mean").get<std::array<double, kNumFeatures>>();
        m.normStd = h.at("norm_std").get<std::array<double, kNumFeatures>>();
        m.configHash = h.at("config_hash").get<std::string>();
        m.masterSeed = h.at("master_seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throwData("model header: " + std::string(e.what()));
    }
    std::vector<unsigned char> bytes(count * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
        throwData("model file '" + p.string() + "' truncated");
    }
    if (in.peek() != std::char_traits<char>::eof()) {
        throwData("model file '" + p.string() + "' has trailing bytes");
    }
    m.params.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b) {
            u |= static_cast<std::uint32_t>(bytes[i * 4 + b]) << (8 * b);
        }
        m.params[i] = std::bit_cast<float>(u);
    }
    return m;
}

tcn::TcnModel<float>
instantiate(const ModelFile& m)
{
    tcn::TcnModel<float> model(m.config);
    if (model.paramCount() != m.params.size()) {
        throwData("model parameter count does not match its architecture");
    }
    model.params().assign(m.params.begin(), m.params.end());
    return model;
}

} // namespace eshop
