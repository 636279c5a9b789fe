#include "csv.hpp"

#include "common.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace eshop {

std::string
hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string
formatDouble(double v)
{
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) {
        throwNumeric("cannot format double");
    }
    return std::string(buf, end);
}

double
parseDouble(std::string_view s, std::string_view what)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throwData("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    }
    return v;
}

std::int64_t
parseInt(std::string_view s, std::string_view what)
{
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throwData("cannot parse " + std::string(what) + " from '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view>
splitCsv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::string
ArtifactTag::line() const
{
    std::ostringstream os;
    os << "# eshop schema_version=" << schemaVersion << " config_hash=" << configHash
       << " master_seed=" << masterSeed;
    return os.str();
}

std::optional<ArtifactTag>
ArtifactTag::parse(std::string_view line)
{
    if (!line.starts_with("# eshop ")) {
        return std::nullopt;
    }
    std::istringstream is{std::string(line.substr(8))};
    ArtifactTag tag;
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
            continue;
        }
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "schema_version") {
            tag.schemaVersion = static_cast<int>(parseInt(val, key));
        } else if (key == "config_hash") {
            tag.configHash = val;
        } else if (key == "master_seed") {
            tag.masterSeed = static_cast<std::uint64_t>(std::stoull(val));
        }
    }
    return tag;
}

std::ofstream
openForWrite(const std::filesystem::path& p)
{
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throwData("cannot open '" + p.string() + "' for writing");
    }
    return out;
}

CsvReader::CsvReader(const std::filesystem::path& p) : path_(p), in_(p, std::ios::binary)
{
    if (!in_) {
        throwData("cannot open '" + p.string() + "'");
    }
    while (std::getline(in_, line_)) {
        ++lineNo_;
        if (line_.starts_with("#")) {
            if (auto t = ArtifactTag::parse(line_)) {
                tag_ = t;
            }
            continue;
        }
        for (auto f : splitCsv(line_)) {
            header_.emplace_back(f);
        }
        return;
    }
    throwData("'" + p.string() + "' has no header line");
}

std::size_t
CsvReader::column(std::string_view name) const
{
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) {
            return i;
        }
    }
    throwData("'" + path_.string() + "' lacks column '" + std::string(name) + "'");
}

bool
CsvReader::next(std::vector<std::string_view>& fields)
{
    while (std::getline(in_, line_)) {
        ++lineNo_;
        if (line_.empty()) {
            continue;
        }
        fields = splitCsv(line_);
        if (fields.size() != header_.size()) {
            std::ostringstream os;
            os << path_.string() << ":" << lineNo_ << ": expected " << header_.size()
               << " fields, found " << fields.size();
            throwData(os.str());
        }
        return true;
    }
    return false;
}

} // namespace eshop
