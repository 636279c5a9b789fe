#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eshop {

/** Shortest text that round-trips the double exactly. */
std::string formatDouble(double v);

double parseDouble(std::string_view s, std::string_view what);
std::int64_t parseInt(std::string_view s, std::string_view what);

std::vector<std::string_view> splitCsv(std::string_view line);

/** Provenance line written at the top of every CSV artifact. */
struct ArtifactTag
{
    int schemaVersion = 1;
    std::string configHash;
    std::uint64_t masterSeed = 0;

    std::string line() const;
    static std::optional<ArtifactTag> parse(std::string_view line);
};

std::ofstream openForWrite(const std::filesystem::path& p);

/**
 * Reads `# ...` provenance, one header line, then data rows. Every data row must
 * carry exactly as many fields as the header.
 */
class CsvReader
{
  public:
    explicit CsvReader(const std::filesystem::path& p);

    const std::optional<ArtifactTag>& tag() const { return tag_; }
    const std::vector<std::string>& header() const { return header_; }
    std::size_t column(std::string_view name) const;

    /** Returns false at EOF. */
    bool next(std::vector<std::string_view>& fields);
    std::size_t lineNumber() const { return lineNo_; }
    const std::string& currentLine() const { return line_; }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::optional<ArtifactTag> tag_;
    std::vector<std::string> header_;
    std::string line_;
    std::size_t lineNo_ = 0;
};

} // namespace eshop
