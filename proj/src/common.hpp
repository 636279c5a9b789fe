#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eshop {

/** Failure classes. The numeric values double as CLI exit codes. */
enum class ErrorKind : int {
    Internal = 1,
    Config = 2,
    Data = 3,
    Numeric = 4,
};

class Error : public std::runtime_error
{
  public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void
throwConfig(const std::string& msg)
{
    throw Error(ErrorKind::Config, msg);
}

[[noreturn]] inline void
throwData(const std::string& msg)
{
    throw Error(ErrorKind::Data, msg);
}

[[noreturn]] inline void
throwNumeric(const std::string& msg)
{
    throw Error(ErrorKind::Numeric, msg);
}

inline constexpr int kSchemaVersion = 1;

// splitmix64 finalizer
constexpr std::uint64_t
mix64(std::uint64_t z) noexcept
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t
fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept
{
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/**
 * Derives an independent RNG seed for one (ue, purpose) stream.
 * Streams of existing UEs do not depend on how many UEs a run has.
 */
constexpr std::uint64_t
subSeed(std::uint64_t master, std::uint64_t ueId, std::string_view tag) noexcept
{
    return mix64(mix64(master ^ mix64(ueId + 1)) ^ fnv1a64(tag));
}

std::string hex64(std::uint64_t v);

} // namespace eshop
