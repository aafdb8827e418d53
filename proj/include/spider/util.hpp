#ifndef SPIDER_UTIL_HPP
#define SPIDER_UTIL_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spider {

using Rng = std::mt19937_64;

/// Millisecond timestamps. Crawls over the simulated transport use a logical
/// clock so that runs with fixed seeds are reproducible byte for byte.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t nowMs() = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t nowMs() override;
};

class LogicalClock final : public Clock {
public:
    explicit LogicalClock(std::int64_t start = 0) : now_(start) {}
    std::int64_t nowMs() override { return now_.load(std::memory_order_relaxed); }
    void advance(std::int64_t ms) { now_.fetch_add(ms, std::memory_order_relaxed); }

private:
    std::atomic<std::int64_t> now_;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value configuration: `section.key = value` lines, `#` comments.
/// Flags override file entries by writing into the same map.
class Config {
public:
    Config() = default;
    static Config fromFile(const std::filesystem::path& file);
    void parseLine(std::string_view line, int lineNo = 0);

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string getString(const std::string& key, const std::string& fallback) const;
    std::int64_t getInt(const std::string& key, std::int64_t fallback) const;
    double getDouble(const std::string& key, double fallback) const;
    bool getBool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Directory with shipped calibration tables, stop word lists and language
/// profiles. Resolution order: SPIDER_DATA_DIR env var, then the path baked
/// in at build time.
std::filesystem::path dataDir();

std::string toLowerAscii(std::string_view s);
std::string_view trimView(std::string_view s);
std::vector<std::string> splitLines(std::string_view text);
std::string readFileOrThrow(const std::filesystem::path& p);

/// 64-bit SplitMix step; used to derive independent substream seeds.
std::uint64_t mixSeed(std::uint64_t seed, std::uint64_t salt);

}  // namespace spider

#endif
